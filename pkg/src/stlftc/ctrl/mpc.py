"""Reference planner: condensed finite-horizon QP over (z0, v_0..v_{N-1}).

The optimized z0 is the reset of the reference model; v_0 is held over the
next planner period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ..errors import DomainError
from .lowlevel import ball_polytope, box_rows
from .qp import OPTIMAL, QpProblem, solve_qp


def discretize(A, B, T):
    """Zero-order-hold transition pair from the block matrix exponential."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = expm(M * T)
    return E[:n, :n], E[:n, n:]


@dataclass
class MpcSetup:
    A_bar: np.ndarray
    B_bar: np.ndarray
    N: int
    Q: np.ndarray
    R: np.ndarray
    Q_f: np.ndarray
    state_lo: np.ndarray      # box for z_k, already shrunk by the tube radii
    state_hi: np.ndarray
    U_rows: np.ndarray        # v in U_m  <=>  U_rows v <= U_bound
    U_bound: np.ndarray
    goal: np.ndarray
    terminal_half: float      # X_F is the box goal +- terminal_half
    c: float
    d: float

    @classmethod
    def build(cls, A, B, T, N, lo, hi, goal, c, d, U_rows, U_bound, Q=None, R=None, Q_f=None,
              margin=0.0):
        """Setup for the safe box [lo, hi]; states are confined to it shrunk by d + c + margin."""
        A_bar, B_bar = discretize(A, B, T)
        n = A_bar.shape[0]
        eye = np.eye(n)
        shrink = d + c + margin
        s = cls(A_bar, B_bar, int(N), eye if Q is None else np.asarray(Q, float),
                0.1 * np.eye(B_bar.shape[1]) if R is None else np.asarray(R, float),
                eye if Q_f is None else np.asarray(Q_f, float),
                np.asarray(lo, float) + shrink, np.asarray(hi, float) - shrink,
                np.asarray(U_rows, float), np.asarray(U_bound, float), np.asarray(goal, float),
                d - c, c, d)
        s.validate()
        return s

    @property
    def n(self):
        return self.A_bar.shape[0]

    @property
    def m(self):
        return self.B_bar.shape[1]

    def terminal_box(self):
        return self.goal - self.terminal_half, self.goal + self.terminal_half

    def validate(self):
        if not 0 < self.c < self.d:
            raise DomainError("tube radii need 0 < c < d")
        if np.any(self.state_lo > self.state_hi):
            raise DomainError("state box is empty after shrinking by the tube radii")
        lo, hi = self.terminal_box()
        if np.any(lo < self.state_lo - 1e-12) or np.any(hi > self.state_hi + 1e-12):
            raise DomainError("terminal box leaves the state box")
        # terminal box invariant for z+ = A z with steps no longer than d - c
        corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(self.n, -1).T
        img = corners @ self.A_bar.T
        if np.any(img < lo - 1e-9) or np.any(img > hi + 1e-9):
            raise DomainError("terminal box is not invariant under the reference model")
        if np.max(np.linalg.norm(img - corners, axis=1)) > self.d - self.c + 1e-12:
            raise DomainError("autonomous reference steps exceed d - c on the terminal box")


@dataclass
class MpcResult:
    v: np.ndarray
    z: np.ndarray
    status: str
    cost: float

    def __iter__(self):
        return iter((self.v, self.z, self.status))


def _prediction(setup: MpcSetup):
    """Matrices P_k with z_k = P_k @ [z0, v_0..v_{N-1}]."""
    n, m, N = setup.n, setup.m, setup.N
    nv = n + N * m
    P = [np.hstack([np.eye(n), np.zeros((n, N * m))])]
    for k in range(N):
        nxt = setup.A_bar @ P[-1]
        nxt[:, n + k * m:n + (k + 1) * m] += setup.B_bar
        P.append(nxt)
    return P, nv


def build_qp(setup: MpcSetup, x_now):
    n, m, N = setup.n, setup.m, setup.N
    P, nv = _prediction(setup)
    H = np.zeros((nv, nv))
    g = np.zeros(nv)
    for k in range(N + 1):
        W = setup.Q_f if k == N else setup.Q
        H += 2 * P[k].T @ W @ P[k]
        g += -2 * P[k].T @ W @ setup.goal
    for k in range(N):
        S = np.zeros((m, nv))
        S[:, n + k * m:n + (k + 1) * m] = np.eye(m)
        H += 2 * S.T @ setup.R @ S
    rows, bounds = [], []
    Fs, hs = ball_polytope(n, setup.d - setup.c)
    Fx, hx = box_rows(setup.state_lo, setup.state_hi)
    Ft, ht = box_rows(*setup.terminal_box())
    Fc, hc = ball_polytope(n, setup.c)
    for k in range(N):
        rows.append(Fs @ (P[k + 1] - P[k]))
        bounds.append(hs)
        S = np.zeros((m, nv))
        S[:, n + k * m:n + (k + 1) * m] = np.eye(m)
        rows.append(setup.U_rows @ S)
        bounds.append(setup.U_bound)
    for k in range(N + 1):
        rows.append(Fx @ P[k])
        bounds.append(hx)
    rows.append(Ft @ P[N])
    bounds.append(ht)
    rows.append(Fc @ P[0])
    bounds.append(hc + Fc @ np.asarray(x_now, dtype=float))
    return QpProblem(H, g, np.vstack(rows), np.concatenate(bounds)), P


def mpc_solve(setup: MpcSetup, x_now) -> MpcResult:
    qp, P = build_qp(setup, x_now)
    res = solve_qp(qp)
    zeta = res.x
    n = setup.n
    v = zeta[n:].reshape(setup.N, setup.m)
    z = np.array([Pk @ zeta for Pk in P])
    cost = 0.5 * zeta @ qp.H @ zeta + qp.g @ zeta
    if res.status == OPTIMAL and np.max(qp.A @ zeta - qp.b, initial=0.0) > 1e-7:
        return MpcResult(v, z, "infeasible", float(cost))
    return MpcResult(v, z, res.status, float(cost))
