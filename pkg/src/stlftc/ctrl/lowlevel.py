"""Low-level fixed-time CBF-QP that pulls the controlled output onto the tube center.

Decision variables are (u_l, qp_slack). The barrier of interval i is
b = c^2/2 - |y - z|^2/2 with z the planner's end-of-interval reference and y
the controlled output, whose velocity is J(x) u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barrier import FixedTimeParams
from .qp import OPTIMAL, QpProblem, solve_qp


def ball_polytope(n, radius):
    """Rows F and bound h with {F e <= h} inside the Euclidean ball of ``radius``.

    2-D uses a regular octagon with vertices on the circle; other dims use a cube.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.full(2, float(radius))
    if n == 2:
        ang = np.arange(8) * math.pi / 4
        return np.column_stack([np.cos(ang), np.sin(ang)]), np.full(8, radius * math.cos(math.pi / 8))
    F = np.vstack([np.eye(n), -np.eye(n)])
    return F, np.full(2 * n, radius / math.sqrt(n))


def box_rows(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(lo)
    return np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([hi, -lo])


@dataclass
class LowLevelResult:
    u_l: np.ndarray
    qp_slack: float
    b: float
    status: str
    guarded: bool
    residual: float


def tube_barrier(y, z, c):
    e = np.asarray(y, dtype=float) - np.asarray(z, dtype=float)
    return 0.5 * c * c - 0.5 * float(e @ e), e


def low_level(y, J, u_m, z, params: FixedTimeParams, A_u, b_u, slack_weight=None,
              guard_dt=None, guard_scale=0.9, Lf=0.0):
    """Solve the tube QP at output ``y`` with output Jacobian ``J``.

    With ``guard_dt`` set, a first try also asks that one zero-order-hold step
    of length guard_dt lands inside a polytope within ``guard_scale * c`` of z;
    if that is infeasible the plain QP is solved.
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    u_m = np.asarray(u_m, dtype=float)
    ny, nu = J.shape
    c = params.c
    w = c if slack_weight is None else slack_weight
    b, e = tube_barrier(y, z, c)
    Lg = -e @ J
    neg = max(0.0, -b)
    rhs = params.alpha * (neg ** params.gamma1 + neg ** params.gamma2)
    H = np.eye(nu + 1)
    g = np.zeros(nu + 1)
    g[-1] = w
    A_u = np.atleast_2d(A_u)
    rows = [np.hstack([A_u, np.zeros((len(A_u), 1))]), np.concatenate([-Lg, [-b]])[None, :]]
    bounds = [np.asarray(b_u, dtype=float) - A_u @ u_m, np.array([Lf + Lg @ u_m - rhs])]
    A = np.vstack(rows)
    bb = np.concatenate(bounds)
    res = None
    guarded = False
    if guard_dt is not None:
        F, h = ball_polytope(ny, guard_scale * c)
        Gd = F @ (guard_dt * J)
        Ag = np.vstack([A, np.hstack([Gd, np.zeros((len(F), 1))])])
        bg = np.concatenate([bb, h - F @ (e + guard_dt * (J @ u_m))])
        res = solve_qp(QpProblem(H, g, Ag, bg))
        guarded = res.status == OPTIMAL
        if guarded:
            A, bb = Ag, bg
    if not guarded:
        res = solve_qp(QpProblem(H, g, A, bb))
    viol = float(np.max(A @ res.x - bb, initial=0.0))
    return LowLevelResult(res.x[:nu], float(res.x[-1]), b, res.status, guarded, viol)
