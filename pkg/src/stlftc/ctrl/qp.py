"""Dense convex QP solver (Goldfarb-Idnani dual active-set method).

Solves  min 1/2 x'Hx + g'x  s.t.  A_eq x = b_eq,  A x <= b.

The method starts from the unconstrained minimizer and adds one violated
constraint at a time, dropping active ones whose multipliers would turn
negative. Every iterate is dual feasible, so infeasibility shows up as a
violated constraint that no step can repair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL, INFEASIBLE, MAX_ITER = "optimal", "infeasible", "max_iter"


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = self.H.shape[0]
        self.g = np.asarray(self.g, dtype=float).reshape(n)
        self.A = np.zeros((0, n)) if self.A is None else np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        self.A_eq = np.zeros((0, n)) if self.A_eq is None else np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).reshape(-1)
        if self.H.shape != (n, n) or len(self.b) != len(self.A) or len(self.b_eq) != len(self.A_eq):
            raise ValueError("inconsistent QP dimensions")
        if not np.allclose(self.H, self.H.T, atol=1e-12 * max(1.0, np.abs(self.H).max())):
            raise ValueError("cost matrix must be symmetric")

    @property
    def n(self):
        return self.H.shape[0]


@dataclass
class QpResult:
    x: np.ndarray
    status: str
    iterations: int
    multipliers: np.ndarray
    active: list

    def __iter__(self):
        return iter((self.x, self.status))


def _cholesky(H):
    scale = max(1.0, float(np.abs(np.diag(H)).max()))
    reg = 0.0
    for _ in range(12):
        try:
            return np.linalg.cholesky(H + reg * np.eye(len(H))), reg
        except np.linalg.LinAlgError:
            reg = 1e-12 * scale if reg == 0.0 else reg * 100
    raise np.linalg.LinAlgError("cost matrix is not positive semidefinite")


def solve_qp(qp: QpProblem, max_iter: int | None = None, tol: float = 1e-10) -> QpResult:
    n = qp.n
    L, _ = _cholesky(qp.H)
    Linv = np.linalg.solve(L, np.eye(n))
    Hinv = Linv.T @ Linv
    m_eq = len(qp.b_eq)
    # every constraint as  n_j' x >= c_j
    N_all = np.vstack([qp.A_eq, -qp.A]) if len(qp.A) else qp.A_eq.copy()
    c_all = np.concatenate([qp.b_eq, -qp.b])
    norms = np.maximum(np.linalg.norm(N_all, axis=1), 1e-300) if len(c_all) else np.zeros(0)
    max_iter = max_iter or 10 * (n + len(c_all)) + 50

    x = -Hinv @ qp.g
    active: list = []
    u = np.zeros(0)
    eq_sign = np.ones(m_eq)
    eq_done = np.zeros(m_eq, dtype=bool)
    it = 0

    def reduced(act):
        if not act:
            return Hinv, np.zeros((0, n))
        Na = N_all[act].T.copy()
        for k, j in enumerate(act):
            if j < m_eq:
                Na[:, k] *= eq_sign[j]
        HN = Hinv @ Na
        S = Na.T @ HN
        Nstar = np.linalg.solve(S, HN.T)
        return Hinv - HN @ Nstar, Nstar

    Hred, Nstar = reduced(active)
    while it < max_iter:
        it += 1
        s = N_all @ x - c_all if len(c_all) else np.zeros(0)
        p = -1
        if m_eq and not eq_done.all():
            pend = np.flatnonzero(~eq_done)
            p = int(pend[np.argmax(np.abs(s[pend]) / norms[pend])])
            eq_sign[p] = 1.0 if s[p] <= 0 else -1.0
            if abs(s[p]) <= tol * max(1.0, norms[p]):
                eq_done[p] = True
                active.append(p)
                u = np.append(u, 0.0)
                Hred, Nstar = reduced(active)
                continue
        else:
            viol = np.where(np.isin(np.arange(len(c_all)), active), 0.0, np.minimum(s, 0.0) / np.maximum(norms, 1e-300))
            if len(viol) == 0 or viol.min() >= -tol:
                return _finish(qp, x, OPTIMAL, it, active, u, eq_sign, m_eq)
            p = int(np.argmin(viol))
        sign = eq_sign[p] if p < m_eq else 1.0
        npl = sign * N_all[p]
        sp = sign * s[p]
        uplus = np.append(u, 0.0)
        while True:
            it += 1
            if it > max_iter:
                return _finish(qp, x, MAX_ITER, it, active, u, eq_sign, m_eq)
            z = Hred @ npl
            r = Nstar @ npl if active else np.zeros(0)
            t1, k = np.inf, -1
            for idx, j in enumerate(active):
                if j >= m_eq and r[idx] > 1e-14:
                    ratio = uplus[idx] / r[idx]
                    if ratio < t1:
                        t1, k = ratio, idx
            zn = float(z @ npl)
            # z vanishes when the new normal is spanned by the active ones
            dependent = len(active) >= n or zn <= 1e-11 * float(npl @ Hinv @ npl)
            t2 = np.inf if dependent else -sp / zn
            if not np.isfinite(t1) and not np.isfinite(t2):
                return _finish(qp, x, INFEASIBLE, it, active, u, eq_sign, m_eq)
            if not np.isfinite(t2):
                uplus[:-1] -= t1 * r
                uplus[-1] += t1
                del active[k]
                uplus = np.delete(uplus, k)
                Hred, Nstar = reduced(active)
                continue
            t = min(t1, t2)
            x = x + t * z
            uplus[:-1] -= t * r
            uplus[-1] += t
            sp = sign * (N_all[p] @ x - c_all[p])
            if t2 <= t1:
                active.append(p)
                if p < m_eq:
                    eq_done[p] = True
                u = uplus
                Hred, Nstar = reduced(active)
                break
            del active[k]
            uplus = np.delete(uplus, k)
            Hred, Nstar = reduced(active)
    return _finish(qp, x, MAX_ITER, it, active, u, eq_sign, m_eq)


def _finish(qp, x, status, it, active, u, eq_sign, m_eq):
    lam = np.zeros(len(qp.b_eq) + len(qp.b))
    for idx, j in enumerate(active):
        lam[j] = u[idx] * (eq_sign[j] if j < m_eq else 1.0)
    return QpResult(x, status, it, lam, list(active))


def kkt_residual(qp: QpProblem, x, multipliers):
    """Max of stationarity, primal and complementarity residuals for Ax <= b form."""
    m_eq = len(qp.b_eq)
    lam_eq = multipliers[:m_eq]
    lam = multipliers[m_eq:]
    grad = qp.H @ x + qp.g - qp.A_eq.T @ lam_eq + qp.A.T @ lam
    prim = max(np.max(qp.A @ x - qp.b, initial=0.0), np.max(np.abs(qp.A_eq @ x - qp.b_eq), initial=0.0))
    comp = np.max(np.abs(lam * (qp.A @ x - qp.b)), initial=0.0)
    return max(np.max(np.abs(grad)), prim, comp, -np.min(lam, initial=0.0))
