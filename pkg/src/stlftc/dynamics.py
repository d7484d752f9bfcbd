"""Discrete-time plant models x+ = f(x, u) and their continuous vector fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Dynamics:
    kind: str
    n_state: int
    dt: float
    u_lo: tuple
    u_hi: tuple
    translation_invariant: bool = False
    step_fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("sampling period must be positive")
        if len(self.u_lo) != len(self.u_hi) or any(lo > hi for lo, hi in zip(self.u_lo, self.u_hi)):
            raise ValueError("inconsistent input bounds")
        if self.kind == "custom" and self.step_fn is None:
            raise ValueError("custom dynamics need a step function")

    @property
    def n_input(self):
        return len(self.u_lo)

    @property
    def is_integrator(self):
        return self.kind == "integrator"

    @property
    def key(self):
        extra = id(self.step_fn) if self.kind == "custom" else None
        return (self.kind, self.n_state, self.dt, self.u_lo, self.u_hi, extra)

    def step(self, x, u, dt=None):
        """Advance rows of ``x`` by one period with inputs ``u`` held constant."""
        dt = self.dt if dt is None else dt
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.broadcast_to(np.asarray(u, dtype=float), (len(x), self.n_input))
        if self.kind == "integrator":
            return x + dt * u
        if self.kind == "unicycle":
            return unicycle_flow(x, u, dt)
        return np.asarray(self.step_fn(x, u, dt), dtype=float)

    def vector_field(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.kind == "integrator":
            return u.copy()
        if self.kind == "unicycle":
            return np.array([u[0] * np.cos(x[2]), u[0] * np.sin(x[2]), u[1]])
        raise NotImplementedError("custom dynamics have no continuous vector field")


def integrator(n=2, dt=1.0, bound=1.0):
    return Dynamics("integrator", n, dt, (-bound,) * n, (bound,) * n, translation_invariant=True)


def unicycle(dt=1.0, v_bound=1.0, w_bound=1.0):
    return Dynamics("unicycle", 3, dt, (-v_bound, -w_bound), (v_bound, w_bound))


def custom(step_fn, n_state, u_lo, u_hi, dt=1.0):
    return Dynamics("custom", n_state, dt, tuple(u_lo), tuple(u_hi), step_fn=step_fn)


def unicycle_flow(x, u, dt):
    """Exact unicycle motion under constant (v, w) for ``dt`` seconds."""
    px, py, th = x[:, 0], x[:, 1], x[:, 2]
    v, w = u[:, 0], u[:, 1]
    th1 = th + w * dt
    straight = np.abs(w) < 1e-9
    ws = np.where(straight, 1.0, w)
    dx = np.where(straight, v * dt * np.cos(th), v / ws * (np.sin(th1) - np.sin(th)))
    dy = np.where(straight, v * dt * np.sin(th), -v / ws * (np.cos(th1) - np.cos(th)))
    return np.column_stack([px + dx, py + dy, np.mod(th1, TWO_PI)])
