"""Hierarchical policy: planner every T', tube-tracking QP at the fast rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barrier import FixedTimeParams
from .lowlevel import box_rows, low_level
from .mpc import MpcSetup, mpc_solve
from .qp import OPTIMAL


class IntegratorPlant:
    """x' = u; the controlled output is the state itself."""

    kind = "integrator"

    def __init__(self, n=2):
        self.n_output = n
        self.n_input = n

    def output(self, x):
        return np.asarray(x, dtype=float)[: self.n_output]

    def jacobian(self, x):
        return np.eye(self.n_output)

    def planned_input(self, x, v):
        return np.asarray(v, dtype=float)

    def vector_field(self, x, u):
        return np.asarray(u, dtype=float)


class UnicyclePlant:
    """Unicycle with a look-ahead point p = (x1, x2) + ell (cos th, sin th) as output.

    p' = M(th) (v, w) with M = [[cos, -ell sin], [sin, ell cos]], which is
    invertible for ell > 0, so a planned point velocity maps back to (v, w).
    """

    kind = "unicycle"

    def __init__(self, ell=1.0):
        self.ell = float(ell)
        self.n_output = 2
        self.n_input = 2

    def output(self, x):
        x = np.asarray(x, dtype=float)
        return x[:2] + self.ell * np.array([math.cos(x[2]), math.sin(x[2])])

    def jacobian(self, x):
        c, s = math.cos(x[2]), math.sin(x[2])
        return np.array([[c, -self.ell * s], [s, self.ell * c]])

    def planned_input(self, x, v):
        return np.linalg.solve(self.jacobian(x), np.asarray(v, dtype=float))

    def vector_field(self, x, u):
        th = x[2]
        return np.array([u[0] * math.cos(th), u[0] * math.sin(th), u[1]])


@dataclass
class ControllerState:
    u_m: np.ndarray
    z_minus: np.ndarray
    interval: int = 0
    plan: object = None
    mpc_status: str = "none"
    history: list = field(default_factory=list)


class HierarchicalController:
    """u = u_m + u_l with u_m from the planner, held over each period of length T'."""

    def __init__(self, plant, setup: MpcSetup, params: FixedTimeParams, u_lo, u_hi,
                 lowlevel_dt, slack_weight=None, guard=True):
        self.plant = plant
        self.setup = setup
        self.params = params
        self.A_u, self.b_u = box_rows(u_lo, u_hi)
        self.u_lo = np.asarray(u_lo, dtype=float)
        self.u_hi = np.asarray(u_hi, dtype=float)
        self.dt = float(lowlevel_dt)
        ratio = params.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("planner period must be a multiple of the low-level step")
        self.ratio = int(round(ratio))
        self.slack_weight = slack_weight
        self.guard = guard
        self.state = None

    def plan(self, x):
        """Run the planner at a period boundary; returns the result."""
        y = self.plant.output(x)
        res = mpc_solve(self.setup, y)
        st = self.state
        if res.status != OPTIMAL:
            # keep the previous plan's shifted sequence if one exists
            if st is not None and st.plan is not None and len(st.plan.v) > 1:
                v0 = st.plan.v[1]
                z0 = st.z_minus
                st.plan.v = st.plan.v[1:]
            else:
                v0 = np.zeros(self.plant.n_output)
                z0 = y
        else:
            v0, z0 = res.v[0], res.z[0]
        z_minus = self.setup.A_bar @ z0 + self.setup.B_bar @ v0
        u_m = self.plant.planned_input(x, v0)
        interval = 0 if st is None else st.interval + 1
        self.state = ControllerState(u_m, z_minus, interval,
                                     res if res.status == OPTIMAL else (st.plan if st else None),
                                     res.status)
        self.state.z0 = z0
        return res

    def act(self, x, k):
        """Input at low-level step ``k`` (planner runs when k is a multiple of the ratio)."""
        planned = False
        if k % self.ratio == 0 or self.state is None:
            self.plan(x)
            planned = True
        st = self.state
        y = self.plant.output(x)
        ll = low_level(y, self.plant.jacobian(x), st.u_m, st.z_minus, self.params, self.A_u, self.b_u,
                       self.slack_weight, self.dt if self.guard else None)
        raw = st.u_m + ll.u_l
        # the QP meets the input rows to solver precision; project the rounding away
        u = np.minimum(np.maximum(raw, self.u_lo), self.u_hi)
        log = {"u_m": st.u_m.copy(), "u_l": ll.u_l, "qp_slack": ll.qp_slack, "tube_b": ll.b,
               "ll_status": ll.status, "ll_residual": max(ll.residual, float(np.max(np.abs(u - raw)))), "mpc_status": st.mpc_status,
               "planned": planned, "z_minus": st.z_minus.copy(), "interval": st.interval}
        return u, log
