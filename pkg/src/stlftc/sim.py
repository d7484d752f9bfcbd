"""Closed-loop simulation: hierarchical controller, faults, online monitor, logs."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dynmod
from .ctrl.barrier import build_barriers, fixed_time_params, region_box, slack_bound
from .ctrl.lowlevel import ball_polytope, box_rows
from .ctrl.mpc import MpcSetup
from .ctrl.policy import HierarchicalController, IntegratorPlant, UnicyclePlant
from .errors import NonBoxFragment, OutOfDomain, ScenarioError
from .feasible import compute_table, horizon_of
from .formula import Predicate, horizon, parse, rewrite_until, satisfies
from .monitor import VIOLATED, initial_state, step as monitor_step
from .sets import BoxUnion, GridMask, InputGrid, Space
from .stlt import build, check_satisfaction, encode_times, fragments_of, monitor_groups, path_groups


# ---------------------------------------------------------------- problem set-up


@dataclass
class Problem:
    scenario: dict
    predicates: dict
    phi_raw: object
    phi: object
    dyn: object
    inputs: InputGrid
    spaces: dict = field(default_factory=dict)
    trees: dict = field(default_factory=dict)
    _tables: dict = field(default_factory=dict)

    @property
    def kind(self):
        return self.dyn.kind

    def space(self, representation):
        if representation not in self.spaces:
            self.spaces[representation] = make_space(self.scenario, representation)
        return self.spaces[representation]

    def tree(self, representation):
        if representation not in self.trees:
            self.trees[representation] = build(self.phi, self.space(representation), self.dyn, self.inputs,
                                               convention=self.scenario["convention"])
        return self.trees[representation]

    def groups(self, representation):
        return [g for _, g in self.branch_groups(representation)]

    def branch_groups(self, representation):
        """(or-branch index, flat fragments) per monitor group."""
        tree = self.tree(representation)
        return monitor_groups(tree, self.space(representation).full(), with_branch=True)

    def tables(self, representation):
        if representation not in self._tables:
            full = self.space(representation).full()
            self._tables[representation] = [compute_table(g, self.dyn, self.inputs, horizon_of(g), full)
                                            for g in self.groups(representation)]
        return self._tables[representation]

    @property
    def exact(self):
        """Representation used for satisfaction checks: boxes when they apply."""
        return "box" if self.kind == "integrator" else "grid"


def make_space(sc, representation, resolution=None):
    ws = sc["workspace"]
    g = sc["grid"]
    if representation == "box":
        return Space(ws, "box")
    res = resolution if resolution is not None else g["resolution"]
    shape = g.get("shape")
    if shape is not None and resolution is not None:
        shape = [s if p else int(round((hi - lo) / resolution))
                 for s, p, (lo, hi) in zip(shape, g["periodic"], ws)]
    return Space(ws, "grid", resolution=res, shape=shape, periodic=g["periodic"],
                 conservative=g["conservative"])


def make_dynamics(sc):
    d = sc["dynamics"]
    if d["kind"] == "integrator":
        dyn = dynmod.Dynamics("integrator", len(sc["workspace"]), float(d["dt"]), tuple(d["u_lo"]),
                              tuple(d["u_hi"]), translation_invariant=True)
    else:
        dyn = dynmod.Dynamics("unicycle", 3, float(d["dt"]), tuple(d["u_lo"]), tuple(d["u_hi"]))
    return dyn


def prepare(sc, resolution=None) -> Problem:
    preds = {}
    for name, p in sc["predicates"].items():
        if "box" in p:
            preds[name] = Predicate.from_box(name, p["box"])
        else:
            preds[name] = Predicate.from_halfspace(name, p["normal"], p.get("offset", 0.0))
    phi_raw = parse(sc["formula"], preds, dt=float(sc["dynamics"]["dt"]))
    dyn = make_dynamics(sc)
    inputs = InputGrid.box(dyn.u_lo, dyn.u_hi, int(sc["inputs_per_axis"]))
    prob = Problem(sc, preds, phi_raw, rewrite_until(phi_raw), dyn, inputs)
    if resolution is not None:
        prob.spaces["grid"] = make_space(sc, "grid", resolution)
    return prob


# ---------------------------------------------------------------- faults


def apply_fault(fault, u, t, memory):
    if fault is None or t < fault["t_start"] - 1e-12:
        return u
    kind = fault["kind"]
    if kind == "actuator_scale":
        return u * float(fault["value"])
    if kind == "stuck_input":
        if "stuck" not in memory:
            memory["stuck"] = u.copy()
        return memory["stuck"]
    if kind == "additive_bias":
        return u + np.asarray(fault["value"], dtype=float)
    raise ScenarioError(f"unknown fault {kind!r}")


def verify_input_bounds(inputs, bounds, tol=1e-9):
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    u = np.atleast_2d(np.asarray(inputs, dtype=float))
    return bool(np.all(u >= lo - tol) and np.all(u <= hi + tol))


# ---------------------------------------------------------------- controller assembly


def _pos_box(region, npos, workspace):
    try:
        lo, hi = region_box(region, npos)
    except NonBoxFragment:
        if isinstance(region, GridMask):
            bb = region.bounding_box()
        else:
            bb = (np.min([b[0] for b in region.boxes], axis=0), np.max([b[1] for b in region.boxes], axis=0))
        lo, hi = np.asarray(bb[0][:npos]), np.asarray(bb[1][:npos])
    wlo = np.array([w[0] for w in workspace[:npos]])
    whi = np.array([w[1] for w in workspace[:npos]])
    return np.maximum(lo, wlo), np.minimum(hi, whi)


def choose_branch(prob, x0, rep):
    sc = prob.scenario
    pinned = (sc.get("controller") or {}).get("branch")
    groups = path_groups(prob.tree(rep))
    if pinned is not None:
        if not 0 <= pinned < len(groups):
            raise ScenarioError(f"controller.branch must be in [0, {len(groups) - 1}]")
        return pinned
    rep_mon = sc["monitor"]["representation"]
    branches = [b for b, _ in prob.branch_groups(rep_mon)]
    for b, tb in zip(branches, prob.tables(rep_mon)):
        i1 = max(tb.index_sets(0))
        try:
            if tb.region(0, i1).member(x0):
                return b
        except OutOfDomain:
            continue
    return 0


def controller_for(prob: Problem, x0):
    sc = prob.scenario
    cfg = sc.get("controller")
    if cfg is None:
        raise ScenarioError(f"scenario {sc['name']!r} has no controller block; add one to simulate it")
    rep = prob.exact
    tree = prob.tree(rep)
    T = 1.0 / float(cfg["planner_rate"])
    if abs(T - float(cfg["T_prime"])) > 1e-9:
        raise ScenarioError("controller.T_prime must equal 1 / planner_rate")
    params = fixed_time_params(T, cfg["mu"], cfg["k"], cfg["r"], cfg["c"], cfg["d"])
    branch = choose_branch(prob, x0, rep)
    group = path_groups(tree)[branch]
    nodes = [nid for path in group for nid in path]
    # nearest first-visit target among the eventually-leaves of the branch
    plain = _formula_deadlines(tree)
    leaves = [nid for nid in dict.fromkeys(nodes)
              if tree.nodes[nid].is_leaf and (op := tree.parent_op(tree.nodes[nid])) is not None
              and op.kind == "F"]
    if not leaves:
        leaves = [nid for nid in dict.fromkeys(nodes) if tree.nodes[nid].is_leaf]
    target = min(leaves, key=lambda nid: plain[nid])
    npos = 2 if prob.kind == "unicycle" else len(sc["workspace"])
    tlo, thi = _pos_box(tree.nodes[target].region, npos, sc["workspace"])
    goal = (tlo + thi) / 2.0
    safe_node = group[0][1] if len(group[0]) > 1 and tree.root.op.kind == "or" else 0
    slo, shi = _pos_box(tree.nodes[safe_node].region, npos, sc["workspace"])
    if prob.kind == "unicycle":
        plant = UnicyclePlant(cfg["lookahead"])
        Ur, Ub = ball_polytope(2, cfg["u_m_bound"])
        margin = cfg["lookahead"]
    else:
        plant = IntegratorPlant(npos)
        hi = np.asarray(sc["dynamics"]["u_hi"], dtype=float)
        lo = np.asarray(sc["dynamics"]["u_lo"], dtype=float)
        Ur, Ub = box_rows(cfg["u_m_bound"] * lo, cfg["u_m_bound"] * hi)
        margin = 0.0
    eye = np.eye(npos)
    setup = MpcSetup.build(np.zeros((npos, npos)), eye, T, cfg["N"], slo, shi, goal, cfg["c"], cfg["d"],
                           Ur, Ub, cfg["Q"] * eye, cfg["R"] * eye, cfg["Q_f"] * eye, margin=margin)
    ctl = HierarchicalController(plant, setup, params, sc["dynamics"]["u_lo"], sc["dynamics"]["u_hi"],
                                 1.0 / float(cfg["lowlevel_rate"]), cfg["slack_weight"], cfg["guard"])
    return ctl, branch, group, target


def _formula_deadlines(tree):
    import copy
    plain = copy.copy(tree)
    plain.nodes = [copy.copy(n) for n in tree.nodes]
    encode_times(plain, "formula")
    return {n.id: n.start[1] for n in plain.nodes}


# ---------------------------------------------------------------- simulation


@dataclass
class SimResult:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    commanded: np.ndarray
    samples: np.ndarray
    log: list
    monitor_log: list
    summary: dict


def _rk4(f, x, u, h):
    k1 = f(x, u)
    k2 = f(x + h / 2 * k1, u)
    k3 = f(x + h / 2 * k2, u)
    k4 = f(x + h * k3, u)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def run(sc, rates=None, resolution=None, monitor=True, prob=None) -> SimResult:
    """Simulate the scenario; ``rates`` = (planner Hz, low-level Hz) overrides the controller block."""
    t_start = time.perf_counter()
    if rates is not None:
        sc = json.loads(json.dumps(sc))
        sc["controller"]["planner_rate"], sc["controller"]["lowlevel_rate"] = map(float, rates)
        sc["controller"]["T_prime"] = 1.0 / float(rates[0])
    prob = prob or prepare(sc, resolution)
    if "initial_state" not in sc:
        raise ScenarioError("scenario has no initial_state")
    x = np.asarray(sc["initial_state"], dtype=float)
    ctl, branch, group, target = controller_for(prob, x)
    plant = ctl.plant
    H = sc["horizon"] if sc["horizon"] is not None else horizon(prob.phi)
    dt_formula = float(sc["dynamics"]["dt"])
    steps_per_sample = int(round(dt_formula * sc["controller"]["lowlevel_rate"]))
    n_steps = int(round(H * steps_per_sample))
    h = ctl.dt
    u_lo = np.asarray(sc["dynamics"]["u_lo"], dtype=float)
    u_hi = np.asarray(sc["dynamics"]["u_hi"], dtype=float)
    fault = sc.get("fault")
    memory = {}

    rep = prob.exact
    tree = prob.tree(rep)
    group_nodes = {nid for path in group for nid in path}
    frags = fragments_of(tree)
    try:
        barriers = build_barriers(tree, float(np.max(np.abs(np.concatenate([u_lo, u_hi])))),
                                  ndim=2 if prob.kind == "unicycle" else None, skip_nonbox=True)
    except NonBoxFragment:
        barriers = None
    mine = [f for f in frags if f.node in group_nodes]

    tables = prob.tables(sc["monitor"]["representation"]) if monitor else []
    ms = initial_state(tables) if monitor else None
    mon_log = []
    verdict = "feasible"
    rbar = slack_bound(ctl.params)

    times, states, applied, commanded, log, samples = [], [], [], [], [], []
    tube_end, tube_sup = 0.0, 0.0
    prev_z = None
    slack_viol = 0
    min_b = math.inf
    for k in range(n_steps + 1):
        t = k * h
        if k % steps_per_sample == 0:
            samples.append(x.copy())
            if monitor:
                ms, rec = monitor_step(ms, x, tables)
                rec["t"] = int(round(t / dt_formula))
                mon_log.append(rec)
                verdict = rec["verdict"]
        if k == n_steps:
            times.append(t)
            states.append(x.copy())
            break
        u_cmd, row = ctl.act(x, k)
        if row["planned"] and prev_z is not None:
            tube_end = max(tube_end, float(np.linalg.norm(plant.output(x) - prev_z)))
        prev_z = row["z_minus"]
        u = apply_fault(fault, u_cmd, t, memory)
        act, bval = None, math.nan
        if barriers is not None:
            live = [f for f in mine if f.domain[0] <= t <= f.domain[1] and barriers[f.id] is not None]
            if live:
                act = live[-1].id
                bval = float(barriers[act].value(x, t))
                min_b = min(min_b, bval)
        if row["qp_slack"] / (2 * ctl.params.alpha) > rbar:
            slack_viol += 1
        times.append(t)
        states.append(x.copy())
        applied.append(u.copy())
        commanded.append(u_cmd.copy())
        log.append({"t": t, "x": x.copy(), "u_m": row["u_m"], "u_l": row["u_l"], "qp_slack": row["qp_slack"],
                    "active_fragment": act, "b_value": bval, "mpc_status": row["mpc_status"],
                    "ll_status": row["ll_status"], "ll_residual": row["ll_residual"], "verdict": verdict})
        x = _rk4(plant.vector_field, x, u, h)
        if prob.kind == "unicycle":
            x[2] = math.fmod(x[2], 2 * math.pi)
            if x[2] < 0:
                x[2] += 2 * math.pi
        tube_sup = max(tube_sup, float(np.linalg.norm(plant.output(x) - prev_z)))
    if prev_z is not None and n_steps % ctl.ratio == 0:
        tube_end = max(tube_end, float(np.linalg.norm(plant.output(x) - prev_z)))
    samples = np.array(samples)
    if len(samples) > horizon(prob.phi):
        final = "satisfied" if check_satisfaction(samples, tree) else "violated"
        semantic = "satisfied" if satisfies(prob.phi_raw, samples) else "violated"
    else:
        # the run stopped before the formula's horizon
        final = semantic = "inconclusive"
    applied = np.array(applied)
    summary = {
        "scenario": sc.get("name"),
        "final_verdict": final,
        "semantic_verdict": semantic,
        "monitor_verdict": verdict if monitor else None,
        "alarm_step": ms.alarm_step if monitor else None,
        "branch": branch,
        "goal_node": target,
        "min_barrier": None if min_b == math.inf else min_b,
        "max_abs_u": float(np.max(np.abs(applied))) if len(applied) else 0.0,
        "inputs_within_bounds": verify_input_bounds(applied, (u_lo, u_hi)),
        "mpc_all_optimal": all(r["mpc_status"] == "optimal" for r in log),
        "lowlevel_all_optimal": all(r["ll_status"] == "optimal" for r in log),
        "lowlevel_max_residual": max((r["ll_residual"] for r in log), default=0.0),
        "tube_end_max": tube_end,
        "tube_sup_max": tube_sup,
        "slack_bound": rbar,
        "slack_bound_violations": slack_viol,
        "horizon": H,
        "runtime_s": time.perf_counter() - t_start,
    }
    return SimResult(np.array(times), np.array(states), applied, np.array(commanded), samples, log,
                     mon_log, summary)


def oracle_alarm(prob: Problem, samples):
    """First step at which the exact (box) tables of the same groups reject the prefix."""
    from .monitor import run as monitor_run
    ms, _ = monitor_run(samples, prob.tables("box"))
    return ms.alarm_step


# ---------------------------------------------------------------- output files


def write_outputs(res: SimResult, out_dir, n_state):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trajectory.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        m = res.inputs.shape[1] if res.inputs.ndim == 2 and len(res.inputs) else 0
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n_state)] + [f"u{i + 1}" for i in range(m)] + ["verdict"])
        for k, t in enumerate(res.times):
            u = res.inputs[k] if k < len(res.inputs) else np.full(m, np.nan)
            v = res.log[k]["verdict"] if k < len(res.log) else (res.monitor_log[-1]["verdict"] if res.monitor_log else "")
            w.writerow([f"{t:.6f}"] + [f"{a:.9g}" for a in res.states[k]] + [f"{a:.9g}" for a in u] + [v])
    with open(os.path.join(out_dir, "controller_log.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u_m", "u_l", "qp_slack", "active_fragment", "b_value", "mpc_status"])
        for r in res.log:
            w.writerow([f"{r['t']:.6f}", " ".join(f"{a:.9g}" for a in r["x"]),
                        " ".join(f"{a:.9g}" for a in r["u_m"]), " ".join(f"{a:.9g}" for a in r["u_l"]),
                        f"{r['qp_slack']:.9g}", "" if r["active_fragment"] is None else r["active_fragment"] + 1,
                        f"{r['b_value']:.9g}", r["mpc_status"]])
    with open(os.path.join(out_dir, "verdicts.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "verdict", "remaining_mask"])
        for r in res.monitor_log:
            w.writerow([r["t"], r["verdict"], r["mask"]])
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(res.summary, fh, indent=2, sort_keys=True)
