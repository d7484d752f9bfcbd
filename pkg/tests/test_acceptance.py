"""One test per acceptance criterion; each prints a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` to see the lines next to the
test names.
"""

import math
import random
import time
from functools import lru_cache

import numpy as np
import pytest
from conftest import WALK, WALK_DYN, WALK_INPUTS, walk_fragments, walk_states
from oracles import (doom_step_gf_or_until, feasible_set, pg_qp, prefix_feasible, random_gridworld,
                     rollouts, fragment_holds)

from stlftc import scenario as scmod, sim
from stlftc.ctrl.barrier import build_barriers, fixed_time_params
from stlftc.ctrl.qp import OPTIMAL, QpProblem, solve_qp
from stlftc.feasible import compute_table, horizon_of, members, potential_index_sets
from stlftc.monitor import VIOLATED, run as monitor_run
from stlftc.sets import BoxUnion, agrees_within
from stlftc.stlt import encode_times, fragments_of

# reference set values of the integrator tree, node id -> boxes
REFERENCE_REGIONS = {
    0: [((-12.5, -18.5), (18.5, 12.5)), ((-14.5, -14.5), (8.5, 8.5))],
    1: [((-14.5, -14.5), (8.5, 8.5))],
    2: [((-12.5, -18.5), (18.5, 12.5))],
    3: [((-14.5, -14.5), (8.5, 8.5))],
    4: [((1.5, -4.5), (4.5, -1.5))],
    5: [((-4.5, -4.5), (-1.5, -1.5))],
}

# reference time encoding: node -> (start interval, duration, fragment domain)
REFERENCE_ENCODING = {
    3: ((0, 16), 16, (0, 16)),
    5: ((2, 18), 8, (2, 26)),
    4: ((10, 14), 0, (10, 14)),
    8: ((10, 14), 10, (10, 24)),
    9: ((15, 24), 0, (15, 24)),
}

# reference barriers in fragment order: center and radius pieces (t0, t1, const, slope)
REFERENCE_BARRIERS = [
    ((-3, -3), [(0, 16, 11.5, -1)]),
    ((-3, -3), [(2, 18, 11.5, -1), (18, 26, 3, 0)]),
    ((3, -3), [(10, 14, 15.5, -1)]),
    ((3, -3), [(10, 14, 15.5, -1), (14, 20, 3, 0)]),
    ((3, 0), [(15, 24, 27, -1)]),
]


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {k} {'PASS' if ok else 'FAIL'}: {detail}")


def test_criterion_1_set_values(capsys):
    t0 = time.perf_counter()
    prob = sim.prepare(scmod.bundled("integrator"))
    box_tree, grid_tree = prob.tree("box"), prob.tree("grid")
    elapsed = time.perf_counter() - t0
    bad = []
    for nid, boxes in REFERENCE_REGIONS.items():
        r = box_tree.nodes[nid].region
        want = BoxUnion(boxes, r.workspace)
        if not r.same_set(want):
            bad.append(f"X{nid} box")
        if not agrees_within(grid_tree.nodes[nid].region, want, 0.25 + 1e-9):
            bad.append(f"X{nid} grid")
    ok = not bad and elapsed < 10
    report(capsys, 1, ok, f"{len(REFERENCE_REGIONS)} nodes, mismatches {bad or 'none'}, {elapsed:.2f} s")
    assert not bad
    assert elapsed < 10


def test_criterion_2_time_encoding(capsys, integrator_tree):
    tree = encode_times(integrator_tree, "spanning")
    frags = {f.node: f for f in fragments_of(tree)}
    bad = []
    for nid, (start, dur, dom) in REFERENCE_ENCODING.items():
        n = tree.nodes[nid]
        got = (tuple(n.start), n.duration, tuple(frags[nid].domain))
        for name, g, w in zip(("start", "duration", "domain"), got, (start, dur, dom)):
            if g != w:
                bad.append(f"X{nid} {name} {list(g) if isinstance(g, tuple) else g} vs {list(w) if isinstance(w, tuple) else w}")
    report(capsys, 2, not bad, f"{15 - len(bad)}/15 reference fields reproduced; differing: {'; '.join(bad) or 'none'}")
    assert not bad


def test_criterion_3_barriers(capsys, integrator_tree):
    specs = build_barriers(integrator_tree, 1.0)
    bad = []
    for k, (center, pieces) in enumerate(REFERENCE_BARRIERS):
        s = specs[k]
        same = (np.allclose(s.center, center) and len(s.rho.pieces) == len(pieces)
                and all(np.allclose(p, q) for p, q in zip(s.rho.pieces, pieces)))
        if not same:
            bad.append(f"b{k + 1} {[tuple(round(v, 3) for v in p) for p in s.rho.pieces]}")
    report(capsys, 3, not bad, f"{5 - len(bad)}/5 reference barriers reproduced; differing: {'; '.join(bad) or 'none'}")
    assert not bad


def test_criterion_4_table_oracle(capsys):
    t0 = time.perf_counter()
    checked, bad = 0, []
    for seed in range(25):
        plain, _ = random_gridworld(random.Random(1000 + seed))
        frags = walk_fragments(plain)
        T = horizon_of(frags)
        table = compute_table(frags, WALK_DYN, WALK_INPUTS, T, WALK.full())
        for t in range(T + 1):
            if table.index_sets(t) != potential_index_sets(frags, t):
                bad.append((seed, t, "index sets"))
            for i in table.index_sets(t):
                if walk_states(table.region(t, i)) != feasible_set(plain, members(i), t, T):
                    bad.append((seed, t, members(i)))
                checked += 1
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    report(capsys, 4, ok, f"25 gridworlds, {checked} (step, index set) entries, {len(bad)} mismatches, {elapsed:.1f} s")
    assert not bad
    assert elapsed < 60


def test_criterion_5_monitor_soundness(capsys):
    checked, bad = 0, 0
    for seed in range(25):
        plain, _ = random_gridworld(random.Random(1000 + seed))
        frags = walk_fragments(plain)
        T = horizon_of(frags)
        table = compute_table(frags, WALK_DYN, WALK_INPUTS, T, WALK.full())

        @lru_cache(maxsize=None)
        def feasible(prefix):
            return prefix_feasible(plain, list(prefix), T)

        for x0 in range(-5, 6):
            for traj in rollouts(x0, T):
                _, log = monitor_run(np.array(traj, float).reshape(-1, 1), [table])
                for t, rec in enumerate(log):
                    checked += 1
                    if (rec["verdict"] == VIOLATED) != (not feasible(tuple(traj[:t + 1]))):
                        bad += 1
    report(capsys, 5, bad == 0, f"{checked} prefix verdicts on 25 gridworlds, {bad} disagree with suffix search")
    assert bad == 0


def test_criterion_6_reproductions(capsys, integrator_run, unicycle_run):
    lines, ok = [], True
    for name, res in (("integrator", integrator_run), ("unicycle", unicycle_run)):
        s = res.summary
        good = (s["final_verdict"] == "satisfied" and s["inputs_within_bounds"] and s["mpc_all_optimal"]
                and s["lowlevel_all_optimal"] and s["runtime_s"] < 120)
        ok &= good
        lines.append(f"{name} {s['final_verdict']}, max|u| {s['max_abs_u']:.4f}, "
                     f"QPs optimal {s['mpc_all_optimal'] and s['lowlevel_all_optimal']}, {s['runtime_s']:.1f} s")
    report(capsys, 6, ok, "; ".join(lines))
    assert ok


def test_criterion_7_tube(capsys, integrator_run, unicycle_run):
    ok, lines = True, []
    for name, res in (("integrator", integrator_run), ("unicycle", unicycle_run)):
        s = res.summary
        good = s["tube_end_max"] <= 0.005 + 1e-6 and s["tube_sup_max"] <= 0.6 + 1e-6
        ok &= good
        lines.append(f"{name} end {s['tube_end_max']:.5f} <= 0.005, sup {s['tube_sup_max']:.4f} <= 0.6")
    report(capsys, 7, ok, "; ".join(lines))
    assert ok


def _satisfying_walks(n_runs):
    """Random gridworlds with one trajectory satisfying all fragments each."""
    rng = random.Random(77)
    out = []
    while len(out) < n_runs:
        plain, _ = random_gridworld(rng)
        T = horizon_of(walk_fragments(plain))
        good = [traj for x0 in range(-5, 6) for traj in rollouts(x0, T)
                if all(fragment_holds(f, traj, 0) for f in plain)]
        if good:
            out.append((plain, T, rng.choice(good)))
    return out


def test_criterion_8_fault_detection(capsys, fault_run, integrator_run, unicycle_run):
    sc = scmod.bundled("integrator_fault")
    mu1, mu2, mu3 = (sc["predicates"][k]["box"] for k in ("mu1", "mu2", "mu3"))
    doom = doom_step_gf_or_until(fault_run.samples.tolist(), mu1, (0, 16), (2, 10), mu2, mu3)
    table_doom = sim.oracle_alarm(sim.prepare(sc), fault_run.samples)
    alarm = fault_run.summary["alarm_step"]
    false_alarms = sum(r.summary["alarm_step"] is not None for r in (integrator_run, unicycle_run))
    for plain, T, traj in _satisfying_walks(10):
        frags = walk_fragments(plain)
        table = compute_table(frags, WALK_DYN, WALK_INPUTS, T, WALK.full())
        ms, _ = monitor_run(np.array(traj, float).reshape(-1, 1), [table])
        false_alarms += ms.alarm_step is not None
    ok = alarm is not None and doom is not None and alarm <= doom and alarm <= table_doom and false_alarms == 0
    report(capsys, 8, ok, f"fault alarm at step {alarm}, semantic doom {doom}, box-table oracle {table_doom}; "
                          f"{false_alarms} false alarms in 12 nominal runs")
    assert ok


def test_criterion_9_kernels(capsys):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        n, m = int(rng.integers(2, 8)), int(rng.integers(1, 12))
        M = rng.normal(size=(n, n))
        H = M @ M.T + 0.5 * np.eye(n)
        g = rng.normal(size=n)
        A = rng.normal(size=(m, n))
        b = A @ rng.normal(size=n) + rng.uniform(0, 1, m)
        res = solve_qp(QpProblem(H, g, A, b))
        assert res.status == OPTIMAL
        worst = max(worst, float(np.max(np.abs(res.x - pg_qp(H, g, A, b)))))

    prob = sim.prepare(scmod.bundled("integrator"))
    specs = build_barriers(prob.tree("box"), 1.0)
    h, fd_worst, n_fd = 1e-5, 0.0, 0
    for s in specs:
        for _ in range(200):
            x = s.center + rng.uniform(-6, 6, 2)
            t = float(rng.uniform(*s.domain))
            sc = np.abs(s.kappa * (x - s.center))
            if abs(sc[0] - sc[1]) < 1e-3 or any(abs(t - p[k]) < 1e-3 for p in s.rho.pieces for k in (0, 1)):
                continue
            gx, gt = s.gradient(x, t)
            d = rng.normal(size=2)
            fd = (s.value(x + h * d, t) - s.value(x - h * d, t)) / (2 * h)
            ft = (s.value(x, t + h) - s.value(x, t - h)) / (2 * h)
            fd_worst = max(fd_worst, abs(gx @ d - fd), abs(gt - ft))
            n_fd += 1

    p = fixed_time_params(0.2, 2, 0.5, 0.5)
    direct = max(2 * 0.5 / ((1 - 0.5) * 0.2), 2 * math.pi / (0.2 * math.sqrt(1 - 0.25)))
    alpha_err = abs(p.alpha - direct)
    ok = worst <= 1e-5 and fd_worst <= 1e-4 and alpha_err <= 1e-3 and abs(p.alpha - 36.276) <= 1e-3
    report(capsys, 9, ok, f"QP vs projected gradient max err {worst:.1e} (100 QPs); "
                          f"barrier FD max err {fd_worst:.1e} ({n_fd} points); alpha {p.alpha:.4f}")
    assert ok
