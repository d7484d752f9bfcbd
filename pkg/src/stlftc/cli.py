"""Command-line entry point.

Exit codes: 0 success, 2 when a run ends with verdict "violated", 1 on errors
(including failed ``--check`` comparisons).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import scenario as scmod
from . import sim
from .ctrl.barrier import build_barriers, doa, fixed_time_params, slack_bound
from .errors import StlftcError
from .feasible import compute_table, horizon_of, members
from .formula import flatten, to_text
from .monitor import on_steps, read_trajectory_csv, run as monitor_run, write_verdict_csv
from .sets import BoxUnion
from .stlt import fragments_of, nesting_order_holds

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED = 0, 1, 2


def _load(args):
    if args.scenario is None:
        raise StlftcError("--scenario is required (a path or the name of a bundled scenario)")
    if os.path.exists(args.scenario):
        return scmod.load(args.scenario)
    return scmod.bundled(args.scenario)


def _out(args, default):
    d = args.out or os.path.join("out", default)
    os.makedirs(d, exist_ok=True)
    return d


def _dump(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)


def _rep(args, prob):
    return "grid" if args.grid is not None or prob.kind != "integrator" else "box"


def _ast(phi):
    from .formula import children
    name = type(phi).__name__
    node = {"node": name, "text": to_text(phi)}
    w = getattr(phi, "window", None)
    if w is not None:
        node["window"] = [w.a, w.b]
    kids = children(phi)
    if kids:
        node["children"] = [_ast(k) for k in kids]
    return node


# ---------------------------------------------------------------- subcommands


def cmd_parse(args):
    sc = _load(args)
    prob = sim.prepare(sc)
    out = _out(args, "parse")
    data = {"formula": to_text(prob.phi_raw), "rewritten": to_text(prob.phi), "ast": _ast(prob.phi_raw)}
    _dump(os.path.join(out, "ast.json"), data)
    print(json.dumps(data["ast"], indent=1))
    return EXIT_OK


def cmd_tree(args):
    sc = _load(args)
    prob = sim.prepare(sc, args.grid)
    tree = prob.tree(_rep(args, prob))
    out = _out(args, "tree")
    _dump(os.path.join(out, "tree.json"), tree.to_json())
    frags = fragments_of(tree)
    _dump(os.path.join(out, "fragments.json"),
          [{"id": f.id + 1, "op": f.op, "a": f.a, "b": f.b, "node": f.node,
            "predecessor": None if f.predecessor is None else f.predecessor + 1,
            "domain": list(f.domain)} for f in frags])
    print(tree.listing())
    for f in frags:
        print(f"f{f.id + 1}: {f.op}[{f.a},{f.b}] -> X{f.node} domain {list(f.domain)}"
              + ("" if f.predecessor is None else f" after f{f.predecessor + 1}"))
    for j, i, ok in nesting_order_holds(frags):
        print(f"ordering f{j + 1} -> f{i + 1}: {'holds' if ok else 'FAILS'}")
    return EXIT_OK


def _region_summary(region):
    if hasattr(region, "boxes"):
        return [[list(lo), list(hi)] for lo, hi in region.boxes]
    bb = region.bounding_box()
    return None if bb is None else {"bounding_box": [list(bb[0]), list(bb[1])], "cells": region.count()}


def _write_raster(path, tree):
    """Dense membership table: one row per cell center, one column per set node."""
    import csv
    L = tree.nodes[0].region.lattice
    cols = [n.region.mask.ravel() for n in tree.nodes]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{d + 1}" for d in range(L.centers.shape[1])] + [f"X{n.id}" for n in tree.nodes])
        for i, c in enumerate(L.centers):
            w.writerow([f"{v:g}" for v in c] + [int(m[i]) for m in cols])


def cmd_reach(args):
    sc = _load(args)
    prob = sim.prepare(sc, args.grid)
    tree = prob.tree(_rep(args, prob))
    out = _out(args, "reach")
    regions = {f"X{n.id}": _region_summary(n.region) for n in tree.nodes}
    _dump(os.path.join(out, "regions.json"), regions)
    for k, v in regions.items():
        print(k, v)
    if args.raster:
        _write_raster(os.path.join(out, "raster.csv"), prob.tree("grid"))
    if args.check:
        return _check_regions(tree, sc["name"])
    return EXIT_OK


def _gridworld_sets(table):
    """Table regions as integer state lists (1-D unit lattices only)."""
    centers = None
    out = {}
    for t in range(table.T + 1):
        row = {}
        for i1 in table.index_sets(t):
            r = table.region(t, i1)
            if centers is None:
                centers = r.lattice.centers[:, 0]
            row[",".join(map(str, members(i1)))] = [int(round(c)) for c in centers[r.mask.ravel()]]
        out[str(t)] = row
    return out


def cmd_feasible(args):
    sc = _load(args)
    prob = sim.prepare(sc, args.grid)
    out = _out(args, "feasible")
    rep = "grid"
    space = prob.space(rep)
    try:
        groups = [flatten(prob.phi_raw, space.state_formula, space.full())]
    except StlftcError:
        groups = prob.groups(rep)
    status = EXIT_OK
    for k, frags in enumerate(groups):
        table = compute_table(frags, prob.dyn, prob.inputs, horizon_of(frags), space.full())
        table.save(os.path.join(out, f"group_{k}"))
        print(f"group {k}: {len(frags)} fragments, T = {table.T}, "
              f"{sum(len(table.index_sets(t)) for t in range(table.T + 1))} entries")
        if args.check:
            gdir = scmod.golden_dir(sc["name"])
            path = os.path.join(gdir, f"table_group_{k}.json")
            if not os.path.exists(path):
                print(f"FAIL no golden file {path}")
                status = EXIT_ERROR
                continue
            with open(path) as fh:
                golden = json.load(fh)
            mine = _gridworld_sets(table)
            ok = mine == golden["entries"]
            print(f"{'PASS' if ok else 'FAIL'} group {k} table vs golden")
            if not ok:
                status = EXIT_ERROR
    return status


def cmd_monitor(args):
    sc = _load(args)
    if args.trajectory is None:
        raise StlftcError("monitor needs --trajectory <csv with columns t, x1, ...>")
    prob = sim.prepare(sc, args.grid)
    ts, xs = read_trajectory_csv(args.trajectory)
    xs = on_steps(ts, xs, float(sc["dynamics"]["dt"]))
    rep = sc["monitor"]["representation"] if args.grid is None else "grid"
    ms, log = monitor_run(xs, prob.tables(rep))
    out = _out(args, "monitor")
    write_verdict_csv(os.path.join(out, "verdicts.csv"), log)
    _dump(os.path.join(out, "summary.json"), {"verdict": ms.verdict, "alarm_step": ms.alarm_step})
    print(f"verdict {ms.verdict}" + ("" if ms.alarm_step is None else f", alarm at step {ms.alarm_step}"))
    return EXIT_VIOLATED if ms.verdict == "violated" else EXIT_OK


def cmd_synth(args):
    sc = _load(args)
    prob = sim.prepare(sc, args.grid)
    out = _out(args, "synth")
    tree = prob.tree(prob.exact)
    u = np.concatenate([sc["dynamics"]["u_lo"], sc["dynamics"]["u_hi"]])
    specs = build_barriers(tree, float(np.max(np.abs(u))), ndim=2 if prob.kind == "unicycle" else None,
                           skip_nonbox=True)
    data = {"barriers": [s.to_json() if s else None for s in specs]}
    for s in specs:
        print(s.describe() if s else "non-box fragment: no sup-norm barrier")
    cfg = sc.get("controller")
    if cfg:
        p = fixed_time_params(cfg["T_prime"], cfg["mu"], cfg["k"], cfg["r"], cfg["c"], cfg["d"])
        data["fixed_time"] = {"alpha": p.alpha, "gamma1": p.gamma1, "gamma2": p.gamma2,
                              "slack_bound": slack_bound(p), "doa_at_r": list(doa(p.r, p))}
        print(f"alpha = {p.alpha:.6g}, gamma = ({p.gamma1:g}, {p.gamma2:g}), slack bound {slack_bound(p):.6g}")
        if "initial_state" in sc:
            ctl, branch, _, target = sim.controller_for(prob, np.asarray(sc["initial_state"], float))
            data["planner"] = {"branch": branch, "goal_node": target, "goal": ctl.setup.goal.tolist(),
                               "state_box": [ctl.setup.state_lo.tolist(), ctl.setup.state_hi.tolist()],
                               "N": ctl.setup.N}
            print(f"branch {branch}, goal X{target} at {ctl.setup.goal.tolist()}")
    _dump(os.path.join(out, "synthesis.json"), data)
    return EXIT_OK


def _rates(args):
    if args.rates is None:
        return None
    try:
        p, l = (float(v) for v in args.rates.split(","))
    except ValueError:
        raise StlftcError("--rates expects '<planner Hz>,<low-level Hz>', e.g. 5,100") from None
    return p, l


def cmd_simulate(args):
    sc = _load(args)
    res = sim.run(sc, rates=_rates(args), resolution=args.grid)
    out = _out(args, "simulate")
    sim.write_outputs(res, out, len(sc["workspace"]))
    s = res.summary
    print(json.dumps(s, indent=1, sort_keys=True))
    violated = s["final_verdict"] == "violated" or s["monitor_verdict"] == "violated"
    return EXIT_VIOLATED if violated else EXIT_OK


def _golden(name, file):
    path = os.path.join(scmod.golden_dir(name), file)
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return json.load(fh)


def _check_regions(tree, name):
    golden = _golden(name, "regions.json")
    if golden is None:
        print(f"no golden regions bundled for {name}")
        return EXIT_OK
    ok_all = True
    for key, boxes in golden.items():
        region = tree.nodes[int(key[1:])].region
        ok = isinstance(region, BoxUnion) and region.same_set(BoxUnion(boxes, region.workspace))
        ok_all &= ok
        print(f"{'PASS' if ok else 'FAIL'} {key}: {_region_summary(region)} (golden {boxes})")
    return EXIT_OK if ok_all else EXIT_ERROR


def _check_encoding(tree, name):
    golden = _golden(name, "encoding.json")
    if golden is None:
        return EXIT_OK
    status = EXIT_OK
    frags = {f"X{f.node}": f for f in fragments_of(tree)}
    for key, want in golden.items():
        n = tree.nodes[int(key[1:])]
        got = {"start": list(n.start), "duration": n.duration,
               "domain": list(frags[key].domain) if key in frags else None}
        for field_, v in want.items():
            ok = got[field_] == v
            print(f"{'PASS' if ok else 'FAIL'} {key} {field_}: {got[field_]} (golden {v})")
            if not ok:
                status = EXIT_ERROR
    return status


def _same_pieces(a, b, tol=1e-9):
    return len(a) == len(b) and all(np.allclose(p, q, atol=tol) for p, q in zip(a, b))


def _check_barriers(specs, name):
    golden = _golden(name, "barriers.json")
    if golden is None:
        return EXIT_OK
    status = EXIT_OK
    for k, want in enumerate(golden):
        s = specs[k] if k < len(specs) else None
        ok = (s is not None and np.allclose(s.center, want["center"])
              and _same_pieces(s.rho.pieces, want["rho"]))
        got = None if s is None else [list(p) for p in s.rho.pieces]
        print(f"{'PASS' if ok else 'FAIL'} b{k + 1}: rho {got} (golden {want['rho']})")
        if not ok:
            status = EXIT_ERROR
    return status


def _check_reproduction(name, tree, specs):
    return max(_check_regions(tree, name), _check_encoding(tree, name), _check_barriers(specs, name))


def cmd_reproduce(args):
    if args.target not in ("integrator", "unicycle"):
        raise StlftcError("reproduce takes 'integrator' or 'unicycle'")
    sc = scmod.load(args.scenario) if args.scenario else scmod.bundled(args.target)
    out = _out(args, f"reproduce_{args.target}")
    prob = sim.prepare(sc, args.grid)
    tree = prob.tree(prob.exact)
    u = np.concatenate([sc["dynamics"]["u_lo"], sc["dynamics"]["u_hi"]])
    specs = build_barriers(tree, float(np.max(np.abs(u))), ndim=2 if prob.kind == "unicycle" else None,
                           skip_nonbox=True)
    print(tree.listing())
    for s in specs:
        if s is not None:
            print(s.describe())
    res = sim.run(sc, rates=_rates(args), prob=prob)
    sim.write_outputs(res, out, len(sc["workspace"]))
    _dump(os.path.join(out, "tree.json"), tree.to_json())
    _dump(os.path.join(out, "barriers.json"), [s.to_json() if s else None for s in specs])
    print(json.dumps(res.summary, indent=1, sort_keys=True))
    status = EXIT_OK
    if args.check:
        status = _check_reproduction(sc["name"], tree, specs)
    if res.summary["final_verdict"] == "violated" and status == EXIT_OK:
        status = EXIT_VIOLATED
    return status


# ---------------------------------------------------------------- entry


def build_parser():
    p = argparse.ArgumentParser(prog="stlftc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", help="scenario JSON path or bundled scenario name")
        sp.add_argument("--out", help="output directory (default out/<command>)")
        sp.add_argument("--grid", type=float, help="grid resolution for non-periodic dims")
        sp.add_argument("--check", action="store_true", help="compare against bundled golden files")
        sp.add_argument("--seed", type=int, default=0, help="seed recorded with the run")
        sp.add_argument("--rates", help="planner and low-level rates in Hz, e.g. 5,100")

    for name, fn in [("parse", cmd_parse), ("tree", cmd_tree), ("reach", cmd_reach),
                     ("feasible", cmd_feasible), ("monitor", cmd_monitor), ("synth", cmd_synth),
                     ("simulate", cmd_simulate)]:
        sp = sub.add_parser(name)
        common(sp)
        if name == "reach":
            sp.add_argument("--raster", action="store_true", help="also write a dense CSV raster of the grid tree")
        if name == "monitor":
            sp.add_argument("--trajectory", help="CSV with columns t, x1, x2, ...")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("reproduce")
    sp.add_argument("target", help="integrator or unicycle")
    common(sp)
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StlftcError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
