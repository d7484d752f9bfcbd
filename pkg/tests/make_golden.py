"""Regenerate the gridworld golden tables from the brute-force oracle.

    python3 tests/make_golden.py
"""

import json
import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from oracles import feasible_set  # noqa: E402

from stlftc import scenario as scmod, sim  # noqa: E402
from stlftc.feasible import horizon_of, members, potential_index_sets  # noqa: E402
from stlftc.formula import flatten  # noqa: E402


def int_set(region):
    centers = region.lattice.centers[:, 0]
    return {int(round(c)) for c in centers[region.mask.ravel()]}


def main():
    sc = scmod.bundled("gridworld")
    prob = sim.prepare(sc)
    space = prob.space("grid")
    frags = flatten(prob.phi_raw, space.state_formula, space.full())
    plain = [(f.op, f.a, f.b, int_set(f.h1), int_set(f.h2)) for f in frags]
    T = horizon_of(frags)
    entries = {}
    for t in range(T + 1):
        entries[str(t)] = {",".join(map(str, members(i1))): sorted(feasible_set(plain, members(i1), t, T))
                           for i1 in potential_index_sets(frags, t)}
    out = scmod.golden_dir("gridworld")
    os.makedirs(out, exist_ok=True)
    data = {"formula": sc["formula"], "T": T,
            "fragments": [[op, a, b, sorted(h1), sorted(h2)] for op, a, b, h1, h2 in plain],
            "entries": entries}
    with open(os.path.join(out, "table_group_0.json"), "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
    print("wrote", os.path.join(out, "table_group_0.json"))


if __name__ == "__main__":
    main()
