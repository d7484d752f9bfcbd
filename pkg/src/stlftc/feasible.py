"""Fault-tolerant feasible sets X_t^{I'} by backward recursion over index sets.

Index sets are integer bitmasks over fragment indices. A fragment is
*effective* at step t when a <= t <= b, *expired* when t > b and *pending*
when t < a.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field

from .errors import TableMissing
from .sets import one_step_pred, region_from_json


def bits(indices):
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def members(mask):
    out = []
    i = 0
    while mask >> i:
        if (mask >> i) & 1:
            out.append(i)
        i += 1
    return out


def effective(fragments, t):
    return bits(f.index for f in fragments if f.a <= t <= f.b)


def expired(fragments, t):
    return bits(f.index for f in fragments if f.b < t)


def pending(fragments, t):
    return bits(f.index for f in fragments if f.a > t)


def potential_index_sets(fragments, t):
    """All I' with no expired fragment, every pending one, every effective G,
    and every U/F whose window opens at t; other effective U/F are free."""
    forced = pending(fragments, t)
    free = []
    for f in fragments:
        if not f.a <= t <= f.b:
            continue
        if f.op == "G" or f.a == t:
            forced |= 1 << f.index
        else:
            free.append(f.index)
    out = []
    for r in range(len(free) + 1):
        for combo in itertools.combinations(free, r):
            out.append(forced | bits(combo))
    return sorted(out)


def successors(i1, t, fragments, literal=False):
    """Potential sets at t+1 reachable from ``i1``: a U/F that left the set stays out.

    ``literal`` applies the rule (O=U and i not in I') => i in I'' instead.
    """
    eff_next = effective(fragments, t + 1)
    out = []
    for i2 in potential_index_sets(fragments, t + 1):
        ok = True
        for f in fragments:
            if not (eff_next >> f.index) & 1 or f.op == "G":
                continue
            in1 = (i1 >> f.index) & 1
            in2 = (i2 >> f.index) & 1
            if literal:
                if f.op == "U" and not in1 and not in2:
                    ok = False
            elif in2 and not in1:
                ok = False
        if ok:
            out.append(i2)
    return out


def satisfaction_set(i1, i2, t, fragments):
    eff = effective(fragments, t)
    return bits(f.index for f in fragments
                if f.op in ("U", "F") and (i1 >> f.index) & 1 and (eff >> f.index) & 1
                and not (i2 >> f.index) & 1)


def consistent_region(i1, i2, t, fragments, full):
    sat = satisfaction_set(i1, i2, t, fragments)
    eff = effective(fragments, t)
    region = full
    for f in fragments:
        if not ((i1 & eff) >> f.index) & 1:
            continue
        if f.op == "G":
            h = f.h1
        elif (sat >> f.index) & 1:
            h = f.h1.intersect(f.h2)
        else:
            h = f.h1.difference(f.h2)
        region = region.intersect(h)
    return region


def terminal_region(i1, T, fragments, full):
    eff = effective(fragments, T)
    region = full
    for f in fragments:
        if ((i1 & eff) >> f.index) & 1:
            region = region.intersect(f.h1 if f.op == "G" else f.h1.intersect(f.h2))
    return region


@dataclass
class FeasibleTable:
    T: int
    fragments: list
    entries: dict = field(default_factory=dict)

    def region(self, t, i1):
        try:
            return self.entries[t][i1]
        except KeyError:
            raise TableMissing(t, members(i1)) from None

    def index_sets(self, t):
        return sorted(self.entries.get(t, {}))

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        index = {"T": self.T, "fragments": [
            {"index": f.index, "op": f.op, "a": f.a, "b": f.b,
             "h1": f.h1.to_json(), "h2": f.h2.to_json()} for f in self.fragments], "steps": []}
        for t in range(self.T + 1):
            name = f"step_{t:03d}.json"
            with open(os.path.join(directory, name), "w") as fh:
                json.dump({str(k): v.to_json() for k, v in sorted(self.entries[t].items())}, fh,
                          sort_keys=True)
            index["steps"].append(name)
        with open(os.path.join(directory, "index.json"), "w") as fh:
            json.dump(index, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, directory):
        from .formula import FlatFragment
        with open(os.path.join(directory, "index.json")) as fh:
            index = json.load(fh)
        frags = [FlatFragment(f["index"], f["op"], f["a"], f["b"], region_from_json(f["h1"]),
                              region_from_json(f["h2"])) for f in index["fragments"]]
        table = cls(index["T"], frags)
        for t, name in enumerate(index["steps"]):
            with open(os.path.join(directory, name)) as fh:
                data = json.load(fh)
            table.entries[t] = {int(k): region_from_json(v) for k, v in data.items()}
        return table


def compute_table(fragments, dyn, inputs, T, full, literal=False):
    """Backward recursion from the terminal step; ``full`` is the workspace region."""
    table = FeasibleTable(T, list(fragments))
    table.entries[T] = {i1: terminal_region(i1, T, fragments, full)
                        for i1 in potential_index_sets(fragments, T)}
    for t in range(T - 1, -1, -1):
        pre = {i2: one_step_pred(dyn, r, inputs, "exists") for i2, r in table.entries[t + 1].items()}
        row = {}
        for i1 in potential_index_sets(fragments, t):
            acc = full.complement()
            for i2 in successors(i1, t, fragments, literal):
                acc = acc.union(consistent_region(i1, i2, t, fragments, full).intersect(pre[i2]))
            row[i1] = acc
        table.entries[t] = row
    return table


def horizon_of(fragments):
    return max((f.b for f in fragments), default=0)
