"""Online feasibility monitor over one or more feasible tables.

Each table covers one disjunctive branch; the run stays feasible while at
least one branch does. A U/F obligation is discharged the first step its
target test passes, and a G obligation is dropped once its window closes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import OutOfDomain
from .feasible import bits, members

FEASIBLE, VIOLATED, SATISFIED = "feasible", "violated", "satisfied"


@dataclass(frozen=True)
class MonitorState:
    t: int
    remaining: tuple
    verdict: str = FEASIBLE
    alarm_step: int | None = None
    alive: tuple = ()


def _inside(region, x):
    try:
        return bool(region.member(x))
    except OutOfDomain:
        return False


def margin(region, x):
    """Signed sup-norm distance from ``x`` to the boundary of a box union (positive inside); None for grids."""
    boxes = getattr(region, "boxes", None)
    if boxes is None:
        return None
    x = np.asarray(x, dtype=float)
    best = -np.inf
    for lo, hi in boxes:
        k = len(lo)
        best = max(best, float(np.min(np.minimum(x[:k] - lo, np.asarray(hi) - x[:k]))))
    return best


def initial_state(tables):
    n = len(tables)
    return MonitorState(0, tuple(bits(f.index for f in tb.fragments) for tb in tables),
                        alive=(True,) * n)


def _advance(i1, x, t, fragments):
    nxt = i1
    for f in fragments:
        if not (i1 >> f.index) & 1:
            continue
        if f.b <= t:
            nxt &= ~(1 << f.index)
        elif f.op in ("U", "F") and f.a <= t and _inside(f.h1, x) and _inside(f.h2, x):
            nxt &= ~(1 << f.index)
    return nxt


def step(ms: MonitorState, x, tables) -> tuple[MonitorState, dict]:
    """Check ``x`` at step ``ms.t`` and advance every branch's remaining set."""
    x = np.asarray(x, dtype=float)
    t = ms.t
    alive = list(ms.alive)
    remaining = list(ms.remaining)
    margins = [None] * len(tables)
    for k, tb in enumerate(tables):
        if not alive[k]:
            continue
        if t > tb.T:
            alive[k] = remaining[k] == 0
            continue
        region = tb.region(t, remaining[k])
        margins[k] = margin(region, x)
        if not _inside(region, x):
            alive[k] = False
            continue
        remaining[k] = _advance(remaining[k], x, t, tb.fragments)
    verdict, alarm = ms.verdict, ms.alarm_step
    if verdict == FEASIBLE:
        if not any(alive):
            verdict, alarm = VIOLATED, t
        elif any(a and r == 0 for a, r in zip(alive, remaining)):
            verdict = SATISFIED
    new = replace(ms, t=t + 1, remaining=tuple(remaining), alive=tuple(alive),
                  verdict=verdict, alarm_step=alarm)
    record = {"t": t, "verdict": verdict, "alarm": int(verdict == VIOLATED),
              "remaining": [members(r) for r in remaining],
              "mask": ";".join(str(r) for r in remaining), "margin": margins}
    return new, record


def run(traj, tables):
    ms = initial_state(tables)
    log = []
    for x in np.atleast_2d(np.asarray(traj, dtype=float)):
        ms, rec = step(ms, x, tables)
        log.append(rec)
    return ms, log


def read_trajectory_csv(path):
    """(t, states) from a CSV; with a header only ``t`` and ``x<k>`` columns are used."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    cols = None
    if rows and not _is_number(rows[0][0]):
        head = [h.strip() for h in rows[0]]
        rows = rows[1:]
        xs = [i for i, h in enumerate(head) if h[:1] == "x" and h[1:].isdigit()]
        if "t" in head and xs:
            cols = [head.index("t")] + xs
    if cols is not None:
        rows = [[r[i] for i in cols] for r in rows]
    data = np.array([[float(v) for v in r] for r in rows])
    order = np.argsort(data[:, 0], kind="stable")
    return data[order, 0], data[order, 1:]


def on_steps(ts, xs, dt, tol=1e-6):
    """Rows whose time is a whole number of steps; fine-rate logs reduce to step samples."""
    k = np.asarray(ts) / dt
    keep = np.abs(k - np.round(k)) <= tol
    return np.asarray(xs)[keep]


def write_verdict_csv(path, log):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "verdict", "remaining_mask"])
        for rec in log:
            w.writerow([rec["t"], rec["verdict"], rec["mask"]])


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True
