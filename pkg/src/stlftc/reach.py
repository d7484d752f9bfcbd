"""Windowed reachable sets by backward iteration and the F/G/U satisfying sets."""

from __future__ import annotations

from .dynamics import Dynamics, custom, integrator, unicycle  # noqa: F401  (re-exported)
from .formula import TimeWindow
from .sets import InputGrid, one_step_pred


def _window(w):
    return w if isinstance(w, TimeWindow) else TimeWindow(*w)


def _backward(dyn, target, window, inputs, mode, constraint=None):
    w = _window(window)
    hit = target if constraint is None else target.intersect(constraint)
    v = hit
    for k in range(w.b - 1, -1, -1):
        v = one_step_pred(dyn, v, inputs, mode)
        if constraint is not None:
            v = v.intersect(constraint)
        if k >= w.a:
            v = v.union(hit)
    return v


def max_reach(dyn, target, window, inputs: InputGrid | None = None, constraint=None):
    """States from which some input sequence hits ``target`` at a step in the window.

    With ``constraint`` every visited state up to and including the hit must
    lie in it.
    """
    return _backward(dyn, target, window, inputs, "exists", constraint)


def min_reach(dyn, target, window, inputs: InputGrid | None = None):
    """States from which every input sequence hits ``target`` at a step in the window."""
    return _backward(dyn, target, window, inputs, "forall")


def satisfying_set(op, window, args, dyn, inputs=None, literal=False):
    """Satisfying set of ``F``, ``G`` or ``U`` over argument regions.

    ``literal`` swaps the F/G constructors, which reproduces a reading where
    F is built from min-reach of the complement and G from min-reach.
    """
    if op == "F":
        (s,) = args
        if literal:
            return max_reach(dyn, s.complement(), window, inputs).complement()
        return max_reach(dyn, s, window, inputs)
    if op == "G":
        (s,) = args
        if literal:
            return min_reach(dyn, s, window, inputs)
        return min_reach(dyn, s.complement(), window, inputs).complement()
    if op == "U":
        s1, s2 = args
        return max_reach(dyn, s2, window, inputs, constraint=s1)
    raise ValueError(f"unknown operator {op!r}")
