"""Signal temporal logic trees: construction, paths, satisfaction and time encoding.

A tree alternates set nodes (regions) and operator nodes. Set nodes are
numbered breadth-first from the root, so the first disjunct's subtree gets the
lower ids at every depth.

Two start-time conventions are available:

``formula``
    Children of and/or inherit the parent's start interval, F[a,b] shifts it
    by [a,b] and G[a,b] by [a,a]. The duration of a node is b-a under G and 0
    otherwise, and its end time is the latest start plus the duration.

``spanning``
    Same as ``formula`` except that an F child may start up to b steps after
    the parent's end time, so an eventually nested under an always spans the
    whole always window.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import HorizonTooShort, OutOfDomain
from .formula import (FlatFragment, Always, And, Eventually, NotPred, Or, Pred, TrueF, Until,
                      horizon, to_text)
from .reach import satisfying_set

CONVENTIONS = ("formula", "spanning")


@dataclass
class OpNode:
    kind: str
    a: int = 0
    b: int = 0
    children: list = field(default_factory=list)

    def label(self):
        if self.kind in ("F", "G"):
            return f"{self.kind}[{self.a},{self.b}]"
        return {"and": "∧", "or": "∨"}[self.kind]


@dataclass
class SetNode:
    id: int
    formula: object
    region: object = None
    op: Optional[OpNode] = None
    parent: Optional[int] = None
    start: tuple = (0, 0)
    duration: int = 0
    frozen: bool = False

    @property
    def t_e(self):
        return self.start[1] + self.duration

    @property
    def is_leaf(self):
        return self.op is None


@dataclass
class CompletePath:
    nodes: tuple
    ops: tuple
    starts: tuple


class Stlt:
    def __init__(self, nodes, formula, convention="spanning"):
        self.nodes = nodes
        self.formula = formula
        self.convention = convention

    @property
    def root(self):
        return self.nodes[0]

    def parent_op(self, node):
        if node.parent is None:
            return None
        return self.nodes[node.parent].op

    def __len__(self):
        return len(self.nodes)

    def listing(self):
        lines = []

        def walk(nid, depth):
            n = self.nodes[nid]
            lines.append(f"{'  ' * depth}X{n.id} start={list(n.start)} D={n.duration} "
                         f"t_e={n.t_e}{' frozen' if n.frozen else ''}  {to_text(n.formula)}")
            if n.op is not None:
                lines.append(f"{'  ' * (depth + 1)}{n.op.label()}")
                for c in n.op.children:
                    walk(c, depth + 2)

        walk(0, 0)
        return "\n".join(lines)

    def to_json(self):
        out = []
        for n in self.nodes:
            out.append({"id": n.id, "formula": to_text(n.formula), "parent": n.parent,
                        "op": None if n.op is None else n.op.label(),
                        "children": [] if n.op is None else list(n.op.children),
                        "start": list(n.start), "duration": n.duration, "t_e": n.t_e,
                        "frozen": n.frozen,
                        "region": n.region.to_json() if n.region is not None else None})
        return {"convention": self.convention, "nodes": out,
                "paths": [list(p.nodes) for p in complete_paths(self)]}


# ---------------------------------------------------------------- construction


def _structure(phi):
    nodes = [SetNode(0, phi)]
    queue = [0]
    while queue:
        nid = queue.pop(0)
        f = nodes[nid].formula
        if isinstance(f, Until):
            raise ValueError("rewrite Until before building the tree")
        if isinstance(f, (And, Or)):
            op = OpNode("and" if isinstance(f, And) else "or")
            subs = f.children
        elif isinstance(f, (Eventually, Always)):
            op = OpNode("F" if isinstance(f, Eventually) else "G", f.window.a, f.window.b)
            subs = (f.child,)
        else:
            continue
        for s in subs:
            nodes.append(SetNode(len(nodes), s, parent=nid))
            op.children.append(len(nodes) - 1)
            queue.append(len(nodes) - 1)
        nodes[nid].op = op
    return nodes


def build(phi, space, dyn, inputs=None, literal=False, convention="spanning"):
    """Build the tree bottom-up; ``literal`` swaps the F/G set constructors."""
    nodes = _structure(phi)
    for n in reversed(nodes):
        f = n.formula
        if n.op is None:
            if isinstance(f, TrueF):
                n.region = space.full()
            elif isinstance(f, Pred):
                n.region = space.predicate(f.pred)
            elif isinstance(f, NotPred):
                n.region = space.predicate(f.pred).complement()
            continue
        kids = [nodes[c].region for c in n.op.children]
        if n.op.kind in ("and", "or"):
            r = kids[0]
            for k in kids[1:]:
                r = r.intersect(k) if n.op.kind == "and" else r.union(k)
            n.region = r
        else:
            n.region = satisfying_set(n.op.kind, (n.op.a, n.op.b), kids, dyn, inputs, literal=literal)
    tree = Stlt(nodes, phi, convention)
    return encode_times(tree, convention)


# ---------------------------------------------------------------- paths


def complete_paths(tree):
    out = []

    def walk(nid, trail):
        n = tree.nodes[nid]
        trail = trail + [nid]
        if n.op is None:
            ops = tuple(tree.nodes[i].op.label() for i in trail[:-1])
            out.append(CompletePath(tuple(trail), ops, tuple(tree.nodes[i].start for i in trail)))
            return
        for c in n.op.children:
            walk(c, trail)

    walk(0, [])
    return out


def path_groups(tree):
    """Alternatives of leaf-path sets: one branch per or-node, every branch of an and-node."""
    def groups(nid, trail):
        n = tree.nodes[nid]
        trail = trail + (nid,)
        if n.op is None:
            return [[trail]]
        sub = [groups(c, trail) for c in n.op.children]
        if n.op.kind == "or":
            return [g for alts in sub for g in alts]
        if n.op.kind == "and":
            combos = [[]]
            for alts in sub:
                combos = [c + g for c in combos for g in alts]
            return combos
        return sub[0]

    return groups(0, ())


# ---------------------------------------------------------------- satisfaction


def _member(region, x):
    try:
        return bool(region.member(x))
    except OutOfDomain:
        return False


def check_satisfaction(traj, tree, t0=0):
    """True when some or-branch group admits a time coding along all its paths.

    Every set node must contain the state at each instant its coding selects;
    F picks some instant in its window and G requires all of them.
    """
    traj = np.atleast_2d(np.asarray(traj, dtype=float))
    need = t0 + horizon(tree.formula) + 1
    if len(traj) < need:
        raise HorizonTooShort(f"trajectory has {len(traj)} samples, formula needs {need}")
    memo = {}

    def sat(nid, t):
        key = (nid, t)
        if key in memo:
            return memo[key]
        n = tree.nodes[nid]
        ok = _member(n.region, traj[t])
        if ok and n.op is not None:
            op = n.op
            if op.kind == "and":
                ok = all(sat(c, t) for c in op.children)
            elif op.kind == "or":
                ok = any(sat(c, t) for c in op.children)
            elif op.kind == "F":
                ok = any(sat(op.children[0], s) for s in range(t + op.a, t + op.b + 1))
            else:
                ok = all(sat(op.children[0], s) for s in range(t + op.a, t + op.b + 1))
        memo[key] = ok
        return ok

    return sat(0, t0)


# ---------------------------------------------------------------- time encoding


def _child_start(conv, parent, op):
    lo, hi = parent.start
    if op.kind in ("and", "or"):
        return (lo, hi)
    if op.kind == "G":
        return (lo + op.a, hi + op.a)
    if conv == "spanning":
        return (lo + op.a, parent.t_e + op.b)
    return (lo + op.a, hi + op.b)


def encode_times(tree, convention=None):
    """Annotate start intervals and durations top-down; frozen starts are kept."""
    conv = convention or tree.convention
    if conv not in CONVENTIONS:
        raise ValueError(f"unknown convention {conv!r}")
    tree.convention = conv
    root = tree.root
    if not root.frozen:
        root.start = (0, 0)
    root.duration = 0
    for n in tree.nodes:
        if n.op is None:
            continue
        for c in n.op.children:
            child = tree.nodes[c]
            if not child.frozen:
                child.start = _child_start(conv, n, n.op)
            child.duration = n.op.b - n.op.a if n.op.kind == "G" else 0
    return tree


def on_event(tree, x, t):
    """Return a copy with starts frozen at ``t`` for every open node whose region holds ``x``."""
    new = copy.copy(tree)
    new.nodes = [copy.copy(n) for n in tree.nodes]
    for n in new.nodes:
        lo, hi = n.start
        if n.frozen or lo == hi or not (lo <= t <= hi):
            continue
        if _member(n.region, x):
            n.start = (t, t)
            n.frozen = True
            encode_times(new)
    return new


# ---------------------------------------------------------------- fragments


@dataclass(frozen=True)
class TemporalFragment:
    id: int
    op: str
    a: int
    b: int
    node: int
    predecessor: Optional[int]
    domain: tuple


def fragments_of(tree):
    """One fragment per F/G operator edge, in depth-first order of the child set node.

    The time domain runs from the child's earliest start, lowered to the end
    time of the set node above the operator when the fragment has a
    predecessor, up to the child's end time.
    """
    order = []

    def dfs(nid):
        order.append(nid)
        n = tree.nodes[nid]
        if n.op is not None:
            for c in n.op.children:
                dfs(c)

    dfs(0)
    frag_of_node = {}
    frags = []
    for nid in order:
        n = tree.nodes[nid]
        op = tree.parent_op(n)
        if op is None or op.kind not in ("F", "G"):
            continue
        pred = None
        anc = n.parent
        while anc is not None:
            if anc in frag_of_node:
                pred = frag_of_node[anc]
                break
            anc = tree.nodes[anc].parent
        lo = n.start[0]
        if pred is not None:
            lo = min(tree.nodes[n.parent].t_e, lo)
        fid = len(frags)
        frags.append(TemporalFragment(fid, op.kind, op.a, op.b, nid, pred, (lo, n.t_e)))
        frag_of_node[nid] = fid
    return frags


def nesting_order_holds(fragments):
    """Predecessor j and successor i satisfy lo_j <= lo_i <= hi_j <= hi_i."""
    out = []
    for f in fragments:
        if f.predecessor is None:
            continue
        p = fragments[f.predecessor]
        out.append((p.id, f.id, p.domain[0] <= f.domain[0] <= p.domain[1] <= f.domain[1]))
    return out


def _single_instant(tree, group):
    """First non-leaf node of ``group`` under an F edge whose parent holds at one known
    instant while the node's own instant is still a range."""
    for nid in sorted({i for path in group for i in path}):
        n = tree.nodes[nid]
        op = tree.parent_op(n)
        if op is None or op.kind != "F" or n.is_leaf or n.start[0] == n.start[1]:
            continue
        p = tree.nodes[n.parent]
        if p.start[0] == p.start[1] and p.duration == 0:
            return nid
    return None


def _codings(tree, group, limit):
    """Copies of ``tree`` with every single-instant F choice in ``group`` fixed, or the
    tree itself when that would exceed ``limit`` copies."""
    out = [tree]
    while True:
        nxt, grew = [], False
        for t in out:
            nid = _single_instant(t, group)
            if nid is None:
                nxt.append(t)
                continue
            grew = True
            lo, hi = t.nodes[nid].start
            for s in range(lo, hi + 1):
                c = copy.copy(t)
                c.nodes = [copy.copy(n) for n in t.nodes]
                c.nodes[nid].start = (s, s)
                c.nodes[nid].frozen = True
                nxt.append(encode_times(c))
        if not grew:
            return out
        if len(nxt) > limit:
            return [tree]
        out = nxt


def monitor_groups(tree, full=None, limit=256, with_branch=False):
    """Flat fragments per or-branch group, derived from the time encoding.

    A G edge asks for its region over the instants every admissible start
    covers. An F edge asks for one visit within [s+a, s+b] for the first and
    last instant s its parent is known to hold, or within the widest such
    window when the parent holds at a single unknown instant. All are
    implied by the nested formula, so a flat table built from them never
    reports a satisfiable state as infeasible.

    A subformula held at one instant chosen inside an F window is expanded
    into one group per instant (up to ``limit`` groups per branch), so its
    conjuncts share that instant instead of choosing theirs independently.
    With ``with_branch`` each entry is (index into path_groups, fragments).
    """
    if full is None:
        full = tree.root.region.union(tree.root.region.complement())
    out = []
    for branch, group in enumerate(path_groups(tree)):
        seen = []
        for path in group:
            for nid in path:
                if nid not in seen:
                    seen.append(nid)
        for coded in _codings(tree, group, limit):
            frags = []
            for nid in seen:
                n = coded.nodes[nid]
                op = coded.parent_op(n)
                lo, hi = n.start
                if op is not None and op.kind == "G":
                    if hi <= lo + n.duration:
                        frags.append(("G", hi, lo + n.duration, n.region, n.region))
                elif op is not None and op.kind == "F":
                    p = coded.nodes[n.parent]
                    first, last = p.start[1], p.start[0] + p.duration
                    if n.frozen and lo == hi:
                        frags.append(("G", lo, lo, n.region, n.region))
                    elif first <= last:
                        # the parent holds at every instant of [first, last]; each needs its own visit
                        for s in dict.fromkeys((first, last)):
                            frags.append(("F", s + op.a, s + op.b, full, n.region))
                    else:
                        frags.append(("F", p.start[0] + op.a, p.start[1] + op.b, full, n.region))
                elif n.is_leaf and lo == hi:
                    frags.append(("G", lo, lo, n.region, n.region))
            flat = [FlatFragment(i, *f) for i, f in enumerate(frags)]
            out.append((branch, flat) if with_branch else flat)
    return out
