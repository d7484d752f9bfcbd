"""STL abstract syntax, a small recursive-descent parser, and normalization.

Time windows are integer step counts. Negation is only allowed directly on
predicates, so the grammar is

    phi := "T" | id | "!" id | phi "&" phi | phi "|" phi
         | phi "U[a,b]" phi | "F[a,b]" phi | "G[a,b]" phi

with unary operators binding tighter than U, then &, then |.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import FormulaSyntaxError, NotFlattenable, UnknownPredicate, WindowError


@dataclass(frozen=True)
class Predicate:
    name: str
    kind: str = "box"
    box: tuple = ()
    normal: tuple = ()
    offset: float = 0.0

    def __post_init__(self):
        if self.kind == "box":
            for lo, hi in self.box:
                if lo > hi:
                    raise ValueError(f"predicate {self.name}: empty interval [{lo},{hi}]")
        elif self.kind == "halfspace":
            if not self.normal:
                raise ValueError(f"predicate {self.name}: halfspace needs a normal")
        else:
            raise ValueError(f"predicate {self.name}: unknown kind {self.kind!r}")

    @classmethod
    def from_box(cls, name, box):
        return cls(name, "box", tuple((float(lo), float(hi)) for lo, hi in box))

    @classmethod
    def from_halfspace(cls, name, normal, offset):
        return cls(name, "halfspace", normal=tuple(float(v) for v in normal), offset=float(offset))

    def holds(self, x):
        """Vectorized g(x) >= 0 over the rows of ``x``; box predicates constrain the leading dims."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "box":
            ok = np.ones(len(x), dtype=bool)
            for d, (lo, hi) in enumerate(self.box):
                ok &= (x[:, d] >= lo) & (x[:, d] <= hi)
            return ok
        a = np.asarray(self.normal)
        return x[:, : len(a)] @ a - self.offset >= 0.0

    def to_dict(self):
        if self.kind == "box":
            return {"kind": "box", "box": [list(iv) for iv in self.box]}
        return {"kind": "halfspace", "normal": list(self.normal), "offset": self.offset}


@dataclass(frozen=True)
class TimeWindow:
    a: int
    b: int

    def __post_init__(self):
        if self.a < 0 or self.b < self.a:
            raise WindowError(f"invalid window [{self.a},{self.b}]")


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class Pred(Formula):
    pred: Predicate


@dataclass(frozen=True)
class NotPred(Formula):
    pred: Predicate


@dataclass(frozen=True)
class And(Formula):
    children: tuple


@dataclass(frozen=True)
class Or(Formula):
    children: tuple


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula
    window: TimeWindow


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula
    window: TimeWindow


@dataclass(frozen=True)
class Always(Formula):
    child: Formula
    window: TimeWindow


TEMPORAL = (Until, Eventually, Always)

# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<temporal>[FGU])\s*\[\s*(?P<a>[0-9.]+)\s*,\s*(?P<b>[0-9.]+)\s*\]"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>[!&|()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos:].lstrip()[0]!r}",
                                     pos + len(text[pos:]) - len(text[pos:].lstrip()))
        start = m.start() + len(m.group(0)) - len(m.group(0).lstrip())
        if m.group("temporal"):
            tokens.append((m.group("temporal"), (m.group("a"), m.group("b")), start))
        elif m.group("ident"):
            tokens.append(("id", m.group("ident"), start))
        else:
            tokens.append((m.group("sym"), None, start))
        pos = m.end()
    tokens.append(("eof", None, len(text)))
    return tokens


def _steps(raw, dt, pos):
    v = float(raw) / dt
    k = round(v)
    if not math.isclose(v, k, abs_tol=1e-9):
        raise WindowError(f"window bound {raw} is not a multiple of the period {dt} (position {pos})")
    return int(k)


class _Parser:
    def __init__(self, text, predicates, dt):
        self.toks = _tokenize(text)
        self.i = 0
        self.predicates = predicates
        self.dt = dt

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise FormulaSyntaxError(f"expected {kind!r}, found {tok[0]!r}", tok[2])
        self.i += 1
        return tok

    def window(self, tok):
        a = _steps(tok[1][0], self.dt, tok[2])
        b = _steps(tok[1][1], self.dt, tok[2])
        if b < a:
            raise WindowError(f"window [{a},{b}] has b < a (position {tok[2]})")
        return TimeWindow(a, b)

    def lookup(self, tok):
        name = tok[1]
        if name not in self.predicates:
            raise UnknownPredicate(name)
        return self.predicates[name]

    def parse(self):
        phi = self.disj()
        tok = self.peek()
        if tok[0] != "eof":
            raise FormulaSyntaxError(f"unexpected token {tok[0]!r}", tok[2])
        return phi

    def disj(self):
        items = [self.conj()]
        while self.peek()[0] == "|":
            self.take()
            items.append(self.conj())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conj(self):
        items = [self.until()]
        while self.peek()[0] == "&":
            self.take()
            items.append(self.until())
        return items[0] if len(items) == 1 else And(tuple(items))

    def until(self):
        left = self.unary()
        while self.peek()[0] == "U":
            w = self.window(self.take())
            left = Until(left, self.unary(), w)
        return left

    def unary(self):
        tok = self.peek()
        kind = tok[0]
        if kind in ("F", "G"):
            self.take()
            w = self.window(tok)
            child = self.unary()
            return Eventually(child, w) if kind == "F" else Always(child, w)
        if kind == "!":
            self.take()
            nxt = self.take()
            if nxt[0] != "id" or nxt[1] == "T":
                raise FormulaSyntaxError("negation applies only to a predicate", nxt[2])
            return NotPred(self.lookup(nxt))
        if kind == "(":
            self.take()
            phi = self.disj()
            self.take(")")
            return phi
        if kind == "id":
            self.take()
            if tok[1] == "T":
                return TrueF()
            return Pred(self.lookup(tok))
        raise FormulaSyntaxError(f"unexpected token {kind!r}", tok[2])


def parse(text: str, predicates: Mapping[str, Predicate], dt: float = 1.0) -> Formula:
    """Parse ``text``; window bounds are divided by ``dt`` and must land on integers."""
    return _Parser(text, predicates, dt).parse()


_PREC = {Or: 0, And: 1, Until: 2}


def _prec(phi):
    return _PREC.get(type(phi), 3)


def to_text(phi: Formula) -> str:
    def wrap(child, min_prec):
        s = to_text(child)
        return f"({s})" if _prec(child) < min_prec else s

    if isinstance(phi, TrueF):
        return "T"
    if isinstance(phi, Pred):
        return phi.pred.name
    if isinstance(phi, NotPred):
        return "!" + phi.pred.name
    if isinstance(phi, Or):
        return " | ".join(wrap(c, 1) for c in phi.children)
    if isinstance(phi, And):
        return " & ".join(wrap(c, 2) for c in phi.children)
    if isinstance(phi, Until):
        w = phi.window
        return f"{wrap(phi.left, 2)} U[{w.a},{w.b}] {wrap(phi.right, 3)}"
    if isinstance(phi, (Eventually, Always)):
        op = "F" if isinstance(phi, Eventually) else "G"
        return f"{op}[{phi.window.a},{phi.window.b}] {wrap(phi.child, 3)}"
    raise TypeError(phi)


def predicates_of(phi: Formula) -> dict:
    out = {}

    def walk(f):
        if isinstance(f, (Pred, NotPred)):
            out[f.pred.name] = f.pred
        for c in children(f):
            walk(c)

    walk(phi)
    return out


def children(phi):
    if isinstance(phi, (And, Or)):
        return phi.children
    if isinstance(phi, Until):
        return (phi.left, phi.right)
    if isinstance(phi, (Eventually, Always)):
        return (phi.child,)
    return ()


# ---------------------------------------------------------------- normalization


def rewrite_until(phi: Formula) -> Formula:
    """Replace every ``l U[a,b] r`` by ``G[0,b] l & F[a,b] r``, innermost first."""
    if isinstance(phi, Until):
        w = phi.window
        return And((Always(rewrite_until(phi.left), TimeWindow(0, w.b)),
                    Eventually(rewrite_until(phi.right), w)))
    if isinstance(phi, And):
        return And(tuple(rewrite_until(c) for c in phi.children))
    if isinstance(phi, Or):
        return Or(tuple(rewrite_until(c) for c in phi.children))
    if isinstance(phi, Eventually):
        return Eventually(rewrite_until(phi.child), phi.window)
    if isinstance(phi, Always):
        return Always(rewrite_until(phi.child), phi.window)
    return phi


def horizon(phi: Formula) -> int:
    if isinstance(phi, (Eventually, Always)):
        return phi.window.b + horizon(phi.child)
    if isinstance(phi, Until):
        return phi.window.b + max(horizon(phi.left), horizon(phi.right))
    return max((horizon(c) for c in children(phi)), default=0)


def is_state_formula(phi: Formula) -> bool:
    if isinstance(phi, TEMPORAL):
        return False
    return all(is_state_formula(c) for c in children(phi))


def holds_now(phi: Formula, x) -> np.ndarray:
    """Evaluate a temporal-free formula on the rows of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if isinstance(phi, TrueF):
        return np.ones(len(x), dtype=bool)
    if isinstance(phi, Pred):
        return phi.pred.holds(x)
    if isinstance(phi, NotPred):
        return ~phi.pred.holds(x)
    if isinstance(phi, And):
        return np.logical_and.reduce([holds_now(c, x) for c in phi.children])
    if isinstance(phi, Or):
        return np.logical_or.reduce([holds_now(c, x) for c in phi.children])
    raise TypeError("temporal operator in a state formula")


def satisfies(phi: Formula, traj, t: int = 0) -> bool:
    """Boolean discrete-time semantics on a sampled trajectory (rows = steps).

    Raises IndexError when the trajectory is too short for a window.
    """
    traj = np.atleast_2d(np.asarray(traj, dtype=float))
    if isinstance(phi, TrueF):
        return True
    if isinstance(phi, (Pred, NotPred)):
        return bool(holds_now(phi, traj[t:t + 1])[0])
    if isinstance(phi, And):
        return all(satisfies(c, traj, t) for c in phi.children)
    if isinstance(phi, Or):
        return any(satisfies(c, traj, t) for c in phi.children)
    w = getattr(phi, "window", None)
    if t + w.b >= len(traj):
        raise IndexError("trajectory shorter than the formula horizon")
    if isinstance(phi, Eventually):
        return any(satisfies(phi.child, traj, s) for s in range(t + w.a, t + w.b + 1))
    if isinstance(phi, Always):
        return all(satisfies(phi.child, traj, s) for s in range(t + w.a, t + w.b + 1))
    # l U[a,b] r: r at some t' in [t+a, t+b] and l on every step of [t, t'].
    for s in range(t + w.a, t + w.b + 1):
        if satisfies(phi.right, traj, s) and all(satisfies(phi.left, traj, q) for q in range(t, s + 1)):
            return True
    return False


# ---------------------------------------------------------------- flat fragments


@dataclass(frozen=True)
class FlatFragment:
    index: int
    op: str
    a: int
    b: int
    h1: object
    h2: object

    def __post_init__(self):
        if self.op not in ("G", "F", "U"):
            raise ValueError(f"unknown fragment operator {self.op!r}")
        if self.b < self.a or self.a < 0:
            raise WindowError(f"invalid fragment window [{self.a},{self.b}]")


def _conjuncts(phi):
    if isinstance(phi, And):
        out = []
        for c in phi.children:
            out.extend(_conjuncts(c))
        return out
    return [phi]


def flatten(phi: Formula, region_of: Callable | None = None, full=None, tree=None) -> list:
    """Split a conjunction of single-operator conjuncts into FlatFragments.

    ``region_of`` maps a state formula to a Region and ``full`` is the
    workspace region; both default to keeping the state formulas themselves.
    An Until with a > 0 contributes a G[0,a-1] prefix on its left argument so
    that the fragment conjunction keeps the left argument on [0, a).
    Nested conjuncts need a time-encoded tree (see ``stlt.monitor_groups``).
    """
    if tree is not None:
        from .stlt import monitor_groups
        groups = monitor_groups(tree)
        if len(groups) != 1:
            raise NotFlattenable("formula has several disjunctive branches; use stlt.monitor_groups")
        return groups[0]
    if region_of is None:
        def region_of(f):
            return f
    if full is None:
        full = region_of(TrueF())
    frags = []

    def add(op, a, b, h1, h2):
        frags.append(FlatFragment(len(frags), op, a, b, h1, h2))

    for c in _conjuncts(phi):
        if is_state_formula(c):
            add("G", 0, 0, region_of(c), region_of(c))
        elif isinstance(c, Always) and is_state_formula(c.child):
            r = region_of(c.child)
            add("G", c.window.a, c.window.b, r, r)
        elif isinstance(c, Eventually) and is_state_formula(c.child):
            add("F", c.window.a, c.window.b, full, region_of(c.child))
        elif isinstance(c, Until) and is_state_formula(c.left) and is_state_formula(c.right):
            left = region_of(c.left)
            if c.window.a > 0:
                add("G", 0, c.window.a - 1, left, left)
            add("U", c.window.a, c.window.b, left, region_of(c.right))
        else:
            raise NotFlattenable(f"conjunct {to_text(c)!r} nests temporal operators")
    return frags
