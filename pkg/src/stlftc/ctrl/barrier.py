"""Time-varying sup-norm barriers per temporal fragment and fixed-time parameters.

Each fragment gets b(x, t) = rho(t)^2 - max_i (kappa_i |x_i - c_i|)^2 over its
time domain, where c is the center of the fragment's box and kappa rescales
every axis to the box's smallest half-width. The radius rho is the
half-width plus the distance the state can still cover before the node's
first-visit deadline, so b >= 0 is exactly the box once the deadline passes.
A predecessor's radius is then cut down so that, at the successor's first
active instant, its zero-superlevel set sits inside the successor's.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, NonBoxFragment
from ..sets import BoxUnion, GridMask, rasterize
from ..stlt import encode_times, fragments_of


class PiecewiseLinear:
    """Continuous-or-not piecewise-linear scalar; pieces are (t0, t1, const, slope)
    meaning const + slope * t on [t0, t1]."""

    def __init__(self, pieces):
        self.pieces = [tuple(float(v) for v in p) for p in pieces]

    @classmethod
    def constant(cls, t0, t1, value):
        return cls([(t0, t1, value, 0.0)])

    @property
    def domain(self):
        return self.pieces[0][0], self.pieces[-1][1]

    def _piece(self, t):
        for p in self.pieces:
            if t <= p[1] + 1e-12:
                return p
        return self.pieces[-1]

    def __call__(self, t):
        p = self._piece(t)
        return p[2] + p[3] * t

    def rate(self, t):
        return self._piece(t)[3]

    def minimum(self, other):
        """Pointwise minimum over this function's domain; ``other`` is (const, slope) or a PiecewiseLinear."""
        if not isinstance(other, PiecewiseLinear):
            lo, hi = self.domain
            other = PiecewiseLinear([(lo, hi, other[0], other[1])])
        cuts = sorted({p[0] for p in self.pieces} | {p[1] for p in self.pieces}
                      | {p[0] for p in other.pieces if self.domain[0] < p[0] < self.domain[1]})
        out = []
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            a, b = self._piece((t0 + t1) / 2), other._piece((t0 + t1) / 2)
            segs = [(t0, t1)]
            ds = a[3] - b[3]
            if ds != 0:
                tc = (b[2] - a[2]) / ds
                if t0 < tc < t1:
                    segs = [(t0, tc), (tc, t1)]
            for s0, s1 in segs:
                m = (s0 + s1) / 2
                out.append((s0, s1) + ((a[2], a[3]) if a[2] + a[3] * m <= b[2] + b[3] * m else (b[2], b[3])))
        return PiecewiseLinear(_merge(out))

    def __eq__(self, other):
        return isinstance(other, PiecewiseLinear) and self.pieces == other.pieces

    def __repr__(self):
        return f"PiecewiseLinear({self.pieces})"


def _merge(pieces):
    out = []
    for p in pieces:
        if p[1] - p[0] <= 1e-12:
            continue
        if out and abs(out[-1][2] - p[2]) < 1e-12 and abs(out[-1][3] - p[3]) < 1e-12:
            out[-1] = (out[-1][0], p[1], p[2], p[3])
        else:
            out.append(p)
    return out


@dataclass
class BarrierSpec:
    fragment: int
    center: np.ndarray
    kappa: np.ndarray
    rho: PiecewiseLinear
    domain: tuple
    halfwidth: np.ndarray = field(default=None)

    def active(self, t):
        return self.domain[0] - 1e-12 <= t <= self.domain[1] + 1e-12

    def _scaled(self, x):
        x = np.asarray(x, dtype=float)
        return self.kappa * (x[..., :len(self.center)] - self.center)

    def value(self, x, t):
        s = np.abs(self._scaled(x)).max(axis=-1)
        return self.rho(t) ** 2 - s ** 2

    def gradient(self, x, t):
        """(db/dx, db/dt) using the lowest-index active face on ties."""
        x = np.asarray(x, dtype=float)
        s = self._scaled(x)
        i = int(np.argmax(np.abs(s)))
        g = np.zeros(len(x))
        g[i] = -2.0 * s[i] * self.kappa[i]
        return g, 2.0 * self.rho(t) * self.rho.rate(t)

    def pieces(self):
        return list(self.rho.pieces)

    def describe(self):
        terms = []
        for k, (c, kap) in enumerate(zip(self.center, self.kappa)):
            inner = f"x{k + 1}" if c == 0 else f"x{k + 1}{'-' if c > 0 else '+'}{abs(c):g}"
            terms.append(f"|{inner}|" if kap == 1 else f"{kap:g}|{inner}|")
        segs = []
        for t0, t1, c0, sl in self.rho.pieces:
            r = f"{c0:g}" if sl == 0 else f"{c0:g}{'-' if sl < 0 else '+'}{'' if abs(sl) == 1 else f'{abs(sl):g}'}t"
            segs.append(f"({r})^2 - max{{{', '.join(terms)}}}^2, t in [{t0:g},{t1:g}]")
        return f"b{self.fragment + 1}: " + "; ".join(segs)

    def to_json(self):
        return {"fragment": self.fragment, "center": self.center.tolist(), "kappa": self.kappa.tolist(),
                "rho": [list(p) for p in self.rho.pieces], "domain": list(self.domain)}


def region_box(region, ndim=None):
    """Axis-aligned box (lo, hi) equal to ``region``; NonBoxFragment otherwise.

    Grid regions drop periodic dims that the region spans completely.
    """
    if isinstance(region, BoxUnion):
        if len(region.boxes) != 1:
            raise NonBoxFragment("region is not a single box")
        lo, hi = region.boxes[0]
        return np.array(lo[:ndim]), np.array(hi[:ndim])
    if isinstance(region, GridMask):
        bb = region.bounding_box()
        if bb is None:
            raise NonBoxFragment("region is empty")
        L = region.lattice
        if not np.array_equal(rasterize(BoxUnion([bb], (L.lo, L.hi)), L).mask, region.mask):
            raise NonBoxFragment("grid region is not a box")
        keep = [d for d in range(len(bb[0]))
                if not (L.periodic[d] and bb[0][d] <= L.lo[d] and bb[1][d] >= L.hi[d])]
        keep = keep[:ndim] if ndim else keep
        return np.array([bb[0][d] for d in keep]), np.array([bb[1][d] for d in keep])
    raise NonBoxFragment(f"unsupported region type {type(region).__name__}")


def _deadlines(tree):
    """Latest first-visit time per node under the unshifted start rules."""
    plain = copy.copy(tree)
    plain.nodes = [copy.copy(n) for n in tree.nodes]
    encode_times(plain, "formula")
    return {n.id: n.start[1] for n in plain.nodes}


def build_barriers(tree, speed=1.0, ndim=None, skip_nonbox=False):
    """One BarrierSpec per temporal fragment of ``tree``, indexed like fragments_of.

    With ``skip_nonbox`` fragments whose region is not a box get None instead
    of raising NonBoxFragment.
    """
    frags = fragments_of(tree)
    deadline = _deadlines(tree)
    specs = []
    for f in frags:
        try:
            lo, hi = region_box(tree.nodes[f.node].region, ndim)
        except NonBoxFragment:
            if not skip_nonbox:
                raise
            specs.append(None)
            continue
        hw = (hi - lo) / 2.0
        w = float(hw.min())
        kappa = w / hw
        t0, t1 = f.domain
        ts = deadline[f.node]
        pieces = []
        if ts > t0:
            pieces.append((t0, min(ts, t1), w + speed * ts, -speed))
        if ts < t1:
            pieces.append((max(ts, t0), t1, w, 0.0))
        specs.append(BarrierSpec(f.id, (lo + hi) / 2.0, kappa, PiecewiseLinear(_merge(pieces)),
                                 (t0, t1), hw))
    # successors are final before their predecessor is tightened
    for f in reversed(frags):
        if f.predecessor is None or specs[f.id] is None or specs[f.predecessor] is None:
            continue
        si, sj = specs[f.id], specs[f.predecessor]
        tb = f.domain[0]
        gap = np.abs(si.center - sj.center)
        K = float(np.min(sj.kappa * (si.rho(tb) / si.kappa - gap)))
        if sj.rho(tb) > K + 1e-12:
            sj.rho = sj.rho.minimum((K + speed * tb, -speed))
    return specs


def build_barrier(frag, tree, dyn=None, speed=None):
    """Barrier of one fragment (given as TemporalFragment or id)."""
    if speed is None:
        speed = float(np.max(np.abs(np.concatenate([dyn.u_lo, dyn.u_hi])))) if dyn is not None else 1.0
    fid = frag if isinstance(frag, int) else frag.id
    return build_barriers(tree, speed)[fid]


# ---------------------------------------------------------------- fixed-time parameters


@dataclass(frozen=True)
class FixedTimeParams:
    mu: float
    k: float
    r: float
    T: float
    alpha: float
    gamma1: float
    gamma2: float
    c: float = 0.005
    d: float = 0.6


def fixed_time_params(T, mu, k, r, c=0.005, d=0.6):
    if not mu > 1:
        raise DomainError(f"mu must exceed 1, got {mu}")
    if not 0 < k < 1:
        raise DomainError(f"k must lie in (0,1), got {k}")
    if not 0 < r < 1:
        raise DomainError(f"r must lie in (0,1), got {r}")
    if not T > 0:
        raise DomainError(f"T' must be positive, got {T}")
    if not 0 < c < d:
        raise DomainError(f"tube radii need 0 < c < d, got c={c}, d={d}")
    alpha = max(mu * k / ((1 - k) * T), mu * math.pi / (T * math.sqrt(1 - r * r)))
    return FixedTimeParams(mu, k, r, T, alpha, 1 + 1 / mu, 1 - 1 / mu, c, d)


def doa(ratio, params: FixedTimeParams):
    """(threshold, time bound): the domain is {b >= threshold}; -inf means the whole space.

    The time bound has closed forms for ratio >= 1 and ratio <= 0; in between it falls back to T'.
    """
    mu, k, a = params.mu, params.k, params.alpha
    if ratio < 1:
        thr = -math.inf
    else:
        thr = -(k ** mu) * (ratio - math.sqrt(ratio * ratio - 1)) ** mu
    if ratio >= 1:
        ts = mu * k / (a * (1 - k))
    elif ratio <= 0:
        ts = mu * math.pi / (2 * a)
    else:
        ts = params.T
    return thr, ts


def slack_bound(params: FixedTimeParams):
    """Upper bound on qp_slack / (2 alpha) that keeps the tube a domain of attraction."""
    q = ((params.d ** 2 - params.c ** 2) / 2) ** (1 / params.mu)
    return q / (2 * params.k) + params.k / (2 * q)
