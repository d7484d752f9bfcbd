"""Regions of the state space and the one-step predecessor operator.

Two representations share one interface:

* ``BoxUnion``: a finite union of closed axis-aligned boxes. Set algebra is
  exact up to boundaries (differences are returned as closures).
* ``GridMask``: a boolean array over a rectangular lattice. Set algebra is
  exact cell-wise; membership uses the cell that contains the point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import LatticeMismatch, NotBoxRepresentable, OutOfDomain, UnsupportedFastPath
from .formula import And, NotPred, Or, Pred, TrueF, is_state_formula

# ---------------------------------------------------------------- boxes


def _box(lo, hi):
    return (tuple(float(v) for v in lo), tuple(float(v) for v in hi))


def _box_empty(b):
    return any(l > h for l, h in zip(*b))


def _box_contains(outer, inner):
    return all(ol <= il and ih <= oh for ol, oh, il, ih in zip(*outer, *inner))


def _box_intersect(a, b):
    lo = tuple(max(x, y) for x, y in zip(a[0], b[0]))
    hi = tuple(min(x, y) for x, y in zip(a[1], b[1]))
    return (lo, hi)


def _box_minus(a, b):
    """Closed pieces covering a \\ b; pieces of zero width along a cut lie in b and are dropped."""
    inter = _box_intersect(a, b)
    if _box_empty(inter):
        return [a]
    pieces = []
    lo, hi = list(a[0]), list(a[1])
    for d in range(len(lo)):
        if lo[d] < b[0][d]:
            plo, phi = list(lo), list(hi)
            phi[d] = b[0][d]
            pieces.append((tuple(plo), tuple(phi)))
            lo[d] = b[0][d]
        if hi[d] > b[1][d]:
            plo, phi = list(lo), list(hi)
            plo[d] = b[1][d]
            pieces.append((tuple(plo), tuple(phi)))
            hi[d] = b[1][d]
    return pieces


def _canonical(boxes):
    boxes = sorted({b for b in boxes if not _box_empty(b)})
    keep = []
    for i, b in enumerate(boxes):
        if any(j != i and _box_contains(o, b) and (o != b) for j, o in enumerate(boxes)):
            continue
        keep.append(b)
    return tuple(keep)


class BoxUnion:
    """Union of closed boxes inside a declared workspace box."""

    __slots__ = ("boxes", "workspace")

    def __init__(self, boxes, workspace):
        self.workspace = _box(*workspace)
        self.boxes = _canonical(_box_intersect(_box(*b), self.workspace) for b in boxes)

    @property
    def ndim(self):
        return len(self.workspace[0])

    def _check(self, other):
        if not isinstance(other, BoxUnion):
            raise LatticeMismatch("cannot combine BoxUnion with another representation")
        if other.workspace != self.workspace:
            raise LatticeMismatch("BoxUnion workspaces differ")

    def member(self, x):
        x = np.asarray(x, dtype=float)
        return any(np.all(x >= b[0]) and np.all(x <= b[1]) for b in self.boxes)

    def members(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ok = np.zeros(len(xs), dtype=bool)
        for lo, hi in self.boxes:
            ok |= np.all((xs >= lo) & (xs <= hi), axis=1)
        return ok

    def is_empty(self):
        return not self.boxes

    def union(self, other):
        self._check(other)
        return BoxUnion(self.boxes + other.boxes, self.workspace)

    def intersect(self, other):
        self._check(other)
        return BoxUnion([_box_intersect(a, b) for a in self.boxes for b in other.boxes], self.workspace)

    def difference(self, other):
        self._check(other)
        pieces = list(self.boxes)
        for b in other.boxes:
            pieces = [p for a in pieces for p in _box_minus(a, b)]
        return BoxUnion(pieces, self.workspace)

    def complement(self):
        return BoxUnion([self.workspace], self.workspace).difference(self)

    def same_set(self, other):
        return self.difference(other).is_empty() and other.difference(self).is_empty()

    def dilate(self, lo_shift, hi_shift):
        """Minkowski sum with the box [lo_shift, hi_shift], clipped to the workspace."""
        lo_shift = np.asarray(lo_shift, dtype=float)
        hi_shift = np.asarray(hi_shift, dtype=float)
        return BoxUnion([(np.add(b[0], lo_shift), np.add(b[1], hi_shift)) for b in self.boxes],
                        self.workspace)

    def to_json(self):
        return {"type": "box_union",
                "workspace": [[l, h] for l, h in zip(*self.workspace)],
                "boxes": [[[l, h] for l, h in zip(*b)] for b in self.boxes]}

    def __eq__(self, other):
        return isinstance(other, BoxUnion) and self.workspace == other.workspace and self.boxes == other.boxes

    def __hash__(self):
        return hash((self.boxes, self.workspace))

    def __repr__(self):
        parts = [" x ".join(f"[{l:g},{h:g}]" for l, h in zip(*b)) for b in self.boxes]
        return "BoxUnion(" + (" u ".join(parts) or "empty") + ")"


# ---------------------------------------------------------------- lattices


@dataclass(frozen=True)
class Lattice:
    lo: tuple
    hi: tuple
    shape: tuple
    periodic: tuple

    @classmethod
    def make(cls, bbox, resolution=None, shape=None, periodic=None):
        lo = tuple(float(b[0]) for b in bbox)
        hi = tuple(float(b[1]) for b in bbox)
        n = len(lo)
        periodic = tuple(bool(p) for p in (periodic or (False,) * n))
        if shape is None:
            res = resolution if np.ndim(resolution) else [resolution] * n
            shape = []
            for l, h, r in zip(lo, hi, res):
                k = (h - l) / r
                if not math.isclose(k, round(k), abs_tol=1e-9):
                    raise ValueError(f"extent [{l},{h}] is not a multiple of resolution {r}")
                shape.append(int(round(k)))
        return cls(lo, hi, tuple(int(s) for s in shape), periodic)

    @cached_property
    def widths(self):
        return (np.asarray(self.hi) - np.asarray(self.lo)) / np.asarray(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @cached_property
    def centers(self):
        axes = [l + (np.arange(s) + 0.5) * w for l, s, w in zip(self.lo, self.shape, self.widths)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([g.ravel() for g in grids])

    def corners(self):
        """All 2^n corners of every cell, shape (2^n, cells, n)."""
        c = self.centers
        half = self.widths / 2.0
        n = len(self.shape)
        out = []
        for k in range(2 ** n):
            signs = np.array([1.0 if (k >> d) & 1 else -1.0 for d in range(n)])
            out.append(c + signs * half)
        return np.stack(out)

    def locate(self, xs):
        """Flat cell index of each row, -1 when outside a non-periodic extent.

        Points on a shared face belong to the lower-index cell.
        """
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        w = self.widths
        idx = np.empty(xs.shape, dtype=np.int64)
        valid = np.ones(len(xs), dtype=bool)
        for d in range(xs.shape[1]):
            v = xs[:, d]
            if self.periodic[d]:
                v = lo[d] + np.mod(v - lo[d], hi[d] - lo[d])
            else:
                tol = 1e-9 * w[d]
                valid &= (v >= lo[d] - tol) & (v <= hi[d] + tol)
            k = np.ceil((v - lo[d]) / w[d] - 1e-12).astype(np.int64) - 1
            idx[:, d] = np.clip(k, 0, self.shape[d] - 1)
        flat = np.ravel_multi_index(idx.T, self.shape)
        return np.where(valid, flat, -1)


class GridMask:
    __slots__ = ("lattice", "mask")

    def __init__(self, lattice: Lattice, mask):
        self.lattice = lattice
        mask = np.asarray(mask, dtype=bool)
        self.mask = mask.reshape(lattice.shape)
        self.mask.setflags(write=False)

    def _check(self, other):
        if not isinstance(other, GridMask) or other.lattice != self.lattice:
            raise LatticeMismatch("regions live on different lattices")

    def member(self, x):
        k = self.lattice.locate(np.asarray(x, dtype=float)[None, :])[0]
        if k < 0:
            raise OutOfDomain(f"state {list(np.ravel(x))} is outside the grid bounding box")
        return bool(self.mask.flat[k])

    def members(self, xs):
        k = self.lattice.locate(xs)
        if np.any(k < 0):
            raise OutOfDomain("state outside the grid bounding box")
        return self.mask.ravel()[k]

    def is_empty(self):
        return not self.mask.any()

    def union(self, other):
        self._check(other)
        return GridMask(self.lattice, self.mask | other.mask)

    def intersect(self, other):
        self._check(other)
        return GridMask(self.lattice, self.mask & other.mask)

    def difference(self, other):
        self._check(other)
        return GridMask(self.lattice, self.mask & ~other.mask)

    def complement(self):
        return GridMask(self.lattice, ~self.mask)

    def same_set(self, other):
        self._check(other)
        return bool(np.array_equal(self.mask, other.mask))

    def count(self):
        return int(self.mask.sum())

    def bounding_box(self):
        """Extent of the true cells (cell faces), or None when empty."""
        if self.is_empty():
            return None
        lo, hi = [], []
        for d in range(self.mask.ndim):
            axes = tuple(i for i in range(self.mask.ndim) if i != d)
            idx = np.nonzero(self.mask.any(axis=axes))[0]
            w = self.lattice.widths[d]
            lo.append(self.lattice.lo[d] + idx[0] * w)
            hi.append(self.lattice.lo[d] + (idx[-1] + 1) * w)
        return tuple(lo), tuple(hi)

    def to_json(self):
        flat = self.mask.ravel().astype(np.int8)
        change = np.flatnonzero(np.diff(flat)) + 1
        bounds = np.concatenate([[0], change, [flat.size]])
        runs = np.diff(bounds).tolist()
        if flat.size and flat[0]:
            runs = [0] + runs
        L = self.lattice
        return {"type": "grid_mask", "bbox": [[l, h] for l, h in zip(L.lo, L.hi)],
                "shape": list(L.shape), "resolution": L.widths.tolist(),
                "periodic": list(L.periodic), "rle": runs}

    def __eq__(self, other):
        return isinstance(other, GridMask) and self.lattice == other.lattice and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.lattice, self.mask.tobytes()))

    def __repr__(self):
        return f"GridMask({self.count()}/{self.lattice.size} cells)"


def region_from_json(data):
    if data["type"] == "box_union":
        ws = tuple(zip(*data["workspace"]))
        boxes = [tuple(zip(*b)) for b in data["boxes"]]
        return BoxUnion(boxes, ws)
    if data["type"] == "grid_mask":
        L = Lattice.make(data["bbox"], shape=data["shape"], periodic=data["periodic"])
        flat = np.zeros(L.size, dtype=bool)
        pos, val = 0, False
        for run in data["rle"]:
            flat[pos:pos + run] = val
            pos += run
            val = not val
        return GridMask(L, flat)
    raise ValueError(f"unknown region type {data['type']!r}")


def dumps(region):
    return json.dumps(region.to_json())


def rasterize(region: BoxUnion, lattice: Lattice, conservative=False):
    """Cells whose center (or every corner, if conservative) lies in the box union.

    Boxes with fewer dims than the lattice are extruded along the rest.
    """
    def inside(pts):
        ok = np.zeros(len(pts), dtype=bool)
        for lo, hi in region.boxes:
            k = len(lo)
            ok |= np.all((pts[:, :k] >= lo) & (pts[:, :k] <= hi), axis=1)
        return ok

    if conservative:
        mask = np.logical_and.reduce([inside(c) for c in lattice.corners()])
    else:
        mask = inside(lattice.centers)
    return GridMask(lattice, mask)


# ---------------------------------------------------------------- spaces


class Space:
    """Factory for regions over a fixed workspace and representation."""

    def __init__(self, workspace, representation="box", resolution=0.25, shape=None,
                 periodic=None, conservative=False):
        self.workspace = _box([w[0] for w in workspace], [w[1] for w in workspace])
        self.representation = representation
        self.conservative = conservative
        self.lattice = None
        if representation == "grid":
            self.lattice = Lattice.make(workspace, resolution=resolution, shape=shape, periodic=periodic)
        elif representation != "box":
            raise ValueError(f"unknown representation {representation!r}")

    @property
    def ndim(self):
        return len(self.workspace[0])

    def full(self):
        if self.lattice is not None:
            return GridMask(self.lattice, np.ones(self.lattice.shape, dtype=bool))
        return BoxUnion([self.workspace], self.workspace)

    def empty(self):
        if self.lattice is not None:
            return GridMask(self.lattice, np.zeros(self.lattice.shape, dtype=bool))
        return BoxUnion([], self.workspace)

    def box(self, box):
        """Region for a box given as per-dim (lo, hi); missing trailing dims are unconstrained."""
        lo = list(self.workspace[0])
        hi = list(self.workspace[1])
        for d, (l, h) in enumerate(box):
            lo[d], hi[d] = l, h
        bu = BoxUnion([(lo, hi)], self.workspace)
        if self.lattice is not None:
            return rasterize(bu, self.lattice, self.conservative)
        return bu

    def predicate(self, pred):
        if pred.kind == "box":
            return self.box(pred.box)
        if self.lattice is not None:
            pts = self.lattice.corners() if self.conservative else [self.lattice.centers]
            mask = np.logical_and.reduce([pred.holds(p) for p in pts])
            return GridMask(self.lattice, mask)
        a = np.asarray(pred.normal)
        nz = np.flatnonzero(a)
        if len(nz) != 1:
            raise NotBoxRepresentable(f"halfspace {pred.name} is not axis-aligned")
        d = nz[0]
        bound = pred.offset / a[d]
        lo = list(self.workspace[0])
        hi = list(self.workspace[1])
        if a[d] > 0:
            lo[d] = max(lo[d], bound)
        else:
            hi[d] = min(hi[d], bound)
        return BoxUnion([(lo, hi)], self.workspace)

    def state_formula(self, phi):
        if not is_state_formula(phi):
            raise ValueError("expected a formula without temporal operators")
        if isinstance(phi, TrueF):
            return self.full()
        if isinstance(phi, Pred):
            return self.predicate(phi.pred)
        if isinstance(phi, NotPred):
            return self.predicate(phi.pred).complement()
        regions = [self.state_formula(c) for c in phi.children]
        out = regions[0]
        for r in regions[1:]:
            out = out.intersect(r) if isinstance(phi, And) else out.union(r)
        return out

    def members(self, region, xs):
        return region.members(xs)


# ---------------------------------------------------------------- inputs & predecessor


class InputGrid:
    __slots__ = ("samples",)

    def __init__(self, samples):
        s = np.atleast_2d(np.asarray(samples, dtype=float))
        if s.size == 0:
            raise ValueError("input grid must be non-empty")
        self.samples = s
        self.samples.setflags(write=False)

    @classmethod
    def box(cls, lo, hi, per_axis=3):
        axes = [np.linspace(l, h, per_axis) if per_axis > 1 else np.array([(l + h) / 2]) for l, h in zip(lo, hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        return cls(np.column_stack([g.ravel() for g in grids]))

    @classmethod
    def for_dynamics(cls, dyn, per_axis=3):
        return cls.box(dyn.u_lo, dyn.u_hi, per_axis)

    def within(self, lo, hi, tol=1e-12):
        return bool(np.all(self.samples >= np.asarray(lo) - tol) and np.all(self.samples <= np.asarray(hi) + tol))

    @property
    def key(self):
        return self.samples.tobytes(), self.samples.shape


_SUCC_CACHE: dict = {}


def successor_table(dyn, lattice: Lattice, inputs: InputGrid):
    """(cells, inputs) int32 table of successor cells; -1 marks a step leaving the lattice."""
    key = (dyn.key, lattice, inputs.key)
    tab = _SUCC_CACHE.get(key)
    if tab is None:
        c = lattice.centers
        cols = [lattice.locate(dyn.step(c, u)) for u in inputs.samples]
        tab = np.ascontiguousarray(np.column_stack(cols).astype(np.int32))
        if len(_SUCC_CACHE) > 8:
            _SUCC_CACHE.clear()
        _SUCC_CACHE[key] = tab
    return tab


def one_step_pred(dyn, R, inputs: InputGrid | None = None, mode="exists"):
    """States with some (exists) or every (forall) admissible input landing in R.

    An input is admissible at x when its successor stays in the workspace, so
    forall(R) = complement(exists(complement(R))) holds exactly.
    """
    if mode not in ("exists", "forall"):
        raise ValueError(f"unknown mode {mode!r}")
    if isinstance(R, BoxUnion):
        if not dyn.is_integrator:
            raise UnsupportedFastPath("box unions support integrator dynamics only; rasterize first")
        if mode == "forall":
            return one_step_pred(dyn, R.complement(), inputs, "exists").complement()
        return R.dilate(-dyn.dt * np.asarray(dyn.u_hi), -dyn.dt * np.asarray(dyn.u_lo))
    if inputs is None:
        inputs = InputGrid.for_dynamics(dyn)
    succ = successor_table(dyn, R.lattice, inputs)
    fn = kernels.pred_exists if mode == "exists" else kernels.pred_forall
    return GridMask(R.lattice, fn(succ, R.mask.ravel()))


def agrees_within(grid: GridMask, boxes: BoxUnion, tol):
    """Grid matches the box union up to ``tol``: cells deep inside are set, set cells lie near it."""
    c = grid.lattice.centers
    m = grid.mask.ravel()
    deep = np.zeros(len(c), dtype=bool)
    near = np.zeros(len(c), dtype=bool)
    for lo, hi in boxes.boxes:
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        k = len(lo)
        deep |= np.all((c[:, :k] >= lo + tol) & (c[:, :k] <= hi - tol), axis=1)
        near |= np.all((c[:, :k] >= lo - tol) & (c[:, :k] <= hi + tol), axis=1)
    return bool(np.all(m[deep]) and not np.any(m & ~near))
