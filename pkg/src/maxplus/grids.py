"""Extended-real scalars with max-plus conventions, grids, grid functions.

The scalar domain is R ∪ {-inf, +inf} represented as float64.  Addition
treats -inf as absorbing (so +inf + -inf = -inf, never NaN), max is the
semiring addition, and negation swaps the two infinities.  NaN is
rejected at every construction site.

Grids are uniform rectangular lattices in one or two dimensions.  Node
coordinates are reproducible bit-exactly as ``lo + index * h`` with
``h = (hi - lo) / (n - 1)``, evaluated in exactly that order.

Every type here is immutable after construction (value arrays are marked
read-only) and every operation is pure, so concurrent use needs no
locking.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import GridMismatchError, ValidationError

NEG_INF = float("-inf")
POS_INF = float("inf")


def oplus(a, b):
    """Max-plus addition: the pointwise maximum."""
    return np.maximum(a, b)


def otimes(a, b):
    """Max-plus multiplication: a + b with -inf absorbing.

    Works on scalars and arrays; +inf + -inf = -inf in every context.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isneginf(a) | np.isneginf(b), NEG_INF, a + b)
    if out.ndim == 0:
        return float(out)
    return out


def neg(a):
    """Max-plus conjugation sign flip; swaps -inf and +inf."""
    a = np.asarray(a, dtype=np.float64)
    out = -a
    if out.ndim == 0:
        return float(out)
    return out


def check_values(values, what="values"):
    """Return a float64 array with NaN rejected."""
    arr = np.asarray(values, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValidationError(f"{what}: NaN is not an extended real")
    return arr


def _as_axis_tuple(v, dim, what):
    if np.isscalar(v):
        t = tuple(float(v) for _ in range(dim))
    else:
        t = tuple(float(x) for x in v)
    if len(t) != dim:
        raise ValidationError(f"{what}: expected {dim} per-axis entries, got {len(t)}")
    return t


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid in 1 or 2 dimensions.

    ``lo``, ``hi`` and ``n`` are per-axis tuples; scalars are accepted for
    1-D grids.  Per axis: n >= 1, lo <= hi, and lo == hi only when n == 1.
    Bounds must be finite.
    """

    lo: tuple
    hi: tuple
    n: tuple

    def __post_init__(self):
        lo, hi, n = self.lo, self.hi, self.n
        if np.isscalar(lo) and np.isscalar(hi) and np.isscalar(n):
            dim = 1
        else:
            dim = len(n) if not np.isscalar(n) else len(lo)
        if dim not in (1, 2):
            raise ValidationError(f"grid dimension must be 1 or 2, got {dim}")
        lo = _as_axis_tuple(lo, dim, "lo")
        hi = _as_axis_tuple(hi, dim, "hi")
        if np.isscalar(n):
            n = (int(n),) * dim
        else:
            n = tuple(int(k) for k in n)
        if len(n) != dim:
            raise ValidationError("n: per-axis entry count mismatch")
        for a, b, k in zip(lo, hi, n):
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ValidationError("grid bounds must be finite")
            if k < 1:
                raise ValidationError("grid needs at least one node per axis")
            if a > b:
                raise ValidationError("grid lower bound exceeds upper bound")
            if a == b and k != 1:
                raise ValidationError("degenerate axis (lo == hi) requires n == 1")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    @classmethod
    def line(cls, lo, hi, n):
        return cls((float(lo),), (float(hi),), (int(n),))

    @classmethod
    def box(cls, lo, hi, n):
        return cls(tuple(lo), tuple(hi), tuple(n))

    @property
    def dim(self):
        return len(self.n)

    @property
    def shape(self):
        return self.n

    @property
    def size(self):
        return int(np.prod(self.n))

    def step(self, axis=0):
        if self.n[axis] == 1:
            return 0.0
        return (self.hi[axis] - self.lo[axis]) / (self.n[axis] - 1)

    def axis_coords(self, axis=0):
        """Coordinates along one axis: lo + index * h, in that order."""
        h = self.step(axis)
        return self.lo[axis] + np.arange(self.n[axis], dtype=np.float64) * h

    @cached_property
    def coords(self):
        """Node coordinates: shape (size,) for 1-D, (size, 2) for 2-D.

        Row-major node ordering throughout the package.
        """
        if self.dim == 1:
            c = self.axis_coords(0)
        else:
            a0 = self.axis_coords(0)
            a1 = self.axis_coords(1)
            g0, g1 = np.meshgrid(a0, a1, indexing="ij")
            c = np.stack([g0.ravel(), g1.ravel()], axis=1)
        c.setflags(write=False)
        return c

    def nearest_index(self, points):
        """Flat indices of the nodes nearest to the given coordinates (1-D)."""
        if self.dim != 1:
            raise ValidationError("nearest_index is 1-D only")
        pts = np.asarray(points, dtype=np.float64)
        h = self.step(0)
        if h == 0.0:
            idx = np.zeros(pts.shape, dtype=np.int64)
        else:
            idx = np.rint((pts - self.lo[0]) / h).astype(np.int64)
            idx = np.clip(idx, 0, self.n[0] - 1)
        return idx

    def ball_slices(self, flat_index, radius):
        """Index bounds of the Chebyshev ball around a node, per axis."""
        idx = np.unravel_index(flat_index, self.n)
        return tuple(
            (max(0, i - radius), min(k - 1, i + radius))
            for i, k in zip(np.atleast_1d(idx), self.n)
        )

    def __repr__(self):
        axes = "x".join(
            f"[{a},{b}]/{k}" for a, b, k in zip(self.lo, self.hi, self.n)
        )
        return f"Grid({axes})"


TAGS = ("lsc", "usc", "plain")


@dataclass(frozen=True)
class GridFn:
    """A function sampled on a grid, extended-real valued.

    ``values`` has the grid's shape.  ``tag`` is advisory semicontinuity
    metadata used by hull and extension operations.
    """

    grid: Grid
    values: np.ndarray
    tag: str = "plain"

    def __post_init__(self):
        arr = check_values(self.values)
        if arr.shape != self.grid.shape:
            if arr.size == self.grid.size:
                arr = arr.reshape(self.grid.shape)
            else:
                raise ValidationError(
                    f"values shape {arr.shape} does not match grid {self.grid.shape}"
                )
        if self.tag not in TAGS:
            raise ValidationError(f"tag must be one of {TAGS}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def constant(cls, grid, value, tag="plain"):
        return cls(grid, np.full(grid.shape, float(value)), tag)

    @classmethod
    def from_callable(cls, grid, fn, tag="plain"):
        c = grid.coords
        if grid.dim == 1:
            vals = np.array([fn(x) for x in c], dtype=np.float64)
        else:
            vals = np.array([fn(x0, x1) for x0, x1 in c], dtype=np.float64)
        return cls(grid, vals.reshape(grid.shape), tag)

    @property
    def flat(self):
        return self.values.reshape(-1)

    def with_values(self, values, tag=None):
        return GridFn(self.grid, values, self.tag if tag is None else tag)

    def __call__(self, flat_index):
        return float(self.flat[flat_index])


def indicator(grid, mask):
    """Max-plus characteristic function: 0 on the set, -inf off it."""
    mask = np.asarray(mask, dtype=bool).reshape(grid.shape)
    vals = np.where(mask, 0.0, NEG_INF)
    return GridFn(grid, vals)


def require_same_grid(fn, grid, what):
    if fn.grid != grid:
        raise GridMismatchError(what, grid, fn.grid)


def stencil_max(values, radius):
    """Dilation by the Chebyshev ball of the given radius (u.s.c. hull)."""
    if radius == 0:
        return np.array(values, dtype=np.float64)
    return ndimage.maximum_filter(values, size=2 * radius + 1, mode="nearest")


def stencil_min(values, radius):
    """Erosion by the Chebyshev ball of the given radius (l.s.c. hull)."""
    if radius == 0:
        return np.array(values, dtype=np.float64)
    return ndimage.minimum_filter(values, size=2 * radius + 1, mode="nearest")


@dataclass(frozen=True)
class DomainMask:
    """Finiteness masks for a grid function.

    ldom = {g < +inf}, udom = {g > -inf}, dom = both, and idom is the part
    of dom where the stencil limsup stays finite.
    """

    ldom: np.ndarray
    udom: np.ndarray
    dom: np.ndarray = field(default=None)
    idom: np.ndarray = field(default=None)


def domain_masks(g, stencil_radius=1):
    """Compute the four finiteness masks of a grid function.

    With radius 0 the local-boundedness mask idom equals dom; otherwise a
    node is in idom when the max of g over the Chebyshev ball around it
    is finite.
    """
    if stencil_radius < 0:
        raise ValidationError("stencil_radius must be >= 0")
    v = g.values
    ldom = v < POS_INF
    udom = v > NEG_INF
    dom = ldom & udom
    local_sup = stencil_max(v, stencil_radius)
    idom = dom & (local_sup < POS_INF)
    for m in (ldom, udom, dom, idom):
        m.setflags(write=False)
    return DomainMask(ldom=ldom, udom=udom, dom=dom, idom=idom)
