"""Moreau conjugacies on grids: kernels, transforms, subdifferentials.

A kernel couples an X-grid and a Y-grid through b(x, y), valued in
R ∪ {-inf} (+inf is rejected).  The conjugate of f is

    Bf(x) = max_y ( b(x, y) - f(y) )

with max-plus conventions, and the dual transform is conjugation with the
transposed kernel, so the b / b-transpose symmetry holds by construction.

Coercivity-style growth conditions are statements about behaviour at
infinity; a finite window can only sample them, so the reports here label
their findings EVIDENCE or VIOLATION, never proofs.  Window edges that
stand in for infinity are distinguished from genuine boundaries (as in a
half-line domain) through ``WindowSides``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError
from .grids import (
    NEG_INF,
    POS_INF,
    Grid,
    GridFn,
    check_values,
    otimes,
    require_same_grid,
)

EVIDENCE = "EVIDENCE"
VIOLATION = "VIOLATION"
EDGE = "EDGE"  # stencil clipped by an open window side: not a faithful neighborhood


class Kernel:
    """Coupling b(x, y) between an X-grid and a Y-grid.

    Either the closed-form bilinear kernel b(x, y) = x·y or a dense table.
    Table entries live in R ∪ {-inf}; every row and every column must
    contain at least one finite entry.
    """

    def __init__(self, x_grid, y_grid, table=None, kind=None):
        self.x_grid = x_grid
        self.y_grid = y_grid
        if table is None:
            self.kind = kind or "bilinear"
            if self.kind != "bilinear":
                raise ValidationError("only the bilinear closed form is registered")
            if x_grid.dim != y_grid.dim:
                raise ValidationError("bilinear kernel needs grids of equal dimension")
            self.table = None
        else:
            self.kind = "table"
            arr = check_values(table, "kernel table")
            if arr.shape != (x_grid.size, y_grid.size):
                raise ValidationError(
                    f"kernel table shape {arr.shape} != ({x_grid.size}, {y_grid.size})"
                )
            if np.isposinf(arr).any():
                raise ValidationError("kernel entries must lie in R ∪ {-inf}")
            finite = np.isfinite(arr)
            if not finite.any(axis=1).all():
                raise ValidationError("kernel has a row without finite entries")
            if not finite.any(axis=0).all():
                raise ValidationError("kernel has a column without finite entries")
            arr = arr.copy()
            arr.setflags(write=False)
            self.table = arr

    @classmethod
    def bilinear(cls, x_grid, y_grid):
        return cls(x_grid, y_grid)

    @classmethod
    def from_table(cls, x_grid, y_grid, table):
        return cls(x_grid, y_grid, table=table)

    def transpose(self):
        """The kernel of the dual conjugacy: b∨(y, x) = b(x, y)."""
        if self.kind == "bilinear":
            return Kernel.bilinear(self.y_grid, self.x_grid)
        return Kernel.from_table(self.y_grid, self.x_grid, self.table.T)

    def matrix(self):
        """Dense b(x, y) table (materialised for the bilinear form)."""
        if self.kind == "table":
            return self.table
        xc = self.x_grid.coords
        yc = self.y_grid.coords
        if self.x_grid.dim == 1:
            m = np.multiply.outer(xc, yc)
        else:
            m = np.multiply.outer(xc[:, 0], yc[:, 0]) + np.multiply.outer(
                xc[:, 1], yc[:, 1]
            )
        m.setflags(write=False)
        return m

    def row(self, i):
        """b(x_i, ·) as a GridFn on the Y-grid."""
        return GridFn(self.y_grid, np.array(self.matrix()[i]))

    def __repr__(self):
        return f"Kernel({self.kind}, X={self.x_grid}, Y={self.y_grid})"


def conjugate(f, k):
    """Max-plus conjugate of f through the kernel: x ↦ max_y b(x,y) - f(y).

    The dual transform is ``conjugate(g, k.transpose())``.  Result is
    tagged plain.
    """
    require_same_grid(f, k.y_grid, "conjugate: f")
    neg_f = -f.flat
    if k.kind == "bilinear":
        if k.x_grid.dim == 1:
            out = _kernels.matvec_bilinear(k.x_grid.coords, k.y_grid.coords, neg_f)
        else:
            xc = k.x_grid.coords
            yc = k.y_grid.coords
            out = _kernels.matvec_bilinear_2d(
                np.ascontiguousarray(xc[:, 0]),
                np.ascontiguousarray(xc[:, 1]),
                np.ascontiguousarray(yc[:, 0]),
                np.ascontiguousarray(yc[:, 1]),
                neg_f,
            )
    else:
        out = _kernels.matvec_table(k.table, neg_f)
    return GridFn(k.x_grid, out.reshape(k.x_grid.shape))


def legendre_fast(f, x_grid):
    """Legendre-Fenchel transform of a 1-D grid function in O(|X| + |Y|).

    Bit-identical to ``conjugate(f, Kernel.bilinear(x_grid, f.grid))``:
    an upper-envelope pass over the lines y ↦ (slope y, intercept -f(y))
    followed by a monotone merge against the sorted x nodes, evaluating
    each candidate line with the same float expression the dense path
    uses.
    """
    if f.grid.dim != 1 or x_grid.dim != 1:
        raise ValidationError("legendre_fast handles 1-D grids only")
    vals = f.flat
    finite = np.isfinite(vals)
    if not finite.any():
        raise ValidationError("legendre_fast: f has no finite value")
    xs = x_grid.coords
    if np.isneginf(vals).any():
        # some line has intercept +inf, so the transform is +inf everywhere
        return GridFn(x_grid, np.full(x_grid.shape, POS_INF))
    slopes = f.grid.coords[finite]
    icepts = -vals[finite]
    out = _kernels.envelope_merge(
        np.ascontiguousarray(slopes), np.ascontiguousarray(icepts), xs
    )
    return GridFn(x_grid, out)


@dataclass(frozen=True)
class SubdiffMap:
    """Attainment structure of the dual conjugate.

    ``attain[i, j]`` is true when y_j belongs to the subdifferential of g
    at x_i, equivalently when the max defining the dual conjugate at y_j
    is attained at x_i with b(x_i, y_j) finite and g(x_i) < +inf.
    """

    x_grid: Grid
    y_grid: Grid
    attain: np.ndarray
    dual: GridFn  # the dual conjugate of g on the Y-grid

    def at(self, x_index):
        """Y-nodes in the subdifferential at one x-node."""
        return np.flatnonzero(self.attain[x_index])

    def preimage(self, y_index):
        """X-nodes whose subdifferential contains one y-node."""
        return np.flatnonzero(self.attain[:, y_index])


def subdifferential_map(g, k):
    """Both directions of the generalized subdifferential of g.

    y ∈ ∂g(x) iff b(x, y) is finite, g(x) < +inf, and x attains the max
    defining the dual conjugate at y.  Points with g(x) = +inf carry an
    empty subdifferential.
    """
    require_same_grid(g, k.x_grid, "subdifferential_map: g")
    b = k.matrix()
    gv = g.flat
    dual = conjugate(g, k.transpose())
    terms = otimes(b, -gv[:, None])
    attain = np.isfinite(b) & (gv[:, None] < POS_INF) & (terms == dual.flat[None, :])
    attain.setflags(write=False)
    return SubdiffMap(x_grid=k.x_grid, y_grid=k.y_grid, attain=attain, dual=dual)


@dataclass(frozen=True)
class WindowSides:
    """Which edges of a grid window stand in for infinity.

    ``closed_below`` / ``closed_above`` are per-axis flags; a closed side
    is a genuine boundary of the space (as the left end of a half-line
    domain), so sets may touch it without hurting compactness evidence.
    Open sides emulate infinity and carry the margin ring.
    """

    closed_below: tuple = ()
    closed_above: tuple = ()

    @classmethod
    def all_open(cls, dim):
        return cls((False,) * dim, (False,) * dim)

    @classmethod
    def half_line(cls):
        """1-D window [a, +inf): genuine lower edge, emulated upper edge."""
        return cls((True,), (False,))

    def normalized(self, dim):
        cb = self.closed_below or (False,) * dim
        ca = self.closed_above or (False,) * dim
        if len(cb) != dim or len(ca) != dim:
            raise ValidationError("WindowSides flags must match the grid dimension")
        return cb, ca


def inner_window_mask(grid, margin, sides=None):
    """Nodes at coordinate distance > margin*(hi-lo) from every open edge."""
    if not (0.0 < margin < 0.5):
        raise ValidationError("window margin must lie in (0, 1/2)")
    sides = sides or WindowSides.all_open(grid.dim)
    cb, ca = sides.normalized(grid.dim)
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        lo, hi = grid.lo[ax], grid.hi[ax]
        pad = margin * (hi - lo)
        c = grid.axis_coords(ax)
        ok = np.ones(c.shape, dtype=bool)
        if not cb[ax]:
            ok &= c >= lo + pad
        if not ca[ax]:
            ok &= c <= hi - pad
        shape = [1] * grid.dim
        shape[ax] = c.size
        mask &= ok.reshape(shape)
    return mask.reshape(-1)


def _neighborhood_gain(b, grid, x_index, radius):
    """max_{z in ball(x)} b(z, ·) - b(x, ·) with max-plus conventions."""
    bounds = grid.ball_slices(x_index, radius)
    idx = np.unravel_index(x_index, grid.n)
    if grid.dim == 1:
        rows = range(bounds[0][0], bounds[0][1] + 1)
        flat_rows = list(rows)
    else:
        flat_rows = [
            int(np.ravel_multi_index((i0, i1), grid.n))
            for i0 in range(bounds[0][0], bounds[0][1] + 1)
            for i1 in range(bounds[1][0], bounds[1][1] + 1)
        ]
    sup = b[flat_rows].max(axis=0)
    return otimes(sup, -b[x_index])


def _default_betas(values, quantiles, inner):
    """Quantiles of the finite values inside the inner window.

    Level sets cut at these heights have room to stay inside the window,
    so containment failures signal escaping mass rather than an
    over-ambitious beta.
    """
    fin = values[inner & np.isfinite(values)]
    if fin.size == 0:
        return []
    return [float(np.quantile(fin, q)) for q in quantiles]


@dataclass(frozen=True)
class LevelSetCheck:
    beta: float
    set_size: int
    contained: bool
    bounded_above: bool = True


@dataclass(frozen=True)
class CoercivityReport:
    """Per-x sublevel-set diagnostics for the neighborhood-gain function.

    ``coercive`` / ``upper_coercive`` hold one EVIDENCE/VIOLATION/EDGE
    label per x-node; EDGE marks nodes whose stencil ball is clipped by
    an open side of the X-window (the ball is then not a faithful
    neighborhood of the emulated space, so the node is not testable).
    The strongly-coercive labels coincide with the coercive ones because
    a stencil ball on a grid is already a finite neighborhood
    (``finite_neighborhoods`` records this).
    """

    margin: float
    coercive: list
    upper_coercive: list
    checks: list = field(repr=False)
    finite_neighborhoods: bool = True

    @property
    def strongly_coercive(self):
        return self.coercive

    @property
    def all_coercive(self):
        tested = [v for v in self.coercive if v != EDGE]
        return bool(tested) and all(v == EVIDENCE for v in tested)

    @property
    def all_upper_coercive(self):
        tested = [v for v in self.upper_coercive if v != EDGE]
        return bool(tested) and all(v == EVIDENCE for v in tested)


def _window_clipped(grid, flat_index, radius, sides):
    """Is the Chebyshev ball clipped by an open window side?

    Single-node axes are whole spaces, never clipped.
    """
    cb, ca = (sides or WindowSides.all_open(grid.dim)).normalized(grid.dim)
    idx = np.unravel_index(flat_index, grid.n)
    for ax, i in enumerate(np.atleast_1d(idx)):
        if grid.n[ax] == 1:
            continue
        if i - radius < 0 and not cb[ax]:
            return True
        if i + radius > grid.n[ax] - 1 and not ca[ax]:
            return True
    return False


def coercivity_report(
    k,
    window_margin,
    *,
    stencil_radius=1,
    betas=None,
    beta_quantiles=(0.5, 0.75, 0.9),
    sides=None,
    x_sides=None,
):
    """Sample coercivity of the kernel through stencil neighborhoods.

    For each x-node and V the stencil ball around it, the sublevel sets
    {y : max_{z in V} b(z,y) - b(x,y) <= beta} are tested for containment
    in the inner window (coercive evidence) and for the max of b(x, ·)
    over them being attained away from open edges (upper-coercive
    evidence).  Betas default to quantiles of the finite gain values
    inside the inner window.  ``sides`` declare which Y-window edges are
    genuine boundaries; ``x_sides`` the same for the X-window, whose open
    edges produce untestable (EDGE) nodes.
    """
    b = k.matrix()
    inner = inner_window_mask(k.y_grid, window_margin, sides)
    coercive = []
    upper = []
    checks = []
    for i in range(k.x_grid.size):
        if _window_clipped(k.x_grid, i, stencil_radius, x_sides):
            coercive.append(EDGE)
            upper.append(EDGE)
            checks.append([])
            continue
        gain = _neighborhood_gain(b, k.x_grid, i, stencil_radius)
        bs = betas if betas is not None else _default_betas(gain, beta_quantiles, inner)
        if betas is None and bs:
            # cap default levels just under the ring minimum: sublevel-set
            # geometry need not match the window shape, but any level below
            # every ring value fits whenever no valley escapes; levels at or
            # above escaping valleys still flag violations
            ring = gain[~inner]
            ring = ring[np.isfinite(ring)]
            if ring.size:
                lo = ring.min()
                cap = lo - max(1e-12, 0.05 * abs(lo))
                floor = min(bs)
                bs = sorted({max(min(beta, cap), floor) for beta in bs})
        row_checks = []
        ok_c = True
        ok_u = True
        for beta in bs:
            sub = gain <= beta
            contained = not (sub & ~inner).any()
            if sub.any():
                vals = np.where(sub, b[i], NEG_INF)
                top = vals.max()
                bounded = top == NEG_INF or bool((inner & (vals == top)).any())
            else:
                bounded = True
            ok_c &= contained
            ok_u &= bounded
            row_checks.append(
                LevelSetCheck(
                    beta=float(beta),
                    set_size=int(sub.sum()),
                    contained=contained,
                    bounded_above=bounded,
                )
            )
        if not bs:
            ok_c = False  # nothing finite to test against
        coercive.append(EVIDENCE if ok_c else VIOLATION)
        upper.append(EVIDENCE if ok_u else VIOLATION)
        checks.append(row_checks)
    return CoercivityReport(
        margin=float(window_margin),
        coercive=coercive,
        upper_coercive=upper,
        checks=checks,
    )


@dataclass(frozen=True)
class SuperlevelReport:
    """Per-x superlevel-set confinement evidence for b(x,·) - f."""

    margin: float
    verdicts: list
    checks: list = field(repr=False)

    @property
    def all_evidence(self):
        return all(v == EVIDENCE for v in self.verdicts)


def superlevel_compactness_report(
    f,
    k,
    window_margin,
    *,
    betas=None,
    beta_quantiles=(0.75, 0.9),
    sides=None,
):
    """Evidence that superlevel sets {b(x,·) - f >= beta} stay confined.

    Empty superlevel sets count as evidence (there is nothing to escape);
    sets touching an open window edge are violations.
    """
    require_same_grid(f, k.y_grid, "superlevel_compactness_report: f")
    b = k.matrix()
    inner = inner_window_mask(k.y_grid, window_margin, sides)
    neg_f = -f.flat
    verdicts = []
    checks = []
    for i in range(k.x_grid.size):
        vals = otimes(b[i], neg_f)
        bs = betas if betas is not None else _default_betas(vals, beta_quantiles, inner)
        if not bs:
            # b(x,·) - f is -inf everywhere: all superlevel sets are empty
            verdicts.append(EVIDENCE)
            checks.append([])
            continue
        row_checks = []
        ok = True
        for beta in bs:
            sup = vals >= beta
            contained = not (sup & ~inner).any()
            ok &= contained
            row_checks.append(
                LevelSetCheck(beta=float(beta), set_size=int(sup.sum()), contained=contained)
            )
        verdicts.append(EVIDENCE if ok else VIOLATION)
        checks.append(row_checks)
    return SuperlevelReport(margin=float(window_margin), verdicts=verdicts, checks=checks)
