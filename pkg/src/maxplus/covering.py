"""Existence and uniqueness of conjugacy pre-images via coverings.

Given g on the X-grid and a kernel, the candidate pre-image is the dual
conjugate of g.  The target nodes (a caller-chosen X' intersected with
{g > -inf}) must be covered by the inverse-subdifferential pieces for a
pre-image to exist; essential pieces and their interior decide
uniqueness and pin the values every solution must take.

Pre-image functions range over R ∪ {+inf} per node: densities are
bounded below, so a dual-conjugate value of -inf marks a node supported
only by infinite g and is lifted out of the candidate's effective domain
(set to +inf) before certification.
"""

from dataclasses import dataclass, field

import numpy as np

from .conjugacy import (
    EVIDENCE,
    Kernel,
    VIOLATION,
    coercivity_report,
    conjugate,
    subdifferential_map,
    superlevel_compactness_report,
)
from .errors import ValidationError
from .grids import (
    NEG_INF,
    POS_INF,
    GridFn,
    domain_masks,
    stencil_max,
    stencil_min,
)


def _as_node_mask(grid, nodes):
    if nodes is None:
        return np.ones(grid.size, dtype=bool)
    nodes = np.asarray(nodes)
    if nodes.dtype == bool:
        return nodes.reshape(-1).copy()
    mask = np.zeros(grid.size, dtype=bool)
    mask[nodes.reshape(-1).astype(np.int64)] = True
    return mask


def _chebyshev_ball_mask(grid, flat_index, radius):
    mask = np.zeros(grid.n, dtype=bool)
    sl = tuple(
        slice(lo, hi + 1) for lo, hi in grid.ball_slices(flat_index, radius)
    )
    mask[sl] = True
    return mask.reshape(-1)


@dataclass(frozen=True)
class CoveringReport:
    """Covering of the target by inverse-subdifferential pieces.

    ``piece_index`` lists the y-nodes indexing pieces (the finite-sublevel
    part of the dual conjugate); ``pinned`` is where every solution must
    agree with the dual conjugate: the algebraically essential nodes plus
    the interior of the topologically essential ones, interior taken
    relative to the dual conjugate's domain with the same stencil.
    """

    target: np.ndarray
    piece_index: np.ndarray
    covered: bool
    uncovered_nodes: np.ndarray
    alg_essential: np.ndarray
    top_essential: np.ndarray
    pinned: np.ndarray
    minimal_alg: bool
    minimal_top: bool
    stencil_radius: int
    subdiff: object = field(repr=False)

    def piece(self, y_index):
        return self.subdiff.preimage(y_index)

    def pieces(self):
        return {int(y): self.piece(y) for y in self.piece_index}


def build_covering(g, k, xprime=None, stencil_radius=1):
    """Assemble the covering report for the target X' ∩ {g > -inf}.

    A piece index y is algebraically essential when removing that single
    piece uncovers a target node, and topologically essential when
    removing every piece in the stencil ball around y does.
    """
    sd = subdifferential_map(g, k)
    dual = sd.dual.flat
    piece_mask = dual < POS_INF
    piece_index = np.flatnonzero(piece_mask)

    masks = domain_masks(g, stencil_radius)
    target = _as_node_mask(k.x_grid, xprime) & masks.udom.reshape(-1)

    active = sd.attain[:, piece_mask]  # target coverage only through pieces
    cover_count = active.sum(axis=1)
    uncovered = target & (cover_count == 0)
    covered = not uncovered.any()

    ny = k.y_grid.size
    alg = np.zeros(ny, dtype=bool)
    top = np.zeros(ny, dtype=bool)
    singles = target & (cover_count == 1)
    if singles.any():
        alg[piece_index] = sd.attain[np.ix_(singles, piece_mask)].any(axis=0)

    # y is topologically essential iff some target node's covering pieces
    # all lie in the Chebyshev ball around y
    r = stencil_radius
    for x in np.flatnonzero(target & (cover_count > 0)):
        ys = np.flatnonzero(sd.attain[x] & piece_mask)
        if k.y_grid.dim == 1:
            lo, hi = ys.min(), ys.max()
            if hi - lo <= 2 * r:
                top[max(0, hi - r) : lo + r + 1] = True
        else:
            ij = np.array(np.unravel_index(ys, k.y_grid.n)).T
            lo = ij.max(axis=0) - r
            hi = ij.min(axis=0) + r
            if (lo <= hi).all():
                box = np.zeros(k.y_grid.n, dtype=bool)
                box[
                    max(0, lo[0]) : hi[0] + 1,
                    max(0, lo[1]) : hi[1] + 1,
                ] = True
                top |= box.reshape(-1)
    top &= piece_mask
    alg &= piece_mask

    dual_dom = np.isfinite(dual)
    interior = np.zeros(ny, dtype=bool)
    for y in np.flatnonzero(top):
        ball = _chebyshev_ball_mask(k.y_grid, y, r)
        if not (ball & dual_dom & ~top).any():
            interior[y] = True
    pinned = alg | interior

    return CoveringReport(
        target=target,
        piece_index=piece_index,
        covered=covered,
        uncovered_nodes=np.flatnonzero(uncovered),
        alg_essential=np.flatnonzero(alg),
        top_essential=np.flatnonzero(top),
        pinned=np.flatnonzero(pinned),
        minimal_alg=bool(alg[piece_index].all()) if piece_index.size else True,
        minimal_top=bool(top[piece_index].all()) if piece_index.size else True,
        stencil_radius=stencil_radius,
        subdiff=sd,
    )


def quasicontinuity_check(f, stencil_radius=1, tol=0.0):
    """Does the l.s.c. hull of the u.s.c. hull reproduce f on its domain?

    Returns (ok, witness) where witness is the first violating flat node
    index, or None.  The closing never falls below f, so the check is
    whether its excess stays within ``tol``: a strict local minimum of a
    sampled-smooth function carries an excess of about half its second
    difference, while a genuine spike carries the whole jump, so a
    one-grid-step tolerance separates the two regimes.
    """
    dom = np.isfinite(f.values).reshape(-1)
    if not dom.any():
        raise ValidationError("quasicontinuity_check: f has empty domain")
    closing = stencil_min(stencil_max(f.values, stencil_radius), stencil_radius)
    with np.errstate(invalid="ignore"):
        gap = closing.reshape(-1) - f.flat
        gap[np.isnan(gap)] = 0.0  # matching infinities
    bad = dom & (gap > tol)
    if bad.any():
        return False, int(np.flatnonzero(bad)[0])
    return True, None


def lifted_candidate(dual):
    """The candidate pre-image: the dual conjugate with -inf lifted to +inf.

    Densities are bounded below; -inf dual values mark nodes outside the
    candidate's effective domain.
    """
    vals = np.array(dual.values)
    vals[np.isneginf(vals)] = POS_INF
    return GridFn(dual.grid, vals, tag="lsc")


@dataclass(frozen=True)
class PreimageReport:
    """Residuals of the candidate pre-image f = dual conjugate of g.

    ``le_margin`` is the largest (finite) amount by which B f exceeds g;
    ``eq_residual`` the largest finite |B f - g| over X'.  Equality at
    infinite values requires matching signs.  ``passed`` certifies
    existence constructively.
    """

    candidate: GridFn
    transformed: GridFn
    le_margin: float
    eq_residual: float
    passed: bool
    le_violations: np.ndarray
    eq_violations: np.ndarray
    degenerate_rows: np.ndarray

    def summary(self):
        return (
            f"pre-image check: {'PASS' if self.passed else 'FAIL'} "
            f"(<= margin {self.le_margin:.3g}, equality residual {self.eq_residual:.3g})"
        )


def solve_preimage(g, k, xprime=None, *, le_tol=0.0, eq_tol=0.0):
    """Certify existence through the canonical candidate pre-image.

    FAIL is a result, not an error: when the candidate fails, no function
    bounded below solves the problem.
    """
    dual = conjugate(g, k.transpose())
    cand = lifted_candidate(dual)
    bf = conjugate(cand, k)

    gv = g.flat
    bv = bf.flat
    both_fin = np.isfinite(gv) & np.isfinite(bv)
    with np.errstate(invalid="ignore"):
        le_viol = (bv > gv) & ~(np.isposinf(bv) & np.isposinf(gv))
        le_margin = (
            float((bv[both_fin] - gv[both_fin]).max()) if both_fin.any() else 0.0
        )
        fin_exceed = both_fin & (bv - gv > le_tol)
        le_ok = not ((le_viol & ~both_fin) | fin_exceed).any()

        xmask = _as_node_mask(k.x_grid, xprime)
        eq_fin = xmask & both_fin
        eq_residual = (
            float(np.abs(bv[eq_fin] - gv[eq_fin]).max()) if eq_fin.any() else 0.0
        )
        eq_bad = xmask & (
            (both_fin & (np.abs(bv - gv) > eq_tol))
            | (np.isposinf(gv) != np.isposinf(bv))
            | (np.isneginf(gv) != np.isneginf(bv))
        )
    passed = le_ok and not eq_bad.any()

    # rows where g = -inf: B f must collapse to -inf there, which needs the
    # whole kernel row to degenerate wherever the candidate is finite
    degenerate = np.flatnonzero(np.isneginf(gv))
    return PreimageReport(
        candidate=cand,
        transformed=bf,
        le_margin=le_margin,
        eq_residual=eq_residual,
        passed=passed,
        le_violations=np.flatnonzero(le_viol & ~both_fin | fin_exceed),
        eq_violations=np.flatnonzero(eq_bad),
        degenerate_rows=degenerate,
    )


YES = "YES"
NO = "NO"
YES_IF_ASSUMPTIONS = "YES_IF_ASSUMPTIONS"
UNIQUE = "UNIQUE"
NOT_UNIQUE = "NOT_UNIQUE"
UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class CoveringConfig:
    stencil_radius: int = 1
    window_margin: float = 0.1
    le_tol: float = 0.0
    eq_tol: float = 0.0
    # finite grids are compact discrete spaces, where the standing
    # assumptions hold outright; set True to record them as satisfied
    # instead of sampling window evidence
    assume_finite_exact: bool = False
    sides: object = None    # Y-window edge roles
    x_sides: object = None  # X-window edge roles


@dataclass(frozen=True)
class AssumptionReport:
    discrete_space: bool
    dual_superlevel_compact: str
    kernel_coercive: str
    xprime_inside_idom: bool
    quasicontinuous_dual: bool

    @property
    def combined(self):
        """(discrete or continuity-side) and (compactness or coercivity)."""
        first = self.discrete_space
        second = self.dual_superlevel_compact == EVIDENCE or (
            self.kernel_coercive == EVIDENCE and self.xprime_inside_idom
        )
        return first and second


@dataclass(frozen=True)
class Verdict:
    existence: str
    uniqueness: str
    assumptions: AssumptionReport
    covering: CoveringReport
    certificate: PreimageReport
    quasicontinuity_witness: object = None


def verdict(g, k, xprime=None, config=CoveringConfig()):
    """Existence/uniqueness verdict for the pre-image problem on a grid.

    Existence: YES when the covering holds or the candidate certifies;
    NO when neither and the standing assumptions have evidence; UNKNOWN
    otherwise.  Uniqueness requires a covering plus quasi-continuity of
    the dual conjugate: UNIQUE iff also topologically minimal.
    """
    rep = build_covering(g, k, xprime, config.stencil_radius)
    pre = solve_preimage(g, k, xprime, le_tol=config.le_tol, eq_tol=config.eq_tol)
    cand = lifted_candidate(rep.subdiff.dual)
    if np.isfinite(cand.values).any():
        qc_ok, qc_witness = quasicontinuity_check(cand, config.stencil_radius)
    else:
        qc_ok, qc_witness = True, None  # empty domain: vacuously quasi-continuous

    masks = domain_masks(g, config.stencil_radius)
    xmask = _as_node_mask(k.x_grid, xprime)
    inside = bool(
        (xmask <= (masks.idom.reshape(-1) | np.isneginf(g.flat))).all()
    )
    if config.assume_finite_exact:
        assumptions = AssumptionReport(
            discrete_space=True,
            dual_superlevel_compact=EVIDENCE,
            kernel_coercive=EVIDENCE,
            xprime_inside_idom=inside,
            quasicontinuous_dual=qc_ok,
        )
    else:
        co = coercivity_report(
            k,
            config.window_margin,
            stencil_radius=config.stencil_radius,
            sides=config.sides,
            x_sides=config.x_sides,
        )
        fc = superlevel_compactness_report(
            lifted_candidate(rep.subdiff.dual),
            k,
            config.window_margin,
            sides=config.sides,
        )
        assumptions = AssumptionReport(
            discrete_space=True,
            dual_superlevel_compact=EVIDENCE if fc.all_evidence else VIOLATION,
            kernel_coercive=EVIDENCE if co.all_coercive else VIOLATION,
            xprime_inside_idom=inside,
            quasicontinuous_dual=qc_ok,
        )

    if rep.covered or pre.passed:
        existence = YES
    elif assumptions.combined:
        existence = NO
    else:
        existence = UNKNOWN

    if existence == YES and rep.covered and qc_ok and assumptions.combined:
        uniqueness = UNIQUE if rep.minimal_top else NOT_UNIQUE
    else:
        uniqueness = UNKNOWN

    return Verdict(
        existence=existence,
        uniqueness=uniqueness,
        assumptions=assumptions,
        covering=rep,
        certificate=pre,
        quasicontinuity_witness=qc_witness,
    )
