"""Quasi-linear forms on grid functions.

A quasi-linear form F is isotone, additively homogeneous, and satisfies
F(φ∨ψ) <= α + F(φ) ∨ F(ψ) for some α; the best such α is the join
defect.  Max-plus forms (defect <= 0) are represented by a density f via
F(φ) = max_y (φ(y) - f(y)); log-integral forms ε log ∫ e^{φ/ε} dμ have
defect at most ε log 2.  Empirical forms are log-integral forms of an
atomic sample measure with ε = 1/T.

Indicator evaluation: on a finite grid every function is both l.s.c. and
u.s.c., so the l.s.c. and maximal extensions of a form collapse onto
direct evaluation; set values F(A) are computed straight from the
max-plus indicator of A.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grids import (
    NEG_INF,
    POS_INF,
    Grid,
    GridFn,
    check_values,
    indicator,
    otimes,
    require_same_grid,
)

LOG2 = float(np.log(2.0))


def logsumexp_weighted(terms):
    """log Σ e^{t} over the finite terms, max-shift stabilised.

    -inf terms are skipped; any +inf term dominates; an empty or all
    -inf input gives -inf.
    """
    t = np.asarray(terms, dtype=np.float64)
    if t.size == 0:
        return NEG_INF
    m = t.max()
    if m == NEG_INF:
        return NEG_INF
    if m == POS_INF:
        return POS_INF
    return float(m + np.log(np.exp(t - m).sum()))


class QuasiLinearForm:
    """Interface shared by all form variants."""

    grid = None
    join_defect_bound = 0.0

    def evaluate(self, phi):
        raise NotImplementedError

    def evaluate_affine(self, slope, intercept=0.0):
        """F on the affine test function y ↦ slope·y + intercept.

        The default samples the affine function onto the form's grid;
        closed-form variants override this with exact expressions.
        """
        phi = _affine_gridfn(self.grid, slope, intercept)
        return self.evaluate(phi)

    def eval_on_set(self, mask):
        """F of the max-plus indicator of a node set; empty set gives -inf."""
        return self.evaluate(indicator(self.grid, _to_mask(self.grid, mask)))


def _to_mask(grid, mask):
    m = np.asarray(mask)
    if m.dtype == bool:
        return m.reshape(-1)
    out = np.zeros(grid.size, dtype=bool)
    out[m.astype(np.int64).reshape(-1)] = True
    return out


def _affine_gridfn(grid, slope, intercept):
    c = grid.coords
    if grid.dim == 1:
        vals = slope * c + intercept
    else:
        s = np.asarray(slope, dtype=np.float64)
        vals = s[0] * c[:, 0] + s[1] * c[:, 1] + intercept
    return GridFn(grid, vals.reshape(grid.shape))


@dataclass(frozen=True)
class MaxPlusForm(QuasiLinearForm):
    """Max-plus linear form with a density: F(φ) = max_y (φ(y) - f(y))."""

    density: GridFn

    @property
    def grid(self):
        return self.density.grid

    @property
    def join_defect_bound(self):
        return 0.0

    def evaluate(self, phi):
        require_same_grid(phi, self.grid, "MaxPlusForm.evaluate")
        return float(otimes(phi.flat, -self.density.flat).max())

    def eval_on_set(self, mask):
        m = _to_mask(self.grid, mask)
        if not m.any():
            return NEG_INF
        return float(-self.density.flat[m].min())


@dataclass(frozen=True)
class LogIntegralForm(QuasiLinearForm):
    """F(φ) = ε log Σ_y w_y e^{φ(y)/ε} for nonnegative weights w."""

    weight_grid: Grid
    epsilon: float
    weights: np.ndarray

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        w = check_values(self.weights, "weights").reshape(-1)
        if (w < 0).any() or not np.isfinite(w).all():
            raise ValidationError("weights must be finite and nonnegative")
        if w.sum() <= 0:
            raise ValidationError("weights must carry positive mass")
        if w.size != self.weight_grid.size:
            raise ValidationError("one weight per grid node expected")
        lw = np.full(w.shape, NEG_INF)
        pos = w > 0
        lw[pos] = np.log(w[pos])
        w = w.copy()
        w.setflags(write=False)
        lw.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_log_w", lw)

    @property
    def grid(self):
        return self.weight_grid

    @property
    def join_defect_bound(self):
        return self.epsilon * LOG2

    def evaluate(self, phi):
        require_same_grid(phi, self.grid, "LogIntegralForm.evaluate")
        t = otimes(phi.flat / self.epsilon, self._log_w)
        return _eps_scale(self.epsilon, logsumexp_weighted(t))

    def eval_on_set(self, mask):
        m = _to_mask(self.grid, mask)
        return _eps_scale(self.epsilon, logsumexp_weighted(self._log_w[m]))


def _eps_scale(eps, logval):
    if logval == NEG_INF or logval == POS_INF:
        return logval
    return float(eps * logval)


@dataclass(frozen=True)
class SupFamilyForm(QuasiLinearForm):
    """Pointwise supremum of finitely many forms on one grid."""

    members: tuple

    def __post_init__(self):
        if not self.members:
            raise ValidationError("SupFamilyForm needs at least one member")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def grid(self):
        return self.members[0].grid

    @property
    def join_defect_bound(self):
        return max(m.join_defect_bound for m in self.members)

    def evaluate(self, phi):
        return max(m.evaluate(phi) for m in self.members)

    def evaluate_affine(self, slope, intercept=0.0):
        return max(m.evaluate_affine(slope, intercept) for m in self.members)

    def eval_on_set(self, mask):
        return max(m.eval_on_set(mask) for m in self.members)


@dataclass(frozen=True)
class EmpiricalForm(QuasiLinearForm):
    """Log-integral form of an atomic sample measure, ε = 1/T.

    F(φ) = ε log Σ_i w_i e^{φ(s_i)/ε}; grid functions are read at the
    node nearest each sample.  ``lookup_grid`` fixes the grid used for
    nearest-node lookup and set evaluation.
    """

    epsilon: float
    samples: np.ndarray
    sample_weights: np.ndarray = None
    lookup_grid: Grid = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        s = check_values(self.samples, "samples").reshape(-1)
        if not np.isfinite(s).all():
            raise ValidationError("samples must be finite")
        if s.size == 0:
            raise ValidationError("need at least one sample")
        if self.sample_weights is None:
            w = np.full(s.shape, 1.0 / s.size)
        else:
            w = check_values(self.sample_weights, "sample weights").reshape(-1)
            if w.shape != s.shape or (w < 0).any() or w.sum() <= 0:
                raise ValidationError("sample weights must be nonnegative with mass")
        lw = np.full(w.shape, NEG_INF)
        lw[w > 0] = np.log(w[w > 0])
        for a in (s, w, lw):
            a.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_weights", w)
        object.__setattr__(self, "_log_w", lw)

    @property
    def grid(self):
        return self.lookup_grid

    @property
    def join_defect_bound(self):
        return self.epsilon * LOG2

    def _phi_at_samples(self, phi):
        idx = phi.grid.nearest_index(self.samples)
        return phi.flat[idx]

    def evaluate(self, phi):
        if phi.grid.dim != 1:
            raise ValidationError("EmpiricalForm evaluates 1-D grid functions")
        vals = self._phi_at_samples(phi)
        t = otimes(vals / self.epsilon, self._log_w)
        return _eps_scale(self.epsilon, logsumexp_weighted(t))

    def evaluate_affine(self, slope, intercept=0.0):
        vals = slope * self.samples + intercept
        t = vals / self.epsilon + self._log_w
        return _eps_scale(self.epsilon, logsumexp_weighted(t))

    def eval_on_set(self, mask):
        if self.lookup_grid is None:
            raise ValidationError("set evaluation needs a lookup grid")
        m = _to_mask(self.lookup_grid, mask)
        idx = self.lookup_grid.nearest_index(self.samples)
        inside = m[idx]
        return _eps_scale(self.epsilon, logsumexp_weighted(self._log_w[inside]))

    def clipped(self, floor):
        """Samples composed with y ↦ y ∨ floor (state truncation)."""
        return EmpiricalForm(
            epsilon=self.epsilon,
            samples=np.maximum(self.samples, floor),
            sample_weights=self.sample_weights,
            lookup_grid=self.lookup_grid,
        )


@dataclass(frozen=True)
class JoinDefectEstimate:
    defect: float
    witness: object
    isotonicity_violations: int
    homogeneity_max_err: float


def _random_gridfns(grid, rng, n, neg_inf_rate=0.15):
    out = []
    for _ in range(n):
        vals = rng.uniform(-4.0, 4.0, size=grid.size)
        drop = rng.random(grid.size) < neg_inf_rate
        if drop.all():
            drop[rng.integers(grid.size)] = False
        vals[drop] = NEG_INF
        out.append(GridFn(grid, vals.reshape(grid.shape)))
    return out


def _split_pairs(grid, cap=64):
    """Indicator pairs likely to expose the join defect: singleton vs rest
    and a balanced split."""
    n = grid.size
    pairs = []
    half = np.zeros(n, dtype=bool)
    half[: n // 2] = True
    if half.any() and (~half).any():
        pairs.append((half, ~half))
    for i in range(min(n, cap)):
        a = np.zeros(n, dtype=bool)
        a[i] = True
        pairs.append((a, ~a))
    return pairs


def join_defect_estimate(form, n_pairs=200, rng_seed=0):
    """Sampled lower bound on the join defect, with side checks.

    Maximises F(φ∨ψ) - F(φ) ∨ F(ψ) over random pairs plus indicator
    splits; also verifies isotonicity and additive homogeneity on the
    samples (homogeneity error is reported, not asserted, since log-sum
    arithmetic is only homogeneous up to rounding).
    """
    if n_pairs < 1:
        raise ValidationError("n_pairs must be >= 1")
    grid = form.grid
    rng = np.random.default_rng(rng_seed)
    defect = NEG_INF
    witness = None
    iso_bad = 0
    hom_err = 0.0

    def consider(phi, psi, label):
        nonlocal defect, witness
        join = GridFn(grid, np.maximum(phi.values, psi.values))
        fj = form.evaluate(join)
        fm = max(form.evaluate(phi), form.evaluate(psi))
        inc = 0.0 if fj == fm else fj - fm
        if np.isnan(inc):  # both -inf or both +inf
            inc = 0.0
        if inc > defect:
            defect = inc
            witness = label

    for idx in range(n_pairs):
        phi, psi = _random_gridfns(grid, rng, 2)
        consider(phi, psi, ("random", idx))
        # isotonicity on the ordered pair (φ, φ∨ψ)
        join = GridFn(grid, np.maximum(phi.values, psi.values))
        if form.evaluate(phi) > form.evaluate(join):
            iso_bad += 1
        lam = float(rng.uniform(-2, 2))
        shifted = GridFn(grid, otimes(phi.values, lam))
        lhs = form.evaluate(shifted)
        rhs = otimes(lam, form.evaluate(phi))
        if lhs != rhs and not (lhs == NEG_INF and rhs == NEG_INF):
            hom_err = max(hom_err, abs(lhs - rhs))

    for a, b in _split_pairs(grid):
        consider(indicator(grid, a), indicator(grid, b), ("split", int(a.sum())))

    return JoinDefectEstimate(
        defect=float(defect),
        witness=witness,
        isotonicity_violations=iso_bad,
        homogeneity_max_err=float(hom_err),
    )


def density_of(form, *, defect_tol=1e-9, n_pairs=50, rng_seed=0):
    """Recover the density of a max-plus linear form from singletons.

    f(y) = -F({y}).  Raises when the sampled join defect exceeds the
    tolerance (the form is not max-plus linear, so no density exists).
    """
    est = join_defect_estimate(form, n_pairs=n_pairs, rng_seed=rng_seed)
    if est.defect > defect_tol:
        raise ValidationError(
            f"form is not max-plus linear: sampled join defect {est.defect:.3g}"
        )
    grid = form.grid
    vals = np.empty(grid.size)
    mask = np.zeros(grid.size, dtype=bool)
    for i in range(grid.size):
        mask[:] = False
        mask[i] = True
        vals[i] = -form.eval_on_set(mask)
    return GridFn(grid, vals.reshape(grid.shape), tag="lsc")


@dataclass(frozen=True)
class TightnessTrace:
    tight: bool
    trace: list
    floor: float


def tightness_check(form, windows, *, floor=-1e6):
    """Evaluate F on complements of nested windows.

    ``tight`` when some complement value falls to the floor (the floor is
    treated as -inf; forms with no mass outside a window reach -inf
    exactly).
    """
    grid = form.grid
    prev = None
    trace = []
    for w in windows:
        m = _to_mask(grid, w)
        if prev is not None and (prev & ~m).any():
            raise ValidationError("windows must be nested")
        prev = m
        trace.append(form.eval_on_set(~m))
    tight = bool(trace) and min(trace) <= floor
    return TightnessTrace(tight=tight, trace=trace, floor=floor)
