"""Long-term investment growth: closed forms, simulation, tail rates.

A single risky asset with lognormal price (drift alpha, volatility
sigma) and a bank account at rate r; the control is the fraction of
wealth held in the asset.  For a constant fraction the terminal
log-wealth is Gaussian, so risk-sensitive values and tail probabilities
have closed forms; Monte Carlo simulation cross-checks them.

The optimal growth value g(x) = sup over fractions of the risk-sensitive
growth rate is finite exactly on [0, 1); its convex conjugate is the
rate function of the long-term growth tail, strictly positive above the
threshold r + (alpha-r)^2 / (2 sigma^2).

State truncation (composing the growth state with max(·, a)) restores
the bounded-below kernel row that the tightness criterion needs, without
changing the limit values for nonnegative x.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from ._normal import log_gauss_mass, log_mgf_piecewise_linear, mask_runs
from .convergence import FormSequence, trend_limit
from .conjugacy import Kernel
from .errors import ValidationError
from .forms import EmpiricalForm, QuasiLinearForm, _to_mask
from .grids import NEG_INF, POS_INF, Grid

LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class MertonParams:
    """Market parameters: alpha > r > 0, sigma > 0, initial wealth > 0."""

    r: float
    alpha: float
    sigma: float
    w0: float = 1.0

    def __post_init__(self):
        if not (self.alpha > self.r > 0):
            raise ValidationError("need alpha > r > 0")
        if self.sigma <= 0:
            raise ValidationError("need sigma > 0")
        if self.w0 <= 0:
            raise ValidationError("need positive initial wealth")

    @property
    def excess(self):
        return self.alpha - self.r


def rate_threshold(p):
    """Growth level above which the tail rate becomes positive."""
    return p.r + p.excess**2 / (2.0 * p.sigma**2)


def growth_value(x, p):
    """Optimal risk-sensitive growth value; +inf outside [0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    inside = (x >= 0.0) & (x < 1.0)
    safe = np.where(inside, x, 0.5)
    val = safe * (p.r + p.excess**2 / (2.0 * p.sigma**2 * (1.0 - safe)))
    out = np.where(inside, val, POS_INF)
    return float(out) if out.ndim == 0 else out


def optimal_fraction(x, p):
    """The constant fraction attaining the growth value, for 0 <= x < 1."""
    x = np.asarray(x, dtype=np.float64)
    if ((x < 0) | (x >= 1)).any():
        raise ValidationError("optimal fraction defined for 0 <= x < 1")
    out = p.excess / (p.sigma**2 * (1.0 - x))
    return float(out) if out.ndim == 0 else out


def growth_conjugate(y, p):
    """Rate function of the long-term growth tail (convex conjugate).

    Zero below the rate threshold, (sqrt(y - r) - excess / (sqrt(2)
    sigma))^2 above it.
    """
    y = np.asarray(y, dtype=np.float64)
    z0 = rate_threshold(p)
    above = y >= z0
    safe = np.where(above, y, z0)
    val = (np.sqrt(safe - p.r) - p.excess / (math.sqrt(2.0) * p.sigma)) ** 2
    out = np.where(above, val, 0.0)
    return float(out) if out.ndim == 0 else out


def brute_force_growth(x, p, xi_grid):
    """Grid maximum of the risk-sensitive growth quadratic (oracle).

    The grid should span at least [0, 2 * optimal_fraction(x)] for the
    maximum to be interior.
    """
    if not (0 <= x < 1):
        raise ValidationError("brute force oracle covers 0 <= x < 1")
    xi = np.asarray(xi_grid, dtype=np.float64)
    vals = x * (p.r + p.excess * xi + (x - 1.0) * p.sigma**2 * xi**2 / 2.0)
    return float(vals.max())


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantControl:
    """Constant fraction in the risky asset; admits exact sampling."""

    xi: float


@dataclass(frozen=True)
class FeedbackControl:
    """Fraction tabulated over (time, log-wealth), Euler-Maruyama stepped."""

    times: np.ndarray
    logw: np.ndarray
    table: np.ndarray  # shape (len(times), len(logw))
    time_step: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        w = np.asarray(self.logw, dtype=np.float64)
        tab = np.asarray(self.table, dtype=np.float64)
        if tab.shape != (t.size, w.size):
            raise ValidationError("feedback table shape mismatch")
        if self.time_step <= 0:
            raise ValidationError("time_step must be positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "logw", w)
        object.__setattr__(self, "table", tab)

    def fraction(self, t, logw_values):
        ti = int(np.abs(self.times - t).argmin())
        if self.logw.size == 1:
            return self.table[ti, np.zeros(len(logw_values), dtype=int)]
        wi = np.clip(
            np.rint(
                (logw_values - self.logw[0]) / (self.logw[1] - self.logw[0])
            ).astype(int),
            0,
            self.logw.size - 1,
        )
        return self.table[ti, wi]


@dataclass(frozen=True)
class WealthSamples:
    """Samples of log(W_T) / T under one control."""

    horizon: float
    values: np.ndarray
    control: object
    seed: object


def drift_rate(xi, p):
    """Almost-sure growth rate of log-wealth under a constant fraction."""
    return p.r + p.excess * xi - p.sigma**2 * xi**2 / 2.0


def simulate(p, control, horizon, n_paths, seed):
    """Sample log(W_T)/T.  Constant controls are drawn exactly from the
    Gaussian law; feedback controls step log-wealth with Euler-Maruyama.
    Deterministic given the seed."""
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    if n_paths < 1:
        raise ValidationError("need at least one path")
    rng = np.random.default_rng(seed)
    T = float(horizon)
    if isinstance(control, ConstantControl):
        xi = control.xi
        base = math.log(p.w0) / T + drift_rate(xi, p)
        scale = p.sigma * xi / math.sqrt(T)
        values = base + scale * rng.standard_normal(n_paths)
    elif isinstance(control, FeedbackControl):
        if control.times[-1] < T:
            raise ValidationError("feedback table does not cover the horizon")
        dt = control.time_step
        steps = int(math.ceil(T / dt))
        logw = np.full(n_paths, math.log(p.w0))
        t = 0.0
        for _ in range(steps):
            h = min(dt, T - t)
            if h <= 0:
                break
            xi = control.fraction(t, logw)
            z = rng.standard_normal(n_paths)
            logw += (p.r + p.excess * xi - p.sigma**2 * xi**2 / 2.0) * h
            logw += p.sigma * xi * math.sqrt(h) * z
            t += h
        values = logw / T
    else:
        raise ValidationError(f"unknown control {control!r}")
    values.setflags(write=False)
    return WealthSamples(horizon=T, values=values, control=control, seed=seed)


def risk_sensitive_value(x, samples):
    """Empirical (1/T) log E[W_T^x], log-sum-exp stabilised."""
    T = samples.horizon
    t = x * T * samples.values
    m = t.max()
    if m == NEG_INF:
        return NEG_INF
    return float((m + math.log(np.exp(t - m).mean())) / T)


def risk_sensitive_exact(x, xi, p, horizon):
    """(1/T) log E[W_T^x] for a constant fraction, via the lognormal moment."""
    T = float(horizon)
    return x * math.log(p.w0) / T + x * (
        p.r + p.excess * xi + (x - 1.0) * p.sigma**2 * xi**2 / 2.0
    )


def empirical_form(samples, lookup_grid=None):
    """The sample measure as a log-integral form with scale 1/T."""
    return EmpiricalForm(
        epsilon=1.0 / samples.horizon,
        samples=samples.values,
        lookup_grid=lookup_grid,
    )


# ---------------------------------------------------------------------------
# exact per-horizon forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MertonValueForm(QuasiLinearForm):
    """Exact quasi-linear form of log(W_T)/T under a constant fraction.

    Affine test functions evaluate through the lognormal moment, node
    sets through Gaussian interval masses.  ``clip_floor`` composes the
    state with max(·, floor) before evaluation.
    """

    params: MertonParams
    horizon: float
    xi: float
    lookup_grid: Grid = None
    clip_floor: float = None

    @property
    def grid(self):
        return self.lookup_grid

    @property
    def join_defect_bound(self):
        return LOG2 / self.horizon

    def _law(self):
        p, T = self.params, self.horizon
        mu = drift_rate(self.xi, p) + math.log(p.w0) / T
        sd = p.sigma * abs(self.xi) / math.sqrt(T)
        return mu, sd

    def evaluate_affine(self, slope, intercept=0.0):
        p, T = self.params, self.horizon
        if self.clip_floor is None:
            return intercept + slope * math.log(p.w0) / T + slope * (
                p.r + p.excess * self.xi + (slope - 1.0) * p.sigma**2 * self.xi**2 / 2.0
            )
        a = self.clip_floor
        mu, sd = self._law()
        if sd == 0.0:
            return intercept + slope * max(mu, a)
        t1 = T * (intercept + slope * a) + log_ndtr((a - mu) / sd)
        t2 = (
            T * intercept
            + T * slope * mu
            + T * slope * slope * sd * sd * T / 2.0
            + log_ndtr(-(a - mu - slope * sd * sd * T) / sd)
        )
        m = max(t1, t2)
        return float((m + math.log(math.exp(t1 - m) + math.exp(t2 - m))) / T)

    def eval_on_set(self, mask):
        if self.lookup_grid is None:
            raise ValidationError("set evaluation needs a lookup grid")
        runs = mask_runs(self.lookup_grid, _to_mask(self.lookup_grid, mask))
        mu, sd = self._law()
        T = self.horizon
        if self.clip_floor is None:
            lp = log_gauss_mass(runs, mu, sd)
            return lp / T if np.isfinite(lp) else lp
        a = self.clip_floor
        terms = []
        clipped = [(max(lo, a), hi) for lo, hi in runs if hi >= a]
        if clipped:
            lp = log_gauss_mass(clipped, mu, sd)
            if lp > NEG_INF:
                terms.append(lp)
        if any(lo <= a <= hi for lo, hi in runs):
            if sd == 0.0:
                terms.append(0.0 if mu <= a else NEG_INF)
            else:
                terms.append(float(log_ndtr((a - mu) / sd)))
        if not terms:
            return NEG_INF
        m = max(terms)
        if m == NEG_INF:
            return NEG_INF
        lp = m + math.log(sum(math.exp(t - m) for t in terms))
        return lp / T

    def evaluate(self, phi):
        if phi.grid.dim != 1:
            raise ValidationError("MertonValueForm evaluates 1-D grid functions")
        mu, sd = self._law()
        return log_mgf_piecewise_linear(
            phi.grid.coords,
            phi.flat,
            self.horizon,
            mu,
            sd,
            state_floor=self.clip_floor,
        )


def truncate_form(form, floor, params=None):
    """Compose a form's state with max(·, floor).

    For sample-based forms the samples are clipped; the exact forms carry
    the floor into their closed-form evaluations.  A floor at or above
    the rate threshold is allowed but defeats the purpose (warning).
    """
    if params is not None and floor >= rate_threshold(params):
        warnings.warn(
            "truncation floor is not below the rate threshold; "
            "identification above the floor is lost",
            stacklevel=2,
        )
    if isinstance(form, EmpiricalForm):
        return form.clipped(floor)
    if isinstance(form, MertonValueForm):
        if form.clip_floor is not None:
            floor = max(floor, form.clip_floor)
        return MertonValueForm(
            params=form.params,
            horizon=form.horizon,
            xi=form.xi,
            lookup_grid=form.lookup_grid,
            clip_floor=floor,
        )
    raise ValidationError(f"no truncation rule for {type(form).__name__}")


def growth_input(p, x_grid, y_grid, xi_values, horizons, *, clip_floor=None, mode="limit-asserted"):
    """Pipeline input: one exact sequence per control fraction."""
    from .ldp import GartnerInput

    kernel = Kernel.bilinear(x_grid, y_grid)
    seqs = []
    for xi in xi_values:
        seqs.append(
            FormSequence(
                generator=lambda T, xi=float(xi): MertonValueForm(
                    p, float(T), xi, lookup_grid=y_grid, clip_floor=clip_floor
                ),
                n_list=tuple(horizons),
                y_grid=y_grid,
            )
        )
    return GartnerInput(sequences=seqs, kernel=kernel, mode=mode)


# ---------------------------------------------------------------------------
# tail-rate experiment
# ---------------------------------------------------------------------------

def constant_control_rate(c, xi, p):
    """Asymptotic tail rate of {log(W_T)/T >= c} under a constant fraction."""
    m = drift_rate(xi, p)
    if c <= m:
        return 0.0
    if xi == 0.0:
        return POS_INF
    return (c - m) ** 2 / (2.0 * p.sigma**2 * xi**2)


def exact_tail_value(c, xi, p, horizon):
    """(1/T) log P[log(W_T)/T >= c] under a constant fraction, exact."""
    T = float(horizon)
    if xi == 0.0:
        reach = p.r + math.log(p.w0) / T
        return 0.0 if reach >= c else NEG_INF
    u = (c - drift_rate(xi, p) - math.log(p.w0) / T) * math.sqrt(T) / (
        p.sigma * abs(xi)
    )
    return float(log_ndtr(-u) / T)


@dataclass(frozen=True)
class TailCell:
    horizon: float
    xi: float
    exact: float
    mc: float
    mc_se: float
    inconclusive: bool


@dataclass(frozen=True)
class TailRateReport:
    threshold: float
    target: float  # -g*(c)
    cells: list
    sup_by_horizon: dict  # T -> (sup exact value, argmax xi)
    trend: float
    oracle_rate: float
    oracle_xi: float
    degenerate: bool
    seed: int

    def csv_rows(self):
        rows = [
            [
                "T",
                "xi",
                "exact_value",
                "mc_value",
                "mc_se",
                "sup_over_xi",
                "target_minus_gstar",
            ]
        ]
        for cell in self.cells:
            sup, _ = self.sup_by_horizon[cell.horizon]
            rows.append(
                [
                    repr(cell.horizon),
                    repr(cell.xi),
                    repr(cell.exact),
                    "" if cell.inconclusive else repr(cell.mc),
                    "" if cell.inconclusive else repr(cell.mc_se),
                    repr(sup),
                    repr(self.target),
                ]
            )
        return rows

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.csv_rows())


def tail_rate_experiment(
    c,
    p,
    horizons,
    n_paths,
    seed,
    xi_grid,
    *,
    mc_horizons=None,
):
    """Exact and Monte Carlo tail rates across horizons and fractions.

    For each horizon and constant fraction: the exact Gaussian tail value
    and (for horizons in ``mc_horizons``, default all) a Monte Carlo
    estimate with its standard error; cells whose tail count is zero are
    inconclusive.  Reports per-horizon suprema, the extrapolated trend,
    the rate-function target, and an independent one-dimensional
    minimization oracle over the fraction grid.
    """
    xi_grid = np.asarray(xi_grid, dtype=np.float64)
    if xi_grid.size == 0:
        raise ValidationError("xi grid is empty")
    degenerate = c <= p.r
    target = -growth_conjugate(c, p)
    rates = np.array([constant_control_rate(c, xi, p) for xi in xi_grid])
    best = int(rates.argmin())
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(horizons) * xi_grid.size)
    mc_set = set(horizons if mc_horizons is None else mc_horizons)

    cells = []
    sup_by_horizon = {}
    for ti, T in enumerate(horizons):
        best_val = NEG_INF
        best_xi = float(xi_grid[0])
        for xj, xi in enumerate(xi_grid):
            exact = exact_tail_value(c, float(xi), p, T)
            if exact > best_val:
                best_val = exact
                best_xi = float(xi)
            mc = NEG_INF
            se = 0.0
            inconclusive = True
            if T in mc_set:
                samples = simulate(
                    p, ConstantControl(float(xi)), T, n_paths,
                    children[ti * xi_grid.size + xj],
                )
                hits = int((samples.values >= c).sum())
                if hits > 0:
                    phat = hits / n_paths
                    mc = math.log(phat) / T
                    se = math.sqrt((1.0 - phat) / (phat * n_paths)) / T
                    inconclusive = False
            cells.append(
                TailCell(
                    horizon=float(T),
                    xi=float(xi),
                    exact=exact,
                    mc=mc,
                    mc_se=se,
                    inconclusive=inconclusive,
                )
            )
        sup_by_horizon[float(T)] = (best_val, best_xi)

    sups = [sup_by_horizon[float(T)][0] for T in horizons]
    trend = trend_limit(list(horizons), sups)
    return TailRateReport(
        threshold=float(c),
        target=float(target),
        cells=cells,
        sup_by_horizon=sup_by_horizon,
        trend=float(trend),
        oracle_rate=float(rates[best]),
        oracle_xi=float(xi_grid[best]),
        degenerate=degenerate,
        seed=seed,
    )
