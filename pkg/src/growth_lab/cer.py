"""Monte Carlo growth-rate estimation and closed-form comparisons.

The quantity of interest is the certainty equivalent rate: the slope of
the signed log of expected utility against the horizon.  Estimates come
from one simulation pass per model (strategies here are horizon
independent, so interior horizons are read off the same paths), rates come
from a tail least-squares fit, and candidate strategies are compared to
optimal ones per horizon under common random numbers.

Reductions are pairwise in fixed path order, so results are bit-identical
for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np

from .errors import ConfigError, DomainError, EstimateError, NumericError, StructuralError
from .market import (
    CoefficientSchedule,
    NoiseBlock,
    ValueFunctionQuery,
    closed_form_value,
)
from .paths import TimeGrid
from .utility import signed_log

__all__ = [
    "STEPS_PER_YEAR_DEFAULT",
    "HorizonGrid",
    "UtilityEstimate",
    "SweepReport",
    "SandwichReport",
    "sweep_grid",
    "estimate_expected_utility",
    "sweep_expected_utility",
    "fit_rate",
    "long_run_gap",
    "gap_profile",
    "floor_gap_bound",
    "certainty_equivalent_loss",
    "sandwich_check",
    "write_sweep",
    "read_sweep",
]

STEPS_PER_YEAR_DEFAULT = 50
SWEEP_HEADER = "# growth-lab sweep v1"
_CHUNK = 4096


def _pairwise_sum(a: np.ndarray) -> np.ndarray:
    """Sum over axis 0 by pairwise folding in fixed index order."""
    work = np.asarray(a, dtype=np.float64)
    while work.shape[0] > 1:
        half = work.shape[0] // 2
        folded = work[: 2 * half : 2] + work[1 : 2 * half : 2]
        if work.shape[0] % 2:
            folded = np.concatenate([folded, work[-1:]], axis=0)
        work = folded
    return work[0]


@dataclass(frozen=True)
class HorizonGrid:
    """Increasing positive horizons at which expected utility is sampled."""

    horizons: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.horizons, dtype=np.float64)
        h.setflags(write=False)
        object.__setattr__(self, "horizons", h)
        if h.ndim != 1 or h.size < 1:
            raise StructuralError("need at least one horizon")
        if not (np.all(h > 0) and np.all(np.diff(h) > 0)):
            raise StructuralError("horizons must be positive and strictly increasing")

    @property
    def t_max(self) -> float:
        return float(self.horizons[-1])


@dataclass(frozen=True)
class UtilityEstimate:
    """Monte Carlo estimate of expected utility at one horizon."""

    T: float
    mean: float
    std_error: float
    n_paths: int

    @property
    def usable(self) -> bool:
        """True when the mean is resolved away from zero (|mean| > 3 SE)."""
        return abs(self.mean) > 3.0 * self.std_error

    @property
    def signed_log_mean(self) -> float:
        return signed_log(self.mean)


@dataclass(frozen=True)
class SweepReport:
    """Estimates across horizons plus the fitted tail growth rate."""

    estimates: tuple[UtilityEstimate, ...]
    fitted_rate: float
    fit_intercept: float
    max_residual: float
    tail_fraction: float
    tail_T: tuple[float, ...]
    residuals: tuple[float, ...]

    @property
    def horizons(self) -> np.ndarray:
        return np.array([e.T for e in self.estimates])


def sweep_grid(
    horizons: HorizonGrid | Sequence[float],
    steps_per_year: int = STEPS_PER_YEAR_DEFAULT,
    schedule: CoefficientSchedule | None = None,
) -> TimeGrid:
    """Uniform grid covering all horizons, refined enough to hit each one.

    Every horizon, and every schedule breakpoint inside the span, must land
    on a grid point; otherwise the configuration is rejected rather than
    silently interpolated.
    """
    hg = horizons if isinstance(horizons, HorizonGrid) else HorizonGrid(np.asarray(horizons, dtype=np.float64))
    n_steps = int(round(hg.t_max * steps_per_year))
    grid = TimeGrid.regular(hg.t_max, max(n_steps, 1))
    for T in hg.horizons:
        try:
            grid.index_of(float(T))
        except StructuralError as exc:
            raise ConfigError(
                f"horizon {T} does not land on the simulation grid "
                f"({steps_per_year} steps per year)"
            ) from exc
    if schedule is not None:
        for b in schedule.breakpoints[1:]:
            if b < hg.t_max:
                try:
                    grid.index_of(float(b))
                except StructuralError as exc:
                    raise ConfigError(
                        f"coefficient breakpoint {b} does not land on the "
                        f"simulation grid"
                    ) from exc
    return grid


def _utilities_chunk(model, u, grid: TimeGrid, horizon_idx, seed: int, lo: int, hi: int):
    """Terminal utilities for paths [lo, hi) at each horizon column."""
    idx = list(range(lo, hi))
    if hasattr(model, "path_block"):
        block = model.path_block(grid, seed, idx)
        term = block[:, horizon_idx]
    else:
        dim = int(getattr(model, "noise_dim", 1))
        term = np.empty((len(idx), len(horizon_idx)))
        for r, i in enumerate(idx):
            noise = NoiseBlock(seed=seed, path_index=i, grid=grid, dim=dim)
            path = model(grid, noise)
            term[r] = path.values[horizon_idx]
    if np.any(term <= 0.0):
        raise NumericError(
            "wealth must stay strictly positive; a terminal value was not"
        )
    return np.asarray(u.eval(term), dtype=np.float64)


def _gather_utilities(
    model, u, grid: TimeGrid, horizon_idx, seed: int, n_paths: int, workers: int
) -> np.ndarray:
    bounds = [(lo, min(lo + _CHUNK, n_paths)) for lo in range(0, n_paths, _CHUNK)]
    if workers <= 1 or len(bounds) == 1:
        parts = [
            _utilities_chunk(model, u, grid, horizon_idx, seed, lo, hi)
            for lo, hi in bounds
        ]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_utilities_chunk, model, u, grid, horizon_idx, seed, lo, hi)
                for lo, hi in bounds
            ]
            parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=0)


def _estimates_from_utilities(
    utilities: np.ndarray, horizons: np.ndarray, n_paths: int
) -> list[UtilityEstimate]:
    means = _pairwise_sum(utilities) / n_paths
    if n_paths > 1:
        sq = (utilities - means[None, :]) ** 2
        variances = _pairwise_sum(sq) / (n_paths - 1)
        ses = np.sqrt(variances / n_paths)
    else:
        ses = np.zeros_like(means)
    return [
        UtilityEstimate(T=float(T), mean=float(m), std_error=float(s), n_paths=n_paths)
        for T, m, s in zip(horizons, means, ses)
    ]


def estimate_expected_utility(
    wealth_factory,
    u,
    T: float,
    n_paths: int,
    seed: int,
    grid: TimeGrid | None = None,
    steps_per_year: int = STEPS_PER_YEAR_DEFAULT,
    workers: int = 1,
) -> UtilityEstimate:
    """Estimate E[U(V_T)] over ``n_paths`` independent paths.

    ``wealth_factory`` is either an ensemble model with a ``path_block``
    method or a per-path callable ``(grid, noise) -> DiscretePath`` (set a
    ``noise_dim`` attribute on the callable for multi-asset noise).
    """
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    if grid is None:
        grid = sweep_grid([T], steps_per_year)
    horizon_idx = np.array([grid.index_of(T)])
    utilities = _gather_utilities(wealth_factory, u, grid, horizon_idx, seed, n_paths, workers)
    return _estimates_from_utilities(utilities, np.array([T]), n_paths)[0]


def sweep_expected_utility(
    wealth_factory,
    u,
    horizons: HorizonGrid | Sequence[float],
    n_paths: int,
    seed: int,
    grid: TimeGrid | None = None,
    steps_per_year: int = STEPS_PER_YEAR_DEFAULT,
    workers: int = 1,
) -> list[UtilityEstimate]:
    """Estimate expected utility at every horizon from one simulation pass.

    All horizons are read off the same paths; the strategies simulated here
    do not look at the horizon, so truncation at an interior time is the
    shorter simulation, bit for bit.
    """
    hg = horizons if isinstance(horizons, HorizonGrid) else HorizonGrid(np.asarray(horizons, dtype=np.float64))
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    if grid is None:
        grid = sweep_grid(hg, steps_per_year)
    horizon_idx = np.array([grid.index_of(float(T)) for T in hg.horizons])
    utilities = _gather_utilities(wealth_factory, u, grid, horizon_idx, seed, n_paths, workers)
    return _estimates_from_utilities(utilities, hg.horizons, n_paths)


def fit_rate(
    estimates: Sequence[UtilityEstimate], tail_fraction: float = 0.5
) -> SweepReport:
    """Least-squares growth rate of signed log mean utility over tail horizons.

    Only estimates resolved away from zero (|mean| > 3 SE) enter; the fit
    uses the largest ``tail_fraction`` of those by horizon and needs at
    least three points.  A residual spread an order of magnitude above its
    median flags non-linearity and refuses the fit: a straight tail is an
    assumption this estimator checks rather than imposes.
    """
    if not (0.0 < tail_fraction <= 1.0):
        raise DomainError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    ordered = sorted(estimates, key=lambda e: e.T)
    if len({e.T for e in ordered}) != len(ordered):
        raise StructuralError("duplicate horizons in sweep estimates")
    usable = [e for e in ordered if e.usable]
    k = math.ceil(tail_fraction * len(usable))
    tail = usable[len(usable) - k :]
    if len(tail) < 3:
        raise EstimateError(
            f"rate fit needs at least 3 usable tail estimates, found {len(tail)}"
        )
    ts = np.array([e.T for e in tail])
    ys = np.array([e.signed_log_mean for e in tail])
    t_mean = ts.mean()
    y_mean = ys.mean()
    slope = float(np.sum((ts - t_mean) * (ys - y_mean)) / np.sum((ts - t_mean) ** 2))
    intercept = float(y_mean - slope * t_mean)
    residuals = ys - (intercept + slope * ts)
    max_resid = float(np.max(np.abs(residuals)))
    median_resid = float(np.median(np.abs(residuals)))
    floor = 1e-10 * max(1.0, float(np.max(np.abs(ys))))
    if max_resid > 10.0 * median_resid and max_resid > floor:
        raise EstimateError(
            f"tail residuals are not consistent with a straight line "
            f"(max {max_resid:.3g} vs median {median_resid:.3g})"
        )
    return SweepReport(
        estimates=tuple(ordered),
        fitted_rate=slope,
        fit_intercept=intercept,
        max_residual=max_resid,
        tail_fraction=tail_fraction,
        tail_T=tuple(float(t) for t in ts),
        residuals=tuple(float(r) for r in residuals),
    )


def _matching_horizons(candidate: SweepReport, optimal: SweepReport) -> np.ndarray:
    cand_T = candidate.horizons
    opt_T = optimal.horizons
    if cand_T.shape != opt_T.shape or not np.array_equal(cand_T, opt_T):
        raise StructuralError("candidate and optimal sweeps cover different horizons")
    return cand_T


def gap_profile(
    candidate: SweepReport, optimal: SweepReport
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-horizon rate gap and its propagated standard error.

    Returns (horizons, gaps, gap standard errors) with
    gap_T = (signed_log optimal mean - signed_log candidate mean) / T.
    """
    ts = _matching_horizons(candidate, optimal)
    gaps = np.empty_like(ts)
    ses = np.empty_like(ts)
    for i, (c, o) in enumerate(zip(candidate.estimates, optimal.estimates)):
        gaps[i] = (o.signed_log_mean - c.signed_log_mean) / c.T
        var = 0.0
        if c.mean != 0.0:
            var += (c.std_error / abs(c.mean)) ** 2
        if o.mean != 0.0:
            var += (o.std_error / abs(o.mean)) ** 2
        ses[i] = np.sqrt(var) / c.T
    return ts, gaps, ses


def long_run_gap(candidate: SweepReport, optimal: SweepReport) -> float:
    """Largest per-horizon rate gap over the common fitted tail.

    Candidate and optimal must be swept on the same horizons (and, to mean
    anything, the same seed: common random numbers cancel most of the
    Monte Carlo noise in the difference).
    """
    ts, gaps, _ = gap_profile(candidate, optimal)
    if candidate.tail_T != optimal.tail_T:
        raise StructuralError("candidate and optimal sweeps fitted different tails")
    tail = np.isin(ts, np.asarray(candidate.tail_T))
    return float(np.max(gaps[tail]))


def floor_gap_bound(gamma: float, epsilon: float, T) -> np.ndarray | float:
    """Per-horizon bound |gamma log epsilon| / T on the floored rate gap."""
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    t = np.asarray(T, dtype=np.float64)
    out = abs(gamma * math.log(epsilon)) / t
    return out if out.ndim else float(out)


def certainty_equivalent_loss(
    candidate: UtilityEstimate,
    u,
    schedule: CoefficientSchedule,
    v0: float = 1.0,
) -> float:
    """Constant extra rate the candidate would need to match the optimum.

    For power utility the compensation solves
    E[U(e^{l T} V_T)] = optimal value, giving
    l_T = log(optimal value / candidate mean) / (p T).  Positive losses
    mean the candidate trails the optimum; losses below minus three
    propagated standard errors are impossible and rejected.
    """
    if candidate.T <= 0.0:
        raise DomainError("loss per unit time needs a positive horizon")
    value = closed_form_value(ValueFunctionQuery(v0=v0, T=candidate.T, p=u.p), schedule)
    if candidate.mean == 0.0 or np.sign(candidate.mean) != np.sign(value):
        raise EstimateError(
            f"candidate mean {candidate.mean:.6g} and optimal value {value:.6g} "
            f"must share the sign of p"
        )
    loss = math.log(value / candidate.mean) / (u.p * candidate.T)
    se = candidate.std_error / (abs(u.p) * candidate.T * abs(candidate.mean))
    if loss < -3.0 * se:
        raise EstimateError(
            f"candidate beats the optimal value beyond noise "
            f"(loss {loss:.6g}, se {se:.6g}); the estimate is inconsistent"
        )
    return loss


@dataclass(frozen=True)
class SandwichReport:
    """Closed-form bounds pinning the constrained value between two optima.

    For each horizon, with eps = 1/T and q = p (1 - alpha):

        lower = (1 - alpha) V(1, T, q)
        upper = (1 - alpha)/(1 - eps) * eps^{-q/(1 - eps)} * V(1, T, q/(1 - eps))

    The signed-log gap between the bounds grows like |q| log T, so the gap
    per log T stays bounded; both facts are checked by the caller from the
    arrays here.
    """

    p: float
    alpha: float
    T: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    log_gap: np.ndarray
    gap_over_log_T: np.ndarray

    @property
    def ordered(self) -> bool:
        return bool(np.all(self.lower <= self.upper))


def sandwich_check(
    p: float,
    alpha: float,
    schedule: CoefficientSchedule,
    T_grid: Sequence[float],
) -> SandwichReport:
    """Evaluate the closed-form value sandwich across horizons."""
    if not (0.0 <= alpha < 1.0):
        raise DomainError(f"alpha must lie in [0, 1), got {alpha}")
    ts = np.asarray(T_grid, dtype=np.float64)
    if np.any(ts < 2.0):
        raise DomainError("sandwich horizons must satisfy T >= 2 so eps = 1/T <= 1/2")
    q = p * (1.0 - alpha)
    lower = np.empty_like(ts)
    upper = np.empty_like(ts)
    for i, T in enumerate(ts):
        eps = 1.0 / T
        q_up = q / (1.0 - eps)
        if not q_up < 1.0:
            raise DomainError(
                f"upper bound undefined: p(1-alpha)/(1-eps) = {q_up:.6g} >= 1 at T = {T}"
            )
        lower[i] = (1.0 - alpha) * closed_form_value(
            ValueFunctionQuery(v0=1.0, T=float(T), p=q), schedule
        )
        upper[i] = (
            (1.0 - alpha)
            / (1.0 - eps)
            * eps ** (-q / (1.0 - eps))
            * closed_form_value(ValueFunctionQuery(v0=1.0, T=float(T), p=q_up), schedule)
        )
    log_gap = signed_log(upper) - signed_log(lower)
    return SandwichReport(
        p=p,
        alpha=alpha,
        T=ts,
        lower=lower,
        upper=upper,
        log_gap=log_gap,
        gap_over_log_T=log_gap / np.log(ts),
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_sweep(report: SweepReport, stream: TextIO) -> None:
    """Serialize a sweep: one record per horizon, fit summary in the footer."""
    stream.write(SWEEP_HEADER + "\n")
    stream.write("T,mean,std_error,signed_log_mean,n_paths\n")
    for e in report.estimates:
        slog = _fmt(e.signed_log_mean) if e.mean != 0.0 else "nan"
        stream.write(
            f"{_fmt(e.T)},{_fmt(e.mean)},{_fmt(e.std_error)},{slog},{e.n_paths}\n"
        )
    stream.write(f"# fitted_rate={_fmt(report.fitted_rate)}\n")
    stream.write(f"# fit_intercept={_fmt(report.fit_intercept)}\n")
    stream.write(f"# max_residual={_fmt(report.max_residual)}\n")
    stream.write(f"# tail_fraction={_fmt(report.tail_fraction)}\n")
    stream.write(f"# tail_T={','.join(_fmt(t) for t in report.tail_T)}\n")
    stream.write(f"# residuals={','.join(_fmt(r) for r in report.residuals)}\n")


def read_sweep(stream: TextIO) -> tuple[list[UtilityEstimate], dict]:
    """Parse a sweep file back into estimates and its footer fields."""
    header = stream.readline().rstrip("\n")
    if header != SWEEP_HEADER:
        raise StructuralError(f"unexpected sweep header: {header!r}")
    columns = stream.readline().rstrip("\n")
    if columns != "T,mean,std_error,signed_log_mean,n_paths":
        raise StructuralError(f"unexpected sweep columns: {columns!r}")
    estimates: list[UtilityEstimate] = []
    footer: dict = {}
    for line in stream:
        line = line.strip()
        if not line:
            continue
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            footer[key] = value
            continue
        t, mean, se, _slog, n = line.split(",")
        estimates.append(
            UtilityEstimate(
                T=float(t), mean=float(mean), std_error=float(se), n_paths=int(n)
            )
        )
    return estimates, footer
