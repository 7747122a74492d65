"""Complete-market model: piecewise-constant coefficients, exact simulation.

Assets follow dS^i/S^i = mu^i dt + sum_j sigma^{ij} dW^j with coefficients
constant on the intervals of a :class:`CoefficientSchedule`.  Because the
coefficients are constant per step, simulating the log prices with the
exact per-step drift makes every terminal distribution exact in law; grid
resolution only matters for functionals of the whole path such as running
maxima.

The market price of risk theta = sigma^{-1} mu drives the closed-form value
function

    V(v0, T, p) = U_p(v0) * exp( p / (2(1-p)) * integral_0^T |theta|^2 du )

against which Monte Carlo output is checked.  Reported long-run rates are
per unit time; for schedules that are not eventually constant the limiting
rate is read as the time average of the squared market price of risk.

Randomness is counter-based: each path owns a Philox stream keyed by
(seed, path index), so any worker can produce any path without shared
state, and adding paths never perturbs existing ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError, NumericError, StructuralError
from .paths import DiscretePath, TimeGrid

__all__ = [
    "RNG_ALGORITHM_ID",
    "CoefficientSchedule",
    "NoiseBlock",
    "ValueFunctionQuery",
    "gaussian_block",
    "theta",
    "theta_sq_integral",
    "simulate_assets",
    "state_price_density",
    "merton_fractions",
    "merton_wealth",
    "closed_form_value",
    "MertonWealth",
    "ConstantWealth",
    "ScaledWealth",
]

RNG_ALGORITHM_ID = "philox4x64 key=(seed,path_index) normals=(step,component)"
_MAX_CONDITION = 1e12


def _key(seed: int, path_index: int) -> np.ndarray:
    return np.array([seed % (1 << 64), path_index % (1 << 64)], dtype=np.uint64)


def gaussian_block(
    seed: int, path_indices: Sequence[int], n_steps: int, dim: int
) -> np.ndarray:
    """Standard normal draws, shape (len(path_indices), n_steps, dim).

    Path ``i`` always receives the same draws for the same ``seed`` and
    step count, independent of which other paths are generated alongside
    it.  Draws for a longer grid extend (never reshuffle) those for a
    shorter one, so truncating a simulation reproduces the shorter run
    bit for bit.
    """
    idx = np.asarray(path_indices, dtype=np.int64)
    out = np.empty((idx.size, n_steps, dim), dtype=np.float64)
    for row, i in enumerate(idx):
        gen = np.random.Generator(np.random.Philox(key=_key(seed, int(i))))
        out[row] = gen.standard_normal((n_steps, dim))
    return out


@dataclass(frozen=True)
class CoefficientSchedule:
    """Piecewise-constant drift vectors and volatility matrices.

    Attributes:
        breakpoints: interval start times; the first must be 0 and the last
            interval extends indefinitely.
        mu: one drift vector per interval.
        sigma: one square volatility matrix per interval; rejected when the
            condition number exceeds 1e12 unless ``allow_singular`` is set
            (a hook for degenerate test cases, which then cannot price risk).
    """

    breakpoints: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    allow_singular: bool = False
    _theta: np.ndarray = field(init=False, repr=False, compare=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        bps = np.asarray(self.breakpoints, dtype=np.float64)
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if bps.ndim != 1 or bps.size < 1 or bps[0] != 0.0:
            raise StructuralError("breakpoints must be a 1-d array starting at 0")
        if bps.size > 1 and not np.all(np.diff(bps) > 0):
            raise StructuralError("breakpoints must be strictly increasing")
        if mu.ndim == 1:
            mu = mu[None, :] if bps.size == 1 else mu[:, None]
        if mu.ndim != 2 or mu.shape[0] != bps.size:
            raise StructuralError("need one drift vector per interval")
        d = mu.shape[1]
        if sigma.ndim == 2:
            sigma = sigma[None, :, :]
        if sigma.shape != (bps.size, d, d):
            raise StructuralError(
                f"need one {d}x{d} volatility matrix per interval, got {sigma.shape}"
            )
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise StructuralError("coefficients must be finite")
        theta_rows = np.empty_like(mu)
        for k in range(bps.size):
            if self.allow_singular:
                theta_rows[k] = np.nan
                continue
            cond = np.linalg.cond(sigma[k])
            if not np.isfinite(cond) or cond > _MAX_CONDITION:
                raise DomainError(
                    f"volatility matrix on interval {k} is ill-conditioned "
                    f"(condition number {cond:.3g})"
                )
            theta_rows[k] = np.linalg.solve(sigma[k], mu[k])
        for name, arr in (("breakpoints", bps), ("mu", mu), ("sigma", sigma)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        theta_rows.setflags(write=False)
        object.__setattr__(self, "_theta", theta_rows)

    @property
    def dim(self) -> int:
        return self.mu.shape[1]

    @property
    def n_intervals(self) -> int:
        return self.breakpoints.size

    def interval_of(self, t: float) -> int:
        """Index of the interval containing time t >= 0."""
        if t < 0:
            raise DomainError(f"negative time {t}")
        return int(np.searchsorted(self.breakpoints, t, side="right") - 1)

    def theta_at(self, k: int) -> np.ndarray:
        row = self._theta[k]
        if np.any(np.isnan(row)):
            raise NumericError("market price of risk undefined for singular volatility")
        return row

    def step_intervals(self, grid: TimeGrid) -> np.ndarray:
        """Interval index for each grid step; steps must not straddle breakpoints."""
        left = grid.points[:-1]
        right = grid.points[1:]
        idx = np.searchsorted(self.breakpoints, left, side="right") - 1
        for b in self.breakpoints[1:]:
            inside = (left < b) & (b < right)
            if np.any(inside):
                k = int(np.flatnonzero(inside)[0])
                raise ConfigError(
                    f"grid step [{left[k]}, {right[k]}] straddles coefficient "
                    f"breakpoint {b}; grids must include all breakpoints"
                )
        return idx.astype(np.int64)


@dataclass(frozen=True)
class NoiseBlock:
    """Brownian increments for one path on one grid.

    ``increments[k, j]`` is the increment of component ``j`` over step
    ``k``: a standard normal draw scaled by sqrt(dt_k).  The whole block is
    a pure function of (seed, path_index, grid, dim).
    """

    seed: int
    path_index: int
    grid: TimeGrid
    dim: int
    increments: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.increments is None:
            z = gaussian_block(self.seed, [self.path_index], self.grid.n_steps, self.dim)
            inc = z[0] * np.sqrt(self.grid.dt)[:, None]
        else:
            inc = np.asarray(self.increments, dtype=np.float64)
            if inc.shape != (self.grid.n_steps, self.dim):
                raise StructuralError(
                    f"increments shape {inc.shape} does not match "
                    f"({self.grid.n_steps}, {self.dim})"
                )
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)


@dataclass(frozen=True)
class ValueFunctionQuery:
    """Arguments of the closed-form optimal value: initial wealth, horizon, exponent."""

    v0: float
    T: float
    p: float

    def __post_init__(self):
        if not self.v0 > 0.0:
            raise DomainError("initial wealth must be positive")
        if self.T < 0.0:
            raise DomainError("horizon must be nonnegative")
        if not (self.p < 1.0) or self.p == 0.0:
            raise DomainError(f"exponent must satisfy p < 1, p != 0; got {self.p}")


def theta(schedule: CoefficientSchedule, t: float) -> np.ndarray:
    """Market price of risk sigma^{-1} mu on the interval containing t."""
    return schedule.theta_at(schedule.interval_of(t)).copy()


def theta_sq_integral(schedule: CoefficientSchedule, T: float) -> float:
    """integral_0^T |theta_u|^2 du, summed exactly over intervals."""
    if T < 0:
        raise DomainError(f"negative horizon {T}")
    total = 0.0
    for k in range(schedule.n_intervals):
        lo = schedule.breakpoints[k]
        hi = schedule.breakpoints[k + 1] if k + 1 < schedule.n_intervals else np.inf
        length = max(0.0, min(T, hi) - lo)
        if length > 0.0:
            th = schedule.theta_at(k)
            total += float(th @ th) * length
    return total


def _asset_log_increments(
    schedule: CoefficientSchedule, grid: TimeGrid, dw: np.ndarray
) -> np.ndarray:
    """Per-step log price increments, shape (n, n_steps, d)."""
    steps = schedule.step_intervals(grid)
    dt = grid.dt
    out = np.empty_like(dw)
    for k in np.unique(steps):
        sel = steps == k
        sig = schedule.sigma[k]
        drift = schedule.mu[k] - 0.5 * np.sum(sig * sig, axis=1)
        out[:, sel, :] = dw[:, sel, :] @ sig.T + drift[None, None, :] * dt[sel][None, :, None]
    return out


def simulate_assets(
    schedule: CoefficientSchedule,
    grid: TimeGrid,
    noise: NoiseBlock,
    s0: Sequence[float] | None = None,
) -> list[DiscretePath]:
    """Simulate all asset prices along one path, exactly in law per step."""
    if noise.dim != schedule.dim:
        raise StructuralError("noise dimension does not match the schedule")
    start = np.ones(schedule.dim) if s0 is None else np.asarray(s0, dtype=np.float64)
    if np.any(start <= 0.0):
        raise DomainError("initial asset prices must be positive")
    inc = _asset_log_increments(schedule, grid, noise.increments[None, :, :])[0]
    logs = np.vstack([np.zeros((1, schedule.dim)), np.cumsum(inc, axis=0)])
    prices = start[None, :] * np.exp(logs)
    return [
        DiscretePath(grid=grid, values=prices[:, j], wealth=True)
        for j in range(schedule.dim)
    ]


def _spd_log_increments(
    schedule: CoefficientSchedule, grid: TimeGrid, dw: np.ndarray
) -> np.ndarray:
    steps = schedule.step_intervals(grid)
    dt = grid.dt
    out = np.empty(dw.shape[:2], dtype=np.float64)
    for k in np.unique(steps):
        sel = steps == k
        th = schedule.theta_at(k)
        out[:, sel] = -(dw[:, sel, :] @ th) - 0.5 * float(th @ th) * dt[sel][None, :]
    return out


def state_price_density(
    schedule: CoefficientSchedule, grid: TimeGrid, noise: NoiseBlock
) -> DiscretePath:
    """The exponential martingale Z removing the drift of every asset.

    E[Z_T] = 1 for any horizon; this is the Monte Carlo self-test that the
    simulated measure change is consistent.
    """
    if noise.dim != schedule.dim:
        raise StructuralError("noise dimension does not match the schedule")
    inc = _spd_log_increments(schedule, grid, noise.increments[None, :, :])[0]
    logs = np.concatenate(([0.0], np.cumsum(inc)))
    return DiscretePath(grid=grid, values=np.exp(logs), wealth=True)


def merton_fractions(schedule: CoefficientSchedule, p: float, t: float) -> np.ndarray:
    """Optimal constant proportions (sigma')^{-1} theta / (1 - p) at time t.

    Horizon-independent: the proportions depend only on the current
    coefficients and the exponent, never on how much time remains.
    """
    if not (p < 1.0) or p == 0.0:
        raise DomainError(f"exponent must satisfy p < 1, p != 0; got {p}")
    k = schedule.interval_of(t)
    th = schedule.theta_at(k)
    return np.linalg.solve(schedule.sigma[k].T, th) / (1.0 - p)


def _merton_log_increments(
    schedule: CoefficientSchedule, grid: TimeGrid, dw: np.ndarray, p: float
) -> np.ndarray:
    """Log wealth increments of the optimal constant-proportion strategy.

    With proportions pi = (sigma')^{-1} theta / (1-p) the wealth loads
    theta / (1-p) on the Brownian motion and drifts at |theta|^2 / (1-p);
    the exact per-step log drift subtracts half the squared load.
    """
    a = 1.0 / (1.0 - p)
    steps = schedule.step_intervals(grid)
    dt = grid.dt
    out = np.empty(dw.shape[:2], dtype=np.float64)
    for k in np.unique(steps):
        sel = steps == k
        th = schedule.theta_at(k)
        tsq = float(th @ th)
        drift = tsq * a - 0.5 * tsq * a * a
        out[:, sel] = (dw[:, sel, :] @ th) * a + drift * dt[sel][None, :]
    return out


def merton_wealth(
    schedule: CoefficientSchedule,
    p: float,
    grid: TimeGrid,
    noise: NoiseBlock,
    v0: float = 1.0,
) -> DiscretePath:
    """Wealth of the unconstrained optimal strategy along one noise path."""
    if not (p < 1.0) or p == 0.0:
        raise DomainError(f"exponent must satisfy p < 1, p != 0; got {p}")
    if not v0 > 0.0:
        raise DomainError("initial wealth must be positive")
    if noise.dim != schedule.dim:
        raise StructuralError("noise dimension does not match the schedule")
    inc = _merton_log_increments(schedule, grid, noise.increments[None, :, :], p)[0]
    logs = np.concatenate(([0.0], np.cumsum(inc)))
    return DiscretePath(grid=grid, values=v0 * np.exp(logs), wealth=True)


def closed_form_value(
    query: ValueFunctionQuery, schedule: CoefficientSchedule
) -> float:
    """Optimal expected utility U_p(v0) exp{ p/(2(1-p)) * int |theta|^2 }.

    Shares the sign of p: negative exponents give negative values that
    approach zero from below as the horizon grows.
    """
    integral = theta_sq_integral(schedule, query.T)
    u0 = query.v0**query.p / query.p
    return u0 * float(np.exp(query.p / (2.0 * (1.0 - query.p)) * integral))


# --- path-ensemble wealth models ------------------------------------------
#
# Anything with a ``path_block(grid, seed, path_indices) -> (n, n_points)``
# method can feed the Monte Carlo estimators.  Two models built on the same
# seed see identical Brownian increments path by path, which is what makes
# candidate/optimal comparisons common-random-number comparisons.


@dataclass(frozen=True)
class MertonWealth:
    """Ensemble version of :func:`merton_wealth`."""

    schedule: CoefficientSchedule
    p: float
    v0: float = 1.0

    def __post_init__(self):
        if not (self.p < 1.0) or self.p == 0.0:
            raise DomainError(f"exponent must satisfy p < 1, p != 0; got {self.p}")
        if not self.v0 > 0.0:
            raise DomainError("initial wealth must be positive")

    def path_block(
        self, grid: TimeGrid, seed: int, path_indices: Sequence[int]
    ) -> np.ndarray:
        z = gaussian_block(seed, path_indices, grid.n_steps, self.schedule.dim)
        dw = z * np.sqrt(grid.dt)[None, :, None]
        inc = _merton_log_increments(self.schedule, grid, dw, self.p)
        n = inc.shape[0]
        logs = np.hstack([np.zeros((n, 1)), np.cumsum(inc, axis=1)])
        return self.v0 * np.exp(logs)


@dataclass(frozen=True)
class ConstantWealth:
    """Zero-investment wealth held constant at ``level``."""

    level: float

    def __post_init__(self):
        if not self.level > 0.0:
            raise DomainError("constant wealth level must be positive")

    def path_block(
        self, grid: TimeGrid, seed: int, path_indices: Sequence[int]
    ) -> np.ndarray:
        n = len(path_indices)
        return np.full((n, grid.points.size), self.level, dtype=np.float64)


@dataclass(frozen=True)
class ScaledWealth:
    """``factor`` times an inner wealth model (same noise, scaled budget)."""

    inner: object
    factor: float

    def __post_init__(self):
        if not self.factor > 0.0:
            raise DomainError("scaling factor must be positive")

    def path_block(
        self, grid: TimeGrid, seed: int, path_indices: Sequence[int]
    ) -> np.ndarray:
        return self.factor * self.inner.path_block(grid, seed, path_indices)
