"""Floor and drawdown constraints: constructions and audits.

Two constructions preserve long-run growth while meeting a constraint:

* floors: shift the unconstrained optimum toward its initial value,
  then run an epsilon slice of it next to a dominating wealth that stays
  above the floor.  The candidate eps * xi + X inherits the optimal rate
  up to |gamma log eps| / T.
* drawdowns: transform the optimizer of the composed objective U(F(x))
  through F of its running maximum; the output never breaches w of its own
  running maximum, by construction rather than by monitoring.

Audits never certify, they count: every validator reports how many grid
points sit below the allowed boundary beyond tolerance, and the worst
margin seen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, StructuralError
from .market import ConstantWealth, ScaledWealth
from .paths import DiscretePath, TimeGrid, running_max
from .transforms import DrawdownSpec, ScalePair, azema_yor

__all__ = [
    "FLOOR_TOL_ABS",
    "DRAWDOWN_TOL_REL",
    "FloorSpec",
    "ConstraintReport",
    "shift_floor",
    "floor_optimal",
    "drawdown_optimal",
    "validate_floor",
    "validate_floor_block",
    "validate_drawdown",
    "validate_drawdown_block",
    "write_constraint_report",
    "ShiftedWealth",
    "FloorWealth",
    "DrawdownWealth",
]

# Floors are hard lower bounds; tolerance only absorbs float rounding.
FLOOR_TOL_ABS = 1e-12
# Drawdown boundaries scale with the running maximum, so the tolerance is
# relative to it.
DRAWDOWN_TOL_REL = 1e-9


@dataclass(frozen=True)
class FloorSpec:
    """A floor process from the supported catalog, with its dominating wealth.

    Kinds:
        ``constant``: G_t = level.
        ``exponential``: G_t = level * exp(-decay * t), decay >= 0.
        ``proportional``: G_t = fraction * reference wealth.

    The constant and exponential kinds are dominated by the zero-investment
    wealth held at v0 * (1 - epsilon), which caps ``level`` at that value.
    The proportional kind is dominated by (1 - epsilon) times its reference,
    which caps ``fraction`` at 1 - epsilon.  These inequalities are checked
    here once, so the shipped dominating wealth is certified rather than
    audited.
    """

    kind: str
    epsilon: float
    v0: float = 1.0
    level: float = 0.0
    decay: float = 0.0
    fraction: float = 0.0
    reference: object | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.v0 > 0.0:
            raise DomainError("v0 must be positive")
        cap = self.v0 * (1.0 - self.epsilon)
        if self.kind == "constant":
            if not (0.0 <= self.level <= cap):
                raise DomainError(
                    f"constant floor level {self.level} exceeds the dominating "
                    f"wealth v0(1-epsilon) = {cap:.6g}"
                )
        elif self.kind == "exponential":
            if self.decay < 0.0:
                raise DomainError("exponential floor decay must be nonnegative")
            if not (0.0 <= self.level <= cap):
                raise DomainError(
                    f"exponential floor level {self.level} exceeds the dominating "
                    f"wealth v0(1-epsilon) = {cap:.6g}"
                )
        elif self.kind == "proportional":
            if self.reference is None:
                raise DomainError("proportional floor needs a reference wealth model")
            if not (0.0 <= self.fraction <= 1.0 - self.epsilon):
                raise DomainError(
                    f"proportional floor fraction {self.fraction} exceeds "
                    f"1 - epsilon = {1.0 - self.epsilon:.6g}"
                )
        else:
            raise DomainError(f"unknown floor kind {self.kind!r}")

    def dominating_model(self):
        """The wealth model shipped with this floor, initial value v0(1-epsilon)."""
        if self.kind == "proportional":
            return ScaledWealth(inner=self.reference, factor=1.0 - self.epsilon)
        return ConstantWealth(level=self.v0 * (1.0 - self.epsilon))

    def floor_block(
        self, grid: TimeGrid, reference_values: np.ndarray | None = None
    ) -> np.ndarray:
        """Floor values per grid point: shape (n_points,) or (n, n_points)."""
        t = grid.points
        if self.kind == "constant":
            return np.full_like(t, self.level)
        if self.kind == "exponential":
            return self.level * np.exp(-self.decay * t)
        if reference_values is None:
            raise StructuralError(
                "proportional floor validation needs the reference wealth values"
            )
        return self.fraction * np.asarray(reference_values, dtype=np.float64)


@dataclass(frozen=True)
class ConstraintReport:
    """Outcome of an audit over a path ensemble.

    ``n_violations`` counts grid points (not paths) whose margin falls
    below the tolerance band; ``worst_margin`` is the smallest margin seen,
    violations or not.
    """

    n_paths_checked: int
    n_violations: int
    worst_margin: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def combined_with(self, other: "ConstraintReport") -> "ConstraintReport":
        if other.tolerance != self.tolerance:
            raise StructuralError("cannot combine reports with different tolerances")
        return ConstraintReport(
            n_paths_checked=self.n_paths_checked + other.n_paths_checked,
            n_violations=self.n_violations + other.n_violations,
            worst_margin=min(self.worst_margin, other.worst_margin),
            tolerance=self.tolerance,
        )


def write_constraint_report(report: ConstraintReport, stream) -> None:
    """Serialize an audit outcome as fixed-order key=value lines."""
    stream.write("# growth-lab constraint report v1\n")
    stream.write(f"n_paths_checked={report.n_paths_checked}\n")
    stream.write(f"n_violations={report.n_violations}\n")
    stream.write(f"worst_margin={format(report.worst_margin, '.17g')}\n")
    stream.write(f"tolerance={format(report.tolerance, '.17g')}\n")
    stream.write(f"passed={str(report.passed).lower()}\n")


def shift_floor(eta_hat: DiscretePath, delta: float, v0: float | None = None) -> DiscretePath:
    """Blend a wealth path toward its initial value: delta v0 + (1-delta) path.

    The shifted path dominates delta * v0 everywhere, which is what lets an
    epsilon slice of it sit on top of a dominating wealth without breaching
    a floor.  As delta -> 1 the path freezes at v0.
    """
    if not (0.0 < delta < 1.0):
        raise DomainError(f"shift delta must lie in (0, 1), got {delta}")
    base = eta_hat.initial if v0 is None else float(v0)
    if not base > 0.0:
        raise DomainError("v0 must be positive")
    return DiscretePath(
        grid=eta_hat.grid,
        values=delta * base + (1.0 - delta) * eta_hat.values,
        wealth=True,
    )


def floor_optimal(
    xi_hat: DiscretePath, dominating: DiscretePath, epsilon: float
) -> DiscretePath:
    """Floor-respecting candidate eps * xi + X from a shifted optimum and a dominator."""
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if xi_hat.grid != dominating.grid:
        raise StructuralError("xi and the dominating wealth live on different grids")
    v0 = xi_hat.initial
    want = v0 * (1.0 - epsilon)
    if abs(dominating.initial - want) > 1e-12 * max(abs(want), v0):
        raise StructuralError(
            f"dominating wealth starts at {dominating.initial!r}, expected "
            f"v0(1-epsilon) = {want!r}"
        )
    return DiscretePath(
        grid=xi_hat.grid,
        values=epsilon * xi_hat.values + dominating.values,
        wealth=True,
    )


def drawdown_optimal(xi_hat: DiscretePath, scale: ScalePair) -> DiscretePath:
    """Transform an auxiliary optimum through F of its running maximum.

    The output satisfies the drawdown constraint of ``scale.spec`` at every
    grid point with strict inequality, up to float rounding.
    """
    v0 = scale.spec.v0
    if abs(xi_hat.initial - v0) > 1e-12 * v0:
        raise StructuralError(
            f"auxiliary wealth starts at {xi_hat.initial!r}, expected the scale "
            f"fixed point v0 = {v0!r}"
        )
    out = azema_yor(scale.F, running_max(xi_hat))
    return DiscretePath(grid=out.grid, values=out.values, wealth=True)


def _floor_report(
    values: np.ndarray, floor_vals: np.ndarray, tolerance: float, n_paths: int
) -> ConstraintReport:
    margins = values - floor_vals
    return ConstraintReport(
        n_paths_checked=n_paths,
        n_violations=int(np.count_nonzero(margins < -tolerance)),
        worst_margin=float(np.min(margins)),
        tolerance=tolerance,
    )


def validate_floor_block(
    values: np.ndarray,
    grid: TimeGrid,
    floor: FloorSpec,
    tolerance: float | None = None,
    reference_values: np.ndarray | None = None,
) -> ConstraintReport:
    """Audit a (n_paths, n_points) wealth block against a floor."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != grid.points.size:
        raise StructuralError("wealth block shape does not match the grid")
    tol = FLOOR_TOL_ABS * floor.v0 if tolerance is None else float(tolerance)
    floor_vals = floor.floor_block(grid, reference_values)
    return _floor_report(values, floor_vals, tol, values.shape[0])


def validate_floor(
    paths: DiscretePath | Sequence[DiscretePath],
    floor: FloorSpec,
    tolerance: float | None = None,
    reference_paths: Sequence[DiscretePath] | None = None,
) -> ConstraintReport:
    """Audit one or more paths against a floor process.

    Proportional floors need ``reference_paths`` aligned with ``paths``
    (same noise, same order).
    """
    path_list = [paths] if isinstance(paths, DiscretePath) else list(paths)
    if not path_list:
        raise StructuralError("no paths to validate")
    grid = path_list[0].grid
    for p in path_list:
        if p.grid != grid:
            raise StructuralError("all validated paths must share one grid")
    block = np.stack([p.values for p in path_list])
    ref_block = None
    if floor.kind == "proportional":
        if reference_paths is None:
            raise StructuralError(
                "proportional floor validation needs reference_paths"
            )
        ref_block = np.stack([p.values for p in reference_paths])
        if ref_block.shape != block.shape:
            raise StructuralError("reference paths do not align with validated paths")
    return validate_floor_block(block, grid, floor, tolerance, ref_block)


def validate_drawdown_block(
    values: np.ndarray,
    spec: DrawdownSpec,
    tolerance: float | None = None,
) -> ConstraintReport:
    """Audit a (n_paths, n_points) wealth block against a drawdown function.

    A point violates when value < w(running max) - tolerance * running max;
    the tolerance is relative to the running maximum because the boundary
    itself scales with it.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise StructuralError("expected a 2-d wealth block")
    tol = DRAWDOWN_TOL_REL if tolerance is None else float(tolerance)
    m = np.maximum.accumulate(values, axis=1)
    boundary = np.asarray(spec.w(m), dtype=np.float64)
    margins = values - boundary
    return ConstraintReport(
        n_paths_checked=values.shape[0],
        n_violations=int(np.count_nonzero(margins < -tol * m)),
        worst_margin=float(np.min(margins)),
        tolerance=tol,
    )


def validate_drawdown(
    paths: DiscretePath | Sequence[DiscretePath],
    spec: DrawdownSpec,
    tolerance: float | None = None,
) -> ConstraintReport:
    """Audit one or more paths against a drawdown function."""
    path_list = [paths] if isinstance(paths, DiscretePath) else list(paths)
    if not path_list:
        raise StructuralError("no paths to validate")
    grid = path_list[0].grid
    for p in path_list:
        if p.grid != grid:
            raise StructuralError("all validated paths must share one grid")
    return validate_drawdown_block(
        np.stack([p.values for p in path_list]), spec, tolerance
    )


# --- constrained ensemble models --------------------------------------------


@dataclass(frozen=True)
class ShiftedWealth:
    """Ensemble version of :func:`shift_floor`."""

    inner: object
    delta: float
    v0: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise DomainError(f"shift delta must lie in (0, 1), got {self.delta}")
        if not self.v0 > 0.0:
            raise DomainError("v0 must be positive")

    def path_block(self, grid, seed, path_indices) -> np.ndarray:
        return self.delta * self.v0 + (1.0 - self.delta) * self.inner.path_block(
            grid, seed, path_indices
        )


@dataclass(frozen=True)
class FloorWealth:
    """Ensemble version of :func:`floor_optimal`: eps * xi + dominating.

    Both legs are driven by the same seed, so they ride the same Brownian
    paths; the sum is a genuine portfolio, not a statistical mixture.
    """

    xi: object
    dominating: object
    epsilon: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    def path_block(self, grid, seed, path_indices) -> np.ndarray:
        return self.epsilon * self.xi.path_block(
            grid, seed, path_indices
        ) + self.dominating.path_block(grid, seed, path_indices)


@dataclass(frozen=True)
class DrawdownWealth:
    """Ensemble version of :func:`drawdown_optimal`."""

    inner: object
    scale: ScalePair

    def path_block(self, grid, seed, path_indices) -> np.ndarray:
        vals = self.inner.path_block(grid, seed, path_indices)
        m = np.maximum.accumulate(vals, axis=1)
        return np.asarray(
            self.scale.F.eval(m) - self.scale.F.deriv(m) * (m - vals),
            dtype=np.float64,
        )
