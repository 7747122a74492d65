"""Time grids, discrete paths, and running-maximum machinery.

Everything downstream works on plain float64 arrays indexed by a shared
:class:`TimeGrid`.  Paths are immutable; the running maximum is computed
once through :func:`running_max` and carried by :class:`MaxPath` so it is
never silently recomputed or interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .errors import NumericError, StructuralError

__all__ = [
    "TimeGrid",
    "DiscretePath",
    "MaxPath",
    "running_max",
    "integrate_against",
    "write_path_dump",
    "read_path_dump",
]

PATH_DUMP_HEADER = "# growth-lab path v1"


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing observation times starting at zero.

    Attributes:
        points: array of times, ``points[0] == 0.0``, at least two entries.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = _as_readonly(self.points)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise StructuralError("a time grid needs at least two points")
        if pts[0] != 0.0:
            raise StructuralError(f"time grid must start at 0.0, got {pts[0]}")
        if not np.all(np.diff(pts) > 0.0):
            raise StructuralError("time grid points must be strictly increasing")
        if not np.all(np.isfinite(pts)):
            raise StructuralError("time grid points must be finite")

    @classmethod
    def regular(cls, t_max: float, n_steps: int) -> "TimeGrid":
        """Uniform grid over [0, t_max] with ``n_steps`` intervals."""
        if n_steps < 1:
            raise StructuralError("n_steps must be at least 1")
        if not t_max > 0.0:
            raise StructuralError("t_max must be positive")
        return cls(np.linspace(0.0, float(t_max), int(n_steps) + 1))

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def t_max(self) -> float:
        return float(self.points[-1])

    @property
    def dt(self) -> np.ndarray:
        """Interval lengths, shape (n_steps,)."""
        return np.diff(self.points)

    def index_of(self, t: float, rel_tol: float = 1e-12) -> int:
        """Index of the grid point equal to ``t`` (within relative tolerance)."""
        i = int(np.argmin(np.abs(self.points - t)))
        scale = max(abs(t), self.t_max)
        if abs(self.points[i] - t) > rel_tol * scale:
            raise StructuralError(f"time {t} is not a grid point")
        return i

    def __eq__(self, other) -> bool:
        return isinstance(other, TimeGrid) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.points.size, float(self.points[-1])))


@dataclass(frozen=True)
class DiscretePath:
    """Values observed along a time grid.

    Attributes:
        grid: the observation times.
        values: one value per grid point.
        wealth: if True, all values are required to be strictly positive.
    """

    grid: TimeGrid
    values: np.ndarray
    wealth: bool = False

    def __post_init__(self):
        vals = _as_readonly(self.values)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.points.shape:
            raise StructuralError(
                f"values shape {vals.shape} does not match grid "
                f"shape {self.grid.points.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise NumericError("path values must be finite")
        if self.wealth and not np.all(vals > 0.0):
            raise StructuralError("wealth path values must be strictly positive")

    @property
    def initial(self) -> float:
        return float(self.values[0])

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class MaxPath:
    """A path bundled with its cached running maximum."""

    path: DiscretePath
    running_max: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.running_max is None:
            m = np.maximum.accumulate(self.path.values)
        else:
            m = np.asarray(self.running_max, dtype=np.float64)
            if not np.array_equal(m, np.maximum.accumulate(self.path.values)):
                raise StructuralError("running_max is not the running maximum of the path")
        object.__setattr__(self, "running_max", _as_readonly(m))

    @property
    def grid(self) -> TimeGrid:
        return self.path.grid

    @property
    def values(self) -> np.ndarray:
        return self.path.values


def running_max(path: DiscretePath) -> MaxPath:
    """Attach the running maximum to ``path``.

    The maximum is nondecreasing, starts at the initial value, and dominates
    the path pointwise by construction.
    """
    return MaxPath(path=path)


def integrate_against(
    integrand_of_max: Callable[[np.ndarray], np.ndarray],
    path: MaxPath,
    initial: float | None = None,
) -> DiscretePath:
    """Left-point integral of ``f(running max)`` against the path increments.

    Computes ``out[i] = initial + sum_{j<i} f(m_j) * (x_{j+1} - x_j)`` where
    ``m`` is the running maximum and ``x`` the path values.  The left-point
    (predictable) evaluation is what makes the sum a discrete analogue of a
    stochastic integral against the path.

    Args:
        integrand_of_max: vectorized function evaluated at the running max.
        path: path with cached running maximum.
        initial: value of ``out[0]``; defaults to the path's initial value.

    Returns:
        The cumulative integral as a path on the same grid.
    """
    x = path.values
    m = path.running_max
    f = np.asarray(integrand_of_max(m[:-1]), dtype=np.float64)
    if f.shape != m[:-1].shape:
        f = np.broadcast_to(f, m[:-1].shape)
    if not np.all(np.isfinite(f)):
        bad = int(np.flatnonzero(~np.isfinite(f))[0])
        raise NumericError(
            f"integrand is not finite at running max {m[bad]} (step {bad})"
        )
    start = path.values[0] if initial is None else float(initial)
    out = np.empty_like(x)
    out[0] = start
    out[1:] = start + np.cumsum(f * np.diff(x))
    return DiscretePath(grid=path.grid, values=out)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_path_dump(path: MaxPath | DiscretePath, stream: TextIO) -> None:
    """Write a path as delimited text: one ``t,value,running_max`` line per point."""
    mp = path if isinstance(path, MaxPath) else running_max(path)
    stream.write(PATH_DUMP_HEADER + "\n")
    stream.write("t,value,running_max\n")
    for t, v, m in zip(mp.grid.points, mp.values, mp.running_max):
        stream.write(f"{_fmt(t)},{_fmt(v)},{_fmt(m)}\n")


def read_path_dump(stream: TextIO) -> MaxPath:
    """Read a path written by :func:`write_path_dump`."""
    header = stream.readline().rstrip("\n")
    if header != PATH_DUMP_HEADER:
        raise StructuralError(f"unexpected path dump header: {header!r}")
    columns = stream.readline().rstrip("\n")
    if columns != "t,value,running_max":
        raise StructuralError(f"unexpected path dump columns: {columns!r}")
    rows = [line.split(",") for line in stream if line.strip()]
    data = np.array(rows, dtype=np.float64)
    grid = TimeGrid(data[:, 0])
    path = DiscretePath(grid=grid, values=data[:, 1])
    return MaxPath(path=path, running_max=data[:, 2])
