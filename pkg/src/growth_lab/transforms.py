"""Max-based path transforms and drawdown scale functions.

The central object is the transform

    M[F](X)_t = F(max X) - F'(max X) * (max X - X_t),

applied pointwise along a discrete path with its running maximum.  For a
drawdown function ``w`` the scale function

    K(x) = v0 * exp( integral_{v0}^{x} du / (u - w(u)) )

and its inverse ``F`` form a :class:`ScalePair`; transforming a wealth path
by ``F`` produces a path whose drawdown never breaches ``w`` of its own
running maximum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidDrawdownError, NumericError
from .paths import DiscretePath, MaxPath, integrate_against

__all__ = [
    "SmoothIncreasingFn",
    "DrawdownSpec",
    "ScalePair",
    "LinearDrawdown",
    "TabulatedDrawdown",
    "azema_yor",
    "azema_yor_integral_form",
    "build_scale_pair",
    "linear_drawdown_scale",
    "implied_floor_of_max",
]

INVERSION_REL_WIDTH = 1e-12
QUAD_REL_TOL_DEFAULT = 1e-10
_MAX_SIMPSON_DEPTH = 48


@dataclass(frozen=True)
class SmoothIncreasingFn:
    """A C^1 increasing function with an explicit derivative.

    Both callables must accept scalars and numpy arrays.  ``domain_low`` is
    the left edge of the open domain; evaluation below it is the caller's
    responsibility to avoid.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    domain_low: float = 0.0

    def __call__(self, x):
        return self.eval(x)


@dataclass(frozen=True)
class _PowerFn:
    """coef * x**exponent, picklable closed-form building block."""

    coef: float
    exponent: float

    def __call__(self, x):
        return self.coef * np.asarray(x, dtype=np.float64) ** self.exponent


@dataclass(frozen=True)
class LinearDrawdown:
    """w(x) = alpha * x."""

    alpha: float

    def __call__(self, x):
        return self.alpha * np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class TabulatedDrawdown:
    """Piecewise-linear drawdown function from a monotone table.

    Below the first knot the ratio w(x)/x is held constant; above the last
    knot the value is held constant, so the admissibility bounds survive
    extrapolation in both directions.
    """

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise DomainError("drawdown table needs matching 1-d arrays, length >= 2")
        if not (np.all(np.diff(xs) > 0) and np.all(xs > 0)):
            raise DomainError("drawdown table abscissae must be positive and increasing")
        if not np.all(np.diff(ys) >= 0):
            raise DomainError("drawdown table values must be nondecreasing")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.interp(x, self.xs, self.ys)
        low = x < self.xs[0]
        if np.any(low):
            out = np.where(low, x * (self.ys[0] / self.xs[0]), out)
        return out


@dataclass(frozen=True)
class DrawdownSpec:
    """An admissible drawdown function with its proportional cap.

    Attributes:
        w: nondecreasing function with 0 <= w(x) <= alpha * x.
        alpha: proportional cap, in [0, 1).
        v0: reference initial wealth, the fixed point of the scale pair.
        breakpoints: extra abscissae to include when sampling ``w`` for
            validation (kinks of tabulated functions, for example).
    """

    w: Callable[[np.ndarray], np.ndarray]
    alpha: float
    v0: float = 1.0
    breakpoints: Sequence[float] = ()

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.v0 > 0.0:
            raise DomainError(f"v0 must be positive, got {self.v0}")
        xs = np.geomspace(self.v0 * 1e-6, self.v0 * 1e6, 1001)
        extra = np.asarray([b for b in self.breakpoints if b > 0.0], dtype=np.float64)
        if extra.size:
            xs = np.union1d(xs, extra)
        wx = np.asarray(self.w(xs), dtype=np.float64)
        if not np.all(np.isfinite(wx)):
            raise InvalidDrawdownError("drawdown function is not finite on the lattice")
        if np.any(wx < 0.0):
            raise InvalidDrawdownError("drawdown function must be nonnegative")
        ratio = wx / xs
        if np.any(ratio > self.alpha * (1.0 + 1e-12) + 1e-15):
            i = int(np.argmax(ratio))
            raise InvalidDrawdownError(
                f"w(x)/x = {ratio[i]:.6g} exceeds alpha = {self.alpha} at x = {xs[i]:.6g}"
            )
        if np.any(np.diff(wx) < -1e-12 * max(1.0, float(np.max(np.abs(wx))))):
            raise InvalidDrawdownError("drawdown function must be nondecreasing")

    @classmethod
    def linear(cls, alpha: float, v0: float = 1.0) -> "DrawdownSpec":
        return cls(w=LinearDrawdown(alpha), alpha=alpha, v0=v0)


@dataclass(frozen=True)
class ScalePair:
    """Inverse pair (K, F) sharing the fixed point K(v0) = F(v0) = v0."""

    K: SmoothIncreasingFn
    F: SmoothIncreasingFn
    spec: DrawdownSpec


def azema_yor(F: SmoothIncreasingFn, path: MaxPath) -> DiscretePath:
    """Transform a path through ``F`` of its running maximum.

    Returns the path ``F(m) - F'(m) * (m - x)`` evaluated at every grid
    point, where ``m`` is the running maximum of ``x``.  For nondecreasing
    ``F'`` the running maximum of the output is exactly ``F(m)``; for
    concave ``F`` the output dominates ``F(x)`` pointwise.
    """
    x = path.values
    m = path.running_max
    out = np.asarray(F.eval(m) - F.deriv(m) * (m - x), dtype=np.float64)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise NumericError(
            f"transform produced a non-finite value at index {bad} "
            f"(max {m[bad]}, value {x[bad]})"
        )
    return DiscretePath(grid=path.grid, values=out)


def azema_yor_integral_form(F: SmoothIncreasingFn, path: MaxPath) -> DiscretePath:
    """Integral form of the same transform, for consistency checks.

    Accumulates ``F(x_0) + sum F'(m_i) * (x_{i+1} - x_i)``.  It agrees with
    :func:`azema_yor` in the continuum limit; on a grid the two differ by a
    discretization gap that shrinks as steps are refined, which makes this
    form a useful independent oracle but not the canonical implementation.
    """
    x0 = float(path.values[0])
    return integrate_against(F.deriv, path, initial=float(F.eval(x0)))


def _adaptive_simpson(f, a: float, b: float, rel_tol: float) -> float:
    """Adaptive composite Simpson rule on [a, b] with relative tolerance."""

    def simpson(lo, flo, hi, fhi, fmid):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, flo, hi, fhi, fmid, whole, tol, depth):
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flmid = f(lmid)
        frmid = f(rmid)
        left = simpson(lo, flo, mid, fmid, flmid)
        right = simpson(mid, fmid, hi, fhi, frmid)
        err = left + right - whole
        if abs(err) <= 15.0 * tol or depth >= _MAX_SIMPSON_DEPTH:
            if depth >= _MAX_SIMPSON_DEPTH and abs(err) > 15.0 * max(tol, 1e-300):
                raise NumericError("quadrature failed to converge")
            return left + right + err / 15.0
        return recurse(lo, flo, mid, fmid, flmid, left, 0.5 * tol, depth + 1) + recurse(
            mid, fmid, hi, fhi, frmid, right, 0.5 * tol, depth + 1
        )

    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = simpson(a, fa, b, fb, fm)
    scale = max(abs(whole), abs(b - a))
    return recurse(a, fa, b, fb, fm, whole, rel_tol * scale, 0)


class _QuadratureScale:
    """Scale pair evaluator built by quadrature of 1/(u - w(u)).

    The integral is computed in the log variable s = log(u / v0), where the
    integrand e^s / (e^s - w(v0 e^s) / v0) is bounded between 1 and
    1/(1 - alpha).  Array evaluation integrates segment by segment between
    sorted unique abscissae so repeated values (running maxima) are cheap.
    """

    def __init__(self, spec: DrawdownSpec, rel_tol: float):
        self.spec = spec
        self.rel_tol = float(rel_tol)

    def _log_integrand(self, s):
        u = self.spec.v0 * np.exp(s)
        wu = float(self.spec.w(u))
        gap = u - wu
        if gap <= 0.0:
            raise InvalidDrawdownError(
                f"w(x) >= x at quadrature node x = {u:.6g} (w = {wu:.6g})"
            )
        return u / gap

    def log_k(self, x: np.ndarray) -> np.ndarray:
        """log(K(x) / v0), flattened, for an array of positive abscissae.

        Unique abscissae are sorted and the integral accumulated segment by
        segment outward from v0, so arrays with many repeats (running
        maxima) cost one short quadrature per distinct value.
        """
        flat = np.ravel(np.asarray(x, dtype=np.float64))
        if np.any(flat <= 0.0):
            raise DomainError("scale function abscissae must be positive")
        s_unique, inverse = np.unique(np.log(flat / self.spec.v0), return_inverse=True)
        vals = np.empty_like(s_unique)
        below = s_unique < 0.0
        if np.any(below):
            acc, prev = 0.0, 0.0
            for j in range(np.count_nonzero(below) - 1, -1, -1):
                acc += _adaptive_simpson(self._log_integrand, prev, s_unique[j], self.rel_tol)
                vals[j] = acc
                prev = s_unique[j]
        if np.any(~below):
            acc, prev = 0.0, 0.0
            for j in range(np.count_nonzero(below), s_unique.size):
                acc += _adaptive_simpson(self._log_integrand, prev, s_unique[j], self.rel_tol)
                vals[j] = acc
                prev = s_unique[j]
        return vals[inverse]

    def k_eval(self, x):
        x_arr = np.asarray(x, dtype=np.float64)
        out = self.spec.v0 * np.exp(self.log_k(x_arr))
        return out.reshape(x_arr.shape) if x_arr.ndim else float(out[0])

    def k_deriv(self, x):
        x_arr = np.asarray(x, dtype=np.float64)
        k = self.spec.v0 * np.exp(self.log_k(x_arr))
        gap = np.ravel(x_arr - np.asarray(self.spec.w(x_arr), dtype=np.float64))
        if np.any(gap <= 0.0):
            raise InvalidDrawdownError("w(x) >= x inside derivative evaluation")
        out = k / gap
        return out.reshape(x_arr.shape) if x_arr.ndim else float(out[0])

    def f_eval(self, y):
        y_arr = np.asarray(y, dtype=np.float64)
        flat = np.ravel(y_arr)
        if np.any(flat <= 0.0):
            raise DomainError("inverse scale abscissae must be positive")
        out = _invert_increasing(self.k_eval, flat, self.spec.v0)
        return out.reshape(y_arr.shape) if y_arr.ndim else float(out[0])

    def f_deriv(self, y):
        y_arr = np.asarray(y, dtype=np.float64)
        x = np.asarray(self.f_eval(y_arr), dtype=np.float64)
        gap = x - np.asarray(self.spec.w(x), dtype=np.float64)
        out = gap / y_arr
        return out if y_arr.ndim else float(out)


def _invert_increasing(fn, targets: np.ndarray, v0: float) -> np.ndarray:
    """Solve fn(x) = target for increasing fn with fn(v0) = v0, elementwise.

    Brackets by multiplicative expansion away from v0 and bisects to a
    relative interval width of ``INVERSION_REL_WIDTH``.
    """
    targets = np.asarray(targets, dtype=np.float64)
    lo = np.full_like(targets, v0)
    hi = np.full_like(targets, v0)
    up = targets >= v0
    # expand upward brackets: [v0, 2x] doubling until fn(hi) >= target
    hi[up] = np.maximum(2.0 * targets[up], 2.0 * v0)
    for _ in range(200):
        vals = np.asarray(fn(hi[up]), dtype=np.float64)
        short = vals < targets[up]
        if not np.any(short):
            break
        idx = np.flatnonzero(up)[short]
        hi[idx] *= 2.0
    else:
        raise NumericError("bracket expansion failed while inverting scale function")
    down = ~up
    lo[down] = np.minimum(targets[down] / 2.0, v0 / 2.0)
    for _ in range(200):
        vals = np.asarray(fn(lo[down]), dtype=np.float64)
        tall = vals > targets[down]
        if not np.any(tall):
            break
        idx = np.flatnonzero(down)[tall]
        lo[idx] /= 2.0
    else:
        raise NumericError("bracket expansion failed while inverting scale function")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        width = (hi - lo) / np.maximum(np.abs(mid), 1e-300)
        if np.all(width <= INVERSION_REL_WIDTH):
            break
        vals = np.asarray(fn(mid), dtype=np.float64)
        too_low = vals < targets
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
    return 0.5 * (lo + hi)


def build_scale_pair(
    spec: DrawdownSpec, quad_tol: float = QUAD_REL_TOL_DEFAULT
) -> ScalePair:
    """Construct the scale pair (K, F) for a drawdown specification.

    ``K`` is computed by adaptive Simpson quadrature of ``1/(u - w(u))`` in
    the log variable; ``F`` inverts ``K`` by bracketed bisection.  The
    derivative of ``K`` is analytic: K'(x) = K(x) / (x - w(x)).

    The roundtrip |F(K(x)) - x| / x stays within about ten times
    ``quad_tol`` on any reasonable lattice; tighter tolerances cost more
    quadrature subdivisions.
    """
    if not quad_tol > 0.0:
        raise DomainError(f"quad_tol must be positive, got {quad_tol}")
    engine = _QuadratureScale(spec, quad_tol)
    K = SmoothIncreasingFn(eval=engine.k_eval, deriv=engine.k_deriv, domain_low=0.0)
    F = SmoothIncreasingFn(eval=engine.f_eval, deriv=engine.f_deriv, domain_low=0.0)
    return ScalePair(K=K, F=F, spec=spec)


def linear_drawdown_scale(alpha: float, v0: float = 1.0) -> ScalePair:
    """Closed-form scale pair for the proportional drawdown w(x) = alpha x.

    K(x) = v0 (x/v0)^{1/(1-alpha)} and F(y) = v0 (y/v0)^{1-alpha}; alpha = 0
    degenerates to the identity pair.
    """
    spec = DrawdownSpec.linear(alpha, v0)
    a = 1.0 / (1.0 - alpha)
    b = 1.0 - alpha
    K = SmoothIncreasingFn(
        eval=_PowerFn(coef=v0 ** (1.0 - a), exponent=a),
        deriv=_PowerFn(coef=a * v0 ** (1.0 - a), exponent=a - 1.0),
        domain_low=0.0,
    )
    F = SmoothIncreasingFn(
        eval=_PowerFn(coef=v0 ** (1.0 - b), exponent=b),
        deriv=_PowerFn(coef=b * v0 ** (1.0 - b), exponent=b - 1.0),
        domain_low=0.0,
    )
    return ScalePair(K=K, F=F, spec=spec)


def implied_floor_of_max(
    F: SmoothIncreasingFn, K: SmoothIncreasingFn | None = None
) -> Callable[[np.ndarray], np.ndarray]:
    """Drawdown function implied by transforming wealth through ``F``.

    A wealth path transformed by ``F`` never falls below ``w(running max)``
    where ``w(x) = x - K(x) / K'(x)`` and ``K`` is the inverse of ``F``.
    When ``K`` is not supplied it is recovered pointwise by bisection, with
    K'(x) = 1 / F'(K(x)).
    """

    fixed = _fixed_point_of(F) if K is None else None

    def w(x):
        x_arr = np.asarray(x, dtype=np.float64)
        flat = np.ravel(x_arr)
        if K is not None:
            kx = np.ravel(np.asarray(K.eval(flat), dtype=np.float64))
            kpx = np.ravel(np.asarray(K.deriv(flat), dtype=np.float64))
        else:
            kx = _invert_increasing(lambda z: np.asarray(F.eval(z)), flat, fixed)
            kpx = 1.0 / np.asarray(F.deriv(kx), dtype=np.float64)
        if np.any(kpx == 0.0) or not np.all(np.isfinite(kpx)):
            raise NumericError("implied floor undefined where K'(x) vanishes")
        out = flat - kx / kpx
        return out.reshape(x_arr.shape) if x_arr.ndim else float(out[0])

    return w


def _fixed_point_of(F: SmoothIncreasingFn) -> float:
    """Locate a fixed point F(v) = v by bisection on a wide bracket."""
    lo, hi = 1e-8, 1e8
    g = lambda v: float(F.eval(v)) - v
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        # fall back to 1.0, the conventional normalization
        return 1.0
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        gm = g(mid)
        if gm == 0.0 or (hi - lo) / mid < 1e-14:
            return mid
        if gm * glo < 0:
            hi = mid
        else:
            lo, glo = mid, gm
    return np.sqrt(lo * hi)
