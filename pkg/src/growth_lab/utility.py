"""Power utilities, the signed logarithm, and scaling bounds.

The long-run analysis rests on one scaling fact: for U(x) = x^p / p,

    U(lambda * x) = lambda^p * U(x)

exactly, so scaling wealth by epsilon costs at most ``|p log epsilon|`` in
log expected utility.  The exponent in that bound is tracked by
:class:`GammaBound`.  Expected utilities change sign with ``p``; the signed
logarithm ``sign(x) * log|x|`` extends ``log`` to negative arguments so a
single rate convention covers both branches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .transforms import ScalePair

__all__ = [
    "PowerUtility",
    "GammaBound",
    "CustomUtility",
    "signed_log",
    "gamma_for_power",
    "growth_condition_check",
    "compose_with_scale",
    "register_utility",
]

_LATTICE = np.geomspace(1e-6, 1e6, 1000)


@dataclass(frozen=True)
class PowerUtility:
    """U(x) = x^p / p for p < 1, p != 0.

    Negative ``p`` gives bounded-above negative utilities; ``p`` in (0, 1)
    gives positive utilities.  Both are increasing and strictly concave.
    """

    p: float

    def __post_init__(self):
        if not (self.p < 1.0) or self.p == 0.0:
            raise DomainError(f"power exponent must satisfy p < 1, p != 0; got {self.p}")

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        if np.any(x <= 0.0):
            raise DomainError("power utility is defined for strictly positive wealth")
        out = x**self.p / self.p
        return out if out.ndim else float(out)

    def deriv(self, x):
        x = np.asarray(x, dtype=np.float64)
        if np.any(x <= 0.0):
            raise DomainError("power utility is defined for strictly positive wealth")
        out = x ** (self.p - 1.0)
        return out if out.ndim else float(out)

    def __call__(self, x):
        return self.eval(x)


@dataclass(frozen=True)
class GammaBound:
    """Scaling exponent gamma with U(eps x) >= eps^gamma U(x) for eps in (0,1].

    For power utilities the bound holds with equality at gamma = p; the
    anchor ``x0`` records where the bound was verified.
    """

    gamma: float
    x0: float


@dataclass(frozen=True)
class CustomUtility:
    """User-supplied utility admitted after a sampled verification pass."""

    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    bound: GammaBound
    name: str = "custom"

    def eval(self, x):
        return self.fn(x)

    def __call__(self, x):
        return self.fn(x)


def signed_log(x):
    """log extended to negative arguments by sign(x) * log|x|.

    With this convention the growth rate of an expected utility is read off
    the same way whether the utility is positive or negative.  Zero has no
    signed logarithm.
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr == 0.0):
        raise DomainError("signed_log is undefined at 0")
    out = np.sign(arr) * np.log(np.abs(arr))
    return out if arr.ndim else float(out)


def gamma_for_power(u: PowerUtility, x0: float = 1.0) -> GammaBound:
    """Exact scaling exponent for a power utility (homogeneity of degree p)."""
    if not x0 > 0.0:
        raise DomainError("anchor x0 must be positive")
    return GammaBound(gamma=u.p, x0=float(x0))


def growth_condition_check(u, lattice: np.ndarray | None = None) -> bool:
    """Check that x U'(x) / |U(x)| stays bounded on a sampled lattice.

    A bounded elasticity is what keeps scaling losses of order
    ``|gamma log eps|`` rather than unbounded; for U(x) = x^p / p the ratio
    is identically |p|.
    """
    xs = _LATTICE if lattice is None else np.asarray(lattice, dtype=np.float64)
    vals = np.asarray(u.eval(xs), dtype=np.float64)
    derivs = np.asarray(u.deriv(xs), dtype=np.float64)
    if np.any(vals == 0.0):
        return False
    ratio = xs * derivs / np.abs(vals)
    return bool(np.all(np.isfinite(ratio)) and np.max(np.abs(ratio)) < 1e6)


def compose_with_scale(u, pair: ScalePair) -> Callable[[np.ndarray], np.ndarray]:
    """The composed objective x -> U(F(x)) for a scale pair.

    For the proportional drawdown w(x) = alpha x with v0 = 1 and a power
    utility this is x^{p(1-alpha)} / p, a rescaled power utility with
    exponent p(1 - alpha).
    """

    def composed(x):
        return u.eval(pair.F.eval(x))

    return composed


def _verify_gamma_bound(fn, bound: GammaBound, rel_tol: float = 1e-9) -> None:
    eps_grid = np.array([0.999, 0.9, 0.5, 0.1, 1e-3])
    xs = np.geomspace(1e-4, 1e4, 41) * bound.x0
    vals = np.asarray(fn(xs), dtype=np.float64)
    for eps in eps_grid:
        scaled = np.asarray(fn(eps * xs), dtype=np.float64)
        floor = eps**bound.gamma * vals
        slack = rel_tol * np.maximum(np.abs(scaled), np.abs(floor))
        if np.any(scaled < floor - slack):
            i = int(np.argmax(floor - scaled))
            raise DomainError(
                f"scaling bound fails at x = {xs[i]:.6g}, eps = {eps}: "
                f"U(eps x) = {scaled[i]:.6g} < eps^gamma U(x) = {floor[i]:.6g}"
            )


def register_utility(
    fn: Callable[[np.ndarray], np.ndarray],
    deriv: Callable[[np.ndarray], np.ndarray],
    gamma: float,
    x0: float = 1.0,
    name: str = "custom",
) -> CustomUtility:
    """Admit a user-supplied utility after sampled verification.

    The function must be increasing, concave, of a single sign, satisfy the
    sampled growth condition, and honor the declared scaling exponent
    ``U(eps x) >= eps^gamma U(x)``.  Raises :class:`DomainError` on the
    first failed check.
    """
    xs = _LATTICE
    vals = np.asarray(fn(xs), dtype=np.float64)
    derivs = np.asarray(deriv(xs), dtype=np.float64)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(derivs))):
        raise DomainError(f"utility {name!r} is not finite on the sampled lattice")
    if np.any(derivs <= 0.0) or np.any(np.diff(vals) <= 0.0):
        raise DomainError(f"utility {name!r} must be strictly increasing")
    if np.any(np.diff(derivs) > 1e-12 * np.abs(derivs[:-1])):
        raise DomainError(f"utility {name!r} must be concave (nonincreasing derivative)")
    signs = np.sign(vals)
    if not (np.all(signs > 0) or np.all(signs < 0)):
        raise DomainError(f"utility {name!r} must keep a single sign")
    candidate = CustomUtility(
        fn=fn, deriv=deriv, bound=GammaBound(gamma=gamma, x0=float(x0)), name=name
    )
    if not growth_condition_check(candidate):
        raise DomainError(f"utility {name!r} fails the sampled growth condition")
    _verify_gamma_bound(fn, candidate.bound)
    return candidate
