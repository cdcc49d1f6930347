"""Special functions for noise calibration.

Standard normal tail ``Q``, its inverse, the principal Lambert-W branch and
the threshold ``tau*(delta)``: the point beyond which a standard normal has
probability at most ``delta / 2`` in its upper tail.

``tau*`` can be computed four ways (see :class:`TauMethod`). The exact
inverse-Q route gives the smallest value. The Lambert routes replace Q by
the tail bound ``Q(t) <= exp(-t**2/2) / (sqrt(2 pi) t)`` and are therefore
upper bounds, which keeps every calibration built on them sufficient.
"""

from __future__ import annotations

import enum
import math

from scipy import special

from pufferfish.errors import ConvergenceError, DomainError

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Lattice used to tabulate the Lambert bound: np.linspace(0.001, 5, 10000).
# Extended past 5 with the same spacing so small deltas stay on-lattice.
TAU_GRID_START = 0.001
TAU_GRID_STOP = 5.0
TAU_GRID_POINTS = 10000


class TauMethod(str, enum.Enum):
    """How ``tau*(delta)`` is evaluated.

    EXACT_Q_INVERSE: ``Q^{-1}(delta/2)``, the defining value.
    LAMBERT_FIXED_POINT: nonzero fixed point of ``t = sqrt(2 W0(t / (sqrt(2 pi) delta)))``.
    LAMBERT_CLOSED_FORM: ``sqrt(W0(2 / (pi delta^2)))``; algebraically the same
      number as the fixed point, computed without iteration.
    LAMBERT_GRID: first point of the tabulation lattice that satisfies the
      fixed-point inequality. This is how the published summation-query curves
      were produced, so it is the default.
    """

    EXACT_Q_INVERSE = "exact"
    LAMBERT_FIXED_POINT = "lambert-fp"
    LAMBERT_CLOSED_FORM = "lambert-cf"
    LAMBERT_GRID = "lambert-grid"

    @classmethod
    def parse(cls, value: "TauMethod | str") -> "TauMethod":
        if isinstance(value, cls):
            return value
        aliases = {
            "exact-q-inverse": cls.EXACT_Q_INVERSE,
            "lambert-fixed-point": cls.LAMBERT_FIXED_POINT,
            "lambert-closed-form": cls.LAMBERT_CLOSED_FORM,
        }
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise DomainError(f"unknown tau method {value!r}; choose from {choices}") from None


DEFAULT_TAU_METHOD = TauMethod.LAMBERT_GRID


def q_tail(t: float) -> float:
    """Upper-tail probability ``P(Z > t)`` of a standard normal."""
    t = float(t)
    if math.isnan(t):
        raise DomainError("q_tail is undefined for NaN")
    return 0.5 * float(special.erfc(t / _SQRT2))


def _normal_pdf(t: float) -> float:
    return math.exp(-0.5 * t * t) / _SQRT2PI


def q_inverse(p: float, *, rtol: float = 1e-12, max_iter: int = 200) -> float:
    """Inverse of :func:`q_tail` on ``(0, 1)``.

    Safeguarded Newton iteration on ``log Q(t) - log p`` with a bisection
    fallback whenever a step leaves the current bracket.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"q_inverse needs 0 < p < 1, got {p}")
    if p > 0.5:
        return -q_inverse(1.0 - p, rtol=rtol, max_iter=max_iter)
    if p == 0.5:
        return 0.0

    lo, hi = 0.0, 40.0
    log_p = math.log(p)
    t = math.sqrt(-2.0 * log_p)
    t = min(max(t - (math.log(t) + math.log(_SQRT2PI)) / t if t > 1.0 else 0.5, lo), hi)
    for _ in range(max_iter):
        q = q_tail(t)
        if q > 0.0 and abs(q - p) <= rtol * p * 0.01:
            return t
        if q > p:
            lo = t
        else:
            hi = t
        if q > 0.0:
            # d/dt log Q(t) = -phi(t) / Q(t)
            step = (math.log(q) - log_p) * q / _normal_pdf(t)
            t_new = t + step
        else:
            t_new = 0.5 * (lo + hi)
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-16 * max(1.0, abs(t)):
            t = t_new
            break
        t = t_new
    if abs(q_tail(t) - p) > rtol * p:
        raise ConvergenceError(f"q_inverse({p}) did not converge (t={t})")
    return t


def lambert_w0(x: float, *, max_iter: int = 100) -> float:
    """Principal branch ``W0(x)`` for ``x >= 0`` by Halley iteration."""
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"lambert_w0 is only defined here for x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf

    if x < 1.0:
        w = x * (1.0 - x) if x < 0.1 else math.log1p(x) * 0.8
    else:
        l1 = math.log(x)
        l2 = math.log(l1) if l1 > 1.0 else 0.0
        w = max(l1 - l2 + (l2 / l1 if l1 > 0 else 0.0), 0.5)

    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w_new = w - step
        if w_new < 0.0:
            w_new = 0.5 * w
        if abs(w_new - w) <= 4e-16 * max(1.0, abs(w_new)):
            return w_new
        w = w_new
    if abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, x):
        return w
    raise ConvergenceError(f"lambert_w0({x}) did not converge")


def _lambert_condition(tau: float, delta: float) -> bool:
    """``tau^2 >= 2 W0(tau / (sqrt(2 pi) delta))``."""
    return tau * tau >= 2.0 * lambert_w0(tau / (_SQRT2PI * delta))


def _tau_fixed_point(delta: float, *, tol: float = 1e-14, max_iter: int = 200) -> float:
    scale = _SQRT2PI * delta
    tau = 1.0
    for _ in range(max_iter):
        nxt = math.sqrt(2.0 * lambert_w0(tau / scale))
        if abs(nxt - tau) <= tol * max(1.0, nxt):
            return nxt
        tau = nxt
    raise ConvergenceError(f"Lambert fixed point for delta={delta} did not converge")


def _tau_closed_form(delta: float) -> float:
    return math.sqrt(lambert_w0(2.0 / (math.pi * delta * delta)))


def _tau_grid(delta: float) -> float:
    step = (TAU_GRID_STOP - TAU_GRID_START) / (TAU_GRID_POINTS - 1)
    target = _tau_fixed_point(delta)
    k = max(0, math.ceil((target - TAU_GRID_START) / step))
    # the inequality holds exactly on [fixed point, inf); settle rounding at the edge
    while k > 0 and _lambert_condition(TAU_GRID_START + (k - 1) * step, delta):
        k -= 1
    while not _lambert_condition(TAU_GRID_START + k * step, delta):
        k += 1
    if k == TAU_GRID_POINTS - 1:
        return TAU_GRID_STOP
    return TAU_GRID_START + k * step


def tau_star(delta: float, method: TauMethod | str = DEFAULT_TAU_METHOD) -> float:
    """Tail threshold ``tau*(delta)`` scaling the spread term of every bound."""
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise DomainError(f"tau_star needs 0 < delta < 1, got {delta}")
    method = TauMethod.parse(method)
    if method is TauMethod.EXACT_Q_INVERSE:
        return max(0.0, q_inverse(delta / 2.0))
    if method is TauMethod.LAMBERT_FIXED_POINT:
        return _tau_fixed_point(delta)
    if method is TauMethod.LAMBERT_CLOSED_FORM:
        return _tau_closed_form(delta)
    return _tau_grid(delta)
