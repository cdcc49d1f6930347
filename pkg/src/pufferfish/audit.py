"""Laplace mechanism and indistinguishability auditing.

For an additive Laplace mechanism ``Y = X + N`` the tight slack at privacy level
epsilon between two secrets is the hockey-stick divergence

    delta_hat = integral of max(p_i(y) - e^eps p_j(y), 0) dy,

which equals the supremum over events B of ``P(B | s_i) - e^eps P(B | s_j)``
because the supremum is attained on ``{y : p_i(y) > e^eps p_j(y)}``.
``audit_analytic`` evaluates it from the closed-form density of Y under a
Gaussian-mixture prior; ``audit_empirical`` estimates it from samples.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import math
from typing import Sequence

import numpy as np
from scipy import special

from pufferfish.errors import DataError, DomainError, QuadratureError
from pufferfish.gmm import Gmm1D, as_mixture
from pufferfish.quadrature import gk_integrate

_SQRT2 = math.sqrt(2.0)
# Laplace tails beyond 40 b and Gaussian tails beyond 12 sigma carry < 1e-10 mass
TAIL_LAPLACE = 40.0
TAIL_GAUSS = 12.0
QUAD_EPSABS = 1e-8
QUAD_FAIL = 1e-6


@dataclasses.dataclass(frozen=True)
class LaplaceNoise:
    """Zero-mean Laplace noise with scale ``b``: density ``exp(-|z|/b) / (2b)``."""

    b: float

    def __post_init__(self):
        if not (math.isfinite(self.b) and self.b > 0):
            raise DomainError(f"Laplace scale must be > 0, got {self.b}")

    @property
    def variance(self) -> float:
        return 2.0 * self.b * self.b

    def pdf(self, z):
        return np.exp(-np.abs(z) / self.b) / (2.0 * self.b)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(z < 0, 0.5 * np.exp(z / self.b), 1.0 - 0.5 * np.exp(-z / self.b))


def laplace_sample(noise: LaplaceNoise, seed: int, n: int) -> np.ndarray:
    """``n`` i.i.d. draws by inverting the Laplace CDF; deterministic in ``seed``."""
    if n < 0:
        raise DomainError(f"sample count must be >= 0, got {n}")
    u = np.random.default_rng(seed).random(n) - 0.5  # in [-0.5, 0.5)
    return -noise.b * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def _exp_erfc(c, a):
    """``exp(c) * erfc(a)`` without overflow, given ``c - a**2`` is moderate when ``a >= 0``."""
    pos = a >= 0
    out = np.empty(np.broadcast(c, a).shape)
    c_b, a_b = np.broadcast_arrays(c, a)
    # for a >= 0: exp(c) erfc(a) = exp(c - a^2) erfcx(a)
    out[pos] = np.exp(c_b[pos] - a_b[pos] ** 2) * special.erfcx(a_b[pos])
    out[~pos] = np.exp(c_b[~pos]) * special.erfc(a_b[~pos])
    return out


def _component_density(u: np.ndarray, sigma: float, b: float) -> np.ndarray:
    """Density of ``G(0, sigma^2) + Laplace(b)`` at offsets ``u``."""
    if sigma == 0.0:
        return np.exp(-np.abs(u) / b) / (2.0 * b)
    c0 = sigma * sigma / (2.0 * b * b)
    r = sigma / b
    lower = _exp_erfc(c0 - u / b, (r - u / sigma) / _SQRT2)
    upper = _exp_erfc(c0 + u / b, (r + u / sigma) / _SQRT2)
    return (lower + upper) / (4.0 * b)


def _component_cdf(u: np.ndarray, sigma: float, b: float) -> np.ndarray:
    if sigma == 0.0:
        return np.where(u < 0, 0.5 * np.exp(u / b), 1.0 - 0.5 * np.exp(-u / b))
    c0 = sigma * sigma / (2.0 * b * b)
    r = sigma / b
    lower = _exp_erfc(c0 - u / b, (r - u / sigma) / _SQRT2)
    upper = _exp_erfc(c0 + u / b, (r + u / sigma) / _SQRT2)
    return special.ndtr(u / sigma) - 0.25 * lower + 0.25 * upper


def noised_density(prior, noise: LaplaceNoise, y):
    """Density of ``Y = X + N`` for a mixture (or Gaussian) prior on X, in closed form."""
    prior = as_mixture(prior)
    ys = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(ys)):
        raise DomainError("noised_density needs finite evaluation points")
    flat = np.atleast_1d(ys)
    out = np.zeros(flat.shape)
    for w, comp in zip(prior.weights, prior.components):
        if w > 0:
            out += w * _component_density(flat - comp.mu, comp.sigma, noise.b)
    return float(out[0]) if ys.ndim == 0 else out.reshape(ys.shape)


def noised_cdf(prior, noise: LaplaceNoise, y):
    """CDF of ``Y = X + N``; used as an independent check on the quadrature."""
    prior = as_mixture(prior)
    ys = np.asarray(y, dtype=float)
    flat = np.atleast_1d(ys)
    out = np.zeros(flat.shape)
    for w, comp in zip(prior.weights, prior.components):
        if w > 0:
            out += w * _component_cdf(flat - comp.mu, comp.sigma, noise.b)
    return float(out[0]) if ys.ndim == 0 else out.reshape(ys.shape)


class AuditMethod(str, enum.Enum):
    ANALYTIC_QUADRATURE = "analytic-quadrature"
    EMPIRICAL_HISTOGRAM = "empirical-histogram"


@dataclasses.dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    p_i: np.ndarray
    p_j: np.ndarray

    def rows(self):
        for left, right, a, b in zip(self.edges[:-1], self.edges[1:], self.p_i, self.p_j):
            yield float(left), float(right), float(a), float(b)


@dataclasses.dataclass(frozen=True)
class AuditReport:
    """Achieved slack in both orientations.

    ``delta_ij`` audits ``P(B|s_i) <= e^eps P(B|s_j) + delta``; ``delta_ji`` swaps the roles.
    """

    epsilon: float
    delta_ij: float
    delta_ji: float
    method: AuditMethod
    domain: tuple[float, float]
    error_estimate: float
    delta_target: float | None = None
    histogram: Histogram | None = dataclasses.field(default=None, repr=False, compare=False)

    @property
    def delta_achieved(self) -> float:
        return max(self.delta_ij, self.delta_ji)

    @property
    def satisfied(self) -> bool | None:
        if self.delta_target is None:
            return None
        return self.delta_achieved <= self.delta_target

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "epsilon": self.epsilon,
            "delta_target": self.delta_target,
            "delta_ij": self.delta_ij,
            "delta_ji": self.delta_ji,
            "delta_achieved": self.delta_achieved,
            "domain": list(self.domain),
            "error_estimate": self.error_estimate,
        }


def write_histogram_csv(path, hist: Histogram) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "p_i", "p_j"])
        for row in hist.rows():
            writer.writerow([repr(v) for v in row])


def audit_domain(prior_i: Gmm1D, prior_j: Gmm1D, b: float) -> tuple[float, float]:
    mus = np.concatenate((prior_i.mus, prior_j.mus))
    sigma_max = float(max(prior_i.sigmas.max(), prior_j.sigmas.max()))
    pad = TAIL_GAUSS * sigma_max + TAIL_LAPLACE * b
    return float(mus.min() - pad), float(mus.max() + pad)


def _scan_grid(prior_i: Gmm1D, prior_j: Gmm1D, b: float, lo: float, hi: float) -> np.ndarray:
    # log p_Y is (1/b)-Lipschitz, so a b/40 spacing resolves every sign change of
    # p_i - e^eps p_j except slivers far thinner than the noise scale
    n = int(min(max(2001, (hi - lo) / (b / 40.0)), 400_001))
    pts = [np.linspace(lo, hi, n)]
    for comp in prior_i.components + prior_j.components:
        width = max(comp.sigma, b)
        pts.append(comp.mu + width * np.linspace(-8.0, 8.0, 321))
    grid = np.unique(np.concatenate(pts))
    return grid[(grid >= lo) & (grid <= hi)]


def _roots(g, left: np.ndarray, right: np.ndarray, iters: int = 80) -> np.ndarray:
    """Vectorised bisection on brackets with ``g(left) > 0 >= g(right)`` or the reverse."""
    g_left = g(left)
    for _ in range(iters):
        mid = 0.5 * (left + right)
        g_mid = g(mid)
        same = np.sign(g_mid) == np.sign(g_left)
        left = np.where(same, mid, left)
        g_left = np.where(same, g_mid, g_left)
        right = np.where(same, right, mid)
        if np.all(right - left <= 1e-15 * np.maximum(1.0, np.abs(left))):
            break
    return 0.5 * (left + right)


def hockey_stick(prior_i: Gmm1D, prior_j: Gmm1D, b: float, epsilon: float,
                 lo: float, hi: float) -> tuple[float, float]:
    """``integral of max(p_i - e^eps p_j, 0)`` over ``[lo, hi]`` with an error estimate."""
    noise = LaplaceNoise(b)
    scale = math.exp(epsilon)

    def g(y):
        return noised_density(prior_i, noise, y) - scale * noised_density(prior_j, noise, y)

    grid = _scan_grid(prior_i, prior_j, b, lo, hi)
    vals = g(grid)
    positive = vals > 0
    flips = np.nonzero(positive[:-1] != positive[1:])[0]
    roots = _roots(g, grid[flips], grid[flips + 1]) if len(flips) else np.array([])
    # positive stretches between consecutive sign changes
    cuts = np.concatenate(([lo], roots, [hi]))
    starts_positive = bool(positive[0])
    pieces = [(cuts[k], cuts[k + 1]) for k in range(len(cuts) - 1)
              if (k % 2 == 0) == starts_positive and cuts[k + 1] > cuts[k]]
    if not pieces:
        return 0.0, 0.0
    total = err = 0.0
    for left, right in pieces:
        inner = grid[(grid > left) & (grid < right)]
        # sparse interior breakpoints keep the initial pieces on the density scale
        stride = max(1, len(inner) // 64)
        res = gk_integrate(g, np.concatenate(([left], inner[::stride], [right])),
                           epsabs=QUAD_EPSABS / len(pieces))
        total += res.value
        err += res.error
    return max(total, 0.0), err


def audit_analytic(prior_i, prior_j, noise: LaplaceNoise, epsilon: float,
                   *, delta_target: float | None = None) -> AuditReport:
    """Exact achieved slack of the Laplace mechanism for two mixture priors.

    Raises:
      QuadratureError: the quadrature error estimate exceeds 1e-6.
    """
    if not (math.isfinite(epsilon) and epsilon >= 0):
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    prior_i, prior_j = as_mixture(prior_i), as_mixture(prior_j)
    lo, hi = audit_domain(prior_i, prior_j, noise.b)
    d_ij, e_ij = hockey_stick(prior_i, prior_j, noise.b, epsilon, lo, hi)
    d_ji, e_ji = hockey_stick(prior_j, prior_i, noise.b, epsilon, lo, hi)
    error = max(e_ij, e_ji)
    if error > QUAD_FAIL:
        raise QuadratureError(
            f"quadrature error estimate {error:.3g} exceeds {QUAD_FAIL:g} on [{lo:.6g}, {hi:.6g}] "
            f"(b={noise.b:.6g}, epsilon={epsilon:.6g})"
        )
    return AuditReport(
        epsilon=float(epsilon),
        delta_ij=d_ij,
        delta_ji=d_ji,
        method=AuditMethod.ANALYTIC_QUADRATURE,
        domain=(lo, hi),
        error_estimate=error,
        delta_target=delta_target,
    )


def _wilson_halfwidth(p: np.ndarray, n: int, z: float) -> np.ndarray:
    return z / (1.0 + z * z / n) * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))


def audit_empirical(samples_i: Sequence[float], samples_j: Sequence[float], epsilon: float,
                    bins="fd", *, z: float = 1.96,
                    delta_target: float | None = None) -> AuditReport:
    """Histogram estimate of the achieved slack between two sample sets.

    ``bins`` is anything ``numpy.histogram_bin_edges`` accepts; the default is the
    Freedman-Diaconis rule on the pooled sample. The error estimate combines
    per-bin Wilson half-widths (at ``z``) over the bins that can contribute.
    This is an estimate, not a certificate.
    """
    x_i = np.asarray(samples_i, dtype=float)
    x_j = np.asarray(samples_j, dtype=float)
    if x_i.size == 0 or x_j.size == 0:
        raise DataError("audit_empirical needs two non-empty sample sets")
    if not (np.all(np.isfinite(x_i)) and np.all(np.isfinite(x_j))):
        raise DataError("samples must be finite")
    if not (math.isfinite(epsilon) and epsilon >= 0):
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    pooled = np.concatenate((x_i, x_j))
    edges = np.histogram_bin_edges(pooled, bins=bins)
    p_i = np.histogram(x_i, bins=edges)[0] / x_i.size
    p_j = np.histogram(x_j, bins=edges)[0] / x_j.size
    h_i = _wilson_halfwidth(p_i, x_i.size, z)
    h_j = _wilson_halfwidth(p_j, x_j.size, z)
    scale = math.exp(epsilon)

    def one_way(pa, pb, ha, hb):
        est = float(np.maximum(pa - scale * pb, 0.0).sum())
        live = (pa + ha) - scale * np.maximum(pb - hb, 0.0) > 0
        return est, float(np.sqrt(np.sum(ha[live] ** 2 + (scale * hb[live]) ** 2)))

    d_ij, e_ij = one_way(p_i, p_j, h_i, h_j)
    d_ji, e_ji = one_way(p_j, p_i, h_j, h_i)
    return AuditReport(
        epsilon=float(epsilon),
        delta_ij=d_ij,
        delta_ji=d_ji,
        method=AuditMethod.EMPIRICAL_HISTOGRAM,
        domain=(float(edges[0]), float(edges[-1])),
        error_estimate=max(e_ij, e_ji),
        delta_target=delta_target,
        histogram=Histogram(edges, p_i, p_j),
    )
