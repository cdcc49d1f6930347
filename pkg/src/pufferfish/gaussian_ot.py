"""Univariate Gaussian priors and the Monge map between them.

The optimal (squared-distance) transport between two normals on the real line
is the increasing affine map that matches their quantiles. Its cost is the
closed-form squared 2-Wasserstein distance ``(dmu)**2 + (dsigma)**2``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from pufferfish.errors import DegenerateSourceError, DomainError


@dataclasses.dataclass(frozen=True)
class Gaussian1D:
    """Normal distribution parameterised by mean and *standard deviation*.

    ``sigma == 0`` is a point mass at ``mu``.
    """

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError(f"Gaussian1D parameters must be finite, got ({self.mu}, {self.sigma})")
        if self.sigma < 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")

    @classmethod
    def from_variance(cls, mu: float, variance: float) -> "Gaussian1D":
        if variance < 0:
            raise DomainError(f"variance must be >= 0, got {variance}")
        return cls(float(mu), math.sqrt(variance))

    @property
    def variance(self) -> float:
        return self.sigma * self.sigma

    @property
    def is_point_mass(self) -> bool:
        return self.sigma == 0.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.mu + self.sigma * rng.standard_normal(n)


@dataclasses.dataclass(frozen=True)
class MongeMap:
    """Affine push-forward ``x -> intercept + slope * x`` from ``source`` to ``target``."""

    source: Gaussian1D
    target: Gaussian1D
    slope: float
    intercept: float

    def __call__(self, x):
        if np.ndim(x):
            x = np.asarray(x, dtype=float)
        return self.intercept + self.slope * x

    def then(self, other: "MongeMap") -> "MongeMap":
        """Composition ``other(self(x))``."""
        return MongeMap(
            source=self.source,
            target=other.target,
            slope=other.slope * self.slope,
            intercept=other.slope * self.intercept + other.intercept,
        )


def monge_map(src: Gaussian1D, dst: Gaussian1D) -> MongeMap:
    """Monge map ``T(x) = mu_dst + (sigma_dst / sigma_src) (x - mu_src)``.

    Raises:
      DegenerateSourceError: ``src`` is a point mass. Two point masses are a pure
        translation and are handled by the translation calibration rule instead.
    """
    if src.sigma == 0.0:
        raise DegenerateSourceError(
            "no Monge map from a point mass; use the translation rule for sigma_i = sigma_j = 0"
        )
    slope = dst.sigma / src.sigma
    return MongeMap(source=src, target=dst, slope=slope, intercept=dst.mu - src.mu * slope)


def w2_squared(a: Gaussian1D, b: Gaussian1D) -> float:
    """Squared 2-Wasserstein distance between two univariate normals."""
    dmu = a.mu - b.mu
    dsigma = a.sigma - b.sigma
    return dmu * dmu + dsigma * dsigma
