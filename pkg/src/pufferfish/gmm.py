"""Univariate Gaussian mixtures: the adversary's prior belief for one secret.

Includes a small, deterministic EM fitter. Samples are sorted before fitting so
the result depends only on the multiset of values, the component count and the
seed, never on row order.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import special

from pufferfish.errors import (
    DataError,
    DegenerateFitError,
    DomainError,
    InsufficientDataError,
)
from pufferfish.gaussian_ot import Gaussian1D

_LOG_SQRT2PI = 0.5 * math.log(2.0 * math.pi)
WEIGHT_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class Gmm1D:
    """Weighted mixture of :class:`Gaussian1D` components.

    A single Gaussian is the one-component case.
    """

    weights: tuple[float, ...]
    components: tuple[Gaussian1D, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.weights) == 0:
            raise DomainError("a mixture needs at least one component")
        if len(self.weights) != len(self.components):
            raise DomainError("weights and components differ in length")
        if any(not math.isfinite(w) or w < 0 for w in self.weights):
            raise DomainError(f"mixture weights must be finite and >= 0, got {self.weights}")
        if abs(math.fsum(self.weights) - 1.0) > WEIGHT_TOL:
            raise DomainError(f"mixture weights must sum to 1, got {math.fsum(self.weights)!r}")

    @classmethod
    def single(cls, mu: float, sigma: float) -> "Gmm1D":
        return cls((1.0,), (Gaussian1D(float(mu), float(sigma)),))

    @classmethod
    def from_arrays(cls, weights, mus, sigmas) -> "Gmm1D":
        return cls(
            tuple(float(w) for w in weights),
            tuple(Gaussian1D(float(m), float(s)) for m, s in zip(mus, sigmas)),
        )

    @property
    def count(self) -> int:
        return len(self.components)

    @property
    def mus(self) -> np.ndarray:
        return np.array([c.mu for c in self.components])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([c.sigma for c in self.components])

    def mean(self) -> float:
        return float(np.dot(self.weights, self.mus))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        labels = rng.choice(self.count, size=n, p=np.asarray(self.weights) / sum(self.weights))
        return self.mus[labels] + self.sigmas[labels] * rng.standard_normal(n)

    def to_dict(self) -> dict:
        return {
            "components": [
                {"weight": w, "mu": c.mu, "sigma": c.sigma}
                for w, c in zip(self.weights, self.components)
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Gmm1D":
        try:
            comps = data["components"]
            return cls.from_arrays(
                [c["weight"] for c in comps], [c["mu"] for c in comps], [c["sigma"] for c in comps]
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed mixture JSON: {exc!r}") from exc


@dataclasses.dataclass(frozen=True)
class PriorBelief:
    """One adversary's model: secret label -> mixture for the published value."""

    label: str
    priors: Mapping[str, Gmm1D]

    def __getitem__(self, secret: str) -> Gmm1D:
        return self.priors[secret]

    def __contains__(self, secret: str) -> bool:
        return secret in self.priors

    def to_dict(self) -> dict:
        return {"label": self.label, "priors": {s: g.to_dict() for s, g in self.priors.items()}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "PriorBelief":
        if "priors" not in data:
            raise DataError("belief JSON needs a 'priors' object")
        return cls(
            label=str(data.get("label", "rho")),
            priors={str(s): Gmm1D.from_dict(g) for s, g in data["priors"].items()},
        )


def save_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_gmm(path) -> Gmm1D:
    with open(path, encoding="utf-8") as fh:
        return Gmm1D.from_dict(json.load(fh))


def _component_logpdf(x: np.ndarray, mus: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    z = (x[:, None] - mus[None, :]) / sigmas[None, :]
    return -0.5 * z * z - np.log(sigmas)[None, :] - _LOG_SQRT2PI


def gmm_pdf(model: Gmm1D, x):
    """Mixture density at ``x`` (scalar or array).

    Point-mass components have no density; they are valid only for calibration.
    """
    sigmas = model.sigmas
    if np.any(sigmas == 0):
        raise DomainError("gmm_pdf is undefined for point-mass components")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        logw = np.log(np.asarray(model.weights))
    out = np.exp(special.logsumexp(_component_logpdf(xs, model.mus, sigmas) + logw, axis=1))
    return float(out[0]) if np.ndim(x) == 0 else out


def sigma_floor(samples: np.ndarray) -> float:
    """Lower bound on component spread used by :func:`fit_em`.

    ``1e-6`` times the sample range; for constant data, ``1e-6 * max(1, |value|)``.
    """
    span = float(samples.max() - samples.min())
    if span > 0:
        return 1e-6 * span
    return 1e-6 * max(1.0, abs(float(samples[0])))


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    d2 = (x - centers[0]) ** 2
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(len(x), p=d2 / total)
        else:
            idx = rng.integers(len(x))
        centers.append(x[idx])
        d2 = np.minimum(d2, (x - x[idx]) ** 2)
    return np.sort(np.array(centers))


def _em_run(x, means, floor, tol, max_iter):
    n, k = len(x), len(means)
    mus = means.astype(float).copy()
    sigmas = np.full(k, max(float(x.std()), floor))
    weights = np.full(k, 1.0 / k)
    trace = []
    prev = -math.inf
    for _ in range(max_iter):
        with np.errstate(divide="ignore"):
            logw = np.log(weights)
        joint = _component_logpdf(x, mus, sigmas) + logw
        norm = special.logsumexp(joint, axis=1)
        ll = float(norm.sum())
        trace.append(ll)
        if math.isfinite(prev) and abs(ll - prev) <= tol * abs(prev):
            break
        prev = ll
        resp = np.exp(joint - norm[:, None])
        nk = resp.sum(axis=0)
        live = nk > 1e-12 * n
        weights = nk / n
        mus = np.where(live, (resp * x[:, None]).sum(axis=0) / np.where(live, nk, 1.0), mus)
        var = (resp * (x[:, None] - mus[None, :]) ** 2).sum(axis=0) / np.where(live, nk, 1.0)
        # the floored variance is still the constrained M-step maximiser
        sigmas = np.where(live, np.sqrt(np.maximum(var, floor * floor)), sigmas)
    return weights, mus, sigmas, trace


def fit_em(
    samples: Iterable[float],
    k: int,
    seed: int = 0,
    restarts: int = 5,
    *,
    tol: float = 1e-8,
    max_iter: int = 500,
    traces: list | None = None,
) -> Gmm1D:
    """Fit a ``k``-component mixture by EM with k-means++ seeding.

    The best of ``restarts`` runs by final log-likelihood is returned, with
    components ordered by mean. Every sigma is at least :func:`sigma_floor`.
    If ``traces`` is a list, each run's per-iteration log-likelihoods are
    appended to it.
    """
    x = np.sort(np.asarray(list(samples), dtype=float))
    if k < 1 or restarts < 1:
        raise DomainError("k and restarts must be positive")
    if not np.all(np.isfinite(x)):
        raise DataError("samples must be finite")
    if len(x) < 2 * k:
        raise InsufficientDataError(f"need at least {2 * k} samples for k={k}, got {len(x)}")
    if len(np.unique(x)) < k:
        raise DegenerateFitError(f"only {len(np.unique(x))} distinct values for k={k} components")

    floor = sigma_floor(x)
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        w, m, s, trace = _em_run(x, _kmeanspp(x, k, rng), floor, tol, max_iter)
        if traces is not None:
            traces.append(trace)
        if math.isfinite(trace[-1]) and (best is None or trace[-1] > best[0]):
            best = (trace[-1], w, m, s)
    if best is None:
        raise DegenerateFitError("every EM restart produced a non-finite likelihood")

    _, w, m, s = best
    order = np.lexsort((s, m))
    w = w[order] / w.sum()
    return Gmm1D.from_arrays(w, m[order], s[order])


def as_mixture(prior: Gmm1D | Gaussian1D | Sequence[float]) -> Gmm1D:
    """Coerce a Gaussian or ``(mu, sigma)`` pair to a one-component mixture."""
    if isinstance(prior, Gmm1D):
        return prior
    if isinstance(prior, Gaussian1D):
        return Gmm1D((1.0,), (prior,))
    mu, sigma = prior
    return Gmm1D.single(mu, sigma)
