"""Laplace scale rules for pufferfish privacy.

Every rule returns a :class:`CalibrationResult` whose ``b`` is the largest
per-pair requirement over all supplied adversary beliefs and discriminative
pairs, divided by epsilon:

* Gaussian priors: ``|dmu| + tau*(delta) |dsigma|``.
* Translation priors (equal spread, or mixtures sharing weights and spreads):
  the mean shift alone, with ``delta = 0``.
* Mixture priors: the same quantity averaged over the optimal component
  coupling from :func:`pufferfish.gmm_ot.solve_transport`.
* Summation queries over independent users, for presence and value secrets.

These are sufficient conditions, not minimal noise.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, Sequence

import numpy as np

from pufferfish.errors import DomainError, StructureError, UnresolvedSecretError
from pufferfish.gmm import Gmm1D, PriorBelief
from pufferfish.gmm_ot import TransportPlan, plan_cost_terms, solve_transport
from pufferfish.specfun import DEFAULT_TAU_METHOD, TauMethod, tau_star

RULE_GAUSSIAN = "gaussian"
RULE_TRANSLATION = "translation"
RULE_GMM = "gmm"
RULE_GMM_TRANSLATION = "gmm-translation"
RULE_SUM_PRESENCE = "sum-presence"
RULE_SUM_VALUE = "sum-value"

_STRUCT_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class DiscriminativePair:
    s_i: str
    s_j: str

    def __post_init__(self):
        if self.s_i == self.s_j:
            raise DomainError(f"a discriminative pair needs two distinct secrets, got {self.s_i!r} twice")

    def reversed(self) -> "DiscriminativePair":
        return DiscriminativePair(self.s_j, self.s_i)

    def as_list(self) -> list[str]:
        return [self.s_i, self.s_j]


@dataclasses.dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0
    tau_method: TauMethod = DEFAULT_TAU_METHOD

    def __post_init__(self):
        object.__setattr__(self, "tau_method", TauMethod.parse(self.tau_method))
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise DomainError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise DomainError(f"delta must lie in [0, 1), got {self.delta}")

    def tau(self) -> float:
        if self.delta == 0.0:
            raise DomainError("delta = 0 is only valid for translation priors")
        return tau_star(self.delta, self.tau_method)


@dataclasses.dataclass(frozen=True)
class PairTerm:
    """Requirement contributed by one (adversary, pair) before dividing by epsilon.

    ``dmu`` and ``dsigma`` are plan-weighted sums for mixtures.
    """

    adversary: str
    pair: DiscriminativePair
    dmu: float
    dsigma: float
    value: float
    plan: TransportPlan | None = None

    def to_dict(self) -> dict:
        out = {
            "adversary": self.adversary,
            "pair": self.pair.as_list(),
            "dmu": self.dmu,
            "dsigma": self.dsigma,
            "value": self.value,
        }
        if self.plan is not None:
            out["plan"] = self.plan.to_dict()
        return out


@dataclasses.dataclass(frozen=True)
class CalibrationResult:
    b: float
    rule: str
    epsilon: float
    delta: float
    tau: float | None
    tau_method: TauMethod | None
    breakdown: tuple[PairTerm, ...]
    argmax: PairTerm

    @property
    def maximand(self) -> float:
        return self.argmax.value

    @property
    def argmax_pair(self) -> DiscriminativePair:
        return self.argmax.pair

    @property
    def argmax_adversary(self) -> str:
        return self.argmax.adversary

    @property
    def plan(self) -> TransportPlan | None:
        return self.argmax.plan

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "b": self.b,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "tau": self.tau,
            "tau_method": None if self.tau_method is None else self.tau_method.value,
            "maximand": self.maximand,
            "argmax_adversary": self.argmax_adversary,
            "argmax_pair": self.argmax_pair.as_list(),
            "plan": None if self.plan is None else self.plan.to_dict(),
            "breakdown": [t.to_dict() for t in self.breakdown],
        }


@dataclasses.dataclass(frozen=True)
class UserPopulation:
    """Independent users each reporting a value with mean ``mu_k`` and spread ``sigma_k``."""

    users: tuple[tuple[float, float], ...]

    def __post_init__(self):
        users = tuple((float(m), float(s)) for m, s in self.users)
        object.__setattr__(self, "users", users)
        if any(s < 0 or not math.isfinite(s) or not math.isfinite(m) for m, s in users):
            raise DomainError("user means must be finite and sigmas finite and >= 0")

    @classmethod
    def identical(cls, mu: float, sigma: float, k: int) -> "UserPopulation":
        return cls(((mu, sigma),) * k)

    @property
    def K(self) -> int:
        return len(self.users)


def _finish(terms: list[PairTerm], rule: str, epsilon: float, delta: float,
            tau: float | None, method: TauMethod | None) -> CalibrationResult:
    if not terms:
        raise DomainError("calibration needs at least one belief and one discriminative pair")
    # first maximiser wins, so the argmax is stable under ties
    best = max(terms, key=lambda t: t.value)
    return CalibrationResult(
        b=best.value / epsilon,
        rule=rule,
        epsilon=epsilon,
        delta=delta,
        tau=tau,
        tau_method=method,
        breakdown=tuple(terms),
        argmax=best,
    )


def _resolve(belief: PriorBelief, pair: DiscriminativePair) -> tuple[Gmm1D, Gmm1D]:
    for s in (pair.s_i, pair.s_j):
        if s not in belief:
            raise UnresolvedSecretError(f"belief {belief.label!r} has no prior for secret {s!r}")
    return belief[pair.s_i], belief[pair.s_j]


def _iter_pairs(beliefs: Iterable[PriorBelief], pairs: Sequence[DiscriminativePair]):
    for belief in beliefs:
        for pair in pairs:
            prior_i, prior_j = _resolve(belief, pair)
            yield belief.label, pair, prior_i, prior_j


def _is_translation(prior_i: Gmm1D, prior_j: Gmm1D) -> bool:
    """Same weights and spreads component by component; only means may differ."""
    if prior_i.count != prior_j.count:
        return False
    return bool(
        np.allclose(prior_i.weights, prior_j.weights, rtol=0, atol=1e-9)
        and np.allclose(prior_i.sigmas, prior_j.sigmas, rtol=_STRUCT_TOL, atol=_STRUCT_TOL)
    )


def calibrate_gaussian(beliefs: Sequence[PriorBelief], pairs: Sequence[DiscriminativePair],
                       budget: PrivacyBudget) -> CalibrationResult:
    """Scale for single-Gaussian priors: ``max (|dmu| + tau*(delta) |dsigma|) / epsilon``.

    With every pair at equal spread the translation rule is used, which also
    admits ``delta = 0``; point masses reduce this to l1-sensitivity.
    """
    found = list(_iter_pairs(beliefs, pairs))
    for _, _, p_i, p_j in found:
        if p_i.count != 1 or p_j.count != 1:
            raise StructureError("calibrate_gaussian needs single-component priors; use calibrate_gmm")
    if all(p_i.components[0].sigma == p_j.components[0].sigma for _, _, p_i, p_j in found):
        return calibrate_translation(beliefs, pairs, budget.epsilon, delta=budget.delta)

    tau = budget.tau()
    terms = []
    for label, pair, p_i, p_j in found:
        g_i, g_j = p_i.components[0], p_j.components[0]
        dmu = abs(g_i.mu - g_j.mu)
        dsigma = abs(g_i.sigma - g_j.sigma)
        terms.append(PairTerm(label, pair, dmu, dsigma, dmu + tau * dsigma))
    return _finish(terms, RULE_GAUSSIAN, budget.epsilon, budget.delta, tau, budget.tau_method)


def calibrate_translation(beliefs: Sequence[PriorBelief], pairs: Sequence[DiscriminativePair],
                          epsilon: float, *, delta: float = 0.0) -> CalibrationResult:
    """Scale for priors that are shifts of one another: ``max sum_m alpha_m |dmu_m| / epsilon``.

    For single Gaussians (and point masses) this achieves ``delta = 0``. Mixtures
    must share component weights and spreads; there the weighted shift can fall
    short of ``max_m |dmu_m|``, and a light component moved far away leaks
    through the noise. Audit such results with :func:`pufferfish.audit.audit_analytic`.

    Raises:
      StructureError: some pair is not a translation.
    """
    PrivacyBudget(epsilon, delta)
    terms = []
    single = True
    for label, pair, p_i, p_j in _iter_pairs(beliefs, pairs):
        if not _is_translation(p_i, p_j):
            raise StructureError(
                f"priors for {pair.s_i!r}/{pair.s_j!r} under {label!r} are not translations; "
                "use calibrate_gaussian or calibrate_gmm"
            )
        single = single and p_i.count == 1
        shift = sum(a * abs(mi - mj) for a, mi, mj in zip(p_i.weights, p_i.mus, p_j.mus))
        terms.append(PairTerm(label, pair, float(shift), 0.0, float(shift)))
    rule = RULE_TRANSLATION if single else RULE_GMM_TRANSLATION
    return _finish(terms, rule, epsilon, delta, None, None)


def calibrate_gmm(beliefs: Sequence[PriorBelief], pairs: Sequence[DiscriminativePair],
                  budget: PrivacyBudget) -> CalibrationResult:
    """Scale for mixture priors.

    Each pair's requirement is ``sum_ml w_ml (|mu_m - mu_l| + tau*(delta) |sigma_m - sigma_l|)``
    under the optimal component plan ``w``. The plan behind the maximising
    pair is kept on the result.

    The weighted sum is not a guarantee when a light component sits far from
    everything it is coupled to; :func:`pufferfish.audit.audit_analytic` gives
    the achieved slack.
    """
    found = list(_iter_pairs(beliefs, pairs))
    if budget.delta == 0.0:
        if all(_is_translation(p_i, p_j) for _, _, p_i, p_j in found):
            return calibrate_translation(beliefs, pairs, budget.epsilon)
        raise DomainError("delta = 0 is only valid for translation priors")

    tau = budget.tau()
    terms = []
    for label, pair, p_i, p_j in found:
        plan = solve_transport(p_i, p_j)
        value = dmu = dsigma = 0.0
        for w, du, ds in plan_cost_terms(plan, p_i, p_j):
            value += w * (du + tau * ds)
            dmu += w * du
            dsigma += w * ds
        terms.append(PairTerm(label, pair, dmu, dsigma, value, plan))
    return _finish(terms, RULE_GMM, budget.epsilon, budget.delta, tau, budget.tau_method)


def _presence_spreads(sigmas: np.ndarray) -> np.ndarray:
    """``sqrt(R_k + s_k^2) - sqrt(R_k)`` where ``R_k`` is the variance of everyone else."""
    var = sigmas * sigmas
    before = np.concatenate(([0.0], np.cumsum(var)[:-1]))
    after = np.concatenate((np.cumsum(var[::-1])[::-1][1:], [0.0]))
    rest = before + after
    with_k = np.sqrt(rest + var)
    out = np.empty_like(var)
    nz = with_k > 0
    out[nz] = var[nz] / (with_k[nz] + np.sqrt(rest[nz]))
    out[~nz] = 0.0
    return out


def calibrate_sum_presence(pop: UserPopulation, budget: PrivacyBudget) -> CalibrationResult:
    """Hide each user's presence in a released sum: ``max_k (|mu_k| + dsigma_k tau*) / epsilon``."""
    if pop.K == 0:
        raise DomainError("population is empty")
    mus = np.array([m for m, _ in pop.users])
    spreads = _presence_spreads(np.array([s for _, s in pop.users]))
    if budget.delta == 0.0:
        if np.any(spreads > 0):
            raise DomainError("delta = 0 is only valid when no user changes the spread of the sum")
        tau = 0.0
    else:
        tau = budget.tau()
    terms = [
        PairTerm("rho", DiscriminativePair(f"Z_{k + 1} present", f"Z_{k + 1} absent"),
                 abs(float(mu)), float(ds), abs(float(mu)) + tau * float(ds))
        for k, (mu, ds) in enumerate(zip(mus, spreads))
    ]
    return _finish(terms, RULE_SUM_PRESENCE, budget.epsilon, budget.delta,
                   tau if budget.delta > 0 else None,
                   budget.tau_method if budget.delta > 0 else None)


def calibrate_sum_value(a: float, a_prime: float, epsilon: float) -> CalibrationResult:
    """Hide which of two values a user reported: ``|a - a'| / epsilon`` with ``delta = 0``."""
    PrivacyBudget(epsilon)
    dmu = abs(float(a) - float(a_prime))
    term = PairTerm("rho", DiscriminativePair(f"Z_k = a ({a!r})", f"Z_k = a' ({a_prime!r})"), dmu, 0.0, dmu)
    return _finish([term], RULE_SUM_VALUE, epsilon, 0.0, None, None)


def sum_bound_curve(mu: float, sigma: float, budget: PrivacyBudget,
                    k_max: int) -> list[tuple[int, float]]:
    """Presence bound for ``K = 1..k_max`` identical users of mean ``mu``, spread ``sigma``."""
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    tau = budget.tau()
    return [
        (k, (abs(mu) + (math.sqrt(k) - math.sqrt(k - 1)) * sigma * tau) / budget.epsilon)
        for k in range(1, k_max + 1)
    ]
