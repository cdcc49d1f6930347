import csv
import math

import numpy as np
import pytest
from scipy import integrate

from oracles import brute_convolution, conv_cdf, conv_pdf, hockey_stick_oracle
from pufferfish.audit import (
    AuditMethod,
    LaplaceNoise,
    audit_analytic,
    audit_empirical,
    laplace_sample,
    noised_cdf,
    noised_density,
    write_histogram_csv,
)
from pufferfish.calibrate import (
    DiscriminativePair,
    PrivacyBudget,
    calibrate_gaussian,
    calibrate_gmm,
    calibrate_translation,
)
from pufferfish.errors import DataError, DomainError
from pufferfish.gmm import Gmm1D, PriorBelief

PAIR = DiscriminativePair("i", "j")


def random_mixture(rng, d):
    return Gmm1D.from_arrays(rng.dirichlet(np.ones(d)), rng.uniform(-20, 20, d), rng.uniform(0.1, 10, d))


class TestLaplace:
    def test_scale_validated(self):
        for b in (0.0, -1.0, float("nan")):
            with pytest.raises(DomainError):
                LaplaceNoise(b)

    def test_pdf_cdf(self):
        noise = LaplaceNoise(2.0)
        assert noise.pdf(0.0) == 0.25
        assert noise.cdf(0.0) == 0.5
        z = np.linspace(-10, 10, 41)
        assert noise.cdf(z) + noise.cdf(-z) == pytest.approx(np.ones_like(z))
        assert float(noise.cdf(1.3)) == pytest.approx(1 - 0.5 * math.exp(-0.65), rel=1e-15)
        val, _ = integrate.quad(noise.pdf, -1.0, 1.3, points=[0.0])
        assert float(noise.cdf(1.3) - noise.cdf(-1.0)) == pytest.approx(val, rel=1e-12)

    def test_empty_sample(self):
        assert laplace_sample(LaplaceNoise(1.0), 0, 0).size == 0

    def test_seed_determinism(self):
        noise = LaplaceNoise(1.5)
        assert np.array_equal(laplace_sample(noise, 42, 1000), laplace_sample(noise, 42, 1000))
        assert not np.array_equal(laplace_sample(noise, 42, 1000), laplace_sample(noise, 43, 1000))

    def test_variance(self):
        n, b = 1_000_000, 4.0
        z = laplace_sample(LaplaceNoise(b), 7, n)
        # Var(Z^2) = E Z^4 - (E Z^2)^2 = 24 b^4 - 4 b^4
        se = math.sqrt(20.0) * b * b / math.sqrt(n)
        assert abs(np.mean(z * z) - 32.0) < 5 * se
        assert abs(z.mean()) < 5 * math.sqrt(32.0 / n)


class TestNoisedDensity:
    def test_point_mass_is_laplace(self):
        noise = LaplaceNoise(1.3)
        y = np.linspace(-8, 8, 33)
        assert noised_density(Gmm1D.single(0, 0), noise, y) == pytest.approx(noise.pdf(y), rel=1e-15)

    def test_symmetric_unimodal(self):
        noise = LaplaceNoise(0.7)
        y = np.linspace(0, 10, 101)
        left = noised_density(Gmm1D.single(0, 2), noise, -y)
        right = noised_density(Gmm1D.single(0, 2), noise, y)
        assert left == pytest.approx(right, rel=1e-14)
        assert np.all(np.diff(right) < 0)

    def test_matches_brute_force_convolution(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            mu, sigma, b = rng.uniform(-10, 10), rng.uniform(0.1, 8), rng.uniform(0.1, 8)
            y = mu + rng.uniform(-4, 4) * (sigma + b)
            got = noised_density(Gmm1D.single(mu, sigma), LaplaceNoise(b), y)
            assert got == pytest.approx(brute_convolution(mu, sigma, b, y), abs=1e-8)

    def test_matches_log_space_formula(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            g = random_mixture(rng, rng.integers(1, 4))
            b = rng.uniform(0.05, 10)
            y = np.linspace(-60, 60, 97)
            params = (g.weights, g.mus, g.sigmas)
            assert noised_density(g, LaplaceNoise(b), y) == pytest.approx(conv_pdf(*params, b, y), rel=1e-10, abs=1e-300)
            assert noised_cdf(g, LaplaceNoise(b), y) == pytest.approx(conv_cdf(*params, b, y), abs=1e-13)

    def test_normalised(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            g = random_mixture(rng, rng.integers(1, 4))
            b = rng.uniform(0.1, 10)
            pad = 12 * g.sigmas.max() + 40 * b
            lo, hi = g.mus.min() - pad, g.mus.max() + pad
            val, _ = integrate.quad(lambda t: noised_density(g, LaplaceNoise(b), t), lo, hi,
                                    points=list(g.mus), limit=500, epsabs=1e-12)
            assert val == pytest.approx(1.0, abs=1e-7)

    def test_large_spread_to_scale_ratio(self):
        # sigma / b = 1e4 would overflow a naive exp(sigma^2 / 2b^2)
        d = noised_density(Gmm1D.single(0, 100.0), LaplaceNoise(0.01), np.array([0.0, 250.0]))
        assert np.all(np.isfinite(d))
        assert d[0] == pytest.approx(1 / (100 * math.sqrt(2 * math.pi)), rel=1e-6)

    def test_non_finite_points(self):
        with pytest.raises(DomainError):
            noised_density(Gmm1D.single(0, 1), LaplaceNoise(1), [0.0, np.inf])


class TestAnalyticAudit:
    def test_identical_priors(self):
        g = Gmm1D.from_arrays([0.3, 0.7], [-2, 5], [1, 3])
        for eps in (0.0, 0.5, 2.0):
            r = audit_analytic(g, g, LaplaceNoise(1.0), eps)
            assert r.delta_achieved == 0.0

    def test_total_variation_limit(self):
        r = audit_analytic(Gmm1D.single(-500, 1), Gmm1D.single(500, 1), LaplaceNoise(1.0), 0.0)
        assert r.delta_achieved == pytest.approx(1.0, abs=1e-9)

    def test_worked_example(self):
        budget = PrivacyBudget(1, 0.3)
        b = calibrate_gaussian([PriorBelief("r", {"i": Gmm1D.single(10, 2), "j": Gmm1D.single(12, 3)})],
                               [PAIR], budget).b
        r = audit_analytic(Gmm1D.single(10, 2), Gmm1D.single(12, 3), LaplaceNoise(b), 1.0, delta_target=0.3)
        assert r.delta_achieved <= 0.3
        assert r.satisfied is True
        # the Laplace tails dominate: the likelihood ratio never exceeds e at this scale
        assert r.delta_achieved == 0.0
        assert r.method is AuditMethod.ANALYTIC_QUADRATURE

    def test_regression_smaller_scale(self):
        r = audit_analytic(Gmm1D.single(10, 2), Gmm1D.single(12, 3), LaplaceNoise(1.0), 1.0)
        assert r.delta_ij == 0.0
        assert r.delta_ji == pytest.approx(0.13567954266715765, abs=1e-9)

    def test_matches_cdf_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            a, c = random_mixture(rng, rng.integers(1, 4)), random_mixture(rng, rng.integers(1, 4))
            b, eps = rng.uniform(0.3, 10), rng.uniform(0.0, 2.0)
            r = audit_analytic(a, c, LaplaceNoise(b), eps)
            assert r.delta_ij == pytest.approx(hockey_stick_oracle(a, c, b, eps), abs=1e-8)
            assert r.delta_ji == pytest.approx(hockey_stick_oracle(c, a, b, eps), abs=1e-8)
            assert r.error_estimate <= 1e-6

    def test_monotone_in_epsilon_and_scale(self):
        a = Gmm1D.from_arrays([0.4, 0.6], [0, 6], [1, 2])
        c = Gmm1D.from_arrays([0.5, 0.5], [2, 3], [0.5, 3])
        by_eps = [audit_analytic(a, c, LaplaceNoise(1.0), e).delta_achieved for e in np.linspace(0, 3, 13)]
        by_b = [audit_analytic(a, c, LaplaceNoise(b), 0.5).delta_achieved for b in np.linspace(0.2, 8, 13)]
        assert all(x >= y - 1e-9 for x, y in zip(by_eps, by_eps[1:]))
        assert all(x >= y - 1e-9 for x, y in zip(by_b, by_b[1:]))

    def test_shifted_laplace_is_pure(self):
        # point masses: b = |dmu| / eps is exactly epsilon-indistinguishable
        for eps in (0.1, 1.0, 3.0):
            b = calibrate_gaussian([PriorBelief("r", {"i": Gmm1D.single(0, 0), "j": Gmm1D.single(2, 0)})],
                                   [PAIR], PrivacyBudget(eps)).b
            r = audit_analytic(Gmm1D.single(0, 0), Gmm1D.single(2, 0), LaplaceNoise(b), eps)
            assert r.delta_achieved <= 1e-9

    def test_gaussian_translation_is_pure(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            mi, mj, s = rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(0.1, 10)
            eps = rng.uniform(0.1, 3)
            bel = PriorBelief("r", {"i": Gmm1D.single(mi, s), "j": Gmm1D.single(mj, s)})
            b = calibrate_translation([bel], [PAIR], eps).b
            assert audit_analytic(bel["i"], bel["j"], LaplaceNoise(b), eps).delta_achieved <= 1e-9

    def test_report_json(self):
        r = audit_analytic(Gmm1D.single(0, 1), Gmm1D.single(1, 1), LaplaceNoise(0.5), 1.0, delta_target=0.1)
        d = r.to_dict()
        assert d["method"] == "analytic-quadrature"
        assert d["delta_achieved"] == max(d["delta_ij"], d["delta_ji"])
        assert d["domain"][0] < 0 < 1 < d["domain"][1]

    def test_negative_epsilon(self):
        with pytest.raises(DomainError):
            audit_analytic(Gmm1D.single(0, 1), Gmm1D.single(1, 1), LaplaceNoise(1.0), -0.1)


@pytest.mark.xfail(strict=True, reason="mixture rule is not sufficient when a light component moves far")
@pytest.mark.parametrize("s", [0.0, 0.5])
def test_mixture_bound_counterexample(s):
    a = Gmm1D.from_arrays([0.1, 0.9], [100, 0], [s, s])
    c = Gmm1D.single(0, s)
    budget = PrivacyBudget(1.0, 0.01)
    r = calibrate_gmm([PriorBelief("r", {"i": a, "j": c})], [PAIR], budget)
    assert r.b == pytest.approx(10.0)
    assert audit_analytic(a, c, LaplaceNoise(r.b), 1.0).delta_achieved <= 0.01 + 1e-6


@pytest.mark.xfail(strict=True, reason="weighted shift is below the largest component shift")
def test_shared_structure_counterexample():
    a = Gmm1D.from_arrays([0.1, 0.9], [100, 0], [0.5, 0.5])
    c = Gmm1D.from_arrays([0.1, 0.9], [0, 0], [0.5, 0.5])
    r = calibrate_translation([PriorBelief("r", {"i": a, "j": c})], [PAIR], 1.0)
    assert r.b == pytest.approx(10.0)
    assert audit_analytic(a, c, LaplaceNoise(r.b), 1.0).delta_achieved <= 1e-9


class TestEmpiricalAudit:
    def test_identical_samples(self):
        x = np.random.default_rng(0).normal(0, 1, 5000)
        r = audit_empirical(x, x.copy(), 0.5)
        assert r.delta_ij == 0.0 and r.delta_ji == 0.0
        assert r.method is AuditMethod.EMPIRICAL_HISTOGRAM

    @pytest.mark.parametrize("b", [3.237376337633763, 1.0])
    def test_agrees_with_analytic(self, b):
        noise = LaplaceNoise(b)
        rng = np.random.default_rng(21)
        n = 100_000
        xi = rng.normal(10, 2, n) + laplace_sample(noise, 1, n)
        xj = rng.normal(12, 3, n) + laplace_sample(noise, 2, n)
        emp = audit_empirical(xi, xj, 1.0)
        ref = audit_analytic(Gmm1D.single(10, 2), Gmm1D.single(12, 3), noise, 1.0)
        assert abs(emp.delta_achieved - ref.delta_achieved) <= emp.error_estimate

    def test_empty_side(self):
        with pytest.raises(DataError):
            audit_empirical([], [1.0, 2.0], 1.0)

    def test_histogram_export(self, tmp_path):
        rng = np.random.default_rng(2)
        r = audit_empirical(rng.normal(0, 1, 1000), rng.normal(1, 1, 1000), 1.0, bins=20)
        path = tmp_path / "h.csv"
        write_histogram_csv(path, r.histogram)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bin_left", "bin_right", "p_i", "p_j"]
        assert len(rows) == 21
        assert sum(float(row[2]) for row in rows[1:]) == pytest.approx(1.0)
