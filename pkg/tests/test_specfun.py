import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from pufferfish.errors import DomainError
from pufferfish.specfun import (
    TAU_GRID_POINTS,
    TAU_GRID_START,
    TAU_GRID_STOP,
    TauMethod,
    lambert_w0,
    q_inverse,
    q_tail,
    tau_star,
)

FIG2_TAU = 1.23737633763376  # back-solved from the published K=1 points


def q_oracle(t):
    """Gaussian upper tail by direct quadrature of the density."""
    val, _ = integrate.quad(lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi), t, np.inf,
                            epsabs=1e-15, epsrel=1e-13)
    return val


def bisect_q_inverse(p, lo=-40.0, hi=40.0):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if special.ndtr(-mid) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestQTail:
    def test_median(self):
        assert q_tail(0.0) == 0.5

    def test_deep_tail_is_finite(self):
        v = q_tail(40.0)
        assert 0.0 <= v < 1e-300
        assert not math.isnan(v)

    @pytest.mark.parametrize("t", [-3.0, -0.5, 0.3, 1.0, 1.959964, 3.5, 6.0, 8.0])
    def test_matches_quadrature(self, t):
        assert q_tail(t) == pytest.approx(q_oracle(t), rel=1e-10, abs=1e-16)

    def test_symmetry(self):
        for t in np.linspace(-6, 6, 25):
            assert q_tail(t) + q_tail(-t) == pytest.approx(1.0, abs=1e-15)

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            q_tail(float("nan"))


class TestQInverse:
    def test_median(self):
        assert q_inverse(0.5) == 0.0

    @pytest.mark.parametrize("p", [0.001, 0.15, 0.4])
    def test_round_trip(self, p):
        assert q_tail(q_inverse(p)) == pytest.approx(p, rel=1e-12)

    def test_known_quantile(self):
        assert q_inverse(0.025) == pytest.approx(1.95996, abs=1e-5)
        assert q_inverse(0.025) == pytest.approx(bisect_q_inverse(0.025), abs=1e-11)

    @given(st.floats(min_value=1e-300, max_value=0.5))
    @settings(max_examples=200, deadline=None)
    def test_against_bisection(self, p):
        t = q_inverse(p)
        assert t == pytest.approx(bisect_q_inverse(p), abs=1e-9 * max(1.0, abs(t)))

    @given(st.floats(min_value=0.5, max_value=1 - 1e-12))
    @settings(max_examples=200, deadline=None)
    def test_upper_half_by_symmetry(self, p):
        # near p = 1 the inverse is ill-conditioned in t, so check the tail residual instead
        t = q_inverse(p)
        assert t <= 0.0
        assert q_tail(-t) == pytest.approx(1.0 - p, rel=1e-9, abs=1e-16)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            q_inverse(p)


class TestLambertW0:
    def test_fixed_points(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-15)

    def test_residual_example(self):
        w = lambert_w0(1.645)
        assert w == pytest.approx(0.7652, abs=1e-4)
        assert abs(w * math.exp(w) - 1.645) <= 1e-12

    def test_residual_grid(self):
        for x in np.logspace(-12, 6, 400):
            w = lambert_w0(x)
            assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, x)

    def test_matches_scipy(self):
        for x in np.logspace(-8, 8, 60):
            assert lambert_w0(x) == pytest.approx(special.lambertw(x).real, rel=1e-13)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            lambert_w0(-0.1)


DELTAS = np.linspace(0.001, 0.999, 102)[1:-1]  # 100 interior points


class TestTauStar:
    def test_grid_reproduces_published_point(self):
        assert tau_star(0.3, TauMethod.LAMBERT_GRID) == pytest.approx(FIG2_TAU, abs=1e-9)

    def test_grid_is_a_lattice_point(self):
        lattice = np.linspace(TAU_GRID_START, TAU_GRID_STOP, TAU_GRID_POINTS)
        assert tau_star(0.3, "lambert-grid") == lattice[2473]

    def test_fixed_point_value(self):
        # the actual root of t^2 = 2 W0(t / (sqrt(2 pi) delta)) at delta = 0.3
        t = tau_star(0.3, TauMethod.LAMBERT_FIXED_POINT)
        assert t == pytest.approx(1.2371993986, abs=1e-9)
        assert t * t == pytest.approx(2 * lambert_w0(t / (math.sqrt(2 * math.pi) * 0.3)), abs=1e-13)

    def test_closed_form_value(self):
        expected = math.sqrt(special.lambertw(2 / (math.pi * 0.09)).real)
        assert tau_star(0.3, TauMethod.LAMBERT_CLOSED_FORM) == pytest.approx(expected, rel=1e-14)
        assert tau_star(0.3, "lambert-cf") >= tau_star(0.3, "lambert-fp") - 1e-12

    def test_exact_examples(self):
        assert tau_star(0.5, "exact") == pytest.approx(0.67449, abs=1e-5)
        assert tau_star(0.999, "exact") == pytest.approx(bisect_q_inverse(0.4995), abs=1e-10)
        assert tau_star(0.999, "exact") == pytest.approx(0.00125, abs=1e-5)

    def test_exact_defining_inequality(self):
        for d in DELTAS:
            assert q_tail(tau_star(d, "exact")) <= d / 2 + 1e-12

    def test_lambert_methods_bound_exact(self):
        for d in DELTAS:
            exact = tau_star(d, "exact")
            for m in ("lambert-fp", "lambert-cf", "lambert-grid"):
                assert exact <= tau_star(d, m)

    def test_fixed_point_equals_closed_form(self):
        for d in DELTAS:
            assert tau_star(d, "lambert-fp") == pytest.approx(tau_star(d, "lambert-cf"), abs=1e-12)

    def test_grid_is_first_lattice_point_past_the_root(self):
        step = (TAU_GRID_STOP - TAU_GRID_START) / (TAU_GRID_POINTS - 1)
        for d in DELTAS:
            g, root = tau_star(d, "lambert-grid"), tau_star(d, "lambert-cf")
            assert root - 1e-12 <= g < root + step + 1e-12

    @pytest.mark.parametrize("method", ["exact", "lambert-fp", "lambert-cf"])
    def test_strictly_decreasing(self, method):
        vals = [tau_star(d, method) for d in DELTAS]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_grid_nonincreasing(self):
        vals = [tau_star(d, "lambert-grid") for d in DELTAS]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_small_delta(self):
        for d in (1e-8, 1e-12):
            assert tau_star(d, "lambert-grid") > TAU_GRID_STOP
            assert tau_star(d, "exact") <= tau_star(d, "lambert-grid")

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.2, 1.3])
    def test_domain(self, delta):
        with pytest.raises(DomainError):
            tau_star(delta)

    def test_method_parsing(self):
        assert TauMethod.parse("lambert-fixed-point") is TauMethod.LAMBERT_FIXED_POINT
        assert TauMethod.parse("exact-q-inverse") is TauMethod.EXACT_Q_INVERSE
        assert TauMethod.parse("LAMBERT-CF") is TauMethod.LAMBERT_CLOSED_FORM
        with pytest.raises(DomainError):
            TauMethod.parse("newton")
