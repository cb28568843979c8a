import math

import numpy as np
import pytest
from scipy import special

from stepplate.bessel import bessel, bessel_values, wronskian_check
from stepplate.errors import DomainError, RangeError

DERIVATIVES = {
    "J": (special.jv, special.jvp),
    "Y": (special.yv, special.yvp),
    "I": (special.iv, special.ivp),
    "K": (special.kv, special.kvp),
}


class TestValues:

    @pytest.mark.parametrize("kind", ["J", "Y", "I", "K"])
    @pytest.mark.parametrize("p", [0, 1, 4])
    def test_matches_scipy(self, kind, p):
        x = np.array([0.3, 2.5, 11.0])
        value, derivative = bessel_values(kind, p, x)
        f, df = DERIVATIVES[kind]
        np.testing.assert_allclose(value, f(p, x), rtol=1e-12)
        np.testing.assert_allclose(derivative, df(p, x), rtol=1e-9, atol=1e-13)

    def test_derivative_at_origin(self):
        assert bessel("J", 0, 0.0).derivative == 0.0
        assert bessel("J", 1, 0.0).derivative == pytest.approx(0.5)
        assert bessel("I", 1, 0.0).derivative == pytest.approx(0.5)
        assert bessel("J", 2, 0.0).derivative == pytest.approx(0.0)


class TestScaling:

    def test_large_argument_is_scaled(self):
        ev = bessel("I", 2, 80.0)
        assert ev.scaled
        assert ev.log_scale == 80.0
        assert ev.value * math.exp(ev.log_scale) == pytest.approx(special.iv(2, 80.0), rel=1e-12)

    def test_second_kind_scaled(self):
        ev = bessel("K", 0, 60.0)
        assert ev.log_scale == -60.0
        assert ev.value * math.exp(ev.log_scale) == pytest.approx(special.kv(0, 60.0), rel=1e-12)

    def test_small_argument_unscaled(self):
        ev = bessel("K", 1, 2.0)
        assert not ev.scaled
        assert ev.log_scale == 0.0

    def test_oscillatory_kinds_ignore_scaling(self):
        ev = bessel("J", 3, 80.0, scaled=True)
        assert not ev.scaled
        assert ev.value == pytest.approx(special.jv(3, 80.0))

    def test_unscaled_overflow(self):
        with pytest.raises(RangeError, match="scaled"):
            bessel("I", 0, 800.0, scaled=False)


class TestDomain:

    @pytest.mark.parametrize("kind", ["Y", "K"])
    def test_second_kind_singular_at_origin(self, kind):
        with pytest.raises(DomainError):
            bessel(kind, 0, 0.0)

    def test_negative_argument(self):
        with pytest.raises(DomainError):
            bessel("J", 0, -1.0)

    @pytest.mark.parametrize("p", [-1, 1.5, True])
    def test_order_must_be_natural(self, p):
        with pytest.raises(DomainError):
            bessel("J", p, 1.0)

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            bessel("H", 0, 1.0)


class TestWronskian:

    @pytest.mark.parametrize("p", [0, 1, 3])
    @pytest.mark.parametrize("x", [0.5, 5.0, 60.0])
    def test_identities_hold(self, p, x):
        first, second = wronskian_check(p, x)
        assert first < 1e-12 * max(1.0, 1.0 / x)
        assert second < 1e-12 * max(1.0, 1.0 / x)

    def test_needs_positive_argument(self):
        with pytest.raises(DomainError):
            wronskian_check(0, 0.0)


class TestIdentities:

    @pytest.mark.parametrize("p", [0, 1, 5, 12, 20, 30])
    @pytest.mark.parametrize("x", [0.01, 0.1, 1.0, 10.0, 100.0, 500.0])
    def test_wronskians_over_working_range(self, p, x):
        first, second = wronskian_check(p, x)
        assert first <= 1e-10 * 2.0 / (math.pi * x)
        assert second <= 1e-10 / x

    @pytest.mark.parametrize("kind", ["J", "Y", "I", "K"])
    @pytest.mark.parametrize("p", [0, 1, 4])
    @pytest.mark.parametrize("x", [0.5, 3.0, 20.0])
    def test_differential_equation(self, kind, p, x):
        # x^2 C'' + x C' + (x^2 - p^2) C = 0 for J, Y; (-x^2 - p^2) for I, K
        h = 1e-5 * x
        value, derivative = bessel_values(kind, p, x)
        _, ahead = bessel_values(kind, p, x + h)
        _, behind = bessel_values(kind, p, x - h)
        second = (ahead - behind) / (2.0 * h)
        sign = 1.0 if kind in ("J", "Y") else -1.0
        terms = np.array([x**2 * second, x * derivative, sign * x**2 * value, -p**2 * value], dtype=float)
        assert abs(terms.sum()) <= 1e-8 * np.max(np.abs(terms))

    @pytest.mark.parametrize("kind", ["J", "Y", "I", "K"])
    @pytest.mark.parametrize("p", [1, 3, 8])
    def test_neighbouring_orders(self, kind, p):
        x = np.array([0.7, 4.0, 25.0])
        below, _ = bessel_values(kind, p - 1, x)
        value, derivative = bessel_values(kind, p, x)
        above, _ = bessel_values(kind, p + 1, x)
        ratio = 2.0 * p / x * value
        if kind in ("J", "Y"):
            sums = (below + above, ratio)
            halves = (derivative, 0.5 * (below - above))
        elif kind == "I":
            sums = (below - above, ratio)
            halves = (derivative, 0.5 * (below + above))
        else:
            sums = (below - above, -ratio)
            halves = (derivative, -0.5 * (below + above))
        scale = np.abs(below) + np.abs(above) + np.abs(ratio)
        assert np.all(np.abs(sums[0] - sums[1]) <= 1e-10 * scale)
        assert np.all(np.abs(halves[0] - halves[1]) <= 1e-10 * scale)
