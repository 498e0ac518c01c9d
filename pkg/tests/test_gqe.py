import math
from fractions import Fraction as Fr
from math import comb

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from admissible_flow import gqe
from admissible_flow.admissible import (
    AdmissibleData,
    build_invariants,
    fano_parameters,
    fano_residual,
    koiso_data,
)
from admissible_flow.errors import HypothesisNotMet, NoGQEProfile, NotApplicable, NumericFailure
from admissible_flow.gqe import (
    GQEProfile,
    build_profile,
    canonical_profile,
    laplacian_of,
    mt,
    scalar_curvature,
    solve_k0,
    tz_value,
    verify_profile,
)
from admissible_flow.polycalc import Polynomial, definite_integral

from .conftest import DATASETS, THREE_ROOTS, profile_for

T = Polynomial.identity()


def mp_mt(P, k):
    mpmath.mp.dps = 40
    cs = [mpmath.mpf(c.numerator) / c.denominator for c in P.coeffs][::-1]
    return mpmath.quad(lambda t: mpmath.polyval(cs, t) * mpmath.exp(k * t), [-1, 1])


def koiso_mt0_closed(l, x):
    return -4 * sum(comb(l, 2 * i - 1) * x ** (2 * i - 1) / (2 * i + 1)
                    for i in range(1, (l + 1) // 2 + 1))


class TestMT:
    def test_round_is_zero(self):
        assert mt(build_invariants(AdmissibleData()), 0.0) == 0.0

    def test_koiso_half(self):
        assert mt(build_invariants(koiso_data(Fr(1, 2))), 0.0) == pytest.approx(-2 / 3, rel=1e-15)

    @pytest.mark.parametrize("x", [Fr(1, 10), Fr(1, 2), Fr(-3, 4)])
    def test_koiso_l1_formula(self, x):
        assert mt(build_invariants(koiso_data(x)), 0.0) == pytest.approx(-4 * float(x) / 3, rel=1e-15)

    def test_koiso_l2_dual_oracle(self):
        x = Fr(1, 10)
        inv = build_invariants(koiso_data(x, 2))
        exact = definite_integral(inv.P, -1, 1)
        assert exact == koiso_mt0_closed(2, x)
        assert abs(mt(inv, 0.0) - float(koiso_mt0_closed(2, x))) <= 1e-14 * abs(float(exact))

    @pytest.mark.parametrize("name", sorted(DATASETS))
    @pytest.mark.parametrize("k", [-7.0, -0.6, 0.02, 1.3])
    def test_against_mpmath(self, name, k):
        P = build_invariants(DATASETS[name]).P
        ref = float(mp_mt(P, k))
        # MT(0) = 0 for some of these, so small k sits near a cancellation
        assert mt(build_invariants(DATASETS[name]), k) == pytest.approx(ref, rel=1e-12, abs=1e-13)


class TestSolveK0:
    @pytest.mark.parametrize("name", sorted(DATASETS))
    def test_against_mpmath_root(self, name):
        inv = build_invariants(DATASETS[name])
        k0 = solve_k0(inv)
        assert abs(mt(inv, k0)) <= 1e-12 * max(1.0, abs(mt(inv, 0.0)))
        if definite_integral(inv.P, -1, 1) == 0:
            assert k0 == 0.0
        else:
            mpmath.mp.dps = 40
            ref = mpmath.findroot(lambda k: mp_mt(inv.P, k), (k0 - 0.5, k0 + 0.5), solver="anderson")
            assert k0 == pytest.approx(float(ref), abs=1e-12)

    def test_round_is_zero(self):
        assert solve_k0(build_invariants(AdmissibleData())) == 0.0

    def test_koiso_half_in_range(self):
        k0 = solve_k0(build_invariants(koiso_data(Fr(1, 2))))
        assert -10 < k0 < 0

    @pytest.mark.parametrize("data", [koiso_data(Fr(1, 2)), koiso_data(Fr(-1, 3), 2),
                                      AdmissibleData((), 1, 2)])
    def test_fano_consistency(self, data):
        inv = build_invariants(data)
        fp = fano_parameters(data)
        assert fano_residual(inv, fp).is_zero()
        alt = (Polynomial([fp.C]) - T.scale(2 * fp.lam)) * inv.p_c
        inv_alt = type(inv)(**{**inv.__dict__, "P": alt, "_cache": {}})
        assert solve_k0(inv_alt) == pytest.approx(solve_k0(inv), abs=1e-13)

    def test_hypothesis_not_met(self):
        with pytest.raises(HypothesisNotMet):
            solve_k0(build_invariants(THREE_ROOTS))

    def test_bracket_cap(self, monkeypatch):
        monkeypatch.setattr(gqe, "K_MAX", 0.25)
        with pytest.raises(NumericFailure):
            solve_k0(build_invariants(koiso_data(Fr(1, 2))))


class TestProfile:
    def test_round_profile(self):
        _, inv, prof = profile_for("round")
        z = np.linspace(-1, 1, 101)
        np.testing.assert_allclose(prof.F(z), 1 - z**2, atol=1e-15)
        np.testing.assert_allclose(prof.theta(z), 1 - z**2, atol=1e-15)

    @pytest.mark.parametrize("z", [-0.9, -0.2, 0.35, 0.97])
    @pytest.mark.parametrize("name", ["koiso_1_2", "fiber_1_2", "mixed"])
    def test_F_against_mpmath(self, name, z):
        _, inv, prof = profile_for(name)
        mpmath.mp.dps = 30
        cs = [mpmath.mpf(c.numerator) / c.denominator for c in inv.P.coeffs][::-1]
        k = prof.k0
        ref = mpmath.exp(-k * z) * mpmath.quad(lambda t: mpmath.polyval(cs, t) * mpmath.exp(k * t), [-1, z])
        assert prof.F(z) == pytest.approx(float(ref), rel=1e-12, abs=1e-15)

    def test_verify_passes(self, any_profile):
        _, _, prof = any_profile
        rep = verify_profile(prof)
        assert rep.passed, rep.failures()

    def test_wrong_k_fails_endpoint(self):
        _, inv, prof = profile_for("koiso_1_2")
        bad = GQEProfile(inv, prof.k0 + 0.1)
        rep = verify_profile(bad)
        assert not rep["F(+1)"][3]
        assert bad.F(1.0) == pytest.approx(math.exp(-bad.k0) * mt(inv, bad.k0), rel=1e-12)

    def test_F_at_one_is_weighted_mt(self, any_profile):
        _, inv, prof = any_profile
        assert abs(prof.F(1.0)) <= 1e-12 * max(1.0, abs(mt(inv, 0.0)))

    def test_no_profile_for_wrong_k(self):
        _, inv, prof = profile_for("koiso_1_2")
        with pytest.raises(NoGQEProfile):
            build_profile(inv, prof.k0 + 0.5)

    def test_integrated_ode(self, any_profile):
        _, inv, prof = any_profile
        k = prof.k0
        z = np.linspace(-1, 1, 2001)
        zc = z + 1e-30j
        lhs = np.imag(prof.F(zc) * np.exp(k * zc)) / 1e-30
        rhs = inv.P.evalf(z) * np.exp(k * z)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))

    def test_deflated_matches_naive(self, any_profile):
        _, _, prof = any_profile
        z = np.linspace(-1 + 1e-3, 1 - 1e-3, 4001)
        assert np.max(np.abs(prof.theta(z) - prof.theta_naive(z))) <= 1e-9

    def test_endpoint_values(self, any_profile):
        _, _, prof = any_profile
        ends = np.array([-1.0, 1.0])
        np.testing.assert_array_equal(prof.theta(ends), [0.0, 0.0])
        np.testing.assert_allclose(prof.dtheta(ends), [2.0, -2.0], atol=1e-12)
        np.testing.assert_allclose(prof.dtheta_complex_step(ends), [2.0, -2.0], atol=1e-10)


class TestLaplacian:
    def test_round_coordinate(self):
        _, _, prof = profile_for("round")
        z = np.linspace(-1, 1, 11)
        np.testing.assert_allclose(laplacian_of(prof, T)(z), z, atol=1e-14)

    def test_constant(self, any_profile):
        _, _, prof = any_profile
        z = np.linspace(-1, 1, 11)
        assert np.all(laplacian_of(prof, Polynomial([3]))(z) == 0)

    def test_endpoint_limits(self, any_profile):
        data, _, prof = any_profile
        lap = laplacian_of(prof, T)
        assert lap(-1.0) == pytest.approx(-(1 + data.d0), abs=1e-12)
        assert lap(1.0) == pytest.approx(1 + data.dinf, abs=1e-12)
        # the interior formula approaches the same limits
        assert lap(-1 + 1e-7) == pytest.approx(-(1 + data.d0), abs=1e-5)

    def test_callable_form(self):
        _, _, prof = profile_for("koiso_1_2")
        S = T**3 - T
        a = laplacian_of(prof, S)
        b = laplacian_of(prof, S.deriv(), S.deriv(2))
        z = np.linspace(-1, 1, 7)
        np.testing.assert_array_equal(a(z), b(z))


class TestScalarCurvature:
    def test_round_constant(self):
        _, inv, prof = profile_for("round")
        scal, avg = scalar_curvature(prof, inv)
        assert avg == 1.0
        np.testing.assert_allclose(scal(np.linspace(-1, 1, 21)), 1.0, atol=1e-14)

    def test_gqe_identity(self, any_profile):
        _, inv, prof = any_profile
        scal, avg = scalar_curvature(prof, inv)
        z = np.linspace(-0.99, 0.99, 41)
        # Scal - avg = -Laplacian(k0 z)
        expect = avg - prof.k0 * laplacian_of(prof, T)(z)
        np.testing.assert_allclose(scal(z), expect, atol=1e-9)

    def test_canonical_average_on_koiso(self):
        data = koiso_data(Fr(1, 2))
        inv = build_invariants(data)
        scal, avg = scalar_curvature(canonical_profile(inv), inv)
        z = np.linspace(-1, 1, 11)
        assert np.ptp(scal(z)) > 1e-3
        num = quad(lambda t: float(scal(t)) * float(inv.p_c(t)), -1, 1, epsabs=1e-13, epsrel=1e-12)[0]
        assert num / float(inv.alpha0) == pytest.approx(avg, abs=1e-10)


class TestTianZhu:
    def setup_method(self):
        self.data = koiso_data(Fr(1, 2))
        self.inv = build_invariants(self.data)
        self.fp = fano_parameters(self.data)

    def test_value_at_zero(self):
        assert tz_value(self.inv, self.fp, 0.0, 1.0) == pytest.approx(4 * math.pi / 3, rel=1e-12)

    def test_vanishes_at_k0(self):
        k0 = solve_k0(self.inv)
        assert abs(tz_value(self.inv, self.fp, k0, 1.0)) <= 1e-12

    def test_ratio_constant(self):
        r = [tz_value(self.inv, self.fp, k, 2.5) / mt(self.inv, k) for k in (-2.0, 0.0, 0.7)]
        assert r == pytest.approx([-2 * math.pi * 2.5] * 3, rel=1e-14)

    def test_not_applicable(self):
        data = AdmissibleData(((1, 1, Fr(1, 2)),))
        with pytest.raises(NotApplicable):
            tz_value(build_invariants(data), fano_parameters(data), 0.0, 1.0)
