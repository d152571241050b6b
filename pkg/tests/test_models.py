import json
import math

import numpy as np
import pytest

from krylovmetric import (
    LLParams,
    MblParams,
    MblRealization,
    SykParams,
    gamma_sq,
    ll_otoc,
    mbl_autocorrelation,
    mbl_ed_oracle,
    mbl_otoc_averaged,
    mbl_realization_otoc,
    sample_realization,
    syk_h_from_coupling,
    syk_otoc,
)
from krylovmetric.errors import ParameterError
from krylovmetric.models import (
    realization_from_json,
    realization_to_json,
    sample_realizations_otoc,
)


class TestSykH:
    def test_maximal_at_zero(self):
        assert syk_h_from_coupling(0.0) == 1.0

    def test_strong_coupling_dissipative(self):
        assert syk_h_from_coupling(100.0) < 0.02

    def test_unit_coupling(self):
        assert syk_h_from_coupling(1.0) == pytest.approx(1 - (math.sqrt(5) - 1) / 2, rel=1e-12)

    def test_monotone_decreasing(self):
        ks = np.linspace(0, 20, 200)
        hs = [syk_h_from_coupling(k) for k in ks]
        assert all(a > b for a, b in zip(hs, hs[1:]))
        assert all(0 <= h <= 1 for h in hs)


class TestSykOtoc:
    def test_equal_time_origin(self):
        p = SykParams(alpha=1.0, delta=0.25, h=0.75, c0=2.5)
        assert syk_otoc(p, 0.0, 0.0) == pytest.approx(2.5)

    def test_diagonal_pure_exponential(self):
        p = SykParams(alpha=1.3, delta=0.25, h=0.6, c0=1.0)
        for t in (0.5, 1.0, 2.0):
            assert syk_otoc(p, t, t) == pytest.approx(math.exp(2 * 1.3 * 0.6 * t), rel=1e-12)

    def test_off_diagonal_value(self):
        p = SykParams(alpha=1.0, delta=0.25, h=0.75, c0=1.0)
        ref = math.exp(0.75) / math.cosh(1.0) ** 1.25
        assert syk_otoc(p, 1.0, 0.0) == pytest.approx(ref, rel=1e-12)

    def test_lyapunov_by_finite_difference(self):
        p = SykParams(alpha=0.8, delta=0.25, h=0.45)
        t, eps = 1.2, 1e-6
        rate = (math.log(syk_otoc(p, t + eps, t + eps)) - math.log(syk_otoc(p, t - eps, t - eps))) / (2 * eps)
        assert rate == pytest.approx(p.lyapunov, abs=1e-6)


class TestLLOtoc:
    def test_zero_at_origin(self):
        p = LLParams(alpha=1.0, delta=0.7)
        assert abs(ll_otoc(p, 0.0, 0.0)) < 1e-15

    def test_zero_at_opposite_times(self):
        p = LLParams(alpha=1.0, delta=1.3)
        assert abs(ll_otoc(p, 0.9, -0.9)) < 1e-14

    def test_integer_delta_algebraic_form(self):
        # delta = 1, t1 = t2 = t: F = 1 - (1 - i s)^2 / (1 + i s)^2, s = sinh(2 a t)
        p = LLParams(alpha=1.0, delta=1.0)
        for t in (0.3, 0.8, 1.5):
            s = math.sinh(2 * t)
            ref = 1 - ((1 - 1j * s) / (1 + 1j * s)) ** 2
            assert ll_otoc(p, t, t) == pytest.approx(ref, rel=1e-12)

    def test_bracket_modulus_bound(self):
        # |bracket| = 1 for real times, hence |F| <= 2 |G(t12)|
        p = LLParams(alpha=1.0, delta=0.6)
        rng = np.random.default_rng(3)
        for _ in range(50):
            t1, t2 = rng.uniform(-2, 2, 2)
            g = math.cosh(t1 - t2) ** (-2 * 0.6)
            assert abs(ll_otoc(p, t1, t2)) <= 2 * g + 1e-12

    def test_branch_continuity_on_grid(self):
        # no principal-branch jumps for t1, t2 in [0, 5/alpha]
        p = LLParams(alpha=1.0, delta=0.37)
        ts = np.linspace(0.0, 5.0, 1000)
        vals = np.array([ll_otoc(p, t, 0.7 * t) for t in ts])
        jumps = np.abs(np.diff(vals))
        assert np.max(jumps) < 0.1


class TestGammaSq:
    def test_infinite_chain_closed_form(self):
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=None)
        assert gamma_sq(p) == pytest.approx(4 * (2 / (math.e - 1) + 1), rel=1e-12)
        assert gamma_sq(p) == pytest.approx(8.6558, abs=1e-4)

    def test_no_couplings(self):
        p = MblParams(j=1e-12, hfield=2.0, xi=1.0, nsites=10)
        assert gamma_sq(p) == pytest.approx(16.0, rel=1e-6)

    def test_finite_matches_infinite_for_large_n(self):
        pinf = MblParams(j=1.0, hfield=0.5, xi=1.0, nsites=None)
        pfin = MblParams(j=1.0, hfield=0.5, xi=1.0, nsites=400)
        assert gamma_sq(pfin) == pytest.approx(gamma_sq(pinf), rel=1e-10)
        assert gamma_sq(pfin, infinite=True) == gamma_sq(pinf)

    def test_autocorrelation(self):
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=50)
        assert mbl_autocorrelation(p, 0.0) == 1.0
        g2 = gamma_sq(p)
        assert mbl_autocorrelation(p, 0.4) == pytest.approx(math.exp(-0.5 * g2 * 0.16), rel=1e-12)


class TestMblAveraged:
    def test_vanishes_at_origin(self):
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=24)
        assert mbl_otoc_averaged(p, 0.0, 0.0, mode="exact_sum") == pytest.approx(0.0, abs=1e-14)

    def test_symmetry(self):
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=24)
        a = mbl_otoc_averaged(p, 0.9, 0.3, mode="exact_sum")
        assert mbl_otoc_averaged(p, 0.3, 0.9, mode="exact_sum") == pytest.approx(a, rel=1e-13)
        assert mbl_otoc_averaged(p, -0.9, -0.3, mode="exact_sum") == pytest.approx(a, rel=1e-13)

    def test_log_approx_rejects_nonpositive_product(self):
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=24)
        with pytest.raises(ParameterError):
            mbl_otoc_averaged(p, 1.0, -1.0, mode="log_approx")

    def test_log_approx_matches_exact_late_time(self):
        # 8 J^2 t1 t2 = 1e4: the dead-site count approximation is good to 5%
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=600)
        t = math.sqrt(1e4 / 8.0)
        a = mbl_otoc_averaged(p, t, t, mode="exact_sum")
        b = mbl_otoc_averaged(p, t, t, mode="log_approx")
        assert abs(a - b) / abs(a) < 0.05

    def test_exact_requires_finite_sites(self):
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=None)
        with pytest.raises(ParameterError):
            mbl_otoc_averaged(p, 1.0, 1.0, mode="exact_sum")


class TestRealizations:
    def test_frozen_dynamics(self):
        r = MblRealization(couplings=np.zeros((4, 4)), fields=np.zeros(4), nsites=4)
        for t in (0.0, 0.7, 2.0):
            assert mbl_realization_otoc(r, t, t) == pytest.approx(0.0, abs=1e-14)

    def test_vanishes_at_origin(self):
        rng = np.random.default_rng(5)
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=6)
        r = sample_realization(p, rng)
        assert mbl_realization_otoc(r, 0.0, 0.0) == pytest.approx(0.0, abs=1e-14)

    def test_two_site_hand_value(self):
        c = np.zeros((2, 2))
        c[0, 1] = c[1, 0] = 0.8
        r = MblRealization(couplings=c, fields=np.zeros(2), nsites=2)
        for t in (0.3, 1.1):
            ref = 2 - 2 * math.cos(4 * 0.8 * t)  # = 4 sin^2(2 J t)
            assert mbl_realization_otoc(r, t, t) == pytest.approx(ref, rel=1e-12)
            assert mbl_ed_oracle(r, t, t) == pytest.approx(ref, rel=1e-12)

    def test_single_site_field_only(self):
        c = np.zeros((1, 1))
        r = MblRealization(couplings=c, fields=np.array([0.9]), nsites=1)
        # one site: F(t,t) = 2 - 2 cos(2 h (2t)) ... the only probe is site 0
        for t in (0.4, 1.3):
            ref = 2 * math.cos(0.0) - 2 * math.cos(2 * 0.9 * 2 * t)
            assert mbl_realization_otoc(r, t, t) == pytest.approx(ref, rel=1e-12)
            assert mbl_ed_oracle(r, t, t) == pytest.approx(ref, rel=1e-12)

    def test_ed_size_limit(self):
        r = MblRealization(couplings=np.zeros((11, 11)), fields=np.zeros(11), nsites=11)
        with pytest.raises(ParameterError):
            mbl_ed_oracle(r, 0.5, 0.5)

    def test_realization_json_round_trip(self):
        rng = np.random.default_rng(11)
        p = MblParams(j=0.7, hfield=0.4, xi=1.5, nsites=5)
        r = sample_realization(p, rng)
        r2 = realization_from_json(realization_to_json(r))
        assert np.array_equal(r.couplings, r2.couplings)
        assert np.array_equal(r.fields, r2.fields)

    def test_ed_agreement_sample(self):
        rng = np.random.default_rng(23)
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=7)
        worst = 0.0
        for _ in range(10):
            r = sample_realization(p, rng)
            for t1, t2 in [(0.4, 0.4), (1.0, 0.2), (1.7, 1.7)]:
                worst = max(worst, abs(mbl_realization_otoc(r, t1, t2) - mbl_ed_oracle(r, t1, t2)))
        assert worst < 1e-12


class TestMonteCarlo:
    def test_matches_exact_within_three_sigma(self):
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=16)
        mean, se = sample_realizations_otoc(p, 0.7, 0.4, 20_000, seed=42)
        exact = mbl_otoc_averaged(p, 0.7, 0.4, mode="exact_sum")
        assert abs(mean - exact) <= 3 * se

    def test_reproducible_stream(self):
        p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=8)
        a = sample_realizations_otoc(p, 0.5, 0.5, 5000, seed=9)
        b = sample_realizations_otoc(p, 0.5, 0.5, 5000, seed=9)
        assert a == b


class TestParamValidation:
    def test_syk_h_range(self):
        with pytest.raises(ParameterError):
            SykParams(h=1.5)

    def test_mbl_positive(self):
        with pytest.raises(ParameterError):
            MblParams(j=-1.0)

    def test_realization_shape_checks(self):
        with pytest.raises(ParameterError):
            MblRealization(couplings=np.zeros((3, 2)), fields=np.zeros(3), nsites=3)
        bad = np.ones((3, 3))
        with pytest.raises(ParameterError):
            MblRealization(couplings=bad, fields=np.zeros(3), nsites=3)
