import math
import warnings

import mpmath as mp
import numpy as np
import pytest

from krylovmetric import (
    Conformal,
    Gaussian,
    MomentSeries,
    PrecisionContext,
    closed_form_chain,
    closed_form_wavefunction,
    conformal_moments,
    evolve_chain,
    gaussian_moments,
    krylov_complexity,
    lanczos_from_moments,
    wavefunction_profile,
)
from krylovmetric.errors import ParameterError, PrecisionExhaustedError, TruncationWarning
from krylovmetric.krylov_core import evolve_chain_rk4


class TestMomentSeries:
    def test_rejects_unnormalized(self, ctx):
        with pytest.raises(ParameterError):
            MomentSeries([2.0, 0.0, -1.0], ctx)

    def test_rejects_nonzero_odd(self, ctx):
        with pytest.raises(ParameterError):
            MomentSeries([1.0, 0.5, -1.0], ctx)

    def test_rejects_bad_sign_pattern(self, ctx):
        with pytest.raises(ParameterError):
            MomentSeries([1.0, 0.0, +1.0], ctx)

    def test_gaussian_double_factorial(self, ctx):
        mom = gaussian_moments(1.0, 9, ctx)
        expect = [1, 0, -1, 0, 3, 0, -15, 0, 105]
        for k, e in enumerate(expect):
            assert float(mom.mu[k]) == pytest.approx(e, rel=1e-25, abs=0)

    def test_conformal_moments_vs_sympy(self, ctx):
        import sympy

        t = sympy.symbols("t")
        series = sympy.series(sympy.cosh(t) ** sympy.Rational(-1, 2), t, 0, 13).removeO()
        mom = conformal_moments(1.0, 0.25, 13, ctx)
        for k in range(13):
            ref = float(series.coeff(t, k) * math.factorial(k))
            assert float(mom.mu[k]) == pytest.approx(ref, rel=1e-12, abs=1e-12)


class TestLanczosFromMoments:
    def test_conformal_quarter(self, ctx):
        mom = conformal_moments(1.0, 0.25, 41, ctx)
        chain = lanczos_from_moments(mom, 20, ctx)
        n = np.arange(1, 21)
        ref = np.sqrt(n * (n - 0.5))
        assert np.max(np.abs(chain.b / ref - 1)) < 1e-12
        assert chain.b[0] == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_gaussian(self, ctx):
        mom = gaussian_moments(1.0, 41, ctx)
        chain = lanczos_from_moments(mom, 20, ctx)
        assert np.max(np.abs(chain.b / np.sqrt(np.arange(1, 21)) - 1)) < 1e-12

    def test_b1_from_second_moment(self, ctx):
        mom = MomentSeries([1.0, 0.0, -1.0], ctx)
        chain = lanczos_from_moments(mom, 1, ctx)
        assert chain.b[0] == pytest.approx(1.0, rel=1e-14)

    def test_needs_enough_moments(self, ctx):
        mom = gaussian_moments(1.0, 11, ctx)
        with pytest.raises(ParameterError):
            lanczos_from_moments(mom, 6, ctx)

    def test_precision_exhaustion_reports_step(self, ctx):
        # moments rounded to ~1e-8 are inconsistent at depth; recursion must
        # detect the sign loss instead of emitting garbage
        exact = gaussian_moments(1.0, 81, ctx)
        dirty = [round(float(m), 8) if k % 2 == 0 else 0.0 for k, m in enumerate(exact.mu)]
        # rescale so mu_0 stays exactly 1
        mom = MomentSeries(dirty, ctx)
        with pytest.raises(PrecisionExhaustedError) as err:
            lanczos_from_moments(mom, 40, ctx)
        assert err.value.n is not None and err.value.n > 1
        assert err.value.suggested_bits > ctx.bits

    def test_agreement_window_forty(self, ctx):
        # both families reproduce the closed forms to 1e-8 out to n = 40
        for fam, mom in [
            (Conformal(1.0, 0.5), conformal_moments(1.0, 0.5, 81, ctx)),
            (Gaussian(2.0), gaussian_moments(2.0, 81, ctx)),
        ]:
            chain = lanczos_from_moments(mom, 40, ctx)
            ref = closed_form_chain(fam, 40)
            assert np.max(np.abs(chain.b / ref.b - 1)) < 1e-8


class TestClosedForms:
    def test_chain_values(self):
        assert closed_form_chain(Conformal(1.0, 0.25), 2).b[1] == pytest.approx(math.sqrt(3))
        assert closed_form_chain(Gaussian(2.0), 4).b[3] == pytest.approx(4.0)
        assert closed_form_chain(Conformal(1.0, 0.5), 1).b[0] == pytest.approx(1.0)

    def test_wavefunction_initial(self):
        fam = Conformal(1.3, 0.4)
        assert closed_form_wavefunction(fam, 0, 0.0) == 1.0
        assert closed_form_wavefunction(fam, 3, 0.0) == 0.0

    def test_gaussian_wavefunction_value(self):
        assert closed_form_wavefunction(Gaussian(1.0), 1, 1.0) == pytest.approx(
            math.exp(-0.5), rel=1e-14
        )

    def test_conformal_profile_normalized(self):
        fam = Conformal(1.0, 0.25)
        phi = wavefunction_profile(fam, 4000, 2.0)
        assert np.sum(phi**2) == pytest.approx(1.0, abs=1e-10)


class TestEvolution:
    def test_matches_closed_form(self, ctx):
        # wall leakage feeds back at the sqrt of the tail mass, so the wall
        # is sized for tail < 1e-16 to certify 1e-8 pointwise agreement
        fam = Conformal(1.0, 0.25)
        chain = closed_form_chain(fam, 8192)
        tight = PrecisionContext(bits=ctx.bits, rel_tol=1e-16)
        states = evolve_chain(chain, [0.0, 1.0, 2.0, 3.0], ctx=tight)
        for s in states:
            ref = wavefunction_profile(fam, len(s.phi) - 1, s.t)
            assert np.max(np.abs(s.phi - ref)) < 1e-8

    def test_initial_condition(self, ctx):
        chain = closed_form_chain(Gaussian(1.0), 128)
        s0 = evolve_chain(chain, [0.0], n_trunc=64, ctx=ctx)[0]
        assert s0.phi[0] == pytest.approx(1.0, abs=1e-14)
        assert np.max(np.abs(s0.phi[1:])) < 1e-14

    def test_unitarity_gaussian(self, ctx):
        chain = closed_form_chain(Gaussian(1.0), 256)
        states = evolve_chain(chain, [0.0, 1.0, 2.0], ctx=ctx)
        for s in states:
            assert abs(s.norm_sq() - 1.0) < 1e-10

    def test_truncation_warning_carries_time(self, ctx):
        chain = closed_form_chain(Conformal(1.0, 0.25), 32)
        with pytest.warns(TruncationWarning):
            evolve_chain(chain, [0.0, 2.0, 4.0], n_trunc=32, ctx=ctx)

    def test_grid_must_start_at_zero(self, ctx):
        chain = closed_form_chain(Gaussian(1.0), 32)
        with pytest.raises(ParameterError):
            evolve_chain(chain, [1.0, 2.0], n_trunc=16, ctx=ctx)

    def test_rk4_cross_check(self, ctx):
        # independent integrator agrees with the spectral propagator
        chain = closed_form_chain(Conformal(1.0, 0.25), 160)
        grid = [0.0, 0.5, 1.0]
        spect = evolve_chain(chain, grid, n_trunc=160, ctx=ctx)
        rk4 = evolve_chain_rk4(chain, grid, n_trunc=160, ctx=ctx)
        for a, b in zip(spect, rk4):
            assert np.max(np.abs(a.phi - b.phi)) < 1e-9


class TestComplexity:
    def test_zero_at_start(self, ctx):
        chain = closed_form_chain(Gaussian(1.0), 64)
        s = evolve_chain(chain, [0.0], n_trunc=64, ctx=ctx)[0]
        assert krylov_complexity(s) == pytest.approx(0.0, abs=1e-20)

    def test_gaussian_quadratic(self, ctx):
        fam = Gaussian(1.5)
        chain = closed_form_chain(fam, 512)
        states = evolve_chain(chain, [0.0, 0.7, 1.4, 2.0], ctx=ctx)
        for s in states[1:]:
            assert krylov_complexity(s) == pytest.approx(fam.complexity(s.t), rel=1e-6)

    def test_conformal_sinh_squared(self, ctx):
        fam = Conformal(1.0, 0.25)
        chain = closed_form_chain(fam, 4096)
        states = evolve_chain(chain, [0.0, 1.5, 3.0], ctx=ctx)
        for s in states[1:]:
            assert krylov_complexity(s) == pytest.approx(fam.complexity(s.t), rel=1e-6)

    def test_conformal_complexity_series_oracle(self):
        # independent check of the closed form 2 d sinh^2(a t): sum the
        # series sum n D_n^2 tanh^(2n) / cosh^(4d) in mpmath directly
        for (alpha, delta, t) in [(1.0, 0.25, 0.8), (0.7, 0.5, 1.3), (1.2, 1.0, 0.6)]:
            u = mp.mpf(alpha) * t
            y2 = mp.tanh(u) ** 2
            total = mp.mpf(0)
            dn2 = mp.mpf(1)
            twod = 2 * mp.mpf(delta)
            for n in range(1, 4000):
                dn2 *= (twod + n - 1) / n
                total += n * dn2 * y2**n
            total /= mp.cosh(u) ** (2 * twod)
            ref = 2 * delta * math.sinh(alpha * t) ** 2
            assert float(total) == pytest.approx(ref, rel=1e-10)

    def test_exponential_growth_rate(self, ctx):
        # the growth rate of log K over t in [3, 6]/alpha approaches 2 alpha
        fam = Conformal(0.9, 0.25)
        t1, t2 = 3.0 / 0.9, 6.0 / 0.9
        rate = (math.log(fam.complexity(t2)) - math.log(fam.complexity(t1))) / (t2 - t1)
        assert rate == pytest.approx(2 * 0.9, rel=0.02)

    def test_requires_normalization(self):
        from krylovmetric import Wavefunction

        bad = Wavefunction(t=0.0, phi=np.array([2.0, 0.0]), tail_mass=0.0)
        with pytest.raises(ParameterError):
            krylov_complexity(bad)


class TestPrecisionStability:
    def test_chain_stable_under_bit_doubling(self, ctx, ctx_double):
        mom_a = conformal_moments(1.0, 0.25, 41, ctx)
        mom_b = conformal_moments(1.0, 0.25, 41, ctx_double)
        a = lanczos_from_moments(mom_a, 20, ctx)
        b = lanczos_from_moments(mom_b, 20, ctx_double)
        assert np.max(np.abs(a.b / b.b - 1)) < ctx.rel_tol
