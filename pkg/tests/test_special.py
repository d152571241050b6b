import math

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from krylovmetric import PrecisionContext, binomial, hyp3f2_terminating, ln_gamma, pochhammer
from krylovmetric.errors import ParameterError


class TestPrecisionContext:
    def test_defaults_valid(self):
        c = PrecisionContext()
        assert c.bits >= 64
        assert c.rel_tol >= 2.0 ** (-c.bits + 8)

    def test_rejects_low_bits(self):
        with pytest.raises(ParameterError):
            PrecisionContext(bits=32)

    def test_rejects_unsupportable_tol(self):
        with pytest.raises(ParameterError):
            PrecisionContext(bits=64, rel_tol=1e-40)

    def test_rejects_nonpositive_tol(self):
        with pytest.raises(ParameterError):
            PrecisionContext(rel_tol=0.0)


class TestLnGamma:
    def test_at_one(self, ctx):
        assert float(ln_gamma(1, ctx)) == 0.0

    def test_at_half(self, ctx):
        assert float(ln_gamma(0.5, ctx)) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-15)

    def test_at_ten(self, ctx):
        assert float(ln_gamma(10, ctx)) == pytest.approx(math.log(362880), rel=1e-15)

    def test_domain_error(self, ctx):
        with pytest.raises(ParameterError):
            ln_gamma(0.0, ctx)
        with pytest.raises(ParameterError):
            ln_gamma(-2.5, ctx)

    def test_precision_doubling(self, ctx, ctx_double):
        a = ln_gamma(7.3, ctx)
        b = ln_gamma(7.3, ctx_double)
        assert abs(a - b) <= ctx.rel_tol * abs(b)


class TestBinomial:
    def test_examples(self):
        assert binomial(4, 2) == 6
        assert binomial(7, 0) == 1
        assert binomial(10, 5) == 252

    def test_range_error(self):
        with pytest.raises(ParameterError):
            binomial(3, 4)
        with pytest.raises(ParameterError):
            binomial(-1, 0)


class TestPochhammer:
    @given(
        a=st.floats(min_value=-5, max_value=5, allow_nan=False).filter(lambda x: abs(x) > 1e-3),
        k=st.integers(min_value=0, max_value=20),
    )
    @settings(max_examples=60, deadline=None)
    def test_recurrence(self, a, k):
        ctx = PrecisionContext()
        with mp.workprec(ctx.bits):
            lhs = pochhammer(a, k + 1, ctx)
            rhs = pochhammer(a, k, ctx) * (mp.mpf(a) + k)
            assert mp.almosteq(lhs, rhs, rel_eps=mp.mpf(2) ** (-ctx.bits + 16), abs_eps=0)

    def test_zero_order(self, ctx):
        assert pochhammer(3.7, 0, ctx) == 1


class TestHyp3f2Terminating:
    def test_n_zero_is_one(self, ctx):
        assert hyp3f2_terminating(2.3, -1.7, 0, 0.4, 5.5, ctx) == 1

    def test_zero_upper_parameter(self, ctx):
        assert hyp3f2_terminating(0.0, 2.2, -7, 1.3, 4.4, ctx) == 1

    def test_single_term_expansion(self, ctx):
        # sum to k=1 of (-h, -h, -1; 1, -h-2d): 1 + h^2/(h + 2d)
        h, d = 0.75, 0.25
        val = hyp3f2_terminating(-h, -h, -1, 1.0, -h - 2 * d, ctx)
        assert float(val) == pytest.approx(1 + h**2 / (h + 2 * d), rel=1e-14)
        # cross-check with a direct two-term loop
        direct = 1 + ((-h) * (-h) * (-1)) / (1.0 * (-h - 2 * d) * 1.0)
        assert float(val) == pytest.approx(direct, rel=1e-14)

    def test_against_mpmath_hyper(self, ctx):
        # independent oracle for a handful of parameter draws
        cases = [
            (0.3, 1.7, -5, 0.9, 2.4),
            (-0.75, 1.25, -8, 1.0, -9.25),
            (2.0, -0.5, -3, 0.7, 1.9),
        ]
        for a1, a2, negn, b1, b2 in cases:
            val = hyp3f2_terminating(a1, a2, negn, b1, b2, ctx)
            with mp.workprec(256):
                ref = mp.hyper([a1, a2, negn], [b1, b2], 1)
                assert mp.almosteq(val, ref, rel_eps=1e-20)

    @given(
        a1=st.floats(min_value=-3, max_value=3),
        a2=st.floats(min_value=-3, max_value=3),
        n=st.integers(min_value=0, max_value=12),
        b1=st.floats(min_value=0.1, max_value=4),
        b2=st.floats(min_value=0.1, max_value=4),
    )
    @settings(max_examples=40, deadline=None)
    def test_parameter_swap_symmetry(self, a1, a2, n, b1, b2):
        ctx = PrecisionContext()
        v1 = hyp3f2_terminating(a1, a2, -n, b1, b2, ctx)
        v2 = hyp3f2_terminating(a2, a1, -n, b1, b2, ctx)
        v3 = hyp3f2_terminating(a1, a2, -n, b2, b1, ctx)
        assert mp.almosteq(v1, v2, rel_eps=ctx.rel_tol, abs_eps=1e-250)
        assert mp.almosteq(v1, v3, rel_eps=ctx.rel_tol, abs_eps=1e-250)

    def test_lower_pochhammer_pole_raises(self, ctx):
        # b1 = -2 vanishes at k = 3 <= n while the numerator is still live
        with pytest.raises(ParameterError):
            hyp3f2_terminating(0.5, 0.5, -6, -2.0, 1.0, ctx)

    def test_early_termination_beats_pole(self, ctx):
        # upper parameter -1 kills the series at k=2, before b1 = -3 hits zero
        val = hyp3f2_terminating(-1.0, 0.5, -6, -3.0, 1.0, ctx)
        assert float(val) == pytest.approx(1 + (-1.0) * 0.5 * (-6) / (-3.0 * 1.0), rel=1e-14)

    def test_precision_doubling(self, ctx, ctx_double):
        a = hyp3f2_terminating(-0.75, 1.25, -30, 1.0, -31.25, ctx)
        b = hyp3f2_terminating(-0.75, 1.25, -30, 1.0, -31.25, ctx_double)
        assert mp.almosteq(a, b, rel_eps=ctx.rel_tol)
