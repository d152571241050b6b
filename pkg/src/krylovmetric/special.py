"""High-precision scalar kernels shared by every other module.

Everything here is a pure function of its inputs plus an immutable
:class:`PrecisionContext`, so concurrent use is safe as long as callers do
not mutate the global mpmath context themselves (we only use the
``workprec`` scope guard).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .errors import ParameterError

__all__ = [
    "PrecisionContext",
    "DEFAULT_CTX",
    "ln_gamma",
    "pochhammer",
    "binomial",
    "binomial_series_coeff",
    "hyp3f2_terminating",
]


@dataclass(frozen=True)
class PrecisionContext:
    """Working mantissa precision (bits) and target relative accuracy.

    ``rel_tol`` must be representable with ~8 guard bits to spare at the
    requested precision, i.e. ``rel_tol >= 2**(-bits+8)``.
    """

    bits: int = 192
    rel_tol: float = 1e-10

    def __post_init__(self):
        if self.bits < 64:
            raise ParameterError(f"bits must be >= 64, got {self.bits}")
        if not self.rel_tol > 0:
            raise ParameterError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.rel_tol < 2.0 ** (-self.bits + 8):
            raise ParameterError(
                f"rel_tol={self.rel_tol} is below what {self.bits} bits can support"
            )

    def doubled(self) -> "PrecisionContext":
        return PrecisionContext(bits=2 * self.bits, rel_tol=self.rel_tol)


DEFAULT_CTX = PrecisionContext()


def ln_gamma(x, ctx: PrecisionContext = DEFAULT_CTX):
    """log Gamma(x) for x > 0, as an mpf accurate to ctx.rel_tol (relative).

    Backed by mpmath's loggamma (Stirling expansion with argument raising;
    its term count already scales with the active precision).
    """
    if not x > 0:
        raise ParameterError(f"ln_gamma requires x > 0, got {x}")
    with mp.workprec(ctx.bits):
        return mp.loggamma(mp.mpf(x))


def pochhammer(a, k: int, ctx: PrecisionContext = DEFAULT_CTX):
    """Rising factorial (a)_k = a (a+1) ... (a+k-1) as an mpf; (a)_0 = 1."""
    if k < 0:
        raise ParameterError(f"pochhammer requires k >= 0, got {k}")
    with mp.workprec(ctx.bits):
        r = mp.mpf(1)
        aa = mp.mpf(a)
        for i in range(k):
            r *= aa + i
        return r


def binomial(m: int, k: int) -> int:
    """Exact integer binomial coefficient C(m, k), 0 <= k <= m."""
    if m < 0 or k < 0:
        raise ParameterError(f"binomial requires nonnegative arguments, got ({m}, {k})")
    if k > m:
        raise ParameterError(f"binomial requires k <= m, got ({m}, {k})")
    return math.comb(m, k)


def binomial_series_coeff(a, j: int, ctx: PrecisionContext = DEFAULT_CTX):
    """Taylor coefficient of (1+y)^a at order j: prod_{i<j} (a-i) / j!.

    Evaluated as a finite product, so it is well defined (and analytic in a)
    even when a is a nonnegative integer and the coefficient vanishes.
    """
    if j < 0:
        raise ParameterError(f"order must be >= 0, got {j}")
    with mp.workprec(ctx.bits):
        r = mp.mpf(1)
        aa = mp.mpf(a)
        for i in range(j):
            r *= (aa - i) / (i + 1)
        return r


def hyp3f2_terminating(a1, a2, neg_n, b1, b2, ctx: PrecisionContext = DEFAULT_CTX):
    """Terminating 3F2(a1, a2, -n; b1, b2; 1) with -n = neg_n a nonpositive integer.

    The sum sum_{k<=n} (a1)_k (a2)_k (-n)_k / ((b1)_k (b2)_k k!) is built by
    forward recursion on the term ratio, never through Gamma-function
    quotients, so each term is exact to working precision even when a lower
    parameter sits close to a nonpositive integer.  If a lower Pochhammer
    vanishes inside the (still live) summation range this raises
    :class:`ParameterError`.
    """
    n = -neg_n
    if n != int(n) or n < 0:
        raise ParameterError(f"neg_n must be a nonpositive integer, got {neg_n}")
    n = int(n)
    with mp.workprec(ctx.bits):
        a1 = mp.mpf(a1)
        a2 = mp.mpf(a2)
        b1 = mp.mpf(b1)
        b2 = mp.mpf(b2)
        total = mp.mpf(1)
        term = mp.mpf(1)
        for k in range(n):
            num = (a1 + k) * (a2 + k) * (k - n)
            if num == 0:
                break  # an upper parameter terminated the series early
            den = (b1 + k) * (b2 + k) * (k + 1)
            if den == 0:
                raise ParameterError(
                    f"lower parameter Pochhammer vanishes at k={k + 1} "
                    f"inside the terminating range (b1={b1}, b2={b2}, n={n})"
                )
            term *= num / den
            total += term
        return total
