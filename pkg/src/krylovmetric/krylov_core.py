"""Lanczos chains, operator wavefunctions and Krylov complexity.

The two solvable families used throughout the package are

* ``Conformal(alpha, delta)``: autocorrelation cosh(alpha t)^(-2 delta),
  b_n = alpha sqrt(n (n + 2 delta - 1)),
  phi_n(t) = D_n tanh(alpha t)^n / cosh(alpha t)^(2 delta)
  with D_n = sqrt(Gamma(2 delta + n) / (Gamma(n+1) Gamma(2 delta))).

* ``Gaussian(gamma)``: autocorrelation exp(-gamma^2 t^2 / 2),
  b_n = gamma sqrt(n), phi_n(t) = (gamma t)^n exp(-gamma^2 t^2 / 2) / sqrt(n!).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import mpmath as mp
import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .errors import (
    ParameterError,
    PrecisionExhaustedError,
    TruncationWarning,
)
from .special import DEFAULT_CTX, PrecisionContext

__all__ = [
    "Conformal",
    "Gaussian",
    "Family",
    "MomentSeries",
    "LanczosChain",
    "Wavefunction",
    "conformal_moments",
    "gaussian_moments",
    "lanczos_from_moments",
    "closed_form_chain",
    "closed_form_wavefunction",
    "wavefunction_profile",
    "evolve_chain",
    "evolve_chain_rk4",
    "krylov_complexity",
]


# ----------------------------------------------------------------------
# Families
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Conformal:
    """Power-law-in-cosh family with Krylov exponent ``alpha`` and dimension ``delta``."""

    alpha: float = 1.0
    delta: float = 0.25

    def __post_init__(self):
        if self.alpha <= 0 or self.delta <= 0:
            raise ParameterError("Conformal family requires alpha > 0 and delta > 0")

    def b(self, n):
        n = np.asarray(n, dtype=float)
        return self.alpha * np.sqrt(n * (n + 2 * self.delta - 1))

    def log_d_factor(self, n):
        """log D_n; D_n normalizes tanh^n in the closed-form wavefunction."""
        twod = 2 * self.delta
        n = np.asarray(n, dtype=float)
        return 0.5 * (gammaln(twod + n) - gammaln(n + 1) - gammaln(twod))

    def d_factor(self, n):
        return np.exp(self.log_d_factor(n))

    def phi(self, n, t):
        if t == 0:
            n_arr = np.asarray(n)
            return np.where(n_arr == 0, 1.0, 0.0) if n_arr.ndim else (1.0 if n == 0 else 0.0)
        u = self.alpha * t
        n_arr = np.asarray(n, dtype=float)
        logv = self.log_d_factor(n_arr) + n_arr * np.log(np.tanh(u)) - 2 * self.delta * np.log(np.cosh(u))
        return np.exp(logv)

    def complexity(self, t):
        """Closed-form K(t) = 2 delta sinh(alpha t)^2."""
        return 2 * self.delta * np.sinh(self.alpha * t) ** 2


@dataclass(frozen=True)
class Gaussian:
    """Gaussian-autocorrelation family with width ``gamma``."""

    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError("Gaussian family requires gamma > 0")

    def b(self, n):
        n = np.asarray(n, dtype=float)
        return self.gamma * np.sqrt(n)

    def log_d_factor(self, n):
        # phi_n(t) = D_n * (gamma t)^n * exp(-...) with D_n = 1/sqrt(n!)
        n = np.asarray(n, dtype=float)
        return -0.5 * gammaln(n + 1)

    def d_factor(self, n):
        return np.exp(self.log_d_factor(n))

    def phi(self, n, t):
        if t == 0:
            n_arr = np.asarray(n)
            return np.where(n_arr == 0, 1.0, 0.0) if n_arr.ndim else (1.0 if n == 0 else 0.0)
        n_arr = np.asarray(n, dtype=float)
        x = self.gamma * t
        logv = n_arr * np.log(x) - 0.5 * gammaln(n_arr + 1) - 0.5 * x * x
        return np.exp(logv)

    def complexity(self, t):
        """Closed-form K(t) = gamma^2 t^2."""
        return (self.gamma * t) ** 2


Family = Union[Conformal, Gaussian]


# ----------------------------------------------------------------------
# Moments
# ----------------------------------------------------------------------

class MomentSeries:
    """Derivatives mu_k = d^k G / dt^k (0) of a normalized autocorrelation.

    Entries are stored as mpf.  Validation enforces mu_0 = 1, vanishing odd
    moments (a nonzero odd moment signals a miscomputed input series and is
    rejected), and the alternating sign pattern sign(mu_2k) = (-1)^k of a
    positive-definite operator norm.
    """

    def __init__(self, mu: Sequence, ctx: PrecisionContext = DEFAULT_CTX):
        with mp.workprec(ctx.bits):
            self.mu = tuple(mp.mpf(m) if not isinstance(m, mp.mpf) else m for m in mu)
        self.ctx = ctx
        if not self.mu:
            raise ParameterError("empty moment sequence")
        if self.mu[0] != 1:
            raise ParameterError(f"mu[0] must be 1 (normalized operator), got {self.mu[0]}")
        for k, m in enumerate(self.mu):
            if k % 2 == 1 and m != 0:
                raise ParameterError(f"odd moment mu[{k}] = {m} must vanish")
            if k % 2 == 0 and m != 0 and mp.sign(m) != (-1) ** (k // 2):
                raise ParameterError(
                    f"mu[{k}] = {m} violates the sign pattern sign(mu_2k) = (-1)^k"
                )

    @property
    def count(self) -> int:
        return len(self.mu)

    def __len__(self):
        return len(self.mu)


def conformal_moments(alpha, delta, count: int, ctx: PrecisionContext = DEFAULT_CTX) -> MomentSeries:
    """Moments of cosh(alpha t)^(-2 delta) up to order count-1.

    Series coefficients g_k of G in u = alpha t solve the first-order
    recurrence implied by cosh(u) G'(u) = -2 delta sinh(u) G(u), which is
    stable in forward direction.
    """
    if count < 1:
        raise ParameterError("count must be >= 1")
    with mp.workprec(ctx.bits):
        twod = 2 * mp.mpf(delta)
        a = mp.mpf(alpha)
        inv_fact = [mp.mpf(1)]
        for j in range(1, count + 1):
            inv_fact.append(inv_fact[-1] / j)
        g = [mp.mpf(1)] + [mp.mpf(0)] * (count - 1)
        for bign in range(count - 1):
            acc = mp.mpf(0)
            for j in range(1, bign + 1, 2):
                acc -= twod * inv_fact[j] * g[bign - j]
            for j in range(2, bign + 1, 2):
                acc -= inv_fact[j] * (bign - j + 1) * g[bign - j + 1]
            g[bign + 1] = acc / (bign + 1)
        mu = []
        fact = mp.mpf(1)
        apow = mp.mpf(1)
        for k in range(count):
            if k > 0:
                fact *= k
                apow *= a
            mu.append(g[k] * fact * apow)
        return MomentSeries(mu, ctx=ctx)


def gaussian_moments(gamma, count: int, ctx: PrecisionContext = DEFAULT_CTX) -> MomentSeries:
    """Moments of exp(-gamma^2 t^2 / 2): mu_2k = (-1)^k (2k-1)!! gamma^(2k)."""
    if count < 1:
        raise ParameterError("count must be >= 1")
    with mp.workprec(ctx.bits):
        gg = mp.mpf(gamma)
        mu = [mp.mpf(0)] * count
        mu[0] = mp.mpf(1)
        val = mp.mpf(1)
        for k in range(1, (count - 1) // 2 + 1):
            val *= -(2 * k - 1) * gg * gg
            if 2 * k < count:
                mu[2 * k] = val
        return MomentSeries(mu, ctx=ctx)


# ----------------------------------------------------------------------
# Chains
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LanczosChain:
    """Positive hopping amplitudes b_1..b_N with a provenance tag.

    ``origin`` is either a family instance (closed form, extendable to any
    order) or the string ``"moments"``.
    """

    b: np.ndarray
    origin: Union[Family, str]

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "b", b)
        if b.ndim != 1 or len(b) < 1:
            raise ParameterError("chain needs at least one coefficient")
        if not np.all(b > 0):
            raise ParameterError("all Lanczos coefficients must be positive")

    @property
    def n_max(self) -> int:
        return len(self.b)

    def extended(self, n_max: int) -> "LanczosChain":
        """Same chain with at least n_max coefficients (closed forms only)."""
        if n_max <= self.n_max:
            return self
        if isinstance(self.origin, str):
            raise ParameterError(
                f"moment-built chain holds {self.n_max} coefficients; cannot extend to {n_max}"
            )
        return closed_form_chain(self.origin, n_max)


def closed_form_chain(family: Family, n_max: int) -> LanczosChain:
    """Exact closed-form chain for a family."""
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    n = np.arange(1, n_max + 1)
    return LanczosChain(b=family.b(n), origin=family)


def lanczos_from_moments(
    moments: MomentSeries,
    n_max: int,
    ctx: Optional[PrecisionContext] = None,
) -> LanczosChain:
    """Run the Krylov-basis recursion on a moment sequence.

    Basis vectors are kept as coefficient vectors over the monomial basis
    {L^k |O>}; with an anti-Hermitian Liouvillian the Gram matrix is
    <L^j O | L^k O> = (-1)^j mu_{j+k}.  The recursion
    |A_n> = L|O_{n-1}> + b_{n-1} |O_{n-2}>, b_n = <A_n|A_n>^(1/2)
    is run verbatim in software arbitrary precision.  The default bit
    budget grows linearly with n_max (the recursion loses a roughly
    constant number of bits per step).
    """
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    if moments.count < 2 * n_max + 1:
        raise ParameterError(
            f"need at least {2 * n_max + 1} moments for n_max={n_max}, got {moments.count}"
        )
    bits = max(ctx.bits if ctx is not None else 0, 128 + 16 * n_max)
    with mp.workprec(bits):
        mu = [mp.mpf(m) for m in moments.mu]

        def inner(u, v):
            # <sum_j u_j L^j O | sum_k v_k L^k O>
            acc = mp.mpf(0)
            for j, uj in enumerate(u):
                if uj == 0:
                    continue
                sj = -uj if j % 2 else uj
                for k, vk in enumerate(v):
                    if vk == 0:
                        continue
                    acc += sj * vk * mu[j + k]
            return acc

        def apply_l(u):
            return [mp.mpf(0)] + list(u)

        b = []
        o_prev = [mp.mpf(1)]          # |O_0>
        o_prev2: Optional[list] = None
        for n in range(1, n_max + 1):
            a = apply_l(o_prev)
            if n >= 2:
                bl = b[-1]
                for k, c in enumerate(o_prev2):
                    a[k] += bl * c
            norm2 = inner(a, a)
            if norm2 <= 0 or mp.fabs(norm2) < mp.mpf(2) ** (-(bits - 16)) * _gram_scale(mu, n):
                raise PrecisionExhaustedError(
                    f"lost all significant bits at step n={n}; "
                    f"retry with roughly {2 * bits} bits",
                    n=n,
                    suggested_bits=2 * bits,
                )
            bn = mp.sqrt(norm2)
            b.append(bn)
            o_prev2 = o_prev
            o_prev = [c / bn for c in a]
        b_float = np.array([float(x) for x in b])
    return LanczosChain(b=b_float, origin="moments")


def _gram_scale(mu, n):
    # crude magnitude scale of the step-n Gram entries, for the zero test
    return max(mp.fabs(mu[min(2 * n, len(mu) - 1)]), mp.mpf(1))


# ----------------------------------------------------------------------
# Wavefunctions and evolution
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Wavefunction:
    """Amplitudes phi_0..phi_{N-1} at one time, with the truncation tail |phi_{N-1}|^2."""

    t: float
    phi: np.ndarray
    tail_mass: float = field(default=0.0)

    def norm_sq(self) -> float:
        return float(np.dot(self.phi, self.phi))


def closed_form_wavefunction(family: Family, n: int, t: float) -> float:
    """phi_n(t) from the family closed form."""
    if n < 0:
        raise ParameterError("n must be >= 0")
    if t < 0:
        raise ParameterError("t must be >= 0")
    return float(family.phi(n, t))


def wavefunction_profile(family: Family, n_max: int, t: float) -> np.ndarray:
    """Vector (phi_0(t), ..., phi_{n_max}(t)) from the closed form."""
    return np.asarray(family.phi(np.arange(n_max + 1), t), dtype=float)


def _spectral_propagator(b: np.ndarray):
    """Eigen-decomposition of the chain generator on sites 0..len(b).

    The generator B (d phi/dt = B phi) is real skew-symmetric tridiagonal;
    conjugating -iB with diag(i^n) gives a real symmetric tridiagonal matrix
    with off-diagonal b, so the evolution is exactly unitary here.
    """
    n_sites = len(b) + 1
    w, v = eigh_tridiagonal(np.zeros(n_sites), np.asarray(b, dtype=float))
    phase = 1j ** np.arange(n_sites)
    return w, v, phase


def evolve_chain(
    chain: LanczosChain,
    t_grid: Sequence[float],
    n_trunc: Optional[int] = None,
    ctx: PrecisionContext = DEFAULT_CTX,
) -> list[Wavefunction]:
    """Evolve phi on the truncated chain (hard wall) over a sorted time grid.

    With ``n_trunc=None`` the wall position starts at 128 sites and doubles
    until the tail mass at the final time drops below ctx.rel_tol (or the
    chain cannot be extended further, in which case a TruncationWarning is
    issued).  The propagation itself is the exact spectral solution of the
    linear hopping system, so the unitarity defect is at machine level
    whenever the tail condition holds.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ParameterError("t_grid must be a nonempty 1-d sequence")
    if np.any(np.diff(t_grid) < 0):
        raise ParameterError("t_grid must be sorted")
    if t_grid[0] != 0.0:
        raise ParameterError("t_grid must start at 0")

    def run(n_sites_minus_1):
        ch = chain.extended(n_sites_minus_1)
        b = ch.b[:n_sites_minus_1]
        w, v, phase = _spectral_propagator(b)
        phi0 = np.zeros(len(b) + 1)
        phi0[0] = 1.0
        c = v.T @ (phase * phi0)
        out = []
        for t in t_grid:
            amp = np.conj(phase) * (v @ (np.exp(1j * w * t) * c))
            phi = amp.real
            out.append(Wavefunction(t=float(t), phi=phi, tail_mass=float(phi[-1] ** 2)))
        return out

    if n_trunc is not None:
        if chain.n_max < n_trunc:
            raise ParameterError(
                f"chain holds {chain.n_max} coefficients but n_trunc={n_trunc} requested"
            )
        states = run(n_trunc)
    else:
        n = 128
        while True:
            try:
                states = run(n)
            except ParameterError:
                # moment chains cap the wall at the stored length
                states = run(chain.n_max)
                break
            if max(s.tail_mass for s in states) < ctx.rel_tol:
                break
            if isinstance(chain.origin, str) and n >= chain.n_max:
                break
            n *= 2

    bad = [s for s in states if s.tail_mass >= ctx.rel_tol]
    if bad:
        warnings.warn(
            f"tail mass {bad[0].tail_mass:.3e} >= rel_tol at t={bad[0].t}; "
            "results beyond that time are truncation-limited",
            TruncationWarning,
            stacklevel=2,
        )
    return states


def evolve_chain_rk4(
    chain: LanczosChain,
    t_grid: Sequence[float],
    n_trunc: int,
    ctx: PrecisionContext = DEFAULT_CTX,
    max_halvings: int = 8,
) -> list[Wavefunction]:
    """Classic fixed-step RK4 reference integrator for the same system.

    Step h starts at 0.05/max(b) and is halved until the unitarity defect
    at the final time meets 10 * rel_tol (or max_halvings is reached).
    Kept as an independent cross-check of the spectral propagator; cost
    grows quickly with max(b), so use on moderate chains.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0:
        raise ParameterError("t_grid must start at 0")
    ch = chain.extended(n_trunc)
    b = np.asarray(ch.b[:n_trunc], dtype=float)
    bmax = b.max()

    def rhs(phi):
        out = np.empty_like(phi)
        out[0] = -b[0] * phi[1]
        out[1:-1] = b[:-1] * phi[:-2] - b[1:] * phi[2:]
        out[-1] = b[-1] * phi[-2]
        return out

    def integrate(h):
        phi = np.zeros(n_trunc + 1)
        phi[0] = 1.0
        out = [phi.copy()]
        t = 0.0
        for tk in t_grid[1:]:
            span = tk - t
            steps = max(1, int(np.ceil(span / h)))
            hh = span / steps
            for _ in range(steps):
                k1 = rhs(phi)
                k2 = rhs(phi + 0.5 * hh * k1)
                k3 = rhs(phi + 0.5 * hh * k2)
                k4 = rhs(phi + hh * k3)
                phi = phi + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = tk
            out.append(phi.copy())
        return out

    h = 0.05 / bmax
    for _ in range(max_halvings + 1):
        profiles = integrate(h)
        defect = max(abs(np.dot(p, p) - 1.0) for p in profiles)
        if defect <= 10 * ctx.rel_tol:
            break
        h *= 0.5
    return [
        Wavefunction(t=float(t), phi=p, tail_mass=float(p[-1] ** 2))
        for t, p in zip(t_grid, profiles)
    ]


def krylov_complexity(w: Wavefunction) -> float:
    """Mean chain position sum_n n |phi_n|^2."""
    norm = w.norm_sq()
    if abs(norm - 1.0) > 1e-3:
        raise ParameterError(f"wavefunction is not normalized: sum phi^2 = {norm}")
    n = np.arange(len(w.phi))
    return float(np.sum(n * w.phi**2))
