"""Closed-form two-point functions and OTOCs for the three model families.

SYK with a tunable chaos parameter h, Luttinger-liquid vertex operators,
and the effective localized model of mutually commuting z-spins with random
couplings.  The localized model additionally gets a per-realization analytic
OTOC, a Monte-Carlo disorder average, and a brute-force exact-diagonalization
oracle for cross-validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError

__all__ = [
    "SykParams",
    "LLParams",
    "MblParams",
    "MblRealization",
    "syk_h_from_coupling",
    "syk_otoc",
    "ll_otoc",
    "gamma_sq",
    "mbl_autocorrelation",
    "mbl_otoc_averaged",
    "mbl_realization_otoc",
    "mbl_ed_oracle",
    "sample_realization",
    "sample_realizations_otoc",
    "realization_to_json",
    "realization_from_json",
]


# ----------------------------------------------------------------------
# Parameter containers
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SykParams:
    """SYK-type fast scrambler: F = c0 exp(2 alpha h T12) / cosh(alpha t12)^(2 delta + h)."""

    alpha: float = 1.0
    delta: float = 0.25
    h: float = 0.75
    c0: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.delta <= 0 or self.c0 <= 0:
            raise ParameterError("alpha, delta, c0 must be positive")
        if not 0.0 <= self.h <= 1.0:
            raise ParameterError(f"h must lie in [0, 1], got {self.h}")

    @property
    def lyapunov(self) -> float:
        return 2.0 * self.alpha * self.h


@dataclass(frozen=True)
class LLParams:
    """Luttinger-liquid vertex operator of dimension delta (= K n0^2 / 4)."""

    alpha: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.delta <= 0:
            raise ParameterError("alpha and delta must be positive")


@dataclass(frozen=True)
class MblParams:
    """Localized z-spin model: couplings J_ij ~ N(0, j^2 e^(-|i-j|/xi)), fields h_i ~ N(0, hfield^2).

    ``nsites=None`` means the thermodynamic limit (only the closed-form
    sums are then available).  Sites live on [-N/2+1, N/2].
    """

    j: float = 1.0
    hfield: float = 1.0
    xi: float = 1.0
    nsites: Optional[int] = None

    def __post_init__(self):
        if self.j <= 0 or self.xi <= 0 or self.hfield < 0:
            raise ParameterError("need j > 0, xi > 0, hfield >= 0")
        if self.nsites is not None and self.nsites < 2:
            raise ParameterError("nsites must be >= 2")
        if gamma_sq(self) <= 0:
            raise ParameterError("gamma^2 must be positive")

    def site_offsets(self) -> np.ndarray:
        """Nonzero lattice offsets m for the finite chain."""
        if self.nsites is None:
            raise ParameterError("site_offsets requires finite nsites")
        n = self.nsites
        lo = -(n // 2) + 1 if n % 2 == 0 else -(n - 1) // 2
        hi = n // 2 if n % 2 == 0 else (n - 1) // 2
        return np.array([m for m in range(lo, hi + 1) if m != 0])


def gamma_sq(p: MblParams, infinite: bool = False) -> float:
    """gamma^2 = 4 (J^2 sum_{j != 0} e^(-|j|/xi) + hfield^2).

    Finite chains use the truncated lattice sum so that gamma^2 stays
    consistent with the finite-N OTOC; ``infinite=True`` forces the
    geometric-series closed form 2 e^(-1/xi) / (1 - e^(-1/xi)).
    """
    if infinite or p.nsites is None:
        q = np.exp(-1.0 / p.xi)
        s = 2.0 * q / (1.0 - q)
    else:
        s = float(np.sum(np.exp(-np.abs(p.site_offsets()) / p.xi)))
    return 4.0 * (p.j**2 * s + p.hfield**2)


# ----------------------------------------------------------------------
# SYK
# ----------------------------------------------------------------------

def syk_h_from_coupling(k: float) -> float:
    """Chaos parameter h(k) = 1 - (sqrt(k^4 + 4k^2) - k^2)/2 of the bath-coupled model.

    k is the squared coupling ratio u^2/J^2; h decreases monotonically from
    1 (maximal chaos, k=0) to 0 (dissipative limit, k -> infinity).
    """
    if k < 0:
        raise ParameterError("k must be >= 0")
    if k == 0:
        return 1.0
    # rewrite sqrt(k^4+4k^2) - k^2 = 4k^2 / (sqrt(k^4+4k^2) + k^2) for large k
    s = np.hypot(k * k, 2.0 * k)
    return float(1.0 - 2.0 * k * k / (s + k * k))


def syk_otoc(p: SykParams, t1: float, t2: float) -> float:
    """Connected OTOC c0 exp(2 alpha h T12) / cosh(alpha t12)^(2 delta + h)."""
    t12 = t1 - t2
    big_t = 0.5 * (t1 + t2)
    return float(
        p.c0
        * np.exp(2.0 * p.alpha * p.h * big_t)
        / np.cosh(p.alpha * t12) ** (2 * p.delta + p.h)
    )


# ----------------------------------------------------------------------
# Luttinger liquid
# ----------------------------------------------------------------------

def ll_otoc(p: LLParams, t1: float, t2: float) -> complex:
    """Connected vertex-operator OTOC, principal branch of the complex power.

    F = G(t12) (1 - [(cosh(a t12) - i sinh(2 a T12)) / (cosh(a t12) + i sinh(2 a T12))]^(2 delta))

    The base of the power has unit modulus and positive real part in its
    numerator/denominator, so the principal branch is continuous in real
    t1, t2 (no cut crossing).
    """
    a = p.alpha
    t12 = t1 - t2
    big2 = a * (t1 + t2)
    c = np.cosh(a * t12)
    s = np.sinh(big2)
    ratio = (c - 1j * s) / (c + 1j * s)
    g = np.cosh(a * t12) ** (-2 * p.delta)
    return complex(g * (1.0 - ratio ** (2 * p.delta)))


# ----------------------------------------------------------------------
# Localized model: disorder-averaged closed forms
# ----------------------------------------------------------------------

def mbl_autocorrelation(p: MblParams, t: float) -> float:
    """Disorder-averaged autocorrelation exp(-gamma^2 t^2 / 2)."""
    return float(np.exp(-0.5 * gamma_sq(p) * t * t))


def mbl_otoc_averaged(p: MblParams, t1: float, t2: float, mode: str = "exact_sum") -> float:
    """Disorder-averaged OTOC of the edge-flip operator.

    exact_sum (finite nsites):
        2 e^(-g2 t12^2/2) - (2/N) e^(-g2 (t1+t2)^2/2)
        - (2/N) sum_{m != 0} exp(-8 J^2 e^(-|m|/xi) t1 t2) e^(-g2 t12^2/2)

    log_approx: the logarithmic-lightcone form obtained by replacing the
    lattice sum with (N-1) - M(t1 t2), M = 2 xi ln(8 J^2 t1 t2); valid for
    J^2 t1 t2 / xi >> 1 and requiring t1 t2 > 0.
    """
    g2 = gamma_sq(p)
    if mode == "exact_sum":
        if p.nsites is None:
            raise ParameterError("exact_sum requires finite nsites")
        n = p.nsites
        offs = p.site_offsets()
        t12 = t1 - t2
        env = np.exp(-0.5 * g2 * t12 * t12)
        lattice = np.sum(np.exp(-8.0 * p.j**2 * np.exp(-np.abs(offs) / p.xi) * t1 * t2))
        return float(
            2.0 * env
            - (2.0 / n) * np.exp(-0.5 * g2 * (t1 + t2) ** 2)
            - (2.0 / n) * lattice * env
        )
    if mode == "log_approx":
        if p.nsites is None:
            raise ParameterError("log_approx requires finite nsites for the 1/N prefactors")
        if t1 * t2 <= 0:
            raise ParameterError("log_approx requires t1 * t2 > 0")
        n = p.nsites
        t12 = t1 - t2
        env = np.exp(-0.5 * g2 * t12 * t12)
        m_dead = 2.0 * p.xi * np.log(8.0 * p.j**2 * t1 * t2)
        return float(
            (2.0 / n) * env
            - (2.0 / n) * np.exp(-0.5 * g2 * (t1 + t2) ** 2)
            + (2.0 / n) * m_dead * env
        )
    raise ParameterError(f"unknown mode {mode!r}")


# ----------------------------------------------------------------------
# Localized model: single realizations
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MblRealization:
    """One disorder sample: symmetric coupling matrix and on-site fields."""

    couplings: np.ndarray
    fields: np.ndarray
    nsites: int

    def __post_init__(self):
        c = np.asarray(self.couplings, dtype=float)
        f = np.asarray(self.fields, dtype=float)
        object.__setattr__(self, "couplings", c)
        object.__setattr__(self, "fields", f)
        if c.shape != (self.nsites, self.nsites):
            raise ParameterError("couplings must be an nsites x nsites matrix")
        if f.shape != (self.nsites,):
            raise ParameterError("fields must have one entry per site")
        if not np.allclose(c, c.T):
            raise ParameterError("couplings must be symmetric")
        if np.any(np.diag(c) != 0):
            raise ParameterError("couplings must have zero diagonal")


def sample_realization(p: MblParams, rng) -> MblRealization:
    """Draw J_ij ~ N(0, j^2 e^(-|i-j|/xi)) (i<j) and h_i ~ N(0, hfield^2)."""
    if p.nsites is None:
        raise ParameterError("sampling requires finite nsites")
    n = p.nsites
    c = np.zeros((n, n))
    for i in range(n):
        for jj in range(i + 1, n):
            sd = p.j * np.exp(-0.5 * (jj - i) / p.xi)
            c[i, jj] = c[jj, i] = rng.normal(0.0, sd)
    f = rng.normal(0.0, p.hfield, size=n) if p.hfield > 0 else np.zeros(n)
    return MblRealization(couplings=c, fields=f, nsites=n)


def mbl_realization_otoc(r: MblRealization, t1: float, t2: float) -> float:
    """Per-realization OTOC of the flip operator at site 0, averaged over probe sites.

    Only the row-0 couplings and the site-0 field enter: every other term of
    the Hamiltonian commutes with the evolving operator.  The trace of each
    probe term factorizes into products of cosines.
    """
    n = r.nsites
    j0 = np.delete(r.couplings[0], 0)
    h0 = r.fields[0]
    t12 = t1 - t2
    ts = t1 + t2
    c12 = np.cos(2.0 * j0 * t12)
    cs = np.cos(2.0 * j0 * ts)
    corr_t12 = np.prod(c12) * np.cos(2.0 * h0 * t12)
    corr_ts = np.prod(cs) * np.cos(2.0 * h0 * ts)
    # probe at site m != 0: cos(2 J_0m (t1+t2)) * prod_{j != 0,m} cos(2 J_0j t12) * cos(2 h0 t12)
    leave_one = _prod_excluding(c12[None, :])[0]
    probes = np.sum(cs * leave_one) * np.cos(2.0 * h0 * t12)
    return float(2.0 * corr_t12 - (2.0 / n) * (corr_ts + probes))


def _prod_excluding(values: np.ndarray) -> np.ndarray:
    """Row-wise product of all entries except column i, robust to zeros."""
    rows, n = values.shape
    pre = np.ones((rows, n + 1))
    np.cumprod(values, axis=1, out=pre[:, 1:])
    post = np.ones((rows, n + 1))
    post[:, :-1] = np.cumprod(values[:, ::-1], axis=1)[:, ::-1]
    return pre[:, :n] * post[:, 1:]


def sample_realizations_otoc(
    p: MblParams, t1: float, t2: float, n_samples: int, seed: int = 0
) -> tuple[float, float]:
    """Monte-Carlo disorder average of the realization OTOC.

    Returns (mean, standard error).  Vectorized over realizations; the
    master seed fixes the whole stream, so runs are reproducible.
    """
    if p.nsites is None:
        raise ParameterError("sampling requires finite nsites")
    n = p.nsites
    offs = p.site_offsets()
    rng = np.random.default_rng(seed)
    sd = p.j * np.exp(-0.5 * np.abs(offs) / p.xi)
    vals = np.empty(n_samples)
    chunk = max(1, min(n_samples, 200_000 // max(len(offs), 1)))
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        j0 = rng.normal(0.0, 1.0, size=(m, len(offs))) * sd
        h0 = rng.normal(0.0, p.hfield, size=m) if p.hfield > 0 else np.zeros(m)
        t12 = t1 - t2
        ts = t1 + t2
        c12 = np.cos(2.0 * j0 * t12)
        cs = np.cos(2.0 * j0 * ts)
        corr_t12 = np.prod(c12, axis=1) * np.cos(2.0 * h0 * t12)
        corr_ts = np.prod(cs, axis=1) * np.cos(2.0 * h0 * ts)
        probes = np.sum(cs * _prod_excluding(c12), axis=1) * np.cos(2.0 * h0 * t12)
        vals[done : done + m] = 2.0 * corr_t12 - (2.0 / n) * (corr_ts + probes)
        done += m
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(n_samples))
    return mean, stderr


# ----------------------------------------------------------------------
# Exact-diagonalization oracle
# ----------------------------------------------------------------------

def mbl_ed_oracle(r: MblRealization, t1: float, t2: float) -> float:
    """Brute-force OTOC from the full 2^N dynamics (N <= 10).

    The Hamiltonian is diagonal in the z basis, so sigma_x^0(t) is a phase
    pattern on the bit-flip permutation; commutators with the probe flips
    are evaluated by index permutation, never by dense matrix products.
    """
    n = r.nsites
    if n > 10:
        raise ParameterError(f"ED oracle limited to nsites <= 10, got {n}")
    dim = 1 << n
    states = np.arange(dim)
    # z eigenvalues per site: +1 for bit 0, -1 for bit 1
    z = 1.0 - 2.0 * ((states[:, None] >> np.arange(n)[None, :]) & 1)
    energy = 0.5 * np.einsum("si,ij,sj->s", z, r.couplings, z) + z @ r.fields

    flip = [states ^ (1 << m) for m in range(n)]

    def sx0_t(t):
        # matrix elements A[s, flip0(s)] = exp(i (E_s - E_flip0(s)) t)
        return np.exp(1j * t * (energy - energy[flip[0]]))

    a1 = sx0_t(t1)  # sigma_x^0(t1), stored as the value on (s, flip0(s))
    a2 = sx0_t(t2)

    total = 0.0
    f0 = flip[0]
    for m in range(n):
        fm = flip[m]
        # B = [A, sigma_x^m]: B[s, f0(fm(s))] = A[s, f0(s)'] ... expand by cases
        # A sigma_x^m has entries at (s, fm(f0(s))): value a[s]
        # sigma_x^m A has entries at (s, f0(fm(s))): value a[fm(s)]
        # both target columns equal c = f0(fm(s)) = fm(f0(s)) (flips commute)
        b1 = a1 - a1[fm]
        b2 = a2 - a2[fm]
        # Tr(B1 B2) = sum_s B1[s, c(s)] B2[c(s), s'=s]; B2[c, s] with c = f0(fm(s)):
        # B2[c, f0(fm(c))] where f0(fm(c)) = s, so B2[c, s] = b2[c]
        c_idx = f0[fm]
        total += np.real(np.sum(b1 * b2[c_idx]))
    # normalized trace, F = -(1/N) sum_m tr([A1, X_m][A2, X_m]) / 2^N
    return float(-total / (n * dim))


# ----------------------------------------------------------------------
# JSON round trip for reproducibility
# ----------------------------------------------------------------------

def realization_to_json(r: MblRealization) -> str:
    return json.dumps(
        {
            "nsites": r.nsites,
            "couplings": r.couplings.tolist(),
            "fields": r.fields.tolist(),
        },
        sort_keys=True,
    )


def realization_from_json(text: str) -> MblRealization:
    data = json.loads(text)
    return MblRealization(
        couplings=np.array(data["couplings"], dtype=float),
        fields=np.array(data["fields"], dtype=float),
        nsites=int(data["nsites"]),
    )
