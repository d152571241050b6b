"""The Krylov metric K_mn: exact closed form, series extraction, contour extraction.

For the fast-scrambler family the generating identity is

    (1+y1)^h (1+y2)^h (1-y1 y2)^(-(h+2 delta)) = sum_{mn} D_m D_n K_mn y1^m y2^n

with K_00 = 1.  The same coefficients come out of three independent routes
(closed form in terms of a terminating 3F2, double-series convolution, and
double-contour quadrature), which the tests hold against each other.

The Luttinger metric has no closed form and is extracted by contour only;
its entries are complex symmetric with purely imaginary odd-index-sum
entries, so the Hermiticity diagnostic applies family-wise.  The localized
model's metric is exactly diagonal and is reported unnormalized (its raw
equal-time value vanishes, so no K_00 = 1 convention exists there; the same
holds for the Luttinger family).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath as mp
import numpy as np

from . import contour
from .errors import ParameterError, SingularContourError, TruncationError
from .krylov_core import Conformal, Family, wavefunction_profile
from .models import MblParams, gamma_sq
from .special import DEFAULT_CTX, PrecisionContext

__all__ = [
    "KrylovMetric",
    "syk_metric_exact",
    "syk_metric_matrix",
    "ProductSeriesSource",
    "syk_series_source",
    "metric_from_series",
    "syk_metric_integrand",
    "ll_metric_integrand",
    "metric_contour",
    "metric_contour_table",
    "mbl_metric_diagonal",
    "mbl_metric",
    "reconstruct_otoc",
    "write_metric_csv",
    "write_metric_json",
]


# ----------------------------------------------------------------------
# Container
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class KrylovMetric:
    """Dense (m, n) table of metric values with extraction diagnostics.

    ``normalization`` is the factor the raw coefficients were divided by
    (1.0 where no K_00 convention applies).  ``imag_residual`` is the
    largest imaginary part seen on entries that the family guarantees to be
    real; those entries are stored real.
    """

    values: np.ndarray
    family: str
    normalization: float = 1.0
    imag_residual: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ParameterError("metric values must be a 2-d array")
        object.__setattr__(self, "values", v)

    @property
    def n_max(self) -> int:
        return self.values.shape[0] - 1

    def diagonal(self) -> np.ndarray:
        return np.ascontiguousarray(np.diagonal(self.values))

    def hermiticity_residual(self) -> float:
        v = self.values
        return float(np.max(np.abs(v - np.conj(v.T))))

    def symmetry_residual(self) -> float:
        v = self.values
        return float(np.max(np.abs(v - v.T)))


# ----------------------------------------------------------------------
# Exact closed form (fast-scrambler family)
# ----------------------------------------------------------------------

def _hyp3f2_mp(a1, a2, nterm, b1, b2):
    """Terminating 3F2 at unit argument inside an active mp.workprec scope."""
    total = mp.mpf(1)
    term = mp.mpf(1)
    for k in range(nterm):
        num = (a1 + k) * (a2 + k) * (k - nterm)
        if num == 0:
            break
        den = (b1 + k) * (b2 + k) * (k + 1)
        term *= num / den
        total += term
    return total


def syk_metric_exact(delta, h, m: int, n: int, ctx: PrecisionContext = DEFAULT_CTX) -> float:
    """Closed-form K_mn of the fast-scrambler family, K_00 = 1 normalized.

    Generic h uses sqrt-Gamma prefactors, the finite Pochhammer products
    Gamma(h+1)/Gamma(h-m+1) = prod_{j<m} (h-j) (never a quotient of
    near-pole Gamma values), and the terminating
    3F2(-m, -n, h+2 delta; h-m+1, h-n+1; 1).  On the diagonal the reduced
    form Gamma(2d) Gamma(h+n+2d) / (Gamma(h+2d) Gamma(n+2d)) *
    3F2(-h, -h, -n; 1, 1-h-n-2d; 1) is used.  Integer h (the h -> {0, 1}
    limits) is evaluated as the analytic limit through the truncated
    binomial convolution, which is finite term by term.
    """
    if m < 0 or n < 0:
        raise ParameterError("m, n must be >= 0")
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if h < 0:
        raise ParameterError("h must be >= 0")
    with mp.workprec(ctx.bits):
        dd = mp.mpf(delta)
        hh = mp.mpf(h)
        twod = 2 * dd
        if abs(h - round(h)) < 1e-12:
            return _syk_exact_integer_h(int(round(h)), dd, m, n)
        if m == n:
            logpref = (
                mp.loggamma(twod)
                + mp.loggamma(hh + n + twod)
                - mp.loggamma(hh + twod)
                - mp.loggamma(n + twod)
            )
            f = _hyp3f2_mp(-hh, -hh, n, mp.mpf(1), 1 - hh - n - twod)
            return float(mp.e**logpref * f)
        logpref = 0.5 * (
            2 * mp.loggamma(twod)
            - mp.loggamma(m + 1)
            - mp.loggamma(twod + m)
            - mp.loggamma(n + 1)
            - mp.loggamma(twod + n)
        )
        ratio = mp.mpf(1)
        for j in range(max(m, n)):
            if j < m:
                ratio *= hh - j
            if j < n:
                ratio *= hh - j
        big, small = (m, n) if m >= n else (n, m)
        f = _hyp3f2_mp(mp.mpf(-big), hh + twod, small, hh - big + 1, hh - small + 1)
        return float(mp.e**logpref * ratio * f)


def _syk_exact_integer_h(hint: int, dd, m: int, n: int) -> float:
    if hint == 0:
        return 1.0 if m == n else 0.0
    twod = 2 * dd
    acc = mp.mpf(0)
    for k in range(max(0, m - hint, n - hint), min(m, n) + 1):
        term = mp.mpf(mp.binomial(hint, m - k) * mp.binomial(hint, n - k))
        if term == 0:
            continue
        g = mp.mpf(1)
        for i in range(k):
            g *= (hint + twod + i) / (i + 1)
        acc += term * g
    logd = 0.5 * (
        mp.loggamma(twod + m)
        - mp.loggamma(m + 1)
        + mp.loggamma(twod + n)
        - mp.loggamma(n + 1)
        - 2 * mp.loggamma(twod)
    )
    return float(acc * mp.e**-logd)


def _exact_row(args):
    delta, h, m, n_hi, bits, rel_tol = args
    ctx = PrecisionContext(bits=bits, rel_tol=rel_tol)
    return [syk_metric_exact(delta, h, m, n, ctx) for n in range(m, n_hi + 1)]


def syk_metric_matrix(
    delta,
    h,
    m_max: int,
    ctx: PrecisionContext = DEFAULT_CTX,
    workers: Optional[int] = None,
) -> KrylovMetric:
    """Full exact metric up to m_max; entries are independent, so the fill
    may run across processes (order of assembly is fixed either way)."""
    vals = np.empty((m_max + 1, m_max + 1))
    jobs = [(delta, h, m, m_max, ctx.bits, ctx.rel_tol) for m in range(m_max + 1)]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_exact_row, jobs, chunksize=8))
    else:
        rows = [_exact_row(j) for j in jobs]
    for m, row in enumerate(rows):
        vals[m, m:] = row
        vals[m:, m] = row
    return KrylovMetric(
        values=vals,
        family="syk",
        normalization=1.0,
        imag_residual=0.0,
        params={"delta": float(delta), "h": float(h), "route": "exact"},
    )


# ----------------------------------------------------------------------
# Series route
# ----------------------------------------------------------------------

class ProductSeriesSource:
    """Double-Taylor coefficients c_mn = sum_k u1[m-k] u2[n-k] diag[k].

    Exactly the structure of a product of two univariate series in y1, y2
    with a diagonal series in y1 y2.
    """

    def __init__(self, u1: np.ndarray, u2: np.ndarray, diag: np.ndarray):
        self.u1 = np.asarray(u1, dtype=float)
        self.u2 = np.asarray(u2, dtype=float)
        self.diag = np.asarray(diag, dtype=float)

    @property
    def order(self) -> int:
        return min(len(self.u1), len(self.u2), len(self.diag)) - 1

    def table(self, m_max: int) -> np.ndarray:
        if m_max > self.order:
            raise ParameterError(
                f"series source delivers order {self.order}, requested {m_max}"
            )
        width = m_max + 1
        c = np.zeros((width, width))
        for k in range(width):
            c[k:, k:] += self.diag[k] * np.outer(self.u1[: width - k], self.u2[: width - k])
        return c


def syk_series_source(delta, h, m_max: int, ctx: PrecisionContext = DEFAULT_CTX) -> ProductSeriesSource:
    """Series factors of (1+y1)^h (1+y2)^h (1-y1 y2)^(-(h+2 delta)).

    Univariate coefficients are generated at working precision and rounded
    once; the convolution terms share the sign structure of the dominant
    term, so double accumulation is accurate to ~1e-13 relative.
    """
    with mp.workprec(ctx.bits):
        hh = mp.mpf(h)
        twod = 2 * mp.mpf(delta)
        u = np.empty(m_max + 1)
        cur = mp.mpf(1)
        u[0] = 1.0
        for j in range(1, m_max + 1):
            cur *= (hh - (j - 1)) / j
            u[j] = float(cur)
        g = np.empty(m_max + 1)
        cur = mp.mpf(1)
        g[0] = 1.0
        for k in range(1, m_max + 1):
            cur *= (hh + twod + k - 1) / k
            g[k] = float(cur)
    return ProductSeriesSource(u1=u, u2=u, diag=g)


def metric_from_series(
    source: ProductSeriesSource,
    d_factors: Sequence[float],
    m_max: int,
    ctx: PrecisionContext = DEFAULT_CTX,
) -> KrylovMetric:
    """K_mn = c_mn / (D_m D_n), normalized so K_00 = 1."""
    d = np.asarray(d_factors, dtype=float)
    if len(d) < m_max + 1:
        raise ParameterError("need D_0..D_{m_max}")
    if np.any(d[: m_max + 1] <= 0):
        raise ParameterError("d_factors must be positive")
    c = source.table(m_max)
    k = c / np.outer(d[: m_max + 1], d[: m_max + 1])
    norm = k[0, 0]
    if norm == 0:
        raise ParameterError("cannot normalize: K_00 vanishes for this source")
    return KrylovMetric(
        values=k / norm,
        family="series",
        normalization=float(norm),
        imag_residual=0.0,
        params={"route": "series"},
    )


# ----------------------------------------------------------------------
# Contour route
# ----------------------------------------------------------------------

def syk_metric_integrand(delta, h) -> Callable:
    """W(y1, y2) = (1+y1)^h (1+y2)^h (1-y1 y2)^(-(h+2 delta)).

    All power bases stay in the right half plane on |y| < 1, so numpy's
    principal branch is continuous on the sampling circles.
    """
    twod = 2 * delta

    def w(y1, y2):
        return (1 + y1) ** h * (1 + y2) ** h * (1 - y1 * y2) ** (-(h + twod))

    return w


def ll_metric_integrand(delta) -> Callable:
    """Full Luttinger integrand including the delta_mn piece.

    W = (1-y1 y2)^(-2 delta)
        - [ (1-i y1)(1-i y2) / ((1+i y1)(1+i y2)(1-y1 y2)) ]^(2 delta)
    """
    twod = 2 * delta

    def w(y1, y2):
        base = (1 - 1j * y1) * (1 - 1j * y2) / ((1 + 1j * y1) * (1 + 1j * y2) * (1 - y1 * y2))
        return (1 - y1 * y2) ** (-twod) - base**twod

    return w


_DEFAULT_RADIUS = 0.99
_FALLBACK_RADII = (0.995, 0.99)


def metric_contour(
    integrand: Callable,
    family: Family,
    m: int,
    n: int,
    radius: Optional[float] = None,
    nodes: Optional[int] = None,
    ctx: PrecisionContext = DEFAULT_CTX,
) -> complex:
    """One metric entry by double-contour trapezoid quadrature.

    Returns D_m^-1 D_n^-1 times the circle average times radius^-(m+n),
    with the node count doubled until the result moves by less than
    ctx.rel_tol relative.  The default radius is 0.99: the integrands at
    hand pinch the unit bicircle at y1 y2 = 1 (and the Luttinger one has
    poles at y = +-i), so sampling strictly inside keeps the trapezoid rule
    spectrally convergent; the radius^-(m+n) amplification stays mild.  A
    requested radius of exactly 1.0 falls back to Richardson extrapolation
    over two inner radii whenever the sampled magnitude exceeds
    10^(bits/4), and raises SingularContourError if the grid overflows.
    """
    if m < 0 or n < 0:
        raise ParameterError("m, n must be >= 0")
    if radius is not None and not 0 < radius <= 1:
        raise ParameterError("radius must lie in (0, 1]")
    start = nodes if nodes is not None else 8 * (max(m, n) + 1)
    start = max(start, 64)
    r = radius if radius is not None else _DEFAULT_RADIUS

    if r == 1.0:
        probe = _probe_magnitude(integrand, 1.0, 256)
        if probe > 10.0 ** (ctx.bits / 4):
            # Richardson over two inner radii at matched node counts: the
            # leading aliasing term scales like radius^nodes, so it cancels.
            r1, r2 = _FALLBACK_RADII
            dm = float(family.d_factor(m))
            dn = float(family.d_factor(n))

            def ev(nodes):
                v1 = contour.taylor_coeff_2d(integrand, m, n, r1, nodes)
                v2 = contour.taylor_coeff_2d(integrand, m, n, r2, nodes)
                w1 = r1**nodes
                w2 = r2**nodes
                return v1 - w1 * (v1 - v2) / (w1 - w2)

            val, _ = contour.converge_by_doubling(
                ev, start, max(ctx.rel_tol, 5e-14), what=f"metric entry ({m},{n})"
            )
            return val / (dm * dn)
    return _entry(integrand, family, m, n, r, start, ctx)


def _probe_magnitude(integrand, radius, nodes):
    phi = 2.0 * np.pi * (np.arange(nodes) + 0.25) / nodes
    y = radius * np.exp(1j * phi)
    vals = integrand(y[:, None], y[None, ::-1])
    if not np.all(np.isfinite(vals)):
        raise SingularContourError("integrand overflowed on the sample grid")
    return float(np.max(np.abs(vals)))


def _entry(integrand, family, m, n, radius, start, ctx):
    dm = float(family.d_factor(m))
    dn = float(family.d_factor(n))

    def ev(nodes):
        return contour.taylor_coeff_2d(integrand, m, n, radius, nodes)

    val, _ = contour.converge_by_doubling(
        ev, start, max(ctx.rel_tol, 5e-14), what=f"metric entry ({m},{n})"
    )
    return val / (dm * dn)


def metric_contour_table(
    integrand: Callable,
    family: Family,
    m_max: int,
    radius: Optional[float] = None,
    start_nodes: Optional[int] = None,
    ctx: PrecisionContext = DEFAULT_CTX,
    family_tag: str = "contour",
    params: Optional[dict] = None,
) -> KrylovMetric:
    """Whole table K_mn, m,n <= m_max, via one FFT per node count.

    Identical trapezoid sums as :func:`metric_contour` (a 2-d DFT evaluates
    all orders at once); node count doubles until the largest relative
    change over the table drops below ctx.rel_tol * 100 (floored at 1e-9).
    """
    r = radius if radius is not None else _DEFAULT_RADIUS
    nodes = start_nodes if start_nodes is not None else 8 * (m_max + 1)
    nodes = max(nodes, 128)
    d = family.d_factor(np.arange(m_max + 1))
    dd = np.outer(d, d)

    def ev(nn):
        return contour.taylor_table_2d(integrand, m_max, r, nn) / dd

    tol = max(ctx.rel_tol * 100, 1e-9)
    prev = ev(nodes)
    for _ in range(6):
        nodes *= 2
        cur = ev(nodes)
        scale = np.abs(cur).max()
        resid = np.abs(cur - prev).max() / scale
        if resid <= tol:
            break
        prev = cur
    table = cur

    meta = dict(params or {})
    meta.update({"route": "contour", "radius": r, "nodes": nodes})
    if family_tag == "syk":
        imag = float(np.abs(table.imag).max())
        return KrylovMetric(values=table.real.copy(), family="syk",
                            imag_residual=imag, params=meta)
    if family_tag == "ll":
        idx = np.arange(m_max + 1)
        even = (idx[:, None] + idx[None, :]) % 2 == 0
        imag = float(np.abs(np.where(even, table.imag, 0.0)).max())
        return KrylovMetric(values=table, family="ll", imag_residual=imag, params=meta)
    return KrylovMetric(values=table, family=family_tag, params=meta)


# ----------------------------------------------------------------------
# Localized model: diagonal metric
# ----------------------------------------------------------------------

def mbl_metric_diagonal(
    p: MblParams,
    n_max: int,
    mode: str = "exact_sum",
    ctx: PrecisionContext = DEFAULT_CTX,
) -> np.ndarray:
    """Diagonal entries K_00..K_{n_max n_max}; off-diagonals vanish identically.

    exact_sum expands the averaged OTOC term by term in x = gamma^2 t1 t2:
    every lattice term exp((1 - b_m) x) contributes (1 - b_m)^n, so

        K_nn = 2 - (2/N)(-1)^n - (2/N) sum_{m != 0} (1 - b_m)^n,
        b_m = 8 J^2 e^(-|m|/xi) / gamma^2.

    log_approx is the saddle estimate of the single x-contour with the
    dead-site count M(x) = 2 xi ln(8 J^2 x / gamma^2):

        K_nn ~ (2/N)(1 - (-1)^n) + (4 xi/N) ln(8 J^2 n / gamma^2).

    The metric is reported unnormalized (K_00 = 0 exactly), with the 1/N
    prefactors intact.
    """
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    if p.nsites is None:
        raise ParameterError("finite nsites required for the diagonal metric")
    g2 = gamma_sq(p)
    nn = p.nsites
    n = np.arange(n_max + 1)
    if mode == "exact_sum":
        b = 8.0 * p.j**2 * np.exp(-np.abs(p.site_offsets()) / p.xi) / g2
        a = 1.0 - b
        powers = a[None, :] ** n[:, None]
        return 2.0 - (2.0 / nn) * (-1.0) ** n - (2.0 / nn) * powers.sum(axis=1)
    if mode == "log_approx":
        out = np.zeros(n_max + 1)
        pos = n[1:]
        out[1:] = (2.0 / nn) * (1.0 - (-1.0) ** pos) + (4.0 * p.xi / nn) * np.log(
            8.0 * p.j**2 * pos / g2
        )
        return out
    raise ParameterError(f"unknown mode {mode!r}")


def mbl_metric(
    p: MblParams,
    n_max: int,
    mode: str = "exact_sum",
    ctx: PrecisionContext = DEFAULT_CTX,
) -> KrylovMetric:
    """Diagonal metric embedded as a dense matrix (off-diagonals exactly zero)."""
    diag = mbl_metric_diagonal(p, n_max, mode=mode, ctx=ctx)
    return KrylovMetric(
        values=np.diag(diag),
        family="mbl",
        normalization=1.0,
        imag_residual=0.0,
        params={"j": p.j, "hfield": p.hfield, "xi": p.xi, "nsites": p.nsites, "mode": mode},
    )


# ----------------------------------------------------------------------
# Reconstruction (inverse check)
# ----------------------------------------------------------------------

def reconstruct_otoc(
    metric: KrylovMetric,
    family: Family,
    t1: float,
    t2: float,
    tol: Optional[float] = None,
    envelope_power: Optional[float] = None,
):
    """Truncated double sum sum_mn K_mn phi_m(t1) phi_n(t2) plus a tail bound.

    The bound assumes |K_mn| <= C ((1+m)(1+n))^(q/2) outside the computed
    box, with q = envelope_power (default: max(1, 2 delta - 1) for the
    conformal family, 1 otherwise) and C read off the computed entries with
    a factor-2 safety margin.  Raises TruncationError if ``tol`` is given
    and the bound exceeds it.
    """
    mmax = metric.n_max
    phi1 = wavefunction_profile(family, mmax, t1)
    phi2 = wavefunction_profile(family, mmax, t2)
    value = phi1 @ metric.values @ phi2

    if envelope_power is None:
        if isinstance(family, Conformal):
            envelope_power = max(1.0, 2.0 * family.delta - 1.0)
        else:
            envelope_power = 1.0
    q = envelope_power
    idx = np.arange(mmax + 1)
    weights = ((1.0 + idx)[:, None] * (1.0 + idx)[None, :]) ** (q / 2.0)
    c_env = 2.0 * float(np.max(np.abs(metric.values) / weights))

    def weighted_mass(t):
        inside = float(np.sum(np.abs(phi_at(t, mmax)) * (1.0 + idx) ** (q / 2.0)))
        total = inside
        n = mmax + 1
        block = 256
        while n < mmax + 1 + 65536:
            ns = np.arange(n, n + block)
            terms = np.abs(family.phi(ns, t)) * (1.0 + ns) ** (q / 2.0)
            total += float(terms.sum())
            if terms.max() < 1e-18 * max(total, 1e-300):
                break
            n += block
        return inside, total

    def phi_at(t, m):
        return family.phi(np.arange(m + 1), t)

    in1, all1 = weighted_mass(t1)
    in2, all2 = weighted_mass(t2)
    bound = c_env * (all1 * all2 - in1 * in2)
    if tol is not None and bound > tol:
        raise TruncationError(
            f"tail bound {bound:.3e} exceeds requested tolerance {tol:.3e}",
            tail_estimate=bound,
        )
    if np.isrealobj(metric.values):
        value = float(np.real(value))
    else:
        value = complex(value)
    return value, float(bound)


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------

def write_metric_csv(metric: KrylovMetric, path) -> None:
    """CSV rows (m, n, value) or (m, n, re, im); metadata as # comments."""
    complex_vals = np.iscomplexobj(metric.values)
    with open(path, "w") as fh:
        fh.write(f"# family={metric.family}\n")
        fh.write(f"# m_max={metric.n_max}\n")
        fh.write(f"# normalization={metric.normalization!r}\n")
        fh.write(f"# imag_residual={metric.imag_residual!r}\n")
        for key in sorted(metric.params):
            fh.write(f"# {key}={metric.params[key]}\n")
        if complex_vals:
            fh.write("m,n,re,im\n")
        else:
            fh.write("m,n,value\n")
        for m in range(metric.n_max + 1):
            for n in range(metric.n_max + 1):
                v = metric.values[m, n]
                if complex_vals:
                    fh.write(f"{m},{n},{v.real:.17g},{v.imag:.17g}\n")
                else:
                    fh.write(f"{m},{n},{v:.17g}\n")


def write_metric_json(metric: KrylovMetric, path, precision_bits: int = DEFAULT_CTX.bits) -> None:
    meta = {
        "family": metric.family,
        "params": metric.params,
        "m_max": metric.n_max,
        "precision_bits": precision_bits,
        "imag_residual": metric.imag_residual,
        "normalization": metric.normalization,
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
