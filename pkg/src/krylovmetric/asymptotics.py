"""Large-order saddle analysis of the contour-extracted metric, plus fitters.

Saddles parameterize y_i = e^(theta_i) in the coefficient integrals; the
effective actions below are the exponents of the integrands.  Fluctuation
factors are carried as the scaling corrections L^-1 (diagonal) and
L^-2 lambda^-1 (off-diagonal), not as full Hessian integrals: the cubic and
higher terms scale with the same powers of L, so only the scaling survives
and the remaining O(1) factor is absorbed into one fitted constant.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceError, ParameterError, StokesProximityWarning
from .models import MblParams, gamma_sq

__all__ = [
    "SaddlePair",
    "PowerFit",
    "LogFit",
    "LinearFit",
    "syk_saddle",
    "syk_action",
    "syk_asym_diag",
    "syk_asym_offdiag",
    "ll_saddle",
    "ll_action",
    "ll_asym",
    "mbl_asym_diag",
    "fit_power_law",
    "fit_log_law",
    "fit_linear",
    "fit_report_json",
]

_STOKES_BAND = 1e-8


@dataclass(frozen=True)
class SaddlePair:
    """A stationary point (theta1, theta2) of an effective action."""

    theta1: complex
    theta2: complex
    action: complex
    dominant: bool
    residual: float


@dataclass(frozen=True)
class PowerFit:
    exponent: float
    stderr: float
    prefactor_log: float
    window: tuple

    def value(self, n):
        return np.exp(self.prefactor_log) * np.asarray(n, dtype=float) ** self.exponent


@dataclass(frozen=True)
class LogFit:
    slope: float
    offset: float
    stderr: float
    window: tuple

    def value(self, n):
        return self.offset + self.slope * np.log(np.asarray(n, dtype=float))


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    stderr: float
    rel_residual: float
    window: tuple

    def value(self, n):
        return self.intercept + self.slope * np.asarray(n, dtype=float)


# ----------------------------------------------------------------------
# Fast-scrambler family saddles
# ----------------------------------------------------------------------

def syk_action(theta1: complex, theta2: complex, delta: float, h: float, m: int, n: int) -> complex:
    """m th1 + n th2 + (2d+h) ln(1 - e^(th1+th2)) - h ln(1+e^th1) - h ln(1+e^th2)."""
    a = np.exp(theta1)
    b = np.exp(theta2)
    return (
        m * theta1
        + n * theta2
        + (2 * delta + h) * np.log(1 - a * b)
        - h * np.log(1 + a)
        - h * np.log(1 + b)
    )


def _syk_eq_residual(a, b, delta, h, m, n):
    twod = 2 * delta
    e1 = h * a / (1 + a) + (twod + h) * a * b / (1 - a * b) - m
    e2 = h * b / (1 + b) + (twod + h) * a * b / (1 - a * b) - n
    return max(abs(e1), abs(e2))


def syk_saddle(m: int, n: int, delta: float, h: float) -> SaddlePair:
    """Dominant closed-form saddle of the metric coefficient integral.

    Both sign branches of the exact solution are evaluated; the one with
    the smaller Re S wins.  When the two real parts agree to within 1e-8 a
    StokesProximityWarning is issued (dominance is marginal there).
    """
    if m < 1 or n < 1:
        raise ParameterError("saddle analysis needs m, n >= 1")
    md = float(m)
    nd = float(n)
    disc = np.sqrt(h**4 + 4 * (nd - md) ** 2 * delta**2 + 4 * h**2 * (md * nd + (md + nd) * delta))
    pairs = []
    for sign in (+1.0, -1.0):
        if m == n:
            # the generic denominators (h + n - m) stay finite but the
            # formula degenerates; solve the symmetric quadratic directly
            root = (-h + sign * np.sqrt(h * h + 4 * md * (md + 2 * delta))) / (2 * (md + 2 * delta))
            a = b = complex(root)
        else:
            a = -(h**2 + 2 * (nd - md) * (md + delta) + sign * disc) / (
                2 * (h + nd - md) * (md + 2 * delta)
            )
            b = -(h**2 + 2 * (md - nd) * (nd + delta) + sign * disc) / (
                2 * (h + md - nd) * (nd + 2 * delta)
            )
            a = complex(a)
            b = complex(b)
        th1 = np.log(a)
        th2 = np.log(b)
        act = syk_action(th1, th2, delta, h, m, n)
        res = _syk_eq_residual(a, b, delta, h, m, n)
        pairs.append((th1, th2, act, res))
    re0, re1 = pairs[0][2].real, pairs[1][2].real
    if abs(re0 - re1) < _STOKES_BAND:
        warnings.warn(
            f"saddle branches nearly degenerate at (m,n)=({m},{n}): "
            f"Re S differ by {abs(re0 - re1):.2e}",
            StokesProximityWarning,
            stacklevel=2,
        )
    which = 0 if re0 <= re1 else 1
    th1, th2, act, res = pairs[which]
    return SaddlePair(theta1=th1, theta2=th2, action=act, dominant=True, residual=float(res))


def syk_asym_diag(n: int, h: float, delta: float = 0.25, prefactor_mode: str = "saddle") -> float:
    """Large-n estimate of the diagonal metric entry.

    ``saddle`` evaluates exp(-S*) at the diagonal saddle, applies the L^-1
    fluctuation scaling and divides by D_n^2, which reproduces K_nn ~ n^h
    up to one overall constant.  ``power`` returns the bare n^h law.
    """
    if n < 20:
        raise ParameterError("asymptotic form needs n >= 20")
    if prefactor_mode == "power":
        return float(n) ** h
    if prefactor_mode != "saddle":
        raise ParameterError(f"unknown prefactor_mode {prefactor_mode!r}")
    sp = syk_saddle(n, n, delta, h)
    twod = 2 * delta
    log_d2 = gammaln(twod + n) - gammaln(n + 1) - gammaln(twod)
    log_val = -sp.action.real - np.log(float(n)) - log_d2
    return float(np.exp(log_val))


def syk_asym_offdiag(bigl: int, lam: float, h: float) -> float:
    """Orthogonal off-diagonal scaling L^(-h-1) lambda^(-2h-1) at m,n = L(1 -+ lambda)."""
    if bigl * lam < 1:
        raise ParameterError("need L * lambda >= 1 (at least one site off the diagonal)")
    return float(bigl) ** (-h - 1.0) * lam ** (-2.0 * h - 1.0)


# ----------------------------------------------------------------------
# Luttinger saddles
# ----------------------------------------------------------------------

def ll_action(theta1: complex, theta2: complex, delta: float, m: int, n: int) -> complex:
    a = np.exp(theta1)
    b = np.exp(theta2)
    inner = (1 - 1j * a) * (1 - 1j * b) / ((1 + 1j * a) * (1 + 1j * b) * (1 - a * b))
    return m * theta1 + n * theta2 - 2 * delta * np.log(inner)


def _ll_equations(th, delta, m, n):
    th1, th2 = th
    sig = th1 + th2
    f1 = m + 2j * delta / np.cosh(th1) + 2 * delta / (1 - np.exp(-sig))
    f2 = n + 2j * delta / np.cosh(th2) + 2 * delta / (1 - np.exp(-sig))
    return np.array([f1, f2])


def _ll_jacobian(th, delta, m, n):
    th1, th2 = th
    sig = th1 + th2
    cross = -2 * delta * np.exp(-sig) / (1 - np.exp(-sig)) ** 2
    j11 = -2j * delta * np.sinh(th1) / np.cosh(th1) ** 2 + cross
    j22 = -2j * delta * np.sinh(th2) / np.cosh(th2) ** 2 + cross
    return np.array([[j11, cross], [cross, j22]])


def ll_saddle(bigl: int, lam: float, delta: float) -> SaddlePair:
    """Dominant Luttinger saddle by damped Newton iteration.

    Seeded at the 1/L expansion theta* = -i pi/2 + 2 i delta / ((1 -+ lambda) L);
    converges to residual <= 1e-10 or raises ConvergenceError.
    """
    if bigl < 10:
        raise ParameterError("need L >= 10")
    if not abs(lam) < 1:
        raise ParameterError("need |lambda| < 1")
    m = int(round(bigl * (1 - lam)))
    n = int(round(bigl * (1 + lam)))
    th = np.array(
        [
            -0.5j * np.pi + 2j * delta / ((1 - lam) * bigl),
            -0.5j * np.pi + 2j * delta / ((1 + lam) * bigl),
        ]
    )
    target = 1e-10
    resid = np.inf
    for _ in range(100):
        f = _ll_equations(th, delta, m, n)
        resid = float(np.max(np.abs(f)))
        if resid <= target * max(m, n):
            break
        step = np.linalg.solve(_ll_jacobian(th, delta, m, n), -f)
        lamb = 1.0
        base = np.max(np.abs(f))
        for _ in range(30):
            trial = th + lamb * step
            if np.max(np.abs(_ll_equations(trial, delta, m, n))) < base:
                th = trial
                break
            lamb *= 0.5
        else:
            break
    f = _ll_equations(th, delta, m, n)
    resid = float(np.max(np.abs(f)))
    if resid > 1e-10 * max(m, n):
        raise ConvergenceError(
            f"Luttinger saddle did not converge at (L, lambda)=({bigl}, {lam})",
            residual=resid,
        )
    act = ll_action(th[0], th[1], delta, m, n)
    return SaddlePair(theta1=complex(th[0]), theta2=complex(th[1]), action=complex(act),
                      dominant=True, residual=resid)


def ll_asym(m: int, n: int, delta: float) -> float:
    """Signed asymptotic law of the Luttinger metric: -(-1)^((m+n)/2) (m n)^(delta - 1/2).

    The alternation period comes from the purely imaginary leading saddle;
    the overall sign is fixed against the exact small-order coefficients
    (K_11 = 16 delta^2 / D_1^2 > 0), which puts a minus in front of the
    bare (-1)^((m+n)/2) factor.
    """
    if (m + n) % 2 != 0:
        raise ParameterError("asymptotic law applies to even m + n only")
    if m < 10 or n < 10:
        raise ParameterError("need m, n >= 10")
    sign = -((-1.0) ** ((m + n) // 2))
    return float(sign * (float(m) * float(n)) ** (delta - 0.5))


# ----------------------------------------------------------------------
# Localized model
# ----------------------------------------------------------------------

def mbl_asym_diag(n, p: MblParams) -> float:
    """Logarithmic-lightcone law for the diagonal metric (parity term dropped).

    Returns 2/N + (4 xi / N) ln(8 J^2 n / gamma^2); the slope carries the
    two-sided dead-site count M = 2 xi ln(8 J^2 x / gamma^2) of the lattice.
    Requires 8 J^2 n / gamma^2 > 1.
    """
    if p.nsites is None:
        raise ParameterError("finite nsites required")
    g2 = gamma_sq(p)
    arg = 8.0 * p.j**2 * float(n) / g2
    if arg <= 1.0:
        raise ParameterError(f"log law needs 8 J^2 n / gamma^2 > 1, got {arg}")
    nn = p.nsites
    return float(2.0 / nn + (4.0 * p.xi / nn) * np.log(arg))


# ----------------------------------------------------------------------
# Fitters
# ----------------------------------------------------------------------

def _window_slice(samples, window):
    lo, hi = window
    if not lo < hi:
        raise ParameterError("window must be nondegenerate")
    pts = [(float(n), float(v)) for n, v in samples if lo <= n <= hi]
    if len(pts) < 8:
        raise ParameterError(f"need >= 8 samples in window, got {len(pts)}")
    arr = np.array(pts)
    return arr[:, 0], arr[:, 1]


def _lsq_line(x, y, window):
    coef, cov = np.polyfit(x, y, 1, cov=True)
    slope, icpt = coef
    stderr = float(np.sqrt(cov[0, 0]))
    return float(slope), float(icpt), stderr


def fit_power_law(samples: Sequence, window) -> PowerFit:
    """Least squares in (ln n, ln |v|); all values must share one sign."""
    n, v = _window_slice(samples, window)
    if np.any(n <= 0):
        raise ParameterError("power fit needs positive n")
    signs = np.sign(v)
    if np.any(signs == 0) or len(set(signs.tolist())) > 1:
        raise ParameterError(
            "sign-mixing in power-law fit: take |values| and track signs separately"
        )
    slope, icpt, err = _lsq_line(np.log(n), np.log(np.abs(v)), window)
    return PowerFit(exponent=slope, stderr=err, prefactor_log=icpt, window=tuple(window))


def fit_log_law(samples: Sequence, window) -> LogFit:
    """Least squares of v against ln n."""
    n, v = _window_slice(samples, window)
    if np.any(n <= 0):
        raise ParameterError("log fit needs positive n")
    slope, icpt, err = _lsq_line(np.log(n), v, window)
    return LogFit(slope=slope, offset=icpt, stderr=err, window=tuple(window))


def fit_linear(samples: Sequence, window) -> LinearFit:
    """Least squares v = slope * n + intercept with an rms relative residual."""
    n, v = _window_slice(samples, window)
    slope, icpt, err = _lsq_line(n, v, window)
    resid = v - (slope * n + icpt)
    rel = float(np.sqrt(np.mean(resid**2)) / np.sqrt(np.mean(v**2)))
    return LinearFit(slope=slope, intercept=icpt, stderr=err, rel_residual=rel, window=tuple(window))


def fit_report_json(fit, law: str, samples: Sequence) -> str:
    """Serialized fit report with a digest of the fitted samples."""
    arr = np.array([(float(n), float(v)) for n, v in samples])
    digest = hashlib.sha256(arr.tobytes()).hexdigest()[:16]
    body = {"law": law, "window": list(fit.window), "samples_digest": digest}
    if isinstance(fit, PowerFit):
        body.update(exponent=fit.exponent, stderr=fit.stderr, prefactor_log=fit.prefactor_log)
    elif isinstance(fit, LogFit):
        body.update(slope=fit.slope, offset=fit.offset, stderr=fit.stderr)
    else:
        body.update(slope=fit.slope, intercept=fit.intercept, stderr=fit.stderr,
                    rel_residual=fit.rel_residual)
    return json.dumps(body, sort_keys=True)
