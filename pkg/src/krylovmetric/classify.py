"""Fast-scrambler classification of a (chain, metric) pair.

Three criteria: (i) asymptotically linear Lanczos coefficients, (ii) a
clean power law K_nn ~ n^h with h in (0, 1] and constant sign, (iii)
negligible far off-diagonal weight where the dynamics actually samples the
metric.  Negative labels mirror the worked examples: alternating diagonal
signs point to an integrable CFT-like metric, square-root coefficients with
a logarithmic diagonal point to localized dynamics.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .asymptotics import LinearFit, PowerFit, fit_linear, fit_log_law, fit_power_law
from .errors import ParameterError
from .krylov_core import Family, LanczosChain, evolve_chain
from .metric import KrylovMetric
from .special import DEFAULT_CTX, PrecisionContext

__all__ = [
    "ClassifyThresholds",
    "Verdict",
    "classify",
    "diagonal_dominance",
    "verdict_to_json",
]


@dataclass(frozen=True)
class ClassifyThresholds:
    """Tunable cutoffs; defaults are the calibrated artifact choices."""

    linear_residual: float = 0.02       # rms relative residual of b_n = alpha n + gamma
    linear_exponent_band: float = 0.1   # |power-fit exponent of b_n - 1| must stay below
    offdiag: float = 0.2                # far off-diagonal weight ratio
    band_fraction: float = 0.25         # |m-n| > band_fraction * (m+n)/2 counts as far
    flat_exponent: float = 0.05         # |h| below this reads as a flat diagonal
    sqrt_band: float = 0.15             # |exponent - 1/2| band for localized coefficients
    t_ref_alpha: float = 2.0            # dimensionless alpha * t at which weights are taken


@dataclass(frozen=True)
class Verdict:
    label: str
    alpha_fit: LinearFit
    b_exponent: PowerFit
    h_fit: Optional[PowerFit]
    offdiag_ratio: float
    kappa: Optional[float]
    criteria: dict = field(default_factory=dict)
    thresholds: ClassifyThresholds = field(default_factory=ClassifyThresholds)


def diagonal_dominance(
    metric: KrylovMetric,
    wavefn_family: Family,
    t_ref: float,
    band_fraction: float = 0.25,
) -> float:
    """Far off-diagonal weight ratio at a reference time.

    ratio = sum_{|m-n| > max(1, f (m+n)/2)} |K_mn phi_m phi_n|
            / sum_n |K_nn| phi_n^2

    The band excludes the near-diagonal strip: entries within a fixed
    fraction of the orthogonal distance only renormalize the diagonal
    contribution by an O(1) factor, while weight far from the diagonal is
    what breaks the identification of the metric with a size profile.
    """
    from .krylov_core import wavefunction_profile

    phi = wavefunction_profile(wavefn_family, metric.n_max, t_ref)
    return _dominance_from_weights(metric, phi, band_fraction)


def _dominance_from_weights(metric: KrylovMetric, phi: np.ndarray, band_fraction: float) -> float:
    n = len(phi)
    vals = np.abs(np.asarray(metric.values)[:n, :n]) * np.outer(np.abs(phi), np.abs(phi))
    diag = float(np.trace(vals))
    if diag <= 0:
        raise ParameterError("diagonal weight vanished; increase t_ref or n_max")
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :])
    band = np.maximum(1.0, band_fraction * 0.5 * (idx[:, None] + idx[None, :]))
    far = float(vals[dist > band].sum())
    return far / diag


def classify(
    chain: LanczosChain,
    metric: KrylovMetric,
    thresholds: Optional[ClassifyThresholds] = None,
    ctx: PrecisionContext = DEFAULT_CTX,
) -> Verdict:
    """Apply the three criteria and emit a labeled verdict.

    Criterion (i) combines the linear-fit residual with a power-law gate on
    b_n (a pure 2% residual test cannot reject sqrt(n) growth over a 3:1
    window, so the fitted exponent must also sit near 1).  Criterion (ii)
    power-fits the diagonal with sign bookkeeping.  Criterion (iii)
    evaluates the far off-diagonal ratio with the chain's own wavepacket at
    alpha_fit * t = t_ref_alpha.  kappa = 2 alpha h is reported for fast
    scramblers (and satisfies kappa <= 2 alpha since h <= 1 there).
    """
    th = thresholds or ClassifyThresholds()
    n_max = min(chain.n_max, metric.n_max)
    if n_max < 100:
        raise ParameterError(f"need chain and metric up to n >= 100, got {n_max}")

    ns = np.arange(1, n_max + 1)
    window = (max(10, n_max // 3), n_max)
    b_samples = list(zip(ns, chain.b[:n_max]))
    alpha_fit = fit_linear(b_samples, window)
    b_exp = fit_power_law(b_samples, window)
    pass_linear = (
        alpha_fit.rel_residual <= th.linear_residual
        and abs(b_exp.exponent - 1.0) <= th.linear_exponent_band
    )

    diag = np.real(np.asarray(metric.diagonal()))
    dn = np.arange(len(diag))
    dwin = (max(10, metric.n_max // 3), metric.n_max)
    in_win = (dn >= dwin[0]) & (dn <= dwin[1]) & (diag != 0)
    signs = np.sign(diag[in_win])
    alternating = bool(np.any(signs > 0) and np.any(signs < 0))
    h_fit = None
    pass_power = False
    flat = False
    if not alternating and np.count_nonzero(in_win) >= 8:
        h_fit = fit_power_law(list(zip(dn[in_win], np.abs(diag[in_win]))), dwin)
        flat = abs(h_fit.exponent) <= max(th.flat_exponent, 2 * h_fit.stderr)
        pass_power = (not flat) and (0.0 < h_fit.exponent <= 1.0 + 2 * h_fit.stderr)

    ratio = _offdiag_ratio_from_chain(chain, metric, alpha_fit, th, ctx)
    pass_off = ratio <= th.offdiag

    # localized signature: sqrt-like coefficients plus a better log fit
    sqrt_like = abs(b_exp.exponent - 0.5) <= th.sqrt_band
    log_better = False
    if np.count_nonzero(in_win) >= 8:
        pos = in_win & (diag > 0)
        if np.count_nonzero(pos) >= 8:
            logf = fit_log_law(list(zip(dn[pos], diag[pos])), dwin)
            powf = fit_power_law(list(zip(dn[pos], diag[pos])), dwin)
            log_resid = np.sqrt(np.mean((diag[pos] - logf.value(dn[pos])) ** 2))
            pow_resid = np.sqrt(np.mean((diag[pos] - powf.value(dn[pos])) ** 2))
            log_better = log_resid < pow_resid

    if pass_linear and pass_power and pass_off:
        label = "fast_scrambler"
        kappa = 2.0 * alpha_fit.slope * h_fit.exponent
    elif pass_linear and (alternating or (h_fit is not None and not flat and not pass_power)):
        label = "integrable_like"
        kappa = None
    elif (not pass_linear) and sqrt_like and log_better:
        label = "localized_like"
        kappa = None
    else:
        label = "indeterminate"
        kappa = None

    criteria = {
        "linear_coefficients": bool(pass_linear),
        "power_law_diagonal": bool(pass_power),
        "negligible_offdiagonal": bool(pass_off),
        "alternating_signs": alternating,
        "flat_diagonal": bool(flat),
        "sqrt_coefficients": bool(sqrt_like),
        "log_law_preferred": bool(log_better),
    }
    return Verdict(
        label=label,
        alpha_fit=alpha_fit,
        b_exponent=b_exp,
        h_fit=h_fit,
        offdiag_ratio=float(ratio),
        kappa=kappa,
        criteria=criteria,
        thresholds=th,
    )


def _offdiag_ratio_from_chain(chain, metric, alpha_fit, th, ctx):
    """Weights from the chain's own evolved wavepacket at alpha t = t_ref_alpha.

    The reference time is capped so the packet stays well inside the
    truncated chain; diagonal metrics give 0 at any time.
    """
    n_max = metric.n_max
    if not np.any(np.abs(metric.values - np.diag(metric.diagonal())) > 0):
        return 0.0
    slope = max(alpha_fit.slope, 1e-12)
    t_ref = th.t_ref_alpha / slope
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(8):
            states = evolve_chain(chain, [0.0, t_ref], n_trunc=min(chain.n_max, n_max), ctx=ctx)
            w = states[-1]
            if w.tail_mass < 1e-8:
                break
            t_ref *= 0.5
    return _dominance_from_weights(metric, w.phi, th.band_fraction)


def verdict_to_json(v: Verdict) -> str:
    body = {
        "label": v.label,
        "alpha": v.alpha_fit.slope,
        "gamma_intercept": v.alpha_fit.intercept,
        "alpha_rel_residual": v.alpha_fit.rel_residual,
        "b_exponent": v.b_exponent.exponent,
        "h": None if v.h_fit is None else v.h_fit.exponent,
        "h_stderr": None if v.h_fit is None else v.h_fit.stderr,
        "kappa": v.kappa,
        "offdiag_ratio": v.offdiag_ratio,
        "criteria": v.criteria,
        "thresholds": {
            "linear_residual": v.thresholds.linear_residual,
            "offdiag": v.thresholds.offdiag,
            "band_fraction": v.thresholds.band_fraction,
        },
        "windows": {
            "chain": list(v.alpha_fit.window),
            "diagonal": list(v.h_fit.window) if v.h_fit is not None else None,
        },
    }
    return json.dumps(body, sort_keys=True)
