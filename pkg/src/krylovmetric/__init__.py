"""Krylov-space observables of quantum operator growth.

Lanczos chains and Krylov complexity, the Krylov metric K_mn extracted by
closed form / series / contour quadrature, its large-order asymptotics,
size-resolved decompositions, and a fast-scrambler classifier.
"""

__version__ = "0.1.0"

from .special import DEFAULT_CTX, PrecisionContext, binomial, hyp3f2_terminating, ln_gamma, pochhammer
from .krylov_core import (
    Conformal,
    Gaussian,
    LanczosChain,
    MomentSeries,
    Wavefunction,
    closed_form_chain,
    closed_form_wavefunction,
    conformal_moments,
    evolve_chain,
    gaussian_moments,
    krylov_complexity,
    lanczos_from_moments,
    wavefunction_profile,
)
from .models import (
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
from .metric import (
    KrylovMetric,
    ll_metric_integrand,
    mbl_metric,
    mbl_metric_diagonal,
    metric_contour,
    metric_contour_table,
    metric_from_series,
    reconstruct_otoc,
    syk_metric_exact,
    syk_metric_integrand,
    syk_metric_matrix,
    syk_series_source,
)
from .asymptotics import (
    LinearFit,
    LogFit,
    PowerFit,
    SaddlePair,
    fit_linear,
    fit_log_law,
    fit_power_law,
    ll_asym,
    ll_saddle,
    mbl_asym_diag,
    syk_asym_diag,
    syk_asym_offdiag,
    syk_saddle,
)
from .sizeres import (
    SizeDistribution,
    SizeResolvedParams,
    mbl_size_asym,
    mbl_size_resolved,
    mbl_size_total,
    syk_Jn,
    syk_Jn_asym,
    syk_P,
    syk_Q,
    syk_generating_Z,
)
from .classify import ClassifyThresholds, Verdict, classify, diagonal_dominance
