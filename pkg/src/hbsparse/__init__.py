"""Sparsity-promoting hierarchical Bayesian inversion.

Conditionally Gaussian priors with generalized gamma hypermodels, the
alternating MAP solver with hybrid hyperparameter matching, and
reparametrized preconditioned Crank-Nicolson samplers for posterior
exploration, packaged with a one-dimensional deconvolution benchmark.
"""

from .diagnostics import (
    DiagnosticsReport,
    autocorrelation,
    build_report,
    compressibility_count,
    credible_envelope,
    threshold_delta,
)
from .forward import (
    DeconvolutionConfig,
    GroundTruth,
    InverseProblem,
    apply_scaled_forward,
    build_problem,
    kernel_eval,
    sensitivity_vartheta,
)
from .hypermodel import (
    Hypermodel,
    gg_log_pdf,
    lambda_update,
    lambda_update_closed,
    lambda_update_ode,
    marginal_mean,
    match_hyperparameters,
    optimality_residual,
)
from .ias import (
    HybridResult,
    HybridSchedule,
    IASResult,
    IASState,
    gibbs_energy,
    hybrid_run,
    ias_run,
    xi_update,
)
from .sampler import (
    ChainConfig,
    PhysicalDraws,
    ReparamPoint,
    SampleSet,
    from_reparam,
    jacobian_logdet,
    pcn_step,
    potential,
    radial_pcn_step,
    run_chain,
    samples_to_physical,
    to_reparam,
)

__version__ = "0.1.0"
