"""Simulation and numerical verification toolkit for the Rosenblatt process."""

from .chaos import (
    GaussianIncrements,
    GridKernel,
    contraction_1,
    multiple_integral,
    sample_increments,
)
from .cumulants import (
    CumulantReport,
    cumulant_empirical,
    cumulant_theoretical,
    cyclic_integral,
    cyclic_integral_mc,
)
from .estimators import holder_estimate, hurst_estimate, ks_two_sample
from .kernels import (
    CellKernel,
    DomainError,
    HurstParams,
    QuadProfile,
    TimeGrid,
    build_cell_kernel,
    constants,
    covariance_R,
    kernel_K,
    kernel_dK,
)
from .regularization import (
    pathwise_ito_residual,
    quadratic_variation,
    regularized_integral,
)
from .rosenblatt import (
    NcltConfig,
    SamplePath,
    simulate_eps,
    simulate_fbm,
    simulate_kernel_method,
    simulate_nclt,
)
from .skorohod import (
    ItoX2Report,
    ito_x2_residual,
    ito_x3_scalar_terms,
    relation_residual,
    skorohod_linear,
)
from .spde import (
    FieldPath,
    SpectralNoiseConfig,
    energy_theoretical,
    g_H,
    mild_solution_heat,
    trace_condition,
)
from .wiener import StepFunction, independence_contraction, norm_H, ou_path, wiener_integral

__all__ = [
    "CellKernel", "CumulantReport", "DomainError", "FieldPath",
    "GaussianIncrements", "GridKernel", "HurstParams", "ItoX2Report",
    "NcltConfig", "QuadProfile", "SamplePath", "SpectralNoiseConfig",
    "StepFunction", "TimeGrid", "build_cell_kernel", "constants",
    "contraction_1", "covariance_R", "cumulant_empirical",
    "cumulant_theoretical", "cyclic_integral", "cyclic_integral_mc",
    "energy_theoretical", "g_H", "holder_estimate", "hurst_estimate",
    "independence_contraction", "ito_x2_residual", "ito_x3_scalar_terms",
    "kernel_K", "kernel_dK", "ks_two_sample", "mild_solution_heat",
    "multiple_integral", "norm_H", "ou_path", "pathwise_ito_residual",
    "quadratic_variation", "regularized_integral", "relation_residual",
    "sample_increments", "simulate_eps", "simulate_fbm",
    "simulate_kernel_method", "simulate_nclt", "skorohod_linear",
    "trace_condition", "wiener_integral",
]

__version__ = "0.1.0"
