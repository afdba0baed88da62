"""Wavelet phase harmonic covariance statistics and maximum-entropy models
for stationary 2D fields."""

from .covariance import (
    CovarianceTable,
    angular_fourier_reduce,
    estimate_covariance,
    estimate_mean,
    fourier_harmonic_covariance,
    gaussianity_report,
    normalize_correlations,
)
from .errors import ConfigError, FormatError, NumericalError, PhasecovError
from .evaluation import (
    EvalWindow,
    correlation_error,
    correlation_matrix,
    long_range_profile,
    structure_error,
    structure_function,
)
from .gaussian import (
    GaussianDualState,
    dual_objective,
    fit_gaussian_from_field,
    fit_gaussian_model,
    sample_gaussian,
)
from .graph import (
    Edge,
    EdgeSet,
    ModelSpec,
    OptimizerSettings,
    SymmetryGroup,
    build_foveal_edges,
    model_preset,
)
from .grid import dft2, idft2, negate, radial_power_spectrum, translate, white_noise
from .harmonics import (
    HarmonicWeights,
    harmonic_derivative,
    harmonic_map,
    indicator_weights,
    phase_harmonic,
    phase_window_map,
    rectifier_weights,
)
from .lbfgs import lbfgs_minimize
from .synthesis import (
    SynthesisResult,
    SynthesisTarget,
    build_target,
    objective,
    objective_gradient,
    run_descent,
    synthesize,
)
from .wavelets import (
    LOWPASS,
    WaveletBank,
    WaveletCoeffs,
    adjoint_transform,
    build_bump_bank,
    channel_fields,
    frame_bounds,
    wavelet_transform,
)

__version__ = "0.1.0"
