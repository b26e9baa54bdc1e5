"""wavecorr: a laboratory for correlations of noisy wave fields.

Simulates the damped wave equation driven by stationary random sources with
a prescribed phase-space power spectrum, estimates two-point correlations
from the synthetic records, and predicts the same correlations independently
from ray dynamics and half-wave propagators, so the two routes can be
cross-validated at desk scale.
"""

from .correlation import (CorrelationRecord, correlation_derivative,
                          empirical_correlation, exact_correlation)
from .medium import Medium, PhasePoint
from .noise import (NoiseModel, band_spectrum, estimate_power_spectrum,
                    filtered_white, flat_spectrum, gamma_kernel, sample_source,
                    white_noise)
from .phase_space import (GridFunction, PhaseSpaceContext, Symbol,
                          WignerFunction, kernel_from_symbol, poisson_bracket,
                          symbol_from_kernel, weyl_apply, weyl_matrix, wigner)
from .rays import Ray, TimeScales, flow, lyapunov, shoot
from .semiclassical import (asymmetry_factor, m_gamma, pi_bar,
                            predict_correlation)
from .surface import (DepthProfile, DispersionCurve, dispersion_curve,
                      invert_profile, sturm_liouville_modes, two_layer_profile)
from .wavesim import (GreensFunction, HalfWaveBasis, WaveSolver, WaveState,
                      band_limited_delta, drive_ensemble, greens)

__version__ = "0.1.0"

__all__ = [
    "PhaseSpaceContext", "GridFunction", "Symbol", "WignerFunction",
    "weyl_apply", "weyl_matrix", "wigner", "kernel_from_symbol",
    "symbol_from_kernel", "poisson_bracket",
    "Medium", "PhasePoint", "Ray", "TimeScales", "flow", "shoot", "lyapunov",
    "NoiseModel", "white_noise", "flat_spectrum", "filtered_white",
    "band_spectrum", "sample_source", "gamma_kernel", "estimate_power_spectrum",
    "WaveSolver", "WaveState", "GreensFunction", "HalfWaveBasis", "greens",
    "band_limited_delta", "drive_ensemble",
    "CorrelationRecord", "empirical_correlation", "exact_correlation",
    "correlation_derivative",
    "pi_bar", "predict_correlation", "m_gamma", "asymmetry_factor",
    "DepthProfile", "DispersionCurve", "sturm_liouville_modes",
    "dispersion_curve", "two_layer_profile", "invert_profile",
    "__version__",
]
