"""Time-domain traveling-wave simulation of quarter-wave-shifted DFB lasers
with uniform or Gaussian-distributed coupling coefficients."""

__version__ = "0.1.0"

from .device import (DeviceParams, GratingProfile, SimGrid, build_profile,  # noqa: E402
                     kappa0_for_mean)
from .engine import (STRUCTURES, DivergenceError, LaserState, RunConfig,  # noqa: E402
                     TraceRecord, run_transient, step_carriers, step_fields)
from .medium import detuning, material_gain, refractive_index  # noqa: E402
from .rng import NoiseSource  # noqa: E402

__all__ = [
    "DeviceParams", "GratingProfile", "SimGrid", "build_profile", "kappa0_for_mean",
    "STRUCTURES", "DivergenceError", "LaserState", "RunConfig", "TraceRecord",
    "run_transient", "step_carriers", "step_fields", "detuning", "material_gain",
    "refractive_index", "NoiseSource",
]
