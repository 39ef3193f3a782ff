"""Device parameters, grating profiles and the simulation grid.

Lengths, times and densities are SI throughout.  The defaults reproduce the
1.55 um InGaAsP device used for the GDCC / conventional QWS comparison.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

C_LIGHT = 299_792_458.0
Q_ELECTRON = 1.602176634e-19
HBAR = 1.054571817e-34

# Parameters with no tabulated value. Flagged in every run manifest.
UNTABULATED = ("dn_dN", "beta_sp", "petermann_k")


@dataclass(frozen=True)
class DeviceParams:
    tau_carrier: float = 4e-9
    b_radiative: float = 1e-16
    c_auger: float = 3e-41
    n_transparency: float = 1.5e24
    eps_compression: float = 1.5e-23
    a0_diff_gain: float = 2.7e-20
    a1_curvature: float = 1.5e19
    a2_peak_shift: float = 2.7e-32
    alpha_loss: float = 4e3
    n_group: float = 3.7
    cavity_length: float = 500e-6
    active_thickness: float = 0.12e-6
    active_width: float = 1.5e-6
    active_volume: float = 90e-18
    grating_period: float = 227.039e-9
    lambda_bragg: float = 1550e-9
    lambda_peak_transparency: float = 1565e-9
    confinement: float = 0.35
    phase_shift: float = math.pi / 2
    residue_phase_left: float = 0.0
    dn_dN: float = -1.18e-26
    beta_sp: float = 1e-4
    petermann_k: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v!r}")
        positive = (
            "tau_carrier", "b_radiative", "c_auger", "n_transparency",
            "a0_diff_gain", "a1_curvature", "a2_peak_shift",
            "alpha_loss", "n_group", "cavity_length", "active_thickness",
            "active_width", "active_volume", "grating_period", "lambda_bragg",
            "lambda_peak_transparency", "petermann_k",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("eps_compression", "beta_sp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < self.confinement <= 1:
            raise ValueError("confinement must lie in (0, 1]")
        box = self.cavity_length * self.active_thickness * self.active_width
        if abs(self.active_volume - box) > 0.01 * box:
            raise ValueError(
                f"active_volume {self.active_volume:.4g} m^3 inconsistent with "
                f"L*d*w = {box:.4g} m^3 (tolerance 1%)"
            )

    @property
    def group_velocity(self) -> float:
        return C_LIGHT / self.n_group

    @property
    def n0_index(self) -> float:
        """Zero-injection index fixed by the Bragg condition."""
        return self.lambda_bragg / (2.0 * self.grating_period)

    def replace(self, **changes) -> "DeviceParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SimGrid:
    n_sections: int
    dz: float
    dt: float
    carrier_subcycle: int = 10

    @classmethod
    def for_device(cls, params: DeviceParams, n_sections: int = 1000,
                   carrier_subcycle: int = 10) -> "SimGrid":
        if n_sections < 2:
            raise ValueError("need at least 2 sections")
        if carrier_subcycle < 1:
            raise ValueError("carrier_subcycle must be >= 1")
        dz = params.cavity_length / n_sections
        return cls(int(n_sections), dz, dz / params.group_velocity,
                   int(carrier_subcycle))

    def z_mid(self) -> np.ndarray:
        return (np.arange(self.n_sections) + 0.5) * self.dz


@dataclass(frozen=True)
class GratingProfile:
    kappa: np.ndarray
    corrugation_phase: np.ndarray
    g_shape: float
    kappa0: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_sections(self) -> int:
        return self.kappa.size


def _check_finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


def kappa0_for_mean(g_shape: float, target_meanL: float) -> float:
    """Peak ``kappa0*L`` whose Gaussian profile has mean ``target_meanL``.

    The normalised profile exp(-G u^2) is integrated over u in [-1/2, 1/2]
    by adaptive quadrature.
    """
    _check_finite(g_shape=g_shape, target_meanL=target_meanL)
    if g_shape < 0:
        raise ValueError("g_shape must be >= 0")
    if target_meanL <= 0:
        raise ValueError("target_meanL must be > 0")
    if g_shape == 0:
        return float(target_meanL)
    area, _ = integrate.quad(lambda u: math.exp(-g_shape * u * u), -0.5, 0.5,
                             epsabs=1e-14, epsrel=1e-13)
    return target_meanL / area


def build_profile(params: DeviceParams, g_shape: float, kappa0L: float,
                  grid: SimGrid) -> GratingProfile:
    """Sample the Gaussian coupling profile at section midpoints.

    The corrugation phase is ``residue_phase_left`` on the left half and
    steps by ``phase_shift`` at the section boundary nearest the centre.
    """
    _check_finite(g_shape=g_shape, kappa0L=kappa0L)
    if g_shape < 0:
        raise ValueError("g_shape must be >= 0")
    if kappa0L <= 0:
        raise ValueError("kappa0L must be > 0")
    m = grid.n_sections
    if m < 2:
        raise ValueError("need at least 2 sections")
    kappa0 = kappa0L / params.cavity_length
    if g_shape == 0:
        kappa = np.full(m, kappa0)
    else:
        # integer numerator keeps u exactly antisymmetric under j -> m-1-j
        u = (2 * np.arange(m) + 1 - m) / (2.0 * m)
        kappa = kappa0 * np.exp(-g_shape * u * u)
    phase = np.full(m, params.residue_phase_left)
    phase[m // 2:] += params.phase_shift
    return GratingProfile(kappa, phase, float(g_shape), kappa0)
