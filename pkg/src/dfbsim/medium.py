"""Local material response: parabolic gain, carrier-dependent index, detuning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .device import DeviceParams


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


@dataclass(frozen=True)
class LocalMedium:
    gain: float
    index: float
    detuning: float
    compression_factor: float


def material_gain(N, wavelength, params: DeviceParams):
    """Parabolic gain A0*dN - A1*(dlam + A2*dN)**2 in 1/m (negative = absorption)."""
    _finite(N, wavelength)
    dN = np.asarray(N, dtype=float) - params.n_transparency
    dlam = np.asarray(wavelength, dtype=float) - params.lambda_peak_transparency
    g = params.a0_diff_gain * dN - params.a1_curvature * (dlam + params.a2_peak_shift * dN) ** 2
    return g if g.ndim else float(g)


def peak_gain_wavelength(N, params: DeviceParams):
    """Wavelength at which ``material_gain`` peaks for carrier density ``N``."""
    return params.lambda_peak_transparency - params.a2_peak_shift * (N - params.n_transparency)


def refractive_index(N, params: DeviceParams):
    _finite(N)
    n = params.n0_index + params.confinement * params.dn_dN * np.asarray(N, dtype=float)
    return n if n.ndim else float(n)


def detuning(n, wavelength, params: DeviceParams):
    """Deviation from the Bragg condition, 1/m.

    The dispersion term uses lambda*lambda_B in its denominator.
    """
    _finite(n, wavelength)
    lam = np.asarray(wavelength, dtype=float)
    n = np.asarray(n, dtype=float)
    lb = params.lambda_bragg
    d = (2 * math.pi / lam) * n \
        - (2 * math.pi * params.n_group / (lam * lb)) * (lam - lb) \
        - math.pi / params.grating_period
    return d if d.ndim else float(d)


def compression_factor(P, params: DeviceParams):
    """Gain compression 1/(1 + eps*P)."""
    c = 1.0 / (1.0 + params.eps_compression * np.asarray(P, dtype=float))
    return c if c.ndim else float(c)


def local_medium(N: float, P: float, wavelength: float, params: DeviceParams) -> LocalMedium:
    n = refractive_index(N, params)
    return LocalMedium(
        gain=material_gain(N, wavelength, params),
        index=n,
        detuning=detuning(n, wavelength, params),
        compression_factor=compression_factor(P, params),
    )
