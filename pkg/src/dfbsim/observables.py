"""Reported quantities: facet power, optical spectra, SMSR, hole burning, L-I.

Envelope convention: the simulated envelopes carry exp(+i 2 pi f t) for an
optical frequency nu_ref + f, so a positive envelope frequency is a shorter
wavelength, lambda = lambda_ref (1 - f lambda_ref / c) to first order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal

from . import medium
from .device import C_LIGHT, HBAR, DeviceParams
from .engine import LaserState, RunConfig, TraceRecord, run_transient

MIN_SPECTRUM_SAMPLES = 2 ** 14
PEAK_THRESHOLD_DB = 10.0


def photon_density(state: LaserState) -> np.ndarray:
    return np.abs(state.r_fwd) ** 2 + np.abs(state.s_bwd) ** 2


def power_per_density(params: DeviceParams) -> float:
    """Watts per unit facet photon density (m^-3)."""
    photon_energy = HBAR * 2 * math.pi * C_LIGHT / params.lambda_bragg
    cross_section = params.active_width * params.active_thickness / params.confinement
    return photon_energy * params.group_velocity * cross_section


def output_power(envelope_at_facet, params: DeviceParams):
    """Emitted power for a facet envelope sample (or array of samples), W."""
    p = power_per_density(params) * np.abs(envelope_at_facet) ** 2
    return p if np.ndim(p) else float(p)


def facet_power_trace(trace: TraceRecord) -> np.ndarray:
    """Right-facet power per recording block, from the block-mean |R(L)|^2."""
    return power_per_density(trace.config.params) * trace.p_right


# --------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class Peak:
    wavelength: float
    power: float
    prominence_db: float


@dataclass
class Spectrum:
    wavelength_axis: np.ndarray
    psd: np.ndarray
    peaks: list
    frequency_offset: np.ndarray
    lambda_ref: float
    window: tuple = (0.0, 0.0)

    def normalized(self) -> np.ndarray:
        return self.psd / self.psd.max() if self.psd.max() > 0 else self.psd.copy()

    @property
    def dominant(self) -> Peak | None:
        return self.peaks[0] if self.peaks else None


def resolvable_spacing(duration: float, lambda_ref: float) -> float:
    """Smallest wavelength separation a window of ``duration`` resolves, m."""
    return lambda_ref ** 2 / (C_LIGHT * duration)


def spectrum_from_samples(samples, dt: float, lambda_ref: float,
                          min_samples: int = MIN_SPECTRUM_SAMPLES,
                          min_separation: float = 0.0,
                          window: tuple = (0.0, 0.0)) -> Spectrum:
    """Hann-windowed periodogram of a complex envelope.

    ``psd`` is |FFT|^2 / n, so ``psd.sum()`` equals the tapered signal energy.
    ``min_separation`` (Hz) suppresses weaker peaks closer than that to a
    stronger one; the Hann main lobe (2 bins) is always excluded.
    """
    x = np.asarray(samples, dtype=complex)
    n = x.size
    if n < min_samples:
        raise ValueError(
            f"spectrum window holds {n} samples, need >= {min_samples}; this window "
            f"resolves modes no closer than "
            f"{resolvable_spacing(max(n, 1) * dt, lambda_ref) * 1e9:.3g} nm")
    spec = np.fft.fftshift(np.fft.fft(x * np.hanning(n)))
    freq = np.fft.fftshift(np.fft.fftfreq(n, dt))
    psd = (spec.real ** 2 + spec.imag ** 2) / n
    # increasing wavelength = decreasing frequency
    freq = freq[::-1]
    psd = psd[::-1]
    wavelength = lambda_ref * (1.0 - freq * lambda_ref / C_LIGHT)
    peaks = find_spectral_peaks(wavelength, psd, freq, min_separation, dt * n)
    return Spectrum(wavelength, psd, peaks, freq, lambda_ref, window)


def find_spectral_peaks(wavelength, psd, freq, min_separation, duration):
    """Local maxima >= 10 dB above the median PSD with >= 10 dB prominence."""
    floor = np.median(psd)
    if not psd.max() > 0:
        return []
    tiny = psd.max() * 1e-30
    db = 10 * np.log10(np.maximum(psd, tiny))
    floor_db = 10 * np.log10(max(floor, tiny))
    bin_hz = 1.0 / duration
    distance = max(3, int(math.ceil(min_separation / bin_hz)))
    idx, props = signal.find_peaks(db, height=floor_db + PEAK_THRESHOLD_DB,
                                   prominence=PEAK_THRESHOLD_DB, distance=distance)
    order = np.argsort(psd[idx], kind="stable")[::-1]
    return [Peak(float(wavelength[idx[i]]), float(psd[idx[i]]),
                 float(props["prominences"][i])) for i in order]


def compute_spectrum(trace: TraceRecord, window: tuple, **kwargs) -> Spectrum:
    """Spectrum of the right-facet envelope R(L, t) over ``window`` (s)."""
    t_start, t_end = window
    if not (trace.times[0] - trace.dt_record <= t_start < t_end
            <= trace.times[-1] + trace.dt_record):
        raise ValueError(f"window {window} outside trace span "
                         f"[{trace.times[0]:.3e}, {trace.times[-1]:.3e}] s")
    sel = trace.window(t_start, t_end)
    cfg = trace.config
    lam = cfg.params.lambda_bragg if cfg.lambda_ref is None else cfg.lambda_ref
    return spectrum_from_samples(trace.r_out[sel], trace.dt_record, lam,
                                 window=(t_start, t_end), **kwargs)


def smsr(spectrum: Spectrum) -> float:
    """Main-to-strongest-side-peak ratio in dB; +inf when no side peak."""
    if not spectrum.peaks:
        raise ValueError("spectrum has no peaks")
    if len(spectrum.peaks) == 1:
        return math.inf
    return 10 * math.log10(spectrum.peaks[0].power / spectrum.peaks[1].power)


def smsr_floor(spectrum: Spectrum) -> float:
    """Lower bound on the SMSR implied by the peak-detection threshold, dB."""
    main = spectrum.peaks[0].power
    return 10 * math.log10(main / np.median(spectrum.psd)) - PEAK_THRESHOLD_DB


def format_smsr(spectrum: Spectrum) -> str:
    value = smsr(spectrum)
    if math.isinf(value):
        return f"> {smsr_floor(spectrum):.1f} dB"
    return f"{value:.1f} dB"


# --------------------------------------------------------------------------
# hole burning


@dataclass
class HoleBurningReport:
    z: np.ndarray
    sigma_n: np.ndarray
    index_profiles: dict
    times: np.ndarray

    def facet_sigma(self, fraction: float = 0.1) -> float:
        """Mean sigma(N) over the outer ``fraction`` of sections at each end."""
        k = max(1, int(round(fraction * self.sigma_n.size)))
        return float(np.concatenate([self.sigma_n[:k], self.sigma_n[-k:]]).mean())


def carrier_std(trace: TraceRecord, window: tuple) -> HoleBurningReport:
    """Per-section standard deviation of N over the snapshots in ``window``."""
    t1, t2 = window
    times, carriers = trace.profiles_in(t1, t2)
    if times.size < 2:
        raise ValueError(f"need >= 2 carrier snapshots in [{t1}, {t2}] s, "
                         f"found {times.size}")
    sigma = carriers.std(axis=0)
    params = trace.config.params
    index_profiles = {}
    for t in (t1, t2):
        k = int(np.argmin(np.abs(times - t)))
        index_profiles[float(times[k])] = medium.refractive_index(carriers[k], params)
    z = trace.config.grid.z_mid()
    return HoleBurningReport(z, sigma, index_profiles, times)


# --------------------------------------------------------------------------
# L-I curves


class NoKneeError(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdFit:
    threshold: float
    slope_below: float
    slope_above: float
    residual: float     # rms misfit relative to the largest power


def _hinge_fit(current, power, knee):
    basis = np.column_stack([np.ones_like(current), current - knee,
                             np.maximum(current - knee, 0.0)])
    coef, *_ = np.linalg.lstsq(basis, power, rcond=None)
    resid = power - basis @ coef
    return coef, float(resid @ resid)


def extract_threshold(li_curve) -> ThresholdFit:
    """Threshold current from a continuous two-segment linear fit.

    ``li_curve`` is a sequence of (current, power) pairs.  The knee is the
    intersection of the below- and above-threshold lines.
    """
    data = np.asarray(li_curve, dtype=float)
    if data.ndim != 2 or data.shape[0] < 6:
        raise ValueError("need at least 6 (current, power) points")
    order = np.argsort(data[:, 0])
    current, power = data[order, 0], data[order, 1]
    scale = np.abs(power).max()
    if scale == 0:
        raise NoKneeError("no knee detected: all powers are zero")
    power = power / scale
    # knees between the 2nd and 2nd-to-last points keep both segments determined
    lo, hi = current[1], current[-2]
    grid = np.linspace(lo, hi, 200)
    sse = [_hinge_fit(current, power, c)[1] for c in grid]
    k = int(np.argmin(sse))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda c: _hinge_fit(current, power, c)[1],
                                   bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-9 * (hi - lo)})
    knee = float(res.x)
    coef, sse_knee = _hinge_fit(current, power, knee)
    slope_below = coef[1]
    slope_above = coef[1] + coef[2]
    line = np.polyfit(current, power, 1)
    sse_line = float(np.sum((power - np.polyval(line, current)) ** 2))
    if slope_above <= 0 or slope_above < 5 * abs(slope_below) or sse_knee > 0.25 * sse_line:
        raise NoKneeError("no knee detected: the curve is not a below/above-threshold "
                          "hockey stick")
    return ThresholdFit(knee, slope_below * scale, slope_above * scale,
                        math.sqrt(sse_knee / current.size))


@dataclass(frozen=True)
class SweepConfig:
    structure: str
    currents: tuple
    duration: float = 8e-9
    n_sections: int = 1000
    seed: int = 0
    workers: int = 1
    extension: float = 2e-9
    max_extensions: int = 1
    settle_fraction: float = 0.2
    variance_guard: float = 0.05
    guard_bin: float = 20e-12
    run_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.currents) == 0:
            raise ValueError("current list is empty")
        if any(i < 0 for i in self.currents):
            raise ValueError("currents must be >= 0")

    def run_config(self, current: float) -> RunConfig:
        opts = {"profile_interval": 0.0, **self.run_options}
        return RunConfig(self.structure, float(current), self.duration,
                         n_sections=self.n_sections, seed=self.seed, **opts)


@dataclass(frozen=True)
class LIPoint:
    current: float
    power: float
    duration: float
    cv: float
    clamp_events: int


def _binned_cv(values: np.ndarray, per_bin: int) -> float:
    n = values.size // per_bin
    if n < 2:
        return float(values.std() / values.mean()) if values.mean() > 0 else 0.0
    b = values[: n * per_bin].reshape(n, per_bin).mean(axis=1)
    return float(b.std() / b.mean()) if b.mean() > 0 else 0.0


def settled_power(cfg: SweepConfig, current: float) -> LIPoint:
    """Run one L-I point and average the facet power over the final 20%."""
    run = cfg.run_config(current)
    trace = run_transient(run)
    pieces = [facet_power_trace(trace)]
    clamps = trace.clamp_events
    state = trace.final_state
    total = run.duration
    per_bin = max(1, int(round(cfg.guard_bin / trace.dt_record)))
    extensions = 0
    while True:
        p = np.concatenate(pieces)
        tail = p[int(round((1 - cfg.settle_fraction) * p.size)):]
        cv = _binned_cv(tail, per_bin)
        if cv <= cfg.variance_guard or extensions >= cfg.max_extensions:
            break
        ext = run.replace(duration=cfg.extension)
        more = run_transient(ext, state=state)
        pieces.append(facet_power_trace(more))
        clamps = more.clamp_events
        state = more.final_state
        total += cfg.extension
        extensions += 1
    return LIPoint(float(current), float(tail.mean()), total, cv, clamps)


def li_sweep(cfg: SweepConfig) -> list[LIPoint]:
    """Settled facet power at each current.  Points are independent runs."""
    currents = list(cfg.currents)
    if cfg.workers <= 1 or len(currents) == 1:
        return [settled_power(cfg, i) for i in currents]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(settled_power, [cfg] * len(currents), currents))
