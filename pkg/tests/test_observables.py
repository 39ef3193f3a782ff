import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfbsim.device import C_LIGHT, DeviceParams
from dfbsim.engine import LaserState, RunConfig, run_transient
from dfbsim.observables import (NoKneeError, SweepConfig, carrier_std, compute_spectrum,
                                extract_threshold, format_smsr, output_power,
                                photon_density, resolvable_spacing, smsr,
                                spectrum_from_samples)

P = DeviceParams()
LAM = P.lambda_bragg
DT = 50e-15
N = 2 ** 15


def _tones(*pairs, n=N, dt=DT):
    t = np.arange(n) * dt
    return sum(a * np.exp(2j * np.pi * f * t) for a, f in pairs)


def _bin(k, n=N, dt=DT):
    return k / (n * dt)


def test_photon_density_examples():
    s = LaserState.zeros(3)
    assert np.all(photon_density(s) == 0)
    s.r_fwd[:] = 1.0
    s.s_bwd[:] = 2.0j
    assert np.all(photon_density(s) == 5.0)
    s2 = LaserState(s.r_fwd * np.exp(0.7j), s.s_bwd * np.exp(-2.1j), s.carriers)
    assert np.allclose(photon_density(s2), 5.0, rtol=1e-15)


def test_output_power_examples():
    assert output_power(0.0, P) == 0.0
    p = output_power(1e10, P)  # |R|^2 = 1e20
    oracle = 1.282e-19 * 8.108e7 * (1.8e-13 / 0.35) * 1e20
    assert p == pytest.approx(oracle, rel=2e-3)
    assert p == pytest.approx(0.534e-3, rel=2e-3)
    assert output_power(math.sqrt(2) * 1e10, P) == pytest.approx(2 * p, rel=1e-14)


def test_single_tone_lands_on_its_bin():
    f0 = _bin(700)
    sp = spectrum_from_samples(_tones((1.0, f0)), DT, LAM)
    want = LAM * (1 - f0 * LAM / C_LIGHT)
    bin_width = LAM ** 2 / C_LIGHT / (N * DT)
    assert abs(sp.dominant.wavelength - want) <= 0.5 * bin_width
    assert sp.dominant.wavelength < LAM   # positive envelope frequency is bluer
    assert math.isinf(smsr(sp))
    assert format_smsr(sp).startswith("> ")


def test_spectrum_invariants():
    x = _tones((1.0, _bin(300)), (0.1, _bin(-900)))
    x = x + 1e-3 * (np.random.default_rng(0).normal(size=N) + 0j)
    sp = spectrum_from_samples(x, DT, LAM)
    assert np.all(np.diff(sp.wavelength_axis) > 0)
    assert np.all(sp.psd >= 0)
    powers = [p.power for p in sp.peaks]
    assert powers == sorted(powers, reverse=True)
    # Parseval: the PSD sums to the energy of the tapered signal
    energy = np.sum(np.abs(x * np.hanning(N)) ** 2)
    assert sp.psd.sum() == pytest.approx(energy, rel=1e-9)


def test_two_tones_amplitude_ratio_1000_gives_60_db():
    sp = spectrum_from_samples(_tones((1.0, _bin(200)), (1e-3, _bin(-400))), DT, LAM)
    assert smsr(sp) == pytest.approx(60.0, abs=0.5)


def test_two_tones_power_ratio_100_gives_20_db():
    sp = spectrum_from_samples(_tones((1.0, _bin(-150)), (0.1, _bin(350))), DT, LAM)
    assert smsr(sp) == pytest.approx(20.0, abs=0.2)


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(1e-6, 1e6))
def test_smsr_scale_invariant(scale):
    x = _tones((1.0, _bin(100)), (0.03, _bin(-300)))
    a = smsr(spectrum_from_samples(x, DT, LAM))
    b = smsr(spectrum_from_samples(scale * x, DT, LAM))
    assert b == pytest.approx(a, abs=1e-9)


def test_short_window_error_names_spacing():
    with pytest.raises(ValueError, match="resolves modes no closer than"):
        spectrum_from_samples(np.ones(1000, complex), DT, LAM)
    assert resolvable_spacing(1e-9, LAM) == pytest.approx(LAM ** 2 / (C_LIGHT * 1e-9))


@pytest.fixture(scope="module")
def small_trace():
    cfg = RunConfig("gdcc_qws", 30e-3, 0.4e-9, n_sections=50, profile_interval=0.05e-9)
    return run_transient(cfg)


def _with_profiles(trace, times, carriers):
    return dataclasses.replace(trace, profile_times=np.asarray(times),
                               profile_carriers=np.asarray(carriers))


def test_carrier_std_constant_and_two_point(small_trace):
    m = 50
    flat = _with_profiles(small_trace, [1e-10, 2e-10, 3e-10], np.full((3, m), 2e24))
    assert np.all(carrier_std(flat, (0, 4e-10)).sigma_n == 0)
    a, b = 1.8e24, 2.4e24
    rows = np.array([np.full(m, a), np.full(m, b)] * 3)
    rep = carrier_std(_with_profiles(small_trace, np.arange(6) * 1e-11, rows), (0, 1e-10))
    assert np.allclose(rep.sigma_n, abs(a - b) / 2, rtol=1e-12)
    assert rep.facet_sigma() == pytest.approx(abs(a - b) / 2, rel=1e-12)
    assert len(rep.index_profiles) == 2


def test_carrier_std_order_invariant(small_trace):
    rng = np.random.default_rng(1)
    rows = rng.normal(2e24, 1e22, size=(8, 50))
    times = np.arange(8) * 1e-11
    a = carrier_std(_with_profiles(small_trace, times, rows), (0, 1e-10))
    perm = rng.permutation(8)
    b = carrier_std(_with_profiles(small_trace, times, rows[perm]), (0, 1e-10))
    assert np.allclose(a.sigma_n, b.sigma_n, rtol=1e-12)
    assert np.all(a.sigma_n >= 0)


def test_carrier_std_needs_two_snapshots(small_trace):
    with pytest.raises(ValueError):
        carrier_std(small_trace, (0.11e-9, 0.12e-9))


def test_compute_spectrum_rejects_window_outside(small_trace):
    with pytest.raises(ValueError):
        compute_spectrum(small_trace, (0.3e-9, 2e-9))


def _hockey(knee=20e-3, n=15, below=2e-6, above=0.2):
    i = np.linspace(5e-3, 40e-3, n)
    p = below * (i - 5e-3) + above * np.maximum(i - knee, 0.0)
    return list(zip(i, p))


def test_threshold_of_ideal_hockey_stick():
    fit = extract_threshold(_hockey())
    assert fit.threshold == pytest.approx(20e-3, abs=0.05e-3)
    assert fit.residual < 1e-6


def test_threshold_scale_and_order_invariance():
    base = extract_threshold(_hockey(knee=23.3e-3)).threshold
    scaled = extract_threshold([(i, 1e3 * p) for i, p in _hockey(knee=23.3e-3)]).threshold
    shuffled = extract_threshold(_hockey(knee=23.3e-3)[::-1]).threshold
    assert scaled == pytest.approx(base, rel=1e-6)
    assert shuffled == pytest.approx(base, rel=1e-9)


def test_no_knee_errors():
    below = [(i, 1e-6 * i) for i in np.linspace(5e-3, 40e-3, 15)]
    with pytest.raises(NoKneeError, match="no knee detected"):
        extract_threshold(below)
    with pytest.raises(NoKneeError):
        extract_threshold([(i, 0.0) for i in np.linspace(5e-3, 40e-3, 15)])
    with pytest.raises(ValueError):
        extract_threshold(_hockey()[:5])


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig("gdcc_qws", ())
    with pytest.raises(ValueError):
        SweepConfig("gdcc_qws", (-1e-3,))
