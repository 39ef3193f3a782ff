"""Fast invariant checks runnable from the command line (a few seconds)."""

from __future__ import annotations

import math

import numpy as np

from .device import DeviceParams, GratingProfile, SimGrid, kappa0_for_mean
from .engine import (LaserState, carrier_rhs, noise_variance, step_carriers,
                     step_fields, transparency_current)
from .medium import material_gain
from .rng import NoiseSource, philox4x32


def _check_kappa():
    v = kappa0_for_mean(1.0, 2.50)
    return abs(v - 2.7098) <= 1e-3, f"kappa0L(G=1) = {v:.5f}"


def _check_transparency():
    i = transparency_current(DeviceParams())
    return abs(i - 10.1e-3) <= 0.1e-3, f"I_tr = {i * 1e3:.3f} mA"


def _check_philox():
    got = philox4x32(0, 0, 0, 0, 0, 0)
    want = (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)
    return tuple(int(x) for x in got) == want, "Philox4x32-10 zero vector"


def _check_amplification():
    params = DeviceParams(eps_compression=0.0, dn_dN=0.0)
    grid = SimGrid.for_device(params, 100)
    m = grid.n_sections
    profile = GratingProfile(np.zeros(m), np.zeros(m), 0.0, 0.0)
    lam = params.lambda_bragg
    n = 1.5 * params.n_transparency
    state = LaserState.zeros(grid.n_sections)
    state.carriers[:] = n
    state.r_fwd[0] = 1.0
    for _ in range(grid.n_sections - 1):
        state, _, _ = step_fields(state, profile, grid, params, lambda_ref=lam)
    g = params.confinement * material_gain(n, lam, params) - params.alpha_loss
    expect = math.exp(0.5 * g * grid.dz * (grid.n_sections - 1))
    err = abs(abs(state.r_fwd[-1]) / expect - 1)
    return err < 1e-6, f"|R| ratio error {err:.2e}"


def _check_carrier_decay():
    params = DeviceParams(b_radiative=1e-30, c_auger=1e-60)
    grid = SimGrid.for_device(params, 1000)
    state = LaserState.zeros(1000)
    state.carriers[:] = 1e24
    n_steps = 1000
    for _ in range(n_steps):
        state = step_carriers(state, grid, params, 0.0)
    t = n_steps * grid.carrier_subcycle * grid.dt
    want = 1e24 * math.exp(-t / params.tau_carrier)
    err = abs(state.carriers[0] / want - 1)
    return err < 1e-4, f"decay error {err:.2e}"


def _check_fixed_point():
    params = DeviceParams()
    n0 = params.n_transparency
    i_tr = transparency_current(params)
    rhs = float(carrier_rhs(n0, 0.0, i_tr, params))
    return abs(rhs) * params.tau_carrier < 1e-9 * n0, f"dN/dt at N_tr = {rhs:.3e}"


def _check_noise():
    params = DeviceParams()
    grid = SimGrid.for_device(params, 1000)
    z = NoiseSource(seed=11).unit_pairs(np.arange(100)[:, None], np.arange(1000))[0].ravel()
    m = abs(z.mean())
    var = np.mean(np.abs(z) ** 2)
    ok = m < 4 * math.sqrt(2 / z.size) and abs(var - 2) < 0.02
    v = noise_variance(2e24, grid, params)
    return ok and v > 0, f"unit pair mean {m:.1e}, <|z|^2> = {var:.4f}"


CHECKS = {
    "kappa normalization": _check_kappa,
    "transparency current": _check_transparency,
    "counter RNG known answer": _check_philox,
    "kappa=0 amplification": _check_amplification,
    "carrier decay": _check_carrier_decay,
    "carrier fixed point": _check_fixed_point,
    "noise statistics": _check_noise,
}


def run_selftest(out=print) -> bool:
    ok_all = True
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # report and continue
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all
