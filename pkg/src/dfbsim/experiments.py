"""Canned scenarios: 20 mA and 100 mA step responses, L-I curves, spectra
and hole-burning diagnostics for the conventional and GDCC QWS lasers."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .engine import RunConfig, TraceRecord, run_transient
from .observables import (HoleBurningReport, LIPoint, NoKneeError, Spectrum,
                          SweepConfig, ThresholdFit, carrier_std, compute_spectrum,
                          extract_threshold, facet_power_trace, li_sweep, smsr)

PAIR = ("conventional_qws", "gdcc_qws")
T1 = 3e-9
T2 = 10e-9
SPECTRUM_WINDOW = 1e-9


def _run_many(configs, workers):
    if workers <= 1 or len(configs) == 1:
        return [run_transient(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_transient, configs))


def steady_power(trace: TraceRecord, fraction: float = 0.2) -> float:
    p = facet_power_trace(trace)
    return float(p[int(round((1 - fraction) * p.size)):].mean())


# --------------------------------------------------------------------------


@dataclass
class PairResult:
    traces: dict

    def __getitem__(self, structure) -> TraceRecord:
        return self.traces[structure]


def scenario_fig2(n_sections: int = 1000, seed: int = 0, workers: int = 1,
                  current: float = 20e-3, duration: float = 10e-9, **options) -> PairResult:
    """Both structures stepped from 0 to 20 mA."""
    cfgs = [RunConfig(s, current, duration, n_sections=n_sections, seed=seed, **options)
            for s in PAIR]
    return PairResult(dict(zip(PAIR, _run_many(cfgs, workers))))


@dataclass
class LICurve:
    structure: str
    points: list
    fit: ThresholdFit | None
    error: str | None = None

    @property
    def threshold(self) -> float | None:
        return self.fit.threshold if self.fit else None

    def as_pairs(self):
        return [(p.current, p.power) for p in self.points]


def _li_curve(structure, currents, n_sections, seed, duration, workers, options):
    cfg = SweepConfig(structure, tuple(currents), duration=duration,
                      n_sections=n_sections, seed=seed, workers=workers,
                      run_options=options)
    points = li_sweep(cfg)
    try:
        fit, err = extract_threshold([(p.current, p.power) for p in points]), None
    except NoKneeError as exc:
        fit, err = None, str(exc)
    return LICurve(structure, points, fit, err)


def scenario_fig3(n_sections: int = 1000, seed: int = 0, currents=None,
                  duration: float = 8e-9, workers: int = 1, **options) -> dict:
    """L-I curves and extracted thresholds for both structures."""
    if currents is None:
        currents = np.linspace(5e-3, 40e-3, 15)
    currents = [float(i) for i in currents]
    if not currents:
        raise ValueError("current list is empty")
    return {s: _li_curve(s, currents, n_sections, seed, duration, workers, options)
            for s in PAIR}


@dataclass
class DynamicsResult:
    trace: TraceRecord
    spectra: dict               # window end (s) -> Spectrum
    holeburning: HoleBurningReport
    output_variance: float      # variance of facet power over [t1, t2], W^2

    def smsr_at(self, t: float) -> float:
        return smsr(self.spectra[t])

    def peak_wavelength(self, t: float) -> float:
        return self.spectra[t].dominant.wavelength


def analyse_dynamics(trace: TraceRecord, t1: float = T1, t2: float = T2,
                     window: float = SPECTRUM_WINDOW) -> DynamicsResult:
    spectra = {t: compute_spectrum(trace, (t - window, t)) for t in (t1, t2)}
    hb = carrier_std(trace, (t1, t2))
    sel = trace.window(t1, t2)
    var = float(np.var(facet_power_trace(trace)[sel]))
    return DynamicsResult(trace, spectra, hb, var)


def scenario_fig456(n_sections: int = 1000, seed: int = 0, workers: int = 1,
                    current: float = 100e-3, t1: float = T1, t2: float = T2,
                    window: float = SPECTRUM_WINDOW, **options) -> dict:
    """100 mA step: traces, spectra at t1 and t2, sigma(N) over [t1, t2]."""
    cfgs = [RunConfig(s, current, t2, n_sections=n_sections, seed=seed,
                      snapshot_times=(t1, t2), **options) for s in PAIR]
    traces = _run_many(cfgs, workers)
    return {s: analyse_dynamics(tr, t1, t2, window) for s, tr in zip(PAIR, traces)}


# --------------------------------------------------------------------------
# writers


def _trace_summary(trace: TraceRecord) -> dict:
    return {
        "steady_power_W": steady_power(trace),
        "clamp_events": trace.clamp_events,
        "divergences": 0,
        "steps": trace.steps,
        "runtime_s": trace.wall_seconds,
        "steps_per_s": trace.steps / trace.wall_seconds if trace.wall_seconds else None,
    }


def write_run(outdir, trace: TraceRecord, spectra: dict | None = None,
              extra_summary: dict | None = None) -> Path:
    """Write a single-run bundle: manifest, timeseries, profiles, spectra."""
    cfg = trace.config
    bundle = io.OutputBundle(outdir, io.manifest(cfg))
    io.write_timeseries(bundle.path("timeseries.csv"), trace)
    io.write_profiles(bundle.path("profiles.csv"), trace)
    summary = _trace_summary(trace)
    if spectra:
        io.write_spectra(bundle.path("spectra.csv"), spectra)
        summary["spectra"] = [io.spectrum_summary(sp) for sp in spectra.values()]
    summary.update(extra_summary or {})
    bundle.finish(summary)
    return bundle.root


def write_fig2(outdir, result: PairResult) -> Path:
    outdir = Path(outdir)
    summary = {}
    for s in PAIR:
        write_run(outdir / s, result[s])
        summary[s] = _trace_summary(result[s])
    bundle = io.OutputBundle(outdir, {"scenario": "fig2", "schema_version": 1,
                                      "runs": {s: io.manifest(result[s].config) for s in PAIR}})
    for s in PAIR:
        io.write_timeseries(bundle.path(f"timeseries_{s}.csv"), result[s])
    bundle.finish({"scenario": "fig2", **summary})
    return outdir


def write_li(outdir, curves: dict, manifest_extra: dict | None = None) -> Path:
    outdir = Path(outdir)
    bundle = io.OutputBundle(outdir, {"scenario": "li", "schema_version": 1,
                                      **(manifest_extra or {})})
    summary = {}
    for s, curve in curves.items():
        io.write_li(bundle.path(f"li_{s}.csv"), curve.points)
        summary[s] = {
            "threshold_A": curve.threshold,
            "fit_residual": curve.fit.residual if curve.fit else None,
            "slope_efficiency_W_per_A": curve.fit.slope_above if curve.fit else None,
            "error": curve.error,
            "clamp_events": sum(p.clamp_events for p in curve.points),
        }
    bundle.finish(summary)
    return outdir


def write_fig456(outdir, results: dict) -> Path:
    outdir = Path(outdir)
    summary = {}
    for s, res in results.items():
        hb = res.holeburning
        write_run(outdir / s, res.trace, res.spectra)
        io.write_sigma(outdir / s / "sigma_n.csv", hb)
        summary[s] = {
            "smsr_db": {f"{t:.3e}": res.smsr_at(t) for t in res.spectra},
            "peak_wavelength_m": {f"{t:.3e}": res.peak_wavelength(t) for t in res.spectra},
            "facet_sigma_N_m-3": hb.facet_sigma(),
            "output_variance_W2": res.output_variance,
            **_trace_summary(res.trace),
        }
    if set(PAIR) <= set(results):
        summary["variance_ratio_conv_over_gdcc"] = (
            results[PAIR[0]].output_variance / results[PAIR[1]].output_variance)
    bundle = io.OutputBundle(outdir, {"scenario": "fig456", "schema_version": 1,
                                      "runs": {s: io.manifest(r.trace.config)
                                               for s, r in results.items()}})
    bundle.finish({"scenario": "fig456", "generated": time.strftime("%Y-%m-%dT%H:%M:%S"),
                   **summary})
    return outdir
