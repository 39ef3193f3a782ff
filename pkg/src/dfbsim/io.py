"""Output bundles: manifest, CSV series and JSON summaries.

Every run directory gets ``manifest.json`` first and ``COMPLETE`` last, so a
directory without the marker is a partial run.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, config_to_dict, param_overrides
from .device import UNTABULATED
from .engine import RunConfig, TraceRecord
from .observables import Spectrum, facet_power_trace, format_smsr, smsr

COMPLETE_MARKER = "COMPLETE"
FLOAT_FMT = "%.10e"


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def manifest(cfg: RunConfig, warnings=(), extra=None) -> dict:
    overrides = param_overrides(cfg.params)
    warns = list(warnings)
    for name in UNTABULATED:
        source = "overridden" if name in overrides else "default"
        warns.append(f"{name} = {getattr(cfg.params, name)!r} is not tabulated ({source})")
    d = {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(cfg),
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "parameter_overrides": overrides,
        "versions": {"dfbsim": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "warnings": warns,
    }
    if extra:
        d.update(extra)
    return d


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(path: Path, data: dict):
    Path(path).write_text(json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list, columns: list):
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="",
               fmt=FLOAT_FMT)


def write_timeseries(path: Path, trace: TraceRecord):
    _write_csv(path, ["t_s", "re_R_L_m-1.5", "im_R_L_m-1.5", "P_L_m-3", "P_0_m-3", "P_out_W"],
               [trace.times, trace.r_out.real, trace.r_out.imag, trace.p_right,
                trace.p_left, facet_power_trace(trace)])


def write_profiles(path: Path, trace: TraceRecord, times=None):
    """Longitudinal N, n, kappa and P at the requested snapshot instants."""
    from .medium import refractive_index
    cfg = trace.config
    times = cfg.snapshot_times if times is None else times
    z = cfg.grid.z_mid()
    rows = []
    for t in times:
        k = int(np.argmin(np.abs(trace.profile_times - t)))
        n = trace.profile_carriers[k]
        rows.append(np.column_stack([np.full(z.size, trace.profile_times[k]), z, n,
                                     refractive_index(n, cfg.params), trace.kappa,
                                     trace.profile_photons[k]]))
    data = np.vstack(rows) if rows else np.empty((0, 6))
    np.savetxt(path, data, delimiter=",", comments="", fmt=FLOAT_FMT,
               header="t_s,z_m,N_m-3,n_index,kappa_m-1,P_m-3")


def write_sigma(path: Path, report):
    _write_csv(path, ["z_m", "sigma_N_m-3"], [report.z, report.sigma_n])


def write_spectra(path: Path, spectra: dict):
    """``spectra`` maps a label (e.g. window end in s) to a Spectrum."""
    blocks = []
    for label, sp in spectra.items():
        blocks.append(np.column_stack([np.full(sp.psd.size, float(label)), sp.wavelength_axis,
                                       sp.psd, sp.normalized()]))
    np.savetxt(path, np.vstack(blocks), delimiter=",", comments="", fmt=FLOAT_FMT,
               header="t_end_s,lambda_m,psd,psd_norm")


def write_li(path: Path, points, params=None):
    _write_csv(path, ["I_A", "P_out_W", "run_s", "cv_last20"],
               [[p.current for p in points], [p.power for p in points],
                [p.duration for p in points], [p.cv for p in points]])


def spectrum_summary(sp: Spectrum) -> dict:
    main = sp.dominant
    return {
        "window_s": list(sp.window),
        "peak_wavelength_m": main.wavelength if main else None,
        "smsr_db": smsr(sp) if main else None,
        "smsr_text": format_smsr(sp) if main else None,
        "peaks": [{"wavelength_m": p.wavelength, "power": p.power,
                   "prominence_db": p.prominence_db} for p in sp.peaks[:5]],
    }


class OutputBundle:
    """Writes one run directory: manifest first, completion marker last."""

    def __init__(self, root, manifest_data: dict):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        marker = self.root / COMPLETE_MARKER
        if marker.exists():
            marker.unlink()
        write_json(self.root / "manifest.json", manifest_data)

    def path(self, name: str) -> Path:
        return self.root / name

    def finish(self, summary: dict):
        write_json(self.root / "summary.json", {"schema_version": SCHEMA_VERSION, **summary})
        (self.root / COMPLETE_MARKER).write_text("ok\n")


def is_complete(root) -> bool:
    return (Path(root) / COMPLETE_MARKER).exists()
