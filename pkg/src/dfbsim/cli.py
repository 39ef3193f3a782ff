"""Command-line entry point: ``dfbsim <command> [options]``.

Output directories default to ``$DFBSIM_OUTPUT/<command>`` (``./dfbsim-output``
when the variable is unset).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, io
from .config import (ConfigError, build_run_config, config_from_dict, parse_config,
                     parse_quantity, parse_text)
from .engine import BudgetExceeded, DivergenceError, RunConfig, run_transient
from .observables import compute_spectrum, spectrum_from_samples
from .selftest import run_selftest

log = logging.getLogger("dfbsim")

ENV_OUTPUT = "DFBSIM_OUTPUT"
ALIASES = {"conventional": "conventional_qws", "conv": "conventional_qws",
           "gdcc": "gdcc_qws"}


def _structure(text):
    return ALIASES.get(text, text)


def _quantity(dimension):
    def parse(text):
        try:
            return parse_quantity(text, dimension)
        except ConfigError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    parse.__name__ = dimension
    return parse


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(ENV_OUTPUT, "dfbsim-output")) / args.command


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")
    p.add_argument("--grid", type=int, default=1000, metavar="M",
                   help="number of longitudinal sections (default 1000)")
    p.add_argument("--out", help=f"output directory (default ${ENV_OUTPUT}/<command>)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--config", help="text config or manifest.json with run settings")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dfbsim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("run", help="single transient run")
    _common(p)
    p.add_argument("--structure", type=_structure)
    p.add_argument("--current", type=_quantity("current"), help="e.g. 100mA")
    p.add_argument("--duration", type=_quantity("time"), help="e.g. 10ns")
    p.add_argument("--spectrum-window", type=_quantity("time"), default=1e-9,
                   help="spectrum of the final window of this length (default 1ns)")

    p = sub.add_parser("li", help="light-current sweep with threshold fit")
    _common(p)
    p.add_argument("--structure", type=_structure, required=True)
    p.add_argument("--from", dest="start", type=_quantity("current"), default=5e-3)
    p.add_argument("--to", dest="stop", type=_quantity("current"), default=40e-3)
    p.add_argument("--points", type=int, default=15)
    p.add_argument("--duration", type=_quantity("time"), default=8e-9,
                   help="run length per point (default 8ns)")

    p = sub.add_parser("spectrum", help="spectrum of a finished run directory")
    p.add_argument("run_dir")
    p.add_argument("--start", type=_quantity("time"), help="window start")
    p.add_argument("--end", type=_quantity("time"), help="window end (default last sample)")
    p.add_argument("--out", help="output directory (default: the run directory)")

    for name, text in (("fig2", "20 mA step response, both structures"),
                       ("fig3", "L-I curves and thresholds, both structures"),
                       ("fig456", "100 mA dynamics, spectra and hole burning")):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "fig3":
            p.add_argument("--from", dest="start", type=_quantity("current"), default=5e-3)
            p.add_argument("--to", dest="stop", type=_quantity("current"), default=40e-3)
            p.add_argument("--points", type=int, default=15)

    sub.add_parser("selftest", help="fast invariant checks")
    return ap


SCENARIO_KEYS = ("carrier_subcycle", "record_stride", "profile_interval", "noise",
                 "lambda_ref", "max_steps", "max_wall_seconds")


def _run_options(args) -> dict:
    """Parameter overrides and numerical settings from --config for scenarios.

    Structure, current and duration are fixed by the scenario itself and
    are ignored if present.
    """
    if not getattr(args, "config", None):
        return {}
    cfg = parse_config_lenient(args.config)
    opts = {k: getattr(cfg, k) for k in SCENARIO_KEYS}
    opts["params"] = cfg.params
    return opts


def parse_config_lenient(path):
    """Like parse_config but supplies a placeholder structure if missing."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        return parse_config(path)
    run, overrides = parse_text(text, str(path))
    run.setdefault("structure", "gdcc_qws")
    run.setdefault("current", 0.0)
    run.setdefault("duration", 1e-9)
    run.pop("snapshot_times", None)
    return build_run_config(run, overrides)


def _cmd_run(args) -> int:
    if args.config:
        cfg = parse_config(args.config)
        changes = {k: v for k, v in (("structure", args.structure), ("current", args.current),
                                     ("duration", args.duration)) if v is not None}
        cfg = cfg.replace(**changes)
    else:
        missing = [k for k in ("structure", "current", "duration") if getattr(args, k) is None]
        if missing:
            raise ConfigError("run needs --config or " + ", ".join("--" + m for m in missing))
        cfg = RunConfig(args.structure, args.current, args.duration)
    if args.grid != 1000 or not args.config:
        cfg = cfg.replace(n_sections=args.grid)
    if args.seed or not args.config:
        cfg = cfg.replace(seed=args.seed)
    if not cfg.snapshot_times:
        cfg = cfg.replace(snapshot_times=(cfg.duration,))
    trace = run_transient(cfg)
    spectra = {}
    t_end = trace.times[-1]
    try:
        spectra[t_end] = compute_spectrum(trace, (t_end - args.spectrum_window, t_end))
    except ValueError as exc:
        log.warning("no spectrum: %s", exc)
    out = experiments.write_run(_out_dir(args), trace, spectra)
    print(f"wrote {out}")
    return 0


def _cmd_li(args) -> int:
    if args.points < 1:
        raise ConfigError("--points must be >= 1")
    currents = np.linspace(args.start, args.stop, args.points)
    curve = experiments._li_curve(args.structure, currents, args.grid, args.seed,
                                  args.duration, args.workers, _run_options(args))
    out = experiments.write_li(_out_dir(args), {args.structure: curve},
                               {"structure": args.structure, "seed": args.seed,
                                "n_sections": args.grid, "duration_per_point_s": args.duration})
    th = curve.threshold
    print(f"threshold: {th * 1e3:.3f} mA" if th else f"threshold: none ({curve.error})")
    print(f"wrote {out}")
    return 0


def _cmd_spectrum(args) -> int:
    root = Path(args.run_dir)
    man = json.loads((root / "manifest.json").read_text())
    cfg = config_from_dict(man["config"])
    data = np.loadtxt(root / "timeseries.csv", delimiter=",", skiprows=1, ndmin=2)
    t, env = data[:, 0], data[:, 1] + 1j * data[:, 2]
    dt = float(t[1] - t[0])
    end = t[-1] + dt / 2 if args.end is None else args.end
    start = max(t[0] - dt / 2, end - 1e-9) if args.start is None else args.start
    sel = (t >= start) & (t < end)
    lam = cfg.params.lambda_bragg if cfg.lambda_ref is None else cfg.lambda_ref
    sp = spectrum_from_samples(env[sel], dt, lam, window=(start, end))
    out = Path(args.out) if args.out else root
    out.mkdir(parents=True, exist_ok=True)
    io.write_spectra(out / "spectrum.csv", {end: sp})
    io.write_json(out / "spectrum.json", io.spectrum_summary(sp))
    print(f"wrote {out / 'spectrum.csv'}")
    return 0


def _cmd_fig2(args) -> int:
    res = experiments.scenario_fig2(args.grid, args.seed, args.workers, **_run_options(args))
    print(f"wrote {experiments.write_fig2(_out_dir(args), res)}")
    return 0


def _cmd_fig3(args) -> int:
    currents = np.linspace(args.start, args.stop, args.points)
    curves = experiments.scenario_fig3(args.grid, args.seed, currents,
                                       workers=args.workers, **_run_options(args))
    for s, c in curves.items():
        print(f"{s}: threshold "
              + (f"{c.threshold * 1e3:.3f} mA" if c.threshold else f"none ({c.error})"))
    out = experiments.write_li(_out_dir(args), curves,
                               {"seed": args.seed, "n_sections": args.grid})
    print(f"wrote {out}")
    return 0


def _cmd_fig456(args) -> int:
    res = experiments.scenario_fig456(args.grid, args.seed, args.workers, **_run_options(args))
    for s, r in res.items():
        print(f"{s}: SMSR " + ", ".join(f"{t * 1e9:g} ns {r.smsr_at(t):.1f} dB"
                                        for t in r.spectra))
    print(f"wrote {experiments.write_fig456(_out_dir(args), res)}")
    return 0


def _cmd_selftest(args) -> int:
    return 0 if run_selftest() else 1


COMMANDS = {"run": _cmd_run, "li": _cmd_li, "spectrum": _cmd_spectrum, "fig2": _cmd_fig2,
            "fig3": _cmd_fig3, "fig456": _cmd_fig456, "selftest": _cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, BudgetExceeded, FileNotFoundError) as exc:
        print(f"dfbsim: error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"dfbsim: simulation diverged: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"dfbsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
