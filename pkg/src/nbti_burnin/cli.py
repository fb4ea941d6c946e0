"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 model domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .device_models import StressCondition
from .errors import ConfigError, DomainError
from .harness import (
    ScenarioConfig,
    calibration_report,
    effective_params,
    emit_powerlaw_series,
    equivalence_report,
    load_scenario,
    preset_scenario,
    reproduce_tables,
    run_full,
)

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4


def _config(args) -> ScenarioConfig:
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    cfg = (load_scenario(args.config) if args.config
           else preset_scenario(args.preset or "table1"))
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.samples is not None:
        changes["samples"] = args.samples
    if args.out is not None:
        changes["out_dir"] = Path(args.out)
    return cfg.replace(**changes) if changes else cfg


def _emit(text: str):
    sys.stdout.write(text)


def cmd_run(args):
    cfg = _config(args)
    mode = args.mode or ("full" if cfg.mode in ("tables", "equivalence") else cfg.mode)
    cfg = cfg.replace(mode=mode)
    manifest = run_full(cfg)
    if args.format == "json":
        _emit(manifest.to_json())
    else:
        for name, entry in sorted(manifest.files.items()):
            _emit(f"{name}\t{Path(cfg.out_dir) / entry['path']}\n")
        comp = Path(cfg.out_dir) / "comparison.csv"
        if comp.exists():
            _emit(comp.read_text(encoding="utf-8"))
    return EXIT_OK


def cmd_stress(args):
    args.mode = "stress"
    return cmd_run(args)


def cmd_playback(args):
    cfg = _config(args)
    stress_file = args.stress_file or cfg.stress_file or str(Path(cfg.out_dir) / "stress.tsv")
    if not Path(stress_file).is_file():
        raise ConfigError(f"stress file {stress_file} does not exist")
    args.mode = "playback"
    cfg = cfg.replace(mode="playback", stress_file=stress_file)
    manifest = run_full(cfg)
    _emit(manifest.to_json() if args.format == "json"
          else (Path(cfg.out_dir) / "comparison.csv").read_text(encoding="utf-8"))
    return EXIT_OK


def cmd_tables(args):
    cfg = _config(args)
    diff = reproduce_tables(cfg.params, calibrated=cfg.calibrate)
    cal = calibration_report(cfg.params, cfg.anchor)
    if args.format == "json":
        _emit(diff.to_json())
    else:
        _emit(diff.to_csv())
        _emit("\n" + cal.render())
    return EXIT_OK if diff.ok else EXIT_DOMAIN


def cmd_powerlaw(args):
    cfg = _config(args)
    params = effective_params(cfg)
    series = emit_powerlaw_series(params, temp_c=args.temp)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "powerlaw.csv").write_text(series.to_csv(), encoding="utf-8", newline="\n")
    (out / "powerlaw_fit.csv").write_text(series.fits_csv(), encoding="utf-8", newline="\n")
    if args.format == "json":
        _emit(json.dumps({f"{v:g}": {"prefactor": a, "slope": n}
                          for v, (a, n) in series.fits.items()}, indent=2) + "\n")
    else:
        _emit(series.fits_csv())
    return EXIT_OK


def cmd_equivalence(args):
    cfg = _config(args)
    rep = equivalence_report(cfg.params, StressCondition(args.stress_v, args.stress_temp),
                             StressCondition(args.use_v, args.use_temp), args.hours)
    _emit(rep.to_json() if args.format == "json" else rep.render() if args.format == "text"
          else rep.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario INI file (default: built-in burn-in scenario)")
    common.add_argument("--preset", help="built-in scenario: table1 (default) or experiment")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int, help="Monte Carlo sample count")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json", "text"), default="csv")

    parser = argparse.ArgumentParser(prog="nbti-burnin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", parents=[common], help="fresh -> stress -> playback -> metrics")
    p.add_argument("--mode", choices=("fresh", "stress", "playback", "full"))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("stress", parents=[common], help="stress mode only; writes stress.tsv")
    p.set_defaults(func=cmd_stress, mode="stress")

    p = sub.add_parser("playback", parents=[common], help="replay an existing stress file")
    p.add_argument("--stress-file")
    p.set_defaults(func=cmd_playback)

    p = sub.add_parser("tables", parents=[common], help="diff recomputed published tables")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("powerlaw", parents=[common], help="emit shift-vs-time series")
    p.add_argument("--temp", type=float, default=110.0)
    p.set_defaults(func=cmd_powerlaw)

    p = sub.add_parser("equivalence", parents=[common], help="burn-in to use-time equivalence")
    p.add_argument("--hours", type=float, default=168.0)
    p.add_argument("--stress-v", type=float, default=4.6)
    p.add_argument("--use-v", type=float, default=3.3)
    p.add_argument("--stress-temp", type=float, default=110.0)
    p.add_argument("--use-temp", type=float, default=110.0)
    p.set_defaults(func=cmd_equivalence)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
