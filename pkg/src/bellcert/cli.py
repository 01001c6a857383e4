"""Command-line entry point: ``bellcert {analyze,sweep,simulate,coverage}``.

A YAML/JSON config file supplies defaults; flags override it.  Exit codes:
0 ok, 2 config, 3 parse, 4 domain, 5 internal.  Errors are reported on
stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from bellcert._version import __version__
from bellcert.certify import CertificationConfig, certify
from bellcert.config import RunConfigFile, apply_overrides, load_config
from bellcert.exceptions import ConfigError, DomainError, ParseError
from bellcert.ingest import (
    PreselectionWindow,
    dumps_dataset,
    load_dataset,
    sweep_windows,
    write_sweep_csv,
)
from bellcert.simulate import SettingsSource, coverage_counts, make_strategy, run_experiment
from bellcert.simulate.engine import default_workers
from bellcert.validation import check_convention

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_DOMAIN, EXIT_INTERNAL = 0, 2, 3, 4, 5

logger = logging.getLogger("bellcert")


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _window_arg(text: str) -> tuple[float, float]:
    try:
        t_s, t_e = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected TS,TE (two numbers in ns)") from None
    return t_s, t_e


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers") from None


def _grid_arg(text: str) -> list[float]:
    """``START:STOP:STEP`` (inclusive stop) or a comma-separated list."""
    if ":" not in text:
        return _float_list(text)
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected START:STOP:STEP") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("grid step must be positive")
    count = int(round((stop - start) / step)) + 1
    return [start + k * step for k in range(max(count, 0))]


def _convention_arg(text: str) -> Any:
    """``3`` or ``psi_plus=2,psi_minus=0``."""
    if "=" not in text:
        return int(text)
    out = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        out[key.strip()] = int(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML or JSON run configuration")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("-v", "--verbose", action="store_true")

    cert = argparse.ArgumentParser(add_help=False)
    cert.add_argument("--input", metavar="PATH", help="trial log (CSV or JSONL)")
    cert.add_argument("--format", choices=("csv", "jsonl"))
    cert.add_argument("--alpha", type=float, metavar="R", help="one minus the confidence level")
    cert.add_argument("--tau", type=float, metavar="R", help="bound on the setting bias")
    cert.add_argument("--convention", type=_convention_arg, metavar="ID",
                      help="CHSH convention id 0..7, or STATE=ID,STATE=ID")
    cert.add_argument("--window", type=_window_arg, metavar="TS,TE",
                      help="acceptance window on herald time (ns)")

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--strategy", metavar="NAME", help="built-in strategy name")
    source.add_argument("--strategy-file", metavar="PATH", help="strategy table file (JSON)")
    source.add_argument("--n", type=int, metavar="N", help="rounds per run")
    source.add_argument("--settings-tau", type=float, metavar="R")

    parser = _Parser(prog="bellcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bellcert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("analyze", parents=[common, cert], help="certify a trial log")

    p = sub.add_parser("sweep", parents=[common, cert], help="certify over a grid of window starts")
    p.add_argument("--t-s-grid", type=_grid_arg, metavar="GRID",
                   help="START:STOP:STEP or comma-separated list (ns)")
    p.add_argument("--t-e", type=float, metavar="TE", help="window end (ns)")
    p.add_argument("--alphas", type=_float_list, metavar="A,B,...")

    p = sub.add_parser("simulate", parents=[common, source], help="write a simulated trial log")
    p.add_argument("--format", choices=("csv", "jsonl"))

    p = sub.add_parser("coverage", parents=[common, source], help="Monte Carlo coverage check")
    p.add_argument("--runs", type=int, metavar="N")
    p.add_argument("--alphas", type=_float_list, metavar="A,B,...")
    p.add_argument("--workers", type=int, metavar="N",
                   help="worker processes (default: number of processors)")
    return parser


def _effective_config(args) -> RunConfigFile:
    config = load_config(args.config)
    overrides = {
        "out": args.out,
        "seed": args.seed,
        "input": getattr(args, "input", None),
        "format": getattr(args, "format", None),
        "alpha": getattr(args, "alpha", None),
        "tau": getattr(args, "tau", None),
        "convention": getattr(args, "convention", None),
        "window": getattr(args, "window", None),
    }
    if args.command == "sweep":
        overrides.update({"sweep.t_s_grid": args.t_s_grid, "sweep.t_e": args.t_e,
                          "sweep.alphas": args.alphas})
    if args.command in ("simulate", "coverage"):
        section = args.command
        strategy = args.strategy
        params = None
        if args.strategy_file:
            strategy, params = "file", {"path": args.strategy_file}
        overrides.update({f"{section}.strategy": strategy, f"{section}.params": params,
                          f"{section}.n": args.n, f"{section}.settings_tau": args.settings_tau})
        if args.strategy and not args.strategy_file:
            overrides[f"{section}.params"] = {}
    if args.command == "coverage":
        overrides.update({"coverage.runs": args.runs, "coverage.alphas": args.alphas,
                          "workers": args.workers})
    return apply_overrides(config, overrides)


def _cert_config(cfg: RunConfigFile) -> CertificationConfig:
    window = None if cfg.window is None else PreselectionWindow(*cfg.window)
    return CertificationConfig(alpha=cfg.alpha, tau=cfg.tau,
                               convention=check_convention(cfg.convention), window=window)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _require_input(cfg: RunConfigFile) -> str:
    if not cfg.input:
        raise ConfigError("no input trial log given (--input or 'input' in the config)")
    return cfg.input


def _input_echo(dataset) -> dict[str, Any]:
    meta = dataset.metadata
    return {"path": meta.get("source"), "format": meta.get("format"),
            "sha256": dataset.sha256, "file_sha256": meta.get("file_sha256"),
            "n_records": len(dataset)}


def cmd_analyze(cfg: RunConfigFile) -> int:
    cert_cfg = _cert_config(cfg)
    dataset = load_dataset(_require_input(cfg), cfg.format)
    cert = certify(dataset, cert_cfg)
    doc = {"tool_version": __version__, "config": cfg.echo(), "input": _input_echo(dataset),
           "certificate": cert.to_dict()}
    _write(cfg.out, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    if cfg.out is not None:
        print(cert.summary())
    return EXIT_OK


def cmd_sweep(cfg: RunConfigFile) -> int:
    cert_cfg = _cert_config(cfg)
    sweep = cfg.sweep
    if not sweep.t_s_grid:
        raise ConfigError("sweep needs a non-empty t_s grid (--t-s-grid or sweep.t_s_grid)")
    t_e = sweep.t_e if sweep.t_e is not None else (cfg.window[1] if cfg.window else None)
    if t_e is None:
        raise ConfigError("sweep needs a window end (--t-e, sweep.t_e or window)")
    dataset = load_dataset(_require_input(cfg), cfg.format)
    alphas = sweep.alphas or [cfg.alpha]
    rows = sweep_windows(dataset, sorted(sweep.t_s_grid), t_e, cert_cfg.with_(window=None),
                         alphas=alphas)
    if cfg.out is None:
        write_sweep_csv(rows, alphas, sys.stdout)
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            write_sweep_csv(rows, alphas, fh)
        meta = {"tool_version": __version__, "config": cfg.echo(), "input": _input_echo(dataset)}
        _write(cfg.out + ".meta.json", json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _source(section):
    strategy = make_strategy(section.strategy, **section.params)
    settings = SettingsSource(tau=section.settings_tau, mode=section.settings_mode)
    herald = None if section.herald_range is None else tuple(section.herald_range)
    return strategy, settings, herald


def _require_seed(cfg: RunConfigFile) -> int:
    if cfg.seed is None:
        raise ConfigError("a seed is mandatory for simulation (--seed or 'seed' in the config)")
    return cfg.seed


def cmd_simulate(cfg: RunConfigFile) -> int:
    seed = _require_seed(cfg)
    strategy, settings, herald = _source(cfg.simulate)
    ledger = run_experiment(strategy, settings, cfg.simulate.n, seed, herald_range=herald)
    fmt = cfg.format or "csv"
    text = dumps_dataset(ledger.records, fmt)
    _write(cfg.out, text)
    if cfg.out is not None:
        truth = ledger.truth_dict()
        truth["config"] = cfg.echo()
        _write(cfg.out + ".truth.json", json.dumps(truth, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_coverage(cfg: RunConfigFile) -> int:
    seed = _require_seed(cfg)
    section = cfg.coverage
    strategy, settings, herald = _source(section)
    workers = cfg.workers if cfg.workers is not None else default_workers()
    report = coverage_counts(strategy, settings, section.n, section.alphas, section.runs, seed,
                             herald_range=herald, correct_bias=section.correct_bias,
                             workers=workers)
    doc = report.to_dict()
    doc["config"] = cfg.echo()
    doc["config"]["workers"] = None  # result does not depend on the pool size
    _write(cfg.out, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    if cfg.out is not None:
        for row in doc["results"]:
            status = "PASS" if row["pass"] else "FAIL"
            print(f"alpha={row['alpha']:g} coverage={row['empirical_coverage']:.4f} "
                  f">= {row['threshold']:.4f}: {status}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "coverage": cmd_coverage}


def _fail(code: int, exc: BaseException) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        return _fail(EXIT_CONFIG, ConfigError(str(exc)))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _effective_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except ParseError as exc:
        return _fail(EXIT_PARSE, exc)
    except DomainError as exc:
        return _fail(EXIT_DOMAIN, exc)
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal code
        logger.debug("internal error", exc_info=True)
        return _fail(EXIT_INTERNAL, exc)


if __name__ == "__main__":
    sys.exit(main())
