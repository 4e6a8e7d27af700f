"""Command-line entry point: ``mea-sim <subcommand> [options]``."""

from __future__ import annotations

import argparse
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import ExperimentConfig, parse_config
from .errors import BinInfeasible, ConfigError, MeaSimError
from .experiment import EXPERIMENTS, RATE, SELECTION, SERVED, TTEST, run_experiments
from .report import OutputError, atomic_write, json_text, read_csv, write_results

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

SUBCOMMANDS = {
    "selection-accuracy": (SELECTION,),
    "ttest-rounds": (TTEST,),
    "served-ues": (SERVED,),
    "rate-cdf": (RATE,),
    "all": EXPERIMENTS,
    "validate-config": (),
}

EPILOG = f"""\
exit status:
  {EXIT_OK}  success, every requested file written and validated
  {EXIT_ERROR}  unexpected simulation error
  {EXIT_CONFIG}  invalid configuration or usage (the message names the key)
  {EXIT_INFEASIBLE}  a gamma bin could not be reached within the placement budget
  {EXIT_IO}  output could not be written

Every config key can also be set through an environment variable
MEA_SIM_<KEY> (e.g. MEA_SIM_N_DROPS=200). Precedence, lowest first:
defaults, --config file, environment, --set, --seed.
"""


@dataclass
class CliInvocation:
    subcommand: str
    config_path: Optional[str] = None
    overrides: list[str] = field(default_factory=list)
    out_dir: str = "results"
    seed: Optional[int] = None
    workers: int = 1
    format: str = "csv"
    quiet: bool = False


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key=value config file (or .json)")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                        help="override one config key; repeatable")
    common.add_argument("--out", metavar="DIR", default="results", help="output directory")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed (overrides config)")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1, metavar="N",
                        help="worker processes for drop evaluation (default: CPU count)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--quiet", action="store_true", help="no progress output")

    parser = argparse.ArgumentParser(
        prog="mea-sim", description="Switched multi-element antenna small-cell simulator.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    helps = {
        "selection-accuracy": "probability of picking the angle-closest element vs training rounds",
        "ttest-rounds": "rounds until the leading element passes the one-sided Welch test",
        "served-ues": "served UEs for omni, switched and misaligned fixed antennas",
        "rate-cdf": "per-UE rate CDFs and total rates at the 0 dB bin",
        "all": "every experiment on one shared drop pool per bin",
        "validate-config": "print the resolved configuration and exit",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text,
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def resolve_config(inv: CliInvocation) -> ExperimentConfig:
    config = parse_config(inv.config_path, inv.overrides)
    if inv.seed is not None:
        config = config.replace(master_seed=inv.seed)
    return config


def manifest(config: ExperimentConfig, experiments: Sequence[str], result, fmt_name: str) -> dict:
    doc = {
        "version": f"mea-sim {__version__}",
        "master_seed": config.master_seed,
        "config_fingerprint": config.fingerprint(),
        "config": config.as_dict(),
        "experiments": list(experiments),
        "format": fmt_name,
        "placement": result.placement,
    }
    for name, rec in result.records.items():
        if rec.extra:
            doc[name] = rec.extra
    if SELECTION in result.records:
        doc["single_round_sufficiency"] = result.records[SELECTION].extra["single_round_sufficiency"]
    return doc


def _validate_outputs(paths: Sequence[Path]) -> None:
    for p in paths:
        if not p.is_file() or p.stat().st_size == 0:
            raise OutputError(f"missing or empty output {p}")
        if p.suffix == ".csv":
            read_csv(p)


def run(inv: CliInvocation, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        config = resolve_config(inv)
        if inv.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if inv.subcommand == "validate-config":
            for key, value in config.as_dict().items():
                if isinstance(value, list):
                    value = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
                stdout.write(f"{key}={'random' if value is None else value}\n")
            return EXIT_OK

        experiments = SUBCOMMANDS[inv.subcommand]
        progress = None if inv.quiet else (lambda msg: print(msg, file=stderr, flush=True))
        result = run_experiments(config, experiments, workers=inv.workers, progress=progress)

        out = Path(inv.out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            staging = Path(tempfile.mkdtemp(dir=out, prefix=".staging-"))
        except OSError as exc:
            raise OutputError(f"cannot prepare {out}: {exc}") from exc
        try:
            staged = []
            for name in experiments:
                staged += write_results(result.records[name], staging, inv.format)
            mpath = staging / "run_manifest.json"
            atomic_write(mpath, json_text(manifest(config, experiments, result, inv.format)))
            staged.append(mpath)
            _validate_outputs(staged)
            final = []
            for p in staged:
                os.replace(p, out / p.name)
                final.append(out / p.name)
        except OSError as exc:
            raise OutputError(f"cannot finalise outputs in {out}: {exc}") from exc
        finally:
            shutil.rmtree(staging, ignore_errors=True)
        if progress:
            progress(f"wrote {len(final)} files to {out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"mea-sim: config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except BinInfeasible as exc:
        print(f"mea-sim: {exc}", file=stderr)
        return EXIT_INFEASIBLE
    except OutputError as exc:
        print(f"mea-sim: output error: {exc}", file=stderr)
        return EXIT_IO
    except MeaSimError as exc:
        print(f"mea-sim: error: {exc}", file=stderr)
        return EXIT_ERROR


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    inv = CliInvocation(
        subcommand=args.subcommand, config_path=args.config, overrides=args.overrides,
        out_dir=args.out, seed=args.seed, workers=args.workers, format=args.format,
        quiet=args.quiet)
    return run(inv)


if __name__ == "__main__":
    sys.exit(main())
