"""Command-line interface.

Usage: overdamp <subcommand> --config FILE [--seed N] [--workers N]
                [--out DIR] [--allow-heavy-tails]

Each subcommand builds one artifact directory out/<subcommand>/<name>/ holding
CSV files, a summary figure, and a manifest.  The directory name is the config
file stem plus a hash prefix of the fully resolved configuration, so re-running
the same experiment overwrites its own artifact and nothing else.  Artifacts
are assembled in a temporary directory and swapped in whole; a failed run
leaves no partial output.

Exit codes: 0 success, 2 configuration or usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, config_hash, parse_config, serialize_config
from .figures import render
from .recipes import RECIPES

_SUBCOMMAND_HELP = {
    "simulate": "dump raw Langevin and overdamped-reference trajectories",
    "residuals": "pointwise corrector residuals R1 and R2 on sampled phase points",
    "converge": "weak error of position marginals against the overdamped reference",
    "moments": "momentum moment curves with grid and pathwise suprema",
    "ladder": "windowed martingale-ladder statistic per ensemble",
    "modulus": "tightness modulus of squared observable increments",
    "rest-terms": "pathwise rest-term statistics E[sup R1], E[int R2]",
    "crystal": "oscillating-potential example in fading and fixed regimes",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overdamp",
        description="Langevin dynamics on the torus and its overdamped limit.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="subcommand")
    for name in RECIPES:
        p = sub.add_parser(name, help=_SUBCOMMAND_HELP[name])
        p.add_argument("--config", required=True,
                       help="experiment config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for trajectory blocks")
        p.add_argument("--out", default="out",
                       help="artifact root directory (default: out)")
        p.add_argument("--allow-heavy-tails", action="store_true",
                       help="accept initial momentum laws whose third moment "
                            "does not vanish with eps")
    return parser


def _write_manifest(path: Path, cfg, command: str, digest: str,
                    schema: dict) -> None:
    import matplotlib
    import numpy

    lines = [
        f"command = {command}",
        f"config_hash = {digest}",
        f"seed = {cfg.seed}",
        f"package = overdamp {__version__}",
        f"python = {sys.version.split()[0]}",
        f"numpy = {numpy.__version__}",
        f"matplotlib = {matplotlib.__version__}",
        "",
        "[schema]",
    ]
    for name in sorted(schema):
        lines.append(f"{name} = {','.join(schema[name])}")
    lines += ["", "[config]", serialize_config(cfg).rstrip("\n"), ""]
    path.write_text("\n".join(lines))


def run(command: str, cfg, out_base: Path, stem: str, workers: int = 1) -> Path:
    """Build the artifact directory for one subcommand and return its path."""
    digest = config_hash(cfg)
    target = out_base / command / f"{stem}-{digest[:8]}"
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".build-", dir=target.parent))
    try:
        schema = RECIPES[command](cfg, tmp, workers)
        render(command, tmp)
        _write_manifest(tmp / "manifest", cfg, command, digest, schema)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if target.exists():
        shutil.rmtree(target)
    os.replace(tmp, target)
    return target


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.workers < 1:
        print("workers must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config, allow_heavy_tails=args.allow_heavy_tails)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(["seed: must fit in 64 bits"])
            cfg = replace(cfg, seed=args.seed)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    try:
        target = run(args.command, cfg, Path(args.out), Path(args.config).stem,
                     workers=args.workers)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001  (CLI boundary: report and exit 1)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    print(target)
    return 0


if __name__ == "__main__":
    sys.exit(main())
