"""Command-line entry point: ``latentwave <verb> [--config PATH] [--seed N] [--out DIR] [--force]``."""
from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from .config import ConfigError, MissingDependencyError, NumericError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4

# the output each verb owns, relative to --out
OUTPUTS = {
    "gen-data": "data",
    "train-aeno": "checkpoints/aeno.json",
    "train-sno": "checkpoints/sno.json",
    "train-fm": "checkpoints/flow.json",
    "sample": "samples",
    "evaluate": "eval",
    "calibrate": "calibration",
    "report": "report.json",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latentwave", description="Latent operator flow matching on toy wavefields.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, help="run directory")
    common.add_argument("--force", action="store_true", help="overwrite existing stage output")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("gen-data", "train-aeno", "train-sno", "train-fm", "calibrate", "report"):
        sub.add_parser(verb, parents=[common])
    s = sub.add_parser("sample", parents=[common])
    s.add_argument("--conditions", type=Path, help="JSON list of [x, y, magnitude]; defaults to the test split")
    s.add_argument("--n", type=int, help="realizations per condition")
    s.add_argument("--grid", type=int, nargs=3, metavar=("NX", "NY", "NT"), help="output grid")
    s.add_argument("--calibrate", action="store_true", help="apply interpolated bias curves")
    s.add_argument("--bandlimit", action="store_true", help="project decoded fields onto the low-pass subspace")
    s.add_argument("--samples", type=Path, help="output directory (default <out>/samples)")
    e = sub.add_parser("evaluate", parents=[common])
    e.add_argument("--samples", type=Path, help="sample directory (default <out>/samples)")
    e.add_argument("--split", default="test")
    e.add_argument("--no-sweep", action="store_true", help="skip the magnitude sweep")
    return p


def _claim(target: Path, force: bool) -> None:
    if target.exists():
        if not force:
            raise ConfigError(f"{target} exists; pass --force to overwrite")
        if target.is_dir():
            shutil.rmtree(target)
        else:
            target.unlink()


def _write_stage_manifest(cfg: dict, verb: str, directory: Path, result) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    payload = {"stage": verb, "seed": cfg["seed"], "config": cfg, "result": result}
    (directory / f"{verb}.manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _read_conditions(path: Path):
    from ..operators import Condition
    try:
        rows = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read conditions file {path}: {exc}") from exc
    try:
        return [Condition((float(r[0]), float(r[1])), float(r[2])) for r in rows]
    except (TypeError, IndexError, ValueError) as exc:
        raise ConfigError("conditions must be a list of [x, y, magnitude]") from exc


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, out=str(args.out) if args.out else None)
        return _dispatch(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingDependencyError, FileNotFoundError) as exc:
        print(f"missing dependency: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _dispatch(args, cfg) -> int:
    from . import stages
    from .dataset import generate, load_split

    root = Path(cfg["out"])
    verb = args.verb
    if verb == "gen-data":
        target = root / OUTPUTS[verb]
        _claim(target, args.force)
        generate(cfg, target)
        print(f"wrote dataset to {target}")
        return EXIT_OK
    if verb in ("train-aeno", "train-sno", "train-fm"):
        target = root / OUTPUTS[verb]
        _claim(target, args.force)
        fn = {"train-aeno": stages.train_aeno, "train-sno": stages.train_sno, "train-fm": stages.train_fm}[verb]
        result = fn(cfg)
        _write_stage_manifest(cfg, verb, target.parent, result)
        print(f"{verb}: loss {result['first']:.4g} -> {result['last']:.4g} over {result['epochs']} epochs")
        return EXIT_OK
    if verb == "sample":
        target = args.samples or root / OUTPUTS[verb]
        _claim(target, args.force)
        ids = None
        if args.conditions:
            conditions = _read_conditions(args.conditions)
        else:
            split = load_split(stages.data_dir(cfg), "test")
            conditions = stages._conditions(split.conditions)
            ids = [r["id"] for r in split.records]
        cal_dir = root / OUTPUTS["calibrate"] if args.calibrate else None
        if cal_dir is not None and not cal_dir.exists():
            raise MissingDependencyError(f"no calibration curves at {cal_dir}; run calibrate first")
        n = args.n or cfg["sample"]["n_per_condition"]
        manifest = stages.sample(cfg, conditions, n, cfg["seed"], target, ids, cal_dir, args.grid,
                                 args.bandlimit or None)
        print(f"wrote {n * len(manifest['conditions'])} fields to {target}")
        return EXIT_OK
    if verb == "evaluate":
        target = root / OUTPUTS[verb]
        _claim(target, args.force)
        report = stages.evaluate(cfg, args.samples or root / OUTPUTS["sample"], target, args.split,
                                 sweep=not args.no_sweep)
        print(f"mean PGV correlation {report['pgv_corr_mean']:.3f}")
        return EXIT_OK
    if verb == "calibrate":
        target = root / OUTPUTS[verb]
        _claim(target, args.force)
        closure = stages.calibrate(cfg, target)
        worst = max(v["max_abs_mean_residual"] for v in closure.values())
        print(f"wrote bias curves to {target}; closure residual {worst:.2e}")
        return EXIT_OK
    if verb == "report":
        target = root / OUTPUTS[verb]
        _claim(target, args.force)
        stages.report(cfg, target)
        print(f"wrote {target}")
        return EXIT_OK
    raise ConfigError(f"unknown verb {verb}")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
