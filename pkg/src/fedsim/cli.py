"""Command-line driver.

    fedsim run --preset inconsistency-demo --seed 7 --out ./results
    fedsim run --config exp.json --rounds 50 --out ./results
    fedsim run --manifest ./results/manifest.json --out ./rerun
    fedsim validate-config exp.json

Exit codes: 0 success, 1 configuration error, 2 divergence.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .config import ALGORITHMS, OBJECTIVES, POLICIES, ExperimentConfig, build_run, load_config, parse_partition
from .engine import run
from .errors import ConfigurationError, FedSimError
from .presets import PRESETS, expand_preset
from .results import emit_csv, oracle_to_json, read_manifest, write_manifest

log = logging.getLogger("fedsim")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{message}\n\n{self.format_usage()}")


def _run_flags(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", metavar="FILE")
    src.add_argument("--manifest", metavar="FILE", help="re-run every run recorded in a manifest")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--policy", choices=POLICIES)
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lambda_", type=float, metavar="X")
    lam.add_argument("--lambda-schedule", choices=["increase"])
    p.add_argument("--mu-prox", type=float, metavar="X")
    p.add_argument("--eta", type=float, metavar="X")
    p.add_argument("--rounds", type=int, metavar="T")
    p.add_argument("--clients", type=int, metavar="M")
    p.add_argument("--steps-mean", type=float, metavar="X")
    p.add_argument("--steps-var", type=float, metavar="X")
    p.add_argument("--steps-mode", choices=["fixed", "random"])
    p.add_argument("--partition", metavar="{iid,dirichlet:ALPHA,shard:C}")
    p.add_argument("--dataset", metavar="FILE", help="LIBSVM file (logistic objective)")
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--sigma", type=float, metavar="X")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--transport", choices=["inproc", "tcp"])
    p.add_argument("--port", type=int, metavar="N")
    p.add_argument("--threads", type=int, metavar="N")
    p.add_argument("--eval-every", type=int, metavar="N")
    p.add_argument("--reconstruction", action="store_true", default=None)
    p.add_argument("--out", default="./results", metavar="DIR")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedsim", description="Deterministic federated optimization simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _run_flags(sub.add_parser("run", help="run an experiment or preset"))
    v = sub.add_parser("validate-config", help="check a JSON config file")
    v.add_argument("file")
    return parser


OVERRIDABLE = ("algorithm", "policy", "lambda_", "lambda_schedule", "mu_prox", "eta", "rounds", "clients",
               "steps_mean", "steps_var", "steps_mode", "partition", "dataset", "objective", "sigma", "seed",
               "transport", "port", "threads", "eval_every", "reconstruction")


def _overrides(args) -> dict:
    out = {}
    for name in OVERRIDABLE:
        value = getattr(args, name)
        if value is not None:
            out["lambda" if name == "lambda_" else name] = value
    if "lambda" in out:
        out["lambda_schedule"] = None
    if "partition" in out:
        parse_partition(out["partition"])
    if "seed" not in out and os.environ.get("FEDSIM_SEED"):
        try:
            out["seed"] = int(os.environ["FEDSIM_SEED"])
        except ValueError:
            raise ConfigurationError("FEDSIM_SEED must be an integer") from None
    return out


def _plan_runs(args) -> tuple:
    """Resolve the invocation into ``(preset_name, [(run_name, ExperimentConfig)])``."""
    overrides = _overrides(args)
    if args.manifest:
        try:
            manifest = read_manifest(args.manifest)
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"cannot read manifest {args.manifest}: {exc}") from None
        runs = [(r["name"], ExperimentConfig.from_dict({**r["config"], **overrides})) for r in manifest["runs"]]
        return manifest.get("preset"), runs
    if args.preset:
        return args.preset, expand_preset(args.preset, overrides)
    base = load_config(args.config) if args.config else ExperimentConfig()
    cfg = base.replace(**overrides) if overrides else base
    return None, [(cfg.algorithm if cfg.algorithm != "fedagrac" or cfg.policy == "default"
                   else f"fedagrac_{cfg.policy}", cfg)]


def _summary(preset, entries) -> dict:
    if preset != "inconsistency-demo":
        return {}
    gaps = {e["name"]: e["final"]["optimality_gap"] for e in entries}
    fedavg, fedagrac = gaps.get("fedavg"), gaps.get("fedagrac")
    if fedavg is None or fedagrac is None:
        return {}
    ratio = "inf" if fedagrac <= 0 else fedavg / fedagrac
    return {"fedavg_gap": fedavg, "fedagrac_gap": fedagrac, "gap_ratio": ratio}


def cmd_run(args) -> int:
    preset, runs = _plan_runs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    status = EXIT_OK
    for name, cfg in runs:
        started = time.perf_counter()
        result = run(build_run(cfg))
        wall = time.perf_counter() - started
        csv_name = f"{name}.csv"
        emit_csv(result.records, out / csv_name)
        last = result.records[-1]
        entries.append({
            "name": name, "csv": csv_name, "config": cfg.to_dict(), "seed": cfg.seed,
            "oracle": oracle_to_json(result.oracle), "wall_time_s": wall, "failure": result.failure,
            "final": {"round": last.round, "global_loss": last.global_loss, "grad_norm_sq": last.grad_norm_sq,
                      "optimality_gap": last.optimality_gap},
        })
        if result.failure:
            log.error("%s diverged: %s", name, result.failure)
            status = EXIT_DIVERGED
        else:
            gap = "n/a" if last.optimality_gap is None else f"{last.optimality_gap:.6g}"
            log.info("%s: loss %.6g, gap %s (%.2fs)", name, last.global_loss, gap, wall)
    manifest = {"fedsim_version": __version__, "preset": preset, "runs": entries,
                "summary": _summary(preset, entries)}
    _sanitize(manifest)
    write_manifest(out / "manifest.json", manifest)
    print(f"wrote {len(entries)} run(s) to {out}")
    return status


def _sanitize(obj):
    """Replace non-finite floats (JSON cannot hold them) by strings, in place."""
    items = obj.items() if isinstance(obj, dict) else enumerate(obj) if isinstance(obj, list) else ()
    for k, v in items:
        if isinstance(v, float) and not math.isfinite(v):
            obj[k] = str(v)
        elif isinstance(v, (dict, list)):
            _sanitize(v)


def cmd_validate(args) -> int:
    cfg = load_config(args.file)
    print(f"{args.file}: ok ({cfg.algorithm}, {cfg.objective}, {cfg.clients} clients, {cfg.rounds} rounds)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "validate-config":
            return cmd_validate(args)
        return cmd_run(args)
    except ConfigurationError as exc:
        print(f"fedsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FedSimError as exc:
        print(f"fedsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
