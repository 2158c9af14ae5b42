#!/usr/bin/env python3
"""
Calabi/Mabuchi Finsler lab - command line runner.

Usage:
    python calabi_lab.py list
    python calabi_lab.py describe max-smoothing        # or: describe all
    python calabi_lab.py run kr-criterion --resolution 128 --set p=2 --set q=1
    python calabi_lab.py run --config runs/spike.ini --out runs/
    python calabi_lab.py verify runs/kr-criterion --rerun

Every run writes <out>/<experiment>/ with params.json, stats.csv,
verdict.json and any experiment-specific CSV files, and is recorded in
the sqlite run registry. Exit status: 0 all claims pass, 1 a claim or
invariant failed, 2 usage error.
"""

import argparse
import csv
import json
import logging
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from experiments import REGISTRY, ExperimentEntry, SequenceExperiment
from lab_config import RunConfig, build_run_config, load_settings, parse_overrides, read_config_file
from lab_errors import LabError, UsageError
from run_registry import RunRegistry, sha256_bytes, sha256_file

logger = logging.getLogger(__name__)

CODE_VERSION = "1.0.0"
STATS_HEADER = ["j", "k", "stat_name", "value"]


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _dump_json(data: Dict[str, Any], path: Path) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def lookup(name: Optional[str]) -> ExperimentEntry:
    if not name:
        raise UsageError(f"no experiment named; choose one of: {', '.join(REGISTRY)}")
    if name not in REGISTRY:
        raise UsageError(f"unknown experiment {name!r}; choose one of: {', '.join(REGISTRY)}")
    return REGISTRY[name]


def config_payload(cfg: RunConfig) -> Dict[str, Any]:
    """Config as plain JSON data; inf exponents survive as Infinity."""
    data = cfg.model_dump()
    data["out"] = str(data["out"])
    return data


def config_fingerprint(cfg: RunConfig) -> str:
    data = config_payload(cfg)
    data.pop("out")
    return sha256_bytes(json.dumps(data, sort_keys=True).encode("utf-8"))


def resolve_config(args: argparse.Namespace) -> Tuple[RunConfig, str, Dict[str, Any]]:
    """Layer registry defaults < config file < flags < --set overrides."""
    config_text, file_values = "", {}
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"config file {args.config} not found")
        config_text, file_values = read_config_file(args.config)
    overrides = parse_overrides(args.set)
    name = overrides.get("experiment") or args.experiment or file_values.get("experiment")
    entry = lookup(name)
    flags = {"out": args.out, "seed": args.seed, "resolution": args.resolution}
    cfg = build_run_config([entry.defaults, file_values, flags, overrides, {"experiment": entry.name}])
    return cfg, config_text, dict(entry.defaults)


def write_stats(exp: SequenceExperiment, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATS_HEADER)
        for row in exp.stats:
            writer.writerow([row.j, row.k, row.stat_name, "%.17g" % row.value])
    return path


def write_run(
    exp: SequenceExperiment, cfg: RunConfig, out_dir: Path, config_text: str, defaults: Dict[str, Any]
) -> Dict[str, Any]:
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(
        {
            "experiment": cfg.experiment,
            "code_version": CODE_VERSION,
            "config": config_payload(cfg),
            "config_text": config_text,
            "registry_defaults": defaults,
            "parameters": exp.parameters,
        },
        out_dir / "params.json",
    )
    stats_sha = sha256_file(write_stats(exp, out_dir / "stats.csv"))
    for writer in exp.writers:
        writer(out_dir)
    verdict = {
        "experiment": cfg.experiment,
        "passed": exp.passed,
        "failed_claims": exp.failed_claims,
        "claims": [
            {"name": c.name, "passed": c.passed, "detail": c.detail, "measured": c.measured} for c in exp.claims
        ],
        "stats_sha256": stats_sha,
    }
    _dump_json(verdict, out_dir / "verdict.json")
    return verdict


def registry_for(cfg_out: Path) -> RunRegistry:
    settings = load_settings()
    db = settings.db_path or Path(cfg_out).resolve().parent / "lab_runs.db"
    return RunRegistry(db)


def execute(cfg: RunConfig, out_dir: Path, config_text: str, defaults: Dict[str, Any]) -> Dict[str, Any]:
    entry = lookup(cfg.experiment)
    threads = load_settings().threads
    logger.info("running %s with %d thread(s) into %s", entry.name, threads, out_dir)
    exp = entry.runner(cfg, threads)
    return write_run(exp, cfg, out_dir, config_text, defaults)


def print_verdict(verdict: Dict[str, Any]) -> None:
    for claim in verdict["claims"]:
        mark = "✅ PASS" if claim["passed"] else "❌ FAIL"
        print(f"  {mark}  {claim['name']}: {claim['detail']}")


def cmd_run(args: argparse.Namespace) -> int:
    cfg, config_text, defaults = resolve_config(args)
    out_dir = Path(cfg.out) / cfg.experiment
    print("\n" + "=" * 60)
    print(f"🧪 {cfg.experiment}  ({cfg.backend}, N={cfg.resolution}, p={cfg.p:g}, q={cfg.q:g}, seed={cfg.seed})")
    print("=" * 60)
    verdict = execute(cfg, out_dir, config_text, defaults)
    print_verdict(verdict)
    rec = registry_for(cfg.out).record(
        cfg.experiment, out_dir, config_fingerprint(cfg), verdict["stats_sha256"], verdict["passed"], verdict["failed_claims"]
    )
    n_pass = sum(c["passed"] for c in verdict["claims"])
    print(f"\n📁 Artifacts: {out_dir}  (run {rec.run_id})")
    if verdict["passed"]:
        print(f"✅ {n_pass}/{len(verdict['claims'])} claims passed")
        return 0
    print(f"❌ {n_pass}/{len(verdict['claims'])} claims passed; failing: {', '.join(verdict['failed_claims'])}")
    return 1


def cmd_list(args: argparse.Namespace) -> int:
    width = max(len(name) for name in REGISTRY)
    for name, entry in REGISTRY.items():
        print(f"{name:<{width}}  {entry.summary}")
    return 0


def describe_text(entry: ExperimentEntry) -> str:
    defaults = ", ".join(f"{k}={v}" for k, v in entry.defaults.items()) or "(RunConfig defaults)"
    return f"{entry.name}\n  what:     {entry.summary}\n  passes:   {entry.criteria}\n  defaults: {defaults}\n"


def cmd_describe(args: argparse.Namespace) -> int:
    names = list(REGISTRY) if args.name == "all" else [lookup(args.name).name]
    print("\n".join(describe_text(REGISTRY[name]) for name in names))
    return 0


def _load_json(path: Path) -> Dict[str, Any]:
    if not path.is_file():
        raise UsageError(f"{path} not found; is this a run directory?")
    return json.loads(path.read_text())


def rerun_matches(directory: Path, params: Dict[str, Any]) -> bool:
    """Re-execute from params.json into a scratch directory and compare stats.csv bytes."""
    with tempfile.TemporaryDirectory() as scratch:
        config = dict(params["config"])
        config["out"] = scratch
        cfg = build_run_config([config])
        scratch_dir = Path(scratch) / cfg.experiment
        execute(cfg, scratch_dir, params.get("config_text", ""), params.get("registry_defaults", {}))
        return (scratch_dir / "stats.csv").read_bytes() == (directory / "stats.csv").read_bytes()


def cmd_verify(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    verdict = _load_json(directory / "verdict.json")
    params = _load_json(directory / "params.json")
    checks: List[Tuple[str, bool]] = []

    print(f"\n🔎 Verifying {directory}")
    stats_sha = sha256_file(directory / "stats.csv")
    checks.append(("stats fingerprint matches verdict.json", stats_sha == verdict.get("stats_sha256")))
    checks.append(("all recorded claims passed", all(c["passed"] for c in verdict.get("claims", []))))

    cfg = build_run_config([params["config"]])
    peers = [r for r in registry_for(cfg.out).same_config(config_fingerprint(cfg)) if r.stats_sha256]
    if peers:
        agree = all(r.stats_sha256 == stats_sha for r in peers)
        checks.append((f"stats agree with {len(peers)} registered run(s) of this config", agree))
    if args.rerun:
        checks.append(("re-execution reproduces stats.csv", rerun_matches(directory, params)))

    for label, ok in checks:
        print(f"  {'✅' if ok else '❌'} {label}")
    if not all(c["passed"] for c in verdict.get("claims", [])):
        print(f"  failing claims: {', '.join(verdict.get('failed_claims', []))}")
    return 0 if all(ok for _, ok in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Calabi/Mabuchi Finsler geometry laboratory")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one registered experiment")
    run.add_argument("experiment", nargs="?", help="experiment name (or `experiment =` in the config)")
    run.add_argument("--config", type=Path, help="INI run file (key = value, optional [run] section)")
    run.add_argument("--out", type=Path, help="output root; artifacts go to <out>/<experiment>/")
    run.add_argument("--seed", type=int)
    run.add_argument("--resolution", type=int)
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key (repeatable)")
    run.set_defaults(func=cmd_run)

    lst = sub.add_parser("list", help="list registered experiments")
    lst.set_defaults(func=cmd_list)

    desc = sub.add_parser("describe", help="show what an experiment checks and how it passes")
    desc.add_argument("name", help="experiment name or `all`")
    desc.set_defaults(func=cmd_describe)

    ver = sub.add_parser("verify", help="re-check an existing run directory")
    ver.add_argument("directory", type=Path)
    ver.add_argument("--rerun", action="store_true", help="re-execute from params.json and compare stats.csv")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return 2
    except LabError as exc:
        print(f"❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
