"""Command-line runner for single scenarios, presets and parameter sweeps."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from . import config as config_mod
from . import presets
from .config import ConfigError, ScenarioConfig
from .engine import SimulationError
from .metrics import loss_sync_csv, samples_csv, summary_text
from .scenario import World

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

@dataclass
class RunManifest:
    base: ScenarioConfig
    seeds: list[int]
    out: Path
    tag: str
    sweep: list[tuple[str, list]] = field(default_factory=list)
    preset: str | None = None
    scenario: str | None = None


@dataclass
class Task:
    stem: str
    point: dict
    cfg: ScenarioConfig
    header: list[str]


def parse_seeds(text: str) -> list[int]:
    """``7`` or an inclusive range ``1..5``."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        a, b = int(lo), int(hi)
        if b < a:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(a, b + 1))
    return [int(text)]


def parse_sweep(text: str) -> tuple[str, list]:
    if "=" not in text:
        raise ValueError(f"sweep must look like key=v1,v2,... (got {text!r})")
    key, values = text.split("=", 1)
    key = key.strip()
    if key not in config_mod.FIELDS:
        raise ValueError(f"unknown sweep key {key!r}")
    vals = [config_mod.coerce(key, v) for v in values.split(",") if v.strip()]
    if not vals:
        raise ValueError(f"sweep over {key!r} has no values")
    return key, vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tsnsync",
        description="Discrete-event simulation of PTP synchronization over wired TSN and 5G links.",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", help="named scenario (see --list-presets)")
    src.add_argument("--scenario", help="INI scenario file")
    p.add_argument("--list-presets", action="store_true", help="print the preset names and exit")
    p.add_argument("--seed", type=int, help="single seed")
    p.add_argument("--seeds", help="seed range a..b (inclusive)")
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--master", choices=("tsn", "gnb", "ue"), help="grandmaster placement")
    p.add_argument("--counter-mode", choices=("single", "dual"))
    p.add_argument("--harq-gate", choices=("on", "off"), help="gate Follow_Up on the HARQ-ACK")
    p.add_argument("--mobility-fix", choices=("on", "off"), help="direct peer delay after convergence")
    p.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2",
                   help="sweep a config key; repeat for a product of axes")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="sets",
                   help="override any config key")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="concurrent runs")
    p.add_argument("--quiet", action="store_true", help="only print the final table")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def build_manifest(args: argparse.Namespace) -> RunManifest:
    """Resolve flags into a manifest; raises ConfigError on any bad input."""
    problems = []
    cfg = ScenarioConfig()
    tag = "run"
    sweep: list[tuple[str, list]] = []
    if args.preset:
        try:
            preset = presets.get(args.preset)
        except KeyError as err:
            raise ConfigError([str(err.args[0])]) from None
        cfg = replace(cfg, **preset.overrides)
        sweep = [(k, list(v)) for k, v in preset.sweep]
        tag = preset.name
    elif args.scenario:
        cfg = config_mod.load(args.scenario)
        tag = Path(args.scenario).stem

    changes = {}
    for item in args.sets:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in config_mod.FIELDS:
            problems.append(f"--set {item!r}: expected a known key=value")
            continue
        try:
            changes[key] = config_mod.coerce(key, value)
        except ValueError as err:
            problems.append(f"--set {key}: {err}")
    if args.duration is not None:
        changes["duration_s"] = args.duration
    if args.master:
        changes["master"] = args.master
    if args.counter_mode:
        changes["counter_mode"] = args.counter_mode
    if args.harq_gate:
        changes["harq_gated_followup"] = args.harq_gate == "on"
    if args.mobility_fix:
        changes["mobility_fix"] = "direct" if args.mobility_fix == "on" else "standard"
    cfg = replace(cfg, **changes)

    # a fixed flag wins over a preset axis for the same key
    sweep = [(k, v) for k, v in sweep if k not in changes]
    for text in args.sweep:
        try:
            key, vals = parse_sweep(text)
        except ValueError as err:
            problems.append(f"--sweep: {err}")
            continue
        sweep = [(k, v) for k, v in sweep if k != key] + [(key, vals)]

    if args.seeds and args.seed is not None:
        problems.append("use either --seed or --seeds")
    try:
        seeds = parse_seeds(args.seeds) if args.seeds else [args.seed if args.seed is not None else cfg.seed]
    except ValueError as err:
        problems.append(f"--seeds: {err}")
        seeds = []
    if args.parallel < 1:
        problems.append("--parallel must be at least 1")
    if problems:
        raise ConfigError(problems)
    return RunManifest(cfg, seeds, Path(args.out), tag, sweep, args.preset, args.scenario)


def expand(manifest: RunManifest) -> list[Task]:
    """Every (sweep point, seed) pair as a validated task."""
    keys = [k for k, _ in manifest.sweep]
    grids = [v for _, v in manifest.sweep] or [[]]
    points = [dict(zip(keys, combo)) for combo in itertools.product(*grids)] if keys else [{}]
    tasks, problems = [], []
    for point in points:
        for seed in manifest.seeds:
            cfg = replace(manifest.base, **point, seed=seed)
            try:
                cfg.validate()
            except ConfigError as err:
                where = ", ".join(f"{k}={config_mod.format_value(v)}" for k, v in point.items()) or "base"
                problems.extend(f"[{where}] {p}" for p in err.problems)
                continue
            parts = [manifest.tag] + [f"{k}-{config_mod.format_value(v)}" for k, v in point.items()] + [f"seed{seed}"]
            header = [f"tsnsync {__version__}"]
            if manifest.preset:
                header.append(f"preset = {manifest.preset}")
            if manifest.scenario:
                header.append(f"scenario = {manifest.scenario}")
            header += cfg.header_lines()
            tasks.append(Task("_".join(parts), point, cfg, header))
    if problems:
        raise ConfigError(sorted(set(problems), key=problems.index))
    return tasks


def execute(task: Task) -> dict:
    """Run one task and render its outputs; never raises for simulation faults."""
    world = World(task.cfg)
    status = "ok"
    try:
        result = world.run()
    except SimulationError as err:
        status = f"partial: {err}"
        result = world.result(end=world.engine.now)
    header = list(task.header)
    if status != "ok":
        header.append(f"status = {status}")
    files = {
        f"{task.stem}.csv": samples_csv(result.samples, header),
        f"{task.stem}_summary.txt": summary_text(result.summary, result.counters, header)
        + f"status = {status}\ntrace_digest = {result.trace_digest}\n",
        f"{task.stem}_loss_sync.csv": loss_sync_csv(result.loss_records, header),
    }
    if result.tracked:
        buf = io.StringIO()
        buf.write("".join(f"# {line}\n" for line in header))
        buf.write(f"t_s,error_ns_{task.cfg.track_node}\n")
        for t, e in result.tracked:
            buf.write(f"{t / 1e12:.6f},{e}\n")
        files[f"{task.stem}_track.csv"] = buf.getvalue()
    return {"summary": result.summary.as_dict(), "status": status, "files": files}


def sweep_table(manifest: RunManifest, tasks: list[Task], outcomes: list[dict]) -> str:
    """Wide table: one row per sweep point, one column group per seed."""
    keys = [k for k, _ in manifest.sweep]
    rows: dict[tuple, dict] = {}
    for task, out in zip(tasks, outcomes):
        key = tuple(config_mod.format_value(task.point[k]) for k in keys)
        row = rows.setdefault(key, {})
        s = out["summary"]
        seed = task.cfg.seed
        row[f"mean_ns_seed{seed}"] = f"{s['mean_ns']:.3f}"
        row[f"max_ns_seed{seed}"] = f"{s['max_ns']:.3f}"
        row[f"loss_sync_seed{seed}"] = f"{s['loss_sync_proportion']:.6f}"
        row.setdefault("_max", []).append(s["max_ns"])
        row.setdefault("_status", []).append(out["status"])
    metric_cols = [f"{m}_seed{s}" for s in manifest.seeds for m in ("mean_ns", "max_ns", "loss_sync")]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys + metric_cols + ["max_ns_worst", "status"])
    for key, row in rows.items():
        worst = max(row["_max"])
        status = "ok" if all(st == "ok" for st in row["_status"]) else "partial"
        w.writerow(list(key) + [row.get(c, "") for c in metric_cols] + [f"{worst:.3f}", status])
    return buf.getvalue()


def run(manifest: RunManifest, tasks: list[Task] | None = None, parallel: int = 1, quiet: bool = False) -> int:
    if tasks is None:
        tasks = expand(manifest)
    manifest.out.mkdir(parents=True, exist_ok=True)
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(execute, tasks))
    else:
        outcomes = [execute(t) for t in tasks]
    failed = False
    for task, out in zip(tasks, outcomes):
        for name, text in out["files"].items():
            (manifest.out / name).write_text(text, encoding="utf-8")
        s = out["summary"]
        if out["status"] != "ok":
            failed = True
            print(f"{task.stem}: {out['status']}", file=sys.stderr)
        if not quiet:
            print(
                f"{task.stem}: mean {s['mean_ns']:.1f} ns  stddev {s['stddev_ns']:.1f} ns  "
                f"max {s['max_ns']:.1f} ns  loss-sync {s['loss_sync_proportion']:.4f}"
            )
    if manifest.sweep or len(manifest.seeds) > 1:
        table = sweep_table(manifest, tasks, outcomes)
        (manifest.out / f"{manifest.tag}_sweep.csv").write_text(table, encoding="utf-8")
        print(table, end="")
    return EXIT_RUNTIME if failed else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    if args.list_presets:
        for name, p in sorted(presets.PRESETS.items()):
            print(f"{name:28s} {p.description}")
        return EXIT_OK
    try:
        manifest = build_manifest(args)
        tasks = expand(manifest)  # every config error surfaces before any run starts
    except (ConfigError, OSError) as err:
        lines = err.problems if isinstance(err, ConfigError) else [str(err)]
        for line in lines:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    return run(manifest, tasks, args.parallel, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
