"""Command line entry point: ``varapps <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__


def _cmd_config_validate(args) -> int:
    from .config import ConfigError, load_app_config, load_config

    text = Path(args.file).read_text(encoding="utf-8")
    try:
        if args.app:
            load_app_config(text, args.app)
        else:
            load_config(text, name=Path(args.file).stem)
    except ConfigError as exc:
        where = f":{exc.line}:{exc.column}" if exc.line is not None else ""
        for err in exc.errors:
            print(f"{args.file}{where}: {exc.kind}: {err}", file=sys.stderr)
        return 1
    print(f"{args.file}: ok")
    return 0


def _variant_axes(args):
    from .config import load_axes, load_catalog, shipped_axes

    catalog = load_catalog(args.catalog) if args.catalog else None
    if args.axes:
        return load_axes(args.axes, catalog)
    if catalog:
        return {"variation": list(catalog.values())}
    return shipped_axes()


def _cmd_variants(args) -> int:
    from .config import count_variants, enumerate_variants

    axes = _variant_axes(args)
    if args.action == "list":
        total = count_variants(axes, per_app=args.per_app)
        shown = 0
        for cfg in enumerate_variants(axes, limit=args.limit, per_app=args.per_app):
            print(cfg.name)
            shown += 1
        print(f"# {shown} of {total} variants", file=sys.stderr)
        return 0
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for n, cfg in enumerate(enumerate_variants(axes, limit=args.limit, per_app=args.per_app)):
        if out:
            (out / f"variant_{n:05d}.yaml").write_text(f"# {cfg.name}\n" + cfg.to_yaml(), encoding="utf-8")
        else:
            sys.stdout.write(f"--- # {cfg.name}\n{cfg.to_yaml()}")
    return 0


def _cmd_actions(args) -> int:
    from .actions import UnknownProfile, action_signatures, get_profile, signature_manifest
    from .state import dump_yaml

    try:
        profile = get_profile(args.profile)
    except UnknownProfile as exc:
        print(str(exc), file=sys.stderr)
        return 2
    if args.text:
        for _name, sig in action_signatures(profile):
            print(sig.text())
        return 0
    manifest = signature_manifest(profile)
    if args.json:
        print(json.dumps(manifest, indent=2))
    else:
        sys.stdout.write(dump_yaml(manifest))
    return 0


def _cmd_tasks(args) -> int:
    from .tasks import all_tasks

    tasks = all_tasks()
    width = max(len(t) for t in tasks)
    for task in tasks.values():
        kind = f"{task.total_steps} steps" if task.multi_step else "single goal"
        print(f"{task.id.ljust(width)}  {len(task.prompts)} prompts  {kind}")
    return 0


def _cmd_run(args) -> int:
    from .harness import TRAJECTORY_FILE, load_matrix, run_matrix

    specs = load_matrix(args.matrix)
    records = run_matrix(specs, parallelism=args.parallel, out_dir=args.out, base_url=args.server)
    errors = sum(1 for r in records if not r.ok)
    solved = sum(1 for r in records if r.ok and r.result and r.result.success)
    print(f"{len(records)} runs, {solved} succeeded, {errors} errors -> {Path(args.out) / TRAJECTORY_FILE}")
    return 0


def _cmd_replay(args) -> int:
    from .harness import ReplayVersionError, read_trajectories, replay

    status = 0
    for record in read_trajectories(args.file):
        label = f"run {record.run_index} {record.spec.agent}/{record.spec.task}"
        if record.error is not None:
            print(f"{label}: skipped (error record)")
            continue
        try:
            verdict = replay(record)
        except ReplayVersionError as exc:
            print(f"{label}: version mismatch: {exc}")
            status = 2
            continue
        if verdict.match:
            print(f"{label}: match ({verdict.steps_checked} steps)")
        else:
            print(f"{label}: DIVERGED at step {verdict.first_divergence} ({verdict.field})")
            status = max(status, 1)
    return status


def _cmd_analyze(args) -> int:
    from .analytics import analyze
    from .harness import read_trajectories

    records = read_trajectories(args.inp)
    for path in analyze(records, args.out, args.std_convention):
        print(path)
    return 0


def _cmd_serve(args) -> int:
    from .server import serve

    serve(host=args.host, port=args.port, horizon=args.horizon)
    return 0


def build_parser() -> argparse.ArgumentParser:
    from .tasks import DEFAULT_HORIZON

    p = argparse.ArgumentParser(prog="varapps", description="Configurable multi-app environment for UI agents.")
    p.add_argument("--version", action="version", version=f"varapps {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    cfg = sub.add_parser("config", help="configuration files")
    cfg_sub = cfg.add_subparsers(dest="config_command", required=True)
    val = cfg_sub.add_parser("validate", help="validate a config YAML file")
    val.add_argument("file")
    val.add_argument("--app", help="validate a single-app document for this app")
    val.set_defaults(func=_cmd_config_validate)

    var = sub.add_parser("variants", help="enumerate app variants")
    var.add_argument("action", choices=("list", "emit"))
    var.add_argument("--catalog", help="extra variation catalog YAML")
    var.add_argument("--axes", help="axes YAML {axes: {name: [ids]}}")
    var.add_argument("--limit", type=int, default=None)
    var.add_argument("--per-app", action="store_true", help="vary each app independently")
    var.add_argument("--out", help="emit: directory for one YAML file per variant")
    var.set_defaults(func=_cmd_variants)

    act = sub.add_parser("actions", help="print action signatures")
    act.add_argument("--profile", default="full")
    fmt = act.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="manifest as JSON instead of YAML")
    fmt.add_argument("--text", action="store_true", help="one signature per line")
    act.set_defaults(func=_cmd_actions)

    tasks = sub.add_parser("tasks", help="task catalog")
    tasks.add_argument("action", choices=("list",))
    tasks.set_defaults(func=_cmd_tasks)

    run = sub.add_parser("run", help="run a matrix of agent runs")
    run.add_argument("--matrix", required=True)
    run.add_argument("--parallel", type=int, default=1)
    run.add_argument("--out", required=True)
    run.add_argument("--server", help="base URL of a running server; in-process when omitted")
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("replay", help="re-execute trajectories and compare digests")
    rep.add_argument("file")
    rep.set_defaults(func=_cmd_replay)

    ana = sub.add_parser("analyze", help="reliability and behavior tables")
    ana.add_argument("--in", dest="inp", required=True)
    ana.add_argument("--out", required=True)
    ana.add_argument("--std-convention", choices=("sample", "population"), default="sample")
    ana.set_defaults(func=_cmd_analyze)

    srv = sub.add_parser("serve", help="start the HTTP server")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=None, help="default: $VARAPPS_PORT or 8765")
    srv.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    srv.set_defaults(func=_cmd_serve)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
