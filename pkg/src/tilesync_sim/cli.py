"""Command-line front end: run, compare, sweep, validate, list-presets.

Times are reported in abstract cost units. CSV output is schema-stable and
byte-identical across reruns of the same config and seed. The environment
variable TILESYNC_SIM_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from .config import load_scenario
from .engine import Metrics, Mode, Scenario, SimOptions, SimTrace, simulate
from .errors import ConfigError, MalformedTraceError
from .oracle import build_dep_dag, validate_trace
from .workloads import PRESETS, build_preset

CSV_COLUMNS = ["preset", "mode", "policy", "stage", "grid_x", "grid_y",
               "grid_z", "occupancy", "waves_frac", "waves_ceil",
               "utilization_pct", "makespan", "total_wait", "deadlock"]

SUITES = {
    "mlp": [f"mlp:{b}" for b in ("1-64", "128", "256", "512", "1024", "2048")],
    "conv128": [f"conv128:{b}"
                for b in ("1", "4", "8", "12", "16", "20", "24", "28", "32")],
}
SUITES["table5"] = SUITES["mlp"]
SUITES["table7"] = SUITES["conv128"]


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return str(x)


def _scenario(args, mode: Mode) -> tuple[str, str, Scenario]:
    """Resolve (label, policy name, scenario) from --preset/--config."""
    options = SimOptions(wait_kernel=args.wait_kernel,
                         reorder_loads=args.reorder_loads,
                         adversarial_order=args.adversarial_order)
    if args.config:
        if args.policy:
            raise ConfigError("--policy applies to presets; config files "
                              "carry their own policies")
        sc = load_scenario(args.config, mode)
        label = os.path.splitext(os.path.basename(args.config))[0]
        return label, "config", sc
    if not args.preset:
        raise ConfigError("one of --preset or --config is required")
    sc = build_preset(args.preset, policy=args.policy, mode=mode,
                      options=options, seed=args.seed)
    info = PRESETS.get(args.preset)
    policy = args.policy or (info.default_policy if info else "custom")
    return args.preset, policy, sc


def _rows(label: str, policy: str, sc: Scenario, m: Metrics) -> list[dict]:
    rows = []
    stage_by_id = {s.id: s for s in sc.stages}
    for s in m.per_stage:
        grid = stage_by_id[s.stage].grid
        rows.append({
            "preset": label, "mode": m.mode.value, "policy": policy,
            "stage": s.stage, "grid_x": grid.x, "grid_y": grid.y,
            "grid_z": grid.z, "occupancy": stage_by_id[s.stage].occupancy,
            "waves_frac": _fmt(s.waves_frac), "waves_ceil": s.waves_ceil,
            "utilization_pct": _fmt(s.utilization_pct),
            "makespan": _fmt(m.makespan),
            "total_wait": _fmt(s.total_wait),
            "deadlock": _fmt(m.deadlock),
        })
    return rows


def _write_csv(path: str, rows: list[dict],
               columns: list[str] | None = None) -> None:
    cols = columns or CSV_COLUMNS
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _print_run(label: str, policy: str, m: Metrics) -> None:
    print(f"run preset={label} mode={m.mode.value} policy={policy}")
    for s in m.per_stage:
        print(f"  stage={s.stage} tbs={s.tbs} waves={_fmt(s.waves_frac)} "
              f"ceil={s.waves_ceil} utilization={_fmt(s.utilization_pct)}% "
              f"wait={_fmt(s.total_wait)}")
    sizes = ",".join(str(n) for n in m.generation_sizes)
    print(f"  combined waves={_fmt(m.combined_waves)} "
          f"generations={m.generations} sizes={sizes} "
          f"makespan={_fmt(m.makespan)} wait={_fmt(m.total_wait)} "
          f"deadlock={_fmt(m.deadlock)}")


def cmd_run(args) -> int:
    modes = ([Mode.STREAM, Mode.FINE] if args.mode == "both"
             else [Mode(args.mode)])
    rows: list[dict] = []
    deadlocked = False
    for mode in modes:
        label, policy, sc = _scenario(args, mode)
        trace, m = simulate(sc)
        _print_run(label, policy, m)
        rows.extend(_rows(label, policy, sc, m))
        deadlocked = deadlocked or m.deadlock
        if args.trace:
            path = args.trace if len(modes) == 1 else (
                f"{args.trace}.{mode.value}")
            trace.dump_jsonl(path)
    if args.csv:
        _write_csv(args.csv, rows)
    if args.expect_deadlock:
        return 0 if deadlocked else 2
    return 2 if deadlocked else 0


def cmd_compare(args) -> int:
    if args.suite:
        names = SUITES[args.suite]
    elif args.preset:
        names = [args.preset]
    else:
        raise ConfigError("compare needs --suite or --preset")
    header = ["preset", "grids", "stage_waves", "stream_waves", "fine_waves",
              "stream_makespan", "fine_makespan", "speedup"]
    table = []
    for name in names:
        cells: dict[str, str] = {"preset": name}
        per_mode: dict[Mode, Metrics] = {}
        for mode in (Mode.STREAM, Mode.FINE):
            label, policy, sc = _scenario_named(args, name, mode)
            _, m = simulate(sc)
            per_mode[mode] = m
        stream, fine = per_mode[Mode.STREAM], per_mode[Mode.FINE]
        cells["grids"] = " / ".join(str(s.grid) for s in sc.stages)
        cells["stage_waves"] = "/".join(_fmt(s.waves_frac)
                                        for s in fine.per_stage)
        cells["stream_waves"] = _fmt(stream.combined_waves)
        cells["fine_waves"] = _fmt(fine.combined_waves)
        cells["stream_makespan"] = _fmt(stream.makespan)
        cells["fine_makespan"] = _fmt(fine.makespan)
        cells["speedup"] = f"{stream.makespan / fine.makespan:.2f}"
        table.append(cells)
    widths = {h: max(len(h), *(len(row[h]) for row in table)) for h in header}
    print("  ".join(h.ljust(widths[h]) for h in header))
    for row in table:
        print("  ".join(row[h].ljust(widths[h]) for h in header))
    if args.csv:
        _write_csv(args.csv, table, columns=header)
    return 0


def _scenario_named(args, name: str, mode: Mode):
    ns = argparse.Namespace(**vars(args))
    ns.preset = name
    ns.config = None
    return _scenario(ns, mode)


def cmd_sweep(args) -> int:
    presets = [p for p in (args.presets or "").split(",") if p]
    if args.suite:
        presets = SUITES[args.suite] + presets
    policies = [p for p in (args.policies or "").split(",") if p] or [None]
    modes = ([Mode.STREAM, Mode.FINE] if args.modes == "both"
             else [Mode(m) for m in args.modes.split(",")])
    reorders = {"on": [True], "off": [False],
                "both": [False, True]}[args.reorder_loads]
    if not presets:
        raise ConfigError("sweep needs a non-empty preset axis "
                          "(--presets or --suite)")
    cells = [(name, pol, mode, reorder)
             for name in presets for pol in policies
             for mode in modes for reorder in reorders]

    def member(cell):
        name, pol, mode, reorder = cell
        options = SimOptions(wait_kernel=args.wait_kernel,
                             reorder_loads=reorder,
                             adversarial_order=args.adversarial_order)
        sc = build_preset(name, policy=pol, mode=mode, options=options,
                          seed=args.seed)
        info = PRESETS.get(name)
        label = pol or (info.default_policy if info else "custom")
        _, m = simulate(sc)
        return _rows(name, label, sc, m)

    threads = max(1, int(os.environ.get("TILESYNC_SIM_THREADS", "4")))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(member, cells))
    rows = [row for chunk in results for row in chunk]
    if args.csv:
        _write_csv(args.csv, rows)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=CSV_COLUMNS,
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return 0


def cmd_validate(args) -> int:
    mode = Mode(args.mode) if args.mode else None
    label, _, sc = _scenario(args, mode or Mode.FINE)
    events = SimTrace.load_events(args.trace)
    dag = build_dep_dag(sc)
    violations = validate_trace(events, dag, mode=mode)
    if violations:
        for v in violations:
            print(v)
        print(f"{len(violations)} violation(s) in {args.trace}")
        return 1
    print(f"ok: {len(events)} events, no dependency violations")
    return 0


def cmd_list_presets(_args) -> int:
    width = max(len(name) for name in PRESETS)
    for name, info in PRESETS.items():
        policies = ",".join(
            p + ("*" if p == info.default_policy else "")
            for p in info.policies)
        print(f"{name.ljust(width)}  [{policies}]  {info.description}")
    print("\n(* default policy; random:<n> builds a seeded random scenario)")
    return 0


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="preset name, e.g. mlp:1024 (see "
                                    "list-presets)")
    p.add_argument("--config", help="scenario config file (JSON)")
    p.add_argument("--policy", choices=["tile", "row", "strided",
                                        "conv2dtile"],
                   help="sync policy for preset scenarios")
    p.add_argument("--wait-kernel", choices=["on", "off", "auto"],
                   default="auto", dest="wait_kernel")
    p.add_argument("--no-wait-kernel", action="store_const", const="off",
                   dest="wait_kernel",
                   help="shorthand for --wait-kernel off")
    p.add_argument("--adversarial-order", action="store_true",
                   help="reverse stream priorities (consumer first)")
    p.add_argument("--seed", type=int, default=0,
                   help="base seed for random:<n> scenarios")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tilesync-sim",
        description="Deterministic simulator for GPU thread-block waves and "
                    "fine-grained inter-kernel tile synchronization.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    _add_scenario_flags(p_run)
    p_run.add_argument("--mode", choices=["stream", "fine", "both"],
                       default="fine")
    p_run.add_argument("--reorder-loads", action="store_true")
    p_run.add_argument("--expect-deadlock", action="store_true",
                       help="exit 0 only if the run deadlocks")
    p_run.add_argument("--trace", help="write the event trace (JSON lines)")
    p_run.add_argument("--csv", help="write per-stage metrics CSV")
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="stream vs fine table over presets")
    _add_scenario_flags(p_cmp)
    p_cmp.add_argument("--suite", choices=sorted(SUITES))
    p_cmp.add_argument("--reorder-loads", action="store_true")
    p_cmp.add_argument("--csv")
    p_cmp.set_defaults(fn=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="cartesian preset/policy/mode runs")
    p_sweep.add_argument("--presets", help="comma-separated preset names")
    p_sweep.add_argument("--suite", choices=sorted(SUITES))
    p_sweep.add_argument("--policies", help="comma-separated policy names")
    p_sweep.add_argument("--modes", default="both",
                         help="stream, fine, or both")
    p_sweep.add_argument("--reorder-loads", choices=["on", "off", "both"],
                         default="off")
    p_sweep.add_argument("--wait-kernel", choices=["on", "off", "auto"],
                         default="auto", dest="wait_kernel")
    p_sweep.add_argument("--adversarial-order", action="store_true")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--csv", help="output file (defaults to stdout)")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_val = sub.add_parser("validate",
                           help="check an exported trace against the "
                                "brute-force dependency DAG")
    _add_scenario_flags(p_val)
    p_val.add_argument("--trace", required=True)
    p_val.add_argument("--mode", choices=["stream", "fine"],
                       help="trace mode (default: infer from wait events)")
    p_val.add_argument("--reorder-loads", action="store_true")
    p_val.set_defaults(fn=cmd_validate)

    p_list = sub.add_parser("list-presets", help="show available presets")
    p_list.set_defaults(fn=cmd_list_presets)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, MalformedTraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
