"""Command-line entry point.

Exit status: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path


from toolselect import experiments, plots, validate
from toolselect.config import ConfigError, RunConfig
from toolselect.confidence import control_confidence
from toolselect.controller import SimulationError, simulate
from toolselect.decision import NoValidToolError, Objective, select_tool
from toolselect.dynamics import ArmParams
from toolselect.experiments import format_value, read_rows, write_records, write_rows
from toolselect.linear import linearize
from toolselect.metrics import task_error

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
STUDIES = ("conf-vs-error", "perturbation", "selection-grid", "benchmark")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable), e.g. task.kind=position")
    common.add_argument("--jobs", type=int, help="worker processes for studies")

    parser = _Parser(prog="toolselect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="simulate one tool and write its trajectory")
    sub.add_parser("confidence", parents=[common], help="closed-form control confidence of one tool")
    p_sel = sub.add_parser("select", parents=[common], help="select a tool from a toolset CSV")
    p_sel.add_argument("toolset", type=Path, help="CSV with columns id,m1,m2,l1,l2")
    p_sel.add_argument("--objective", default="F", help="F, J or confidence")
    p_exp = sub.add_parser("experiment", parents=[common], help="run a Monte-Carlo study")
    p_exp.add_argument("study", choices=STUDIES)
    p_exp.add_argument("--no-plots", action="store_true", help="skip SVG output")
    sub.add_parser("validate", parents=[common], help="run the analytic identity suite")
    return parser


def load_config(args) -> RunConfig:
    return RunConfig.load(args.config, args.sets, seed=args.seed, out=str(args.out) if args.out else None,
                          jobs=args.jobs)


def _tool(cfg: RunConfig) -> tuple[ArmParams, str]:
    tool = cfg.tool()
    if tool is not None:
        return tool, "config"
    return experiments.draw_tool(cfg.seed, 0).params, f"seeded draw (seed={cfg.seed}, draw=0)"


def _fmt(v) -> str:
    return format_value(float(v))


def cmd_simulate(cfg: RunConfig) -> int:
    params, origin = _tool(cfg)
    task = cfg.task()
    pert = float(cfg.data["perturbation"])
    ss = linearize(params)
    try:
        traj = simulate(params, ss, task, cfg.sim_config(), perturbation=(pert, pert))
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    rows = []
    for i in range(traj.t.size):
        rows.append({
            "t": traj.t[i],
            "theta1": traj.x[i, 0], "theta2": traj.x[i, 1],
            "theta1_dot": traj.x[i, 2], "theta2_dot": traj.x[i, 3],
            "u1": traj.u[i, 0], "u2": traj.u[i, 1],
            "theta1_ddot": traj.theta_ddot[i, 0], "theta2_ddot": traj.theta_ddot[i, 1],
            "f": traj.f[i],
        })
    path = write_rows(cfg.out / f"trajectory_{task.kind.value}.csv", [{k: float(v) for k, v in r.items()} for r in rows])
    print(f"tool: m1={params.m1:.6g} m2={params.m2:.6g} l1={params.l1:.6g} l2={params.l2:.6g} ({origin})")
    print(f"task: {task.kind.value}  perturbation: {pert:g}")
    print(f"task_error: {_fmt(task_error(traj, task))}")
    print(f"logdet_confidence: {_fmt(traj.logdet_pi)}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_confidence(cfg: RunConfig) -> int:
    params, origin = _tool(cfg)
    task = cfg.task()
    conf = control_confidence(task.kind, linearize(params), task)
    pi = conf.pi_u
    row = {
        "task": task.kind.value, "m1": params.m1, "m2": params.m2, "l1": params.l1, "l2": params.l2,
        "pi_11": pi[0, 0], "pi_12": pi[0, 1], "pi_21": pi[1, 0], "pi_22": pi[1, 1],
        "logdet": "singular" if conf.singular else conf.logdet,
        "trace": conf.trace, "min_eig": conf.min_eig, "singular": conf.singular,
    }
    path = write_rows(cfg.out / f"confidence_{task.kind.value}.csv", [row])
    print(f"tool: m1={params.m1:.6g} m2={params.m2:.6g} l1={params.l1:.6g} l2={params.l2:.6g} ({origin})")
    print(f"task: {task.kind.value}")
    print("Pi_U:")
    for r in pi:
        print("  " + "  ".join(_fmt(v) for v in r))
    print("logdet_confidence: " + ("singular" if conf.singular else _fmt(conf.logdet)))
    print(f"wrote {path}")
    return EXIT_OK


def read_toolset(path: Path) -> tuple[list[int], list[ArmParams]]:
    try:
        rows = read_rows(path)
    except OSError as exc:
        raise ConfigError(f"cannot read toolset {path}: {exc}") from None
    if not rows:
        raise ConfigError(f"toolset {path} has no tools")
    ids, tools = [], []
    for n, row in enumerate(rows, start=2):
        try:
            ids.append(int(row["id"]))
            tools.append(ArmParams(float(row["m1"]), float(row["m2"]), float(row["l1"]), float(row["l2"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{n}: bad tool row ({exc})") from None
    return ids, tools


@contextmanager
def _mapper(jobs: int):
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield lambda fn, *its: pool.map(fn, *its, chunksize=4)


def cmd_select(cfg: RunConfig, toolset: Path, objective: str) -> int:
    try:
        objective = Objective.parse(objective)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ids, tools = read_toolset(toolset)
    task = cfg.task()
    try:
        with _mapper(cfg.jobs) as map_fn:
            report = select_tool(tools, task, objective, cfg.sim_config(), map_fn=map_fn)
    except NoValidToolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    rows = []
    for pos, ev in enumerate(report.evaluations):
        rows.append({
            "index": pos, "id": ids[pos], "m1": ev.params.m1, "m2": ev.params.m2,
            "l1": ev.params.l1, "l2": ev.params.l2, "objective": objective.value,
            "value": ev.value(objective), "logdet": ev.logdet, "task_error": ev.task_error,
            "status": ev.reason or "ok", "chosen": pos == report.chosen_index,
        })
    path = write_rows(cfg.out / f"selection_{task.kind.value}_{objective.value}.csv", rows)
    print(f"objective: {objective.value}  task: {task.kind.value}")
    print(f"chosen_index: {report.chosen_index}  id: {ids[report.chosen_index]}")
    for idx, reason in report.excluded.items():
        print(f"excluded {idx}: {reason}")
    print(f"wrote {path}")
    return EXIT_OK


def run_study(name: str, cfg: RunConfig, map_fn=map) -> experiments.StudyResult:
    sim = cfg.sim_config()
    seed = cfg.seed
    if name == "conf-vs-error":
        s = cfg.study("conf_vs_error")
        return experiments.run_confidence_vs_error(
            int(s["n"]), [cfg.task(k) for k in s["tasks"]], seed, sim, map_fn)
    if name == "perturbation":
        s = cfg.study("perturbation_study")
        return experiments.run_perturbation_study(
            int(s["n"]), float(s["delta_t"]), [float(v) for v in s["sweep"]],
            [cfg.task(k) for k in s["tasks"]], seed, sim, map_fn)
    if name == "selection-grid":
        s = cfg.study("selection_grid")
        return experiments.run_selection_grid(
            int(s["trials"]), int(s["toolset_size"]), seed, cfg.task(s["task"]), sim, map_fn)
    s = cfg.study("benchmark")
    return experiments.run_benchmark(
        int(s["trials"]), int(s["toolset_size"]), float(s["delta_t"]), seed, cfg.task(s["task"]), sim, map_fn)


def write_study(result: experiments.StudyResult, cfg: RunConfig, with_plots: bool = True) -> list[Path]:
    out = cfg.out
    name = result.name
    paths = [write_records(out / f"{name}.csv", result.records), write_rows(out / f"{name}_stats.csv", result.stats)]
    tasks = sorted({r.task for r in result.records if r.task})
    if name == "perturbation":
        for lvl in sorted({r.perturbation for r in result.records}):
            subset = [r for r in result.records if r.perturbation == lvl]
            paths.append(write_records(out / f"perturbation_dT{lvl:+g}.csv", subset))
    if name == "selection-grid":
        size = max((int(k.split("_")[1]) + 1 for row in result.stats for k in row if k.startswith("tool_")), default=0)
        columns = ["trial", "F_choice", "J_choice", "agree", "skipped"] + [f"tool_{i}" for i in range(size)]
        paths.append(write_rows(out / "selection-grid_matrix.csv", result.stats, columns))
    if not with_plots:
        return paths
    for task in tasks:
        ok = [r for r in result.records if r.valid and r.task == task]
        svg = out / f"{name}_{task}.svg"
        if name == "conf-vs-error":
            paths.append(plots.scatter(svg, [r.logdet for r in ok], [r.task_error for r in ok],
                                       "log det control confidence", "task error", f"{task} task"))
        elif name == "perturbation":
            groups = {}
            for r in ok:
                gx, gy = groups.setdefault(f"dT={r.perturbation:+g}", ([], []))
                gx.append(r.logdet)
                gy.append(r.abs_delta_error)
            paths.append(plots.scatter(svg, None, None, "log det control confidence", "|change in task error|",
                                       f"{task} task", groups=groups))
        elif name == "selection-grid":
            paths.append(plots.selection_grid(svg, result.stats, size))
        else:
            groups = {}
            for r in ok:
                gx, gy = groups.setdefault(r.objective, ([], []))
                gx.append(r.logdet)
                gy.append(r.abs_delta_error)
            paths.append(plots.scatter(svg, None, None, "log det control confidence", "|change in task error|",
                                       f"benchmark, {task} task", groups=groups))
    return paths


def _print_stats(result: experiments.StudyResult):
    for row in result.stats:
        print("  " + "  ".join(f"{k}={format_value(v) if isinstance(v, float) else v}" for k, v in row.items()))


def cmd_experiment(cfg: RunConfig, study: str, with_plots: bool = True) -> int:
    with _mapper(cfg.jobs) as map_fn:
        result = run_study(study, cfg, map_fn)
    paths = write_study(result, cfg, with_plots)
    excluded = result.excluded()
    print(f"study: {study}  seed: {cfg.seed}  records: {len(result.records)}  excluded: {len(excluded)}")
    _print_stats(result)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_validate(linearize_fn=linearize) -> int:
    results = validate.run_all(linearize_fn=linearize_fn)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        cfg = load_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "confidence":
            return cmd_confidence(cfg)
        if args.command == "select":
            return cmd_select(cfg, args.toolset, args.objective)
        if args.command == "experiment":
            return cmd_experiment(cfg, args.study, not args.no_plots)
        return cmd_validate()
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
