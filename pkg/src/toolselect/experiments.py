"""Seeded Monte-Carlo studies: confidence vs task error, perturbation
sensitivity, F-vs-J selection grids and the three-objective benchmark.

Every function takes a ``map_fn`` with the ``map(fn, *iterables)`` contract;
pass ``ProcessPoolExecutor.map`` to fan out. Results are ordered by input, so
output never depends on scheduling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.stats

from toolselect.controller import SimConfig, SimulationError, simulate
from toolselect.decision import NoValidToolError, Objective, ToolEvaluation, choose, evaluate_tool
from toolselect.dynamics import ArmParams
from toolselect.linear import linearize
from toolselect.metrics import task_error
from toolselect.tasks import TaskKind, TaskSpec, default_task

PARAM_LOW = 0.1
PARAM_HIGH = 0.6
DEFAULT_SWEEP = (-0.8, -0.4, 0.4, 0.8)
BOOTSTRAP_RESAMPLES = 1000


class DegenerateSeriesError(ValueError):
    """Rank correlation is undefined for a constant series."""


@dataclass(frozen=True)
class ToolSample:
    id: int
    params: ArmParams
    lineage: tuple[int, int]


def draw_tool(seed: int, draw: int) -> ToolSample:
    # each draw owns its stream, so a tool never depends on how many came before it
    rng = np.random.default_rng([seed, draw])
    m1, m2, l1, l2 = rng.uniform(PARAM_LOW, PARAM_HIGH, size=4)
    return ToolSample(draw, ArmParams(float(m1), float(m2), float(l1), float(l2)), (seed, draw))


def sample_tools(n: int, seed: int, start: int = 0) -> list[ToolSample]:
    if n < 1:
        raise ValueError("n must be at least 1")
    return [draw_tool(seed, start + i) for i in range(n)]


def rankdata(values: Sequence[float]) -> np.ndarray:
    return scipy.stats.rankdata(np.asarray(values, dtype=float), method="average")


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho with average ranks for ties."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two 1-D series of equal length")
    if x.size < 3:
        raise ValueError("spearman needs at least 3 pairs")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        raise DegenerateSeriesError("rank correlation undefined for a constant series")
    return float(np.clip((rx @ ry) / denom, -1.0, 1.0))


def bootstrap_spearman_ci(
    xs, ys, seed: int, n_resamples: int = BOOTSTRAP_RESAMPLES, level: float = 0.95
) -> tuple[float, float]:
    """Percentile bootstrap interval for rho over resampled pairs."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    rng = np.random.default_rng([seed, 0xB007])
    stats = []
    for _ in range(n_resamples):
        idx = rng.integers(0, x.size, size=x.size)
        try:
            stats.append(spearman(x[idx], y[idx]))
        except DegenerateSeriesError:
            continue
    if not stats:
        raise DegenerateSeriesError("every bootstrap resample was degenerate")
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def iqr(values) -> float:
    q1, q3 = np.quantile(np.asarray(values, dtype=float), [0.25, 0.75])
    return float(q3 - q1)


def coefficient_of_variation(values) -> float:
    v = np.asarray(values, dtype=float)
    mean = v.mean()
    return float(v.std() / abs(mean)) if mean != 0 else math.inf


@dataclass
class ExperimentRecord:
    seed: int
    task: str
    trial: int
    tool_id: int
    m1: float
    m2: float
    l1: float
    l2: float
    logdet: float
    task_error: float = math.nan
    perturbation: float = math.nan
    perturbed_task_error: float = math.nan
    abs_delta_error: float = math.nan
    F: float = math.nan
    J: float = math.nan
    objective: str = ""
    status: str = "ok"

    @property
    def valid(self) -> bool:
        return self.status == "ok"


RECORD_COLUMNS = tuple(f.name for f in fields(ExperimentRecord))


def _record(seed, task: TaskSpec, trial, tool: ToolSample, logdet, **kw) -> ExperimentRecord:
    p = tool.params
    return ExperimentRecord(seed, task.kind.value, trial, tool.id, p.m1, p.m2, p.l1, p.l2, logdet, **kw)


@dataclass
class StudyResult:
    name: str
    records: list[ExperimentRecord]
    stats: list[dict]

    def valid(self, **match) -> list[ExperimentRecord]:
        return [
            r for r in self.records
            if r.valid and all(getattr(r, k) == v for k, v in match.items())
        ]

    def excluded(self) -> list[ExperimentRecord]:
        return [r for r in self.records if not r.valid]


def correlation_stats(xs, ys, seed: int) -> dict:
    out = {"n_valid": len(xs), "rho": math.nan, "ci_low": math.nan, "ci_high": math.nan}
    if len(xs) < 3:
        out["note"] = "too_few_points"
        return out
    try:
        out["rho"] = spearman(xs, ys)
        out["ci_low"], out["ci_high"] = bootstrap_spearman_ci(xs, ys, seed)
        out["note"] = ""
    except DegenerateSeriesError:
        out["note"] = "degenerate_series"
    return out


# --- per-tool jobs (top-level so process pools can pickle them) ---


def _unperturbed_job(tool: ToolSample, task: TaskSpec, cfg: SimConfig, seed: int, trial: int):
    ev = evaluate_tool(tool.id, tool.params, task, cfg)
    if ev.reason.startswith("simulation_failed"):
        return _record(seed, task, trial, tool, ev.logdet, status=ev.reason)
    return _record(
        seed, task, trial, tool, ev.logdet, task_error=ev.task_error, F=ev.F, J=ev.J,
        status="ok" if ev.valid else ev.reason,
    )


def perturbation_sensitivity(tool: ToolSample, task: TaskSpec, delta_t, cfg: SimConfig | None = None) -> float:
    """Absolute change in task error when ``delta_t`` is added to the plant torque.

    ``delta_t`` may be a scalar (applied to both joints) or a 2-vector.
    Simulation failures propagate as :class:`SimulationError`.
    """
    cfg = cfg or SimConfig()
    pert = np.broadcast_to(np.asarray(delta_t, dtype=float), (2,))
    ss = linearize(tool.params)
    base = task_error(simulate(tool.params, ss, task, cfg), task)
    if not np.any(pert):
        return 0.0
    moved = task_error(simulate(tool.params, ss, task, cfg, perturbation=pert), task)
    return abs(moved - base)


def _perturbation_job(tool: ToolSample, task: TaskSpec, levels, cfg: SimConfig, seed: int, trial: int):
    ss = linearize(tool.params)
    ev = evaluate_tool(tool.id, tool.params, task, cfg)
    out = []
    if ev.reason.startswith("simulation_failed"):
        return [_record(seed, task, trial, tool, ev.logdet, perturbation=lvl, status=ev.reason) for lvl in levels]
    for lvl in levels:
        if lvl == 0.0:
            moved = ev.task_error
        else:
            try:
                traj = simulate(tool.params, ss, task, cfg, perturbation=(lvl, lvl))
            except SimulationError as exc:
                out.append(_record(
                    seed, task, trial, tool, ev.logdet, task_error=ev.task_error,
                    perturbation=lvl, status=f"simulation_failed:{exc.reason}",
                ))
                continue
            moved = task_error(traj, task)
        out.append(_record(
            seed, task, trial, tool, ev.logdet, task_error=ev.task_error, perturbation=lvl,
            perturbed_task_error=moved, abs_delta_error=abs(moved - ev.task_error),
            F=ev.F, J=ev.J, status="ok" if ev.valid else ev.reason,
        ))
    return out


def _trial_job(tools: list[ToolSample], task: TaskSpec, cfg: SimConfig, delta_t, seed: int, trial: int):
    """Evaluate one toolset, select under all objectives, perturb the chosen tools."""
    evals = [evaluate_tool(i, t.params, task, cfg) for i, t in enumerate(tools)]
    choices = {}
    for objective in Objective:
        try:
            choices[objective] = choose(evals, objective).chosen_index
        except NoValidToolError:
            choices[objective] = None
    sensitivity = {}
    if delta_t is not None:
        for idx in sorted({c for c in choices.values() if c is not None}):
            try:
                sensitivity[idx] = perturbation_sensitivity(tools[idx], task, delta_t, cfg)
            except SimulationError as exc:
                sensitivity[idx] = exc
    return evals, choices, sensitivity


def _tasks(tasks) -> list[TaskSpec]:
    return [t if isinstance(t, TaskSpec) else default_task(t) for t in tasks]


def run_confidence_vs_error(
    n: int = 300,
    tasks: Iterable = (TaskKind.POSITION, TaskKind.VELOCITY, TaskKind.ACCELERATION),
    seed: int = 0,
    cfg: SimConfig | None = None,
    map_fn: Callable = map,
) -> StudyResult:
    cfg = cfg or SimConfig()
    tools = sample_tools(n, seed)
    records, stats = [], []
    for task in _tasks(tasks):
        rows = list(map_fn(_unperturbed_job, tools, [task] * n, [cfg] * n, [seed] * n, [-1] * n))
        records.extend(rows)
        ok = [r for r in rows if r.valid]
        row = {"task": task.kind.value, "n": n, "n_excluded": n - len(ok)}
        row.update(correlation_stats([r.logdet for r in ok], [r.task_error for r in ok], seed))
        if ok:
            row["cv_logdet"] = coefficient_of_variation([r.logdet for r in ok])
            row["cv_task_error"] = coefficient_of_variation([r.task_error for r in ok])
        stats.append(row)
    return StudyResult("conf-vs-error", records, stats)


def run_perturbation_study(
    n: int = 100,
    delta_t: float = -0.8,
    sweep: Sequence[float] = DEFAULT_SWEEP,
    tasks: Iterable = (TaskKind.POSITION, TaskKind.VELOCITY),
    seed: int = 0,
    cfg: SimConfig | None = None,
    map_fn: Callable = map,
) -> StudyResult:
    cfg = cfg or SimConfig()
    levels = sorted(set([float(delta_t), *map(float, sweep)]))
    tools = sample_tools(n, seed)
    records, stats = [], []
    for task in _tasks(tasks):
        per_tool = list(map_fn(_perturbation_job, tools, [task] * n, [levels] * n, [cfg] * n, [seed] * n, [-1] * n))
        rows = [r for group in per_tool for r in group]
        records.extend(rows)
        for lvl in levels:
            ok = [r for r in rows if r.valid and r.perturbation == lvl]
            row = {"task": task.kind.value, "perturbation": lvl, "n": n, "n_excluded": n - len(ok)}
            deltas = [r.abs_delta_error for r in ok]
            if lvl == 0.0:
                row.update({"n_valid": len(ok), "rho": math.nan, "ci_low": math.nan, "ci_high": math.nan,
                            "note": "zero_perturbation"})
            else:
                row.update(correlation_stats([r.logdet for r in ok], deltas, seed))
            row["iqr_abs_delta"] = iqr(deltas) if deltas else math.nan
            row["median_abs_delta"] = float(np.median(deltas)) if deltas else math.nan
            stats.append(row)
    return StudyResult("perturbation", records, stats)


CELL_LABELS = ("neither", "F-only", "J-only", "both")


def classify_cell(idx: int, f_choice, j_choice) -> str:
    return CELL_LABELS[(idx == f_choice) + 2 * (idx == j_choice)]


def _trial_toolsets(trials: int, toolset_size: int, seed: int) -> list[list[ToolSample]]:
    return [sample_tools(toolset_size, seed, start=t * toolset_size) for t in range(trials)]


def run_selection_grid(
    trials: int = 25,
    toolset_size: int = 5,
    seed: int = 0,
    task=TaskKind.VELOCITY,
    cfg: SimConfig | None = None,
    map_fn: Callable = map,
    toolsets: list[list[ToolSample]] | None = None,
) -> StudyResult:
    """F versus J choices over fresh random toolsets.

    ``stats`` holds one row per trial with the cell label of every tool.
    """
    cfg = cfg or SimConfig()
    task = _tasks([task])[0]
    toolsets = toolsets or _trial_toolsets(trials, toolset_size, seed)
    k = len(toolsets)
    results = list(map_fn(_trial_job, toolsets, [task] * k, [cfg] * k, [None] * k, [seed] * k, range(k)))
    records, stats = [], []
    for trial, (tools, (evals, choices, _)) in enumerate(zip(toolsets, results)):
        f_choice, j_choice = choices[Objective.FREE_ENERGY], choices[Objective.QUADRATIC]
        skipped = f_choice is None or j_choice is None
        row = {"trial": trial, "F_choice": f_choice, "J_choice": j_choice,
               "agree": (not skipped) and f_choice == j_choice, "skipped": skipped}
        for i, (tool, ev) in enumerate(zip(tools, evals)):
            cell = "skipped" if skipped else classify_cell(i, f_choice, j_choice)
            row[f"tool_{i}"] = cell
            records.append(_eval_record(seed, task, trial, tool, ev, objective=cell))
        stats.append(row)
    return StudyResult("selection-grid", records, stats)


def _eval_record(seed, task, trial, tool, ev: ToolEvaluation, **kw) -> ExperimentRecord:
    if ev.reason.startswith("simulation_failed"):
        return _record(seed, task, trial, tool, ev.logdet, status=ev.reason, **kw)
    return _record(seed, task, trial, tool, ev.logdet, task_error=ev.task_error, F=ev.F, J=ev.J,
                   status="ok" if ev.valid else ev.reason, **kw)


BENCHMARK_METRICS = ("logdet", "task_error", "abs_delta_error")


def summarize_benchmark(records: Sequence[ExperimentRecord]) -> list[dict]:
    rows = []
    for objective in Objective:
        chosen = [r for r in records if r.objective == objective.value and r.valid]
        row = {"objective": objective.value, "n": len(chosen)}
        for metric in BENCHMARK_METRICS:
            v = np.array([getattr(r, metric) for r in chosen], dtype=float)
            if v.size:
                row[f"mean_{metric}"] = float(v.mean())
                row[f"median_{metric}"] = float(np.median(v))
                row[f"std_{metric}"] = float(v.std())
                row[f"iqr_{metric}"] = iqr(v)
            else:
                for stat in ("mean", "median", "std", "iqr"):
                    row[f"{stat}_{metric}"] = math.nan
        rows.append(row)
    return rows


def run_benchmark(
    trials: int = 50,
    toolset_size: int = 10,
    delta_t: float = -0.8,
    seed: int = 0,
    task=TaskKind.VELOCITY,
    cfg: SimConfig | None = None,
    map_fn: Callable = map,
) -> StudyResult:
    """Chosen-tool quality under F, J and confidence-only selection.

    Records hold one row per (trial, objective) describing the chosen tool.
    """
    cfg = cfg or SimConfig()
    task = _tasks([task])[0]
    toolsets = _trial_toolsets(trials, toolset_size, seed)
    k = len(toolsets)
    results = list(map_fn(_trial_job, toolsets, [task] * k, [cfg] * k, [delta_t] * k, [seed] * k, range(k)))
    records = []
    for trial, (tools, (evals, choices, sens)) in enumerate(zip(toolsets, results)):
        for objective in Objective:
            idx = choices[objective]
            if idx is None:
                records.append(ExperimentRecord(seed, task.kind.value, trial, -1, *(math.nan,) * 5,
                                                objective=objective.value, status="skipped_no_valid_tool"))
                continue
            ev = evals[idx]
            s = sens[idx]
            status = f"simulation_failed:{s.reason}" if isinstance(s, SimulationError) else "ok"
            delta = math.nan if isinstance(s, SimulationError) else s
            records.append(_record(
                seed, task, trial, tools[idx], ev.logdet, task_error=ev.task_error,
                perturbation=float(delta_t), abs_delta_error=delta, F=ev.F, J=ev.J, objective=objective.value, status=status,
            ))
    return StudyResult("benchmark", records, summarize_benchmark(records))


# --- CSV output ---


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return format(v, ".17g")
    return str(v)


def write_rows(path: Path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def write_records(path: Path, records: Sequence[ExperimentRecord]) -> Path:
    return write_rows(path, [asdict(r) for r in records], RECORD_COLUMNS)


def read_rows(path: Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
