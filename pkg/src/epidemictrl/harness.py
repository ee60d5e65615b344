"""Command-line harness: baselines, optimization experiments, reports.

Subcommands:
  simulate   run one fixed baseline schedule over a seed list
  train      optimize a schedule for one experiment/scenario, then compare
             it against all four baselines on matched seeds
  evaluate   score a saved actor checkpoint
  gradcheck  finite-difference sweep over random networks

Every run writes a resolved-config JSON sidecar next to its outputs so it
can be reproduced exactly. EPIDEMICTRL_THREADS caps how many worker
processes fan out over independent (schedule, seed) episodes.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .ddpg import DdpgHyperParams, TrainLog, evaluate, train
from .economy import EconomyConfig
from .env import (
    EpidemicTask,
    EpisodeTrace,
    ExperimentConfig,
    economy_reward,
    health_reward,
    run_episode,
    total_reward,
)
from .epidemic import AgeBandRates, Compartment, DiseaseParams, TIMED_COMPARTMENTS
from .interventions import (
    InterventionSchedule,
    VaccinationPolicyConfig,
    VaccineSpec,
    empty_schedule,
)
from .neural import Mlp, finite_diff_check, load_mlp, mlp_from_widths, save_mlp
from .world import WorldConfig

#: Dose availabilities in the experiment table are quoted at this scale and
#: scale linearly with the simulated population.
REFERENCE_POPULATION = 100_000
DEFAULT_POPULATION = 10_000

EXPERIMENT_TABLE: dict[int, dict] = {
    1: {"initial_infection_percent": 15, "v1": (0.8, 450), "v2": (0.6, 450)},
    2: {"initial_infection_percent": 1, "v1": (0.8, 450), "v2": (0.6, 450)},
    3: {"initial_infection_percent": 15, "v1": (0.8, 100), "v2": (0.6, 700)},
    4: {"initial_infection_percent": 1, "v1": (0.8, 100), "v2": (0.6, 700)},
}

SCENARIO_KAPPA = {1: 1.0, 2: 0.2, 3: 5.0}

TRACE_HEADER = (
    "day,susceptible,exposed,asymptomatic,presymptomatic,infected_mild,"
    "infected_severe,hospitalized,recovered,deceased,below_poverty_line,doses_given"
)

SVG_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#17becf",
)


class ConfigError(ValueError):
    pass


class BaselineId(Enum):
    NOL_NOV = "NoL_NoV"
    FULLL_FULLV = "FullL_FullV"
    NOL_FULLV = "NoL_FullV"
    L30_FULLV = "L30_FullV"


def parse_baseline(text: str) -> BaselineId:
    for b in BaselineId:
        if b.value.lower() == text.lower():
            return b
    names = ", ".join(b.value for b in BaselineId)
    raise ConfigError(f"unknown baseline {text!r}; expected one of {names}")


def baseline_schedule(
    baseline: BaselineId, episode_days: int = 100
) -> InterventionSchedule:
    d = float(episode_days)
    full = (0.0, d)
    none = (0.0, 0.0)
    if baseline is BaselineId.NOL_NOV:
        return empty_schedule()
    if baseline is BaselineId.FULLL_FULLV:
        return InterventionSchedule(full, (full, full, full))
    if baseline is BaselineId.NOL_FULLV:
        return InterventionSchedule(none, (full, full, full))
    if baseline is BaselineId.L30_FULLV:
        return InterventionSchedule((0.0, min(30.0, d)), (full, full, full))
    raise ConfigError(f"unknown baseline {baseline}")


# ---------------------------------------------------------------------------
# Config file ingestion (strict: unknown keys are rejected at every level).


def _reject_unknown(section: str, data: dict, allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {section} keys: {unknown}")


def world_config_from_dict(data: dict) -> WorldConfig:
    fields = (
        "population_size",
        "household_size",
        "office_capacity",
        "school_capacity",
        "hospitals",
        "essential_worker_fraction",
        "violator_fraction",
        "episode_days",
        "seed",
    )
    _reject_unknown("world", data, fields)
    return WorldConfig(**data)


def economy_config_from_dict(data: dict) -> EconomyConfig:
    fields = (
        "savings_mean",
        "savings_sd",
        "income_mean",
        "income_sd",
        "expense_per_person",
        "poverty_line",
    )
    _reject_unknown("economy", data, fields)
    return EconomyConfig(**data)


def disease_params_from_dict(data: dict) -> DiseaseParams:
    _reject_unknown("disease", data, ("beta_base", "age_bands", "stage_durations"))
    kwargs: dict = {}
    if "beta_base" in data:
        kwargs["beta_base"] = float(data["beta_base"])
    if "age_bands" in data:
        rows = data["age_bands"]
        if len(rows) != 10:
            raise ConfigError("age_bands needs exactly 10 decade rows")
        kwargs["age_bands"] = tuple(AgeBandRates(*map(float, row)) for row in rows)
    if "stage_durations" in data:
        by_name = {c.name.lower(): c for c in TIMED_COMPARTMENTS}
        _reject_unknown("stage_durations", data["stage_durations"], by_name)
        durations = dict(DiseaseParams().stage_durations)
        for name, (mean, sd) in data["stage_durations"].items():
            durations[by_name[name]] = (float(mean), float(sd))
        kwargs["stage_durations"] = durations
    return DiseaseParams(**kwargs)


def vaccination_policy_from_dict(
    data: dict, default_specs: tuple[VaccineSpec, VaccineSpec]
) -> VaccinationPolicyConfig:
    _reject_unknown("vaccination", data, ("coverage_cap", "vaccines"))
    specs = default_specs
    if "vaccines" in data:
        rows = data["vaccines"]
        if len(rows) != 2:
            raise ConfigError("vaccines needs exactly 2 entries")
        parsed = []
        for row in rows:
            _reject_unknown("vaccine", row, ("effectiveness", "daily_doses"))
            parsed.append(
                VaccineSpec(float(row["effectiveness"]), int(row["daily_doses"]))
            )
        specs = (parsed[0], parsed[1])
    cap = float(data.get("coverage_cap", 0.90))
    return VaccinationPolicyConfig(specs=specs, coverage_cap=cap)


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    _reject_unknown("config", data, ("world", "disease", "economy", "vaccination"))
    return data


def scaled_doses(doses_at_reference: int, population: int) -> int:
    return int(round(doses_at_reference * population / REFERENCE_POPULATION))


def experiment_config(
    exp_id: int,
    scenario_id: int,
    population: int | None = None,
    episode_days: int | None = None,
    file_cfg: dict | None = None,
) -> ExperimentConfig:
    """Build the full episode config for one experiment/scenario pair.

    The experiment table pins the initial infection share and both vaccine
    specs (dose rates scale with population); the scenario picks kappa.
    A config file may override the world, disease and economy sections and
    may pin absolute vaccine specs, which are then used unscaled.
    """
    if exp_id not in EXPERIMENT_TABLE:
        raise ConfigError(f"experiment id must be 1..4, got {exp_id}")
    if scenario_id not in SCENARIO_KAPPA:
        raise ConfigError(f"scenario id must be 1..3, got {scenario_id}")
    file_cfg = file_cfg or {}

    world = world_config_from_dict(file_cfg.get("world", {}))
    if population is None:
        population = world.population_size if "world" in file_cfg else DEFAULT_POPULATION
    if episode_days is not None:
        world = replace(world, episode_days=episode_days)
    world = replace(world, population_size=population)

    row = EXPERIMENT_TABLE[exp_id]
    default_specs = (
        VaccineSpec(row["v1"][0], scaled_doses(row["v1"][1], population)),
        VaccineSpec(row["v2"][0], scaled_doses(row["v2"][1], population)),
    )
    return ExperimentConfig(
        world=world,
        disease=disease_params_from_dict(file_cfg.get("disease", {})),
        economy=economy_config_from_dict(file_cfg.get("economy", {})),
        vaccination=vaccination_policy_from_dict(
            file_cfg.get("vaccination", {}), default_specs
        ),
        initial_infection_fraction=row["initial_infection_percent"] / 100.0,
        kappa=SCENARIO_KAPPA[scenario_id],
    )


def sanity_config(population: int = 2_000, episode_days: int = 100) -> ExperimentConfig:
    """Degenerate check scenario: lockdown costs nothing economically and a
    perfect vaccine trickles out slowly, so a near-permanent lockdown
    dominates every other schedule.

    The health-priority reward mix (kappa 0.2) keeps the economy's noise
    from drowning the health contrast, and the scarce perfect vaccine
    cannot substitute for the lockdown.
    """
    return ExperimentConfig(
        world=WorldConfig(population_size=population, episode_days=episode_days),
        vaccination=VaccinationPolicyConfig(
            specs=(
                VaccineSpec(1.0, scaled_doses(100, population)),
                VaccineSpec(1.0, scaled_doses(100, population)),
            )
        ),
        initial_infection_fraction=0.05,
        kappa=0.2,
        lockdown_affects_economy=False,
    )


def sanity_hyper(seed: int = 0) -> DdpgHyperParams:
    """Learner settings for the check scenario.

    Past roughly 60 lockdown days the reward surface is flat (the epidemic
    dies out under containment at this scale), so the actor runs slightly
    hotter than the default to reach output saturation before plateau
    noise can stall it.
    """
    return DdpgHyperParams(seed=seed, actor_lr=7e-3)


def config_to_dict(config: ExperimentConfig) -> dict:
    """Resolved config as plain JSON-serializable data (the sidecar)."""
    return {
        "world": {
            "population_size": config.world.population_size,
            "household_size": config.world.household_size,
            "office_capacity": config.world.office_capacity,
            "school_capacity": config.world.school_capacity,
            "hospitals": config.world.hospital_count,
            "essential_worker_fraction": config.world.essential_worker_fraction,
            "violator_fraction": config.world.violator_fraction,
            "episode_days": config.world.episode_days,
            "seed": config.world.seed,
        },
        "disease": {
            "beta_base": config.disease.beta_base,
            "age_bands": [
                [b.beta_multiplier, b.symptomatic_prob, b.severe_prob, b.sigma]
                for b in config.disease.age_bands
            ],
            "stage_durations": {
                c.name.lower(): list(config.disease.stage_durations[c])
                for c in TIMED_COMPARTMENTS
            },
        },
        "economy": {
            "savings_mean": config.economy.savings_mean,
            "savings_sd": config.economy.savings_sd,
            "income_mean": config.economy.income_mean,
            "income_sd": config.economy.income_sd,
            "expense_per_person": config.economy.expense_per_person,
            "poverty_line": config.economy.poverty_line,
        },
        "vaccination": {
            "coverage_cap": config.vaccination.coverage_cap,
            "vaccines": [
                {"effectiveness": s.effectiveness, "daily_doses": s.daily_doses}
                for s in config.vaccination.specs
            ],
        },
        "initial_infection_fraction": config.initial_infection_fraction,
        "kappa": config.kappa,
        "lockdown_affects_economy": config.lockdown_affects_economy,
    }


# ---------------------------------------------------------------------------
# Trace and plot emission.


def write_trace_csv(trace: EpisodeTrace, path) -> None:
    """One integer row per day 0..episode_days, newline terminated."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(TRACE_HEADER + "\n")
            for day in range(trace.days + 1):
                row = [day, *trace.compartments[day].tolist()]
                row.append(int(trace.below_poverty[day]))
                row.append(int(trace.doses[day]))
                fh.write(",".join(str(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_trace_csv(path) -> EpisodeTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header")
        rows = [[int(v) for v in row] for row in reader]
    data = np.array(rows, dtype=np.int64)
    compartments = data[:, 1:10]
    return EpisodeTrace(
        population=int(compartments[0].sum()),
        compartments=compartments,
        below_poverty=data[:, 10],
        doses=data[:, 11],
    )


def emit_plot_svg(
    series: list[tuple[str, np.ndarray]],
    path,
    title: str = "",
    y_label: str = "",
    width: int = 760,
    height: int = 460,
) -> None:
    """Self-contained SVG line chart: one polyline per labeled series."""
    if not series:
        raise ValueError("at least one series is required")
    left, right, top, bottom = 64.0, width - 190.0, 48.0, height - 56.0
    n = max(len(ys) for _, ys in series)
    if n < 1:
        raise ValueError("series must not be empty")
    y_max = max(1e-9, max(float(np.max(ys)) for _, ys in series))
    y_min = min(0.0, min(float(np.min(ys)) for _, ys in series))
    span = (y_max - y_min) or 1.0

    def sx(i: float) -> float:
        return left + (right - left) * (i / max(1, n - 1))

    def sy(v: float) -> float:
        return bottom - (bottom - top) * ((v - y_min) / span)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{(left + right) / 2:.1f}" y="24" text-anchor="middle" '
            f'font-size="15">{escape(title)}</text>'
        )
    # axes
    parts.append(
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>'
    )
    x_step = max(1, (n - 1) // 10 or 1)
    for day in range(0, n, x_step):
        x = sx(day)
        parts.append(
            f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{bottom + 18}" text-anchor="middle">{day}</text>'
        )
    parts.append(
        f'<text x="{(left + right) / 2:.1f}" y="{height - 14}" text-anchor="middle">day</text>'
    )
    for k in range(6):
        v = y_min + span * k / 5
        y = sy(v)
        parts.append(
            f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{v:g}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="16" y="{(top + bottom) / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(top + bottom) / 2:.1f})">{escape(y_label)}</text>'
        )
    for k, (label, ys) in enumerate(series):
        color = SVG_PALETTE[k % len(SVG_PALETTE)]
        points = " ".join(
            f"{sx(i):.2f},{sy(float(v)):.2f}" for i, v in enumerate(ys)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        ly = top + 18 * k
        parts.append(
            f'<line x1="{right + 10}" y1="{ly}" x2="{right + 34}" y2="{ly}" '
            f'stroke="{color}" stroke-width="3"/>'
        )
        parts.append(f'<text x="{right + 40}" y="{ly + 4}">{escape(label)}</text>')
    parts.append("</svg>")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write plot to {path}: {exc}") from exc


def format_window(window: tuple[float, float]) -> str:
    start, end = int(round(window[0])), int(round(window[1]))
    if end <= start:
        return "none"
    return f"days {start}-{end}"


def format_schedule(schedule: InterventionSchedule) -> str:
    strata = ("0-17", "18-59", "60-99")
    parts = [f"lockdown: {format_window(schedule.lockdown)}"]
    parts.extend(
        f"vax {name}: {format_window(w)}"
        for name, w in zip(strata, schedule.vax_windows)
    )
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# Episode fan-out and metrics.


def _trace_job(args):
    config, label, schedule, seed = args
    return label, seed, run_episode(config, schedule, seed)


def _worker_count(n_jobs: int) -> int:
    raw = os.environ.get("EPIDEMICTRL_THREADS", "1")
    try:
        workers = int(raw)
    except ValueError:
        workers = 1
    return max(1, min(workers, n_jobs))


def run_traces(
    config: ExperimentConfig, jobs: list[tuple[str, InterventionSchedule, int]]
) -> list[tuple[str, int, EpisodeTrace]]:
    """Run labeled (schedule, seed) episodes, optionally across processes."""
    workers = _worker_count(len(jobs))
    packed = [(config, label, schedule, seed) for label, schedule, seed in jobs]
    if workers == 1:
        return [_trace_job(p) for p in packed]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trace_job, packed))


def trace_metrics(trace: EpisodeTrace, kappa: float) -> dict[str, float]:
    h = health_reward(trace)
    e = economy_reward(trace)
    active = trace.infected_mild + trace.hospitalized
    return {
        "cumulative_infections": float(trace.ever_infected[-1]),
        "peak_infected_mild_hosp": float(active.max()),
        "total_deceased": float(trace.deceased[-1]),
        "peak_below_poverty": float(trace.below_poverty.max()),
        "mean_below_poverty": float(trace.below_poverty.mean()),
        "health_reward": h,
        "economy_reward": e,
        "total_reward": total_reward(h, e, kappa),
    }


METRIC_COLUMNS = (
    "cumulative_infections",
    "peak_infected_mild_hosp",
    "total_deceased",
    "peak_below_poverty",
    "mean_below_poverty",
    "health_reward",
    "economy_reward",
    "total_reward",
)


def write_comparison_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "seed", *METRIC_COLUMNS])
        for row in rows:
            writer.writerow(
                [row["policy"], row["seed"], *(row[c] for c in METRIC_COLUMNS)]
            )


def summarize(rows: list[dict]) -> dict[str, dict[str, float]]:
    """Mean metrics per policy label, preserving first-seen order."""
    summary: dict[str, dict[str, float]] = {}
    for label in dict.fromkeys(row["policy"] for row in rows):
        group = [row for row in rows if row["policy"] == label]
        summary[label] = {
            c: float(np.mean([row[c] for row in group])) for c in METRIC_COLUMNS
        }
        summary[label]["n_seeds"] = len(group)
    return summary


def write_summary_csv(summary: dict[str, dict[str, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "n_seeds", *METRIC_COLUMNS])
        for label, metrics in summary.items():
            writer.writerow(
                [label, int(metrics["n_seeds"]), *(metrics[c] for c in METRIC_COLUMNS)]
            )


def _mean_series(traces: list[EpisodeTrace], extract) -> np.ndarray:
    return np.mean([extract(t).astype(np.float64) for t in traces], axis=0)


def write_series_plots(
    results: list[tuple[str, int, EpisodeTrace]], out_dir: Path
) -> list[Path]:
    """The figure triplet: below-poverty-line, deceased, total infected."""
    by_label: dict[str, list[EpisodeTrace]] = {}
    for label, _, trace in results:
        by_label.setdefault(label, []).append(trace)
    plots = (
        ("below_poverty_line", lambda t: t.below_poverty, "Below-Poverty-Line"),
        ("deceased", lambda t: t.deceased, "Deceased"),
        ("total_infected", lambda t: t.ever_infected, "Total Infected"),
    )
    written = []
    for stem, extract, label_text in plots:
        series = [
            (label, _mean_series(traces, extract))
            for label, traces in by_label.items()
        ]
        path = out_dir / f"{stem}.svg"
        emit_plot_svg(series, path, title=label_text, y_label=label_text)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# High-level runs.


@dataclass
class BaselineRun:
    baseline: BaselineId
    schedule: InterventionSchedule
    traces: dict[int, EpisodeTrace]
    rows: list[dict]
    summary: dict[str, dict[str, float]]


def run_baseline(
    baseline: BaselineId,
    config: ExperimentConfig,
    seeds: list[int],
    out_dir: Path | None = None,
) -> BaselineRun:
    """Run one fixed baseline schedule over the seed list."""
    if not seeds:
        raise ValueError("seeds must not be empty")
    schedule = baseline_schedule(baseline, config.world.episode_days)
    results = run_traces(config, [(baseline.value, schedule, s) for s in seeds])
    rows = [
        {"policy": label, "seed": seed, **trace_metrics(trace, config.kappa)}
        for label, seed, trace in results
    ]
    summary = summarize(rows)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "resolved_config.json", "w") as fh:
            json.dump(config_to_dict(config), fh, indent=2)
        for label, seed, trace in results:
            write_trace_csv(trace, out_dir / f"trace_{label}_seed{seed}.csv")
        write_comparison_csv(rows, out_dir / "comparison.csv")
        write_summary_csv(summary, out_dir / "summary.csv")
        write_series_plots(results, out_dir)
    return BaselineRun(
        baseline=baseline,
        schedule=schedule,
        traces={seed: trace for _, seed, trace in results},
        rows=rows,
        summary=summary,
    )


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    schedule: InterventionSchedule
    eval_mean: float
    eval_sd: float
    log: TrainLog
    summary: dict[str, dict[str, float]]
    rows: list[dict]
    actor: Mlp
    burn_in_actions: list = None


def run_experiment(
    exp_id: int,
    scenario_id: int,
    hyper: DdpgHyperParams | None = None,
    population: int | None = None,
    comparison_seeds: list[int] | None = None,
    out_dir: Path | None = None,
    file_cfg: dict | None = None,
    config: ExperimentConfig | None = None,
) -> ExperimentReport:
    """Train a policy for one experiment/scenario and compare it with the
    four baselines on matched seeds."""
    if hyper is None:
        hyper = DdpgHyperParams()
    if comparison_seeds is None:
        comparison_seeds = list(range(5))
    if config is None:
        config = experiment_config(exp_id, scenario_id, population, file_cfg=file_cfg)

    task = EpidemicTask(config, seed_base=hyper.seed)
    result = train(task, hyper)
    final = evaluate(result.best_actor, task, hyper.eval_repeats)
    schedule = final.schedule

    jobs: list[tuple[str, InterventionSchedule, int]] = [
        ("optimized", schedule, s) for s in comparison_seeds
    ]
    for baseline in BaselineId:
        base_sched = baseline_schedule(baseline, config.world.episode_days)
        jobs.extend((baseline.value, base_sched, s) for s in comparison_seeds)
    results = run_traces(config, jobs)
    rows = [
        {"policy": label, "seed": seed, **trace_metrics(trace, config.kappa)}
        for label, seed, trace in results
    ]
    summary = summarize(rows)

    if out_dir is not None:
        out_dir = Path(out_dir)
        traces_dir = out_dir / "traces"
        traces_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "resolved_config.json", "w") as fh:
            json.dump(config_to_dict(config), fh, indent=2)
        result.log.to_csv(out_dir / "training_log.csv")
        save_mlp(
            result.best_actor,
            out_dir / "actor.ckpt",
            seed=hyper.seed,
            step=hyper.train_iterations,
        )
        for label, seed, trace in results:
            write_trace_csv(trace, traces_dir / f"trace_{label}_seed{seed}.csv")
        write_comparison_csv(rows, out_dir / "comparison.csv")
        write_summary_csv(summary, out_dir / "summary.csv")
        write_series_plots(results, out_dir)

    return ExperimentReport(
        config=config,
        schedule=schedule,
        eval_mean=final.mean,
        eval_sd=final.sd,
        log=result.log,
        summary=summary,
        rows=rows,
        actor=result.best_actor,
    )


def gradcheck_sweep(
    n_nets: int = 100, eps: float = 1e-5, seed: int = 0
) -> float:
    """Worst finite-difference relative error over random small networks.

    Inputs are redrawn when a rectifier pre-activation sits within 1e-3 of
    its kink, where a central difference stops being a valid derivative
    estimate.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_nets):
        depth = int(rng.integers(1, 3))
        widths = tuple(int(w) for w in rng.integers(2, 12, size=depth + 2))
        hidden = str(rng.choice(["relu", "tanh"]))
        output = str(rng.choice(["tanh", "identity"]))
        net = mlp_from_widths(widths, hidden, output, rng)
        for _ in range(50):
            x = rng.normal(size=widths[0])
            if _kink_margin(net, x) > 1e-3:
                break
        worst = max(worst, finite_diff_check(net, x, eps))
    return worst


def _kink_margin(net: Mlp, x: np.ndarray) -> float:
    """Smallest |pre-activation| over rectifier layers (inf if none)."""
    _, (cache, _) = net.forward_cached(x)
    margin = math.inf
    for spec, (_, z) in zip(net.specs, cache):
        if spec.activation == "relu":
            margin = min(margin, float(np.abs(z).min()))
    return margin


# ---------------------------------------------------------------------------
# CLI.


def parse_seeds(text: str) -> list[int]:
    """Accept '0..4', '3', or '0,2,5'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo_i, hi_i = int(lo), int(hi)
        if hi_i < lo_i:
            raise ConfigError(f"bad seed range {text!r}")
        return list(range(lo_i, hi_i + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epidemictrl",
        description="Epidemic intervention simulator and policy optimizer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--experiment", type=int, default=1, choices=(1, 2, 3, 4))
        p.add_argument("--scenario", type=int, default=1, choices=(1, 2, 3))
        p.add_argument(
            "--population",
            type=int,
            default=None,
            help=f"agents to simulate (default {DEFAULT_POPULATION})",
        )

    p = sub.add_parser("simulate", help="run a fixed baseline schedule")
    add_common(p)
    p.add_argument("--baseline", required=True, help="NoL_NoV | FullL_FullV | NoL_FullV | L30_FullV")
    p.add_argument("--seeds", default="0..4", help="seed list, e.g. 0..4 or 0,1,2")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="optimize a schedule and compare to baselines")
    add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--iterations", type=int, default=150)
    p.add_argument("--seed", type=int, default=0, help="training seed")
    p.add_argument("--seeds", default="0..4", help="comparison seeds")

    p = sub.add_parser("evaluate", help="score a saved actor checkpoint")
    add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="evaluation seed base")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("gradcheck", help="finite-difference gradient sweep")
    p.add_argument("--nets", type=int, default=100)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_file_cfg(args) -> dict | None:
    return load_config_file(args.config) if args.config else None


def _cmd_simulate(args) -> int:
    baseline = parse_baseline(args.baseline)
    config = experiment_config(
        args.experiment, args.scenario, args.population, file_cfg=_load_file_cfg(args)
    )
    seeds = parse_seeds(args.seeds)
    run = run_baseline(baseline, config, seeds, out_dir=Path(args.out))
    print(f"baseline {baseline.value}: {format_schedule(run.schedule)}")
    for label, metrics in run.summary.items():
        print(
            f"  {label}: total_reward={metrics['total_reward']:.1f} "
            f"cum_infections={metrics['cumulative_infections']:.0f} "
            f"peak_bpl={metrics['peak_below_poverty']:.0f}"
        )
    print(f"wrote outputs to {args.out}")
    return 0


def _cmd_train(args) -> int:
    hyper = DdpgHyperParams(seed=args.seed, train_iterations=args.iterations)
    report = run_experiment(
        args.experiment,
        args.scenario,
        hyper=hyper,
        population=args.population,
        comparison_seeds=parse_seeds(args.seeds),
        out_dir=Path(args.out),
        file_cfg=_load_file_cfg(args),
    )
    print(
        f"experiment {args.experiment} scenario {args.scenario} "
        f"(kappa={report.config.kappa:g}, population={report.config.world.population_size})"
    )
    print(f"optimized schedule: {format_schedule(report.schedule)}")
    print(f"eval reward (scaled): {report.eval_mean:.4f} +- {report.eval_sd:.4f}")
    for label, metrics in report.summary.items():
        print(f"  {label}: total_reward={metrics['total_reward']:.1f}")
    print(f"wrote outputs to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    actor, _ = load_mlp(args.checkpoint)
    config = experiment_config(
        args.experiment, args.scenario, args.population, file_cfg=_load_file_cfg(args)
    )
    task = EpidemicTask(config, seed_base=args.seed)
    result = evaluate(actor, task, args.repeats)
    print(f"schedule: {format_schedule(result.schedule)}")
    print(f"reward (scaled): {result.mean:.4f} +- {result.sd:.4f} over {args.repeats} repeats")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "evaluation.json", "w") as fh:
            json.dump(
                {
                    "mean": result.mean,
                    "sd": result.sd,
                    "rewards": result.rewards,
                    "action": result.action.tolist(),
                    "schedule": format_schedule(result.schedule),
                },
                fh,
                indent=2,
            )
        print(f"wrote evaluation to {out}")
    return 0


def _cmd_gradcheck(args) -> int:
    worst = gradcheck_sweep(args.nets, args.eps, args.seed)
    print(f"worst relative gradient error over {args.nets} nets: {worst:.3e}")
    if worst >= 1e-4:
        print("FAIL: exceeds 1e-4")
        return 1
    print("OK")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "gradcheck":
            return _cmd_gradcheck(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
