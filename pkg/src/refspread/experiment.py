"""Batch experiments: config files, run orchestration, CSV output and summary.

Config files are INI (``configparser``) with optional sections::

    [experiment]   models = rigid, flexible ; strategies = ... ; out = runs ; plot = no ; jobs = 1
    [model]        any ModelParams field, tuples as comma lists
    [scenario]     any Scenario field
    [simulation]   any SimConfig field except strategy

Unknown keys are errors.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .control import ALL_STRATEGIES, Strategy
from .params import ModelParams
from .reference import Scenario, scenario_reference
from .sim_flex import run_flex
from .sim_rigid import SimConfig, run_rigid
from .simlog import SimLog

MODELS = ("rigid", "flexible")


@dataclass(frozen=True)
class ExperimentSpec:
    models: tuple[str, ...] = ("rigid",)
    strategies: tuple[Strategy, ...] = ALL_STRATEGIES
    params: ModelParams = field(default_factory=ModelParams)
    scenario: Scenario = field(default_factory=Scenario)
    sim: SimConfig = field(default_factory=SimConfig)
    out: Path = Path("runs")
    plot: bool = False
    jobs: int = 1

    def __post_init__(self):
        if not self.strategies:
            raise ValueError("need at least one strategy")
        bad = [m for m in self.models if m not in MODELS]
        if bad or not self.models:
            raise ValueError(f"models must be a nonempty subset of {MODELS}, got {self.models}")
        object.__setattr__(self, "strategies", tuple(Strategy.parse(s) for s in self.strategies))
        object.__setattr__(self, "out", Path(self.out))
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def replace(self, **kw) -> "ExperimentSpec":
        return dataclasses.replace(self, **kw)


# -- config parsing ---------------------------------------------------------------

def _coerce(template, text: str, key: str):
    text = text.strip()
    if isinstance(template, bool):
        low = text.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(template, tuple):
        parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
        if len(parts) != len(template):
            raise ValueError(f"{key}: expected {len(template)} values, got {len(parts)}")
        return tuple(float(p) for p in parts)
    if isinstance(template, int):
        return int(text)
    if isinstance(template, float) or template is None:
        return float(text)
    return text


def _overrides(cls, instance, section) -> dict:
    names = {f.name: getattr(instance, f.name) for f in dataclasses.fields(cls)}
    out = {}
    for key, text in section.items():
        if key not in names or key == "strategy":
            raise ValueError(f"unknown key {key!r} in [{section.name}]")
        out[key] = _coerce(names[key], text, key)
    return out


def load_config(path, base: Optional[ExperimentSpec] = None) -> ExperimentSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    with open(path) as fh:
        cp.read_file(fh)
    spec = base or ExperimentSpec()
    known = {"experiment", "model", "scenario", "simulation"}
    extra = set(cp.sections()) - known
    if extra:
        raise ValueError(f"unknown config sections: {sorted(extra)}")
    kw = {}
    if cp.has_section("model"):
        kw["params"] = spec.params.replace(**_overrides(ModelParams, spec.params, cp["model"]))
    if cp.has_section("scenario"):
        kw["scenario"] = dataclasses.replace(spec.scenario, **_overrides(Scenario, spec.scenario, cp["scenario"]))
    if cp.has_section("simulation"):
        kw["sim"] = spec.sim.replace(**_overrides(SimConfig, spec.sim, cp["simulation"]))
    if cp.has_section("experiment"):
        sec = cp["experiment"]
        for key, text in sec.items():
            if key == "models":
                kw["models"] = tuple(m.strip() for m in text.split(",") if m.strip())
            elif key == "strategies":
                kw["strategies"] = tuple(s.strip() for s in text.split(",") if s.strip())
            elif key == "out":
                kw["out"] = Path(text.strip())
            elif key == "plot":
                kw["plot"] = _coerce(True, text, key)
            elif key == "jobs":
                kw["jobs"] = int(text)
            else:
                raise ValueError(f"unknown key {key!r} in [experiment]")
    return spec.replace(**kw)


# -- running ----------------------------------------------------------------------

@dataclass
class RunResult:
    model: str
    strategy: Strategy
    csv_path: Path
    events_path: Path
    summary: dict
    seconds: float
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_name(model: str, strategy: Strategy) -> str:
    return f"{model}_{Strategy.parse(strategy).value}"


def simulate(model: str, params: ModelParams, scenario: Scenario, sim: SimConfig) -> SimLog:
    refs = scenario_reference(params, scenario)
    runner = run_rigid if model == "rigid" else run_flex
    return runner(params, sim, refs, raise_errors=False)


def _run_one(args) -> RunResult:
    model, strategy, params, scenario, sim, out = args
    name = run_name(model, strategy)
    csv_path, ev_path = out / f"{name}.csv", out / f"{name}_events.csv"
    t0 = time.perf_counter()
    try:
        log = simulate(model, params, scenario, sim.replace(strategy=strategy))
    except Exception as exc:  # setup failures (reference, config) leave no log
        return RunResult(model, strategy, csv_path, ev_path, {}, time.perf_counter() - t0,
                         f"{type(exc).__name__}: {exc}")
    elapsed = time.perf_counter() - t0
    with open(csv_path, "w") as fh:
        log.write_csv(fh)
    with open(ev_path, "w") as fh:
        log.write_events(fh)
    summary = metrics.summary(log) if len(log.rows) else {}
    return RunResult(model, strategy, csv_path, ev_path, summary, elapsed, log.error)


def run_experiment(spec: ExperimentSpec) -> list[RunResult]:
    """Run every (model, strategy) pair, write CSVs, then ``summary.txt``."""
    spec.out.mkdir(parents=True, exist_ok=True)
    jobs = [(m, s, spec.params, spec.scenario, spec.sim, spec.out) for m in spec.models for s in spec.strategies]
    if spec.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(spec.jobs, len(jobs), os.cpu_count() or 1)) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    write_summary(spec, results, spec.out / "summary.txt")
    return results


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return "nan" if not np.isfinite(v) else f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]" if v else "[]"
    return str(v)


def write_summary(spec: ExperimentSpec, results: Sequence[RunResult], path) -> None:
    lines = [
        "# experiment summary",
        f"plank_offset = {spec.sim.initial_plank_offset():.6g} rad, seed = {spec.sim.seed}, "
        f"t_imp = {spec.scenario.t_imp:g} s, approach_speed = {spec.scenario.approach_speed:g} m/s",
        "",
    ]
    for r in results:
        s = r.summary
        lines.append(f"[{run_name(r.model, r.strategy)}]")
        if not r.ok:
            lines.append(f"error = {r.error}")
            lines.append("")
            continue
        lines += [
            f"impact_times = {_fmt(s['impact_times'])}",
            f"contact_closures = {_fmt(s['contact_closures'])}",
            f"intermediate_duration = {_fmt(s['intermediate_duration'])}",
            f"inter_impact_max_torque = {_fmt(s['inter_impact_max_torque'])}",
            f"post_velocity_rms = {_fmt(s['post_velocity_rms'])}",
            f"impact_energy_change = {_fmt(s['energy_change'])}",
            f"wall_time_s = {r.seconds:.1f}",
            "",
        ]
    Path(path).write_text("\n".join(lines))
