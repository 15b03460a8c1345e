"""Scenario files, experiment orchestration and trace emission.

A scenario is a JSON key-value tree (network, weights, adversary, solver,
dynamic, distributed).  Parsing validates every model invariant up front,
fills documented defaults and produces a normalized form, so the echo of an
effective config re-parses to an equal config and runs are reproducible
byte-for-byte.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributed import SCHEDULE_MODES, Schedule, run_distributed
from .dynamic_game import StageOutcome, run_dynamic_game
from .errors import ParseError, StageNotConverged, ValidationError
from .network import (
    AdversaryCostParams,
    BipartiteNetwork,
    build_network,
    check_belief,
    uniform_belief,
)
from .static_game import GameSpec, solve_bayesian_equilibrium
from .transport import SolveReport, SolverSettings, planner_objective, solve_regularized_ot, unregularized_solve

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("solve-ot", "static-eq", "dynamic-sim", "distributed-sim")

_SOLVER_DEFAULTS = {"lambda": 3.0, "gamma": 0.05, "tol": 1e-8, "max_iter": 50_000}
_DYNAMIC_DEFAULTS = {"stages": 5, "tau": 0.5, "on_failure": "abort"}
_DISTRIBUTED_DEFAULTS = {
    "mode": "random-subset",
    "activation": 0.5,
    "seed": 0,
    "max_ticks": 50_000,
    "refresh_every": 10,
}


def _check_block(block: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(block, dict):
        raise ValidationError(f"'{where}' must be a key-value block")
    unknown = set(block) - allowed
    if unknown:
        raise ValidationError(f"unknown field {sorted(unknown)[0]!r} in '{where}'")
    missing = required - set(block)
    if missing:
        raise ValidationError(f"missing field {sorted(missing)[0]!r} in '{where}'")


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"'{where}' must be a number")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"'{where}' must be an integer")
    return value


def _as_array(value, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"'{where}' must be numeric") from exc
    return arr


def _edge_values(network: BipartiteNetwork, raw, where: str) -> list[float]:
    """Normalize a matrix or flat per-edge list onto canonical edge order."""
    arr = _as_array(raw, where)
    if arr.ndim == 2:
        flat = network.edge_vector(arr)
    elif arr.ndim == 1 and arr.shape == (network.n_edges,):
        flat = arr
    else:
        raise ValidationError(
            f"'{where}' must be a {network.n_sources}x{network.n_targets} matrix "
            f"or a flat list of {network.n_edges} per-edge values"
        )
    if not np.all(np.isfinite(flat)):
        raise ValidationError(f"'{where}' must contain finite numbers")
    return [float(v) for v in flat]


def _normalize(raw: dict) -> tuple[dict, BipartiteNetwork]:
    _check_block(
        raw,
        {"network", "weights", "adversary", "solver", "dynamic", "distributed"},
        {"network", "weights"},
        "scenario",
    )
    net_raw = raw["network"]
    _check_block(
        net_raw,
        {"sources", "targets", "edges", "capacities"},
        {"sources", "targets", "edges", "capacities"},
        "network",
    )
    for key in ("sources", "targets"):
        ids = net_raw[key]
        if not isinstance(ids, list) or not all(
            isinstance(i, (str, int)) and not isinstance(i, bool) for i in ids
        ):
            raise ValidationError(f"'network.{key}' must be a list of string or integer ids")
    if not isinstance(net_raw["edges"], list):
        raise ValidationError("'network.edges' must be a list of [source, target] pairs")
    edges = []
    for entry in net_raw["edges"]:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise ValidationError("every edge must be a [source, target] pair")
        edges.append(tuple(entry))
    capacities = _as_array(net_raw["capacities"], "network.capacities")
    network = build_network(net_raw["sources"], net_raw["targets"], edges, capacities)
    data: dict = {
        "network": {
            "sources": list(network.source_ids),
            "targets": list(network.target_ids),
            "edges": [list(edge) for edge in network.edges],
            "capacities": [float(c) for c in network.capacities],
        },
        "weights": _edge_values(network, raw["weights"], "weights"),
    }

    if "adversary" in raw:
        adv = raw["adversary"]
        _check_block(
            adv,
            {"lower_caps", "upper_caps", "punishment_coeff", "beta1", "beta2", "prior"},
            {"lower_caps", "upper_caps", "punishment_coeff", "beta1", "beta2"},
            "adversary",
        )
        lower = _as_array(adv["lower_caps"], "adversary.lower_caps")
        upper = _as_array(adv["upper_caps"], "adversary.upper_caps")
        if lower.shape != (network.n_targets,) or upper.shape != (network.n_targets,):
            raise ValidationError("caps must list one value per target node")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValidationError("caps must be finite")
        if np.any(lower <= 0) or np.any(lower > upper):
            raise ValidationError("caps must satisfy 0 < lower_caps <= upper_caps")
        params = AdversaryCostParams.for_network(
            network,
            _as_array(adv["punishment_coeff"], "adversary.punishment_coeff"),
            _as_float(adv["beta1"], "adversary.beta1"),
            _as_float(adv["beta2"], "adversary.beta2"),
        )
        prior_raw = adv.get("prior", "uniform")
        if isinstance(prior_raw, str):
            if prior_raw != "uniform":
                raise ValidationError("prior must be 'uniform' or an explicit table")
            prior = uniform_belief(network.n_targets)
        else:
            prior = check_belief(
                _as_array(prior_raw, "adversary.prior"), network.n_targets
            )
        data["adversary"] = {
            "lower_caps": [float(v) for v in lower],
            "upper_caps": [float(v) for v in upper],
            "punishment_coeff": [float(v) for v in params.punishment_coeff],
            "beta1": params.beta1,
            "beta2": params.beta2,
            "prior": [[float(a), float(b)] for a, b in prior],
        }

    solver = dict(_SOLVER_DEFAULTS)
    if "solver" in raw:
        _check_block(raw["solver"], set(_SOLVER_DEFAULTS), set(), "solver")
        solver.update(raw["solver"])
    data["solver"] = {
        "lambda": _as_float(solver["lambda"], "solver.lambda"),
        "gamma": _as_float(solver["gamma"], "solver.gamma"),
        "tol": _as_float(solver["tol"], "solver.tol"),
        "max_iter": _as_int(solver["max_iter"], "solver.max_iter"),
    }

    dynamic = dict(_DYNAMIC_DEFAULTS)
    if "dynamic" in raw:
        _check_block(raw["dynamic"], set(_DYNAMIC_DEFAULTS), set(), "dynamic")
        dynamic.update(raw["dynamic"])
    if dynamic["on_failure"] not in ("abort", "continue"):
        raise ValidationError("dynamic.on_failure must be 'abort' or 'continue'")
    data["dynamic"] = {
        "stages": _as_int(dynamic["stages"], "dynamic.stages"),
        "tau": _as_float(dynamic["tau"], "dynamic.tau"),
        "on_failure": dynamic["on_failure"],
    }

    distributed = dict(_DISTRIBUTED_DEFAULTS)
    if "distributed" in raw:
        _check_block(raw["distributed"], set(_DISTRIBUTED_DEFAULTS), set(), "distributed")
        distributed.update(raw["distributed"])
    if distributed["mode"] not in SCHEDULE_MODES:
        raise ValidationError(
            f"distributed.mode must be one of {', '.join(SCHEDULE_MODES)}"
        )
    data["distributed"] = {
        "mode": distributed["mode"],
        "activation": _as_float(distributed["activation"], "distributed.activation"),
        "seed": _as_int(distributed["seed"], "distributed.seed"),
        "max_ticks": _as_int(distributed["max_ticks"], "distributed.max_ticks"),
        "refresh_every": _as_int(distributed["refresh_every"], "distributed.refresh_every"),
    }
    return data, network


@dataclass(eq=False)
class ScenarioConfig:
    """Validated scenario with defaults materialized.

    ``data`` is the normalized key-value tree; two configs are equal exactly
    when their normalized trees are, which is what makes the echo round-trip
    meaningful.
    """

    data: dict
    network: BipartiteNetwork

    def __eq__(self, other) -> bool:
        return isinstance(other, ScenarioConfig) and self.data == other.data

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.data["weights"], dtype=float)

    def settings(self, record_trace: bool = False) -> SolverSettings:
        solver = self.data["solver"]
        return SolverSettings(
            lam=solver["lambda"],
            gamma=solver["gamma"],
            tol=solver["tol"],
            max_iter=solver["max_iter"],
            record_trace=record_trace,
        )

    def game_spec(self) -> GameSpec:
        if "adversary" not in self.data:
            raise ValidationError("this run needs an 'adversary' block in the scenario")
        adv = self.data["adversary"]
        params = AdversaryCostParams(
            punishment_coeff=np.asarray(adv["punishment_coeff"], dtype=float),
            beta1=adv["beta1"],
            beta2=adv["beta2"],
        )
        return GameSpec(
            network=self.network,
            weights=self.weights,
            lower_caps=np.asarray(adv["lower_caps"], dtype=float),
            upper_caps=np.asarray(adv["upper_caps"], dtype=float),
            cost_params=params,
            belief=np.asarray(adv["prior"], dtype=float),
            settings=self.settings(),
        )

    def schedule(self) -> Schedule:
        block = self.data["distributed"]
        return Schedule(
            mode=block["mode"],
            activation=block["activation"],
            seed=block["seed"],
            max_ticks=block["max_ticks"],
            refresh_every=block["refresh_every"],
        )

    def dynamic_params(self) -> tuple[int, float, str]:
        block = self.data["dynamic"]
        return block["stages"], block["tau"], block["on_failure"]

    def echo_text(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def with_overrides(
        self,
        lam: float | None = None,
        gamma: float | None = None,
        tol: float | None = None,
        stages: int | None = None,
        tau: float | None = None,
        mode: str | None = None,
        seed: int | None = None,
    ) -> "ScenarioConfig":
        """New config with command-line overrides applied and revalidated."""
        raw = copy.deepcopy(self.data)
        if lam is not None:
            raw["solver"]["lambda"] = float(lam)
        if gamma is not None:
            raw["solver"]["gamma"] = float(gamma)
        if tol is not None:
            raw["solver"]["tol"] = float(tol)
        if stages is not None:
            raw["dynamic"]["stages"] = int(stages)
        if tau is not None:
            raw["dynamic"]["tau"] = float(tau)
        if mode is not None:
            raw["distributed"]["mode"] = mode
        if seed is not None:
            raw["distributed"]["seed"] = int(seed)
        data, network = _normalize(raw)
        return ScenarioConfig(data=data, network=network)


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario file's contents.

    Raises :class:`ParseError` (position-annotated) for malformed JSON and
    :class:`ValidationError` naming the violated invariant otherwise.
    """
    if not text.strip():
        raise ParseError("scenario file is empty")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict):
        raise ParseError("scenario must be a key-value tree")
    data, network = _normalize(raw)
    return ScenarioConfig(data=data, network=network)


# ---------------------------------------------------------------------------
# Trace records and emission


@dataclass(frozen=True)
class TraceRecord:
    """One row of a run's trace; the value keys form the column schema."""

    kind: str
    step: int
    values: dict


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".12g")


def emit_trace(records: list[TraceRecord], fmt: str, path: Path) -> Path:
    """Write homogeneous records as CSV or JSON-lines with 12-digit floats.

    Every record must share the run kind and column schema; identical inputs
    produce byte-identical files.
    """
    if fmt not in ("csv", "json"):
        raise ValidationError(f"unknown trace format {fmt!r}")
    if records:
        kind = records[0].kind
        keys = list(records[0].values)
        for record in records:
            if record.kind != kind or list(record.values) != keys:
                raise ValidationError("trace records must share one column schema")
    else:
        keys = []
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(["kind", "step", *keys])]
        for record in records:
            lines.append(
                ",".join([record.kind, str(record.step), *(_fmt(record.values[k]) for k in keys)])
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        lines = []
        for record in records:
            fields = [f'"kind": {json.dumps(record.kind)}', f'"step": {record.step}']
            fields += [f"{json.dumps(k)}: {_fmt(record.values[k])}" for k in keys]
            lines.append("{" + ", ".join(fields) + "}")
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def _edge_columns(network: BipartiteNetwork, plan) -> dict:
    return {
        f"x_{sid}_{tid}": float(v)
        for (sid, tid), v in zip(network.edges, plan)
    }


def _node_columns(prefix: str, ids, values) -> dict:
    return {f"{prefix}_{nid}": float(v) for nid, v in zip(ids, values)}


def ot_trace_records(network: BipartiteNetwork, report: SolveReport) -> list[TraceRecord]:
    records = []
    for row in report.trace:
        values = {}
        values.update(_edge_columns(network, row["plan"]))
        values.update(_node_columns("p", network.source_ids, row["prices"]))
        values["residual"] = row["residual"]
        values["objective"] = row["objective"]
        records.append(TraceRecord("solve-ot", row["iteration"], values))
    return records


def static_trace_records(network: BipartiteNetwork, trace: list[dict]) -> list[TraceRecord]:
    records = []
    for row in trace:
        values = {}
        values.update(_edge_columns(network, row["plan"]))
        values.update(_node_columns("xi1", network.target_ids, row["xi_minor"]))
        values.update(_node_columns("xi2", network.target_ids, row["xi_major"]))
        values["dispatcher_utility"] = row["dispatcher_utility"]
        values["adversary_cost_minor"] = row["adversary_cost_minor"]
        values["adversary_cost_major"] = row["adversary_cost_major"]
        records.append(TraceRecord("static-eq", row["round"], values))
    return records


def dynamic_trace_records(
    network: BipartiteNetwork, outcomes: list[StageOutcome]
) -> list[TraceRecord]:
    records = []
    for outcome in outcomes:
        values = {}
        values.update(_edge_columns(network, outcome.profile.plan))
        values.update(_node_columns("xi1", network.target_ids, outcome.profile.strategy[:, 0]))
        values.update(_node_columns("xi2", network.target_ids, outcome.profile.strategy[:, 1]))
        values.update(_node_columns("mu2", network.target_ids, outcome.state.belief[:, 1]))
        values["dispatcher_utility"] = outcome.dispatcher_utility
        values["adversary_cost_minor"] = outcome.adversary_cost_minor
        values["adversary_cost_major"] = outcome.adversary_cost_major
        records.append(TraceRecord("dynamic-sim", outcome.state.stage, values))
    return records


def distributed_trace_records(
    network: BipartiteNetwork, report: SolveReport
) -> list[TraceRecord]:
    records = []
    for row in report.trace:
        values = {}
        values.update(_edge_columns(network, row["plan"]))
        values.update(_node_columns("p", network.source_ids, row["prices"]))
        values.update(_node_columns("xi1", network.target_ids, row["xi_minor"]))
        values.update(_node_columns("xi2", network.target_ids, row["xi_major"]))
        values["residual"] = row["residual"]
        values["objective"] = row["objective"]
        records.append(TraceRecord("distributed-sim", row["tick"], values))
    return records


# ---------------------------------------------------------------------------
# Orchestration


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _network_header(network: BipartiteNetwork) -> dict:
    return {
        "sources": list(network.source_ids),
        "targets": list(network.target_ids),
        "edges": [list(edge) for edge in network.edges],
    }


def _run_solve_ot(config: ScenarioConfig, out_dir: Path, emit: str) -> int:
    network = config.network
    weights = config.weights
    settings = config.settings(record_trace=True)
    if settings.lam == 0:
        plan = unregularized_solve(network, weights)
        objective = planner_objective(plan, weights, 0.0)
        report = SolveReport(
            plan=plan,
            prices=np.zeros(network.n_sources),
            iterations=0,
            residual=0.0,
            converged=True,
            trace=[{
                "iteration": 0,
                "plan": tuple(float(v) for v in plan),
                "prices": tuple(0.0 for _ in range(network.n_sources)),
                "residual": 0.0,
                "objective": objective,
            }],
        )
    else:
        report = solve_regularized_ot(network, weights, settings)
    emit_trace(ot_trace_records(network, report), emit, _trace_path(out_dir, emit))
    _write_json(
        out_dir / "report.json",
        {
            "kind": "solve-ot",
            "converged": report.converged,
            "iterations": report.iterations,
            "residual": report.residual,
            "objective": planner_objective(report.plan, weights, settings.lam),
            "plan": [float(v) for v in report.plan],
            "prices": [float(v) for v in report.prices],
            **_network_header(network),
        },
    )
    return 0 if report.converged else 2


def _run_static_eq(config: ScenarioConfig, out_dir: Path, emit: str) -> int:
    spec = config.game_spec()
    profile = solve_bayesian_equilibrium(spec, record_trace=True)
    emit_trace(
        static_trace_records(spec.network, profile.trace), emit, _trace_path(out_dir, emit)
    )
    _write_json(
        out_dir / "report.json",
        {
            "kind": "static-eq",
            "converged": profile.converged,
            "rounds": profile.iterations,
            "deviation_gap": profile.deviation_gap,
            "plan": [float(v) for v in profile.plan],
            "xi_minor": [float(v) for v in profile.strategy[:, 0]],
            "xi_major": [float(v) for v in profile.strategy[:, 1]],
            **_network_header(spec.network),
        },
    )
    return 0 if profile.converged else 2


def _run_dynamic_sim(config: ScenarioConfig, out_dir: Path, emit: str) -> int:
    spec = config.game_spec()
    stages, tau, on_failure = config.dynamic_params()
    failed_stage = None
    try:
        outcomes = run_dynamic_game(
            spec, stages, tau, abort_on_failure=(on_failure == "abort")
        )
    except StageNotConverged as exc:
        outcomes = exc.outcomes
        failed_stage = exc.stage
    all_converged = failed_stage is None and all(o.profile.converged for o in outcomes)
    emit_trace(
        dynamic_trace_records(spec.network, outcomes), emit, _trace_path(out_dir, emit)
    )
    _write_json(
        out_dir / "report.json",
        {
            "kind": "dynamic-sim",
            "converged": all_converged,
            "failed_stage": failed_stage,
            "stages": [
                {
                    "stage": o.state.stage,
                    "converged": o.profile.converged,
                    "rounds": o.profile.iterations,
                    "deviation_gap": o.profile.deviation_gap,
                    "dispatcher_utility": o.dispatcher_utility,
                    "adversary_cost_minor": o.adversary_cost_minor,
                    "adversary_cost_major": o.adversary_cost_major,
                    "plan": [float(v) for v in o.profile.plan],
                    "xi_minor": [float(v) for v in o.profile.strategy[:, 0]],
                    "xi_major": [float(v) for v in o.profile.strategy[:, 1]],
                    "belief_major": [float(v) for v in o.belief_after[:, 1]],
                }
                for o in outcomes
            ],
            **_network_header(spec.network),
        },
    )
    return 0 if all_converged else 2


def _run_distributed_sim(config: ScenarioConfig, out_dir: Path, emit: str) -> int:
    spec = config.game_spec()
    schedule = config.schedule()
    report, log = run_distributed(spec, schedule)
    (out_dir / "messages.log").write_text(log.to_text(), encoding="utf-8")
    emit_trace(
        distributed_trace_records(spec.network, report), emit, _trace_path(out_dir, emit)
    )
    _write_json(
        out_dir / "report.json",
        {
            "kind": "distributed-sim",
            "converged": report.converged,
            "ticks": report.iterations,
            "residual": report.residual,
            "messages": len(log),
            "plan": [float(v) for v in report.plan],
            "prices": [float(v) for v in report.prices],
            **_network_header(spec.network),
        },
    )
    return 0 if report.converged else 2


def _trace_path(out_dir: Path, emit: str) -> Path:
    return out_dir / ("trace.csv" if emit == "csv" else "trace.jsonl")


_RUNNERS = {
    "solve-ot": _run_solve_ot,
    "static-eq": _run_static_eq,
    "dynamic-sim": _run_dynamic_sim,
    "distributed-sim": _run_distributed_sim,
}


def run_command(subcommand: str, config: ScenarioConfig, out_dir, emit: str = "csv") -> int:
    """Execute one experiment and write trace, report and config echo.

    Returns the process exit status: 0 on convergence, 2 when the run ended
    without converging.  Input errors raise and are mapped by the CLI.
    """
    if subcommand not in _RUNNERS:
        raise ValidationError(f"unknown subcommand {subcommand!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_echo.json").write_text(config.echo_text(), encoding="utf-8")
    status = _RUNNERS[subcommand](config, out_dir, emit)
    logger.info("%s finished with status %d (outputs in %s)", subcommand, status, out_dir)
    return status
