"""Simulated asynchronous dual pricing.

Each source node is an agent owning only its own price, capacity and plan
row; target nodes recompute the adversary's per-node actions from the rates
they have received.  A seeded scheduler drives activations and every exchange
goes through an append-only message log, so a run is fully determined by
(scenario, schedule, seed) and can be reconstructed from the log alone.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptLog, ValidationError
from .static_game import GameSpec, minimize_node_cost
from .transport import SolveReport

logger = logging.getLogger(__name__)

SCHEDULE_MODES = ("synchronous", "random-subset", "round-robin")


@dataclass(frozen=True)
class Schedule:
    """Activation policy for the simulated agents.

    ``activation`` is the per-agent probability per tick in random-subset
    mode; it must stay positive so every agent keeps activating.  Asynchronous
    modes halve the dual step by default (stale-gradient safety margin);
    override with ``step_scale``.
    """

    mode: str = "random-subset"
    activation: float = 0.5
    seed: int = 0
    max_ticks: int = 50_000
    refresh_every: int = 10
    step_scale: float | None = None

    def __post_init__(self):
        if self.mode not in SCHEDULE_MODES:
            raise ValidationError(f"unknown schedule mode {self.mode!r}")
        if not (0.0 < self.activation <= 1.0):
            raise ValidationError("activation probability must lie in (0, 1]")
        if self.max_ticks < 1 or self.refresh_every < 1:
            raise ValidationError("max_ticks and refresh_every must be >= 1")
        if self.step_scale is not None and self.step_scale <= 0:
            raise ValidationError("step_scale must be > 0")

    def effective_step_scale(self) -> float:
        if self.step_scale is not None:
            return self.step_scale
        return 1.0 if self.mode == "synchronous" else 0.5


@dataclass(frozen=True)
class Message:
    tick: int
    sender: str
    receiver: str
    kind: str
    payload: dict


@dataclass
class MessageLog:
    """Append-only, replayable record of every exchange in a run."""

    records: list[Message] = field(default_factory=list)

    def append(self, message: Message) -> None:
        self.records.append(message)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    def to_text(self) -> str:
        """Newline-delimited JSON records; floats round-trip exactly."""
        lines = [
            json.dumps(
                {
                    "tick": m.tick,
                    "sender": m.sender,
                    "receiver": m.receiver,
                    "kind": m.kind,
                    "payload": m.payload,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
            for m in self.records
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "MessageLog":
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLog(f"malformed log line {lineno}: {exc.msg}") from exc
            if not isinstance(obj, dict) or set(obj) != {
                "tick", "sender", "receiver", "kind", "payload",
            }:
                raise CorruptLog(f"log line {lineno} has unexpected fields")
            records.append(
                Message(obj["tick"], obj["sender"], obj["receiver"], obj["kind"], obj["payload"])
            )
        return cls(records)


@dataclass
class SourceAgent:
    """One source node; reads and writes nothing but its own row and price."""

    index: int
    source_id: object
    capacity: float
    lam: float
    gamma: float
    weights: np.ndarray  # effective weights on this agent's edges
    rates: np.ndarray  # this agent's plan row, same edge order as weights
    price: float = 0.0
    inbox: list[tuple[int, float]] = field(default_factory=list)

    def deliver(self, local_edge: int, weight: float) -> None:
        self.inbox.append((local_edge, weight))

    def tick(self) -> None:
        """Apply pending weight updates, refresh the row, ascend the price."""
        for local_edge, weight in self.inbox:
            self.weights[local_edge] = weight
        self.inbox.clear()
        self.rates = np.exp((self.weights - self.price) / self.lam - 1.0)
        excess = float(np.sum(self.rates)) - self.capacity
        self.price = max(0.0, self.price + self.gamma * excess)


def agent_tick(agent: SourceAgent, weights: np.ndarray | None = None) -> SourceAgent:
    """Run one local update, optionally delivering fresh weights first."""
    if weights is not None:
        for local_edge, weight in enumerate(np.asarray(weights, dtype=float)):
            agent.deliver(local_edge, float(weight))
    agent.tick()
    return agent


def _active_agents(schedule: Schedule, tick: int, rng: np.random.Generator, n: int) -> list[int]:
    if schedule.mode == "synchronous":
        return list(range(n))
    if schedule.mode == "round-robin":
        return [(tick - 1) % n]
    draws = rng.random(n)
    return [j for j in range(n) if draws[j] < schedule.activation]


def _node_delta(belief_row: np.ndarray, minor: float, major: float) -> float:
    return float(belief_row[0] * 1.0 * minor + belief_row[1] * 2.0 * major)


def _snapshot_row(tick, plan, prices, xi, residual, objective) -> dict:
    return {
        "tick": int(tick),
        "plan": tuple(float(v) for v in plan),
        "prices": tuple(float(v) for v in prices),
        "xi_minor": tuple(float(v) for v in xi[:, 0]),
        "xi_major": tuple(float(v) for v in xi[:, 1]),
        "residual": float(residual),
        "objective": float(objective),
    }


def run_distributed(spec: GameSpec, schedule: Schedule) -> tuple[SolveReport, MessageLog]:
    """Drive the agents to the centralized fixed point through messages only.

    Activated agents run their local primal/dual update and mail their new
    rates to the target nodes they touch; every ``refresh_every`` ticks each
    target recomputes its per-type best response from the rates it has seen
    and mails updated effective weights back.  Terminates once the global
    residual (stationarity, complementary slackness and action change) drops
    below ``spec.settings.tol``, returning the assembled plan, or comes back
    with ``converged=False`` at ``max_ticks``.
    """
    network = spec.network
    settings = spec.settings
    n, m = network.n_sources, network.n_targets
    gamma = settings.gamma * schedule.effective_step_scale()
    caps = spec.caps()
    beta2 = spec.cost_params.beta2

    log = MessageLog()
    log.append(
        Message(
            0, "hub", "hub", "topology",
            {
                "sources": list(network.source_ids),
                "targets": list(network.target_ids),
                "edges": [list(edge) for edge in network.edges],
            },
        )
    )

    xi = caps.copy()
    for q in range(m):
        log.append(
            Message(
                0, f"tgt:{network.target_ids[q]}", "hub", "strategy",
                {"target": network.target_ids[q], "minor": float(xi[q, 0]), "major": float(xi[q, 1])},
            )
        )

    agent_edges = [network.edges_from(j) for j in range(n)]
    agents = []
    for j in range(n):
        idx = agent_edges[j]
        deltas = np.array(
            [_node_delta(spec.belief[network.edge_target[e]], *xi[network.edge_target[e]]) for e in idx]
        )
        agents.append(
            SourceAgent(
                index=j,
                source_id=network.source_ids[j],
                capacity=float(network.capacities[j]),
                lam=settings.lam,
                gamma=gamma,
                weights=spec.weights[idx] + deltas,
                rates=np.zeros(len(idx)),
            )
        )

    rates_seen = np.zeros(network.n_edges)  # latest rate message per edge
    prices_seen = np.zeros(n)  # latest price message per agent
    rng = np.random.default_rng(schedule.seed)
    trace: list[dict] = []
    converged = False
    residual = float("inf")
    tick = 0
    for tick in range(1, schedule.max_ticks + 1):
        for j in _active_agents(schedule, tick, rng, n):
            agent = agents[j]
            agent.tick()
            sid = network.source_ids[j]
            log.append(
                Message(tick, f"src:{sid}", "hub", "price", {"source": sid, "price": agent.price})
            )
            prices_seen[j] = agent.price
            for local, e in enumerate(agent_edges[j]):
                tid = network.target_ids[network.edge_target[e]]
                log.append(
                    Message(
                        tick, f"src:{sid}", f"tgt:{tid}", "rate",
                        {"source": sid, "target": tid, "rate": float(agent.rates[local])},
                    )
                )
                rates_seen[e] = agent.rates[local]
        if tick % schedule.refresh_every != 0:
            continue

        xi_new = np.empty_like(xi)
        for q in range(m):
            idx = network.edges_into(q)
            seen = rates_seen[idx]
            scale = float(np.sum(spec.cost_params.punishment_coeff[idx] * seen ** spec.cost_params.beta1))
            flow = float(np.sum(seen))
            xi_new[q, 0] = minimize_node_cost(scale, 1 * flow, beta2, caps[q, 0])[0]
            xi_new[q, 1] = minimize_node_cost(scale, 2 * flow, beta2, caps[q, 1])[0]

        stationarity = 0.0
        slackness = 0.0
        for agent in agents:
            fixed_point = np.exp((agent.weights - agent.price) / agent.lam - 1.0)
            stationarity = max(stationarity, float(np.max(np.abs(agent.rates - fixed_point))))
            slack = agent.capacity - float(np.sum(agent.rates))
            slackness = max(slackness, abs(min(agent.price, slack)))
        residual = max(stationarity, slackness, float(np.max(np.abs(xi_new - xi))))

        for q in range(m):
            tid = network.target_ids[q]
            log.append(
                Message(
                    tick, f"tgt:{tid}", "hub", "strategy",
                    {"target": tid, "minor": float(xi_new[q, 0]), "major": float(xi_new[q, 1])},
                )
            )
            delta = _node_delta(spec.belief[q], xi_new[q, 0], xi_new[q, 1])
            for e in network.edges_into(q):
                j = int(network.edge_source[e])
                sid = network.source_ids[j]
                local = int(np.flatnonzero(agent_edges[j] == e)[0])
                weight = float(spec.weights[e] + delta)
                log.append(
                    Message(
                        tick, f"tgt:{tid}", f"src:{sid}", "weight",
                        {"source": sid, "target": tid, "weight": weight},
                    )
                )
                agents[j].deliver(local, weight)
        xi = xi_new

        objective = float(np.dot(spec.weights, rates_seen))
        log.append(
            Message(tick, "hub", "hub", "trace", {"residual": residual, "objective": objective})
        )
        trace.append(_snapshot_row(tick, rates_seen, prices_seen, xi, residual, objective))
        if residual <= settings.tol:
            converged = True
            break

    log.append(
        Message(
            tick, "hub", "hub", "final",
            {"ticks": tick, "residual": residual, "converged": converged},
        )
    )
    if not converged:
        logger.info("distributed run hit max_ticks=%d (residual %.3e)", schedule.max_ticks, residual)
    report = SolveReport(
        plan=rates_seen.copy(),
        prices=prices_seen.copy(),
        iterations=tick,
        residual=residual,
        converged=converged,
        trace=trace,
    )
    return report, log


def replay(log: MessageLog) -> SolveReport:
    """Rebuild the final report from the message log alone.

    The reconstruction is purely mechanical (latest rate per edge, latest
    price per source, logged trace scalars), so it matches the original
    report bit-exactly; anything missing or out of place raises
    :class:`CorruptLog`.
    """
    records = list(log)
    if not records or records[0].kind != "topology":
        raise CorruptLog("log does not start with a topology record")
    topo = records[0].payload
    try:
        sources = list(topo["sources"])
        targets = list(topo["targets"])
        edges = [tuple(edge) for edge in topo["edges"]]
    except (KeyError, TypeError) as exc:
        raise CorruptLog("topology record is malformed") from exc
    edge_pos = {edge: i for i, edge in enumerate(edges)}
    source_pos = {s: i for i, s in enumerate(sources)}
    target_pos = {t: i for i, t in enumerate(targets)}

    plan = np.zeros(len(edges))
    prices = np.zeros(len(sources))
    xi = np.zeros((len(targets), 2))
    trace: list[dict] = []
    for record in records[1:]:
        kind = record.kind
        payload = record.payload
        try:
            if kind == "rate":
                plan[edge_pos[(payload["source"], payload["target"])]] = payload["rate"]
            elif kind == "price":
                prices[source_pos[payload["source"]]] = payload["price"]
            elif kind == "strategy":
                q = target_pos[payload["target"]]
                xi[q, 0] = payload["minor"]
                xi[q, 1] = payload["major"]
            elif kind == "weight":
                pass  # weights influence agents, not the assembled state
            elif kind == "trace":
                trace.append(_snapshot_row(
                    record.tick, plan, prices, xi, payload["residual"], payload["objective"],
                ))
            elif kind == "final":
                if record is not records[-1]:
                    raise CorruptLog("records found after the final marker")
                return SolveReport(
                    plan=plan,
                    prices=prices,
                    iterations=int(payload["ticks"]),
                    residual=float(payload["residual"]),
                    converged=bool(payload["converged"]),
                    trace=trace,
                )
            else:
                raise CorruptLog(f"unknown record kind {kind!r}")
        except (KeyError, TypeError) as exc:
            raise CorruptLog(f"malformed {kind!r} record at tick {record.tick}") from exc
    raise CorruptLog("log is truncated: no final marker")
