"""Bipartite network model: validation, canonical edge ordering, incidence.

Every solver in the package works on flat per-edge vectors.  The canonical
edge order is row-major by (source index, target index) and is fixed here,
at construction time, so plans, weights, incidence columns and trace columns
all line up without further bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Hashable, Iterator, Sequence

import numpy as np

from .errors import (
    DanglingEdge,
    DimensionMismatch,
    DuplicateEdge,
    IsolatedNode,
    NonpositiveCapacity,
    PerturbationBelowFloor,
    ValidationError,
)

#: Positivity floor for adversary perturbations.  The adversary cost carries
#: a xi**(-beta2) term and the belief update divides by belief-weighted
#: actions, so actions must stay strictly positive.
PERTURBATION_FLOOR = 1e-6

#: Absolute tolerance for belief normalization checks.
BELIEF_ATOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BipartiteNetwork:
    """Validated bipartite network with a canonical edge ordering.

    Instances are immutable value objects (arrays are read-only) and safe to
    share across concurrent solver runs.  Construct via :func:`build_network`.
    """

    source_ids: tuple[Hashable, ...]
    target_ids: tuple[Hashable, ...]
    edges: tuple[tuple[Hashable, Hashable], ...]
    capacities: np.ndarray  # (n_sources,)
    edge_source: np.ndarray  # (n_edges,) source index of each edge
    edge_target: np.ndarray  # (n_edges,) target index of each edge

    @property
    def n_sources(self) -> int:
        return len(self.source_ids)

    @property
    def n_targets(self) -> int:
        return len(self.target_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edges_from(self, source_index: int) -> np.ndarray:
        """Edge indices leaving the given source, in canonical order."""
        return np.flatnonzero(self.edge_source == source_index)

    def edges_into(self, target_index: int) -> np.ndarray:
        """Edge indices entering the given target, in canonical order."""
        return np.flatnonzero(self.edge_target == target_index)

    def row_sums(self, plan: np.ndarray) -> np.ndarray:
        """Per-source totals of a per-edge vector (equals incidence @ plan)."""
        return np.bincount(self.edge_source, weights=plan, minlength=self.n_sources)

    def target_sums(self, plan: np.ndarray) -> np.ndarray:
        """Per-target totals of a per-edge vector."""
        return np.bincount(self.edge_target, weights=plan, minlength=self.n_targets)

    def plan_matrix(self, plan: np.ndarray) -> np.ndarray:
        """Dense (n_sources, n_targets) view of a per-edge vector."""
        out = np.zeros((self.n_sources, self.n_targets))
        out[self.edge_source, self.edge_target] = plan
        return out

    def edge_vector(self, matrix: np.ndarray) -> np.ndarray:
        """Per-edge vector extracted from a dense (n_sources, n_targets) array."""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (self.n_sources, self.n_targets):
            raise DimensionMismatch(
                f"expected a {self.n_sources}x{self.n_targets} matrix, got {matrix.shape}"
            )
        return matrix[self.edge_source, self.edge_target]


def build_network(
    sources: Sequence[Hashable],
    targets: Sequence[Hashable],
    edges: Sequence[tuple[Hashable, Hashable]],
    capacities: Sequence[float],
) -> BipartiteNetwork:
    """Validate the raw description and return a canonical network.

    Edges may arrive in any order; the result is always sorted row-major by
    (source index, target index), so identical inputs yield identical
    networks regardless of input ordering.
    """
    source_ids = tuple(sources)
    target_ids = tuple(targets)
    if not source_ids or not target_ids:
        raise ValidationError("source and target node sets must be nonempty")
    if len(set(source_ids)) != len(source_ids):
        raise ValidationError("duplicate source ids")
    if len(set(target_ids)) != len(target_ids):
        raise ValidationError("duplicate target ids")
    if not edges:
        raise IsolatedNode("network has no edges")

    cap = np.asarray(list(capacities), dtype=float)
    if cap.shape != (len(source_ids),):
        raise ValidationError(
            f"capacities has {cap.size} entries for {len(source_ids)} sources"
        )
    if not np.all(np.isfinite(cap)) or np.any(cap <= 0):
        raise NonpositiveCapacity("capacities must be finite and strictly positive")

    source_pos = {s: i for i, s in enumerate(source_ids)}
    target_pos = {t: i for i, t in enumerate(target_ids)}
    indexed: list[tuple[int, int]] = []
    for edge in edges:
        j, q = edge
        if j not in source_pos or q not in target_pos:
            raise DanglingEdge(f"edge {tuple(edge)!r} references an unknown node id")
        indexed.append((source_pos[j], target_pos[q]))
    if len(set(indexed)) != len(indexed):
        raise DuplicateEdge("edge list contains duplicates")

    indexed.sort()
    used_sources = {j for j, _ in indexed}
    used_targets = {q for _, q in indexed}
    for j in range(len(source_ids)):
        if j not in used_sources:
            raise IsolatedNode(f"source {source_ids[j]!r} has no edges")
    for q in range(len(target_ids)):
        if q not in used_targets:
            raise IsolatedNode(f"target {target_ids[q]!r} has no edges")

    edge_source = _frozen([j for j, _ in indexed], dtype=np.intp)
    edge_target = _frozen([q for _, q in indexed], dtype=np.intp)
    canonical = tuple((source_ids[j], target_ids[q]) for j, q in indexed)
    return BipartiteNetwork(
        source_ids=source_ids,
        target_ids=target_ids,
        edges=canonical,
        capacities=_frozen(cap),
        edge_source=edge_source,
        edge_target=edge_target,
    )


def incidence(network: BipartiteNetwork) -> np.ndarray:
    """0-1 source-by-edge matrix: entry (j, e) is 1 iff edge e leaves source j.

    Each column holds exactly one 1; row j holds one 1 per edge leaving j.
    """
    mat = np.zeros((network.n_sources, network.n_edges))
    mat[network.edge_source, np.arange(network.n_edges)] = 1.0
    mat.setflags(write=False)
    return mat


def check_plan(network: BipartiteNetwork, plan: np.ndarray) -> np.ndarray:
    """Coerce to a per-edge float vector, raising on wrong dimensions."""
    arr = np.asarray(plan, dtype=float)
    if arr.shape != (network.n_edges,):
        raise DimensionMismatch(
            f"plan has shape {arr.shape}, expected ({network.n_edges},)"
        )
    return arr


def feasibility_check(
    plan: np.ndarray, network: BipartiteNetwork, tol: float = 1e-9
) -> tuple[bool, np.ndarray]:
    """Whether a plan respects nonnegativity and capacities, plus per-source slack.

    Feasible iff every rate is >= -tol and every row sum is <= capacity + tol.
    The returned slack is capacity minus the corresponding row sum.
    """
    arr = check_plan(network, plan)
    slack = network.capacities - network.row_sums(arr)
    feasible = bool(np.all(arr >= -tol) and np.all(slack >= -tol))
    return feasible, slack


def uniform_belief(n_targets: int) -> np.ndarray:
    """Per-target (minor, major) probabilities, all set to one half."""
    return np.full((n_targets, 2), 0.5)


def check_belief(belief: np.ndarray, n_targets: int) -> np.ndarray:
    """Validate a per-target belief table: rows nonnegative, summing to one."""
    arr = np.asarray(belief, dtype=float)
    if arr.shape != (n_targets, 2):
        raise DimensionMismatch(
            f"belief has shape {arr.shape}, expected ({n_targets}, 2)"
        )
    if np.any(arr < 0):
        raise ValidationError("belief entries must be nonnegative")
    if np.any(np.abs(arr.sum(axis=1) - 1.0) > BELIEF_ATOL):
        raise ValidationError("belief rows must sum to 1")
    return arr


def check_strategy(
    xi: np.ndarray, lower_caps: np.ndarray, upper_caps: np.ndarray
) -> np.ndarray:
    """Validate a per-target, per-type action table against floor and caps.

    Column 0 holds the minor type's action (capped by ``lower_caps``),
    column 1 the major type's (capped by ``upper_caps``).
    """
    arr = np.asarray(xi, dtype=float)
    n = len(lower_caps)
    if arr.shape != (n, 2):
        raise DimensionMismatch(f"strategy has shape {arr.shape}, expected ({n}, 2)")
    if np.any(arr < PERTURBATION_FLOOR):
        raise PerturbationBelowFloor(
            f"actions must stay >= {PERTURBATION_FLOOR} to keep costs finite"
        )
    caps = np.stack([np.asarray(lower_caps, float), np.asarray(upper_caps, float)], axis=1)
    if np.any(arr > caps * (1 + 1e-12)):
        raise ValidationError("an action exceeds its per-type cap")
    return arr


@dataclass(frozen=True)
class TypeSpace:
    """Binary adversary types per target node: 1 = minor, 2 = major offender.

    The joint type space is the Cartesian product over targets, so it has
    2**n_targets elements; enumeration is mostly useful for brute-force
    expectation checks on small networks.
    """

    n_targets: int

    def __len__(self) -> int:
        return 2 ** self.n_targets

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return product((1, 2), repeat=self.n_targets)

    def joint_probability(self, theta: Sequence[int], belief: np.ndarray) -> float:
        """Probability of a joint type under a per-target belief table."""
        belief = check_belief(belief, self.n_targets)
        probs = [belief[q, t - 1] for q, t in enumerate(theta)]
        return float(np.prod(probs))


@dataclass(frozen=True)
class AdversaryCostParams:
    """Per-edge punishment coefficients and the two cost exponents.

    The adversary's expected penalty on an edge is
    ``coeff * xi**(-beta2) * x**beta1``; both exponents live in [0, 1].
    """

    punishment_coeff: np.ndarray  # (n_edges,)
    beta1: float
    beta2: float

    def __post_init__(self):
        coeff = _frozen(self.punishment_coeff)
        if coeff.ndim != 1:
            raise ValidationError("punishment_coeff must be a flat per-edge vector")
        if not np.all(np.isfinite(coeff)) or np.any(coeff <= 0):
            raise ValidationError("punishment coefficients must be positive and finite")
        if not (0.0 <= self.beta1 <= 1.0 and 0.0 <= self.beta2 <= 1.0):
            raise ValidationError("beta exponents must lie in [0, 1]")
        object.__setattr__(self, "punishment_coeff", coeff)

    @classmethod
    def for_network(
        cls, network: BipartiteNetwork, coeff, beta1: float, beta2: float
    ) -> "AdversaryCostParams":
        """Broadcast a scalar, per-target vector or dense matrix to per-edge form.

        A 1-D vector of length n_targets is read per-target; use the
        (n_sources, n_targets) matrix form for genuinely per-edge control.
        """
        arr = np.asarray(coeff, dtype=float)
        if arr.ndim == 0:
            per_edge = np.full(network.n_edges, float(arr))
        elif arr.ndim == 1 and arr.shape == (network.n_targets,):
            per_edge = arr[network.edge_target]
        elif arr.ndim == 1 and arr.shape == (network.n_edges,):
            per_edge = arr
        elif arr.ndim == 2:
            per_edge = network.edge_vector(arr)
        else:
            raise ValidationError(
                f"cannot map punishment coefficients of shape {arr.shape} onto edges"
            )
        return cls(punishment_coeff=per_edge, beta1=float(beta1), beta2=float(beta2))
