"""Static game between the dispatcher and a typed adversary.

The dispatcher maximizes expected utility under a per-target belief over the
adversary's binary type; each adversary type minimizes its own cost, which is
separable across target nodes and admits a closed-form per-node minimizer.
The equilibrium is computed by alternating the two best responses and then
certifying the fixed point with a coordinate-wise deviation search.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import PerturbationBelowFloor, ValidationError
from .network import (
    PERTURBATION_FLOOR,
    AdversaryCostParams,
    BipartiteNetwork,
    check_belief,
    check_plan,
    check_strategy,
)
from .transport import (
    SolveReport,
    SolverSettings,
    planner_objective,
    solve_regularized_ot,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GameSpec:
    """Everything needed to pose the static game.

    ``belief`` rows are per-target (minor, major) probabilities; ``lower_caps``
    bounds the minor type's action, ``upper_caps`` the major type's.
    """

    network: BipartiteNetwork
    weights: np.ndarray  # (n_edges,)
    lower_caps: np.ndarray  # (n_targets,)
    upper_caps: np.ndarray  # (n_targets,)
    cost_params: AdversaryCostParams
    belief: np.ndarray  # (n_targets, 2)
    settings: SolverSettings = SolverSettings()

    def __post_init__(self):
        n_targets = self.network.n_targets
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (self.network.n_edges,):
            raise ValidationError("weights must be a per-edge vector")
        if not np.all(np.isfinite(weights)):
            raise ValidationError("weights must be finite")
        lower = np.asarray(self.lower_caps, dtype=float)
        upper = np.asarray(self.upper_caps, dtype=float)
        if lower.shape != (n_targets,) or upper.shape != (n_targets,):
            raise ValidationError("caps must cover every target node")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValidationError("caps must be finite")
        if np.any(lower <= 0) or np.any(upper <= 0):
            raise ValidationError("caps must be strictly positive")
        if np.any(lower > upper):
            raise ValidationError("lower caps must not exceed upper caps")
        if self.cost_params.punishment_coeff.shape != (self.network.n_edges,):
            raise ValidationError("cost params do not match the network's edges")
        if self.settings.lam <= 0:
            raise ValidationError("the game needs a positive smoothing weight lam")
        belief = check_belief(self.belief, n_targets)
        for name, value in (("weights", weights), ("lower_caps", lower),
                            ("upper_caps", upper), ("belief", belief)):
            value = value.copy()
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def caps(self) -> np.ndarray:
        """Per-target (minor, major) action caps as an (n_targets, 2) array."""
        return np.stack([self.lower_caps, self.upper_caps], axis=1)


@dataclass
class EquilibriumProfile:
    """Fixed point of the alternating best responses, with its certificate.

    ``deviation_gap`` is the largest unilateral improvement found by the grid
    search; values at or below the certification tolerance mean neither
    player located a profitable deviation.
    """

    plan: np.ndarray
    strategy: np.ndarray  # (n_targets, 2): minor and major actions
    iterations: int
    converged: bool
    deviation_gap: float
    trace: list[dict] = field(default_factory=list)


def effective_weights(
    network: BipartiteNetwork,
    weights: np.ndarray,
    xi: np.ndarray,
    belief: np.ndarray,
) -> np.ndarray:
    """Belief-averaged perception per edge: ``m + mu1*xi_minor + 2*mu2*xi_major``.

    The type multiplies its own action (major counts twice), so this is the
    expected per-edge coefficient the dispatcher actually optimizes against.
    """
    xi = np.asarray(xi, dtype=float)
    belief = check_belief(belief, network.n_targets)
    node_term = belief[:, 0] * 1.0 * xi[:, 0] + belief[:, 1] * 2.0 * xi[:, 1]
    return np.asarray(weights, dtype=float) + node_term[network.edge_target]


def dispatcher_expected_utility(
    network: BipartiteNetwork,
    plan: np.ndarray,
    weights: np.ndarray,
    xi: np.ndarray,
    belief: np.ndarray,
    lam: float,
) -> float:
    """Expected utility of a plan against a typed action profile.

    Equals ``sum(m_eff * x) - lam*sum(x*log x)`` with the entropic term
    counted once per edge (a type-independent term keeps its value under the
    expectation).
    """
    plan = check_plan(network, plan)
    return planner_objective(plan, effective_weights(network, weights, xi, belief), lam)


def dispatcher_best_response(
    spec: GameSpec,
    xi: np.ndarray,
    prices0: np.ndarray | None = None,
    settings: SolverSettings | None = None,
) -> SolveReport:
    """Solve the dispatcher's transport problem under belief-averaged weights."""
    xi = check_strategy(xi, spec.lower_caps, spec.upper_caps)
    w_eff = effective_weights(spec.network, spec.weights, xi, spec.belief)
    return solve_regularized_ot(spec.network, w_eff, settings or spec.settings, prices0)


def adversary_cost(
    network: BipartiteNetwork,
    plan: np.ndarray,
    weights: np.ndarray,
    xi: np.ndarray,
    theta: np.ndarray,
    params: AdversaryCostParams,
) -> float:
    """Cost of a joint type's actions: expected punishment plus handed-over revenue.

    Per edge this is ``coeff * xi_q(theta_q)**(-beta2) * x**beta1 +
    (m + theta_q * xi_q(theta_q)) * x``; the adversary is a minimizer.
    """
    plan = check_plan(network, plan)
    xi = np.asarray(xi, dtype=float)
    theta = np.asarray(theta, dtype=int)
    if theta.shape != (network.n_targets,) or not np.all(np.isin(theta, (1, 2))):
        raise ValidationError("theta must assign type 1 or 2 to every target")
    if np.any(xi < PERTURBATION_FLOOR):
        raise PerturbationBelowFloor(
            f"actions must stay >= {PERTURBATION_FLOOR} to keep the penalty finite"
        )
    theta_e = theta[network.edge_target]
    xi_e = xi[network.edge_target, theta_e - 1]
    penalty = params.punishment_coeff * xi_e ** (-params.beta2) * plan ** params.beta1
    revenue = (np.asarray(weights, float) + theta_e * xi_e) * plan
    return float(np.sum(penalty + revenue))


def node_cost_aggregates(
    network: BipartiteNetwork, plan: np.ndarray, params: AdversaryCostParams
) -> tuple[np.ndarray, np.ndarray]:
    """Per-target penalty scale ``A_q = sum coeff*x**beta1`` and flow ``S_q = sum x``."""
    plan = check_plan(network, plan)
    penalty = params.punishment_coeff * plan ** params.beta1
    scale = np.bincount(network.edge_target, weights=penalty, minlength=network.n_targets)
    flow = network.target_sums(plan)
    return scale, flow


def minimize_node_cost(
    penalty_scale: np.ndarray,
    flow_term: np.ndarray,
    beta2: float,
    caps: np.ndarray,
) -> np.ndarray:
    """Minimizer of ``f(xi) = A*xi**(-beta2) + B*xi`` on ``[floor, cap]`` per node.

    For ``B > 0`` the objective is strictly convex on xi > 0 with unique
    stationary point ``(beta2*A/B)**(1/(1+beta2))``, clipped into the box.
    With no flow (``B == 0``) the objective only decays, so the cap is optimal.
    """
    scale = np.atleast_1d(np.asarray(penalty_scale, dtype=float))
    flow = np.atleast_1d(np.asarray(flow_term, dtype=float))
    caps = np.broadcast_to(np.asarray(caps, dtype=float), scale.shape)
    out = np.empty_like(scale)
    no_flow = flow <= 0
    out[no_flow] = caps[no_flow]
    active = ~no_flow
    stationary = (beta2 * scale[active] / flow[active]) ** (1.0 / (1.0 + beta2))
    out[active] = np.clip(stationary, PERTURBATION_FLOOR, caps[active])
    return out


def adversary_best_response(
    network: BipartiteNetwork,
    plan: np.ndarray,
    params: AdversaryCostParams,
    caps: np.ndarray,
    type_value: int,
) -> np.ndarray:
    """Per-target cost-minimizing action for one type branch.

    The cost separates across targets, so each node solves its scalar box
    problem with ``B_q = type_value * S_q`` independently.
    """
    if type_value not in (1, 2):
        raise ValidationError("type_value must be 1 (minor) or 2 (major)")
    scale, flow = node_cost_aggregates(network, plan, params)
    return minimize_node_cost(scale, type_value * flow, params.beta2, caps)


def best_response_strategy(spec: GameSpec, plan: np.ndarray) -> np.ndarray:
    """Both type branches' best responses, stacked as an (n_targets, 2) table."""
    minor = adversary_best_response(
        spec.network, plan, spec.cost_params, spec.lower_caps, 1
    )
    major = adversary_best_response(
        spec.network, plan, spec.cost_params, spec.upper_caps, 2
    )
    return np.stack([minor, major], axis=1)


def _edge_utility_gaps(
    network: BipartiteNetwork,
    plan: np.ndarray,
    w_eff: np.ndarray,
    lam: float,
    grid_points: int,
) -> float:
    """Best single-edge utility improvement over a feasible grid."""
    rows = network.row_sums(plan)
    slack = network.capacities - rows
    best = -np.inf
    for e in range(network.n_edges):
        hi = max(plan[e] + slack[network.edge_source[e]], 0.0)
        grid = np.linspace(0.0, hi, grid_points)
        base = w_eff[e] * plan[e] - lam * (plan[e] * np.log(plan[e]) if plan[e] > 0 else 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = np.where(grid > 0, grid * np.log(grid), 0.0)
        gain = (w_eff[e] * grid - lam * ent) - base
        best = max(best, float(gain.max()))
    return best


def _node_cost_gaps(
    spec: GameSpec, plan: np.ndarray, xi: np.ndarray, grid_points: int
) -> float:
    """Best per-node, per-type cost reduction over a gridded action range."""
    scale, flow = node_cost_aggregates(spec.network, plan, spec.cost_params)
    beta2 = spec.cost_params.beta2
    caps = spec.caps()
    best = -np.inf
    for q in range(spec.network.n_targets):
        for t in (1, 2):
            b = t * flow[q]
            cost = lambda z: scale[q] * z ** (-beta2) + b * z
            grid = np.linspace(PERTURBATION_FLOOR, caps[q, t - 1], grid_points)
            reduction = cost(xi[q, t - 1]) - cost(grid)
            best = max(best, float(np.max(reduction)))
    return best


def deviation_check(
    spec: GameSpec, plan: np.ndarray, xi: np.ndarray, grid_points: int = 21
) -> float:
    """Largest unilateral improvement found by coordinate-wise grid sampling.

    Varies one plan coordinate at a time inside its remaining row slack for
    the dispatcher, and one per-node action per type for the adversary.  A
    result <= 0 means no profitable deviation was located.
    """
    plan = check_plan(spec.network, plan)
    xi = check_strategy(xi, spec.lower_caps, spec.upper_caps)
    w_eff = effective_weights(spec.network, spec.weights, xi, spec.belief)
    gap_plan = _edge_utility_gaps(
        spec.network, plan, w_eff, spec.settings.lam, grid_points
    )
    gap_action = _node_cost_gaps(spec, plan, xi, grid_points)
    return max(gap_plan, gap_action)


def _round_record(spec: GameSpec, rnd: int, plan: np.ndarray, xi: np.ndarray) -> dict:
    utility = dispatcher_expected_utility(
        spec.network, plan, spec.weights, xi, spec.belief, spec.settings.lam
    )
    ones = np.ones(spec.network.n_targets, dtype=int)
    return {
        "round": rnd,
        "plan": tuple(float(v) for v in plan),
        "xi_minor": tuple(float(v) for v in xi[:, 0]),
        "xi_major": tuple(float(v) for v in xi[:, 1]),
        "dispatcher_utility": utility,
        "adversary_cost_minor": adversary_cost(
            spec.network, plan, spec.weights, xi, ones, spec.cost_params
        ),
        "adversary_cost_major": adversary_cost(
            spec.network, plan, spec.weights, xi, 2 * ones, spec.cost_params
        ),
    }


def solve_bayesian_equilibrium(
    spec: GameSpec,
    deviation_tol: float = 1e-4,
    max_rounds: int = 500,
    profile_tol: float = 1e-7,
    grid_points: int = 21,
    record_trace: bool = False,
) -> EquilibriumProfile:
    """Alternate both best responses until the profile stops moving.

    Starts from the adversary at its caps (worst case for the dispatcher) and
    the adversary-free plan.  After the loop settles, the coordinate-wise
    deviation search certifies the profile; ``converged`` requires both the
    profile change and the located gap to be within tolerance.
    """
    base = solve_regularized_ot(spec.network, spec.weights, spec.settings)
    plan, prices = base.plan, base.prices
    xi = spec.caps()
    trace: list[dict] = []
    settled = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        response = dispatcher_best_response(spec, xi, prices0=prices)
        plan_new, prices = response.plan, response.prices
        xi_new = best_response_strategy(spec, plan_new)
        change = max(
            float(np.max(np.abs(plan_new - plan))), float(np.max(np.abs(xi_new - xi)))
        )
        plan, xi = plan_new, xi_new
        if record_trace:
            trace.append(_round_record(spec, rounds, plan, xi))
        if change <= profile_tol:
            settled = True
            break
    gap = deviation_check(spec, plan, xi, grid_points)
    converged = settled and gap <= deviation_tol
    if not converged:
        logger.info(
            "equilibrium search stopped after %d rounds (settled=%s, gap=%.3e)",
            rounds, settled, gap,
        )
    return EquilibriumProfile(
        plan=plan,
        strategy=xi,
        iterations=rounds,
        converged=converged,
        deviation_gap=gap,
        trace=trace,
    )
