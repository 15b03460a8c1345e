"""Entropic-regularized transport over a bipartite network.

The dispatcher maximizes ``sum(m*x) - lam*sum(x*log x)`` subject to per-source
capacities ``Bx <= c`` and ``x >= 0``.  With ``lam > 0`` the primal update has
a closed form per edge and the capacity prices follow projected subgradient
ascent; ``lam == 0`` degenerates to a linear program whose vertex solution is
computed greedily.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ValidationError, ZeroLambda
from .network import BipartiteNetwork, check_plan

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    """Knobs for the dual-pricing loop.

    ``lam`` is the smoothing weight, ``gamma`` the dual step size, ``tol``
    bounds both the complementary-slackness residual and the primal change at
    convergence.
    """

    lam: float = 3.0
    gamma: float = 0.05
    tol: float = 1e-8
    max_iter: int = 50_000
    record_trace: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError("lam must be >= 0")
        if self.gamma <= 0:
            raise ValidationError("gamma must be > 0")
        if self.tol <= 0:
            raise ValidationError("tol must be > 0")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be a positive integer")


@dataclass
class SolveReport:
    """Outcome of a dual-pricing run.

    ``converged`` implies ``residual <= tol``.  ``trace`` holds one record per
    iteration when tracing was requested, else stays empty.
    """

    plan: np.ndarray
    prices: np.ndarray
    iterations: int
    residual: float
    converged: bool
    trace: list[dict] = field(default_factory=list)


def entropy_sum(plan: np.ndarray) -> float:
    """sum(x*log x) with the continuous extension 0*log 0 = 0."""
    x = np.asarray(plan, dtype=float)
    out = np.zeros_like(x)
    positive = x > 0
    out[positive] = x[positive] * np.log(x[positive])
    return float(out.sum())


def planner_objective(plan: np.ndarray, weights: np.ndarray, lam: float) -> float:
    """Dispatcher utility ``sum(m*x) - lam*sum(x*log x)`` of a plan."""
    plan = np.asarray(plan, dtype=float)
    if np.any(plan < 0):
        raise ValidationError("plans must be elementwise nonnegative")
    return float(np.dot(np.asarray(weights, float), plan)) - lam * entropy_sum(plan)


def _check_weights(network: BipartiteNetwork, weights) -> np.ndarray:
    arr = np.asarray(weights, dtype=float)
    if arr.shape != (network.n_edges,):
        raise DimensionMismatch(
            f"weights have shape {arr.shape}, expected ({network.n_edges},)"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError("weights must be finite")
    return arr


def primal_update(
    network: BipartiteNetwork, weights: np.ndarray, prices: np.ndarray, lam: float
) -> np.ndarray:
    """Closed-form plan given prices: ``x = exp((m - p_j)/lam - 1)`` per edge.

    Always strictly positive; undefined at ``lam == 0``.
    """
    if lam <= 0:
        raise ZeroLambda("primal update needs lam > 0; use unregularized_solve")
    w = _check_weights(network, weights)
    p = np.asarray(prices, dtype=float)
    if p.shape != (network.n_sources,):
        raise DimensionMismatch(
            f"prices have shape {p.shape}, expected ({network.n_sources},)"
        )
    return np.exp((w - p[network.edge_source]) / lam - 1.0)


def dual_update(
    network: BipartiteNetwork, prices: np.ndarray, plan: np.ndarray, gamma: float
) -> np.ndarray:
    """Projected price ascent: ``p_j <- max(0, p_j + gamma*(row_sum_j - c_j))``.

    The projection keeps every capacity price nonnegative, so overloaded
    sources get more expensive and slack sources drift back to zero.
    """
    x = check_plan(network, plan)
    rows = network.row_sums(x)
    return np.maximum(0.0, prices + gamma * (rows - network.capacities))


def solve_regularized_ot(
    network: BipartiteNetwork,
    weights: np.ndarray,
    settings: SolverSettings = SolverSettings(),
    prices0: np.ndarray | None = None,
) -> SolveReport:
    """Alternate primal and dual updates until the fixed point.

    Parameters
    ----------
    network : BipartiteNetwork
    weights : ndarray, shape (n_edges,)
        Perceived intensity per edge (utility per resource unit).
    settings : SolverSettings
        Requires ``settings.lam > 0``.
    prices0 : ndarray, optional
        Warm-start prices; zeros when omitted.

    Returns
    -------
    SolveReport
        ``plan`` is feasible within ``tol`` and strictly positive; ``residual``
        is the worst complementary-slackness violation ``|min(p_j, slack_j)|``.
        When the iteration budget runs out the report comes back with
        ``converged=False`` rather than raising.
    """
    if settings.lam <= 0:
        raise ZeroLambda("solve_regularized_ot needs lam > 0; use unregularized_solve")
    w = _check_weights(network, weights)
    if prices0 is None:
        prices = np.zeros(network.n_sources)
    else:
        prices = np.asarray(prices0, dtype=float).copy()
        if prices.shape != (network.n_sources,):
            raise DimensionMismatch("warm-start prices have the wrong shape")
        if np.any(prices < 0):
            raise ValidationError("warm-start prices must be nonnegative")

    trace: list[dict] = []
    x = primal_update(network, w, prices, settings.lam)
    residual = np.inf
    for iteration in range(1, settings.max_iter + 1):
        x_new = primal_update(network, w, prices, settings.lam)
        prices = dual_update(network, prices, x_new, settings.gamma)
        rows = network.row_sums(x_new)
        residual = float(np.max(np.abs(np.minimum(prices, network.capacities - rows))))
        primal_change = float(np.max(np.abs(x_new - x)))
        x = x_new
        if settings.record_trace:
            trace.append(
                {
                    "iteration": iteration,
                    "plan": tuple(float(v) for v in x),
                    "prices": tuple(float(v) for v in prices),
                    "residual": residual,
                    "objective": planner_objective(x, w, settings.lam),
                }
            )
        if residual <= settings.tol and primal_change <= settings.tol:
            logger.debug("dual pricing converged in %d iterations", iteration)
            return SolveReport(x, prices, iteration, residual, True, trace)
    logger.info(
        "dual pricing hit max_iter=%d with residual %.3e", settings.max_iter, residual
    )
    return SolveReport(x, prices, settings.max_iter, residual, False, trace)


def unregularized_solve(network: BipartiteNetwork, weights: np.ndarray) -> np.ndarray:
    """Vertex solution of the ``lam == 0`` linear program.

    Each source pushes its full capacity onto its maximum-weight edge when
    that weight is positive (ties broken by canonical edge order) and ships
    nothing otherwise.
    """
    w = _check_weights(network, weights)
    plan = np.zeros(network.n_edges)
    for j in range(network.n_sources):
        idx = network.edges_from(j)
        best = idx[int(np.argmax(w[idx]))]
        if w[best] > 0:
            plan[best] = network.capacities[j]
    return plan
