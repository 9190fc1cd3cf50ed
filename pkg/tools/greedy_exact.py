#!/usr/bin/env python3

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from tools.dense_pagerank import (
    PiMatrix,
    aux_vectors,
    compute_pi,
    group_mass,
    normalized_ppr_mass,
    pagerank_vector,
    row_sum_drift,
    sherman_morrison_update,
)
from tools.graph import DirectedGraph, GroupPartition, Rewiring
from utils.common import PLAN_CSV_HEADER
from utils.config import get_drift_tolerance
from utils.errors import ConfigError, PlanningError
from utils.file_utils import csv_text, write_text_content

logger = logging.getLogger(__name__)

__all__ = [
    "PlanStep",
    "RewiringPlan",
    "exact_rewire",
    "exactv_rewire",
    "best_exact_rewiring",
    "legal_candidate_count",
    "refresh_on_drift",
]


@dataclass
class PlanStep:
    rewiring: Rewiring
    gain: float
    fairness_after: float
    candidates: int = 0  # legal triples scored (exact) or |K| (fast)


@dataclass
class RewiringPlan:
    """Ordered rewirings with per-round gains and the fairness trajectory.

    For PR plans fairness is pi(S); for PPR plans it is pi_v(S), so that
    fairness_after[t] - fairness_after[t-1] is the recorded exact gain.
    """

    algorithm: str
    params: dict[str, Any]
    initial_fairness: float
    labels: list[str]
    steps: list[PlanStep] = field(default_factory=list)
    fairness_metric: str = "pi(S)"
    extra: dict[str, Any] = field(default_factory=dict)
    graph: DirectedGraph | None = field(default=None, repr=False, compare=False)

    @property
    def rewirings(self) -> list[Rewiring]:
        return [step.rewiring for step in self.steps]

    @property
    def gains(self) -> list[float]:
        return [step.gain for step in self.steps]

    @property
    def final_fairness(self) -> float:
        return self.steps[-1].fairness_after if self.steps else self.initial_fairness

    @property
    def non_positive_rounds(self) -> list[int]:
        """1-based rounds whose selected gain was <= 0."""
        return [idx for idx, step in enumerate(self.steps, start=1) if step.gain <= 0]

    def csv_rows(self) -> list[list[Any]]:
        rows = []
        for idx, step in enumerate(self.steps, start=1):
            r = step.rewiring
            rows.append(
                [
                    idx,
                    self.labels[r.i],
                    self.labels[r.j],
                    self.labels[r.k],
                    repr(float(step.gain)),
                    repr(float(step.fairness_after)),
                ]
            )
        return rows

    def to_csv(self) -> str:
        return csv_text(PLAN_CSV_HEADER, self.csv_rows())

    def write_csv(self, path: str) -> str:
        write_text_content(path, self.to_csv())
        return path

    def to_summary(self) -> dict[str, Any]:
        summary = {
            "algorithm": self.algorithm,
            "params": dict(self.params),
            "fairness_metric": self.fairness_metric,
            "initial_fairness": self.initial_fairness,
            "final_fairness": self.final_fairness,
            "per_round_gains": self.gains,
            "per_round_candidates": [step.candidates for step in self.steps],
            "non_positive_rounds": self.non_positive_rounds,
            "labels": list(self.labels),
        }
        summary.update(self.extra)
        return summary


def legal_candidate_count(g: DirectedGraph) -> int:
    counts = g.out_arc_counts
    return int(np.sum(counts * (g.n - 1 - counts)))


def best_exact_rewiring(
    g: DirectedGraph, pi: PiMatrix, weights: np.ndarray, eta: np.ndarray
) -> tuple[Rewiring, float] | None:
    """Exhaustive argmax of the closed-form gain over all legal rewirings.

    The gain of (i, j, k) is (1 - alpha) p_ij weights_i (eta_k - eta_j) / tau,
    with weights = sigma for PageRank and weights = Pi[v, :] for PPR. Ties go to
    the lexicographically smallest (i, j, k).

    Returns:
        (rewiring, gain), or None if no legal rewiring exists
    """
    alpha = pi.alpha
    matrix = pi.matrix
    n = g.n
    best: tuple[Rewiring, float] | None = None
    for i in range(n):
        start, end = g.indptr[i], g.indptr[i + 1]
        if end == start or end - start >= n - 1:
            continue
        order = np.argsort(g.indices[start:end], kind="stable")
        nbrs = g.indices[start:end][order]
        p = (g.weights[start:end][order] / g.out_degree[i])[:, None]

        numerator = (1.0 - alpha) * weights[i] * p * (eta[None, :] - eta[nbrs][:, None])
        tau_block = alpha + (1.0 - alpha) * p * (matrix[nbrs, i][:, None] - matrix[:, i][None, :])
        # the k = i column can have tau <= 0; it is masked below
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = numerator / tau_block
        scores[:, nbrs] = -np.inf
        scores[:, i] = -np.inf

        flat = int(np.argmax(scores))
        value = float(scores.flat[flat])
        if best is None or value > best[1]:
            row, k = divmod(flat, n)
            best = (Rewiring(i, int(nbrs[row]), int(k)), value)
    return best


def refresh_on_drift(
    pi: PiMatrix,
    graph: DirectedGraph,
    alpha: float,
    dense_cap: int | None,
    drift_tolerance: float,
    context: str,
) -> PiMatrix:
    """Recompute Pi from scratch when chained rank-one updates drifted past the tolerance."""
    drift = row_sum_drift(pi)
    if drift <= drift_tolerance:
        return pi
    logger.warning(f"{context}: Pi row-sum drift {drift:.2e} > {drift_tolerance:.0e}, recomputing")
    return compute_pi(graph, alpha, pi.jump, dense_cap)


def _greedy_exact(
    g: DirectedGraph,
    b: int,
    group: GroupPartition,
    alpha: float,
    source: int | None,
    jump: np.ndarray | int | None,
    dense_cap: int | None,
) -> RewiringPlan:
    if b < 1:
        raise ConfigError(f"budget must be at least 1, got {b}")
    if source is not None and not 0 <= source < g.n:
        raise ConfigError(f"source {source} is not a node id")
    graph = g.copy()
    pi = compute_pi(graph, alpha, jump, dense_cap)
    drift_tolerance = get_drift_tolerance()

    def fairness(current: PiMatrix) -> float:
        if source is None:
            return group_mass(pagerank_vector(current), group)
        return group_mass(current.matrix[source], group)

    algorithm = "exact" if source is None else "exactv"
    plan = RewiringPlan(
        algorithm=algorithm,
        params={"alpha": alpha, "budget": b, "source": source, "phi": group.phi},
        initial_fairness=fairness(pi),
        labels=graph.labels,
        fairness_metric="pi(S)" if source is None else "pi_v(S)",
    )
    if source is not None:
        plan.extra["initial_organic_mass"] = normalized_ppr_mass(pi, source, group)
    logger.info(f"{algorithm}: n={graph.n}, m={graph.m}, |S|={len(group.members)}, initial={plan.initial_fairness:.6f}")

    for round_number in range(1, b + 1):
        aux = aux_vectors(pi, group, source)
        weights = aux.sigma if source is None else aux.sigma_src
        choice = best_exact_rewiring(graph, pi, weights, aux.eta)
        if choice is None:
            raise PlanningError(
                f"no legal rewiring left at round {round_number} ({len(plan.steps)} steps completed)",
                plan.steps,
            )
        rewiring, gain = choice
        candidates = legal_candidate_count(graph)
        sherman_morrison_update(pi, graph, rewiring, in_place=True)
        graph.rewire_in_place(rewiring)

        pi = refresh_on_drift(pi, graph, alpha, dense_cap, drift_tolerance, f"Round {round_number}")

        step = PlanStep(rewiring, gain, fairness(pi), candidates)
        plan.steps.append(step)
        logger.info(
            f"Round {round_number}: rewire ({graph.labels[rewiring.i]}, {graph.labels[rewiring.j]}, "
            f"{graph.labels[rewiring.k]}) gain={gain:.6g} fairness={step.fairness_after:.6f}"
        )

    if source is not None:
        plan.extra["final_organic_mass"] = normalized_ppr_mass(pi, source, group)
    plan.graph = graph
    return plan


def exact_rewire(
    g: DirectedGraph,
    b: int,
    group: GroupPartition,
    alpha: float,
    jump: np.ndarray | int | None = None,
    dense_cap: int | None = None,
) -> RewiringPlan:
    """Greedy PageRank-fairness rewiring with exact gains (the Exact algorithm).

    Args:
        g: Input graph (not modified)
        b: Number of rewirings
        group: Disadvantaged group S
        alpha: Restart probability
        jump: Jump vector (default uniform)
        dense_cap: Override for the dense node cap

    Returns:
        The RewiringPlan; plan.graph holds the rewired graph

    Raises:
        PlanningError: If a round has no legal rewiring
    """
    return _greedy_exact(g, b, group, alpha, None, jump, dense_cap)


def exactv_rewire(
    g: DirectedGraph,
    b: int,
    group: GroupPartition,
    v: int,
    alpha: float,
    dense_cap: int | None = None,
) -> RewiringPlan:
    """Greedy PPR-fairness rewiring for source v with exact gains (Exactv)."""
    return _greedy_exact(g, b, group, alpha, v, None, dense_cap)
