#!/usr/bin/env python3

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from tools.dense_pagerank import exact_group_mass
from tools.forest_sampler import EstimatorSet, estimate_aux
from tools.graph import DirectedGraph, GroupPartition, Rewiring, build_reweighted
from tools.greedy_exact import PlanStep, RewiringPlan
from utils.common import resolve_seed, validate_alpha
from utils.config import get_dense_cap
from utils.errors import ConfigError, PlanningError

logger = logging.getLogger(__name__)

__all__ = [
    "CandidateSet",
    "candidate_targets",
    "approx_gain",
    "select_rewiring",
    "fast_rewire",
    "fastv_rewire",
]


@njit(cache=True, nogil=True)
def _first_legal_targets(indptr, indices, order, targets_out):
    """For every source, the first node in `order` that is a legal target.

    Returns the largest rank position used, or -1 if no source has a target.
    """
    n = indptr.shape[0] - 1
    mark = np.full(n, -1, dtype=np.int64)
    max_pos = -1
    for i in range(n):
        targets_out[i] = -1
        start = indptr[i]
        end = indptr[i + 1]
        if start == end:
            continue
        for p in range(start, end):
            mark[indices[p]] = i
        mark[i] = i
        for pos in range(n):
            k = order[pos]
            if mark[k] != i:
                targets_out[i] = k
                if pos > max_pos:
                    max_pos = pos
                break
    return max_pos


@dataclass
class CandidateSet:
    """Restricted rewiring targets K: nodes ranked by eta' (desc, ties by id).

    `order` is the full ranking; K is its first `size` entries. `targets[i]` is
    the best legal target of source i inside K (-1 when i has none).
    """

    order: np.ndarray
    base_size: int
    size: int
    targets: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return self.order[: self.size]

    @property
    def extended(self) -> bool:
        return self.size > self.base_size


def candidate_targets(eta_prime: np.ndarray, g: DirectedGraph) -> CandidateSet:
    """Top max_out_arcs + 2 nodes by eta', extended while some source lacks a legal target."""
    eta_prime = np.asarray(eta_prime, dtype=np.float64)
    if eta_prime.shape != (g.n,):
        raise ConfigError(f"eta' must have length n={g.n}, got {eta_prime.shape}")
    order = np.lexsort((np.arange(g.n), -eta_prime))
    base_size = min(g.n, g.max_out_arcs + 2)
    targets = np.empty(g.n, dtype=np.int64)
    max_pos = _first_legal_targets(g.indptr, g.indices, order, targets)
    size = max(base_size, int(max_pos) + 1)
    if size > base_size:
        logger.debug(f"Candidate set extended from {base_size} to {size} nodes")
    return CandidateSet(order=order, base_size=base_size, size=size, targets=targets)


def approx_gain(p_ij: float, sigma_i: float, eta_j: float, eta_k: float, alpha: float) -> float:
    """tau-free score (1 - alpha) p_ij sigma_i (eta_k - eta_j)."""
    return (1.0 - alpha) * p_ij * sigma_i * (eta_k - eta_j)


def select_rewiring(
    g: DirectedGraph, weights: np.ndarray, eta: np.ndarray, alpha: float
) -> tuple[Rewiring, float, CandidateSet] | None:
    """Argmax of the tau-free score over arcs (i, j) and legal k in K.

    `weights` is sigma' (PageRank) or sigma_src' (PPR); exact sigma and eta can
    be passed instead of estimates. Ties go to the smallest (i, j, k).

    Returns:
        (rewiring, score, candidate set), or None if no arc has a legal target
    """
    candidates = candidate_targets(eta, g)
    sources = g.arc_sources()
    arc_targets = candidates.targets[sources]
    valid = arc_targets >= 0
    if not valid.any():
        return None

    coefficient = (1.0 - alpha) * g.transition_probs() * weights[sources]
    scores = np.full(g.m, -np.inf)
    scores[valid] = coefficient[valid] * (eta[arc_targets[valid]] - eta[g.indices[valid]])
    best = scores.max()

    tied = np.flatnonzero(scores == best)
    k_choice = arc_targets[tied].copy()
    # a zero coefficient makes every k in K score the same, so take the smallest legal id
    for pos, arc in enumerate(tied):
        if coefficient[arc] == 0.0:
            k_choice[pos] = _smallest_legal_in(g, int(sources[arc]), candidates.nodes)
    first = np.lexsort((k_choice, g.indices[tied], sources[tied]))[0]
    arc = tied[first]
    rewiring = Rewiring(int(sources[arc]), int(g.indices[arc]), int(k_choice[first]))
    return rewiring, float(best), candidates


def _smallest_legal_in(g: DirectedGraph, i: int, nodes: np.ndarray) -> int:
    blocked = set(g.neighbors(i).tolist())
    blocked.add(i)
    return min(int(k) for k in nodes if int(k) not in blocked)


def _greedy_fast(
    g: DirectedGraph,
    b: int,
    group: GroupPartition,
    psi: int,
    alpha: float,
    source: int | None,
    seed: int | None,
    workers: int | None,
    exact_fairness: bool | None,
    dense_cap: int | None,
) -> RewiringPlan:
    alpha = validate_alpha(alpha)
    if b < 1:
        raise ConfigError(f"budget must be at least 1, got {b}")
    if psi < 1:
        raise ConfigError(f"psi must be at least 1, got {psi}")
    if source is not None and not 0 <= source < g.n:
        raise ConfigError(f"source {source} is not a node id")
    seed = resolve_seed(seed)
    rng = np.random.default_rng(seed)
    graph = g.copy()
    cap = get_dense_cap() if dense_cap is None else int(dense_cap)
    use_exact = graph.n <= cap if exact_fairness is None else bool(exact_fairness)

    def estimate(current: DirectedGraph) -> EstimatorSet:
        return estimate_aux(build_reweighted(current, alpha), psi, group, source, rng=rng, workers=workers)

    def fairness(current: DirectedGraph) -> float:
        if use_exact:
            return exact_group_mass(current, group, alpha, source)
        estimates = estimate(current)
        return estimates.group_mass(group) if source is None else estimates.source_group_mass(group)

    algorithm = "fast" if source is None else "fastv"
    plan = RewiringPlan(
        algorithm=algorithm,
        params={
            "alpha": alpha,
            "budget": b,
            "psi": psi,
            "seed": seed,
            "source": source,
            "phi": group.phi,
            "workers": workers,
        },
        initial_fairness=fairness(graph),
        labels=graph.labels,
        fairness_metric="pi(S)" if source is None else "pi_v(S)",
        extra={"fairness_method": "exact" if use_exact else "sampled"},
    )
    logger.info(
        f"{algorithm}: n={graph.n}, m={graph.m}, psi={psi}, seed={seed}, "
        f"fairness={'exact' if use_exact else 'sampled'}, initial={plan.initial_fairness:.6f}"
    )

    for round_number in range(1, b + 1):
        estimates = estimate(graph)
        weights = estimates.sigma if source is None else estimates.sigma_src
        choice = select_rewiring(graph, weights, estimates.eta, alpha)
        if choice is None:
            raise PlanningError(
                f"no legal rewiring left at round {round_number} ({len(plan.steps)} steps completed)",
                plan.steps,
            )
        rewiring, score, candidates = choice
        graph.rewire_in_place(rewiring)
        step = PlanStep(rewiring, score, fairness(graph), candidates.size)
        plan.steps.append(step)
        logger.info(
            f"Round {round_number}: rewire ({graph.labels[rewiring.i]}, {graph.labels[rewiring.j]}, "
            f"{graph.labels[rewiring.k]}) score={score:.6g} |K|={candidates.size} "
            f"fairness={step.fairness_after:.6f} mean_steps={estimates.mean_walk_steps:.1f}"
        )

    plan.graph = graph
    return plan


def fast_rewire(
    g: DirectedGraph,
    b: int,
    group: GroupPartition,
    psi: int,
    alpha: float,
    seed: int | None = None,
    workers: int | None = None,
    exact_fairness: bool | None = None,
    dense_cap: int | None = None,
) -> RewiringPlan:
    """Sampling-based greedy PageRank-fairness rewiring (the Fast algorithm).

    Every round resamples psi forests on the current graph, restricts targets to
    the candidate set K and applies the rewiring with the largest tau-free score.

    Args:
        g: Input graph (not modified)
        b: Number of rewirings
        group: Disadvantaged group S
        psi: Forests sampled per round
        alpha: Restart probability
        seed: Master seed (generated when None)
        workers: Sampling threads (default from config / FAIRREWIRE_WORKERS)
        exact_fairness: Force (True) or skip (False) exact pi(S) tracking;
            by default exact when n is within the dense cap
        dense_cap: Override for the dense node cap

    Returns:
        The RewiringPlan; gains are the tau-free scores
    """
    return _greedy_fast(g, b, group, psi, alpha, None, seed, workers, exact_fairness, dense_cap)


def fastv_rewire(
    g: DirectedGraph,
    b: int,
    group: GroupPartition,
    v: int,
    psi: int,
    alpha: float,
    seed: int | None = None,
    workers: int | None = None,
    exact_fairness: bool | None = None,
    dense_cap: int | None = None,
) -> RewiringPlan:
    """Fast for PPR fairness of source v: sigma_src' replaces sigma'."""
    return _greedy_fast(g, b, group, psi, alpha, v, seed, workers, exact_fairness, dense_cap)
