#!/usr/bin/env python3
"""Fairness audits, the random baseline and the evaluation metrics."""

import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any

import numpy as np
import scipy.stats

from tools.dense_pagerank import (
    aux_vectors,
    compute_pi,
    exact_group_mass,
    solve_group_proximity,
    sherman_morrison_update,
)
from tools.forest_sampler import estimate_aux
from tools.graph import DirectedGraph, GroupPartition, Rewiring, build_reweighted, legal_target_counts
from tools.greedy_exact import (
    PlanStep,
    RewiringPlan,
    best_exact_rewiring,
    legal_candidate_count,
    refresh_on_drift,
)
from tools.greedy_fast import select_rewiring
from utils.common import FAIRNESS_TOLERANCE, resolve_seed, validate_alpha
from utils.config import get_dense_cap, get_drift_tolerance
from utils.errors import ConfigError, DenseCapError, InsufficientDataError, PlanningError

logger = logging.getLogger(__name__)

__all__ = [
    "AuditReport",
    "PPRTrajectory",
    "fairness_audit",
    "wasserstein_1d",
    "relative_error",
    "random_baseline",
    "gain_samples",
    "score_correlation",
    "gain_correlation",
    "ppr_group_distributions",
    "ppr_wasserstein_trajectory",
    "plan_results_rows",
    "trajectory_results_rows",
]


@dataclass
class AuditReport:
    """PageRank fairness of a graph towards group S.

    `organic_ppr_mass[v]` is the organic PPR mass of node v towards S; a node is
    PPR-unfair when that mass is below phi.
    """

    pagerank_mass: float
    ratio: float
    phi: float
    unfair: bool
    organic_ppr_mass: list[float]
    ppr_unfair_nodes: int
    method: str
    params: dict[str, Any] = field(default_factory=dict)
    labels: list[str] = field(default_factory=list)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class PPRTrajectory:
    """Per-round W1 distance between the in-group and out-group PPR mass distributions."""

    algorithm: str
    sources: list[int]
    distances: list[float]
    seed: int


def _organic(eta: np.ndarray, group: GroupPartition, alpha: float) -> np.ndarray:
    organic = (eta - alpha * group.mask) / (1.0 - alpha)
    return np.clip(organic, 0.0, 1.0)


def fairness_audit(
    g: DirectedGraph,
    group: GroupPartition,
    alpha: float,
    dense_cap: int | None = None,
    psi: int | None = None,
    seed: int | None = None,
    workers: int | None = None,
) -> AuditReport:
    """Audit PageRank and per-node PPR fairness towards S.

    Within the dense cap everything is read off Pi. Above it, pi(S) still comes
    from a sparse direct solve and the per-node masses are estimated from psi
    sampled forests.

    Raises:
        DenseCapError: If n exceeds the dense cap and psi is not given
    """
    alpha = validate_alpha(alpha)
    cap = get_dense_cap() if dense_cap is None else int(dense_cap)
    params: dict[str, Any] = {"alpha": alpha, "dense_cap": cap}
    if g.n <= cap:
        pi = compute_pi(g, alpha, dense_cap=cap)
        aux = aux_vectors(pi, group)
        mass = float(aux.sigma[group.mask].sum())
        eta = aux.eta
        method = "exact"
    else:
        if psi is None:
            raise DenseCapError(f"n={g.n} exceeds the dense cap of {cap} nodes; pass psi to audit by sampling")
        seed = resolve_seed(seed)
        mass = exact_group_mass(g, group, alpha)
        eta = estimate_aux(build_reweighted(g, alpha), psi, group, rng=seed, workers=workers).eta
        method = "sampled"
        params.update({"psi": psi, "seed": seed})

    organic = _organic(eta, group, alpha)
    report = AuditReport(
        pagerank_mass=float(np.clip(mass, 0.0, 1.0)),
        ratio=group.ratio,
        phi=group.phi,
        unfair=bool(mass < group.phi - FAIRNESS_TOLERANCE),
        organic_ppr_mass=[float(x) for x in organic],
        ppr_unfair_nodes=int(np.sum(organic < group.phi - FAIRNESS_TOLERANCE)),
        method=method,
        params=params,
        labels=list(g.labels),
    )
    logger.info(
        f"Audit ({method}): pi(S)={report.pagerank_mass:.6f}, r(S)={report.ratio:.6f}, "
        f"phi={report.phi:.6f}, unfair={report.unfair}, PPR-unfair nodes={report.ppr_unfair_nodes}"
    )
    return report


def wasserstein_1d(a, b) -> float:
    """Exact 1-D W1 between two empirical distributions (integral of |F_a - F_b|).

    Raises:
        ConfigError: If either sample is empty
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ConfigError("wasserstein_1d needs two non-empty samples")
    return float(scipy.stats.wasserstein_distance(a, b))


def relative_error(approx_fairness: float, exact_fairness: float) -> float:
    """|approx - exact| / exact, in percent."""
    if not exact_fairness > 0:
        raise ConfigError(f"exact fairness must be positive, got {exact_fairness}")
    return 100.0 * abs(approx_fairness - exact_fairness) / exact_fairness


def _sample_legal(g: DirectedGraph, rng: np.random.Generator) -> Rewiring | None:
    """Uniform legal (i, j, k): arc drawn with weight = #legal k of its source, then k by rejection."""
    sources = g.arc_sources()
    weights = legal_target_counts(g)[sources].astype(np.float64)
    total = weights.sum()
    if total <= 0:
        return None
    arc = int(rng.choice(g.m, p=weights / total))
    i, j = int(sources[arc]), int(g.indices[arc])
    blocked = set(g.neighbors(i).tolist())
    blocked.add(i)
    while True:
        k = int(rng.integers(g.n))
        if k not in blocked:
            return Rewiring(i, j, k)


def random_baseline(
    g: DirectedGraph,
    b: int,
    group: GroupPartition,
    alpha: float,
    seed: int | None = None,
) -> RewiringPlan:
    """b uniformly random legal rewirings; gains are the exact fairness changes."""
    alpha = validate_alpha(alpha)
    if b < 1:
        raise ConfigError(f"budget must be at least 1, got {b}")
    seed = resolve_seed(seed)
    rng = np.random.default_rng(seed)
    graph = g.copy()
    plan = RewiringPlan(
        algorithm="random",
        params={"alpha": alpha, "budget": b, "seed": seed, "phi": group.phi},
        initial_fairness=exact_group_mass(graph, group, alpha),
        labels=graph.labels,
    )
    previous = plan.initial_fairness
    for round_number in range(1, b + 1):
        rewiring = _sample_legal(graph, rng)
        if rewiring is None:
            raise PlanningError(
                f"no legal rewiring left at round {round_number} ({len(plan.steps)} steps completed)",
                plan.steps,
            )
        graph.rewire_in_place(rewiring)
        fairness = exact_group_mass(graph, group, alpha)
        plan.steps.append(PlanStep(rewiring, fairness - previous, fairness, legal_candidate_count(graph)))
        logger.debug(f"Random round {round_number}: {rewiring.as_tuple()} fairness={fairness:.6f}")
        previous = fairness
    plan.graph = graph
    return plan


def _all_legal_arrays(g: DirectedGraph) -> tuple[np.ndarray, np.ndarray]:
    arcs, targets = [], []
    sources = g.arc_sources()
    for arc in range(g.m):
        i = int(sources[arc])
        blocked = np.zeros(g.n, dtype=bool)
        blocked[g.neighbors(i)] = True
        blocked[i] = True
        ks = np.flatnonzero(~blocked)
        arcs.append(np.full(ks.size, arc, dtype=np.int64))
        targets.append(ks)
    return np.concatenate(arcs), np.concatenate(targets)


def gain_samples(
    g: DirectedGraph,
    group: GroupPartition,
    alpha: float,
    sample_size: int,
    seed: int | None = None,
    dense_cap: int | None = None,
) -> tuple[list[Rewiring], np.ndarray, np.ndarray]:
    """Exact gains and their tau-free counterparts over sampled legal rewirings.

    All legal rewirings are used when there are at most `sample_size` of them;
    otherwise `sample_size` distinct ones are drawn uniformly.

    Returns:
        (rewirings, delta, delta_times_tau)

    Raises:
        InsufficientDataError: If fewer than 3 legal rewirings exist
    """
    if sample_size < 3:
        raise ConfigError(f"sample size must be at least 3, got {sample_size}")
    total = legal_candidate_count(g)
    if total < 3:
        raise InsufficientDataError(f"only {total} legal rewirings; at least 3 are needed")
    pi = compute_pi(g, alpha, dense_cap=dense_cap)
    aux = aux_vectors(pi, group)
    rng = np.random.default_rng(resolve_seed(seed))

    if 2 * sample_size >= total:
        arcs, ks = _all_legal_arrays(g)
        if sample_size < total:
            chosen = np.sort(rng.choice(total, size=sample_size, replace=False))
            arcs, ks = arcs[chosen], ks[chosen]
    else:
        seen: set[tuple[int, int, int]] = set()
        picked: list[Rewiring] = []
        while len(picked) < sample_size:
            r = _sample_legal(g, rng)
            if r.as_tuple() not in seen:
                seen.add(r.as_tuple())
                picked.append(r)
        picked.sort()
        arcs = np.array([g._arc_position(r.i, r.j) for r in picked], dtype=np.int64)
        ks = np.array([r.k for r in picked], dtype=np.int64)

    sources = g.arc_sources()[arcs]
    targets = g.indices[arcs]
    p = g.transition_probs()[arcs]
    matrix = pi.matrix
    tau_values = alpha + (1.0 - alpha) * p * (matrix[targets, sources] - matrix[ks, sources])
    delta_tau = (1.0 - alpha) * p * aux.sigma[sources] * (aux.eta[ks] - aux.eta[targets])
    delta = delta_tau / tau_values
    rewirings = [Rewiring(int(i), int(j), int(k)) for i, j, k in zip(sources, targets, ks)]
    logger.debug(f"Scored {len(rewirings)} of {total} legal rewirings")
    return rewirings, delta, delta_tau


def score_correlation(delta, delta_tau) -> tuple[float, float]:
    """Pearson and Spearman coefficients of two score lists.

    Raises:
        InsufficientDataError: If either list is constant or shorter than 3
    """
    delta = np.asarray(delta, dtype=np.float64)
    delta_tau = np.asarray(delta_tau, dtype=np.float64)
    if delta.size < 3 or delta.size != delta_tau.size:
        raise InsufficientDataError(f"need two score lists of equal length >= 3, got {delta.size} and {delta_tau.size}")
    if np.ptp(delta) == 0 or np.ptp(delta_tau) == 0:
        raise InsufficientDataError("gains are constant over the sampled rewirings")
    pearson = float(scipy.stats.pearsonr(delta, delta_tau)[0])
    spearman = float(scipy.stats.spearmanr(delta, delta_tau)[0])
    logger.info(f"Gain correlation over {delta.size} rewirings: pearson={pearson:.4f}, spearman={spearman:.4f}")
    return pearson, spearman


def gain_correlation(
    g: DirectedGraph,
    group: GroupPartition,
    alpha: float,
    sample_size: int,
    seed: int | None = None,
    dense_cap: int | None = None,
) -> tuple[float, float]:
    """Pearson and Spearman correlation between exact gains and tau-free scores.

    Raises:
        InsufficientDataError: If fewer than 3 legal rewirings exist or the gains are constant
    """
    _, delta, delta_tau = gain_samples(g, group, alpha, sample_size, seed, dense_cap)
    return score_correlation(delta, delta_tau)


def ppr_group_distributions(eta: np.ndarray, group: GroupPartition, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """({organic pi_i(S) : i in S}, {pi_i(S) : i not in S}) from eta = Pi 1_S."""
    eta = np.asarray(eta, dtype=np.float64)
    mask = group.mask
    inside = (eta[mask] - alpha) / (1.0 - alpha)
    return inside, eta[~mask]


def ppr_wasserstein_trajectory(
    g: DirectedGraph,
    group: GroupPartition,
    alpha: float,
    b: int,
    source_fraction: float = 0.1,
    algorithm: str = "exactv",
    seed: int | None = None,
    psi: int | None = None,
    workers: int | None = None,
    dense_cap: int | None = None,
) -> PPRTrajectory:
    """PPR evaluation protocol: W1 between the two groups' PPR mass distributions per round.

    A seeded fraction of nodes is drawn as sources. Each round applies one
    Exactv (or Fastv) rewiring per source, in source order, on one shared graph.
    distances[0] is the distance before any rewiring.

    Raises:
        ConfigError: On an unknown algorithm, a bad fraction or a missing psi for fastv
    """
    alpha = validate_alpha(alpha)
    if algorithm not in ("exactv", "fastv"):
        raise ConfigError(f"PPR evaluation runs exactv or fastv, got {algorithm!r}")
    if not 0 < source_fraction <= 1:
        raise ConfigError(f"source fraction must lie in (0, 1], got {source_fraction}")
    if b < 1:
        raise ConfigError(f"budget must be at least 1, got {b}")
    if algorithm == "fastv" and (psi is None or psi < 1):
        raise ConfigError("fastv PPR evaluation needs psi >= 1")
    seed = resolve_seed(seed)
    rng = np.random.default_rng(seed)
    count = max(1, int(round(source_fraction * g.n)))
    sources = sorted(int(v) for v in rng.choice(g.n, size=count, replace=False))
    graph = g.copy()
    pi = compute_pi(graph, alpha, dense_cap=dense_cap) if algorithm == "exactv" else None
    drift_tolerance = get_drift_tolerance()

    def distance() -> float:
        eta = pi.matrix[:, group.mask].sum(axis=1) if pi is not None else solve_group_proximity(graph, group, alpha)
        inside, outside = ppr_group_distributions(eta, group, alpha)
        return wasserstein_1d(inside, outside)

    distances = [distance()]
    logger.info(f"PPR evaluation ({algorithm}): {count} sources, initial W1={distances[0]:.6f}")
    for round_number in range(1, b + 1):
        for v in sources:
            if pi is not None:
                aux = aux_vectors(pi, group, v)
                choice = best_exact_rewiring(graph, pi, aux.sigma_src, aux.eta)
                rewiring = choice[0] if choice else None
            else:
                estimates = estimate_aux(build_reweighted(graph, alpha), psi, group, v, rng=rng, workers=workers)
                choice = select_rewiring(graph, estimates.sigma_src, estimates.eta, alpha)
                rewiring = choice[0] if choice else None
            if rewiring is None:
                raise PlanningError(f"no legal rewiring left at round {round_number} for source {v}")
            if pi is not None:
                sherman_morrison_update(pi, graph, rewiring, in_place=True)
            graph.rewire_in_place(rewiring)
        if pi is not None:
            pi = refresh_on_drift(pi, graph, alpha, dense_cap, drift_tolerance, f"PPR round {round_number}")
        distances.append(distance())
        logger.info(f"PPR round {round_number}: W1={distances[-1]:.6f}")
    return PPRTrajectory(algorithm=algorithm, sources=sources, distances=distances, seed=seed)


def plan_results_rows(plan: RewiringPlan, seed: int | None = None) -> list[list[Any]]:
    """results.csv rows (round, algorithm, metric, value, seed) for a plan."""
    seed_field = "" if seed is None else seed
    rows = [[0, plan.algorithm, "fairness", repr(float(plan.initial_fairness)), seed_field]]
    for idx, step in enumerate(plan.steps, start=1):
        rows.append([idx, plan.algorithm, "gain", repr(float(step.gain)), seed_field])
        rows.append([idx, plan.algorithm, "fairness", repr(float(step.fairness_after)), seed_field])
    return rows


def trajectory_results_rows(trajectory: PPRTrajectory) -> list[list[Any]]:
    return [
        [idx, trajectory.algorithm, "wasserstein", repr(float(value)), trajectory.seed]
        for idx, value in enumerate(trajectory.distances)
    ]
