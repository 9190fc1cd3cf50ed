#!/usr/bin/env python3
"""Weighted rooted-spanning-forest sampling on the reweighted graph G_r.

Each sample runs loop-erased random walks that end either at a node already in
the forest or by absorption into an implicit super-node. In G_r the absorption
probability 1 / (1 + d_u) is exactly alpha at every node, and a non-absorbed
step moves along arc (u, j) with the original transition probability p_uj, so
the kernels only need the CSR arrays of the original graph and alpha.

Root frequencies give unbiased estimators of sigma (column mass of Pi), eta
(Pi 1_S) and sigma_src (a row of Pi).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from tools.graph import DirectedGraph, GroupPartition, ReweightedGraph
from utils.config import get_default_workers, get_max_walk_steps
from utils.errors import ConfigError, SamplerError

logger = logging.getLogger(__name__)

__all__ = [
    "ForestSample",
    "EstimatorSet",
    "sample_forest",
    "sample_forests",
    "estimate_aux",
    "required_samples",
    "root_histogram",
    "derive_seeds",
]

_SEED_LIMIT = 2**32

# root entries held in memory at once by root_histogram
HISTOGRAM_CHUNK_CELLS = 1 << 22


@njit(cache=True, nogil=True)
def _sample_one(indptr, indices, cumprob, alpha, max_steps, in_forest, nxt, root):
    n = indptr.shape[0] - 1
    for u in range(n):
        in_forest[u] = False
        nxt[u] = -1
    steps = 0
    for i in range(n):
        u = i
        while not in_forest[u]:
            steps += 1
            if steps > max_steps:
                return -1
            start = indptr[u]
            end = indptr[u + 1]
            if start == end or np.random.random() < alpha:
                in_forest[u] = True
                root[u] = u
                nxt[u] = -1
            else:
                x = np.random.random()
                lo = start
                hi = end - 1
                while lo < hi:
                    mid = (lo + hi) // 2
                    if cumprob[mid] > x:
                        hi = mid
                    else:
                        lo = mid + 1
                nxt[u] = indices[lo]
                u = nxt[u]
        # loop erasure: retrace from i along the last recorded Next pointers
        r = root[u]
        u = i
        while not in_forest[u]:
            in_forest[u] = True
            root[u] = r
            u = nxt[u]
    return steps


@njit(cache=True, nogil=True)
def _sample_batch(indptr, indices, cumprob, alpha, count, seed, max_steps, roots_out, parents_out):
    np.random.seed(seed)
    n = indptr.shape[0] - 1
    in_forest = np.zeros(n, dtype=np.bool_)
    nxt = np.empty(n, dtype=np.int64)
    root = np.empty(n, dtype=np.int64)
    total = 0
    for t in range(count):
        steps = _sample_one(indptr, indices, cumprob, alpha, max_steps, in_forest, nxt, root)
        if steps < 0:
            return -1
        total += steps
        roots_out[t, :] = root
        parents_out[t, :] = nxt
    return total


@njit(cache=True, nogil=True)
def _tally_batch(
    indptr, indices, cumprob, alpha, in_group, source, count, seed, max_steps,
    root_count, eta_count, src_count,
):
    np.random.seed(seed)
    n = indptr.shape[0] - 1
    in_forest = np.zeros(n, dtype=np.bool_)
    nxt = np.empty(n, dtype=np.int64)
    root = np.empty(n, dtype=np.int64)
    total = 0
    for t in range(count):
        steps = _sample_one(indptr, indices, cumprob, alpha, max_steps, in_forest, nxt, root)
        if steps < 0:
            return -1
        total += steps
        for j in range(n):
            s = root[j]
            root_count[s] += 1
            if in_group[s]:
                eta_count[j] += 1
        if source >= 0:
            src_count[root[source]] += 1
    return total


@dataclass
class ForestSample:
    """One sampled rooted forest: root[u] and parent[u] (-1 at roots)."""

    root: np.ndarray
    parent: np.ndarray

    def roots(self) -> np.ndarray:
        return np.flatnonzero(self.root == np.arange(self.root.shape[0]))

    def members(self, s: int) -> np.ndarray:
        """M(F, s): nodes whose tree is rooted at s."""
        return np.flatnonzero(self.root == s)

    def forest_edges(self) -> list[tuple[int, int]]:
        return [(u, int(p)) for u, p in enumerate(self.parent) if p >= 0]


@dataclass
class EstimatorSet:
    """Averaged estimators over psi forests.

    sigma[s] = sum_F |M(F, s)| / (n psi), eta[s] = #{F : root_F(s) in S} / psi,
    sigma_src[s] = #{F : root_F(v) = s} / psi.
    """

    sigma: np.ndarray
    eta: np.ndarray
    psi: int
    seed: int
    workers: int
    walk_steps: int
    sigma_src: np.ndarray | None = None
    source: int | None = None

    @property
    def mean_walk_steps(self) -> float:
        return self.walk_steps / self.psi

    def group_mass(self, group: GroupPartition) -> float:
        """Estimated pi(S) (sigma is the uniform-jump PageRank vector)."""
        return float(self.sigma[group.mask].sum())

    def source_group_mass(self, group: GroupPartition) -> float:
        """Estimated pi_v(S) for the source the estimators were built with."""
        if self.sigma_src is None:
            raise ConfigError("estimators were built without a source node")
        return float(self.sigma_src[group.mask].sum())


def _kernel_inputs(source: ReweightedGraph | DirectedGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray, DirectedGraph]:
    graph = source.graph if isinstance(source, ReweightedGraph) else source
    return graph.indptr, graph.indices, graph.transition_cumsum(), graph


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent 32-bit kernel seeds, one per worker, derived from a master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]


def _seed_from(rng: np.random.Generator | int | None) -> int:
    if rng is None:
        return int(np.random.SeedSequence().entropy % _SEED_LIMIT)
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, _SEED_LIMIT))
    return int(rng)


def sample_forests(
    gr: ReweightedGraph,
    count: int,
    seed: int,
    max_walk_steps: int | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Draw `count` forests.

    Returns:
        (roots, parents, total_walk_steps); roots and parents have shape (count, n)

    Raises:
        SamplerError: If one forest needs more than max_walk_steps steps
    """
    indptr, indices, cumprob, _ = _kernel_inputs(gr)
    max_steps = get_max_walk_steps() if max_walk_steps is None else int(max_walk_steps)
    roots = np.empty((count, gr.n), dtype=np.int64)
    parents = np.empty((count, gr.n), dtype=np.int64)
    kernel_seed = derive_seeds(seed, 1)[0]
    total = _sample_batch(indptr, indices, cumprob, gr.alpha, count, kernel_seed, max_steps, roots, parents)
    if total < 0:
        raise SamplerError(f"forest sample exceeded {max_steps} walk steps")
    return roots, parents, int(total)


def sample_forest(gr: ReweightedGraph, rng: np.random.Generator | int | None = None) -> ForestSample:
    """Draw one forest with probability proportional to the product of its G_r arc weights."""
    roots, parents, _ = sample_forests(gr, 1, _seed_from(rng))
    return ForestSample(root=roots[0], parent=parents[0])


def estimate_aux(
    gr: ReweightedGraph,
    psi: int,
    group: GroupPartition,
    source: int | None = None,
    rng: np.random.Generator | int | None = None,
    workers: int | None = None,
    max_walk_steps: int | None = None,
) -> EstimatorSet:
    """Estimate sigma, eta (and sigma_src) from psi sampled forests.

    Samples are split across `workers` threads, each with its own seed derived
    from the master seed. Tallies are integer counts, so the merged result is
    identical for a fixed seed and worker count.

    Raises:
        ConfigError: If psi < 1 or the source is not a node id
    """
    if psi < 1:
        raise ConfigError(f"psi must be at least 1, got {psi}")
    if source is not None and not 0 <= source < gr.n:
        raise ConfigError(f"source {source} is not a node id")
    workers = get_default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, psi)
    seed = _seed_from(rng)
    max_steps = get_max_walk_steps() if max_walk_steps is None else int(max_walk_steps)
    indptr, indices, cumprob, graph = _kernel_inputs(gr)
    n = graph.n
    in_group = group.mask
    kernel_source = -1 if source is None else int(source)

    chunks = [psi // workers + (1 if idx < psi % workers else 0) for idx in range(workers)]
    seeds = derive_seeds(seed, workers)

    def run_chunk(chunk: int, chunk_seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        root_count = np.zeros(n, dtype=np.int64)
        eta_count = np.zeros(n, dtype=np.int64)
        src_count = np.zeros(n, dtype=np.int64)
        steps = _tally_batch(
            indptr, indices, cumprob, gr.alpha, in_group, kernel_source, chunk, chunk_seed,
            max_steps, root_count, eta_count, src_count,
        )
        return root_count, eta_count, src_count, int(steps)

    if workers == 1:
        results = [run_chunk(chunks[0], seeds[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_chunk, chunks, seeds))

    if any(steps < 0 for *_, steps in results):
        raise SamplerError(f"forest sample exceeded {max_steps} walk steps")

    root_count = sum(result[0] for result in results)
    eta_count = sum(result[1] for result in results)
    src_count = sum(result[2] for result in results)
    walk_steps = sum(result[3] for result in results)
    logger.debug(f"Sampled {psi} forests on n={n} with {workers} worker(s), {walk_steps} walk steps")

    return EstimatorSet(
        sigma=root_count / (n * psi),
        eta=eta_count / psi,
        psi=psi,
        seed=seed,
        workers=workers,
        walk_steps=walk_steps,
        sigma_src=src_count / psi if source is not None else None,
        source=source,
    )


def required_samples(epsilon: float, delta: float) -> int:
    """Hoeffding sample count ceil(ln(2 / delta) / (2 epsilon^2)).

    Raises:
        ConfigError: If epsilon <= 0 or delta is outside (0, 1)
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    value = math.log(2.0 / delta) / (2.0 * epsilon * epsilon)
    # absorb float noise when the bound is an exact integer
    return max(1, math.ceil(value * (1.0 - 1e-12)))


def _merge_pair_counts(
    keys: np.ndarray, counts: np.ndarray, new_keys: np.ndarray, new_counts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    merged, inverse = np.unique(np.concatenate([keys, new_keys]), return_inverse=True)
    totals = np.zeros(merged.shape[0], dtype=np.int64)
    np.add.at(totals, inverse, np.concatenate([counts, new_counts]))
    return merged, totals


def root_histogram(gr: ReweightedGraph, count: int, seed: int) -> list[tuple[str, str, float]]:
    """Empirical P(root(u) = s) over `count` forests, as (node, root, frequency) rows.

    Forests are drawn in chunks of at most HISTOGRAM_CHUNK_CELLS root entries and
    reduced to (node, root) pair counts, so memory follows the number of distinct
    pairs rather than count * n.
    """
    if count < 1:
        raise ConfigError(f"sample count must be at least 1, got {count}")
    n = gr.n
    chunk = max(1, HISTOGRAM_CHUNK_CELLS // n)
    sizes = [min(chunk, count - start) for start in range(0, count, chunk)]
    indptr, indices, cumprob, _ = _kernel_inputs(gr)
    max_steps = get_max_walk_steps()
    roots = np.empty((chunk, n), dtype=np.int64)
    parents = np.empty((chunk, n), dtype=np.int64)
    node_ids = np.arange(n, dtype=np.int64)
    keys = np.empty(0, dtype=np.int64)
    counts = np.empty(0, dtype=np.int64)

    for size, chunk_seed in zip(sizes, derive_seeds(seed, len(sizes))):
        total = _sample_batch(
            indptr, indices, cumprob, gr.alpha, size, chunk_seed, max_steps, roots[:size], parents[:size]
        )
        if total < 0:
            raise SamplerError(f"forest sample exceeded {max_steps} walk steps")
        chunk_keys, chunk_counts = np.unique(node_ids * n + roots[:size], return_counts=True)
        keys, counts = _merge_pair_counts(keys, counts, chunk_keys, chunk_counts.astype(np.int64))

    logger.debug(f"Root histogram over {count} forests in {len(sizes)} chunk(s): {keys.shape[0]} pairs")
    labels = gr.graph.labels
    return [
        (labels[int(key // n)], labels[int(key % n)], float(c / count))
        for key, c in zip(keys.tolist(), counts.tolist())
    ]
