#!/usr/bin/env python3
"""Exact PageRank algebra on the dense matrix Pi = alpha (I - (1 - alpha) P)^-1.

Row i of Pi is the personalized PageRank vector of node i, so every quantity
the greedy rewiring needs (PageRank, group masses, the Sherman-Morrison
denominator tau and the closed-form gains) is read off Pi directly.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from tools.graph import DirectedGraph, GroupPartition, ReweightedGraph, Rewiring
from utils.common import validate_alpha
from utils.config import get_dense_cap
from utils.errors import AlgorithmError, ConfigError, DenseCapError, FairRewireError
from utils.file_utils import write_csv

logger = logging.getLogger(__name__)

__all__ = [
    "PiMatrix",
    "AuxVectors",
    "resolve_jump",
    "compute_pi",
    "forest_matrix",
    "pagerank_vector",
    "group_mass",
    "normalized_ppr_mass",
    "aux_vectors",
    "tau",
    "gain_pr",
    "gain_ppr",
    "sherman_morrison_update",
    "row_sum_drift",
    "solve_pagerank",
    "exact_group_mass",
    "solve_group_proximity",
    "expected_walk_steps",
    "dump_pi_csv",
]

# rows per block in the in-place rank-one update
_UPDATE_BLOCK = 2048


@dataclass
class PiMatrix:
    matrix: np.ndarray
    alpha: float
    jump: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def copy(self) -> "PiMatrix":
        return PiMatrix(self.matrix.copy(), self.alpha, self.jump.copy())


@dataclass
class AuxVectors:
    """sigma = v^T Pi, eta = Pi 1_S and, for a source node, sigma_src = Pi[source, :]."""

    sigma: np.ndarray
    eta: np.ndarray
    group: GroupPartition
    sigma_src: np.ndarray | None = None
    source: int | None = None


def resolve_jump(jump: np.ndarray | int | None, n: int) -> np.ndarray:
    """Turn None (uniform), a node id (e_v) or an explicit vector into a jump vector.

    Raises:
        ConfigError: If the vector is not a probability vector of length n
    """
    if jump is None:
        return np.full(n, 1.0 / n)
    if isinstance(jump, (int, np.integer)):
        if not 0 <= jump < n:
            raise ConfigError(f"jump node {jump} is not a node id")
        vector = np.zeros(n)
        vector[int(jump)] = 1.0
        return vector
    vector = np.asarray(jump, dtype=np.float64)
    if vector.shape != (n,) or np.any(vector < 0) or abs(vector.sum() - 1.0) > 1e-9:
        raise ConfigError("jump vector must be a length-n probability vector")
    return vector


def compute_pi(
    g: DirectedGraph,
    alpha: float,
    jump: np.ndarray | int | None = None,
    dense_cap: int | None = None,
) -> PiMatrix:
    """Compute Pi by an LU solve of (I - (1 - alpha) P) X = alpha I.

    Args:
        g: Dangling-free graph
        alpha: Restart probability in (0, 1)
        jump: Jump vector (default uniform)
        dense_cap: Largest n accepted (default from config)

    Returns:
        The PiMatrix

    Raises:
        DenseCapError: If g.n exceeds the dense cap
    """
    alpha = validate_alpha(alpha)
    cap = get_dense_cap() if dense_cap is None else int(dense_cap)
    if g.n > cap:
        raise DenseCapError(
            f"n={g.n} exceeds the dense cap of {cap} nodes; use the fast (sampling) algorithms "
            "or raise the cap with --dense-cap"
        )
    system = np.eye(g.n) - (1.0 - alpha) * g.dense_transition()
    try:
        lu_piv = scipy.linalg.lu_factor(system, check_finite=False)
        matrix = scipy.linalg.lu_solve(lu_piv, alpha * np.eye(g.n), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise FairRewireError(f"dense solve for Pi failed: {e}") from e
    logger.debug(f"Computed Pi for n={g.n}, alpha={alpha}")
    return PiMatrix(matrix=matrix, alpha=alpha, jump=resolve_jump(jump, g.n))


def forest_matrix(gr: ReweightedGraph) -> np.ndarray:
    """Forest matrix (I + L_r)^-1 of the reweighted graph; equals Pi entrywise."""
    system = np.eye(gr.n) + gr.laplacian()
    return scipy.linalg.solve(system, np.eye(gr.n))


def pagerank_vector(pi: PiMatrix) -> np.ndarray:
    return pi.jump @ pi.matrix


def group_mass(vector: np.ndarray, group: GroupPartition) -> float:
    """pi(S): total mass that `vector` puts on the group."""
    return float(vector[group.mask].sum())


def normalized_ppr_mass(pi: PiMatrix, v: int, group: GroupPartition) -> float:
    """Organic PPR mass (pi_v(S) - alpha 1[v in S]) / (1 - alpha)."""
    raw = group_mass(pi.matrix[v], group)
    indicator = 1.0 if v in group else 0.0
    return (raw - pi.alpha * indicator) / (1.0 - pi.alpha)


def aux_vectors(pi: PiMatrix, group: GroupPartition, source: int | None = None) -> AuxVectors:
    eta = pi.matrix[:, group.mask].sum(axis=1)
    sigma_src = pi.matrix[source].copy() if source is not None else None
    return AuxVectors(
        sigma=pagerank_vector(pi),
        eta=eta,
        group=group,
        sigma_src=sigma_src,
        source=source,
    )


def tau(pi: PiMatrix, g: DirectedGraph, r: Rewiring) -> float:
    """Sherman-Morrison denominator alpha + (1 - alpha) p_ij (Pi_ji - Pi_ki); always positive."""
    p_ij = g.transition_prob(r.i, r.j)
    value = pi.alpha + (1.0 - pi.alpha) * p_ij * (pi.matrix[r.j, r.i] - pi.matrix[r.k, r.i])
    if not value > 0.0:
        raise AlgorithmError(f"tau={value} is not positive for rewiring {r.as_tuple()}")
    return float(value)


def _gain(weight_i: float, aux: AuxVectors, pi: PiMatrix, g: DirectedGraph, r: Rewiring) -> float:
    p_ij = g.transition_prob(r.i, r.j)
    numerator = (1.0 - pi.alpha) * p_ij * weight_i * (aux.eta[r.k] - aux.eta[r.j])
    return float(numerator / tau(pi, g, r))


def gain_pr(aux: AuxVectors, pi: PiMatrix, g: DirectedGraph, r: Rewiring) -> float:
    """Exact change of pi(S) caused by r."""
    return _gain(aux.sigma[r.i], aux, pi, g, r)


def gain_ppr(aux: AuxVectors, pi: PiMatrix, g: DirectedGraph, r: Rewiring) -> float:
    """Exact change of pi_v(S) caused by r, for the source v stored in aux."""
    if aux.sigma_src is None:
        raise ConfigError("gain_ppr needs aux vectors computed with a source node")
    return _gain(aux.sigma_src[r.i], aux, pi, g, r)


def sherman_morrison_update(
    pi: PiMatrix, g: DirectedGraph, r: Rewiring, in_place: bool = False
) -> PiMatrix:
    """Rank-one update of Pi for rewiring r, in O(n^2).

    Args:
        pi: Pi of the graph before the rewiring
        g: The graph before the rewiring (p_ij is read from it)
        r: The rewiring
        in_place: Overwrite pi.matrix instead of returning a copy

    Returns:
        Pi of the rewired graph
    """
    p_ij = g.transition_prob(r.i, r.j)
    coefficient = (1.0 - pi.alpha) / tau(pi, g, r)
    column = coefficient * p_ij * pi.matrix[:, r.i]
    row_delta = pi.matrix[r.j] - pi.matrix[r.k]
    target = pi if in_place else pi.copy()
    for start in range(0, pi.n, _UPDATE_BLOCK):
        end = min(start + _UPDATE_BLOCK, pi.n)
        target.matrix[start:end] -= np.outer(column[start:end], row_delta)
    return target


def row_sum_drift(pi: PiMatrix) -> float:
    return float(np.max(np.abs(pi.matrix.sum(axis=1) - 1.0)))


def _sparse_transition(g: DirectedGraph) -> scipy.sparse.csr_matrix:
    return scipy.sparse.csr_matrix((g.transition_probs(), g.indices, g.indptr), shape=(g.n, g.n))


def solve_pagerank(g: DirectedGraph, alpha: float, jump: np.ndarray | int | None = None) -> np.ndarray:
    """PageRank vector from a sparse direct solve of (I - (1 - alpha) P^T) pi = alpha v."""
    alpha = validate_alpha(alpha)
    P = _sparse_transition(g)
    system = (scipy.sparse.identity(g.n, format="csc") - (1.0 - alpha) * P.T).tocsc()
    return scipy.sparse.linalg.spsolve(system, alpha * resolve_jump(jump, g.n))


def exact_group_mass(
    g: DirectedGraph, group: GroupPartition, alpha: float, source: int | None = None
) -> float:
    """pi(S), or pi_v(S) when a source is given, without forming Pi."""
    return group_mass(solve_pagerank(g, alpha, source), group)


def solve_group_proximity(g: DirectedGraph, group: GroupPartition, alpha: float) -> np.ndarray:
    """eta = Pi 1_S from a sparse direct solve of (I - (1 - alpha) P) eta = alpha 1_S."""
    alpha = validate_alpha(alpha)
    P = _sparse_transition(g)
    system = (scipy.sparse.identity(g.n, format="csr") - (1.0 - alpha) * P).tocsc()
    return scipy.sparse.linalg.spsolve(system, alpha * group.mask.astype(np.float64))


def expected_walk_steps(pi: PiMatrix) -> float:
    """Expected random-walk steps of one forest sample: trace(Pi) / alpha <= n / alpha."""
    return float(np.trace(pi.matrix) / pi.alpha)


def dump_pi_csv(pi: PiMatrix, aux: AuxVectors, path: str) -> str:
    """Write Pi with sigma/eta (and sigma_src) columns appended, one row per node."""
    header = [f"pi_{j}" for j in range(pi.n)] + ["sigma", "eta"]
    if aux.sigma_src is not None:
        header.append("sigma_src")
    rows = []
    for i in range(pi.n):
        row = [repr(float(x)) for x in pi.matrix[i]] + [repr(float(aux.sigma[i])), repr(float(aux.eta[i]))]
        if aux.sigma_src is not None:
            row.append(repr(float(aux.sigma_src[i])))
        rows.append(row)
    return write_csv(path, ["node"] + header, ([i] + row for i, row in enumerate(rows)))
