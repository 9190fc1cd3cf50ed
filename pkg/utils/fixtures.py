#!/usr/bin/env python3
"""Small graph generators shared by the test suite and the sample experiments."""

import itertools

import numpy as np

from tools.graph import DirectedGraph, GroupPartition

__all__ = [
    "two_cycle",
    "three_cycle",
    "circulant",
    "random_digraph",
    "random_out_regular",
    "books_surrogate",
    "enumerate_forests",
]


def two_cycle() -> DirectedGraph:
    return DirectedGraph.from_arcs(2, [(0, 1), (1, 0)])


def three_cycle() -> DirectedGraph:
    """Directed cycle 0 -> 1 -> 2 -> 0."""
    return DirectedGraph.from_arcs(3, [(0, 1), (1, 2), (2, 0)])


def circulant(n: int, offsets: tuple[int, ...]) -> DirectedGraph:
    """Arcs i -> i + o (mod n) for every offset o; shifting ids by one is an automorphism."""
    return DirectedGraph.from_arcs(n, [(i, (i + o) % n) for i in range(n) for o in offsets])


def random_digraph(
    n: int, p: float, rng: np.random.Generator, weighted: bool = False
) -> DirectedGraph:
    """Erdos-Renyi digraph without self-loops; nodes left without out-arcs get one."""
    arcs = {}
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < p:
                arcs[(i, j)] = float(rng.uniform(0.5, 2.0)) if weighted else 1.0
        if not any(src == i for src, _ in arcs):
            j = int(rng.integers(n - 1))
            j = j + 1 if j >= i else j
            arcs[(i, j)] = float(rng.uniform(0.5, 2.0)) if weighted else 1.0
    return DirectedGraph.from_arcs(n, [(i, j, w) for (i, j), w in arcs.items()])


def random_out_regular(n: int, d: int, rng: np.random.Generator) -> DirectedGraph:
    """Every node gets d distinct uniformly random out-neighbors."""
    indptr = np.arange(n + 1, dtype=np.int64) * d
    indices = np.empty(n * d, dtype=np.int64)
    for i in range(n):
        targets = rng.choice(n - 1, size=d, replace=False)
        targets[targets >= i] += 1
        indices[i * d:(i + 1) * d] = np.sort(targets)
    return DirectedGraph([str(i) for i in range(n)], indptr, indices, np.ones(n * d))


def books_surrogate(seed: int = 0) -> tuple[DirectedGraph, GroupPartition]:
    """Symmetric two-block graph with 92 nodes and a sparser 49-node group S.

    Nodes 0..48 form S; S is less connected than its complement, so the
    graph starts PageRank-unfair to S.
    """
    rng = np.random.default_rng(seed)
    n, size_s = 92, 49
    in_s = np.arange(n) < size_s
    edges = set()
    for i, j in itertools.combinations(range(n), 2):
        if in_s[i] and in_s[j]:
            p = 0.09
        elif not in_s[i] and not in_s[j]:
            p = 0.2
        else:
            p = 0.04
        if rng.random() < p:
            edges.add((i, j))
    for i in range(n):
        if not any(i in edge for edge in edges):
            j = int(rng.integers(n - 1))
            j = j + 1 if j >= i else j
            edges.add((min(i, j), max(i, j)))
    arcs = [(i, j) for i, j in edges] + [(j, i) for i, j in edges]
    graph = DirectedGraph.from_arcs(n, arcs)
    return graph, GroupPartition.from_members(range(size_s), n)


def enumerate_forests(g: DirectedGraph, alpha: float) -> dict[tuple[int, ...], float]:
    """Exact probabilities of every rooted spanning forest of G_r.

    A forest is encoded as its parent tuple (-1 at roots). Its weight is the
    product of the G_r arc weights it uses; roots contribute weight 1.
    Exponential in n, for n <= 5 only.
    """
    scale = (1.0 - alpha) / alpha
    choices = []
    for u in range(g.n):
        options = [(-1, 1.0)]
        for j in g.neighbors(u).tolist():
            options.append((j, scale * g.transition_prob(u, j)))
        choices.append(options)

    weights: dict[tuple[int, ...], float] = {}
    for combo in itertools.product(*choices):
        parent = tuple(p for p, _ in combo)
        if _has_cycle(parent):
            continue
        weights[parent] = float(np.prod([w for _, w in combo]))
    total = sum(weights.values())
    return {parent: w / total for parent, w in weights.items()}


def _has_cycle(parent: tuple[int, ...]) -> bool:
    for start in range(len(parent)):
        seen = set()
        u = start
        while u != -1:
            if u in seen:
                return True
            seen.add(u)
            u = parent[u]
    return False
