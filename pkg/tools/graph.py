#!/usr/bin/env python3

import logging
import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from utils.common import validate_alpha
from utils.errors import ConfigError, DataError, ParseError

logger = logging.getLogger(__name__)

__all__ = [
    "DirectedGraph",
    "Rewiring",
    "GroupPartition",
    "ReweightedGraph",
    "load_graph",
    "load_group",
    "serialize_graph",
    "apply_rewiring",
    "legal_rewirings",
    "legal_target_counts",
    "build_reweighted",
]

_INT_LABEL = re.compile(r"^[+-]?\d+$")


@dataclass(frozen=True, order=True)
class Rewiring:
    """Replace arc (i, j) by arc (i, k). Ordering is lexicographic on (i, j, k)."""

    i: int
    j: int
    k: int

    def reverse(self) -> "Rewiring":
        return Rewiring(self.i, self.k, self.j)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.i, self.j, self.k)


class DirectedGraph:
    """Weighted digraph stored as CSR out-adjacency over dense ids 0..n-1.

    Row i of (indptr, indices, weights) lists the out-arcs of node i. Rewiring
    swaps one target inside a row, so the CSR shape never changes and the
    out-degree cache stays valid.
    """

    def __init__(
        self,
        labels: Sequence[str],
        indptr: np.ndarray,
        indices: np.ndarray,
        weights: np.ndarray,
    ):
        self.labels = [str(label) for label in labels]
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.indptr.shape != (len(self.labels) + 1,):
            raise DataError(
                f"indptr must have n+1={len(self.labels) + 1} entries, got {self.indptr.shape[0]}"
            )
        if self.indices.shape != self.weights.shape or self.indptr[-1] != self.indices.shape[0]:
            raise DataError("indices, weights and indptr disagree on the arc count")
        self.label_index = {label: idx for idx, label in enumerate(self.labels)}
        if len(self.label_index) != len(self.labels):
            raise DataError("node labels must be unique")
        self.out_degree = np.bincount(self.arc_sources(), weights=self.weights, minlength=self.n)

    @classmethod
    def from_arcs(
        cls,
        n_or_labels: int | Sequence[str],
        arcs: Iterable[tuple[int, int] | tuple[int, int, float]],
        allow_dangling: bool = False,
    ) -> "DirectedGraph":
        """Build a validated graph from (src, dst[, weight]) tuples over dense ids.

        Args:
            n_or_labels: Node count, or the list of labels (its length is n)
            arcs: Arcs as dense-id tuples; weight defaults to 1
            allow_dangling: Skip the out-degree > 0 check (test fixtures only)

        Returns:
            A DirectedGraph with rows in ascending target order
        """
        if isinstance(n_or_labels, int):
            labels = [str(i) for i in range(n_or_labels)]
        else:
            labels = list(n_or_labels)
        n = len(labels)
        rows: list[dict[int, float]] = [{} for _ in range(n)]
        for arc in arcs:
            src, dst = int(arc[0]), int(arc[1])
            weight = float(arc[2]) if len(arc) > 2 else 1.0
            if not (0 <= src < n and 0 <= dst < n):
                raise DataError(f"arc ({src}, {dst}) references a node outside 0..{n - 1}")
            _check_arc(labels[src], labels[dst], src == dst, weight)
            if dst in rows[src]:
                raise DataError(f"duplicate arc ({labels[src]}, {labels[dst]})")
            rows[src][dst] = weight
        graph = cls._from_rows(labels, rows)
        if not allow_dangling:
            graph.check_dangling()
        return graph

    @classmethod
    def _from_rows(cls, labels: Sequence[str], rows: Sequence[dict[int, float]]) -> "DirectedGraph":
        counts = np.fromiter((len(row) for row in rows), dtype=np.int64, count=len(rows))
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=np.int64)
        weights = np.empty(indptr[-1], dtype=np.float64)
        for src, row in enumerate(rows):
            start = indptr[src]
            for offset, dst in enumerate(sorted(row)):
                indices[start + offset] = dst
                weights[start + offset] = row[dst]
        return cls(labels, indptr, indices, weights)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def m(self) -> int:
        return int(self.indices.shape[0])

    @property
    def d_max(self) -> float:
        """Largest weighted out-degree."""
        return float(self.out_degree.max()) if self.n else 0.0

    @property
    def out_arc_counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def max_out_arcs(self) -> int:
        """Largest out-neighbor count (equals d_max on unweighted graphs)."""
        return int(self.out_arc_counts.max()) if self.n else 0

    def arc_sources(self) -> np.ndarray:
        """Source id of every arc, aligned with indices."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.out_arc_counts)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def _arc_position(self, i: int, j: int) -> int:
        start, end = self.indptr[i], self.indptr[i + 1]
        hits = np.flatnonzero(self.indices[start:end] == j)
        return int(start + hits[0]) if hits.size else -1

    def has_arc(self, i: int, j: int) -> bool:
        return self._arc_position(i, j) >= 0

    def arc_weight(self, i: int, j: int) -> float:
        pos = self._arc_position(i, j)
        if pos < 0:
            raise DataError(f"arc ({i}, {j}) is not in the graph")
        return float(self.weights[pos])

    def transition_prob(self, i: int, j: int) -> float:
        """p_ij = w(i, j) / d_i."""
        return self.arc_weight(i, j) / float(self.out_degree[i])

    def arcs(self) -> Iterator[tuple[int, int, float]]:
        for i in range(self.n):
            for pos in range(self.indptr[i], self.indptr[i + 1]):
                yield i, int(self.indices[pos]), float(self.weights[pos])

    def transition_probs(self) -> np.ndarray:
        """p_ij for every arc, aligned with indices."""
        return self.weights / self.out_degree[self.arc_sources()]

    def transition_cumsum(self) -> np.ndarray:
        """Row-wise cumulative transition probabilities, aligned with indices."""
        probs = self.transition_probs()
        running = np.cumsum(probs)
        offsets = np.concatenate(([0.0], running))[self.indptr[:-1]]
        return running - np.repeat(offsets, self.out_arc_counts)

    def dense_transition(self) -> np.ndarray:
        """Dense row-stochastic P = D^-1 A."""
        P = np.zeros((self.n, self.n))
        P[self.arc_sources(), self.indices] = self.transition_probs()
        return P

    def copy(self) -> "DirectedGraph":
        return DirectedGraph(self.labels, self.indptr.copy(), self.indices.copy(), self.weights.copy())

    def check_dangling(self) -> None:
        dangling = np.flatnonzero(self.out_arc_counts == 0)
        if dangling.size:
            names = ", ".join(self.labels[i] for i in dangling[:5])
            more = f" (and {dangling.size - 5} more)" if dangling.size > 5 else ""
            raise DataError(f"node {names}{more} has out-degree 0 (dangling nodes are not supported)")

    def check_rewiring(self, r: Rewiring) -> int:
        """Validate r against this graph and return the position of arc (i, j).

        Raises:
            DataError: Naming the first violated condition
        """
        for name, node in (("i", r.i), ("j", r.j), ("k", r.k)):
            if not 0 <= node < self.n:
                raise DataError(f"rewiring {r.as_tuple()}: {name}={node} is not a node id")
        if r.i == r.k:
            raise DataError(f"rewiring {r.as_tuple()}: i == k would create a self-loop")
        if r.j == r.k:
            raise DataError(f"rewiring {r.as_tuple()}: j == k leaves the graph unchanged")
        pos = self._arc_position(r.i, r.j)
        if pos < 0:
            raise DataError(f"rewiring {r.as_tuple()}: arc (i, j) is not in E")
        if self.has_arc(r.i, r.k):
            raise DataError(f"rewiring {r.as_tuple()}: arc (i, k) is already in E")
        return pos

    def rewire_in_place(self, r: Rewiring) -> None:
        """Apply r to this graph; the new arc inherits the removed arc's weight."""
        pos = self.check_rewiring(r)
        self.indices[pos] = r.k
        logger.debug(f"Rewired {self.labels[r.i]}: {self.labels[r.j]} -> {self.labels[r.k]}")

    def label_of(self, node: int) -> str:
        return self.labels[node]

    def index_of(self, label: str) -> int:
        try:
            return self.label_index[str(label)]
        except KeyError:
            raise DataError(f"unknown node label {label!r}") from None

    def __repr__(self) -> str:
        return f"DirectedGraph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class GroupPartition:
    """Disadvantaged group S with its fairness threshold phi (default r(S))."""

    members: frozenset[int]
    n: int
    phi: float | None = None

    def __post_init__(self):
        if not self.members:
            raise DataError("group S must not be empty")
        if len(self.members) >= self.n:
            raise DataError("group S must be a strict subset of V")
        if any(not 0 <= s < self.n for s in self.members):
            raise DataError(f"group S references nodes outside 0..{self.n - 1}")
        if self.phi is None:
            object.__setattr__(self, "phi", self.ratio)
        if not 0.0 < self.phi <= 1.0:
            raise ConfigError(f"phi must lie in (0, 1], got {self.phi}")

    @classmethod
    def from_members(cls, members: Iterable[int], n: int, phi: float | None = None) -> "GroupPartition":
        return cls(frozenset(int(s) for s in members), n, None if phi is None else float(phi))

    @property
    def ratio(self) -> float:
        """r(S) = |S| / n."""
        return len(self.members) / self.n

    @property
    def mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[sorted(self.members)] = True
        return mask

    @property
    def complement(self) -> frozenset[int]:
        return frozenset(range(self.n)) - self.members

    def __contains__(self, node: int) -> bool:
        return node in self.members


@dataclass
class ReweightedGraph:
    """G_r: the topology of `graph` with w_r(i, j) = w(i, j) / ((alpha / (1 - alpha)) d_i)."""

    graph: DirectedGraph
    alpha: float
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.graph.n

    def out_weight_sums(self) -> np.ndarray:
        sums = np.zeros(self.n)
        np.add.at(sums, self.graph.arc_sources(), self.weights)
        return sums

    def laplacian(self) -> np.ndarray:
        """Dense out-degree Laplacian L_r = D_r - A_r."""
        A = np.zeros((self.n, self.n))
        A[self.graph.arc_sources(), self.graph.indices] = self.weights
        return np.diag(A.sum(axis=1)) - A


def build_reweighted(g: DirectedGraph, alpha: float) -> ReweightedGraph:
    """Build G_r, whose forest matrix equals alpha (I - (1 - alpha) P)^-1.

    Raises:
        ConfigError: If alpha is outside (0, 1)
    """
    alpha = validate_alpha(alpha)
    scale = (1.0 - alpha) / alpha
    degrees = g.out_degree[g.arc_sources()]
    return ReweightedGraph(graph=g, alpha=alpha, weights=g.weights * scale / degrees)


def apply_rewiring(g: DirectedGraph, r: Rewiring) -> DirectedGraph:
    """Return a new graph with r applied; g is left untouched."""
    rewired = g.copy()
    rewired.rewire_in_place(r)
    return rewired


def legal_target_counts(g: DirectedGraph) -> np.ndarray:
    """Number of legal k for each source i: n - 1 - |N(i)|."""
    return g.n - 1 - g.out_arc_counts


def legal_rewirings(g: DirectedGraph) -> Iterator[Rewiring]:
    """Yield every legal rewiring in lexicographic (i, j, k) order."""
    for i in range(g.n):
        neighbors = np.sort(g.neighbors(i))
        if not neighbors.size:
            continue
        blocked = set(neighbors.tolist())
        blocked.add(i)
        targets = [k for k in range(g.n) if k not in blocked]
        for j in neighbors.tolist():
            for k in targets:
                yield Rewiring(i, j, k)


def _check_arc(src_label: str, dst_label: str, is_loop: bool, weight: float) -> None:
    if is_loop:
        raise DataError(f"self-loop on node {src_label}")
    if not math.isfinite(weight) or weight <= 0:
        raise DataError(f"arc ({src_label}, {dst_label}) has non-positive weight {weight}")


def _label_order(labels: Iterable[str]) -> list[str]:
    """Integer labels sort numerically, text order breaking ties like "01" and "1"; others sort as text."""
    labels = list(labels)
    if all(_INT_LABEL.match(label) for label in labels):
        return sorted(labels, key=lambda label: (int(label), label))
    return sorted(labels)


def load_graph(edge_list_text: str, symmetrize: bool = False) -> DirectedGraph:
    """Parse an edge list into a validated DirectedGraph.

    Args:
        edge_list_text: Lines of "src dst [weight]"; '#' starts a comment
        symmetrize: Treat each line as an undirected edge and add both arcs

    Returns:
        The graph, with labels mapped to dense ids in sorted order

    Raises:
        ParseError: On a malformed line (with its line number)
        DataError: On self-loops, duplicate arcs, bad weights or dangling nodes
    """
    arcs: dict[tuple[str, str], tuple[float, bool]] = {}
    seen: set[str] = set()

    def add_arc(src: str, dst: str, weight: float, explicit: bool, line_number: int) -> None:
        previous = arcs.get((src, dst))
        if previous is None:
            arcs[(src, dst)] = (weight, explicit)
            return
        if previous[1] and explicit:
            raise DataError(f"line {line_number}: duplicate arc ({src}, {dst})")
        if previous[0] != weight:
            raise DataError(
                f"line {line_number}: arc ({src}, {dst}) given weights {previous[0]} and {weight}"
            )
        arcs[(src, dst)] = (weight, previous[1] or explicit)

    for line_number, raw_line in enumerate(edge_list_text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'src dst [weight]', got {raw_line.strip()!r}", line_number)
        src, dst = parts[0], parts[1]
        try:
            weight = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise ParseError(f"weight {parts[2]!r} is not a number", line_number) from None
        if src == dst:
            raise DataError(f"line {line_number}: self-loop on node {src}")
        _check_arc(src, dst, False, weight)
        seen.update((src, dst))
        add_arc(src, dst, weight, True, line_number)
        if symmetrize:
            add_arc(dst, src, weight, False, line_number)

    if not seen:
        raise DataError("edge list contains no arcs")

    labels = _label_order(seen)
    index = {label: idx for idx, label in enumerate(labels)}
    rows: list[dict[int, float]] = [{} for _ in labels]
    for (src, dst), (weight, _) in arcs.items():
        rows[index[src]][index[dst]] = weight

    graph = DirectedGraph._from_rows(labels, rows)
    graph.check_dangling()
    logger.info(f"Loaded graph with n={graph.n}, m={graph.m}")
    return graph


def load_group(text: str, graph: DirectedGraph, phi: float | None = None) -> GroupPartition:
    """Parse a group file (one node label per line, '#' comments) into S."""
    members: set[int] = set()
    for raw_line in text.splitlines():
        label = raw_line.split("#", 1)[0].strip()
        if label:
            members.add(graph.index_of(label))
    return GroupPartition.from_members(members, graph.n, phi)


def serialize_graph(g: DirectedGraph) -> str:
    """Render g as an edge list that load_graph parses back to the same ids."""
    lines = [f"{g.labels[i]} {g.labels[j]} {w!r}" for i, j, w in g.arcs()]
    return "\n".join(lines) + "\n"
