#!/usr/bin/env python3
import os
import sys
import tempfile
import unittest

import networkx as nx
import numpy as np

# Add the parent directory to sys.path to import the project modules
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from tools.dense_pagerank import (
    aux_vectors,
    compute_pi,
    dump_pi_csv,
    exact_group_mass,
    expected_walk_steps,
    forest_matrix,
    gain_ppr,
    gain_pr,
    group_mass,
    normalized_ppr_mass,
    pagerank_vector,
    resolve_jump,
    row_sum_drift,
    sherman_morrison_update,
    solve_group_proximity,
    solve_pagerank,
    tau,
)
from tools.graph import GroupPartition, Rewiring, apply_rewiring, build_reweighted, legal_rewirings
from utils.errors import ConfigError, DenseCapError
from utils.fixtures import random_digraph, three_cycle, two_cycle


def _random_group(n, rng):
    size = int(rng.integers(1, n))
    return GroupPartition.from_members(rng.choice(n, size=size, replace=False), n)


class TestPiMatrix(unittest.TestCase):
    """Pi = alpha (I - (1 - alpha) P)^-1 and the quantities read off it."""

    def test_two_cycle_values(self):
        pi = compute_pi(two_cycle(), 0.15)
        expected = np.array([[0.5405405, 0.4594595], [0.4594595, 0.5405405]])
        np.testing.assert_allclose(pi.matrix, expected, atol=1e-7)

    def test_three_cycle_pagerank_is_uniform(self):
        pi = compute_pi(three_cycle(), 0.15)
        np.testing.assert_allclose(pagerank_vector(pi), np.full(3, 1 / 3), atol=1e-12)
        self.assertAlmostEqual(pi.matrix[1, 0], 0.28086, places=5)

    def test_rows_are_probability_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            pi = compute_pi(random_digraph(15, 0.3, rng, weighted=True), 0.2)
            self.assertLess(row_sum_drift(pi), 1e-12)
            self.assertTrue(np.all(pi.matrix >= -1e-15))

    def test_alpha_close_to_one(self):
        pi = compute_pi(three_cycle(), 0.999999)
        np.testing.assert_allclose(pi.matrix, np.eye(3), atol=1e-5)

    def test_dense_cap(self):
        with self.assertRaises(DenseCapError) as context:
            compute_pi(three_cycle(), 0.15, dense_cap=2)
        self.assertIn("dense cap", str(context.exception))

    def test_bad_alpha(self):
        with self.assertRaises(ConfigError):
            compute_pi(three_cycle(), 1.2)

    def test_resolve_jump(self):
        np.testing.assert_array_equal(resolve_jump(1, 3), [0.0, 1.0, 0.0])
        np.testing.assert_allclose(resolve_jump(None, 4), np.full(4, 0.25))
        with self.assertRaises(ConfigError):
            resolve_jump(np.array([0.5, 0.6, 0.0]), 3)
        with self.assertRaises(ConfigError):
            resolve_jump(5, 3)

    def test_forest_matrix_identity(self):
        rng = np.random.default_rng(42)
        for trial in range(200):
            alpha = [0.05, 0.15, 0.5, 0.85][trial % 4]
            n = int(rng.integers(2, 51))
            g = random_digraph(n, float(rng.uniform(0.05, 0.5)), rng, weighted=trial % 2 == 1)
            difference = np.abs(compute_pi(g, alpha).matrix - forest_matrix(build_reweighted(g, alpha)))
            self.assertLess(difference.max(), 1e-9)

    def test_networkx_pagerank_oracle(self):
        rng = np.random.default_rng(5)
        for weighted in (False, True):
            g = random_digraph(25, 0.2, rng, weighted=weighted)
            nxg = nx.DiGraph()
            nxg.add_nodes_from(range(g.n))
            nxg.add_weighted_edges_from(g.arcs())
            oracle = nx.pagerank(nxg, alpha=0.85, tol=1e-13, max_iter=10000, weight="weight")
            expected = np.array([oracle[i] for i in range(g.n)])
            np.testing.assert_allclose(pagerank_vector(compute_pi(g, 0.15)), expected, atol=1e-9)
            np.testing.assert_allclose(solve_pagerank(g, 0.15), expected, atol=1e-9)

    def test_group_masses(self):
        g = random_digraph(12, 0.3, np.random.default_rng(9))
        group = GroupPartition.from_members([0, 3, 7], g.n)
        pi = compute_pi(g, 0.15)
        aux = aux_vectors(pi, group, source=4)
        self.assertAlmostEqual(group_mass(aux.sigma, group), exact_group_mass(g, group, 0.15), places=12)
        self.assertAlmostEqual(
            group_mass(pi.matrix[4], group), exact_group_mass(g, group, 0.15, source=4), places=12
        )
        np.testing.assert_allclose(solve_group_proximity(g, group, 0.15), aux.eta, atol=1e-12)
        np.testing.assert_allclose(aux.sigma_src, pi.matrix[4])

    def test_complement_mass(self):
        g = random_digraph(10, 0.3, np.random.default_rng(4))
        sigma = pagerank_vector(compute_pi(g, 0.15))
        rest = GroupPartition.from_members(range(1, 10), 10)
        single = GroupPartition.from_members([0], 10)
        self.assertAlmostEqual(group_mass(sigma, rest), 1 - group_mass(sigma, single), places=12)

    def test_normalized_ppr_mass(self):
        pi = compute_pi(three_cycle(), 0.15)
        group = GroupPartition.from_members([2], 3)
        self.assertAlmostEqual(normalized_ppr_mass(pi, 0, group), pi.matrix[0, 2] / 0.85, places=12)
        self.assertAlmostEqual(normalized_ppr_mass(pi, 2, group), (pi.matrix[2, 2] - 0.15) / 0.85, places=12)

    def test_expected_walk_steps_bounded(self):
        pi = compute_pi(random_digraph(20, 0.2, np.random.default_rng(8)), 0.15)
        self.assertLessEqual(expected_walk_steps(pi), 20 / 0.15 + 1e-9)

    def test_dump_pi_csv(self):
        pi = compute_pi(three_cycle(), 0.15)
        aux = aux_vectors(pi, GroupPartition.from_members([2], 3), source=0)
        with tempfile.TemporaryDirectory() as tmp:
            path = dump_pi_csv(pi, aux, os.path.join(tmp, "pi.csv"))
            with open(path) as f:
                lines = f.read().splitlines()
        self.assertEqual(lines[0], "node,pi_0,pi_1,pi_2,sigma,eta,sigma_src")
        self.assertEqual(len(lines), 4)


class TestGains(unittest.TestCase):
    """Closed-form gains against full recomputation."""

    def test_three_cycle_gain(self):
        g = three_cycle()
        group = GroupPartition.from_members([2], 3)
        pi = compute_pi(g, 0.15)
        aux = aux_vectors(pi, group, source=0)
        r = Rewiring(0, 1, 2)
        self.assertAlmostEqual(tau(pi, g, r), 0.10787, places=5)
        self.assertAlmostEqual(gain_pr(aux, pi, g, r), 0.153153, places=5)
        self.assertAlmostEqual(gain_pr(aux, pi, g, Rewiring(2, 0, 1)), 0.130180, places=5)
        self.assertAlmostEqual(gain_ppr(aux, pi, g, r), 0.17862, places=4)
        self.assertAlmostEqual(exact_group_mass(apply_rewiring(g, r), group, 0.15), 0.486486, places=6)

    def test_gain_ppr_needs_source(self):
        g = three_cycle()
        pi = compute_pi(g, 0.15)
        aux = aux_vectors(pi, GroupPartition.from_members([2], 3))
        with self.assertRaises(ConfigError):
            gain_ppr(aux, pi, g, Rewiring(0, 1, 2))

    def test_gains_match_recompute(self):
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(4, 31))
            alpha = float(rng.choice([0.05, 0.15, 0.5, 0.85]))
            g = random_digraph(n, float(rng.uniform(0.1, 0.5)), rng, weighted=bool(rng.integers(2)))
            candidates = list(legal_rewirings(g))
            if not candidates:
                continue
            group = _random_group(n, rng)
            v = int(rng.integers(n))
            pi = compute_pi(g, alpha)
            aux = aux_vectors(pi, group, source=v)
            before = group_mass(pagerank_vector(pi), group)
            before_v = group_mass(pi.matrix[v], group)
            for idx in rng.choice(len(candidates), size=min(20, len(candidates)), replace=False):
                r = candidates[int(idx)]
                self.assertGreater(tau(pi, g, r), 0.0)
                after = compute_pi(apply_rewiring(g, r), alpha)
                self.assertAlmostEqual(gain_pr(aux, pi, g, r), group_mass(pagerank_vector(after), group) - before, delta=1e-9)
                self.assertAlmostEqual(gain_ppr(aux, pi, g, r), group_mass(after.matrix[v], group) - before_v, delta=1e-9)
                checked += 1

    def test_sherman_morrison_chain(self):
        rng = np.random.default_rng(21)
        g = random_digraph(30, 0.2, rng, weighted=True)
        pi = compute_pi(g, 0.15)
        for _ in range(50):
            candidates = list(legal_rewirings(g))
            r = candidates[int(rng.integers(len(candidates)))]
            sherman_morrison_update(pi, g, r, in_place=True)
            g.rewire_in_place(r)
        np.testing.assert_allclose(pi.matrix, compute_pi(g, 0.15).matrix, atol=1e-8, rtol=0)

    def test_gain_is_mean_of_source_gains(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            n = int(rng.integers(4, 16))
            g = random_digraph(n, float(rng.uniform(0.2, 0.5)), rng, weighted=True)
            candidates = list(legal_rewirings(g))
            if not candidates:
                continue
            group = _random_group(n, rng)
            pi = compute_pi(g, 0.15)
            per_source = [aux_vectors(pi, group, source=v) for v in range(n)]
            for idx in rng.choice(len(candidates), size=min(10, len(candidates)), replace=False):
                r = candidates[int(idx)]
                mean_gain = np.mean([gain_ppr(aux, pi, g, r) for aux in per_source])
                self.assertAlmostEqual(gain_pr(per_source[0], pi, g, r), mean_gain, delta=1e-12)

    def test_sherman_morrison_reverse_recovers_pi(self):
        rng = np.random.default_rng(43)
        for _ in range(10):
            g = random_digraph(int(rng.integers(4, 25)), 0.3, rng, weighted=True)
            candidates = list(legal_rewirings(g))
            if not candidates:
                continue
            r = candidates[int(rng.integers(len(candidates)))]
            pi = compute_pi(g, 0.15)
            updated = sherman_morrison_update(pi, g, r)
            rewired = apply_rewiring(g, r)
            restored = sherman_morrison_update(updated, rewired, r.reverse())
            np.testing.assert_allclose(restored.matrix, pi.matrix, atol=1e-9, rtol=0)
            self.assertEqual(apply_rewiring(rewired, r.reverse()).neighbors(r.i).tolist().count(r.j), 1)

    def test_sherman_morrison_copy_leaves_input(self):
        g = three_cycle()
        pi = compute_pi(g, 0.15)
        original = pi.matrix.copy()
        updated = sherman_morrison_update(pi, g, Rewiring(0, 1, 2))
        np.testing.assert_array_equal(pi.matrix, original)
        np.testing.assert_allclose(updated.matrix, compute_pi(apply_rewiring(g, Rewiring(0, 1, 2)), 0.15).matrix, atol=1e-12)


if __name__ == "__main__":
    unittest.main()
