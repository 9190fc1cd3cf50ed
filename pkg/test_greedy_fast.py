#!/usr/bin/env python3
import os
import sys
import time
import unittest

import numpy as np

# Add the parent directory to sys.path to import the project modules
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from tools.dense_pagerank import aux_vectors, compute_pi, gain_pr, tau
from tools.evaluation import relative_error
from tools.graph import DirectedGraph, GroupPartition, Rewiring, legal_rewirings
from tools.greedy_exact import exact_rewire
from tools.greedy_fast import approx_gain, candidate_targets, fast_rewire, fastv_rewire, select_rewiring
from utils.errors import ConfigError, PlanningError
from utils.fixtures import books_surrogate, random_digraph, random_out_regular, three_cycle

SLOW_TESTS = os.environ.get("FAIRREWIRE_SLOW_TESTS") == "1"


class TestCandidateSet(unittest.TestCase):
    """Top nodes by eta' and the per-source target inside them."""

    def test_ties_broken_by_id(self):
        g = three_cycle()
        candidates = candidate_targets(np.zeros(3), g)
        np.testing.assert_array_equal(candidates.order, [0, 1, 2])
        self.assertEqual(candidates.base_size, 3)

    def test_order_by_eta_descending(self):
        g = random_out_regular(10, 2, np.random.default_rng(0))
        eta = np.linspace(0.1, 1.0, 10)
        candidates = candidate_targets(eta, g)
        np.testing.assert_array_equal(candidates.order, np.arange(9, -1, -1))
        self.assertEqual(candidates.base_size, 4)
        self.assertFalse(candidates.extended)

    def test_every_source_gets_best_legal_target(self):
        rng = np.random.default_rng(4)
        g = random_digraph(25, 0.2, rng)
        eta = rng.random(25)
        candidates = candidate_targets(eta, g)
        for i in range(g.n):
            blocked = set(g.neighbors(i).tolist()) | {i}
            legal = [k for k in range(g.n) if k not in blocked]
            k = candidates.targets[i]
            self.assertIn(k, legal)
            self.assertIn(k, candidates.nodes)
            self.assertEqual(eta[k], max(eta[x] for x in legal))

    def test_hub_with_top_neighbors(self):
        # hub 0 points at the four highest-eta nodes
        arcs = [(0, 1), (0, 2), (0, 3), (0, 4)] + [(i, 0) for i in range(1, 7)]
        g = DirectedGraph.from_arcs(7, arcs)
        eta = np.array([0.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4])
        candidates = candidate_targets(eta, g)
        self.assertEqual(candidates.targets[0], 5)
        self.assertEqual(candidates.targets[1], 2)

    def test_source_without_legal_target(self):
        complete = DirectedGraph.from_arcs(3, [(i, j) for i in range(3) for j in range(3) if i != j])
        candidates = candidate_targets(np.ones(3), complete)
        np.testing.assert_array_equal(candidates.targets, [-1, -1, -1])

    def test_eta_length_checked(self):
        with self.assertRaises(ConfigError):
            candidate_targets(np.zeros(4), three_cycle())


class TestSelectRewiring(unittest.TestCase):
    def test_approx_gain_three_cycle(self):
        k = 0.15 / 0.385875
        eta = [k * 0.85**2, k * 0.85, k]
        self.assertAlmostEqual(approx_gain(1.0, 1 / 3, eta[1], eta[2], 0.15), 0.016521, places=6)

    def test_exact_plugin_on_three_cycle(self):
        g = three_cycle()
        aux = aux_vectors(compute_pi(g, 0.15), GroupPartition.from_members([2], 3))
        rewiring, score, candidates = select_rewiring(g, aux.sigma, aux.eta, 0.15)
        self.assertEqual(rewiring, Rewiring(0, 1, 2))
        self.assertAlmostEqual(score, 0.016521, places=6)
        self.assertEqual(candidates.size, 3)

    def test_plugin_matches_restricted_argmax(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            g = random_digraph(15, 0.25, rng, weighted=True)
            group = GroupPartition.from_members(rng.choice(15, size=6, replace=False), 15)
            aux = aux_vectors(compute_pi(g, 0.15), group)
            rewiring, score, candidates = select_rewiring(g, aux.sigma, aux.eta, 0.15)
            allowed = set(candidates.nodes.tolist())
            scores = {
                r: approx_gain(g.transition_prob(r.i, r.j), aux.sigma[r.i], aux.eta[r.j], aux.eta[r.k], 0.15)
                for r in legal_rewirings(g)
                if r.k in allowed
            }
            best = max(scores.values())
            self.assertAlmostEqual(score, best, delta=1e-14)
            tied = sorted(r for r, value in scores.items() if value == best)
            self.assertEqual(rewiring, tied[0])

    def test_zero_weight_source_takes_smallest_target(self):
        g = DirectedGraph.from_arcs(4, [(0, 1), (1, 0), (2, 0), (3, 0)])
        sigma = np.array([0.0, 0.0, 0.0, 0.0])
        eta = np.array([0.1, 0.2, 0.3, 0.4])
        rewiring, score, _ = select_rewiring(g, sigma, eta, 0.15)
        self.assertEqual(score, 0.0)
        self.assertEqual(rewiring, Rewiring(0, 1, 2))

    def test_none_when_nothing_is_legal(self):
        complete = DirectedGraph.from_arcs(3, [(i, j) for i in range(3) for j in range(3) if i != j])
        self.assertIsNone(select_rewiring(complete, np.ones(3) / 3, np.ones(3), 0.15))


class TestFastRewire(unittest.TestCase):
    """Sampling-based greedy rewiring."""

    def test_three_cycle_choice(self):
        group = GroupPartition.from_members([2], 3)
        plan = fast_rewire(three_cycle(), 1, group, psi=200_000, alpha=0.15, seed=7)
        self.assertEqual(plan.rewirings, [Rewiring(0, 1, 2)])
        self.assertAlmostEqual(plan.gains[0], 0.016521, delta=0.003)
        self.assertAlmostEqual(plan.final_fairness, 0.486486, places=6)
        self.assertEqual(plan.extra["fairness_method"], "exact")
        self.assertEqual(plan.params["psi"], 200_000)

    def test_three_cycle_agrees_with_exact_across_seeds(self):
        group = GroupPartition.from_members([2], 3)
        expected = exact_rewire(three_cycle(), 1, group, 0.15).rewirings
        agree = sum(
            fast_rewire(three_cycle(), 1, group, psi=50_000, alpha=0.15, seed=seed).rewirings == expected
            for seed in range(100)
        )
        self.assertGreaterEqual(agree, 99)

    def test_agrees_with_exact_where_scores_rank_alike(self):
        fixtures = [
            (three_cycle(), GroupPartition.from_members([2], 3)),
            (three_cycle(), GroupPartition.from_members([1, 2], 3)),
        ]
        alpha = 0.5
        for g, group in fixtures:
            with self.subTest(group=sorted(group.members)):
                pi = compute_pi(g, alpha)
                aux = aux_vectors(pi, group)
                rewirings = list(legal_rewirings(g))
                gains = np.array([gain_pr(aux, pi, g, r) for r in rewirings])
                scores = np.array([gains[idx] * tau(pi, g, r) for idx, r in enumerate(rewirings)])
                np.testing.assert_array_equal(np.argsort(gains), np.argsort(scores))

                expected = exact_rewire(g, 1, group, alpha).rewirings[0]
                self.assertEqual(select_rewiring(g, aux.sigma, aux.eta, alpha)[0], expected)

                agree = sum(
                    fast_rewire(g, 1, group, psi=2000, alpha=alpha, seed=seed).rewirings[0] == expected
                    for seed in range(100)
                )
                self.assertGreaterEqual(agree, 95)

    def test_reproducible_for_fixed_seed(self):
        g = random_digraph(20, 0.2, np.random.default_rng(1))
        group = GroupPartition.from_members(range(8), 20)
        first = fast_rewire(g, 3, group, psi=200, alpha=0.15, seed=11, workers=2)
        second = fast_rewire(g, 3, group, psi=200, alpha=0.15, seed=11, workers=2)
        self.assertEqual(first.to_csv(), second.to_csv())
        self.assertEqual(first.params["seed"], 11)

    def test_generated_seed_recorded(self):
        g = random_digraph(10, 0.3, np.random.default_rng(2))
        plan = fast_rewire(g, 1, GroupPartition.from_members([0, 1], 10), psi=50, alpha=0.15)
        self.assertIsInstance(plan.params["seed"], int)

    def test_degrees_preserved(self):
        g = random_digraph(20, 0.2, np.random.default_rng(3), weighted=True)
        plan = fast_rewire(g, 5, GroupPartition.from_members(range(5), 20), psi=100, alpha=0.15, seed=1)
        np.testing.assert_array_equal(plan.graph.out_arc_counts, g.out_arc_counts)
        np.testing.assert_allclose(plan.graph.out_degree, g.out_degree)
        self.assertTrue(all(1 <= step.candidates <= g.n for step in plan.steps))

    def test_sampled_fairness(self):
        g = random_digraph(15, 0.3, np.random.default_rng(5))
        group = GroupPartition.from_members(range(5), 15)
        plan = fast_rewire(g, 2, group, psi=4000, alpha=0.15, seed=3, exact_fairness=False)
        exact = exact_rewire(g, 2, group, 0.15)
        self.assertEqual(plan.extra["fairness_method"], "sampled")
        self.assertAlmostEqual(plan.initial_fairness, exact.initial_fairness, delta=0.03)

    def test_dense_cap_switches_fairness_to_sampling(self):
        g = random_digraph(15, 0.3, np.random.default_rng(5))
        plan = fast_rewire(g, 1, GroupPartition.from_members(range(5), 15), psi=100, alpha=0.15, seed=3, dense_cap=10)
        self.assertEqual(plan.extra["fairness_method"], "sampled")

    def test_no_legal_rewiring(self):
        complete = DirectedGraph.from_arcs(3, [(i, j) for i in range(3) for j in range(3) if i != j])
        with self.assertRaises(PlanningError):
            fast_rewire(complete, 1, GroupPartition.from_members([2], 3), psi=10, alpha=0.15, seed=0)

    def test_parameter_validation(self):
        group = GroupPartition.from_members([2], 3)
        with self.assertRaises(ConfigError):
            fast_rewire(three_cycle(), 1, group, psi=0, alpha=0.15)
        with self.assertRaises(ConfigError):
            fast_rewire(three_cycle(), 1, group, psi=10, alpha=1.5)
        with self.assertRaises(ConfigError):
            fastv_rewire(three_cycle(), 1, group, 9, psi=10, alpha=0.15)

    def test_fastv_three_cycle(self):
        group = GroupPartition.from_members([2], 3)
        plan = fastv_rewire(three_cycle(), 1, group, 0, psi=100_000, alpha=0.15, seed=5)
        self.assertEqual(plan.rewirings, [Rewiring(0, 1, 2)])
        self.assertEqual(plan.fairness_metric, "pi_v(S)")
        self.assertEqual(plan.params["source"], 0)

    def test_surrogate_improves_fairness(self):
        g, group = books_surrogate()
        plan = fast_rewire(g, 5, group, psi=500, alpha=0.15, seed=2)
        self.assertGreater(plan.final_fairness, plan.initial_fairness)

    @unittest.skipUnless(SLOW_TESTS, "set FAIRREWIRE_SLOW_TESTS=1 to run the accuracy sweep")
    def test_surrogate_relative_error(self):
        g, group = books_surrogate()
        exact = exact_rewire(g, 50, group, 0.15)
        errors = []
        for seed in range(10):
            plan = fast_rewire(g, 50, group, psi=1000, alpha=0.15, seed=seed)
            errors.append(relative_error(plan.final_fairness, exact.final_fairness))
        self.assertLessEqual(max(errors), 5.0)

    @unittest.skipUnless(SLOW_TESTS, "set FAIRREWIRE_SLOW_TESTS=1 to run scaling checks")
    def test_million_node_run_and_round_time_scaling(self):
        per_round = {}
        for n in (500_000, 1_000_000):
            g = random_out_regular(n, 3, np.random.default_rng(n))
            group = GroupPartition.from_members(range(n // 2), n)
            start = time.perf_counter()
            plan = fast_rewire(
                g, 5, group, psi=1000, alpha=0.15, seed=1, workers=os.cpu_count(), exact_fairness=False
            )
            elapsed = time.perf_counter() - start
            self.assertEqual(len(plan.steps), 5)
            per_round[n] = elapsed / 5
        self.assertLessEqual(elapsed, 15 * 60)
        self.assertLessEqual(per_round[1_000_000] / per_round[500_000], 2.5)


if __name__ == "__main__":
    unittest.main()
