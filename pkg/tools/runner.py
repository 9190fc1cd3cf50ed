#!/usr/bin/env python3
"""Reproducible runs: validate a RunConfig, execute it and write its artifacts."""

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Any

from tools.dense_pagerank import aux_vectors, compute_pi, dump_pi_csv
from tools.evaluation import (
    fairness_audit,
    gain_samples,
    plan_results_rows,
    ppr_wasserstein_trajectory,
    random_baseline,
    score_correlation,
    trajectory_results_rows,
)
from tools.forest_sampler import required_samples, root_histogram
from tools.graph import DirectedGraph, GroupPartition, build_reweighted, load_graph, load_group
from tools.greedy_exact import RewiringPlan, exact_rewire, exactv_rewire
from tools.greedy_fast import fast_rewire, fastv_rewire
from utils.common import RESULTS_CSV_HEADER, normalize_file_path, resolve_seed, validate_alpha
from utils.config import get_default_alpha, get_default_budget
from utils.errors import ConfigError
from utils.file_utils import read_text, write_csv, write_json

logger = logging.getLogger(__name__)

__all__ = ["ALGORITHMS", "REWIRE_ALGORITHMS", "RunConfig", "RunResult", "run"]

REWIRE_ALGORITHMS = ("exact", "exactv", "fast", "fastv", "random")
ALGORITHMS = REWIRE_ALGORITHMS + ("audit", "correlate", "sample-debug", "ppr-eval")
SOURCE_ALGORITHMS = ("exactv", "fastv")
SAMPLING_ALGORITHMS = ("fast", "fastv")
RANDOMIZED_ALGORITHMS = ("fast", "fastv", "random", "correlate", "sample-debug", "ppr-eval")


@dataclass
class RunConfig:
    """Everything needed to reproduce one run."""

    graph: str
    algorithm: str
    group: str | None = None
    alpha: float = field(default_factory=get_default_alpha)
    budget: int = field(default_factory=get_default_budget)
    psi: int | None = None
    epsilon: float | None = None
    delta: float | None = None
    source: str | None = None
    seed: int | None = None
    symmetrize: bool = False
    phi: float | None = None
    output_dir: str = "fairrewire_output"
    dense_cap: int | None = None
    workers: int | None = None
    sample_size: int = 5000
    exact_fairness: bool | None = None
    dump_pi: bool = False
    ppr_algorithm: str = "exactv"
    source_fraction: float = 0.1

    def validate(self) -> None:
        """Check the invariants that do not need the input files.

        Raises:
            ConfigError: On the first violated invariant
        """
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        validate_alpha(self.alpha)
        if self.budget < 1:
            raise ConfigError(f"budget must be at least 1, got {self.budget}")
        if self.psi is not None and (self.epsilon is not None or self.delta is not None):
            raise ConfigError("set either psi or (epsilon, delta), not both")
        if (self.epsilon is None) != (self.delta is None):
            raise ConfigError("epsilon and delta must be given together")
        if self.psi is not None and self.psi < 1:
            raise ConfigError(f"psi must be at least 1, got {self.psi}")
        if self.needs_psi and self.psi is None and self.epsilon is None:
            raise ConfigError(f"{self.algorithm} needs psi or (epsilon, delta)")
        if self.algorithm in SOURCE_ALGORITHMS and self.source is None:
            raise ConfigError(f"{self.algorithm} needs a source node")
        if self.algorithm not in SOURCE_ALGORITHMS and self.source is not None:
            raise ConfigError(f"a source node only applies to {' and '.join(SOURCE_ALGORITHMS)}")
        if self.algorithm != "sample-debug" and self.group is None:
            raise ConfigError(f"{self.algorithm} needs a group file")
        if self.algorithm == "ppr-eval" and self.ppr_algorithm not in SOURCE_ALGORITHMS:
            raise ConfigError(f"ppr-eval runs exactv or fastv, got {self.ppr_algorithm!r}")
        if self.seed is not None and self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    @property
    def needs_psi(self) -> bool:
        return self.algorithm in SAMPLING_ALGORITHMS or (
            self.algorithm == "ppr-eval" and self.ppr_algorithm == "fastv"
        )

    @property
    def resolved_psi(self) -> int | None:
        """psi itself, or the Hoeffding count for (epsilon, delta)."""
        if self.psi is not None:
            return self.psi
        if self.epsilon is not None and self.delta is not None:
            return required_samples(self.epsilon, self.delta)
        return None

    def to_manifest(self) -> dict[str, Any]:
        manifest = dataclasses.asdict(self)
        manifest["resolved_psi"] = self.resolved_psi
        return manifest

    @classmethod
    def from_manifest(cls, manifest: dict[str, Any]) -> "RunConfig":
        """Rebuild a RunConfig from to_manifest() output or an experiment [run] table."""
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(manifest) - names - {"resolved_psi"}
        if unknown:
            raise ConfigError(f"unknown run settings: {', '.join(sorted(unknown))}")
        if "graph" not in manifest or "algorithm" not in manifest:
            raise ConfigError("a run needs at least 'graph' and 'algorithm'")
        return cls(**{key: value for key, value in manifest.items() if key in names})


@dataclass
class RunResult:
    config: RunConfig
    artifacts: dict[str, str]
    summary: dict[str, Any]


def _load_inputs(config: RunConfig) -> tuple[DirectedGraph, GroupPartition | None]:
    graph = load_graph(read_text(normalize_file_path(config.graph)), symmetrize=config.symmetrize)
    group = None
    if config.group is not None:
        group = load_group(read_text(normalize_file_path(config.group)), graph, config.phi)
    return graph, group


def _rewire(config: RunConfig, graph: DirectedGraph, group: GroupPartition) -> RewiringPlan:
    psi = config.resolved_psi
    source = graph.index_of(config.source) if config.source is not None else None
    if config.algorithm == "exact":
        return exact_rewire(graph, config.budget, group, config.alpha, dense_cap=config.dense_cap)
    if config.algorithm == "exactv":
        return exactv_rewire(graph, config.budget, group, source, config.alpha, dense_cap=config.dense_cap)
    if config.algorithm == "fast":
        return fast_rewire(
            graph, config.budget, group, psi, config.alpha, config.seed, config.workers,
            config.exact_fairness, config.dense_cap,
        )
    if config.algorithm == "fastv":
        return fastv_rewire(
            graph, config.budget, group, source, psi, config.alpha, config.seed, config.workers,
            config.exact_fairness, config.dense_cap,
        )
    return random_baseline(graph, config.budget, group, config.alpha, config.seed)


def run(config: RunConfig) -> RunResult:
    """Execute one run and write its artifacts into config.output_dir.

    Every JSON artifact embeds the manifest, which rebuilds the RunConfig.
    Randomized runs without a seed draw one and log it.

    Raises:
        FairRewireError: Config, data and algorithm errors, unchanged
    """
    config.validate()
    if config.seed is None and config.algorithm in RANDOMIZED_ALGORITHMS:
        config = dataclasses.replace(config, seed=resolve_seed(None))
        logger.info(f"Generated seed {config.seed}")
    if config.epsilon is not None:
        logger.info(f"epsilon={config.epsilon}, delta={config.delta} resolve to psi={config.resolved_psi}")

    graph, group = _load_inputs(config)
    output_dir = normalize_file_path(config.output_dir)
    os.makedirs(output_dir, exist_ok=True)
    manifest = config.to_manifest()
    artifacts: dict[str, str] = {}

    def path(name: str) -> str:
        return os.path.join(output_dir, name)

    if config.algorithm in REWIRE_ALGORITHMS:
        if config.dump_pi:
            pi = compute_pi(graph, config.alpha, dense_cap=config.dense_cap)
            source = graph.index_of(config.source) if config.source is not None else None
            artifacts["pi"] = dump_pi_csv(pi, aux_vectors(pi, group, source), path("pi.csv"))
        plan = _rewire(config, graph, group)
        summary = plan.to_summary()
        artifacts["plan"] = plan.write_csv(path("plan.csv"))
        artifacts["results"] = write_csv(path("results.csv"), RESULTS_CSV_HEADER, plan_results_rows(plan, config.seed))
    elif config.algorithm == "audit":
        report = fairness_audit(
            graph, group, config.alpha, config.dense_cap, config.resolved_psi, config.seed, config.workers
        )
        summary = report.to_dict()
        artifacts["audit"] = path("audit.json")
    elif config.algorithm == "correlate":
        rewirings, delta, delta_tau = gain_samples(
            graph, group, config.alpha, config.sample_size, config.seed, config.dense_cap
        )
        pearson, spearman = score_correlation(delta, delta_tau)
        summary = {"pearson": pearson, "spearman": spearman, "sample_count": len(rewirings)}
        artifacts["correlation"] = path("correlation.json")
    elif config.algorithm == "sample-debug":
        rows = root_histogram(build_reweighted(graph, config.alpha), config.sample_size, config.seed)
        summary = {"forests": config.sample_size, "n": graph.n, "m": graph.m}
        artifacts["histogram"] = write_csv(path("histogram.csv"), ["node", "root", "frequency"], rows)
    else:
        trajectory = ppr_wasserstein_trajectory(
            graph, group, config.alpha, config.budget, config.source_fraction, config.ppr_algorithm,
            config.seed, config.resolved_psi, config.workers, config.dense_cap,
        )
        summary = {
            "algorithm": trajectory.algorithm,
            "sources": [graph.labels[v] for v in trajectory.sources],
            "wasserstein": trajectory.distances,
            # in-group nodes use organic PPR mass, out-group nodes raw PPR mass
            "in_group_mass": "organic",
        }
        artifacts["results"] = write_csv(path("results.csv"), RESULTS_CSV_HEADER, trajectory_results_rows(trajectory))

    summary["manifest"] = manifest
    json_name = {"audit": "audit.json", "correlate": "correlation.json"}.get(config.algorithm, "summary.json")
    artifacts[json_name.split(".")[0]] = write_json(path(json_name), summary)
    logger.info(f"Wrote {', '.join(sorted(artifacts.values()))}")
    return RunResult(config=config, artifacts=artifacts, summary=summary)
