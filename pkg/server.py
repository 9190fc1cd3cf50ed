#!/usr/bin/env python3
from functools import partial
from typing import Any, Dict, Optional
import logging
import tempfile

import anyio
from mcp.server.fastmcp import FastMCP

from tools.forest_sampler import required_samples
from tools.runner import RunConfig, run
from utils.config import get_logger_verbosity
from utils.errors import FairRewireError


# Setup logging
logging.basicConfig(
    level=getattr(logging, str(get_logger_verbosity()).upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

# Create an MCP server
mcp = FastMCP("FairRewireMCP")


def _output_dir(output_dir: Optional[str]) -> str:
    if output_dir:
        return output_dir
    return tempfile.mkdtemp(prefix="fairrewire_")


async def _run_offloaded(config: RunConfig) -> Dict[str, Any]:
    """Run a config on a worker thread and return its artifacts and summary."""
    try:
        result = await anyio.to_thread.run_sync(partial(run, config))
    except FairRewireError as e:
        logger.error(f"{config.algorithm} failed: {e}")
        raise ValueError(f"error[{e.category}]: {e}") from e
    return {"artifacts": result.artifacts, "summary": result.summary}


@mcp.tool()
async def audit_fairness(
    graph_path: str,
    group_path: str,
    alpha: float = 0.15,
    phi: Optional[float] = None,
    symmetrize: bool = False,
    output_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Report whether a graph's PageRank is unfair to a node group

    Args:
        graph_path: Edge list file ('src dst [weight]' per line)
        group_path: File listing the group's node labels, one per line
        alpha: Restart probability
        phi: Fairness threshold (defaults to the group's share of nodes)
        symmetrize: Treat each edge list line as an undirected edge
        output_dir: Where audit.json is written (a temporary directory by default)

    Returns:
        pi(S), r(S), phi, the unfair flag and per-node organic PPR masses
    """
    config = RunConfig(
        graph=graph_path,
        group=group_path,
        algorithm="audit",
        alpha=alpha,
        phi=phi,
        symmetrize=symmetrize,
        output_dir=_output_dir(output_dir),
    )
    return await _run_offloaded(config)


@mcp.tool()
async def plan_rewiring(
    graph_path: str,
    group_path: str,
    algorithm: str = "fast",
    budget: int = 50,
    alpha: float = 0.15,
    psi: Optional[int] = None,
    epsilon: Optional[float] = None,
    delta: Optional[float] = None,
    source: Optional[str] = None,
    seed: Optional[int] = None,
    symmetrize: bool = False,
    output_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Plan budgeted edge rewirings that raise the group's PageRank mass

    Args:
        graph_path: Edge list file
        group_path: Group file
        algorithm: One of exact, exactv, fast, fastv, random
        budget: Number of rewirings
        alpha: Restart probability
        psi: Forests per round for fast/fastv
        epsilon: Hoeffding accuracy (with delta, instead of psi)
        delta: Hoeffding confidence
        source: Source node label for exactv/fastv
        seed: Master seed (generated when omitted)
        symmetrize: Treat each edge list line as an undirected edge
        output_dir: Where plan.csv and summary.json are written

    Returns:
        Artifact paths and the plan summary (gains and fairness trajectory)
    """
    config = RunConfig(
        graph=graph_path,
        group=group_path,
        algorithm=algorithm,
        budget=budget,
        alpha=alpha,
        psi=psi,
        epsilon=epsilon,
        delta=delta,
        source=source,
        seed=seed,
        symmetrize=symmetrize,
        output_dir=_output_dir(output_dir),
    )
    return await _run_offloaded(config)


@mcp.tool()
def sample_count(epsilon: float, delta: float) -> Dict[str, Any]:
    """
    Number of sampled forests that bounds every estimator error by epsilon with probability 1 - delta

    Args:
        epsilon: Accuracy
        delta: Failure probability

    Returns:
        The sample count psi
    """
    try:
        psi = required_samples(epsilon, delta)
    except FairRewireError as e:
        raise ValueError(f"error[{e.category}]: {e}") from e
    return {"epsilon": epsilon, "delta": delta, "psi": psi}


@mcp.tool()
async def gain_correlation_report(
    graph_path: str,
    group_path: str,
    alpha: float = 0.15,
    sample_size: int = 5000,
    seed: Optional[int] = None,
    symmetrize: bool = False,
    output_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Correlate exact rewiring gains with the sampling path's tau-free scores

    Args:
        graph_path: Edge list file
        group_path: Group file
        alpha: Restart probability
        sample_size: Legal rewirings to score
        seed: Sampling seed (generated when omitted)
        symmetrize: Treat each edge list line as an undirected edge
        output_dir: Where correlation.json is written

    Returns:
        Pearson and Spearman coefficients and the number of rewirings scored
    """
    config = RunConfig(
        graph=graph_path,
        group=group_path,
        algorithm="correlate",
        alpha=alpha,
        sample_size=sample_size,
        seed=seed,
        symmetrize=symmetrize,
        output_dir=_output_dir(output_dir),
    )
    return await _run_offloaded(config)


if __name__ == "__main__":
    try:
        # Run the MCP server
        mcp.run()
    except KeyboardInterrupt:
        logger.info("Server stopped by user")
