"""
Synthetic follower graphs and retweet cascades with known ground truth.

The graph is a directed planted partition; cascades follow an independent
cascade process in which each exposure succeeds with probability

    lambda * (1 + structure_boost * communities_reached / n_communities)

so cascades whose adopters already span many communities keep spreading.
"""
import heapq
import itertools
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from loguru import logger

from config.settings import DensityPairs
from src.analysis.features import exclusion_reason
from src.infrastructure.graph_store import FollowerGraph
from src.infrastructure.tsv_io import write_feature_rows
from src.models.cascade_models import Cascade, FeatureRow, RetweetEvent, SynthConfig


class CorpusPaths(NamedTuple):
    graph: Path
    cascades: Path
    truth: Path


def community_blocks(cfg: SynthConfig) -> List[range]:
    """Communities are contiguous, near-equal blocks of node ids; block c starts at c*N//C"""
    bounds = [c * cfg.n_nodes // cfg.n_communities for c in range(cfg.n_communities)] + [cfg.n_nodes]
    return [range(bounds[c], bounds[c + 1]) for c in range(cfg.n_communities)]


def community_of(cfg: SynthConfig, node: int) -> int:
    """Index of the block holding node: the largest c with c*N//C <= node"""
    return ((node + 1) * cfg.n_communities - 1) // cfg.n_nodes


def _block_edges(rng: np.random.Generator, a: range, b: range, p: float):
    """Sample each ordered pair of block a x block b (no self-pairs) with probability p"""
    same = a == b
    width = len(b) - 1 if same else len(b)
    pairs = len(a) * width
    if pairs <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    k = int(rng.binomial(pairs, p))
    picked = np.sort(rng.choice(pairs, size=k, replace=False))
    rows, cols = np.divmod(picked, width)
    if same:
        cols = cols + (cols >= rows)
    return rows + a.start, cols + b.start


def gen_graph(cfg: SynthConfig) -> FollowerGraph:
    """Directed planted-partition graph, deterministic under cfg.seed"""
    rng = np.random.default_rng([cfg.seed, 0])
    blocks = community_blocks(cfg)
    followers, followees = [], []
    for a in blocks:
        for b in blocks:
            src, dst = _block_edges(rng, a, b, cfg.p_in if a == b else cfg.p_out)
            followers.append(src)
            followees.append(dst)
    graph = FollowerGraph.from_edges(
        np.concatenate(followers),
        np.concatenate(followees),
        [f"u{i}" for i in range(cfg.n_nodes)],
    )
    logger.info(f"Generated planted-partition graph: {graph.node_count} nodes, {graph.edge_count} edges")
    return graph


def _simulate(
    graph: FollowerGraph,
    cfg: SynthConfig,
    rng: np.random.Generator,
    root: int,
    communities: Sequence[int],
) -> List[RetweetEvent]:
    adopted = {root}
    reached = {communities[root]}
    events: List[RetweetEvent] = []
    pending: list = []
    order = itertools.count()

    def expose(user: int, now: int) -> None:
        audience = [int(f) for f in graph.followers(user) if int(f) not in adopted]
        if not audience:
            return
        delays = 1 + np.floor(rng.exponential(cfg.mean_delay_s, size=len(audience))).astype(np.int64)
        for follower, delay in zip(audience, delays):
            heapq.heappush(pending, (now + int(delay), next(order), follower, user))

    expose(root, 0)
    while pending:
        when, _, user, parent = heapq.heappop(pending)
        if when > cfg.max_sim_time:
            break
        if user in adopted:
            continue
        diversity = len(reached) / cfg.n_communities
        probability = min(1.0, cfg.transmission_prob * (1.0 + cfg.structure_boost * diversity))
        if rng.random() >= probability:
            continue
        adopted.add(user)
        reached.add(communities[user])
        events.append(RetweetEvent(user=user, parent_user=parent, offset_s=when))
        expose(user, when)
    return events


def gen_cascades(
    graph: FollowerGraph,
    cfg: SynthConfig,
    communities: Optional[Sequence[int]] = None,
) -> List[Cascade]:
    """Independent-cascade simulations from uniformly random roots.

    ``communities`` defaults to the block layout of gen_graph, which matches
    any graph produced by it.
    """
    if communities is None:
        communities = [community_of(cfg, i) for i in range(graph.node_count)]
    rng = np.random.default_rng([cfg.seed, 1])
    cascades = []
    for k in range(cfg.cascade_count):
        root = int(rng.integers(graph.node_count))
        events = _simulate(graph, cfg, rng, root, communities)
        cascades.append(Cascade(
            tweet_id=f"t{k:06d}",
            root=root,
            post_time=cfg.post_time_start + 60 * k,
            events=tuple(events),
        ))
    total = sum(len(c.events) for c in cascades)
    logger.info(f"Simulated {len(cascades)} cascades with {total} retweets")
    return cascades


def truth_rows(
    graph: FollowerGraph,
    cascades: Sequence[Cascade],
    t_i: int,
    t_r: int,
    min_early: int = 1,
    pairs: DensityPairs = DensityPairs.ORDERED,
    exclude_root: bool = False,
    density_floor: float = 1e-6,
) -> List[FeatureRow]:
    """Ground-truth features straight from the simulated records.

    Computed with linear scans and exhaustive pair checks against a hash set
    of the graph's edges, independently of the prefix and feature code, so
    the pipeline can be checked against it.
    """
    edges = set(graph.edges())

    def linked(u: int, v: int) -> bool:
        return (u, v) in edges

    rows = []
    for cascade in cascades:
        early = [e for e in cascade.events if e.offset_s <= t_i]
        final_pop = sum(1 for e in cascade.events if e.offset_s <= t_r)

        depth: Dict[int, int] = {cascade.root: 0}
        for e in early:
            if e.user not in depth:
                depth[e.user] = depth[e.parent_user] + 1
        adopters = set(depth)

        nodes = sorted(adopters - {cascade.root}) if exclude_root else sorted(adopters)
        n = len(nodes)
        density = None
        if n >= 2:
            if pairs == DensityPairs.ORDERED:
                links = sum(1 for u in nodes for v in nodes if u != v and linked(u, v))
                density = links / (n * (n - 1))
            else:
                links = sum(1 for i, u in enumerate(nodes) for v in nodes[i + 1:] if linked(u, v) or linked(v, u))
                density = 2 * links / (n * (n - 1))

        rows.append(FeatureRow.build(
            tweet_id=cascade.tweet_id,
            n_adopters=len(adopters),
            early_pop=len(early),
            final_pop=final_pop,
            density=density,
            depth=max(depth.values()),
            excluded_reason=exclusion_reason(len(early), min_early),
            density_floor=density_floor,
        ))
    return rows


def write_graph(graph: FollowerGraph, path: Union[str, Path]) -> None:
    """Canonical edge TSV, follower first"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for u, v in graph.edges():
            f.write(f"{graph.external_id(u)}\t{graph.external_id(v)}\n")


def write_cascades(graph: FollowerGraph, cascades: Sequence[Cascade], path: Union[str, Path]) -> None:
    """Canonical cascade TSV, grouped by tweet, root record first"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for c in cascades:
            f.write(f"{c.tweet_id}\t{graph.external_id(c.root)}\t-\t{c.post_time}\n")
            for e in c.events:
                f.write(
                    f"{c.tweet_id}\t{graph.external_id(e.user)}\t{graph.external_id(e.parent_user)}\t"
                    f"{c.post_time + e.offset_s}\n"
                )


def simulate_corpus(
    synth: SynthConfig,
    output_dir: Union[str, Path],
    feature_settings: Dict[str, object],
    fingerprint: str,
) -> CorpusPaths:
    """Generate a corpus and write graph.tsv, cascades.tsv and truth.tsv"""
    output_dir = Path(output_dir)
    graph = gen_graph(synth)
    cascades = gen_cascades(graph, synth)
    truth = truth_rows(
        graph,
        cascades,
        t_i=feature_settings["t_i"],
        t_r=feature_settings["t_r"],
        min_early=feature_settings["min_early"],
        pairs=DensityPairs(feature_settings["density_pairs"]),
        exclude_root=feature_settings["exclude_root"],
        density_floor=feature_settings["density_floor"],
    )
    paths = CorpusPaths(output_dir / "graph.tsv", output_dir / "cascades.tsv", output_dir / "truth.tsv")
    write_graph(graph, paths.graph)
    write_cascades(graph, cascades, paths.cascades)
    write_feature_rows(truth, paths.truth, feature_settings, fingerprint)
    logger.info(f"Wrote synthetic corpus to {output_dir}")
    return paths
