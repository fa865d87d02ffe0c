"""
Structural features of early adopters: popularity, link density and diffusion depth
"""
from concurrent.futures import ThreadPoolExecutor
from itertools import islice
from typing import Dict, Iterable, Iterator, List, Optional

from loguru import logger

from config.settings import DensityPairs, PipelineConfig
from src.infrastructure.cascade_store import popularity_at, prefix_at
from src.infrastructure.graph_store import FollowerGraph
from src.models.cascade_models import Cascade, CascadePrefix, FeatureRow
from src.models.errors import ConfigError, UndefinedDensityError

NO_EARLY_ADOPTION = "no early adoption"
BATCH_SIZE = 1024


def exclusion_reason(early_pop: int, min_early: int) -> Optional[str]:
    """Why a tweet is left out of the models, or None when it is kept"""
    if early_pop >= min_early:
        return None
    if early_pop == 0:
        return NO_EARLY_ADOPTION
    return f"early popularity below {min_early}"


def density_nodes(prefix: CascadePrefix, exclude_root: bool = False) -> frozenset:
    """The adopter set density is measured over"""
    if exclude_root:
        return prefix.adopters - {prefix.root}
    return prefix.adopters


def link_density(
    graph: FollowerGraph,
    prefix: CascadePrefix,
    pairs: DensityPairs = DensityPairs.ORDERED,
    exclude_root: bool = False,
) -> float:
    """Followship links among the adopters over all possible links.

    Ordered reading: L / (n(n-1)). Unordered reading: adopter pairs joined by
    a link in at least one direction over n(n-1)/2.
    """
    nodes = density_nodes(prefix, exclude_root)
    n = len(nodes)
    if n < 2:
        raise UndefinedDensityError(f"density needs at least 2 adopters, tweet {prefix.cascade.tweet_id} has {n}")
    if pairs == DensityPairs.ORDERED:
        return graph.count_links_among(nodes) / (n * (n - 1))
    linked = {(min(u, v), max(u, v)) for u, v in graph.induced_edges(nodes)}
    return 2 * len(linked) / (n * (n - 1))


def diffusion_depth(prefix: CascadePrefix) -> int:
    """Longest chain of parent links from any adopter back to the root"""
    depth: Dict[int, int] = {prefix.root: 0}
    forest = prefix.forest
    for start in forest:
        path = []
        node = start
        while node not in depth:
            path.append(node)
            node = forest[node]
            if len(path) > len(forest):
                raise ValueError(f"cycle in the forest of tweet {prefix.cascade.tweet_id}")
        base = depth[node]
        for hop, child in enumerate(reversed(path), start=1):
            depth[child] = base + hop
    return max(depth.values())


class FeatureExtractor:
    """Computes one FeatureRow per cascade against a shared, read-only graph"""

    def __init__(
        self,
        graph: FollowerGraph,
        t_i: int,
        t_r: int,
        min_early: int = 1,
        pairs: DensityPairs = DensityPairs.ORDERED,
        exclude_root: bool = False,
        density_floor: float = 1e-6,
        workers: int = 1,
    ):
        if t_i >= t_r:
            raise ConfigError(f"t_i ({t_i}) must be smaller than t_r ({t_r})")
        self.graph = graph
        self.t_i = t_i
        self.t_r = t_r
        self.min_early = min_early
        self.pairs = pairs
        self.exclude_root = exclude_root
        self.density_floor = density_floor
        self.workers = workers

    @classmethod
    def from_config(cls, graph: FollowerGraph, cfg: PipelineConfig, workers: int = 1) -> "FeatureExtractor":
        return cls(
            graph,
            t_i=cfg.t_i,
            t_r=cfg.t_r,
            min_early=cfg.min_early,
            pairs=cfg.density_pairs,
            exclude_root=cfg.exclude_root,
            density_floor=cfg.density_floor,
            workers=workers,
        )

    def row_for(self, cascade: Cascade) -> FeatureRow:
        prefix = prefix_at(cascade, self.t_i)
        try:
            density: Optional[float] = link_density(self.graph, prefix, self.pairs, self.exclude_root)
        except UndefinedDensityError:
            density = None
        return FeatureRow.build(
            tweet_id=cascade.tweet_id,
            n_adopters=len(prefix.adopters),
            early_pop=prefix.event_count,
            final_pop=popularity_at(cascade, self.t_r),
            density=density,
            depth=diffusion_depth(prefix),
            excluded_reason=exclusion_reason(prefix.event_count, self.min_early),
            density_floor=self.density_floor,
        )

    def iter_rows(self, cascades: Iterable[Cascade]) -> Iterator[FeatureRow]:
        """Rows in input order. With several workers, cascades are fanned out in
        bounded batches so a streamed input is never fully materialised."""
        if self.workers <= 1:
            for cascade in cascades:
                yield self.row_for(cascade)
            return

        iterator = iter(cascades)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            while True:
                batch = list(islice(iterator, BATCH_SIZE))
                if not batch:
                    break
                yield from pool.map(self.row_for, batch)

    def extract(self, cascades: Iterable[Cascade]) -> List[FeatureRow]:
        rows = list(self.iter_rows(cascades))
        included = sum(1 for r in rows if r.included)
        logger.info(f"Extracted features for {len(rows)} cascades: {included} included, {len(rows) - included} excluded")
        return rows


def extract_features(
    graph: FollowerGraph,
    cascades: Iterable[Cascade],
    t_i: int,
    t_r: int,
    min_early: int = 1,
    pairs: DensityPairs = DensityPairs.ORDERED,
    exclude_root: bool = False,
    density_floor: float = 1e-6,
    workers: int = 1,
) -> List[FeatureRow]:
    """One row per cascade; filtered cascades carry their exclusion reason"""
    extractor = FeatureExtractor(graph, t_i, t_r, min_early, pairs, exclude_root, density_floor, workers)
    return extractor.extract(cascades)


def included_rows(rows: Iterable[FeatureRow]) -> List[FeatureRow]:
    return [r for r in rows if r.included]
