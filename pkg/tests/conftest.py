"""
Shared fixtures: tiny hand-built graphs and cascades, and a small fixed-seed corpus
"""
import sys
from pathlib import Path
from typing import Iterable, Sequence, Tuple

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.infrastructure.graph_store import FollowerGraph  # noqa: E402
from src.models.cascade_models import Cascade, FeatureRow, RetweetEvent, SynthConfig  # noqa: E402


def make_graph(n: int, edges: Iterable[Tuple[int, int]]) -> FollowerGraph:
    edges = list(edges)
    followers = [u for u, _ in edges]
    followees = [v for _, v in edges]
    return FollowerGraph.from_edges(followers, followees, [f"u{i}" for i in range(n)])


def make_cascade(root: int, events: Sequence[Tuple[int, int, int]], tweet_id: str = "t1", post_time: int = 1000) -> Cascade:
    """events are (user, parent, offset) triples, already in time order"""
    return Cascade(
        tweet_id=tweet_id,
        root=root,
        post_time=post_time,
        events=tuple(RetweetEvent(user=u, parent_user=p, offset_s=t) for u, p, t in events),
    )


def random_graph(rng: np.random.Generator, n: int, p: float) -> Tuple[FollowerGraph, set]:
    """A random graph plus the hash set of its edges for brute-force checks"""
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    edges = {(int(u), int(v)) for u, v in zip(*np.nonzero(mask))}
    return make_graph(n, sorted(edges)), edges


def random_cascade(rng: np.random.Generator, n: int, max_adopters: int, tweet_id: str = "t") -> Cascade:
    root = int(rng.integers(n))
    size = int(rng.integers(0, max_adopters))
    users = [int(u) for u in rng.permutation(n) if u != root][:size]
    offsets = np.sort(rng.integers(1, 7200, size=len(users)))
    adopted = [root]
    events = []
    for user, offset in zip(users, offsets):
        parent = adopted[int(rng.integers(len(adopted)))]
        events.append((user, parent, int(offset)))
        adopted.append(user)
    return make_cascade(root, events, tweet_id=tweet_id)


def free_row(
    tweet_id: str,
    ln_early: float,
    ln_final: float,
    ln_density: float = None,
    depth: int = 0,
) -> FeatureRow:
    """An included row whose log columns are set directly"""
    return FeatureRow(
        tweet_id=tweet_id,
        n_adopters=depth + 2,
        early_pop=1,
        final_pop=1,
        density=0.5 if ln_density is not None else None,
        depth=depth,
        ln_early=ln_early,
        ln_density=ln_density,
        ln_final=ln_final,
    )


@pytest.fixture
def diamond_graph() -> FollowerGraph:
    """0 and 1 follow each other, 2 follows 0 and 1, 3 follows 2"""
    return make_graph(4, [(0, 1), (1, 0), (2, 0), (2, 1), (3, 2)])


@pytest.fixture
def small_synth() -> SynthConfig:
    return SynthConfig(
        n_nodes=120,
        n_communities=6,
        p_in=0.3,
        p_out=0.01,
        cascade_count=150,
        transmission_prob=0.1,
        mean_delay_s=1200.0,
        seed=7,
    )
