"""
Tests for the planted-partition graph and cascade simulator
"""
import math

import numpy as np
import pytest

from config.settings import DensityPairs
from src.analysis.features import extract_features
from src.models.cascade_models import SynthConfig
from src.simulation.synthgen import community_blocks, community_of, gen_cascades, gen_graph, truth_rows


class TestGenGraph:

    def test_two_cliques(self):
        cfg = SynthConfig(n_nodes=6, n_communities=2, p_in=1.0, p_out=0.0)
        graph = gen_graph(cfg)
        assert graph.edge_count == 12
        for u in range(6):
            for v in range(6):
                expected = u != v and community_of(cfg, u) == community_of(cfg, v)
                assert graph.has_edge(u, v) == expected

    def test_no_edges(self):
        graph = gen_graph(SynthConfig(n_nodes=20, n_communities=2, p_in=0.0, p_out=0.0))
        assert graph.edge_count == 0
        assert graph.node_count == 20

    def test_edge_rates_within_binomial_bounds(self):
        cfg = SynthConfig(n_nodes=200, n_communities=4, p_in=0.2, p_out=0.02, seed=5)
        graph = gen_graph(cfg)
        within = sum(1 for u, v in graph.edges() if community_of(cfg, u) == community_of(cfg, v))
        between = graph.edge_count - within

        within_pairs = sum(len(b) * (len(b) - 1) for b in community_blocks(cfg))
        between_pairs = 200 * 199 - within_pairs
        for count, pairs, p in ((within, within_pairs, cfg.p_in), (between, between_pairs, cfg.p_out)):
            sigma = math.sqrt(pairs * p * (1 - p))
            assert abs(count - pairs * p) <= 5 * sigma

    def test_blocks_partition_nodes(self):
        cfg = SynthConfig(n_nodes=103, n_communities=7)
        blocks = community_blocks(cfg)
        assert sum(len(b) for b in blocks) == 103
        for c, block in enumerate(blocks):
            assert all(community_of(cfg, node) == c for node in block)

    def test_uneven_blocks_keep_edges_inside_communities(self):
        cfg = SynthConfig(n_nodes=103, n_communities=7, p_in=1.0, p_out=0.0)
        graph = gen_graph(cfg)
        assert all(community_of(cfg, u) == community_of(cfg, v) for u, v in graph.edges())
        assert graph.edge_count == sum(len(b) * (len(b) - 1) for b in community_blocks(cfg))

    def test_deterministic(self, small_synth):
        assert list(gen_graph(small_synth).edges()) == list(gen_graph(small_synth).edges())
        other = small_synth.model_copy(update={"seed": 8})
        assert list(gen_graph(other).edges()) != list(gen_graph(small_synth).edges())

    def test_too_many_communities(self):
        with pytest.raises(ValueError):
            SynthConfig(n_nodes=3, n_communities=4)


class TestGenCascades:

    def test_events_follow_edges_and_time(self, small_synth):
        graph = gen_graph(small_synth)
        cascades = gen_cascades(graph, small_synth)

        assert len(cascades) == small_synth.cascade_count
        for cascade in cascades:
            adopted_at = {cascade.root: 0}
            for event in cascade.events:
                assert event.parent_user in adopted_at
                assert adopted_at[event.parent_user] < event.offset_s
                assert graph.has_edge(event.user, event.parent_user)
                assert event.user not in adopted_at
                assert event.offset_s <= small_synth.max_sim_time
                adopted_at[event.user] = event.offset_s

    def test_deterministic(self, small_synth):
        graph = gen_graph(small_synth)
        assert gen_cascades(graph, small_synth) == gen_cascades(graph, small_synth)

    def test_structure_boost_grows_cascades(self, small_synth):
        graph = gen_graph(small_synth)
        flat = gen_cascades(graph, small_synth.model_copy(update={"structure_boost": 0.0}))
        boosted = gen_cascades(graph, small_synth.model_copy(update={"structure_boost": 6.0}))
        assert np.mean([len(c.events) for c in boosted]) > np.mean([len(c.events) for c in flat])

    def test_tweet_ids_and_post_times(self, small_synth):
        graph = gen_graph(small_synth)
        cascades = gen_cascades(graph, small_synth)
        assert cascades[0].tweet_id == "t000000"
        assert cascades[1].post_time - cascades[0].post_time == 60


class TestTruthRows:

    @pytest.mark.parametrize("pairs,exclude_root", [
        (DensityPairs.ORDERED, False),
        (DensityPairs.UNORDERED, False),
        (DensityPairs.ORDERED, True),
    ])
    def test_agree_with_feature_extraction(self, small_synth, pairs, exclude_root):
        graph = gen_graph(small_synth)
        cascades = gen_cascades(graph, small_synth)
        truth = truth_rows(graph, cascades, 1800, 86400, min_early=2, pairs=pairs, exclude_root=exclude_root)
        rows = extract_features(graph, cascades, 1800, 86400, min_early=2, pairs=pairs, exclude_root=exclude_root)
        assert truth == rows
