"""
Tests for pmac/cs_enumerator.py.

Covers:
- Mixed-radix profile codec and neighbors
- Exhaustive equilibrium search, ties and caps
- The oriented deviation graph and its sinks
- Best-response descent and sampled reports
- Counting bounds and profile distance
"""
from unittest.mock import patch

import numpy as np
import pytest

from pmac.config import EnumerationConfig
from pmac.cs_enumerator import (
    best_channel,
    br_descent_cs,
    build_cs_graph,
    enumerate_cs_ne,
    ne_fraction_estimate,
    ne_upper_bound,
    orient_by_potential,
    potential_values,
    profile_distance,
    ProfileCodec,
    sample_cs_ne,
)
from pmac.errors import CapExceededError, StructuralError
from pmac.model import CsProfile, GainMatrix, GameConfig
from pmac.tests.conftest import random_instance


class TestProfileCodec:
    """Test the vertex numbering."""

    def test_little_endian(self):
        """Player 1 varies fastest."""
        codec = ProfileCodec(3, 2)
        assert codec.size == 8
        assert codec.decode(1) == CsProfile((1, 0, 0))
        assert codec.decode(6) == CsProfile((0, 1, 1))
        assert codec.encode(CsProfile((1, 1, 0))) == 3

    def test_encode_decode_agree(self):
        codec = ProfileCodec(4, 3)
        assert [codec.encode(codec.decode(i)) for i in range(codec.size)] == list(range(codec.size))

    def test_decode_block_matches_decode(self):
        codec = ProfileCodec(3, 3)
        block = codec.decode_block(0, codec.size)
        assert not block.flags.writeable
        assert [tuple(row) for row in block.tolist()] == [codec.decode(i).choices for i in range(codec.size)]

    def test_neighbors_differ_in_one_player(self):
        codec = ProfileCodec(3, 3)
        for i in range(codec.size):
            neighbors = codec.neighbors(i)
            assert len(neighbors) == 3 * 2
            assert all(profile_distance(codec.decode(i), codec.decode(j)) == 1 for j in neighbors)

    def test_out_of_range(self):
        codec = ProfileCodec(2, 2)
        with pytest.raises(StructuralError):
            codec.decode(4)
        with pytest.raises(StructuralError):
            codec.encode(CsProfile((0, 2)))


class TestEnumerateCsNe:
    """Test exhaustive equilibrium search."""

    def test_single_player_picks_best_channel(self):
        config = GameConfig.uniform(1, 3)
        report = enumerate_cs_ne(GainMatrix([[5.0, 1.0, 2.0]]), config)
        assert report.profiles == [CsProfile((0,))]
        assert report.equilibria[0].label == "potential-max"
        assert report.exhaustive

    def test_symmetric_two_by_two(self):
        """Splitting beats sharing: exactly the two orthogonal profiles."""
        config = GameConfig.uniform(2, 2)
        report = enumerate_cs_ne(GainMatrix(np.ones((2, 2))), config)
        assert set(report.profiles) == {CsProfile((0, 1)), CsProfile((1, 0))}
        assert report.equilibria[0].potential == pytest.approx(1.0)
        assert report.count <= report.bound == 2

    def test_exact_tie_is_counted(self):
        """Equal gains make both channels weak equilibria and are reported as ties."""
        config = GameConfig.uniform(1, 2)
        report = enumerate_cs_ne(GainMatrix([[1.0, 1.0]]), config)
        assert report.count == 2
        assert report.near_ties > 0

    def test_tie_tolerance_validated(self):
        config = GameConfig.uniform(1, 2)
        with pytest.raises(StructuralError):
            enumerate_cs_ne(GainMatrix([[1.0, 2.0]]), config, tie_tolerance=-1.0)

    def test_cap_exceeded(self):
        config = GameConfig.uniform(3, 2)
        with pytest.raises(CapExceededError) as info:
            enumerate_cs_ne(GainMatrix(np.ones((3, 2))), config, cap=7)
        assert info.value.size == 8
        assert info.value.cap == 7
        assert "sampling" in str(info.value)

    def test_potential_maximizer_is_global(self, rng):
        """The profile labeled potential-max has the largest potential of all profiles."""
        for _ in range(50):
            config, gains = random_instance(rng)
            report = enumerate_cs_ne(gains, config)
            best = report.potential_maximizer()
            assert best.label == "potential-max"
            assert best.potential == pytest.approx(float(np.max(potential_values(gains, config))), abs=1e-12)

    def test_threaded_ranges_match_serial(self, rng):
        """Splitting the scan over threads gives the same report."""
        config = GameConfig.for_channel_snr(4, 3, snr=100.0)
        gains = GainMatrix(rng.exponential(1.0, (4, 3)))
        serial = enumerate_cs_ne(gains, config, workers=1)
        with patch("pmac.cs_enumerator.Enumeration", EnumerationConfig(chunk_size=7)):
            threaded = enumerate_cs_ne(gains, config, workers=3)
        assert threaded.profiles == serial.profiles
        assert [e.label for e in threaded.equilibria] == [e.label for e in serial.equilibria]

    def test_count_within_bound(self, rng):
        for _ in range(300):
            config, gains = random_instance(rng)
            report = enumerate_cs_ne(gains, config)
            assert 1 <= report.count <= ne_upper_bound(config.num_players, config.num_channels).L_max

    def test_three_players_two_channels_at_most_three(self, rng):
        """An all-on-one-channel equilibrium excludes the three lone-player profiles."""
        for _ in range(300):
            config = GameConfig.for_channel_snr(3, 2, snr=1000.0)
            report = enumerate_cs_ne(GainMatrix(rng.exponential(1.0, (3, 2))), config)
            assert 1 <= report.count <= 3

    @pytest.mark.slow
    @pytest.mark.parametrize("num_channels,snr_grid_db,observed_max", [
        (2, [-5.0, -2.5, 0.0, 2.5, 5.0], 3),
        (3, [40.0], 6),
    ])
    def test_three_players_observed_maximum(self, rng, num_channels, snr_grid_db, observed_max):
        """Over 10^4 draws per SNR the largest count is reached and never exceeded.

        With two channels three equilibria only show up around 0 dB; with
        three channels six is the common case at high SNR.
        """
        bound = ne_upper_bound(3, num_channels).L_max
        counts = []
        for snr_db in snr_grid_db:
            config = GameConfig.for_channel_snr(3, num_channels, snr=10.0 ** (snr_db / 10.0))
            for _ in range(10_000):
                report = enumerate_cs_ne(GainMatrix(rng.exponential(1.0, (3, num_channels))), config,
                                         workers=1)
                counts.append(report.count)
        assert min(counts) >= 1
        assert max(counts) == observed_max
        assert observed_max < bound


class TestCsGraph:
    """Test the oriented deviation graph."""

    FIG_RANKS = {
        (1, 1, 1): 8, (2, 2, 1): 7, (1, 2, 1): 6, (2, 1, 1): 5,
        (1, 1, 2): 4, (2, 2, 2): 3, (2, 1, 2): 2, (1, 2, 2): 1,
    }

    def test_three_player_graph_shape(self):
        """K=3, S=2: eight vertices with three neighbors each."""
        config = GameConfig.uniform(3, 2)
        graph = build_cs_graph(GainMatrix(np.ones((3, 2)) + np.eye(3, 2)), config)
        adjacency = graph.adjacency_graph()
        assert adjacency.number_of_nodes() == 8
        assert all(degree == 3 for _, degree in adjacency.degree())

    def test_ranked_ordering_has_two_sinks(self):
        """Ranking the eight vertices leaves sinks at (1,1,1) and (2,2,1)."""
        codec = ProfileCodec(3, 2)
        phi = np.zeros(codec.size)
        for labels, rank in self.FIG_RANKS.items():
            phi[codec.encode(CsProfile.from_labels(labels))] = rank
        graph = orient_by_potential(codec, phi)
        assert [p.labels for p in graph.sink_profiles()] == [(1, 1, 1), (2, 2, 1)]

    def test_orientation_points_uphill(self):
        codec = ProfileCodec(2, 3)
        phi = np.arange(codec.size, dtype=float)
        graph = orient_by_potential(codec, phi)
        assert all(phi[j] > phi[i] for i, j in graph.orientation.edges())
        assert graph.sinks() == [codec.size - 1]

    def test_potential_length_checked(self):
        with pytest.raises(StructuralError):
            orient_by_potential(ProfileCodec(2, 2), np.zeros(3))

    def test_sinks_equal_equilibria(self, rng):
        """Sinks of the oriented graph are exactly the pure equilibria."""
        for _ in range(300):
            config, gains = random_instance(rng)
            report = enumerate_cs_ne(gains, config)
            graph = build_cs_graph(gains, config)
            assert graph.sink_profiles() == report.profiles

    def test_graph_cap(self):
        config = GameConfig.uniform(3, 2)
        with pytest.raises(CapExceededError):
            build_cs_graph(GainMatrix(np.ones((3, 2))), config, cap=4)

    def test_exports(self, tmp_path):
        codec = ProfileCodec(2, 2)
        graph = orient_by_potential(codec, np.array([0.0, 1.0, 2.0, 0.5]))
        edges = graph.write_edge_list(tmp_path / "g.edges").read_text().splitlines()
        assert edges == ["0 1", "0 2", "3 1", "3 2"]
        vertices = graph.write_vertex_table(tmp_path / "g.vertices").read_text().splitlines()
        assert vertices[0] == "0: (1,1) phi=0"
        assert vertices[2] == "2: (1,2) phi=2"


class TestBestResponseDescent:
    """Test best responses and descent."""

    def test_best_channel_single_player(self):
        config = GameConfig.uniform(1, 3)
        assert best_channel(GainMatrix([[1.0, 4.0, 2.0]]), config, 0, CsProfile((0,))) == 1

    def test_best_channel_avoids_crowded_channel(self):
        config = GameConfig.uniform(2, 2)
        gains = GainMatrix([[1.0, 0.9], [5.0, 1.0]])
        assert best_channel(gains, config, 0, CsProfile((0, 0))) == 1

    def test_descent_ends_at_equilibrium(self, rng):
        for _ in range(100):
            config, gains = random_instance(rng)
            result = br_descent_cs(gains, config, rng)
            assert result.converged
            assert result.profile in enumerate_cs_ne(gains, config).profiles

    def test_descent_needs_start(self):
        config = GameConfig.uniform(1, 2)
        with pytest.raises(StructuralError):
            br_descent_cs(GainMatrix([[1.0, 2.0]]), config)

    def test_descent_from_equilibrium_does_not_move(self):
        config = GameConfig.uniform(2, 2)
        result = br_descent_cs(GainMatrix(np.ones((2, 2))), config, initial=CsProfile((0, 1)))
        assert result.profile == CsProfile((0, 1))
        assert result.moves == 0
        assert result.sweeps == 1

    def test_sampled_report(self, rng):
        """Sampled equilibria are a subset of the enumerated ones."""
        config = GameConfig.for_channel_snr(4, 3, snr=100.0)
        gains = GainMatrix(rng.exponential(1.0, (4, 3)))
        sampled = sample_cs_ne(gains, config, rng, starts=6)
        assert not sampled.exhaustive
        assert set(sampled.profiles) <= set(enumerate_cs_ne(gains, config).profiles)
        assert sampled.potential_maximizer().label == "sampled-max"
        assert sum(e.label == "sampled-max" for e in sampled.equilibria) == 1


class TestCounting:
    """Test bounds and distances."""

    @pytest.mark.parametrize("k, s, bound", [(3, 2, 4), (3, 3, 7), (2, 2, 2), (1, 5, 1), (4, 2, 8)])
    def test_upper_bound(self, k, s, bound):
        assert ne_upper_bound(k, s).L_max == bound

    def test_fraction_estimate(self):
        assert ne_fraction_estimate(10, 2) == pytest.approx(1.0)
        assert ne_fraction_estimate(10, 3) == pytest.approx(2 * (2 / 3) ** 10)
        assert ne_fraction_estimate(200, 4) < 1e-50
        with pytest.raises(StructuralError):
            ne_fraction_estimate(3, 1)

    def test_profile_distance(self):
        a = CsProfile.from_labels((1, 1, 1))
        assert profile_distance(a, a) == 0
        assert profile_distance(a, CsProfile.from_labels((2, 1, 1))) == 1
        assert profile_distance(a, CsProfile.from_labels((1, 2, 2))) == 2
        with pytest.raises(StructuralError):
            profile_distance(a, CsProfile((0,)))
