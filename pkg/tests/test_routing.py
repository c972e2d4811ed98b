import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathrank import _fallback, kernels
from pathrank.errors import NoPathError, ValidationError
from pathrank.network import COST_KINDS, CostKind, Edge, RoadNetwork, generate_grid_network, path_cost
from pathrank.routing import (DiversifiedParams, dijkstra, diversified_top_k, diversify,
                              multi_cost_diversified, read_paths, top_k, validate_path,
                              weighted_jaccard, write_paths, yen_next_shortest)

from conftest import enumerate_simple_paths, random_network, sorted_by_cost


def greedy_filter(network, ordered_paths, k, delta):
    kept = []
    for p in ordered_paths:
        if len(kept) == k:
            break
        if all(weighted_jaccard(network, p, q) < delta for q in kept):
            kept.append(p)
    return kept


def two_path_network():
    # 0 -> 1 -> 3 costs 10, 0 -> 2 -> 3 costs 12
    return RoadNetwork.from_edges(4, [Edge(0, 1, 4, 4, 4), Edge(1, 3, 6, 6, 6),
                                      Edge(0, 2, 5, 5, 5), Edge(2, 3, 7, 7, 7)])


class TestDijkstra:
    def test_adjacent_on_grid(self):
        net = generate_grid_network(2, 2, seed=7)
        # the alternative via the other two vertices costs at least 150 m
        if net.cost(0, 1, CostKind.DISTANCE) < 150:
            assert dijkstra(net, 0, 1, CostKind.DISTANCE) == (0, 1)
        best = min(enumerate_simple_paths(net, 0, 1), key=lambda p: path_cost(net, p, CostKind.DISTANCE))
        assert dijkstra(net, 0, 1, CostKind.DISTANCE) == best

    def test_disconnected(self):
        net = RoadNetwork.from_edges(3, [Edge(0, 1, 1, 1, 1)])
        assert dijkstra(net, 0, 2) is None

    def test_invalid_vertex(self, line_network):
        with pytest.raises(ValidationError):
            dijkstra(line_network, 0, 9)

    def test_same_endpoints(self, line_network):
        with pytest.raises(ValidationError):
            dijkstra(line_network, 1, 1)

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_exhaustive_minimum(self, seed):
        net = random_network(seed, integer_costs=seed % 2 == 0)
        paths = enumerate_simple_paths(net, 0, net.vertex_count - 1)
        for kind in COST_KINDS:
            got = dijkstra(net, 0, net.vertex_count - 1, kind)
            if not paths:
                assert got is None
            else:
                assert got == sorted_by_cost(net, paths, kind)[0]

    def test_tie_goes_to_lexicographically_smaller(self):
        net = RoadNetwork.from_edges(4, [Edge(0, 2, 1, 1, 1), Edge(2, 3, 1, 1, 1),
                                         Edge(0, 1, 1, 1, 1), Edge(1, 3, 1, 1, 1)])
        assert dijkstra(net, 0, 3) == (0, 1, 3)


class TestYen:
    def test_two_paths_in_order_then_end(self):
        net = two_path_network()
        assert list(yen_next_shortest(net, 0, 3, CostKind.DISTANCE)) == [(0, 1, 3), (0, 2, 3)]

    def test_first_equals_dijkstra(self):
        net = generate_grid_network(4, 4, seed=2)
        for kind in COST_KINDS:
            assert next(yen_next_shortest(net, 0, 15, kind)) == dijkstra(net, 0, 15, kind)

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_enumeration(self, seed):
        net = random_network(seed, max_vertices=9, integer_costs=seed % 3 == 0)
        expected_paths = enumerate_simple_paths(net, 0, net.vertex_count - 1)
        for kind in COST_KINDS:
            expected = sorted_by_cost(net, expected_paths, kind)
            assert list(yen_next_shortest(net, 0, net.vertex_count - 1, kind)) == expected

    def test_yields_simple_unique_nondecreasing(self):
        net = generate_grid_network(3, 4, seed=5)
        paths = list(itertools.islice(yen_next_shortest(net, 0, 11, CostKind.TRAVEL_TIME), 60))
        assert len(set(paths)) == len(paths)
        assert all(len(set(p)) == len(p) for p in paths)
        costs = [path_cost(net, p, CostKind.TRAVEL_TIME) for p in paths]
        assert costs == sorted(costs)

    def test_unreachable_stream_is_empty(self):
        net = RoadNetwork.from_edges(3, [Edge(0, 1, 1, 1, 1)])
        assert list(yen_next_shortest(net, 0, 2)) == []

    def test_backends_agree(self):
        net = generate_grid_network(4, 4, seed=9)
        w = np.ascontiguousarray(net.costs[:, 0])
        bv = np.zeros(net.vertex_count, dtype=np.uint8)
        be = np.zeros(net.edge_count, dtype=np.uint8)
        bv[[5, 6]] = 1
        be[net.edge_id(0, 1)] = 1
        for target in range(1, 16):
            a = kernels.spur_dijkstra(net.indptr, net.indices, w, 0, target, 3.5, bv, be)
            b = _fallback.spur_dijkstra(net.indptr, net.indices, w, 0, target, 3.5, bv, be)
            assert a == b


class TestWeightedJaccard:
    @pytest.fixture
    def chain(self):
        # a = 0->1 (2 m), b = 1->2 (3 m), c = 2->3 (5 m)
        return RoadNetwork.from_edges(5, [Edge(0, 1, 2, 1, 1), Edge(1, 2, 3, 1, 1),
                                          Edge(2, 3, 5, 1, 1), Edge(0, 4, 1, 1, 1),
                                          Edge(4, 3, 1, 1, 1)])

    def test_identical(self, chain):
        assert weighted_jaccard(chain, (0, 1, 2, 3), (0, 1, 2, 3)) == 1.0

    def test_disjoint(self, chain):
        assert weighted_jaccard(chain, (0, 1, 2, 3), (0, 4, 3)) == 0.0

    def test_hand_example(self, chain):
        # {a, b} vs {b, c}: 3 / (2 + 3 + 5)
        assert weighted_jaccard(chain, (0, 1, 2), (1, 2, 3)) == pytest.approx(0.3, abs=1e-15)

    def test_direction_matters(self):
        net = RoadNetwork.from_edges(2, [Edge(0, 1, 1, 1, 1), Edge(1, 0, 1, 1, 1)])
        assert weighted_jaccard(net, (0, 1), (1, 0)) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(0, 50), st.integers(0, 50))
    def test_symmetric_and_bounded(self, seed, i, j):
        net = generate_grid_network(3, 3, seed=seed)
        paths = enumerate_simple_paths(net, 0, 8)
        p, q = paths[i % len(paths)], paths[j % len(paths)]
        s = weighted_jaccard(net, p, q)
        assert s == weighted_jaccard(net, q, p)
        assert 0.0 <= s <= 1.0
        assert weighted_jaccard(net, p, p) == 1.0


class TestDiversified:
    def test_k1_is_dijkstra(self):
        net = generate_grid_network(4, 4, seed=3)
        for kind in COST_KINDS:
            assert diversified_top_k(net, 0, 15, kind, DiversifiedParams(1, 0.8)) == [dijkstra(net, 0, 15, kind)]

    def test_no_rejection_replays_yen(self):
        net = generate_grid_network(3, 4, seed=4)
        got = diversified_top_k(net, 0, 11, CostKind.FUEL, DiversifiedParams(7, 1.01))
        assert got == list(itertools.islice(yen_next_shortest(net, 0, 11, CostKind.FUEL), 7))

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("delta", [0.6, 0.8])
    def test_matches_greedy_oracle(self, seed, delta):
        net = random_network(seed)
        dest = net.vertex_count - 1
        expected_paths = enumerate_simple_paths(net, 0, dest)
        if not expected_paths:
            with pytest.raises(NoPathError):
                diversified_top_k(net, 0, dest, CostKind.DISTANCE, DiversifiedParams(3, delta))
            return
        for kind in COST_KINDS:
            expected = greedy_filter(net, sorted_by_cost(net, expected_paths, kind), 3, delta)
            got = diversified_top_k(net, 0, dest, kind, DiversifiedParams(3, delta))
            assert got == expected
            for p, q in itertools.combinations(got, 2):
                assert weighted_jaccard(net, p, q) < delta

    def test_costs_nondecreasing_and_first_optimal(self):
        net = generate_grid_network(5, 5, seed=11)
        got = diversified_top_k(net, 0, 24, CostKind.TRAVEL_TIME, DiversifiedParams(5, 0.6))
        costs = [path_cost(net, p, CostKind.TRAVEL_TIME) for p in got]
        assert costs == sorted(costs)
        assert got[0] == dijkstra(net, 0, 24, CostKind.TRAVEL_TIME)

    def test_smaller_delta_never_keeps_more(self):
        net = generate_grid_network(4, 5, seed=8)
        for lo, hi in [(0.3, 0.6), (0.6, 0.8), (0.8, 1.01)]:
            small = diversify(net, yen_next_shortest(net, 0, 19), DiversifiedParams(6, lo, 40))
            large = diversify(net, yen_next_shortest(net, 0, 19), DiversifiedParams(6, hi, 40))
            if small.capped and large.capped:
                assert len(small.paths) <= len(large.paths)

    def test_cap_is_reported(self, caplog):
        net = generate_grid_network(4, 4, seed=1)
        result = diversify(net, yen_next_shortest(net, 0, 15), DiversifiedParams(5, 0.05, 6))
        assert result.capped and result.examined == 6
        diversified_top_k(net, 0, 15, CostKind.DISTANCE, DiversifiedParams(5, 0.05, 6))
        assert "candidate cap" in caplog.text

    def test_unreachable(self):
        net = RoadNetwork.from_edges(3, [Edge(0, 1, 1, 1, 1)])
        with pytest.raises(NoPathError):
            diversified_top_k(net, 0, 2, CostKind.DISTANCE, DiversifiedParams())

    @pytest.mark.parametrize("kwargs", [dict(k=0), dict(delta=0.0), dict(k=5, max_candidates=4)])
    def test_param_bounds(self, kwargs):
        with pytest.raises(ValidationError):
            DiversifiedParams(**kwargs)


class TestMultiCost:
    def test_coinciding_optima(self):
        net = two_path_network()
        assert multi_cost_diversified(net, 0, 3, DiversifiedParams(1, 0.8)) == [(0, 1, 3)]

    def test_distinct_optima(self):
        # via 1 is shortest, via 2 fastest, via 3 most fuel efficient
        edges = [Edge(0, 1, 1, 5, 5), Edge(1, 4, 1, 5, 5),
                 Edge(0, 2, 5, 1, 5), Edge(2, 4, 5, 1, 5),
                 Edge(0, 3, 5, 5, 1), Edge(3, 4, 5, 5, 1)]
        net = RoadNetwork.from_edges(5, edges)
        per_cost = [dijkstra(net, 0, 4, kind) for kind in COST_KINDS]
        assert len(set(per_cost)) == 3
        assert multi_cost_diversified(net, 0, 4, DiversifiedParams(1, 0.8)) == per_cost

    @pytest.mark.parametrize("seed", range(8))
    def test_union_of_per_cost_results(self, seed):
        net = generate_grid_network(4, 4, seed=seed)
        params = DiversifiedParams(3, 0.8)
        union = multi_cost_diversified(net, 0, 15, params)
        per = [diversified_top_k(net, 0, 15, kind, params) for kind in COST_KINDS]
        assert len(union) == len(set(union)) <= 9
        assert set(union) == set().union(*map(set, per))


def test_top_k_stops_at_total():
    assert top_k(two_path_network(), 0, 3, CostKind.DISTANCE, 5) == [(0, 1, 3), (0, 2, 3)]


def test_validate_path(line_network):
    assert validate_path(line_network, [0, 1, 2]) == (0, 1, 2)
    with pytest.raises(ValidationError):
        validate_path(line_network, [0])
    with pytest.raises(ValidationError):
        validate_path(line_network, [0, 3])


def test_path_file_round_trip(tmp_path):
    paths = [(0, 1, 2), (3, 4)]
    f = tmp_path / "p.txt"
    with open(f, "w") as out:
        write_paths(paths, out)
    with open(f) as inp:
        assert read_paths(inp) == paths
