import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathrank.errors import ParseError, ValidationError
from pathrank.network import (CostKind, Edge, RoadNetwork, dumps_network, fuel_rate,
                              generate_grid_network, grid_edge_samples, load_network,
                              loads_network, path_cost, path_costs)

from conftest import enumerate_simple_paths


class TestLoadNetwork:
    def test_header_and_three_edges(self):
        net = loads_network("4\n0 1 100 10 8\n1 2 50 5 4\n0 2 200 12 15\n")
        assert net.vertex_count == 4
        assert net.edge_count == 3
        assert net.edge(0, 2) == Edge(0, 2, 200.0, 12.0, 15.0)

    def test_self_loop_rejected(self):
        with pytest.raises(ValidationError, match="self-loop"):
            loads_network("4\n0 0 100 10 8\n")

    def test_non_positive_cost_rejected(self):
        with pytest.raises(ValidationError, match="non-positive distance"):
            loads_network("4\n0 1 -5 10 8\n")

    def test_endpoint_out_of_range(self):
        with pytest.raises(ValidationError, match="out of range"):
            loads_network("2\n0 2 1 1 1\n")

    def test_duplicate_edge(self):
        with pytest.raises(ValidationError, match="duplicate"):
            loads_network("3\n0 1 1 1 1\n0 1 2 2 2\n")

    @pytest.mark.parametrize("text, lineno", [
        ("3\n0 1 1 1\n", 2),
        ("3\n0 1 1 1 x\n", 2),
        ("3\n\n0 1 1 1 1\n1 a 1 1 1\n", 4),
    ])
    def test_parse_error_carries_line_number(self, text, lineno):
        with pytest.raises(ParseError, match=f"line {lineno}"):
            loads_network(text)

    def test_empty_file(self):
        with pytest.raises(ParseError):
            loads_network("")

    def test_fractional_costs_and_comments(self):
        net = loads_network("# tiny\n2\n0 1 1.5 0.25 0.125  # an edge\n")
        assert net.cost(0, 1, CostKind.TRAVEL_TIME) == 0.25


class TestRoundTrip:
    def test_grid_round_trip_is_bit_exact(self):
        net = generate_grid_network(4, 5, seed=3)
        again = loads_network(dumps_network(net))
        assert again.vertex_count == net.vertex_count
        np.testing.assert_array_equal(again.indptr, net.indptr)
        np.testing.assert_array_equal(again.indices, net.indices)
        assert again.costs.tobytes() == net.costs.tobytes()
        assert dumps_network(again) == dumps_network(net)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5),
                              st.floats(1e-3, 1e6), st.floats(1e-3, 1e6), st.floats(1e-3, 1e6)),
                    max_size=20))
    def test_arbitrary_costs_round_trip(self, rows):
        edges = {}
        for u, v, d, t, f in rows:
            if u != v:
                edges[(u, v)] = Edge(u, v, d, t, f)
        net = RoadNetwork.from_edges(6, edges.values())
        buf = io.StringIO(dumps_network(net))
        assert load_network(buf).edges() == net.edges()


class TestGrid:
    def test_two_by_two(self):
        net = generate_grid_network(2, 2, seed=7)
        assert net.vertex_count == 4
        assert net.edge_count == 8

    def test_deterministic(self):
        a = generate_grid_network(3, 3, seed=7)
        b = generate_grid_network(3, 3, seed=7)
        assert a.costs.tobytes() == b.costs.tobytes()
        assert dumps_network(a) == dumps_network(b)

    def test_seed_matters(self):
        assert dumps_network(generate_grid_network(3, 3, 1)) != dumps_network(generate_grid_network(3, 3, 2))

    @pytest.mark.parametrize("seed", [0, 7, 123])
    def test_costs_follow_sampled_speeds(self, seed):
        net = generate_grid_network(2, 2, seed=seed)
        samples = grid_edge_samples(2, 2, seed)
        assert len(samples) == net.edge_count
        for u, v, dist, speed in samples:
            e = net.edge(u, v)
            assert 8.0 <= speed <= 25.0
            assert 50.0 <= dist <= 500.0
            assert e.distance == dist
            assert e.travel_time == dist / speed
            assert e.fuel == dist * (0.06 + 0.04 / (speed / 25.0))

    def test_fuel_not_proportional_to_distance(self):
        net = generate_grid_network(4, 4, seed=1)
        ratio = net.costs[:, 2] / net.costs[:, 0]
        assert ratio.max() - ratio.min() > 0.01

    def test_fuel_rate_decreases_with_speed(self):
        assert fuel_rate(8.0) > fuel_rate(16.0) > fuel_rate(25.0)

    @pytest.mark.parametrize("rows, cols", [(1, 5), (5, 1)])
    def test_too_small(self, rows, cols):
        with pytest.raises(ValidationError):
            generate_grid_network(rows, cols, 0)

    def test_size_bound(self):
        with pytest.raises(ValidationError, match="exceeds"):
            generate_grid_network(400, 300, 0)


class TestPathCost:
    def test_sum_over_two_edges(self, line_network):
        assert path_cost(line_network, (0, 1, 2), CostKind.DISTANCE) == 150.0

    def test_single_edge_fuel(self, line_network):
        assert path_cost(line_network, (0, 2), CostKind.FUEL) == 15.0

    def test_non_edge_rejected(self, line_network):
        with pytest.raises(ValidationError, match="no edge"):
            path_cost(line_network, (2, 0), CostKind.DISTANCE)

    def test_brute_force_paths_on_grid(self, grid3):
        paths = enumerate_simple_paths(grid3, 0, 8)
        assert len(paths) == 12
        for p in paths:
            for kind in CostKind:
                expected = 0.0
                for u, v in zip(p[:-1], p[1:]):
                    expected += float(grid3.costs[grid3.edge_id(u, v), kind.column])
                assert path_cost(grid3, p, kind) == expected

    def test_extension_strictly_increases_every_cost(self, grid3):
        for p in enumerate_simple_paths(grid3, 0, 8):
            for cut in range(2, len(p)):
                shorter, longer = path_costs(grid3, p[:cut]), path_costs(grid3, p[:cut + 1])
                assert all(b > a for a, b in zip(shorter, longer))


class TestCostKind:
    @pytest.mark.parametrize("name, kind", [("distance", CostKind.DISTANCE), ("TT", CostKind.TRAVEL_TIME),
                                            ("fuel", CostKind.FUEL), ("travel-time", CostKind.TRAVEL_TIME)])
    def test_parse(self, name, kind):
        assert CostKind.parse(name) is kind

    def test_unknown(self):
        with pytest.raises(ValidationError):
            CostKind.parse("toll")
