"""
Tests for device graphs, calibration and layout files
"""

import json
import unittest

import networkx as nx

from entbench.core.errors import LayoutParseError, LayoutValidationError, UnknownQubitError
from entbench.core.topology import (
    NAMED_LAYOUTS,
    Calibration,
    DeviceGraph,
    connected_components,
    degree,
    eagle_127,
    edge_key,
    falcon_27,
    heavy_hex,
    is_bipartite,
    linear,
    load_layout,
    neighbors,
    save_layout,
    t_layout,
    validate_calibration,
)
from test_utils import BaseTestCase


class TestDeviceGraph(unittest.TestCase):
    """Structural invariants of DeviceGraph"""

    def test_edges_are_canonical(self):
        g = DeviceGraph.from_edges(3, [(1, 0), (2, 1)])
        self.assertEqual(g.sorted_edges, ((0, 1), (1, 2)))
        self.assertTrue(g.has_edge(1, 0))
        self.assertEqual(edge_key(5, 2), (2, 5))

    def test_rejects_self_loop(self):
        with self.assertRaises(LayoutValidationError):
            DeviceGraph.from_edges(2, [(1, 1)])

    def test_rejects_duplicate_edge(self):
        with self.assertRaises(LayoutValidationError):
            DeviceGraph.from_edges(3, [(0, 1), (1, 0)])

    def test_rejects_out_of_range(self):
        with self.assertRaises(LayoutValidationError):
            DeviceGraph.from_edges(2, [(0, 2)])

    def test_rejects_edge_on_inactive_qubit(self):
        with self.assertRaises(LayoutValidationError):
            DeviceGraph.from_edges(3, [(0, 1)], inactive=[1])

    def test_with_inactive_keeps_indices(self):
        g = linear(5).with_inactive([2])
        self.assertEqual(g.n_qubits, 5)
        self.assertEqual(g.active_qubits, (0, 1, 3, 4))
        self.assertEqual(g.sorted_edges, ((0, 1), (3, 4)))
        self.assertFalse(g.is_active(2))
        self.assertEqual(len(connected_components(g)), 2)

    def test_without_edges(self):
        g = linear(4).without_edges([(2, 1)])
        self.assertEqual(g.sorted_edges, ((0, 1), (2, 3)))
        with self.assertRaises(LayoutValidationError):
            linear(4).without_edges([(0, 3)])

    def test_degree_and_neighbors(self):
        g = t_layout()
        self.assertEqual(degree(g, 1), 3)
        self.assertEqual(neighbors(g, 1), frozenset({0, 2, 3}))
        with self.assertRaises(UnknownQubitError):
            degree(g, 9)

    def test_networkx_view(self):
        graph = linear(4).with_inactive([3]).to_networkx()
        self.assertEqual(sorted(graph.nodes), [0, 1, 2])
        self.assertEqual(graph.number_of_edges(), 2)


class TestLattices(unittest.TestCase):
    """Heavy-hex generator and named layouts"""

    def test_eagle_layout(self):
        g = eagle_127()
        self.assertEqual(len(g.active_qubits), 127)
        self.assertEqual(len(g.edges), 144)
        self.assertEqual(g.max_degree, 3)
        self.assertTrue(is_bipartite(g))
        self.assertTrue(nx.is_connected(g.to_networkx()))

    def test_heavy_hex_counts(self):
        g = heavy_hex(1, 1)
        # one hexagon: two chains of 5 plus 2 bridges
        self.assertEqual(g.n_qubits, 12)
        self.assertEqual(len(g.edges), 12)
        self.assertEqual(max(len(c) for c in nx.cycle_basis(g.to_networkx())), 12)

    def test_heavy_hex_is_heavy(self):
        """No two degree-3 qubits are adjacent"""
        g = heavy_hex(4, 4)
        for a, b in g.sorted_edges:
            self.assertFalse(degree(g, a) == 3 and degree(g, b) == 3)
        self.assertTrue(is_bipartite(g))

    def test_heavy_hex_rejects_empty(self):
        with self.assertRaises(ValueError):
            heavy_hex(0, 2)

    def test_named_layouts(self):
        for name, factory in NAMED_LAYOUTS.items():
            g = factory()
            self.assertEqual(g.name, name)
            self.assertTrue(nx.is_connected(g.to_networkx()))
            self.assertLessEqual(g.max_degree, 3)
        self.assertEqual(len(falcon_27().active_qubits), 27)
        self.assertEqual(linear(5).name, "line-5")


class TestCalibration(BaseTestCase):
    """Calibration defaults, validation and layout files"""

    def test_uniform_calibration(self):
        g = linear(3)
        cal = Calibration.uniform(g, cx_error=0.02, readout_flip=0.05)
        self.assertEqual(cal.edge(2, 1).cx_error, 0.02)
        self.assertAlmostEqual(cal.qubit(0).flip_probability(0), 0.05)
        self.assertAlmostEqual(cal.qubit(0).flip_probability(1), 0.05)
        validate_calibration(g, cal)

    def test_unknown_entries(self):
        cal = Calibration.default_for(linear(2))
        with self.assertRaises(UnknownQubitError):
            cal.qubit(7)
        with self.assertRaises(UnknownQubitError):
            cal.edge(0, 5)

    def test_t2_above_twice_t1_is_rejected(self):
        g = linear(2)
        cal = Calibration.uniform(g).with_qubit(0, t1_us=50.0, t2_us=150.0)
        with self.assertRaises(LayoutValidationError):
            validate_calibration(g, cal)

    def test_readout_rows_must_sum_to_one(self):
        g = linear(2)
        cal = Calibration.uniform(g).with_qubit(1, readout=((0.9, 0.2), (0.0, 1.0)))
        with self.assertRaises(LayoutValidationError):
            validate_calibration(g, cal)

    def test_layout_file_round_trip(self):
        g = linear(4).with_inactive([3])
        cal = Calibration.uniform(g, cx_error=0.015, zz_rate_mhz=0.1).with_edge(0, 1, cx_error=0.03)
        path = save_layout(self.get_temp_file_path("layout.json"), g, cal)

        loaded_g, loaded_cal = load_layout(path)
        self.assertEqual(loaded_g, g)
        self.assertEqual(loaded_cal, cal)

    def test_partial_calibration_takes_defaults(self):
        path = self.get_temp_file_path("partial.json")
        with open(path, "w") as f:
            json.dump({"n_qubits": 2, "edges": [[0, 1]], "calibration": {"edges": {"0-1": {"cx_error": 0.05}}}}, f)

        g, cal = load_layout(path)
        self.assertEqual(cal.edge(0, 1).cx_error, 0.05)
        self.assertEqual(cal.qubit(1), Calibration.default_for(g).qubit(1))

    def test_malformed_layout_files(self):
        bad_json = self.get_temp_file_path("bad.json")
        with open(bad_json, "w") as f:
            f.write("{not json")
        with self.assertRaises(LayoutParseError):
            load_layout(bad_json)

        bad_schema = self.get_temp_file_path("schema.json")
        with open(bad_schema, "w") as f:
            json.dump({"n_qubits": 2, "edges": [[0, 1]], "colour": "blue"}, f)
        with self.assertRaises(LayoutParseError):
            load_layout(bad_schema)

        with self.assertRaises(LayoutParseError):
            load_layout(self.get_temp_file_path("missing.json"))

    def test_edge_key_must_be_ordered(self):
        path = self.get_temp_file_path("order.json")
        with open(path, "w") as f:
            json.dump({"n_qubits": 2, "edges": [[0, 1]], "calibration": {"edges": {"1-0": {}}}}, f)
        with self.assertRaises(LayoutValidationError):
            load_layout(path)


def test_layout_fixture_loads(layout_file, line_device):
    g, cal = load_layout(layout_file)
    assert g.sorted_edges == line_device.sorted_edges
    assert cal.edge(0, 1) == Calibration.default_for(line_device).edge(0, 1)


if __name__ == '__main__':
    unittest.main()
