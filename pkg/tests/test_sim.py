"""
Tests for the density-matrix simulator, result distributions and light cones
"""

import unittest

import numpy as np

from entbench.core.circuit import Circuit, Gate, PauliBasis, build_ghz, build_graph_state, build_qst_batch
from entbench.core.config import BenchConfig
from entbench.core.embed import embed_ghz, schedule_graph_state, tomography_set
from entbench.core.errors import CircuitError, SimulationSizeError
from entbench.core.noise import NoiseModel
from entbench.core.sim import (
    CountsDistribution,
    DensityMatrix,
    DensityMatrixSimulator,
    ProbDistribution,
    distribution_from_dict,
    fidelity,
    ghz_state,
    graph_state,
    light_cone_reduce,
)
from entbench.core.topology import Calibration, linear
from test_utils import BaseTestCase, TestFixtures


def random_circuit(n: int, depth: int, seed: int) -> Circuit:
    rng = np.random.default_rng(seed)
    ops = []
    for _ in range(depth):
        choice = rng.integers(5)
        if choice == 0:
            ops.append(Gate.h(int(rng.integers(n))))
        elif choice == 1:
            ops.append(Gate.x(int(rng.integers(n))))
        elif choice == 2:
            ops.append(Gate.phase(int(rng.integers(n)), float(rng.uniform(0, 2 * np.pi))))
        else:
            a, b = rng.choice(n, size=2, replace=False)
            ops.append(Gate.cx(int(a), int(b)) if choice == 3 else Gate.cz(int(a), int(b)))
    order = rng.permutation(n)
    ops.extend(Gate.measure(int(q), k) for k, q in enumerate(order))
    return Circuit(n, tuple(ops), n)


class TestDistributions(unittest.TestCase):
    """Counts and probability containers"""

    def test_counts_validation(self):
        with self.assertRaises(ValueError):
            CountsDistribution({"01": 3}, 4)
        with self.assertRaises(ValueError):
            CountsDistribution({"01": 1, "1": 1}, 2)
        with self.assertRaises(ValueError):
            CountsDistribution({"0a": 2}, 2)

    def test_marginal_orders_clbits(self):
        counts = CountsDistribution({"01": 3, "10": 1}, 4)
        self.assertEqual(counts.marginal([0]).counts, {"0": 1, "1": 3})
        self.assertEqual(counts.marginal([1, 0]).counts, {"01": 1, "10": 3})
        self.assertEqual(counts.frequencies(), {"01": 0.75, "10": 0.25})

    def test_dict_round_trip(self):
        counts = CountsDistribution({"00": 5, "11": 3}, 8)
        self.assertEqual(distribution_from_dict(counts.to_dict()), counts)
        probs = ProbDistribution({"0": 0.25, "1": 0.75})
        self.assertEqual(distribution_from_dict(probs.to_dict()), probs)
        with self.assertRaises(ValueError):
            distribution_from_dict({"values": {}})


class TestDensityMatrix(unittest.TestCase):
    """Reference states and reductions"""

    def test_ghz_and_graph_states(self):
        ghz = ghz_state(3)
        self.assertAlmostEqual(ghz.trace(), 1.0)
        self.assertAlmostEqual(ghz.purity(), 1.0)
        self.assertAlmostEqual(fidelity(ghz, ghz), 1.0)
        reduced = ghz.partial_trace([0, 2])
        np.testing.assert_allclose(reduced.data, np.diag([0.5, 0, 0, 0.5]), atol=1e-12)

        pair = graph_state([(0, 1)], [0, 1])
        self.assertTrue(pair.is_hermitian())
        np.testing.assert_allclose(pair.probabilities(), [0.25] * 4, atol=1e-12)

    def test_fidelity_needs_pure_reference(self):
        mixed = DensityMatrix(np.eye(2) / 2)
        with self.assertRaises(ValueError):
            fidelity(mixed, mixed)

    def test_shape_checks(self):
        with self.assertRaises(ValueError):
            DensityMatrix(np.eye(3))
        with self.assertRaises(ValueError):
            DensityMatrix(np.eye(2), (0, 1))


class TestSimulator(BaseTestCase):
    """DensityMatrixSimulator"""

    def test_matches_dense_reference(self):
        sim = DensityMatrixSimulator()
        for seed in range(6):
            circuit = random_circuit(4, 20, seed)
            self.assert_distribution_close(
                sim.probabilities(circuit).probabilities, self.fixtures.ideal_outcomes(circuit), places=9
            )

    def test_exact_state_of_ghz(self):
        ops = (Gate.h(1), Gate.cx(1, 2), Gate.cx(2, 3))
        state = DensityMatrixSimulator().exact_state(Circuit(5, ops))
        self.assertEqual(state.qubits, (1, 2, 3))
        self.assertAlmostEqual(fidelity(state, ghz_state(3)), 1.0)

    def test_sampling_is_seeded(self):
        sim = DensityMatrixSimulator()
        circuit = Circuit(2, (Gate.h(0), Gate.cx(0, 1), Gate.measure(0, 0), Gate.measure(1, 1)), 2)
        first = sim.sample(circuit, 1000, 7, 0)
        second = sim.sample(circuit, 1000, 7, 0)
        self.assertEqual(first, second)
        self.assertEqual(set(first.counts), {"00", "11"})
        self.assertEqual(sim.run([circuit, circuit], 1000, 7)[0], first)
        with self.assertRaises(ValueError):
            sim.sample(circuit, 0, 7)

    def test_large_register_sampling_path(self):
        sim = DensityMatrixSimulator(config=BenchConfig(max_exact_sampling_bits=1))
        circuit = Circuit(2, (Gate.h(0), Gate.measure(0, 0), Gate.measure(1, 1)), 2)
        counts = sim.sample(circuit, 500, 3)
        self.assertEqual(counts.shots, 500)
        self.assertEqual(set(counts.counts), {"00", "01"})

    def test_unmeasured_clbits_read_zero(self):
        circuit = Circuit(3, (Gate.x(2), Gate.measure(2, 1)), 3)
        probs = DensityMatrixSimulator().probabilities(circuit)
        self.assertEqual(probs.probabilities, {"010": 1.0})

    def test_size_cap(self):
        sim = DensityMatrixSimulator(config=BenchConfig(max_sv_qubits=3))
        ops = tuple(Gate.h(q) for q in range(4)) + tuple(Gate.measure(q, q) for q in range(4))
        with self.assertRaises(SimulationSizeError):
            sim.probabilities(Circuit(4, ops, 4))

    def test_mid_circuit_measurement_rejected(self):
        circuit = Circuit(1, (Gate.measure(0, 0), Gate.h(0)), 1)
        with self.assertRaises(CircuitError):
            DensityMatrixSimulator().probabilities(circuit)
        with self.assertRaises(CircuitError):
            DensityMatrixSimulator().probabilities(Circuit(1, (Gate.h(0),)))

    def test_readout_confusion(self):
        g = linear(1)
        cal = Calibration.uniform(g, readout_flip=0.1)
        sim = DensityMatrixSimulator(NoiseModel.readout_only(g, cal))
        zero = sim.probabilities(Circuit(1, (Gate.measure(0, 0),), 1))
        one = sim.probabilities(Circuit(1, (Gate.x(0), Gate.measure(0, 0)), 1))
        self.assertAlmostEqual(zero.probabilities["1"], 0.1)
        self.assertAlmostEqual(one.probabilities["0"], 0.1)


class TestLightCone(unittest.TestCase):
    """Radius-2 reduction of tomography sets"""

    def test_cone_of_line(self):
        g = linear(7)
        cone = light_cone_reduce(g, tomography_set(g, 2, 3))
        self.assertEqual(cone.qubits, (0, 1, 2, 3, 4, 5))
        self.assertEqual(cone.edges, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5)))
        self.assertEqual(cone.dephase, ((5,),))
        self.assertEqual(cone.n_qubits, 6)

    def test_cone_reproduces_reduced_graph_state(self):
        g = linear(8)
        schedule = schedule_graph_state(g)
        ts = tomography_set(g, 3, 4)
        sim = DensityMatrixSimulator()

        full = sim.exact_state(build_graph_state(schedule)).partial_trace(ts.measured)

        cone = light_cone_reduce(g, ts)
        reduced = build_qst_batch(
            schedule.restrict(cone.qubits), [ts], (PauliBasis.Z, PauliBasis.Z), dephase=cone.dephase
        )
        local = sim.exact_state(reduced).partial_trace(ts.measured)
        np.testing.assert_allclose(local.data, full.data, atol=1e-10)


class TestOracleAgreement(unittest.TestCase):
    """The simulator's graph state matches the closed form"""

    def test_graph_state_fidelity(self):
        g = linear(4)
        schedule = schedule_graph_state(g)
        state = DensityMatrixSimulator().exact_state(build_graph_state(schedule))
        ideal = graph_state(g.sorted_edges, g.active_qubits)
        self.assertAlmostEqual(fidelity(state, ideal), 1.0)
        psi = TestFixtures.dense_statevector(build_graph_state(schedule)).reshape(-1)
        self.assertAlmostEqual(abs(np.vdot(psi, ideal.data @ psi)), 1.0)


def test_ideal_backend_runs_embedded_ghz(ideal_backend, line_device):
    emb = embed_ghz(line_device, Calibration.uniform(line_device), 2, 5)
    state = ideal_backend.exact_state(build_ghz(emb))
    assert abs(fidelity(state, ghz_state(5)) - 1.0) < 1e-9

    probs = ideal_backend.probabilities(build_ghz(emb, measure=True)).probabilities
    assert set(probs) == {"00000", "11111"}
    assert abs(probs["11111"] - 0.5) < 1e-9


if __name__ == '__main__':
    unittest.main()
