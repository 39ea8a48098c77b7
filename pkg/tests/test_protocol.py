"""
End-to-end tests of the experiment protocols on small devices
"""

import math
import unittest
from unittest.mock import MagicMock, patch

from entbench.core.config import BenchConfig
from entbench.core.errors import CircuitError, FitError
from entbench.core.protocol import (
    ExperimentRunner,
    Job,
    derive_record,
    mqc_circuit_count,
    run_experiment,
    run_ghz_decay,
    run_ghz_fidelity,
    run_graph_characterisation,
)
from entbench.core.circuit import Circuit, Gate
from entbench.core.noise import NoiseModel
from entbench.core.sim import DensityMatrixSimulator
from entbench.core.topology import Calibration, linear, t_layout
from entbench.schemas import ExperimentKind, ExperimentPlan
from test_utils import TestFixtures


QUIET = BenchConfig(progress=False)


def noiseless(g):
    """Ideal backend with a zero-error calibration"""
    return TestFixtures.noiseless_calibration(g), DensityMatrixSimulator(None, QUIET)


class TestRunner(unittest.TestCase):
    """Worker pool"""

    def test_execute_keys_results(self):
        g = linear(2)
        circuit = Circuit(2, (Gate.h(0), Gate.cx(0, 1), Gate.measure(0, 0), Gate.measure(1, 1)), 2)
        with ExperimentRunner(g, Calibration.uniform(g), BenchConfig(progress=False, threads=2)) as runner:
            results = runner.execute([Job(("a",), circuit, 1), Job(("b",), circuit, 2)], shots=100)
            exact = runner.execute([Job(("c",), circuit, 3)], shots=100, exact=True)
        self.assertEqual(set(results), {("a",), ("b",)})
        self.assertEqual(results[("a",)].shots, 100)
        self.assertIn("00", exact[("c",)].probabilities)

    def test_failures_surface_unwrapped(self):
        g = linear(2)
        backend = MagicMock()
        backend.run.side_effect = CircuitError("bad circuit")
        circuit = Circuit(1, (Gate.measure(0, 0),), 1)
        with ExperimentRunner(g, Calibration.uniform(g), QUIET, backend) as runner:
            with self.assertRaises(CircuitError):
                runner.execute([Job((0,), circuit, 1), Job((1,), circuit, 2)], shots=10)


class TestGhzFidelity(unittest.TestCase):
    """MQC fidelity runs"""

    def test_noiseless_fidelity_is_one(self):
        g = linear(5)
        cal, backend = noiseless(g)
        plan = ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=5, replicates=2, exact=True)
        record = run_ghz_fidelity(g, cal, plan, QUIET, backend)

        self.assertEqual(sorted(record.counts), ["r0", "r1"])
        self.assertEqual(len(record.counts["r0"]["mqc"]), 12)
        mqc = record.derived["mqc"]
        self.assertEqual(mqc["circuits_per_replicate"], mqc_circuit_count(5))
        self.assertEqual(mqc["circuits_per_replicate"], 13)
        for branch in ("raw", "mitigated"):
            summary = mqc["summary"][branch]
            self.assertAlmostEqual(summary["fidelity"]["value"], 1.0, places=6)
            self.assertAlmostEqual(summary["population"]["value"], 1.0, places=6)
            self.assertAlmostEqual(summary["coherence"]["value"], 1.0, places=6)
            self.assertEqual(summary["fidelity"]["n"], 2)
        self.assertEqual(len(record.derived["seeds"]["replicates"]), 2)
        self.assertIn("entbench_version", record.metadata)

    def test_noise_lowers_fidelity(self):
        g = linear(3)
        cal = Calibration.uniform(g, cx_error=0.05, readout_flip=0.05)
        plan = ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=3, exact=True)
        record = run_experiment(g, cal, plan, QUIET)
        summary = record.derived["mqc"]["summary"]
        self.assertLess(summary["raw"]["fidelity"]["value"], 0.95)
        self.assertGreater(summary["mitigated"]["fidelity"]["value"], summary["raw"]["fidelity"]["value"])

    def test_same_counts_for_any_thread_count(self):
        g = linear(3)
        cal = Calibration.uniform(g)
        plan = ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=3, replicates=2, shots=200, seed=42)
        serial = run_ghz_fidelity(g, cal, plan, BenchConfig(progress=False, threads=1))
        parallel = run_ghz_fidelity(g, cal, plan, BenchConfig(progress=False, threads=4))
        self.assertEqual(serial.counts, parallel.counts)
        self.assertEqual(serial.derived, parallel.derived)

    def test_derivation_is_repeatable(self):
        g = linear(3)
        cal = Calibration.uniform(g)
        plan = ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=2, shots=300)
        record = run_ghz_fidelity(g, cal, plan, QUIET)
        self.assertEqual(derive_record(record), record.derived)
        self.assertEqual(record.verify(), [])

    def test_pi_pulse_reaches_every_phase_circuit(self):
        g = linear(3)
        cal, backend = noiseless(g)
        plan = ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=3, exact=True, pi_pulse=True)
        with patch.object(backend, "probabilities", wraps=backend.probabilities) as spy:
            record = run_ghz_fidelity(g, cal, plan, QUIET, backend)

        circuits = [c.args[0] for c in spy.call_args_list]
        self.assertEqual(len(circuits), mqc_circuit_count(3))
        self.assertEqual(sum(1 for c in circuits if c.count_ops().get("x") == 3), 8)
        self.assertTrue(record.plan.pi_pulse)
        summary = record.derived["mqc"]["summary"]["raw"]
        self.assertAlmostEqual(summary["fidelity"]["value"], 1.0, places=6)


class TestGhzDecay(unittest.TestCase):
    """Delay sweeps with decay fits"""

    def test_decay_under_relaxation(self):
        g = linear(4)
        cal = Calibration.uniform(g, t1_us=60.0, t2_us=40.0, cx_error=0.0, readout_flip=0.0)
        plan = ExperimentPlan(
            kind=ExperimentKind.GHZ_DECAY,
            sizes=[2, 3],
            delays_ns=[0, 4_000, 8_000],
            dd=["none", "hahn"],
            exact=True,
        )
        record = run_ghz_decay(g, cal, plan, QUIET)

        self.assertIn("n2_none_r0", record.counts)
        self.assertIn("n3_hahn_r0", record.counts)
        decay = record.derived["decay"]
        self.assertEqual(decay["times_us"], [0.0, 4.0, 8.0])
        self.assertEqual(sorted(decay["schemes"]), ["hahn", "none"])
        for scheme in ("none", "hahn"):
            for size in ("2", "3"):
                entry = decay["schemes"][scheme][size]["raw"]
                coherences = [c["value"] for c in entry["coherence"]]
                self.assertEqual(len(coherences), 3)
                self.assertGreater(coherences[0], coherences[-1])
                self.assertIsNotNone(entry["fit"])
                self.assertGreater(entry["fit"]["alpha_per_us"], 0.0)
        self.assertIn("raw", decay["scaling"]["none"])

    def test_decay_rate_grows_linearly_with_size(self):
        g = linear(9)
        cal = Calibration.uniform(
            g, t2_us=80.0, cx_error=0.0, readout_flip=0.0, sx_error=0.0, detuning_sigma_mhz=0.0
        )
        plan = ExperimentPlan(
            kind=ExperimentKind.GHZ_DECAY,
            sizes=[3, 5, 7, 9],
            delays_ns=[0, 4_000, 8_000, 12_000, 16_000],
            dd=["hahn"],
            exact=True,
        )
        decay = run_ghz_decay(g, cal, plan, QUIET).derived["decay"]

        for size in ("3", "5", "7", "9"):
            entry = decay["schemes"]["hahn"][size]["raw"]
            self.assertAlmostEqual(entry["coherence"][0]["value"], 1.0, places=6)
            self.assertAlmostEqual(entry["overlap_coherence"][0]["value"], 1.0, places=6)
            self.assertGreater(entry["overlap_coherence"][-1]["value"], entry["coherence"][-1]["value"])
        scaling = decay["scaling"]["hahn"]["raw"]
        self.assertGreaterEqual(scaling["r_squared"], 0.99)
        self.assertLess(abs(scaling["slope"] - 1 / 80.0), 0.05 / 80.0)

    def test_needs_three_delays(self):
        g = linear(3)
        plan = ExperimentPlan(kind=ExperimentKind.GHZ_DECAY, sizes=[2], delays_ns=[0, 1_000])
        with self.assertRaises(FitError):
            run_ghz_decay(g, Calibration.uniform(g), plan, QUIET)


class TestGraphCharacterisation(unittest.TestCase):
    """Whole-device graph-state tomography"""

    def characterise(self, g, **fields):
        cal, backend = noiseless(g)
        plan = ExperimentPlan(kind=ExperimentKind.GRAPH_CHARACTERISE, exact=True, **fields)
        return run_graph_characterisation(g, cal, plan, QUIET, backend)

    def test_noiseless_device_is_whole(self):
        for light_cone in (True, False):
            record = self.characterise(t_layout(), light_cone=light_cone)
            entanglement = record.derived["entanglement"]
            self.assertEqual(entanglement["n_circuits"], 36)
            for branch in ("raw", "mitigated"):
                summary = entanglement[branch]["summary"]
                self.assertAlmostEqual(summary["mean_negativity"], 0.5, places=6)
                self.assertTrue(summary["whole_device"])
                self.assertEqual(summary["connected_90"], 5)
            self.assertEqual(len(entanglement["raw"]["projections"]["1-3"][0]), 8)

    def test_counts_are_split_per_set(self):
        record = self.characterise(linear(5), light_cone=False)
        group = record.counts["r0"]
        self.assertEqual(sorted(group), ["0-1", "1-2", "2-3", "3-4"])
        self.assertEqual(len(group["1-2"]), 9)

    def test_dropped_layer_breaks_entanglement(self):
        record = self.characterise(linear(5), drop_layer=0)
        raw = record.derived["entanglement"]["raw"]
        values = [e["value"] for e in raw["graphs"]["max"]["edges"].values()]
        self.assertLess(min(values), 1e-6)
        self.assertGreater(max(values), 0.49)
        self.assertLess(raw["summary"]["connected_50"], 5)

    def test_graph_decay(self):
        g = linear(3)
        cal, backend = noiseless(g)
        plan = ExperimentPlan(kind=ExperimentKind.GRAPH_DECAY, delays_ns=[0, 1_000], exact=True)
        record = run_experiment(g, cal, plan, QUIET, backend)
        self.assertEqual(sorted(record.counts), ["none_t0_r0", "none_t1000_r0"])
        curve = record.derived["graph_decay"]["schemes"]["none"]["raw"]["curve"]
        self.assertEqual([p["t_us"] for p in curve], [0.0, 1.0])
        for point in curve:
            self.assertAlmostEqual(point["mean"], 0.5, places=6)

    def test_mitigation_raises_negativity_under_readout_noise(self):
        g = linear(3)
        for seed in range(10):
            cal = Calibration.uniform(g, readout_flip=0.02 + 0.03 * seed / 9)
            backend = DensityMatrixSimulator(NoiseModel.readout_only(g, cal), QUIET)
            plan = ExperimentPlan(kind=ExperimentKind.GRAPH_CHARACTERISE, seed=seed)
            entanglement = run_graph_characterisation(g, cal, plan, QUIET, backend).derived["entanglement"]
            raw = entanglement["raw"]["summary"]["mean_negativity"]
            mitigated = entanglement["mitigated"]["summary"]["mean_negativity"]
            self.assertGreater(mitigated, raw, f"seed {seed}")

    def test_zz_revival_and_pdd_suppression(self):
        g = linear(2)
        cal = Calibration.uniform(
            g, cx_error=0.0, readout_flip=0.0, sx_error=0.0, t1_us=1e6, t2_us=1e6, zz_rate_mhz=0.5
        )
        plan = ExperimentPlan(
            kind=ExperimentKind.GRAPH_DECAY,
            delays_ns=list(range(0, 13_001, 500)),
            dd=["none", "pdd:2:staggered"],
            exact=True,
        )
        schemes = run_experiment(g, cal, plan, QUIET).derived["graph_decay"]["schemes"]

        free = {p["t_us"]: p["mean"] for p in schemes["none"]["raw"]["curve"]}
        t_zero = min(free, key=free.get)
        self.assertLessEqual(abs(t_zero - math.pi / 0.5), 0.5)
        self.assertLess(free[t_zero], 0.05)
        self.assertGreaterEqual(free[12.5], 0.9 * free[0.0])

        pdd = [p["mean"] for p in schemes["pdd:2:staggered"]["raw"]["curve"]]
        self.assertGreater(min(pdd), free[t_zero])
        self.assertGreater(min(pdd), 0.45)


if __name__ == '__main__':
    unittest.main()
