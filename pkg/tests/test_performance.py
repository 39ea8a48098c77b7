"""
Performance tests for entbench
"""

import unittest
import time

import numpy as np

from entbench.core.config import BenchConfig
from entbench.core.embed import circuits_per_plan, embed_ghz, plan_qst_batches
from entbench.core.mitigate import CalibrationMatrixSpec, mitigate
from entbench.core.protocol import run_ghz_fidelity, run_graph_characterisation
from entbench.core.sim import CountsDistribution, DensityMatrixSimulator
from entbench.core.topology import Calibration, eagle_127, heavy_hex
from entbench.schemas import ExperimentKind, ExperimentPlan
from test_utils import TestFixtures

QUIET = BenchConfig(progress=False)


class TestPerformance(unittest.TestCase):
    """Timing checks on device-sized inputs"""

    def test_embedding_performance(self):
        """GHZ trees of growing size on a 6x4 heavy-hex lattice"""
        g = heavy_hex(6, 4)
        cal = Calibration.uniform(g)
        results = {}

        start_time = time.time()
        for d in range(1, 9):
            n = d * (d + 1) // 2 + 1
            emb = embed_ghz(g, cal, 82, n)
            emb.check(g)
            results[n] = emb.depth
            self.assertEqual(emb.depth, d)
        elapsed = time.time() - start_time

        print("\n=== Performance Test Results ===")
        for n, depth in results.items():
            print(f"GHZ({n}): depth {depth}")
        print(f"Total embedding time: {elapsed:.3f}s")
        self.assertLess(elapsed, 5.0)

    def test_batch_planning_performance(self):
        g = eagle_127()
        start_time = time.time()
        plan = plan_qst_batches(g)
        elapsed = time.time() - start_time

        print(f"\nEagle batches: {len(plan.batches)} ({circuits_per_plan(plan)} circuits) in {elapsed:.3f}s")
        self.assertEqual(sum(len(batch) for batch in plan.batches), len(g.edges))
        self.assertLess(elapsed, 1.0)

    def test_sampled_fidelity(self):
        """4096-shot MQC on a noiseless line lands near F = 1"""
        g = TestFixtures.line_device(4)
        cal = TestFixtures.noiseless_calibration(g)
        plan = ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=4, shots=4096, seed=11)

        start_time = time.time()
        record = run_ghz_fidelity(g, cal, plan, QUIET, DensityMatrixSimulator(None, QUIET))
        elapsed = time.time() - start_time

        summary = record.derived["mqc"]["summary"]["raw"]
        print(f"\nSampled GHZ(4): F = {summary['fidelity']['value']:.4f} in {elapsed:.3f}s")
        self.assertAlmostEqual(summary["population"]["value"], 1.0, places=9)
        self.assertLess(abs(summary["fidelity"]["value"] - 1.0), 0.05)
        self.assertLess(elapsed, 30.0)

    def test_mitigation_on_wide_subspace(self):
        rng = np.random.default_rng(3)
        n_bits = 10
        keys = {format(int(v), f"0{n_bits}b") for v in rng.choice(1 << n_bits, size=300, replace=False)}
        counts = {k: int(rng.integers(1, 50)) for k in sorted(keys)}
        dist = CountsDistribution(counts, sum(counts.values()))
        spec = CalibrationMatrixSpec.symmetric(n_bits, 0.02)

        start_time = time.time()
        quasi = mitigate(dist, spec)
        elapsed = time.time() - start_time

        print(f"\nMitigated {len(counts)} strings over {n_bits} bits in {elapsed:.3f}s")
        self.assertEqual(len(quasi.values), len(counts))
        self.assertAlmostEqual(quasi.total(), 1.0, places=3)
        self.assertLess(elapsed, 5.0)

    def test_whole_device_characterisation(self):
        """Noiseless graph state on the 127-qubit layout through light-cone reduction"""
        g = eagle_127()
        cal = TestFixtures.noiseless_calibration(g)
        plan = ExperimentPlan(kind=ExperimentKind.GRAPH_CHARACTERISE, exact=True, light_cone=True)

        start_time = time.time()
        record = run_graph_characterisation(g, cal, plan, QUIET, DensityMatrixSimulator(None, QUIET))
        elapsed = time.time() - start_time

        raw = record.derived["entanglement"]["raw"]
        values = [e["value"] for e in raw["graphs"]["max"]["edges"].values()]
        print(f"\nEagle graph state: {len(values)} edges in {elapsed:.3f}s")
        self.assertEqual(len(values), len(g.edges))
        for value in values:
            self.assertLess(abs(value - 0.5), 1e-6)
        self.assertTrue(raw["summary"]["whole_device"])
        self.assertLess(elapsed, 600.0)


if __name__ == '__main__':
    unittest.main()
