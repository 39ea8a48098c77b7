"""
Tests for the high-level API
"""

import unittest
from unittest.mock import MagicMock

from entbench.client import BenchApi, run_plan, verify_record
from entbench.core.config import BenchConfig
from entbench.core.errors import EmbeddingError
from entbench.core.sim import DensityMatrixSimulator
from entbench.core.topology import Calibration, linear
from entbench.schemas import ExperimentKind
from test_utils import BaseTestCase

QUIET = BenchConfig(progress=False)


class TestBenchApi(BaseTestCase):

    def test_default_calibration(self):
        g = linear(3)
        api = BenchApi(g, config=QUIET)
        self.assertEqual(api.calibration, Calibration.default_for(g))

    def test_runner_is_lazy_and_reused(self):
        api = BenchApi(linear(2), config=QUIET)
        self.assertIsNone(api._runner)
        runner = api.runner
        self.assertIs(api.runner, runner)
        api.cleanup()
        self.assertIsNone(api._runner)

    def test_run_dict_plan_and_save(self):
        g = linear(3)
        cal = self.fixtures.noiseless_calibration(g)
        out = self.get_temp_file_path("rec")
        with BenchApi(g, cal, QUIET, DensityMatrixSimulator(None, QUIET)) as api:
            record = api.run({"kind": "ghz-fidelity", "n": 2, "exact": True}, out)
        self.assertEqual(record.plan.kind, ExperimentKind.GHZ_FIDELITY)
        self.assertEqual(verify_record(out), [])

    def test_library_errors_pass_through(self):
        g = linear(3)
        with BenchApi(g, config=QUIET) as api:
            with self.assertRaises(EmbeddingError):
                api.run({"kind": "ghz-fidelity", "n": 7})

    def test_unexpected_failures_are_wrapped(self):
        g = linear(3)
        backend = MagicMock()
        backend.run.side_effect = OSError("device offline")
        with BenchApi(g, config=QUIET, backend=backend) as api:
            with self.assertRaises(RuntimeError):
                api.run({"kind": "ghz-fidelity", "n": 2, "shots": 10})

    def test_run_plan_from_layout_file(self):
        layout = self.create_test_layout_file()
        record = run_plan(layout, {"kind": "ghz-fidelity", "n": 2, "shots": 50}, config=QUIET)
        self.assertIn("mqc", record.derived)


if __name__ == '__main__':
    unittest.main()
