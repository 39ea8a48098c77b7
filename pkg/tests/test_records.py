"""
Tests for on-disk experiment records
"""

import json
import unittest
from pathlib import Path

from entbench.core.config import BenchConfig
from entbench.core.errors import RecordError
from entbench.core.protocol import run_ghz_fidelity
from entbench.core.records import RECORD_FILES, ExperimentRecord, dump_json, normalize
from entbench.core.topology import Calibration, linear
from entbench.schemas import ExperimentKind, ExperimentPlan
from test_utils import BaseTestCase


def small_record(seed: int = 5) -> ExperimentRecord:
    g = linear(3)
    plan = ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=3, shots=500, seed=seed)
    return run_ghz_fidelity(g, Calibration.uniform(g), plan, BenchConfig(progress=False))


class TestJsonHelpers(unittest.TestCase):

    def test_dump_is_sorted_and_indented(self):
        self.assertEqual(dump_json({"b": 1, "a": [1, 2]}), '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n')

    def test_normalize_turns_tuples_into_lists(self):
        self.assertEqual(normalize({"x": (1, 2)}), {"x": [1, 2]})


class TestExperimentRecord(BaseTestCase):
    """Save, load and verify"""

    @classmethod
    def setUpClass(cls):
        cls.record = small_record()

    def test_save_writes_layout(self):
        root = self.record.save(self.get_temp_file_path("rec"))
        for name in RECORD_FILES:
            self.assertTrue((root / name).exists(), name)
        self.assertTrue((root / "counts" / "r0.json").exists())
        self.assertTrue((root / "derived" / "mqc.json").exists())
        self.assertTrue((root / "derived" / "seeds.json").exists())

    def test_round_trip_verifies(self):
        root = self.record.save(self.get_temp_file_path("rec"))
        loaded = ExperimentRecord.load(root)
        self.assertEqual(loaded.plan, self.record.plan)
        self.assertEqual(loaded.counts, normalize(self.record.counts))
        self.assertEqual(loaded.config, self.record.config)
        self.assertEqual(loaded.verify(), [])

    def test_tampered_counts_are_detected(self):
        root = self.record.save(self.get_temp_file_path("rec"))
        counts_file = root / "counts" / "r0.json"
        data = json.loads(counts_file.read_text(encoding="utf-8"))
        data["population"] = {"shots": 500, "counts": {"000": 500}}
        counts_file.write_text(dump_json(data), encoding="utf-8")
        self.assertEqual(ExperimentRecord.load(root).verify(), ["mqc"])

    def test_same_seed_same_files(self):
        first = self.record.save(self.get_temp_file_path("a"))
        second = small_record().save(self.get_temp_file_path("b"))
        for name in ("plan.json", "config.json", "layout.json", "counts/r0.json", "derived/mqc.json"):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

    def test_load_errors(self):
        with self.assertRaises(RecordError):
            ExperimentRecord.load(self.get_temp_file_path("missing"))

        root = self.record.save(self.get_temp_file_path("rec"))
        (root / "plan.json").write_text("{not json", encoding="utf-8")
        with self.assertRaises(RecordError):
            ExperimentRecord.load(root)

        root = self.record.save(self.get_temp_file_path("rec2"))
        (root / "plan.json").write_text(dump_json({"kind": "bogus"}), encoding="utf-8")
        with self.assertRaises(RecordError):
            ExperimentRecord.load(root)

        root = self.record.save(self.get_temp_file_path("rec3"))
        for path in (root / "counts").glob("*.json"):
            path.unlink()
        with self.assertRaises(RecordError):
            ExperimentRecord.load(root)

    def test_missing_metadata_is_tolerated(self):
        root = self.record.save(self.get_temp_file_path("rec"))
        Path(root / "metadata.json").unlink()
        self.assertEqual(ExperimentRecord.load(root).metadata, {})


if __name__ == '__main__':
    unittest.main()
