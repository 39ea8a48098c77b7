"""
Tests for the experiment plan and layout schemas
"""

import unittest

from pydantic import ValidationError

from entbench.deterministic import DEFAULT_SEED
from entbench.schemas import (
    CoherenceEstimator,
    ExperimentKind,
    ExperimentPlan,
    LayoutModel,
    QremMode,
    WeightMetric,
)


class TestExperimentPlan(unittest.TestCase):
    """Plan validation"""

    def test_defaults(self):
        plan = ExperimentPlan(kind=ExperimentKind.GRAPH_CHARACTERISE)
        self.assertEqual(plan.dd, ["none"])
        self.assertEqual(plan.replicates, 1)
        self.assertEqual(plan.seed, DEFAULT_SEED)
        self.assertEqual(plan.qrem, QremMode.BOTH)
        self.assertEqual(plan.weight, WeightMetric.CX_ERROR)
        self.assertEqual(plan.coherence, CoherenceEstimator.OVERLAP)
        self.assertIsNone(plan.shots)

    def test_kind_specific_fields(self):
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY)
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GHZ_DECAY, delays_ns=[0, 1, 2])
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GHZ_DECAY, sizes=[2])
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GRAPH_DECAY)

    def test_grids_must_increase(self):
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GHZ_DECAY, sizes=[3, 2], delays_ns=[0, 1, 2])
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GHZ_DECAY, sizes=[2], delays_ns=[0, 2, 2])
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GRAPH_DECAY, delays_ns=[-5, 0])
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GHZ_DECAY, sizes=[0, 2], delays_ns=[0, 1, 2])

    def test_dd_schemes(self):
        plan = ExperimentPlan(kind=ExperimentKind.GRAPH_DECAY, delays_ns=[0, 1], dd=["none", "pdd:4:staggered"])
        self.assertEqual(plan.dd, ["none", "pdd:4:staggered"])
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GRAPH_DECAY, delays_ns=[0, 1], dd=["cpmg"])
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GRAPH_DECAY, delays_ns=[0, 1], dd=["hahn", "hahn"])

    def test_unknown_fields_rejected(self):
        with self.assertRaises(ValidationError):
            ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=3, speed=1.0)

    def test_json_round_trip(self):
        plan = ExperimentPlan(kind=ExperimentKind.GHZ_FIDELITY, n=4, sources=[1, 2], drop_layer=None)
        self.assertEqual(ExperimentPlan.model_validate(plan.model_dump(mode="json")), plan)


class TestLayoutModel(unittest.TestCase):

    def test_minimal_layout(self):
        model = LayoutModel.model_validate({"n_qubits": 2, "edges": [[0, 1]]})
        self.assertEqual(model.edges, [(0, 1)])
        self.assertEqual(model.inactive, [])
        self.assertEqual(model.calibration.qubits, {})

    def test_extra_keys_forbidden(self):
        with self.assertRaises(ValidationError):
            LayoutModel.model_validate({"n_qubits": 2, "edges": [], "colour": "red"})
        with self.assertRaises(ValidationError):
            LayoutModel.model_validate(
                {"n_qubits": 2, "edges": [], "calibration": {"qubits": {"0": {"t3_us": 5}}}}
            )


if __name__ == '__main__':
    unittest.main()
