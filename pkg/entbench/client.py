"""
High-level API for entbench
"""

from pathlib import Path
from typing import Optional, Union

from .core import BenchConfig, ExperimentRunner
from .core.errors import EntbenchError
from .core.records import ExperimentRecord
from .core.sim import Backend
from .core.topology import Calibration, DeviceGraph, load_layout
from .report import write_report
from .schemas import ExperimentPlan


class BenchApi:
    """High-level API for running benchmarks on one device layout"""

    def __init__(
        self,
        device: DeviceGraph,
        calibration: Optional[Calibration] = None,
        config: Optional[BenchConfig] = None,
        backend: Optional[Backend] = None,
    ):
        """Initialize the API

        Args:
            device: Coupling graph
            calibration: Device calibration (defaults for every qubit and edge if omitted)
            config: BenchConfig instance (optional, uses default if not provided)
            backend: Execution backend (optional, noisy simulator by default)
        """
        self.device = device
        self.calibration = calibration or Calibration.default_for(device)
        self.config = config or BenchConfig()
        self.backend = backend
        self._runner: Optional[ExperimentRunner] = None

    @classmethod
    def from_layout(cls, path: Union[str, Path], config: Optional[BenchConfig] = None) -> "BenchApi":
        device, calibration = load_layout(path)
        return cls(device, calibration, config)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.cleanup()

    @property
    def runner(self) -> ExperimentRunner:
        """Get the experiment runner, creating it if needed"""
        if self._runner is None:
            self._runner = ExperimentRunner(self.device, self.calibration, self.config, self.backend)
        return self._runner

    def run(self, plan: Union[ExperimentPlan, dict], output_dir: Optional[Union[str, Path]] = None) -> ExperimentRecord:
        """
        Run an experiment plan

        Args:
            plan: ExperimentPlan or its dict form
            output_dir: Record directory to save into (optional)

        Returns:
            The experiment record with raw counts and derived results
        """
        if isinstance(plan, dict):
            plan = ExperimentPlan.model_validate(plan)
        try:
            record = self.runner.run(plan)
        except (EntbenchError, ValueError):
            raise
        except Exception as e:
            raise RuntimeError(f"Experiment {plan.kind.value} failed: {e}") from e
        if output_dir is not None:
            record.save(output_dir)
        return record

    def cleanup(self):
        """Clean up resources"""
        if self._runner:
            self._runner.close()
            self._runner = None


# Convenience functions for simple usage
def run_plan(
    layout_path: Union[str, Path],
    plan: Union[ExperimentPlan, dict],
    output_dir: Optional[Union[str, Path]] = None,
    config: Optional[BenchConfig] = None,
) -> ExperimentRecord:
    """
    Run one plan on a layout file

    Args:
        layout_path: Layout JSON file
        plan: ExperimentPlan or its dict form
        output_dir: Record directory (optional)
        config: BenchConfig instance (optional)
    """
    with BenchApi.from_layout(layout_path, config) as api:
        return api.run(plan, output_dir)


def verify_record(path: Union[str, Path]) -> list[str]:
    """Names of derived results that no longer match the stored counts"""
    return ExperimentRecord.load(path).verify()


def report(path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None) -> list[Path]:
    return write_report(path, out_dir)
