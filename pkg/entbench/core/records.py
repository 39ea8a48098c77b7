"""
On-disk experiment records.

Layout of a record directory::

    plan.json            the ExperimentPlan
    config.json          BenchConfig knobs that shape derived results
    layout.json          device graph and calibration
    counts/<group>.json  raw distributions, one file per group
    derived/<name>.json  analysis outputs
    metadata.json        timestamps, versions and wall time

Everything except metadata.json is a pure function of the plan, the layout and
the seed, and is written with sorted keys and a 2-space indent.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

from loguru import logger
from pydantic import ValidationError

from ..schemas import ExperimentPlan
from .config import BenchConfig
from .errors import LayoutParseError, RecordError
from .topology import Calibration, DeviceGraph, layout_from_dict, layout_to_dict

RECORD_FILES = ("plan.json", "config.json", "layout.json", "metadata.json")


def dump_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def normalize(data: Any) -> Any:
    """JSON round trip, so in-memory results compare equal to loaded ones"""
    return json.loads(json.dumps(data, sort_keys=True))


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(data), encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise RecordError(f"Missing record file {path}") from None
    except json.JSONDecodeError as e:
        raise RecordError(f"Corrupt record file {path}: {e}") from e


@dataclass
class ExperimentRecord:
    """Plan, layout, raw counts and derived results of one experiment"""

    plan: ExperimentPlan
    device: DeviceGraph
    calibration: Calibration
    config: BenchConfig
    counts: dict[str, Any] = field(default_factory=dict)
    derived: dict[str, Any] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def save(self, path: Union[str, Path]) -> Path:
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        write_json(root / "plan.json", self.plan.model_dump(mode="json"))
        write_json(root / "config.json", self.config.to_dict())
        write_json(root / "layout.json", layout_to_dict(self.device, self.calibration))
        for group, data in sorted(self.counts.items()):
            write_json(root / "counts" / f"{group}.json", data)
        for name, data in sorted(self.derived.items()):
            write_json(root / "derived" / f"{name}.json", data)
        write_json(root / "metadata.json", self.metadata)
        logger.info(f"💾 Saved record with {len(self.counts)} count groups to {root}")
        return root

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentRecord":
        root = Path(path)
        if not root.is_dir():
            raise RecordError(f"Record directory {root} does not exist")
        try:
            plan = ExperimentPlan.model_validate(read_json(root / "plan.json"))
        except ValidationError as e:
            raise RecordError(f"Invalid plan in {root}: {e}") from e
        try:
            config = BenchConfig.from_dict(read_json(root / "config.json"))
        except ValueError as e:
            raise RecordError(f"Invalid config in {root}: {e}") from e
        try:
            device, calibration = layout_from_dict(read_json(root / "layout.json"))
        except LayoutParseError as e:
            raise RecordError(f"Invalid layout in {root}: {e}") from e
        counts = {p.stem: read_json(p) for p in sorted((root / "counts").glob("*.json"))}
        derived = {p.stem: read_json(p) for p in sorted((root / "derived").glob("*.json"))}
        metadata_path = root / "metadata.json"
        metadata = read_json(metadata_path) if metadata_path.exists() else {}
        if not counts:
            raise RecordError(f"Record {root} holds no counts")
        return cls(plan, device, calibration, config, counts, derived, metadata)

    def verify(self) -> list[str]:
        """Names of derived results that differ from a recomputation"""
        from .protocol import derive_record

        fresh = normalize(derive_record(self))
        stored = normalize(self.derived)
        mismatched = sorted(name for name in set(fresh) | set(stored) if fresh.get(name) != stored.get(name))
        if mismatched:
            logger.warning(f"⚠️ Derived results differ from stored counts: {mismatched}")
        return mismatched
