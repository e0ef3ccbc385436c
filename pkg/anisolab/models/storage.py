"""
Report persistence for anisolab runs.

Everything a run produces lands in one output directory:
report.json (pydantic report, floats rounded), CSV tables via pandas, and
timing.json (wall time, kept out of the report so the report is byte-stable).
"""
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from anisolab.config import settings
from anisolab.models.fields import LevelProfile, ScalarField

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
FIELD_FILE = "field.csv"
LEVELS_FILE = "levels.csv"
SUITE_FILE = "suite.csv"
SWEEP_FILE = "sweep.csv"
TIMING_FILE = "timing.json"


def round_significant(value: float, digits: Optional[int] = None) -> float:
    """Round to ``digits`` significant digits; non-finite values pass through."""
    digits = digits or settings.float_digits
    if not math.isfinite(value) or value == 0:
        return value
    return float(f"{value:.{digits}g}")


def _jsonable(obj: Any, digits: int) -> Any:
    if isinstance(obj, BaseModel):
        return _jsonable(obj.model_dump(), digits)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _jsonable(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v, digits) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = round_significant(float(obj), digits)
        # JSON has no NaN / inf
        return value if math.isfinite(value) else str(value)
    return obj


class ReportWriter:
    """Writes the files of one run into an output directory."""

    def __init__(self, out_dir: Path, digits: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.digits = digits or settings.float_digits
        self.float_format = f"%.{self.digits}g"

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._path(name)
        text = json.dumps(_jsonable(payload, self.digits), indent=2, sort_keys=False)
        path.write_text(text + "\n", encoding="utf-8")
        logger.debug(f"Wrote {path}")
        return path

    def write_report(self, report: BaseModel) -> Path:
        return self.write_json(REPORT_FILE, report)

    def write_timing(self, wall_seconds: float, command: str) -> Path:
        return self.write_json(TIMING_FILE, {"command": command, "wall_seconds": wall_seconds})

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._path(name)
        frame.to_csv(path, index=False, float_format=self.float_format)
        logger.debug(f"Wrote {path} ({len(frame)} rows)")
        return path

    def write_rows(self, name: str, rows: Iterable[BaseModel]) -> Path:
        """One CSV row per pydantic model."""
        records: List[Dict[str, Any]] = [r.model_dump(mode="json") for r in rows]
        return self.write_table(name, pd.DataFrame.from_records(records))

    def write_field(self, field: ScalarField) -> Path:
        """Nodal values x, y, u (gnuplot-ready)."""
        v = field.mesh.vertices
        frame = pd.DataFrame({"x": v[:, 0], "y": v[:, 1], "u": field.values})
        return self.write_table(FIELD_FILE, frame)

    def write_levels(self, profile: LevelProfile) -> Path:
        frame = pd.DataFrame({"level": profile.levels, "mu": profile.mu, "perim_F": profile.perim_F})
        if profile.wulff_slack is not None:
            frame["wulff_slack"] = profile.wulff_slack
        return self.write_table(LEVELS_FILE, frame)
