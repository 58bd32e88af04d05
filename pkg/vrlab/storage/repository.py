"""Repository layer for run outputs."""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np

from vrlab.models.lattice import AdaptedField, LatticeModel

logger = logging.getLogger(__name__)

NODE_COLUMNS = ("time_index", "w_state", "b_suffix", "X", "Y", "Z", "A", "L", "gap")
VERDICTS = {0: "PASS", 2: "FAIL", 3: "ERROR"}


def format_value(value: Any) -> str:
    """Deterministic text for one summary or CSV cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


class ReportRepository:
    """Writes nodes.csv, summary.txt, report.json and verdict.txt into one output directory."""

    @staticmethod
    def prepare(out_dir: Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out

    @staticmethod
    def save_nodes(out_dir: Path, model: LatticeModel, fields: Mapping[str, AdaptedField]) -> Path:
        """
        One row per recombining node; a field that is undefined at a time index leaves its cell empty.

        Returns:
            Path of the written CSV
        """
        path = ReportRepository.prepare(out_dir) / "nodes.csv"

        def cell(name: str, i: int, k: int) -> Optional[float]:
            f = fields.get(name)
            if f is None or i not in f.time_indices:
                return None
            return float(f[i][k])

        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(NODE_COLUMNS)
            for i in range(model.steps + 1):
                for k in range(model.size(i)):
                    node = model.node(i, k)
                    x, y = cell("X", i, k), cell("Y", i, k)
                    gap = None if x is None or y is None else x - y
                    writer.writerow([node.time_index, node.w_state, node.b_suffix] + [
                        format_value(v) for v in
                        (x, y, cell("Z", i, k), cell("A", i, k), cell("L", i, k), gap)
                    ])
        logger.debug(f"Wrote {path}")
        return path

    @staticmethod
    def save_summary(out_dir: Path, summary: Mapping[str, Any]) -> Path:
        path = ReportRepository.prepare(out_dir) / "summary.txt"
        lines = [f"{key}={format_value(summary[key])}" for key in sorted(summary)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def save_report(out_dir: Path, report: Mapping[str, Any]) -> Path:
        path = ReportRepository.prepare(out_dir) / "report.json"
        path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def save_verdict(out_dir: Path, code: int) -> Path:
        path = ReportRepository.prepare(out_dir) / "verdict.txt"
        path.write_text(f"{VERDICTS[code]} {code}\n", encoding="utf-8")
        logger.info(f"Verdict {VERDICTS[code]} ({code}) written to {path}")
        return path

    @staticmethod
    def load_summary(out_dir: Path) -> Dict[str, str]:
        """Parse summary.txt back into a key -> raw value mapping."""
        text = (Path(out_dir) / "summary.txt").read_text(encoding="utf-8")
        return dict(line.split("=", 1) for line in text.splitlines() if line)
