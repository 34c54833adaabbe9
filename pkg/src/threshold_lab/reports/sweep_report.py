import os
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from threshold_lab.reports.load_config import PROJECT_CFG

logger = logging.getLogger(__name__)


def to_builtin(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers into JSON-serialisable values."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"real": float(value.real), "imag": float(value.imag)}
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def metadata_line(metadata: Dict[str, Any]) -> str:
    """Single `#` comment line with `key=value` pairs in sorted key order."""
    return "# " + "; ".join(f"{key}={metadata[key]}" for key in sorted(metadata))


@dataclass
class SweepReport:
    """
    Table of sweep rows plus fitted quantities.

    Attributes:
        frame (pd.DataFrame): One row per sample (e.g. lambda, predicted_norm,
            computed_norm, abs_err, rel_err, scaled_err).
        summary (dict): Fitted rates, fit quality, selected model and flags.
        notes (list): Free-form remarks collected during the sweep.
    """

    frame: pd.DataFrame
    summary: Dict[str, Any] = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def fit_quality(self) -> Optional[float]:
        return self.summary.get("fit_quality")

    @property
    def remainder_bounded(self) -> Optional[bool]:
        return self.summary.get("remainder_bounded")

    def to_csv(self, file_path: Optional[str] = None, metadata: Optional[Dict[str, Any]] = None) -> str:
        """
        Write the table as CSV preceded by one `#` metadata line.

        Args:
            file_path (str, optional): Destination; the CSV text is only returned when omitted.
            metadata (dict, optional): Key/value pairs for the comment line.

        CSV Format:
            - Line 1: '# key=value; ...' (sorted keys)
            - Line 2: header
            - Data in the configured float format ('%.16e' by default), '.' decimal, no index.
            - An existing file is replaced.
        """
        return write_frame_csv(self.frame, file_path, metadata)

    def to_json(self, file_path: Optional[str] = None) -> str:
        text = json.dumps(to_builtin({**self.summary, "notes": self.notes}), sort_keys=True, indent=2)
        if file_path is not None:
            with open(file_path, "w") as handle:
                handle.write(text + "\n")
        return text


def write_frame_csv(frame: pd.DataFrame, file_path: Optional[str] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> str:
    """Render `frame` with its metadata line; also write it to `file_path` when given."""
    body = frame.to_csv(index=False, float_format=PROJECT_CFG.float_format)
    text = (metadata_line(metadata) + "\n" if metadata else "") + body
    if file_path is not None:
        if os.path.exists(file_path):
            logger.info("Replacing existing report %s", file_path)
        with open(file_path, "w") as handle:
            handle.write(text)
    return text


def ensure_parent_dir(file_path: str) -> str:
    """
    Create the directory that will hold a report file.

    Args:
        file_path (str): Report destination, absolute or relative to the working directory.

    Returns:
        str: The absolute path of the parent directory.
    """
    parent = os.path.dirname(os.path.abspath(file_path))
    if not os.path.isdir(parent):
        logger.info("Creating report directory %s", parent)
        os.makedirs(parent)
    return parent


def read_frame_csv(file_path: str) -> pd.DataFrame:
    return pd.read_csv(file_path, comment="#")
