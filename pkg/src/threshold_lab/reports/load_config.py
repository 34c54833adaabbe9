import logging
from pathlib import Path

import yaml
from dotenv import load_dotenv
from pyprojroot import here

from threshold_lab import __version__

logger = logging.getLogger(__name__)

load_dotenv()

_DEFAULTS = {
    "tool": {"name": "threshold-lab"},
    "reports": {"float_format": "%.16e"},
}


def _read_project_config(config_path: str) -> dict:
    try:
        path = Path(here(config_path))
    except RuntimeError:
        path = Path(__file__).resolve().parents[3] / config_path
    if not path.exists():
        logger.warning("Config file %s not found; using built-in defaults", path)
        return {}
    with open(path) as cfg:
        return yaml.load(cfg, Loader=yaml.FullLoader) or {}


class LoadProjectConfig:
    """
    Loads project-level settings: the tool identity written into report metadata
    and the float format of CSV reports.

    Attributes:
        tool_name (str): Name written into every CSV metadata line.
        version (str): Package version written into every CSV metadata line.
        float_format (str): printf-style format of floats in CSV reports.
    """

    def __init__(self, config_path: str = "configs/project_config.yml") -> None:
        app_config = _read_project_config(config_path)
        tool = {**_DEFAULTS["tool"], **app_config.get("tool", {})}
        reports = {**_DEFAULTS["reports"], **app_config.get("reports", {})}

        self.tool_name = str(tool["name"])
        self.version = __version__
        self.float_format = str(reports["float_format"])

    def metadata(self, **extra) -> dict:
        """Metadata for a report's comment line: tool, version and the given pairs."""
        return {"tool": self.tool_name, "version": self.version, **extra}


PROJECT_CFG = LoadProjectConfig()
