import os
import logging
import yaml
from pathlib import Path
from dotenv import load_dotenv
from pyprojroot import here

from threshold_lab.errors import ConfigurationError

load_dotenv()

logger = logging.getLogger(__name__)

_DEFAULTS = {
    "tolerances": {
        "singular_value": 1.0e-10,
        "multiplicity": 1.0e-8,
        "ill_conditioned_factor": 10.0,
        "max_condition": 1.0e14,
        "symmetry": 1.0e-12,
    },
    "green_functions": {
        "regime_switch": 4.0,
        "laguerre_nodes": 64,
        "calibration_min": 1.0e-8,
        "calibration_points": 256,
    },
    "spectrum": {
        "kappa_min": 1.0e-6,
        "kappa_max": 1.0e6,
        "points_per_decade": 64,
        "workers": 1,
    },
    "asymptotics": {
        "lambda_min": 1.0e-12,
        "lambda_max": 1.0e-2,
        "points_per_decade": 8,
        "fit_quality_warning": 0.9,
        "finite_difference_step": 1.0e-3,
    },
    "wave_probe": {
        "r_max": 40.0,
        "n_r": 2048,
        "n_theta": 256,
        "cutoff_lambda0": 1.0,
        "s_step": 0.005,
        "fft_padding": 8,
        "rho_max": 16.0,
        "n_rho": 4096,
        "high_energy_min": 10.0,
        "high_energy_max": 1.0e4,
    },
}


def _config_path(relative_path: str) -> Path:
    try:
        candidate = Path(here(relative_path))
        if candidate.exists():
            return candidate
    except RuntimeError:
        pass
    # src/threshold_lab/spectral/load_lab_config.py -> repository root
    return Path(__file__).resolve().parents[3] / relative_path


def _merged(app_config: dict) -> dict:
    merged = {section: dict(values) for section, values in _DEFAULTS.items()}
    for section, values in (app_config or {}).items():
        merged.setdefault(section, {}).update(values or {})
    return merged


class LoadLabConfig:
    """
    Load the numerical settings of threshold-lab from a YAML config file and environment variables.

    The settings cover:
    - Global tolerances (singular values, multiplicities, conditioning)
    - Green-function evaluation regimes
    - Bound-state search grids
    - Low-energy sweep grids
    - Wave-operator probe grids

    The config file path: `configs/lab_config.yml`
    The global singular-value tolerance can be overridden with the `THRESHOLD_LAB_TOL`
    environment variable (a `.env` file is honoured). Keys missing from the file fall
    back to built-in defaults.
    """

    def __init__(self, config_path: str = "configs/lab_config.yml") -> None:
        """
        Initialize the LoadLabConfig class by:
        - Reading the YAML configuration (or the built-in defaults when it is absent).
        - Mapping values to typed attributes.
        - Applying the environment override of the singular-value tolerance.

        Args:
            config_path (str): Path of the YAML file relative to the project root.
        """
        path = _config_path(config_path)
        if path.exists():
            with open(path) as cfg:
                app_config = _merged(yaml.load(cfg, Loader=yaml.FullLoader))
        else:
            logger.warning("Config file %s not found; using built-in defaults", path)
            app_config = _merged({})

        # Tolerances
        self.singular_value_tol = float(app_config["tolerances"]["singular_value"])
        self.multiplicity_tol = float(app_config["tolerances"]["multiplicity"])
        self.ill_conditioned_factor = float(app_config["tolerances"]["ill_conditioned_factor"])
        self.max_condition = float(app_config["tolerances"]["max_condition"])
        self.symmetry_tol = float(app_config["tolerances"]["symmetry"])

        env_tol = os.getenv("THRESHOLD_LAB_TOL")
        if env_tol:
            try:
                self.singular_value_tol = float(env_tol)
            except ValueError as exc:
                raise ConfigurationError(f"THRESHOLD_LAB_TOL is not a number: {env_tol!r}") from exc
        if not 0.0 < self.singular_value_tol < 1.0:
            raise ConfigurationError(
                f"singular-value tolerance must lie in (0, 1), got {self.singular_value_tol}")

        # Green functions
        self.regime_switch = float(app_config["green_functions"]["regime_switch"])
        self.laguerre_nodes = int(app_config["green_functions"]["laguerre_nodes"])
        self.calibration_min = float(app_config["green_functions"]["calibration_min"])
        self.calibration_points = int(app_config["green_functions"]["calibration_points"])

        # Bound-state search
        self.kappa_min = float(app_config["spectrum"]["kappa_min"])
        self.kappa_max = float(app_config["spectrum"]["kappa_max"])
        self.kappa_points_per_decade = int(app_config["spectrum"]["points_per_decade"])
        self.workers = int(app_config["spectrum"]["workers"])

        # Low-energy sweeps
        self.lambda_min = float(app_config["asymptotics"]["lambda_min"])
        self.lambda_max = float(app_config["asymptotics"]["lambda_max"])
        self.lambda_points_per_decade = int(app_config["asymptotics"]["points_per_decade"])
        self.fit_quality_warning = float(app_config["asymptotics"]["fit_quality_warning"])
        self.finite_difference_step = float(app_config["asymptotics"]["finite_difference_step"])

        # Wave-operator probes
        self.r_max = float(app_config["wave_probe"]["r_max"])
        self.n_r = int(app_config["wave_probe"]["n_r"])
        self.n_theta = int(app_config["wave_probe"]["n_theta"])
        self.cutoff_lambda0 = float(app_config["wave_probe"]["cutoff_lambda0"])
        self.s_step = float(app_config["wave_probe"]["s_step"])
        self.fft_padding = int(app_config["wave_probe"]["fft_padding"])
        self.rho_max = float(app_config["wave_probe"]["rho_max"])
        self.n_rho = int(app_config["wave_probe"]["n_rho"])
        self.high_energy_min = float(app_config["wave_probe"]["high_energy_min"])
        self.high_energy_max = float(app_config["wave_probe"]["high_energy_max"])

    def tolerance(self, tol: float | None) -> float:
        """Return `tol` when given, otherwise the configured singular-value tolerance."""
        if tol is None:
            return self.singular_value_tol
        if not 0.0 < tol < 1.0:
            raise ConfigurationError(f"tolerance must lie in (0, 1), got {tol}")
        return float(tol)


LAB_CFG = LoadLabConfig()
