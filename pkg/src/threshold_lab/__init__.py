"""threshold-lab: threshold behaviour of two-dimensional point interactions."""
from threshold_lab.errors import ThresholdLabError
from threshold_lab.spectral.gamma_core import Configuration

__version__ = "0.4.0"

__all__ = ["Configuration", "ThresholdLabError", "__version__"]
