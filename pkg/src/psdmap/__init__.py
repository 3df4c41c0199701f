"""Compressive PSD-map reconstruction toolkit.

Reconstructs per-sensor power spectral densities from compressed sensor
reports at a fusion center, exploiting the shared common component inside
groups of neighboring sensors, and estimates/compensates the destructive
filters of an imperfect reporting channel. Ships a Monte Carlo sweep
harness, a FastAPI service wrapper and a thin CLI client.
"""

__version__ = "0.1.0"

from .harness import ExperimentConfig, RunResult, figure_config, run_experiment, run_figure
from .scene import SceneConfig
from .channel import ChannelConfig
from .solvers import BpdnOptions

__all__ = [
    "__version__",
    "ExperimentConfig",
    "SceneConfig",
    "ChannelConfig",
    "BpdnOptions",
    "RunResult",
    "figure_config",
    "run_experiment",
    "run_figure",
]
