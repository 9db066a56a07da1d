"""Offline analysis of navigation run logs.

Reads the documented log formats (run.ndjson, metrics files, signal
tables) and emits trajectory overlays, barrier time series, and metric
comparison figures.
"""

from plotkit.figures import plot_barrier, plot_metrics_table, plot_trajectory
from plotkit.logs import LogSchemaError, read_csv, read_metrics, read_run

__version__ = "0.1.0"

__all__ = [
    "plot_trajectory",
    "plot_barrier",
    "plot_metrics_table",
    "read_run",
    "read_metrics",
    "read_csv",
    "LogSchemaError",
    "__version__",
]
