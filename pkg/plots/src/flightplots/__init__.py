"""flightplots: offline figures from recorded flight-sim run directories.

Three figure types, one subcommand each: a top-down ground track with
waypoint markers, stacked position/heading responses against setpoints,
and estimator error traces with RMS annotations. Run directories are
treated strictly read-only.
"""

from .figures import estimator_error_figure, response_figure, save_figure, topdown_figure
from .runio import RunArtifacts, RunDataError

__all__ = [
    "RunArtifacts",
    "RunDataError",
    "estimator_error_figure",
    "response_figure",
    "save_figure",
    "topdown_figure",
]
__version__ = "0.1.0"
