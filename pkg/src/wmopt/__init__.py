"""Postselected weak-measurement simulation and closed-form output optima."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateProblemError,
    DimensionError,
    PostselectionError,
    ValidationError,
    WmoptError,
)
from .linalg import Tolerances  # noqa: E402
from .optimizer import (  # noqa: E402
    DetectorMoments,
    amplifying_detector_state,
    detector_moments,
    extremal_outputs,
    optimal_coupling,
    standardize,
    tradeoff_bound,
)
from .simulator import conditional_mean, normalized_probabilities, validity_report  # noqa: E402
from .states import DensityMatrix, MeasurementSetup, Observable, PovmElement  # noqa: E402
from .weak_values import cauchy_schwarz_report, weak_values  # noqa: E402

__all__ = [
    "DegenerateProblemError",
    "DensityMatrix",
    "DetectorMoments",
    "DimensionError",
    "MeasurementSetup",
    "Observable",
    "PostselectionError",
    "PovmElement",
    "Tolerances",
    "ValidationError",
    "WmoptError",
    "amplifying_detector_state",
    "cauchy_schwarz_report",
    "conditional_mean",
    "detector_moments",
    "extremal_outputs",
    "normalized_probabilities",
    "optimal_coupling",
    "standardize",
    "tradeoff_bound",
    "validity_report",
    "weak_values",
]
