"""Conflict-aware evidential classification with abstention.

Evidential networks output Dirichlet concentrations.  This package scores
the disagreement between several views of one input and decays the
evidence accordingly, so that out-of-distribution and adversarial inputs
are more often rejected.
"""

from .calibration import CalibratedThreshold, decide, delta_summary, fit_threshold, orient
from .conflict import ConflictParams, adjust, c_inter, c_intra, combine
from .errors import CedlError, ConfigError, DomainError, InvalidInputError, ParseError, ShapeError
from .evidence import MetricKind, score, summarize
from .harness import CoverageReport, Experiment, ExperimentConfig, run_experiment

__version__ = "0.1.0"
