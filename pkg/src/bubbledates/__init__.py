"""Bubble date estimation under time-varying volatility.

OLS and two-step volatility-corrected (WLS) sample-splitting estimators of
the emergence, collapse and recovery dates of an explosive episode, with a
simulator for the four-regime model and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Constant,
    DgpParams,
    OneBreak,
    Piecewise,
    ShockSeries,
    generate_shocks,
    local_to_unity,
    simulate,
    volatility_at,
    volatility_path,
)
from .estimators import (  # noqa: E402
    BreakEstimates,
    DegenerateSegmentError,
    EstimationError,
    SegmentFit,
    estimate_collapse,
    estimate_emerge,
    estimate_recover,
    sample_split,
    segment_fit,
    split_ssr,
    ssr_profile,
    weighted_ar_coef,
)
from .adaptive import (  # noqa: E402
    AdaptiveResult,
    KernelSpec,
    VarianceEstimate,
    adaptive_estimate,
    kernel_variance,
    regime_residuals,
    resolve_bandwidth,
)
from .experiments import (  # noqa: E402
    McConfig,
    detection_frequency,
    run_experiment,
    run_replication,
)
