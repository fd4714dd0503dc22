"""Average age of information for IRSA and slotted ALOHA.

Exact closed-form network age expressions for framed repetition-based random
access (with iterative interference cancellation) and classical slotted
ALOHA, together with frame-level Monte Carlo engines that validate them.
"""

__version__ = "0.1.0"

from .analysis import (  # noqa: F401
    AoiBreakdown,
    DivergenceError,
    ThresholdResult,
    ZMoments,
    aoi_irsa,
    aoi_sa,
    density_evolution_threshold,
    irsa_load,
    mean_wait,
    nu_from_throughput,
    sa_optimal_aoi,
    sa_throughput,
    x_pmf,
    z_moments,
)
from .decoder import (  # noqa: F401
    DecodingResult,
    Frame,
    build_frame,
    decode_frame,
    enumerate_plr_exact,
)
from .model import (  # noqa: F401
    DegreeDistribution,
    Protocol,
    SystemConfig,
    ValidationReport,
    edge_perspective,
    irsa_config,
    load_config,
    mean_degree,
    parse_lambda,
    sa_config,
    validate_config,
)
from .optimize import (  # noqa: F401
    FrameOptResult,
    PlrCache,
    RatioPoint,
    SweepPoint,
    aoi_ratio_curves,
    optimal_frame_size,
    sweep_aoi_vs_activity,
)
from .sim import (  # noqa: F401
    AoiStats,
    NodeAgeTracker,
    PlrEstimate,
    estimate_plr,
    simulate_aoi_irsa,
    simulate_aoi_sa,
)
