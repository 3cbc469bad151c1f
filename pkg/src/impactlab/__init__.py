"""Metaorder market impact: volume-time measurement, impact models and fits."""
__version__ = "0.1.0"

from .book import BookParams, BookSaturationError, book_profile, cumulative_depth, impact_log_closed, invert_impact
from .core import (
    DayBars,
    DayContext,
    ExecutionDescriptors,
    FilterConfig,
    FilterReport,
    ImpactPath,
    Metaorder,
    MinuteBar,
    VolumeClock,
    apply_filters,
    build_day_context,
    build_volume_clock,
    compute_descriptors,
    daily_volatility_proxy,
    impact_series,
)
from .models import (
    AcParams,
    DivergenceError,
    PropagatorParams,
    SimulationConfig,
    ac_optimal_inventory,
    ac_trajectory,
    alpha_temporary,
    alpha_trajectory,
    alpha_trajectory_quadrature,
    simulate_metaorder_path,
    simulate_metaorder_paths,
    vwap_temporary,
    vwap_trajectory,
)
from .special import DomainError, QuadratureError, hyp2f1, integrate
