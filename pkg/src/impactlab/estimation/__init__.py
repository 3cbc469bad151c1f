"""Measurement pipeline: binning, fits, surfaces, trajectories, decay and overlaps."""
from .binning import BinnedCurve, bin_statistics, equal_count_bins, impact_curve
from .fitting import (
    FAMILIES,
    ConvergenceError,
    Family,
    FitError,
    FitResult,
    SingularJacobianError,
    e_rms,
    get_family,
    weighted_nls,
)
from .overlap import DEFAULT_DURATION_BINS, OverlapRow, overlap_stats
from .paths import DECAY_Z_GRID, DecayCurve, TrajectoryCurve, collect_paths, decay_curves, trajectory_curves
from .surface import LocalExponents, SurfaceGrid, fit_surface, local_exponent_map, residual_map, surface_grid

__all__ = [
    "BinnedCurve",
    "bin_statistics",
    "equal_count_bins",
    "impact_curve",
    "FAMILIES",
    "ConvergenceError",
    "Family",
    "FitError",
    "FitResult",
    "SingularJacobianError",
    "e_rms",
    "get_family",
    "weighted_nls",
    "DEFAULT_DURATION_BINS",
    "OverlapRow",
    "overlap_stats",
    "DECAY_Z_GRID",
    "DecayCurve",
    "TrajectoryCurve",
    "collect_paths",
    "decay_curves",
    "trajectory_curves",
    "LocalExponents",
    "SurfaceGrid",
    "fit_surface",
    "local_exponent_map",
    "residual_map",
    "surface_grid",
]
