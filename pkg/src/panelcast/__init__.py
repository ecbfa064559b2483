"""panelcast: a panel nowcasting benchmark suite.

End-to-end machinery for comparing sequence models against linear and
spatial-econometric benchmarks on unit x year panels: leakage-safe
standardization, queen-contiguity graphs with an O(N) log-determinant
device, SAR/SDM profile-QML, per-unit linear baselines, from-scratch
recurrent networks, cross-sectional Diebold-Mariano evaluation, and
Chow-Lin temporal disaggregation diagnostics.
"""

from . import baselines, disagg, evaluation, graph, neural, panel, spatial, synth
from .panel import (
    DiagnosticsReport,
    Panel,
    ScalingStats,
    SplitSpec,
    destandardize,
    diagnostics,
    fit_scaling,
    ingest_panel,
    standardize,
)
from .graph import (
    SpatialGraph,
    admissible_interval,
    build_graph,
    eigen_spectrum,
    ingest_edges,
    log_det,
    remove_islands,
    spatial_lag,
)
from .evaluation import AccuracyReport, DmResult, ForecastSet, accuracy, dm_test
from .spatial import SpatialFit, concentrated_loglik, within_transform

__version__ = "0.1.0"
