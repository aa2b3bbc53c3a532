"""Workbench for jointly exploring two linked high-dimensional variable spaces.

Hierarchical clustering runs in one space; clusters, statistics, tours and
non-linear embeddings are rendered in both spaces through linked views.
"""

from .data import (
    BinAssignment,
    CoordinateMatrix,
    CovarianceSpec,
    DataError,
    Dataset,
    GroupAssignment,
    ScoreVector,
    SpacedDataset,
    assign_roles,
    center_scale_coords,
    chi2_score,
    cross_groups,
    external_score,
    impute_missing,
    parse_dataset,
    pull_coords,
    quantile_bins,
)
from .cluster import (
    ClusterError,
    ClusterSolution,
    ContingencyTable,
    DistanceMatrix,
    MergeTree,
    benchmark_points,
    ch_index,
    cluster_diameter,
    cluster_radius,
    compare_solutions,
    convex_hull_2d,
    cut_tree,
    dendrogram_order,
    distance_breakdown,
    hclust,
    pairwise_distances,
    silhouette,
    stats_sweep,
    wb_ratio,
)
from .tour import (
    ProjectionFrame,
    SliceResult,
    TourError,
    TourPath,
    geodesic_interpolate,
    grand_tour,
    guided_tour,
    hold_frame,
    lda_index,
    orthonormalize,
    pda_index,
    project,
    radial_tour,
    slice_mask,
)
from .nldr import Embedding, NldrError, NldrRegistry, classical_mds, perplexity_calibration, tsne
from .session import Session, SessionError, SessionManager, headless_run

__version__ = "0.1.0"
