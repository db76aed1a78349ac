"""Reduced-order graph-Laplacian toolkit.

Compresses a large graph-Laplacian into a small one that preserves diffusion
and commute-time distances on a chosen target vertex subset, and clusters
that subset consistently with full-graph spectral clustering.
"""

from .errors import (
    AssumptionError,
    GraphValidationError,
    NullspaceCaptureError,
    NullspaceMismatchWarning,
    ScalingError,
)
from .graphs import (
    GraphLaplacian,
    Normalization,
    PointCloud2D,
    TargetSubset,
    connected_components,
    heat_kernel_laplacian,
    laplacian_from_affinity,
    laplacian_from_edges,
    load_edge_list,
    load_points,
    random_walk_normalization,
    stability_step,
    two_circle_cloud,
    two_cloud_targets,
)
from .lanczos import BlockTridiagonal, LanczosBasis, deflated_block_lanczos
from .linalg import EigenDecomposition, pinv_apply, sym_eig, thin_svd
from .rom import (
    RomState,
    StageOne,
    TransferSamples,
    build_rom,
    load_rom,
    moment_errors,
    save_rom,
    transfer_full,
    transfer_rom,
)
from .reduced import (
    OptimalGrid1D,
    Rogl,
    build_rogl,
    export_rogl,
    extract_optimal_grid,
    reduced_components,
    save_rogl,
)
from .metrics import (
    DistanceReport,
    ErrorDecomposition,
    commute_distance_full,
    commute_distance_rogl,
    diffusion_distance_full,
    diffusion_distance_rogl,
    distance_report,
    error_decomposition,
)
from .clustering import (
    ClusterAssignment,
    kmeans_pp,
    partitions_equal,
    plateau_search,
    recovered_groups,
    roglc,
    rvsc,
    rwnsc_full,
    sample_vertices,
)
from .estimators import (
    FullSpectralClustering,
    GraphReducer,
    ReducedLaplacianClustering,
    RitzSamplingClustering,
    as_laplacian,
)

__version__ = "0.1.0"
