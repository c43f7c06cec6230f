"""Exact random spanning tree sampling with fast-forwarded cover walks."""

from .errors import FFCoverError, NumericalError, ValidationError
from .graph import (
    KernelMode,
    RootDistribution,
    TransitionKernel,
    WeightedDigraph,
    build_kernel,
    build_kernel_circulation,
    build_kernel_general,
    check_circulation,
    escape_time_estimate,
    read_edge_list,
    root_distribution,
    validate_graph,
    write_edge_list,
)
from .oracle import GofReport, TreeLaw, enumerate_rooted_trees, gof_test, matrix_tree_partition
from .samplers import (
    KappaPolicy,
    SampleStats,
    aldous_broder,
    exit_edge_sample,
    fast_forwarded_cover,
    laplacian_sampler,
    sample_rooted_tree,
    sample_trees,
    wilson,
)
from .spectral import (
    SpectralResult,
    TransientSystem,
    bottleneck_report,
    cover_time_bound,
    exit_node_distribution,
    lambda2,
    solve_transient,
)
from .tree import SpanningTree

__version__ = "0.1.0"
