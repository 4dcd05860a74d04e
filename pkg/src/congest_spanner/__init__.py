"""CONGEST-model simulation of multiple weighted BFS trees and (+6)-additive spanners."""

from .graph_core import (
    Graph,
    GraphError,
    Path,
    WbfsTree,
    assign_random_weights,
    bfs_distances,
    diameter,
    generate_graph,
    load_edge_list,
    sequential_wbfs_tree,
    write_edge_list,
)
from .congest_sim import (
    Announce,
    BandwidthViolation,
    Buy,
    NodeProgram,
    NonDeterminismGuard,
    Report,
    SimConfig,
    Trace,
    Triplet,
    bits_per_message,
    run_simulation,
)
from .wbfs import (
    IncompleteRun,
    WbfsNode,
    check_round_invariants,
    extract_trees,
    run_wbfs,
    solve_detection,
    wbfs_program,
)
from .spanner import (
    Clustering,
    PathBuyParams,
    PipelineOverflow,
    SpannerResult,
    cluster,
    distributed_6ap,
    leader_bfs_setup,
    missing_edge_weights,
    sequential_6ap,
)

__version__ = "0.1.0"
