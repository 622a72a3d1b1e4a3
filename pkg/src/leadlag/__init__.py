"""Leadership inference over cities from weekly listening charts."""

__version__ = "0.1.0"

from .charts import (
    ChartFormatError,
    ChartStore,
    GenreCatalog,
    ListenMatrix,
    WeeklyChart,
    WindowUnavailable,
    filter_genre,
    normalize_rows,
    read_chart_csv,
    read_genre_catalog,
    read_missing_weeks,
    write_chart_csv,
    write_missing_weeks,
)
from .cluster import (
    ClusterTree,
    DistanceMatrix,
    average_linkage,
    cluster_map,
    flat_cut,
    parse_newick,
    summed_distances,
    to_newick,
)
from .exports import (
    ExportFormatError,
    parse_dot,
    read_edge_csv,
    read_graphml,
    read_manifest,
    read_populations,
    write_dot,
    write_edge_csv,
    write_graphml,
    write_manifest,
    write_populations,
)
from .lagcorr import (
    DyadResult,
    DyadUnavailable,
    VelocitySeries,
    best_dyad,
    compute_all_velocities,
    compute_velocities,
    load_dyads,
    save_dyads,
    scan_dyads,
)
from .network import (
    AcyclicityReport,
    CentralityReport,
    Edge,
    LeadershipGraph,
    SizeLeadershipReport,
    accept_edge,
    build_graph,
    feedback_arc_set,
    pagerank,
    size_leadership,
)
from .pipeline import PipelineResult, RunConfig, build_windows, run_pipeline
from .stats import (
    DegenerateSampleError,
    SpearmanResult,
    TestResult,
    UndefinedCorrelationError,
    one_sample_ttest,
    paired_ttest,
    spearman,
    t_cdf,
)
from .synth import (
    PlantedEdge,
    PlantedHierarchy,
    SynthCity,
    SynthConfig,
    chain_hierarchy,
    generate_charts,
    load_hierarchy,
    load_synth_config,
    shuffle_null,
)

__all__ = [
    "__version__",
    "AcyclicityReport",
    "CentralityReport",
    "ChartFormatError",
    "ChartStore",
    "ClusterTree",
    "DegenerateSampleError",
    "DistanceMatrix",
    "DyadResult",
    "DyadUnavailable",
    "Edge",
    "ExportFormatError",
    "GenreCatalog",
    "LeadershipGraph",
    "ListenMatrix",
    "PipelineResult",
    "PlantedEdge",
    "PlantedHierarchy",
    "RunConfig",
    "SizeLeadershipReport",
    "SpearmanResult",
    "SynthCity",
    "SynthConfig",
    "TestResult",
    "UndefinedCorrelationError",
    "VelocitySeries",
    "WeeklyChart",
    "WindowUnavailable",
    "accept_edge",
    "average_linkage",
    "best_dyad",
    "build_graph",
    "build_windows",
    "chain_hierarchy",
    "cluster_map",
    "compute_all_velocities",
    "compute_velocities",
    "feedback_arc_set",
    "filter_genre",
    "flat_cut",
    "generate_charts",
    "load_dyads",
    "load_hierarchy",
    "load_synth_config",
    "normalize_rows",
    "one_sample_ttest",
    "pagerank",
    "paired_ttest",
    "parse_dot",
    "parse_newick",
    "read_chart_csv",
    "read_edge_csv",
    "read_genre_catalog",
    "read_graphml",
    "read_manifest",
    "read_missing_weeks",
    "read_populations",
    "run_pipeline",
    "save_dyads",
    "scan_dyads",
    "shuffle_null",
    "size_leadership",
    "spearman",
    "summed_distances",
    "t_cdf",
    "to_newick",
    "write_chart_csv",
    "write_dot",
    "write_edge_csv",
    "write_graphml",
    "write_manifest",
    "write_missing_weeks",
    "write_populations",
]
