"""End-to-end orchestration: charts in, analysis artifacts out.

The dyad scan is the expensive stage, so its results are cached to
dyads.json inside the output directory; alpha or graph-level sweeps can
rebuild everything downstream from that cache alone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

from .charts import (
    ChartStore,
    GenreCatalog,
    ListenMatrix,
    filter_genre,
    normalize_rows,
    read_genre_catalog,
)
from .cluster import average_linkage, summed_distances, to_newick
from .exports import (
    read_populations,
    write_acyclicity_json,
    write_centrality_json,
    write_dot,
    write_edge_csv,
    write_graphml,
    write_manifest,
    write_size_leadership_json,
)
from .lagcorr import LAGS, MAX_LAG, MIN_LAG, compute_all_velocities, save_dyads, scan_dyads
from .network import (
    AcyclicityReport,
    CentralityReport,
    LeadershipGraph,
    SizeLeadershipReport,
    build_graph,
    feedback_arc_set,
    pagerank,
    size_leadership,
)


def _tool_version() -> str:
    from leadlag import __version__

    return __version__


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline run depends on."""

    chart_path: str
    output_dir: str
    genre_path: str | None = None
    missing_weeks_path: str | None = None
    populations_path: str | None = None
    city_subset: tuple[str, ...] | None = None
    genre_id: str | None = None
    alpha: float = 0.01
    min_samples: int = 20
    lag_range: tuple[int, ...] = LAGS
    bonferroni: bool = False
    workers: int = 1
    emit_dot: bool = True
    emit_graphml: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.min_samples < 2:
            raise ValueError(f"min_samples must be at least 2, got {self.min_samples}")
        if not self.lag_range:
            raise ValueError("lag_range must be non-empty")
        for lag in self.lag_range:
            if not MIN_LAG <= lag <= MAX_LAG:
                raise ValueError(
                    f"lag_range entries must be in [{MIN_LAG}, {MAX_LAG}], got {lag}"
                )
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")
        if self.genre_id is not None and self.genre_path is None:
            raise ValueError("genre_id given without a genre catalog file")
        if self.city_subset is not None and not self.city_subset:
            raise ValueError("city_subset must be non-empty when given")


@dataclass(frozen=True)
class PipelineResult:
    graph: LeadershipGraph
    centrality: CentralityReport
    acyclicity: AcyclicityReport
    size: SizeLeadershipReport | None
    artifacts: dict[str, Path] = field(default_factory=dict)


def restrict_to_cities(store: ChartStore, cities: tuple[str, ...]) -> ChartStore:
    """Same store narrowed to a city subset; unknown names are an error."""
    unknown = sorted(set(cities) - set(store.cities))
    if unknown:
        raise ValueError(f"unknown cities in subset: {', '.join(unknown)}")
    keep = set(cities)
    charts = [c for c in store.charts if c.city_id in keep]
    return ChartStore(charts, store.universe, store.missing_weeks)


def build_windows(
    store: ChartStore, catalog: GenreCatalog | None = None, genre_id: str | None = None
) -> dict[int, ListenMatrix]:
    """Normalized listen windows for every valid start week."""
    genre_artists = catalog.artists(genre_id) if catalog and genre_id else None
    windows: dict[int, ListenMatrix] = {}
    for start in store.valid_window_starts():
        window = store.window(start)
        if genre_artists is not None:
            window = filter_genre(window, genre_artists)
        windows[start] = normalize_rows(window)
    return windows


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Ingest, scan, test, and export; returns the in-memory reports.

    Writes (under config.output_dir): dyads.json, edges.csv, graph.dot,
    graph.graphml, centrality.json, acyclicity.json, size_leadership.json
    when populations are given, dendrogram.nwk when two or more cities
    cluster, and manifest.json.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}

    populations = (
        read_populations(config.populations_path) if config.populations_path else None
    )
    store = ChartStore.from_files(config.chart_path, config.missing_weeks_path)
    catalog = read_genre_catalog(config.genre_path) if config.genre_path else None
    if config.city_subset is not None:
        store = restrict_to_cities(store, config.city_subset)

    windows = build_windows(store, catalog, config.genre_id)
    velocities = compute_all_velocities(windows)
    dyads = scan_dyads(
        velocities,
        min_samples=config.min_samples,
        workers=config.workers,
        lags=config.lag_range,
    )
    artifacts["dyads"] = out / "dyads.json"
    save_dyads(artifacts["dyads"], dyads)

    graph = build_graph(
        dyads, alpha=config.alpha, bonferroni=config.bonferroni, nodes=store.cities
    )
    artifacts["edges"] = out / "edges.csv"
    write_edge_csv(artifacts["edges"], graph)

    centrality = pagerank(graph)
    if config.emit_dot:
        artifacts["dot"] = out / "graph.dot"
        write_dot(artifacts["dot"], graph, centrality, populations)
    if config.emit_graphml:
        artifacts["graphml"] = out / "graph.graphml"
        write_graphml(artifacts["graphml"], graph, centrality, populations)
    artifacts["centrality"] = out / "centrality.json"
    write_centrality_json(artifacts["centrality"], centrality)

    acyclicity = feedback_arc_set(graph)
    artifacts["acyclicity"] = out / "acyclicity.json"
    write_acyclicity_json(artifacts["acyclicity"], acyclicity)

    size: SizeLeadershipReport | None = None
    if populations is not None:
        size = size_leadership(graph, centrality, populations)
        artifacts["size_leadership"] = out / "size_leadership.json"
        write_size_leadership_json(artifacts["size_leadership"], size)

    if windows and len(store.cities) >= 2:
        dist = summed_distances(windows)
        if len(dist.cities) >= 2:
            tree = average_linkage(dist)
            artifacts["dendrogram"] = out / "dendrogram.nwk"
            artifacts["dendrogram"].write_text(to_newick(tree) + "\n", encoding="utf-8")

    inputs = {"charts": config.chart_path}
    if config.genre_path:
        inputs["genres"] = config.genre_path
    if config.missing_weeks_path:
        inputs["missing_weeks"] = config.missing_weeks_path
    if config.populations_path:
        inputs["populations"] = config.populations_path
    artifacts["manifest"] = out / "manifest.json"
    write_manifest(
        artifacts["manifest"],
        parameters=asdict(config),
        input_paths=inputs,
        version=_tool_version(),
    )
    return PipelineResult(
        graph=graph,
        centrality=centrality,
        acyclicity=acyclicity,
        size=size,
        artifacts=artifacts,
    )
