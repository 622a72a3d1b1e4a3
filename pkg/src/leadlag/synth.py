"""Synthetic listening data with a planted leadership structure.

Cities evolve as taste vectors on the unit sphere of the positive
orthant.  Root cities follow a tangent-projected Gaussian random walk;
each follower blends its leaders' realized steps, delayed by the
planted lag, with fresh isotropic noise.  Rounding taste to integer
listener counts produces chart files in the same format the ingest
layer reads, so recovery experiments exercise the full pipeline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .charts import MAX_CHART_ENTRIES, WINDOW_WEEKS, WeeklyChart
from .lagcorr import MAX_LAG, MIN_LAG

DEFAULT_STEP_SCALE = 0.1
DEFAULT_WEEKS = 153


@dataclass(frozen=True)
class SynthCity:
    """One generated city: identity, invented census figure, chart volume."""

    city_id: str
    population: int
    activity: float

    def __post_init__(self) -> None:
        if not self.city_id:
            raise ValueError("city_id must be non-empty")
        if self.population <= 0:
            raise ValueError(f"population must be positive, got {self.population}")
        if not math.isfinite(self.activity) or self.activity <= 0.0:
            raise ValueError(f"activity must be positive, got {self.activity}")


@dataclass(frozen=True)
class PlantedEdge:
    """Directed influence: the follower echoes the leader after lag_weeks."""

    leader: str
    follower: str
    lag_weeks: int
    coupling: float

    def __post_init__(self) -> None:
        if self.leader == self.follower:
            raise ValueError(f"self-influence is not allowed: {self.leader!r}")
        if not MIN_LAG <= self.lag_weeks <= MAX_LAG:
            raise ValueError(
                f"lag_weeks must be in [{MIN_LAG}, {MAX_LAG}], got {self.lag_weeks}"
            )
        if not 0.0 < self.coupling <= 1.0:
            raise ValueError(f"coupling must be in (0, 1], got {self.coupling}")


@dataclass(frozen=True)
class PlantedHierarchy:
    """Acyclic set of planted influence edges over a fixed city roster."""

    cities: tuple[SynthCity, ...]
    edges: tuple[PlantedEdge, ...] = ()

    def __post_init__(self) -> None:
        ids = [c.city_id for c in self.cities]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate city ids in hierarchy")
        known = set(ids)
        seen_pairs: set[tuple[str, str]] = set()
        for edge in self.edges:
            for endpoint in (edge.leader, edge.follower):
                if endpoint not in known:
                    raise ValueError(f"edge references unknown city {endpoint!r}")
            pair = (edge.leader, edge.follower)
            if pair in seen_pairs:
                raise ValueError(f"duplicate planted edge {pair}")
            seen_pairs.add(pair)
        self.topological_order()

    def city_ids(self) -> list[str]:
        return [c.city_id for c in self.cities]

    def populations(self) -> dict[str, int]:
        return {c.city_id: c.population for c in self.cities}

    def in_edges(self) -> dict[str, tuple[PlantedEdge, ...]]:
        grouped: dict[str, list[PlantedEdge]] = {c.city_id: [] for c in self.cities}
        for edge in self.edges:
            grouped[edge.follower].append(edge)
        return {city: tuple(edges) for city, edges in grouped.items()}

    def topological_order(self) -> list[str]:
        """Kahn's algorithm, lexicographic among ready cities.

        Raises ValueError when the planted edges contain a cycle.
        """
        indegree = {c.city_id: 0 for c in self.cities}
        outgoing: dict[str, list[str]] = {c.city_id: [] for c in self.cities}
        for edge in self.edges:
            indegree[edge.follower] += 1
            outgoing[edge.leader].append(edge.follower)
        ready = sorted(city for city, deg in indegree.items() if deg == 0)
        order: list[str] = []
        while ready:
            city = ready.pop(0)
            order.append(city)
            changed = False
            for nxt in outgoing[city]:
                indegree[nxt] -= 1
                if indegree[nxt] == 0:
                    ready.append(nxt)
                    changed = True
            if changed:
                ready.sort()
        if len(order) != len(self.cities):
            raise ValueError("planted edges contain a cycle")
        return order


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one generation run."""

    n_artists: int
    n_weeks: int = DEFAULT_WEEKS
    noise_sigma: float = 0.05
    seed: int = 0
    step_scale: float = DEFAULT_STEP_SCALE
    missing_weeks: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n_artists < 1:
            raise ValueError(f"n_artists must be positive, got {self.n_artists}")
        if self.n_weeks < 1:
            raise ValueError(f"n_weeks must be positive, got {self.n_weeks}")
        if not math.isfinite(self.noise_sigma) or self.noise_sigma < 0.0:
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if not math.isfinite(self.step_scale) or self.step_scale < 0.0:
            raise ValueError(f"step_scale must be non-negative, got {self.step_scale}")
        for week in self.missing_weeks:
            if not 0 <= week < self.n_weeks:
                raise ValueError(f"missing week {week} outside [0, {self.n_weeks})")


def artist_label(index: int) -> str:
    return f"artist_{index:04d}"


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _walk_city(
    rng: np.random.Generator,
    config: SynthConfig,
    horizon: int,
    in_edges: Sequence[PlantedEdge],
    leader_steps: Mapping[str, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """One city's taste path and realized steps over the full horizon."""
    n_art = config.n_artists
    positions = np.zeros((horizon, n_art))
    steps = np.zeros((horizon - 1, n_art))
    positions[0] = _unit(rng.uniform(0.05, 1.0, n_art))
    step_sigma = config.step_scale / math.sqrt(n_art)
    noise_sigma = config.noise_sigma / math.sqrt(n_art)
    for week in range(horizon - 1):
        here = positions[week]
        if in_edges:
            drive = np.zeros(n_art)
            for edge in in_edges:
                source = week - edge.lag_weeks
                if source >= 0:
                    drive += edge.coupling * leader_steps[edge.leader][source]
            drive /= len(in_edges)
            drive = drive + rng.normal(0.0, noise_sigma, n_art)
        else:
            drive = rng.normal(0.0, step_sigma, n_art)
            drive = drive - (drive @ here) * here
        moved = np.clip(here + drive, 0.0, None)
        norm = np.linalg.norm(moved)
        if norm == 0.0:
            positions[week + 1] = here
        else:
            positions[week + 1] = moved / norm
        steps[week] = positions[week + 1] - here
    return positions, steps


def _counts_to_chart(week: int, city_id: str, counts: np.ndarray) -> WeeklyChart:
    present = np.nonzero(counts >= 1.0)[0]
    entries = [(artist_label(j), int(counts[j])) for j in present]
    if len(entries) > MAX_CHART_ENTRIES:
        entries.sort(key=lambda item: (-item[1], item[0]))
        entries = entries[:MAX_CHART_ENTRIES]
    entries.sort()
    return WeeklyChart(week_index=week, city_id=city_id, entries=tuple(entries))


def generate_charts(
    hierarchy: PlantedHierarchy, config: SynthConfig
) -> list[WeeklyChart]:
    """All weekly charts for the run, sorted by (week, city).

    Every week in [0, n_weeks) is emitted, including the ones listed in
    config.missing_weeks; callers flag those at ingest time.  A single
    generator seeded from config.seed is consumed city by city in
    topological order, so equal inputs reproduce byte-identical files.
    """
    order = hierarchy.topological_order()
    in_edges = hierarchy.in_edges()
    max_lag = max((e.lag_weeks for e in hierarchy.edges), default=MIN_LAG)
    preroll = len(order) * max_lag + WINDOW_WEEKS
    horizon = config.n_weeks + preroll
    rng = np.random.default_rng(config.seed)
    activity = {c.city_id: c.activity for c in hierarchy.cities}
    steps: dict[str, np.ndarray] = {}
    charts: list[WeeklyChart] = []
    for city_id in order:
        positions, city_steps = _walk_city(
            rng, config, horizon, in_edges[city_id], steps
        )
        steps[city_id] = city_steps
        counts = np.rint(activity[city_id] * positions[preroll : preroll + config.n_weeks])
        for week in range(config.n_weeks):
            chart = _counts_to_chart(week, city_id, counts[week])
            if chart.entries:
                charts.append(chart)
    charts.sort(key=lambda c: (c.week_index, c.city_id))
    return charts


def shuffle_null(charts: Sequence[WeeklyChart], seed: int) -> list[WeeklyChart]:
    """Null model: each city's charts keep their content, weeks permuted.

    Per city the permutation comes from an independent generator keyed
    by (seed, city rank in sorted order), so the draws never depend on
    the order charts arrive in.
    """
    by_city: dict[str, dict[int, WeeklyChart]] = {}
    for chart in charts:
        per_week = by_city.setdefault(chart.city_id, {})
        if chart.week_index in per_week:
            raise ValueError(
                f"duplicate chart for week {chart.week_index} city {chart.city_id!r}"
            )
        per_week[chart.week_index] = chart
    shuffled: list[WeeklyChart] = []
    for rank, city_id in enumerate(sorted(by_city)):
        weeks = sorted(by_city[city_id])
        rng = np.random.default_rng([seed, rank])
        perm = rng.permutation(len(weeks))
        for slot, source in enumerate(perm):
            original = by_city[city_id][weeks[source]]
            shuffled.append(
                WeeklyChart(
                    week_index=weeks[slot],
                    city_id=city_id,
                    entries=original.entries,
                )
            )
    shuffled.sort(key=lambda c: (c.week_index, c.city_id))
    return shuffled


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def load_hierarchy(path: str | Path) -> PlantedHierarchy:
    """Hierarchy from JSON: cities with population and activity, edges
    with leader, follower, lag, coupling."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    _require(isinstance(raw, dict), "hierarchy file must hold a JSON object")
    _require("cities" in raw, "hierarchy file is missing 'cities'")
    cities = []
    for entry in raw["cities"]:
        _require(isinstance(entry, dict), "each city must be a JSON object")
        for key in ("city", "population", "activity"):
            _require(key in entry, f"city entry is missing {key!r}")
        cities.append(
            SynthCity(
                city_id=str(entry["city"]),
                population=int(entry["population"]),
                activity=float(entry["activity"]),
            )
        )
    edges = []
    for entry in raw.get("edges", []):
        _require(isinstance(entry, dict), "each edge must be a JSON object")
        for key in ("leader", "follower", "lag", "coupling"):
            _require(key in entry, f"edge entry is missing {key!r}")
        edges.append(
            PlantedEdge(
                leader=str(entry["leader"]),
                follower=str(entry["follower"]),
                lag_weeks=int(entry["lag"]),
                coupling=float(entry["coupling"]),
            )
        )
    return PlantedHierarchy(cities=tuple(cities), edges=tuple(edges))


def load_synth_config(path: str | Path) -> SynthConfig:
    """Run configuration from JSON; only n_artists is mandatory."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    _require(isinstance(raw, dict), "config file must hold a JSON object")
    _require("n_artists" in raw, "config file is missing 'n_artists'")
    known = {
        "n_artists",
        "n_weeks",
        "noise_sigma",
        "seed",
        "step_scale",
        "missing_weeks",
    }
    for key in raw:
        _require(key in known, f"unknown config key {key!r}")
    kwargs: dict = {"n_artists": int(raw["n_artists"])}
    if "n_weeks" in raw:
        kwargs["n_weeks"] = int(raw["n_weeks"])
    if "noise_sigma" in raw:
        kwargs["noise_sigma"] = float(raw["noise_sigma"])
    if "seed" in raw:
        kwargs["seed"] = int(raw["seed"])
    if "step_scale" in raw:
        kwargs["step_scale"] = float(raw["step_scale"])
    if "missing_weeks" in raw:
        kwargs["missing_weeks"] = frozenset(int(w) for w in raw["missing_weeks"])
    return SynthConfig(**kwargs)


def chain_hierarchy(
    n_cities: int,
    lag_weeks: int = 1,
    coupling: float = 0.9,
    activity: float = 20000.0,
    base_population: int = 1_000_000,
) -> PlantedHierarchy:
    """Linear chain c00 -> c01 -> ... with one planted edge per link.

    Populations decrease along the chain so leaders are the larger
    cities, matching the regime the recovery experiments probe.
    """
    if n_cities < 1:
        raise ValueError(f"n_cities must be positive, got {n_cities}")
    decrement = base_population // (2 * n_cities)
    cities = tuple(
        SynthCity(
            city_id=f"c{i:02d}",
            population=base_population - decrement * i,
            activity=activity,
        )
        for i in range(n_cities)
    )
    edges = tuple(
        PlantedEdge(
            leader=f"c{i:02d}",
            follower=f"c{i + 1:02d}",
            lag_weeks=lag_weeks,
            coupling=coupling,
        )
        for i in range(n_cities - 1)
    )
    return PlantedHierarchy(cities=cities, edges=edges)
