"""Shared fixture builders for the test suite."""

from __future__ import annotations

from leadlag.charts import ArtistUniverse, ChartStore, WeeklyChart, normalize_rows


def store_from_cells(cells, missing=frozenset()):
    """ChartStore from a {(week, city, artist): count} dict."""
    by_chart = {}
    for (week, city, artist), count in cells.items():
        by_chart.setdefault((week, city), []).append((artist, count))
    charts = [WeeklyChart(w, c, tuple(es)) for (w, c), es in sorted(by_chart.items())]
    universe = ArtistUniverse(a for _, _, a in cells)
    return ChartStore(charts, universe, missing)


def normalized_windows(store):
    return {s: normalize_rows(store.window(s)) for s in store.valid_window_starts()}
