"""Readers and writers for every artifact the pipeline emits.

Each format round-trips through its own parser. Floats are written
with repr, the shortest string that parses back to the same double, so
reruns with equal inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence
from xml.etree import ElementTree as ET

from .network import (
    AcyclicityReport,
    CentralityReport,
    Edge,
    LeadershipGraph,
    SizeLeadershipReport,
)

EDGE_HEADER = ("follower", "leader", "weight", "lag_weeks")
POPULATION_HEADER = ("city", "population")

_GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"

NodeAttrs = dict[str, dict[str, float | int]]


class ExportFormatError(ValueError):
    """An artifact file does not match the format this module writes."""


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------- edge CSV


def write_edge_csv(path: str | Path, graph: LeadershipGraph) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EDGE_HEADER)
        for e in sorted(graph.edges, key=lambda e: (e.follower, e.leader)):
            writer.writerow([e.follower, e.leader, _fmt(e.weight), e.lag_weeks])


def read_edge_csv(path: str | Path) -> list[Edge]:
    edges: list[Edge] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(EDGE_HEADER):
            raise ExportFormatError(
                f"{path}:1: expected header {','.join(EDGE_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ExportFormatError(
                    f"{path}:{lineno}: expected 4 fields, got {len(row)}"
                )
            follower, leader, weight_text, lag_text = row
            if not follower or not leader:
                raise ExportFormatError(f"{path}:{lineno}: empty city id")
            try:
                weight = float(weight_text)
            except ValueError:
                raise ExportFormatError(
                    f"{path}:{lineno}: bad weight {weight_text!r}"
                ) from None
            try:
                lag = int(lag_text)
            except ValueError:
                raise ExportFormatError(
                    f"{path}:{lineno}: bad lag {lag_text!r}"
                ) from None
            edges.append(Edge(follower, leader, weight, lag))
    return edges


# ---------------------------------------------------------- populations CSV


def write_populations(path: str | Path, populations: Mapping[str, int]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(POPULATION_HEADER)
        for city in sorted(populations):
            writer.writerow([city, populations[city]])


def read_populations(path: str | Path) -> dict[str, int]:
    populations: dict[str, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(POPULATION_HEADER):
            raise ExportFormatError(
                f"{path}:1: expected header {','.join(POPULATION_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ExportFormatError(
                    f"{path}:{lineno}: expected 2 fields, got {len(row)}"
                )
            city, pop_text = row
            if not city:
                raise ExportFormatError(f"{path}:{lineno}: empty city id")
            if city in populations:
                raise ExportFormatError(f"{path}:{lineno}: duplicate city {city!r}")
            try:
                population = int(pop_text)
            except ValueError:
                raise ExportFormatError(
                    f"{path}:{lineno}: bad population {pop_text!r}"
                ) from None
            if population <= 0:
                raise ExportFormatError(
                    f"{path}:{lineno}: population must be positive, got {population}"
                )
            populations[city] = population
    return populations


# ----------------------------------------------------------------- node attrs


def _node_attributes(
    graph: LeadershipGraph,
    centrality: CentralityReport | None,
    populations: Mapping[str, int] | None,
) -> NodeAttrs:
    attrs: NodeAttrs = {node: {} for node in sorted(graph.nodes)}
    for node in attrs:
        if centrality is not None:
            attrs[node]["pagerank"] = float(centrality.pagerank[node])
            attrs[node]["weighted_in_degree"] = float(
                centrality.weighted_in_degree[node]
            )
        if populations is not None and node in populations:
            attrs[node]["population"] = int(populations[node])
    return attrs


# ----------------------------------------------------------------------- DOT


_DOT_QUOTED = r'"((?:[^"\\]|\\.)*)"'
_DOT_NODE_RE = re.compile(rf"^{_DOT_QUOTED}(?:\s*\[([^\]]*)\])?;$")
_DOT_EDGE_RE = re.compile(rf"^{_DOT_QUOTED}\s*->\s*{_DOT_QUOTED}\s*\[([^\]]*)\];$")
_DOT_ATTR_RE = re.compile(r"^(\w+)=([^,\s]+)$")


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_unquote(text: str) -> str:
    return text.replace('\\"', '"').replace("\\\\", "\\")


def _format_attrs(attrs: Mapping[str, float | int]) -> str:
    parts = []
    for key in sorted(attrs):
        value = attrs[key]
        text = str(value) if isinstance(value, int) else _fmt(value)
        parts.append(f"{key}={text}")
    return ", ".join(parts)


def _parse_attr_block(block: str, path: str | Path, lineno: int) -> dict:
    attrs: dict[str, float | int] = {}
    for piece in filter(None, (p.strip() for p in block.split(","))):
        match = _DOT_ATTR_RE.match(piece)
        if not match:
            raise ExportFormatError(f"{path}:{lineno}: bad attribute {piece!r}")
        key, text = match.groups()
        attrs[key] = int(text) if re.fullmatch(r"-?\d+", text) else float(text)
    return attrs


def write_dot(
    path: str | Path,
    graph: LeadershipGraph,
    centrality: CentralityReport | None = None,
    populations: Mapping[str, int] | None = None,
) -> None:
    """Influence digraph in DOT form; arrows point leader -> follower."""
    attrs = _node_attributes(graph, centrality, populations)
    lines = ["digraph leadership {"]
    for node in sorted(graph.nodes):
        block = f" [{_format_attrs(attrs[node])}]" if attrs[node] else ""
        lines.append(f"  {_dot_quote(node)}{block};")
    for e in sorted(graph.edges, key=lambda e: (e.follower, e.leader)):
        block = _format_attrs({"lag_weeks": e.lag_weeks, "weight": e.weight})
        lines.append(f"  {_dot_quote(e.leader)} -> {_dot_quote(e.follower)} [{block}];")
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_dot(path: str | Path) -> tuple[NodeAttrs, list[Edge]]:
    """Parse the exact dialect write_dot emits, nothing more."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "digraph leadership {" or lines[-1] != "}":
        raise ExportFormatError(f"{path}: not a digraph this tool wrote")
    nodes: NodeAttrs = {}
    edges: list[Edge] = []
    for lineno, line in enumerate(lines[1:-1], start=2):
        edge_match = _DOT_EDGE_RE.match(line)
        if edge_match:
            leader, follower, block = edge_match.groups()
            attrs = _parse_attr_block(block, path, lineno)
            for key in ("weight", "lag_weeks"):
                if key not in attrs:
                    raise ExportFormatError(f"{path}:{lineno}: edge missing {key}")
            edges.append(
                Edge(
                    follower=_dot_unquote(follower),
                    leader=_dot_unquote(leader),
                    weight=float(attrs["weight"]),
                    lag_weeks=int(attrs["lag_weeks"]),
                )
            )
            continue
        node_match = _DOT_NODE_RE.match(line)
        if node_match:
            name, block = node_match.groups()
            attrs = _parse_attr_block(block, path, lineno) if block else {}
            nodes[_dot_unquote(name)] = attrs
            continue
        raise ExportFormatError(f"{path}:{lineno}: unrecognized line {line!r}")
    return nodes, edges


# -------------------------------------------------------------------- GraphML


_GRAPHML_NODE_KEYS = (
    ("d_pagerank", "pagerank", "double"),
    ("d_indegree", "weighted_in_degree", "double"),
    ("d_population", "population", "long"),
)
_GRAPHML_EDGE_KEYS = (
    ("d_weight", "weight", "double"),
    ("d_lag", "lag_weeks", "int"),
)


def write_graphml(
    path: str | Path,
    graph: LeadershipGraph,
    centrality: CentralityReport | None = None,
    populations: Mapping[str, int] | None = None,
) -> None:
    """Same content as the DOT export in GraphML; source=leader."""
    attrs = _node_attributes(graph, centrality, populations)
    root = ET.Element("graphml", xmlns=_GRAPHML_NS)
    for key_id, name, kind in _GRAPHML_NODE_KEYS:
        ET.SubElement(
            root, "key", id=key_id, **{"for": "node", "attr.name": name, "attr.type": kind}
        )
    for key_id, name, kind in _GRAPHML_EDGE_KEYS:
        ET.SubElement(
            root, "key", id=key_id, **{"for": "edge", "attr.name": name, "attr.type": kind}
        )
    g = ET.SubElement(root, "graph", id="leadership", edgedefault="directed")
    name_to_key = {name: key_id for key_id, name, _ in _GRAPHML_NODE_KEYS}
    for node in sorted(graph.nodes):
        el = ET.SubElement(g, "node", id=node)
        for name in sorted(attrs[node]):
            value = attrs[node][name]
            data = ET.SubElement(el, "data", key=name_to_key[name])
            data.text = str(value) if isinstance(value, int) else _fmt(value)
    for e in sorted(graph.edges, key=lambda e: (e.follower, e.leader)):
        el = ET.SubElement(g, "edge", source=e.leader, target=e.follower)
        weight = ET.SubElement(el, "data", key="d_weight")
        weight.text = _fmt(e.weight)
        lag = ET.SubElement(el, "data", key="d_lag")
        lag.text = str(e.lag_weeks)
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="utf-8", xml_declaration=True)


def read_graphml(path: str | Path) -> tuple[NodeAttrs, list[Edge]]:
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise ExportFormatError(f"{path}: not parseable XML: {exc}") from None
    ns = {"g": _GRAPHML_NS}
    key_names: dict[str, tuple[str, str]] = {}
    for key in root.findall("g:key", ns):
        key_names[key.get("id", "")] = (
            key.get("attr.name", ""),
            key.get("attr.type", ""),
        )
    graph_el = root.find("g:graph", ns)
    if graph_el is None:
        raise ExportFormatError(f"{path}: no <graph> element")
    nodes: NodeAttrs = {}
    edges: list[Edge] = []
    for el in graph_el.findall("g:node", ns):
        node_id = el.get("id")
        if node_id is None:
            raise ExportFormatError(f"{path}: node without id")
        attrs: dict[str, float | int] = {}
        for data in el.findall("g:data", ns):
            name, kind = key_names.get(data.get("key", ""), ("", ""))
            if not name:
                raise ExportFormatError(f"{path}: undeclared data key on node {node_id!r}")
            text = data.text or ""
            attrs[name] = int(text) if kind in ("int", "long") else float(text)
        nodes[node_id] = attrs
    for el in graph_el.findall("g:edge", ns):
        leader, follower = el.get("source"), el.get("target")
        if leader is None or follower is None:
            raise ExportFormatError(f"{path}: edge missing source or target")
        fields: dict[str, float | int] = {}
        for data in el.findall("g:data", ns):
            name, kind = key_names.get(data.get("key", ""), ("", ""))
            text = data.text or ""
            fields[name] = int(text) if kind in ("int", "long") else float(text)
        for field in ("weight", "lag_weeks"):
            if field not in fields:
                raise ExportFormatError(f"{path}: edge missing {field}")
        edges.append(
            Edge(
                follower=follower,
                leader=leader,
                weight=float(fields["weight"]),
                lag_weeks=int(fields["lag_weeks"]),
            )
        )
    return nodes, edges


# ------------------------------------------------------------------ JSON


def _write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ExportFormatError(f"{path}: expected a JSON object")
    return raw


def _edge_payload(edge: Edge) -> dict:
    return {
        "follower": edge.follower,
        "leader": edge.leader,
        "weight": edge.weight,
        "lag_weeks": edge.lag_weeks,
    }


def _edge_from_payload(raw: dict, path: str | Path) -> Edge:
    for key in ("follower", "leader", "weight", "lag_weeks"):
        if key not in raw:
            raise ExportFormatError(f"{path}: edge record missing {key!r}")
    return Edge(
        follower=str(raw["follower"]),
        leader=str(raw["leader"]),
        weight=float(raw["weight"]),
        lag_weeks=int(raw["lag_weeks"]),
    )


def write_centrality_json(path: str | Path, report: CentralityReport) -> None:
    _write_json(
        path,
        {
            "pagerank": dict(report.pagerank),
            "weighted_in_degree": dict(report.weighted_in_degree),
        },
    )


def read_centrality_json(path: str | Path) -> CentralityReport:
    raw = _read_json(path)
    for key in ("pagerank", "weighted_in_degree"):
        if key not in raw:
            raise ExportFormatError(f"{path}: missing {key!r}")
    return CentralityReport(
        pagerank={str(k): float(v) for k, v in raw["pagerank"].items()},
        weighted_in_degree={
            str(k): float(v) for k, v in raw["weighted_in_degree"].items()
        },
    )


def write_acyclicity_json(path: str | Path, report: AcyclicityReport) -> None:
    _write_json(
        path,
        {
            "total_weight": report.total_weight,
            "fas_weight": report.fas_weight,
            "percent_removed": report.percent_removed,
            "exact": report.exact,
            "removed_edges": [
                _edge_payload(e)
                for e in sorted(report.removed_edges, key=lambda e: (e.follower, e.leader))
            ],
        },
    )


def read_acyclicity_json(path: str | Path) -> AcyclicityReport:
    raw = _read_json(path)
    for key in ("total_weight", "fas_weight", "percent_removed", "exact", "removed_edges"):
        if key not in raw:
            raise ExportFormatError(f"{path}: missing {key!r}")
    return AcyclicityReport(
        total_weight=float(raw["total_weight"]),
        fas_weight=float(raw["fas_weight"]),
        percent_removed=float(raw["percent_removed"]),
        removed_edges=tuple(_edge_from_payload(e, path) for e in raw["removed_edges"]),
        exact=bool(raw["exact"]),
    )


def write_size_leadership_json(path: str | Path, report: SizeLeadershipReport) -> None:
    _write_json(
        path,
        {
            "spearman_pagerank": report.spearman_pagerank,
            "spearman_indegree": report.spearman_indegree,
            "percent_weight_larger_leads": report.percent_weight_larger_leads,
            "cities_used": list(report.cities_used),
        },
    )


def read_size_leadership_json(path: str | Path) -> SizeLeadershipReport:
    raw = _read_json(path)
    for key in (
        "spearman_pagerank",
        "spearman_indegree",
        "percent_weight_larger_leads",
        "cities_used",
    ):
        if key not in raw:
            raise ExportFormatError(f"{path}: missing {key!r}")
    return SizeLeadershipReport(
        spearman_pagerank=float(raw["spearman_pagerank"]),
        spearman_indegree=float(raw["spearman_indegree"]),
        percent_weight_larger_leads=float(raw["percent_weight_larger_leads"]),
        cities_used=tuple(str(c) for c in raw["cities_used"]),
    )


# ---------------------------------------------------------------- manifest


def sha256_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(
    path: str | Path,
    parameters: Mapping[str, object],
    input_paths: Mapping[str, str | Path],
    version: str,
) -> None:
    """Everything needed to reproduce a run.

    created_at is the only timestamp any export carries; byte-for-byte
    rerun comparisons should strip this one key.
    """
    _write_json(
        path,
        {
            "created_at": datetime.now(timezone.utc).isoformat(),
            "inputs": {
                name: {"path": str(p), "sha256": sha256_digest(p)}
                for name, p in sorted(input_paths.items())
            },
            "parameters": dict(parameters),
            "tool_version": version,
        },
    )


def read_manifest(path: str | Path) -> dict:
    raw = _read_json(path)
    for key in ("created_at", "inputs", "parameters", "tool_version"):
        if key not in raw:
            raise ExportFormatError(f"{path}: missing {key!r}")
    return raw
