"""
Graph Model for the graph KMS toolkit
Loads finite directed graphs, checks the standing hypotheses (finite, connected, without sink)
and builds the vertex matrix
"""

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)


class GraphValidationError(ValueError):
    """Raised when a graph document or a graph violates the model's hypotheses."""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class GraphHasSinkError(GraphValidationError):
    def __init__(self, sink_ids: Sequence[str]):
        self.sink_ids = list(sink_ids)
        super().__init__(", ".join(f"sink at vertex {v}" for v in self.sink_ids))


@dataclass(frozen=True)
class Edge:
    id: str
    source: int
    target: int


@dataclass(frozen=True)
class Graph:
    vertices: Tuple[str, ...]
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        if len(self.vertices) < 1:
            raise GraphValidationError("graph needs at least one vertex", "vertices")
        if len(self.edges) < 1:
            raise GraphValidationError("graph needs at least one edge", "edges")
        seen = set()
        for i, v in enumerate(self.vertices):
            if v in seen:
                raise GraphValidationError(f"duplicate vertex id {v!r}", f"vertices[{i}]")
            seen.add(v)
        seen = set()
        for i, e in enumerate(self.edges):
            if e.id in seen:
                raise GraphValidationError(f"duplicate edge id {e.id!r}", f"edges[{i}].id")
            seen.add(e.id)
            for end, idx in (("src", e.source), ("dst", e.target)):
                if not 0 <= idx < len(self.vertices):
                    raise GraphValidationError(f"vertex index {idx} out of range", f"edges[{i}].{end}")

    @property
    def m(self) -> int:
        return len(self.vertices)

    @property
    def n(self) -> int:
        return len(self.edges)

    @cached_property
    def _vertex_lookup(self) -> Dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def _edge_lookup(self) -> Dict[str, int]:
        return {e.id: i for i, e in enumerate(self.edges)}

    @cached_property
    def out_edges(self) -> Tuple[Tuple[int, ...], ...]:
        """Edge indices leaving each vertex, in edge order"""
        out: List[List[int]] = [[] for _ in self.vertices]
        for i, e in enumerate(self.edges):
            out[e.source].append(i)
        return tuple(tuple(o) for o in out)

    def vertex_index(self, vertex_id: str) -> int:
        try:
            return self._vertex_lookup[vertex_id]
        except KeyError:
            raise KeyError(f"unknown vertex {vertex_id!r}") from None

    def edge_index(self, edge_id: str) -> int:
        try:
            return self._edge_lookup[edge_id]
        except KeyError:
            raise KeyError(f"unknown edge {edge_id!r}") from None

    def source(self, edge: int) -> int:
        return self.edges[edge].source

    def target(self, edge: int) -> int:
        return self.edges[edge].target


@dataclass(frozen=True, eq=False)
class VertexMatrix:
    entries: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def to_list(self) -> List[List[int]]:
        return [[int(x) for x in row] for row in self.entries]


def load_graph(document: Union[str, bytes, Dict[str, Any]]) -> Graph:
    """
    Parse and validate a graph document.

    Args:
        document: JSON text (or an already decoded mapping) of the form
            {"vertices": [...], "edges": [{"id": ..., "src": ..., "dst": ...}, ...]}

    Returns:
        Graph with vertices and edges in document order
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as e:
            raise GraphValidationError(f"not UTF-8 text ({e.reason})", f"byte {e.start}") from e
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise GraphValidationError(f"malformed JSON: {e.msg}", f"line {e.lineno} column {e.colno}") from e

    if not isinstance(document, dict):
        raise GraphValidationError("document must be a JSON object", "$")

    vertices = document.get("vertices")
    edges = document.get("edges")
    if not isinstance(vertices, list):
        raise GraphValidationError("missing or non-list 'vertices'", "vertices")
    if not isinstance(edges, list):
        raise GraphValidationError("missing or non-list 'edges'", "edges")

    for i, v in enumerate(vertices):
        if not isinstance(v, str) or not v:
            raise GraphValidationError("vertex id must be a non-empty string", f"vertices[{i}]")

    # duplicates are reported here so the location refers to the document
    lookup: Dict[str, int] = {}
    for i, v in enumerate(vertices):
        if v in lookup:
            raise GraphValidationError(f"duplicate vertex id {v!r}", f"vertices[{i}]")
        lookup[v] = i

    parsed: List[Edge] = []
    edge_ids = set()
    for i, item in enumerate(edges):
        if not isinstance(item, dict):
            raise GraphValidationError("edge must be an object", f"edges[{i}]")
        for key in ("id", "src", "dst"):
            if not isinstance(item.get(key), str):
                raise GraphValidationError(f"missing or non-string '{key}'", f"edges[{i}].{key}")
        if item["id"] in edge_ids:
            raise GraphValidationError(f"duplicate edge id {item['id']!r}", f"edges[{i}].id")
        edge_ids.add(item["id"])
        for key in ("src", "dst"):
            if item[key] not in lookup:
                raise GraphValidationError(f"unknown vertex {item[key]!r}", f"edges[{i}].{key}")
        parsed.append(Edge(item["id"], lookup[item["src"]], lookup[item["dst"]]))

    graph = Graph(tuple(vertices), tuple(parsed))
    logger.info(f"Loaded graph with {graph.m} vertices and {graph.n} edges")
    return graph


def load_graph_file(path: Union[str, Path]) -> Graph:
    """Read a UTF-8 graph document from disk"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise GraphValidationError("file not found", str(path)) from None
    except UnicodeDecodeError as e:
        raise GraphValidationError(f"not UTF-8 text ({e.reason})", str(path)) from e
    return load_graph(text)


def graph_to_document(g: Graph) -> Dict[str, Any]:
    return {
        "vertices": list(g.vertices),
        "edges": [{"id": e.id, "src": g.vertices[e.source], "dst": g.vertices[e.target]} for e in g.edges],
    }


def vertex_matrix(g: Graph) -> VertexMatrix:
    """D(l, k) = number of edges from v_l to v_k"""
    entries = np.zeros((g.m, g.m), dtype=np.int64)
    for e in g.edges:
        entries[e.source, e.target] += 1
    return VertexMatrix(entries)


def sinks(g: Graph) -> List[str]:
    return [g.vertices[i] for i, out in enumerate(g.out_edges) if not out]


def has_no_sink(g: Graph) -> bool:
    """True iff the source map is surjective"""
    return not sinks(g)


def is_connected(g: Graph) -> bool:
    """
    Connectivity in the weak sense used for graph algebras here:
    every vertex is the source or the target of some edge.
    Disjoint leaves count as connected.
    """
    touched = set()
    for e in g.edges:
        touched.add(e.source)
        touched.add(e.target)
    return len(touched) == g.m


def _adjacency(g: Graph) -> csr_matrix:
    return csr_matrix(vertex_matrix(g).entries)


def is_weakly_connected(g: Graph) -> bool:
    """Ordinary (undirected) connectivity, reported as a diagnostic flag"""
    count, _ = connected_components(_adjacency(g), directed=True, connection="weak")
    return count == 1


def is_strongly_connected(g: Graph) -> bool:
    """True iff there is a directed path between every ordered pair of vertices"""
    count, _ = connected_components(_adjacency(g), directed=True, connection="strong")
    return count == 1


def is_cuntz(g: Graph) -> bool:
    """One vertex with every edge a loop"""
    return g.m == 1


# Sample graphs


def cuntz_graph(n: int) -> Graph:
    if n < 1:
        raise GraphValidationError("the Cuntz graph needs at least one loop", "n")
    return Graph(("v",), tuple(Edge(f"e{i}", 0, 0) for i in range(1, n + 1)))


def complete_graph(m: int) -> Graph:
    """Every ordered pair of distinct vertices joined by one edge (no loops)"""
    if m < 2:
        raise GraphValidationError("a complete graph without loops needs two vertices", "m")
    vertices = tuple(f"v{i}" for i in range(1, m + 1))
    edges = []
    for i in range(m):
        for j in range(m):
            if i != j:
                edges.append(Edge(f"e{len(edges) + 1}", i, j))
    return Graph(vertices, tuple(edges))


def cycle_graph(m: int) -> Graph:
    """Polygon v1 -> v2 -> ... -> vm -> v1"""
    if m < 1:
        raise GraphValidationError("a cycle needs at least one vertex", "m")
    vertices = tuple(f"v{i}" for i in range(1, m + 1))
    return Graph(vertices, tuple(Edge(f"e{i + 1}", i, (i + 1) % m) for i in range(m)))


def disjoint_leaves(n: int) -> Graph:
    """n vertices, each carrying one loop; vertex matrix is the identity"""
    if n < 1:
        raise GraphValidationError("need at least one leaf", "n")
    vertices = tuple(f"v{i}" for i in range(1, n + 1))
    return Graph(vertices, tuple(Edge(f"e{i + 1}", i, i) for i in range(n)))
