"""Graph data model, multi-file benchmark ingestion, and dataset statistics."""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with an optional attribute row per node.

    ``edges`` is normalized to sorted unique ``(i, j)`` pairs with ``i < j``.
    Instances are immutable after construction and safe to share.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    label: int = 0
    node_attributes: np.ndarray | None = None

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("graph must have at least one node")
        normalized = []
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u}, {v}) out of range for {self.node_count} nodes")
            normalized.append((u, v) if u < v else (v, u))
        if len(set(normalized)) != len(normalized):
            raise ValueError("duplicate undirected edges")
        object.__setattr__(self, "edges", tuple(sorted(normalized)))
        if self.node_attributes is not None:
            attrs = np.asarray(self.node_attributes, dtype=np.float64)
            if attrs.ndim != 2 or attrs.shape[0] != self.node_count:
                raise ValueError(
                    f"attribute matrix shape {attrs.shape} does not match {self.node_count} nodes"
                )
            object.__setattr__(self, "node_attributes", attrs)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        """Per-node sorted neighbor index arrays."""
        adj = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(np.array(sorted(a), dtype=np.int64) for a in adj)

    @cached_property
    def neighbor_sets(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(a.tolist()) for a in self.neighbors)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.neighbor_sets[u]


def degrees(graph: Graph) -> np.ndarray:
    """Degree of every node; sums to twice the edge count."""
    deg = np.zeros(graph.node_count, dtype=np.int64)
    for u, v in graph.edges:
        deg[u] += 1
        deg[v] += 1
    return deg


@dataclass(frozen=True)
class GraphDataset:
    """A labeled graph collection with contiguous 0-based class labels."""

    graphs: tuple[Graph, ...]
    class_count: int
    name: str = ""
    # original label -> remapped contiguous index, kept for the manifest
    label_map: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.class_count < 2:
            raise ValueError("dataset needs at least two classes")
        for g in self.graphs:
            if not (0 <= g.label < self.class_count):
                raise ValueError(f"label {g.label} outside [0, {self.class_count})")

    def __len__(self):
        return len(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    @property
    def has_attributes(self) -> bool:
        return all(g.node_attributes is not None for g in self.graphs) and len(self.graphs) > 0


@dataclass(frozen=True)
class DatasetStats:
    graph_count: int
    class_count: int
    max_nodes: int
    min_nodes: int
    avg_nodes: float
    max_edges: int
    min_edges: int
    avg_edges: float
    avg_diameter: float
    avg_density_pct: float
    max_class_imbalance: float
    # diameters of disconnected graphs come from the largest component
    diameter_scope: str = "largest-component"

    def __post_init__(self):
        assert self.min_nodes <= self.avg_nodes <= self.max_nodes
        assert self.min_edges <= self.avg_edges <= self.max_edges
        assert 0.0 <= self.avg_density_pct <= 100.0

    CSV_HEADER = (
        "dataset,graphs,classes,max_nodes,min_nodes,avg_nodes,max_edges,min_edges,"
        "avg_edges,avg_diameter,avg_density_pct,max_class_imbalance,diameter_scope"
    )

    def csv_row(self, name: str) -> str:
        return (
            f"{name},{self.graph_count},{self.class_count},{self.max_nodes},{self.min_nodes},"
            f"{self.avg_nodes:.4f},{self.max_edges},{self.min_edges},{self.avg_edges:.4f},"
            f"{self.avg_diameter:.4f},{self.avg_density_pct:.4f},"
            f"{self.max_class_imbalance:.4f},{self.diameter_scope}"
        )


def _find_prefix(directory: Path) -> str:
    hits = sorted(directory.glob("*_A.txt"))
    if not hits:
        raise FileNotFoundError(f"{directory}: no <DS>_A.txt found")
    return hits[0].name[: -len("_A.txt")]


def load_benchmark_dataset(directory) -> GraphDataset:
    """Load a dataset in the common multi-file benchmark text format.

    Expects ``<DS>_A.txt`` (comma-separated 1-based edge pairs),
    ``<DS>_graph_indicator.txt`` (1-based node -> graph map) and
    ``<DS>_graph_labels.txt``; ``<DS>_node_attributes.txt`` (one
    comma-separated real vector per node) is picked up when present.
    """
    directory = Path(directory)
    prefix = _find_prefix(directory)

    indicator_file = directory / f"{prefix}_graph_indicator.txt"
    labels_file = directory / f"{prefix}_graph_labels.txt"
    for required in (indicator_file, labels_file):
        if not required.exists():
            raise FileNotFoundError(f"missing mandatory file {required}")

    node_graph = []  # 0-based graph id per global node
    with indicator_file.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                node_graph.append(int(line) - 1)
    total_nodes = len(node_graph)
    graph_count = max(node_graph) + 1 if node_graph else 0

    # global 1-based node id -> (graph, local 0-based index)
    local_index = np.zeros(total_nodes, dtype=np.int64)
    sizes = np.zeros(graph_count, dtype=np.int64)
    for node, g in enumerate(node_graph):
        local_index[node] = sizes[g]
        sizes[g] += 1

    edge_sets: list[set] = [set() for _ in range(graph_count)]
    seen_directed = set()
    dropped_self_loops = 0
    duplicate_lines = 0
    with (directory / f"{prefix}_A.txt").open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            u, v = int(parts[0]), int(parts[1])
            if not (1 <= u <= total_nodes and 1 <= v <= total_nodes):
                raise ValueError(
                    f"{prefix}_A.txt:{lineno}: node {max(u, v)} outside the "
                    f"{total_nodes} nodes listed in the indicator"
                )
            if u == v:
                dropped_self_loops += 1
                continue
            gu, gv = node_graph[u - 1], node_graph[v - 1]
            if gu != gv:
                raise ValueError(
                    f"{prefix}_A.txt:{lineno}: edge ({u}, {v}) crosses graphs {gu + 1} and {gv + 1}"
                )
            if (u, v) in seen_directed:
                duplicate_lines += 1
                continue
            seen_directed.add((u, v))
            a, b = int(local_index[u - 1]), int(local_index[v - 1])
            edge_sets[gu].add((a, b) if a < b else (b, a))
    if dropped_self_loops:
        warnings.warn(f"{prefix}: dropped {dropped_self_loops} self-loop line(s)")
    if duplicate_lines:
        warnings.warn(f"{prefix}: dropped {duplicate_lines} duplicate edge line(s)")

    raw_labels = []
    with labels_file.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                raw_labels.append(int(line))
    if len(raw_labels) != graph_count:
        raise ValueError(
            f"{prefix}: {len(raw_labels)} labels for {graph_count} graphs"
        )
    label_map = {orig: idx for idx, orig in enumerate(sorted(set(raw_labels)))}

    attributes_file = directory / f"{prefix}_node_attributes.txt"
    attr_rows = None
    if attributes_file.exists():
        rows = []
        with attributes_file.open() as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append([float(tok) for tok in line.split(",")])
        if len(rows) != total_nodes:
            raise ValueError(
                f"{prefix}_node_attributes.txt: {len(rows)} attribute lines for {total_nodes} nodes"
            )
        attr_rows = np.asarray(rows, dtype=np.float64)

    graphs = []
    node_cursor = 0
    for g in range(graph_count):
        n = int(sizes[g])
        attrs = None
        if attr_rows is not None:
            attrs = attr_rows[node_cursor : node_cursor + n]
        node_cursor += n
        graphs.append(
            Graph(
                node_count=n,
                edges=tuple(sorted(edge_sets[g])),
                label=label_map[raw_labels[g]],
                node_attributes=attrs,
            )
        )
    return GraphDataset(
        graphs=tuple(graphs),
        class_count=len(label_map),
        name=prefix,
        label_map=label_map,
    )


def save_benchmark_dataset(dataset: GraphDataset, directory, name: str | None = None):
    """Write ``dataset`` back out in the multi-file benchmark text format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    prefix = name or dataset.name or "DS"

    offsets = np.cumsum([0] + [g.node_count for g in dataset.graphs])
    with (directory / f"{prefix}_graph_indicator.txt").open("w") as fh:
        for gid, g in enumerate(dataset.graphs, 1):
            fh.writelines(f"{gid}\n" for _ in range(g.node_count))
    with (directory / f"{prefix}_A.txt").open("w") as fh:
        for gid, g in enumerate(dataset.graphs):
            base = offsets[gid] + 1
            for u, v in g.edges:
                fh.write(f"{base + u}, {base + v}\n")
                fh.write(f"{base + v}, {base + u}\n")
    inverse = {v: k for k, v in dataset.label_map.items()}
    with (directory / f"{prefix}_graph_labels.txt").open("w") as fh:
        for g in dataset.graphs:
            fh.write(f"{inverse.get(g.label, g.label)}\n")
    if dataset.has_attributes:
        with (directory / f"{prefix}_node_attributes.txt").open("w") as fh:
            for g in dataset.graphs:
                for row in g.node_attributes:
                    fh.write(", ".join(f"{x:.17g}" for x in row) + "\n")


def connected_components(graph: Graph) -> list[np.ndarray]:
    """Node index arrays of the connected components, largest first."""
    seen = np.zeros(graph.node_count, dtype=bool)
    components = []
    for start in range(graph.node_count):
        if seen[start]:
            continue
        queue = [start]
        seen[start] = True
        members = []
        while queue:
            node = queue.pop()
            members.append(node)
            for nb in graph.neighbors[node]:
                if not seen[nb]:
                    seen[nb] = True
                    queue.append(int(nb))
        components.append(np.array(sorted(members), dtype=np.int64))
    components.sort(key=len, reverse=True)
    return components


def _bfs_eccentricity(graph: Graph, source: int, member_set: frozenset) -> int:
    dist = {source: 0}
    frontier = [source]
    ecc = 0
    while frontier:
        nxt = []
        for node in frontier:
            for nb in graph.neighbors[node]:
                nb = int(nb)
                if nb in member_set and nb not in dist:
                    dist[nb] = dist[node] + 1
                    ecc = max(ecc, dist[nb])
                    nxt.append(nb)
        frontier = nxt
    return ecc


def graph_diameter(graph: Graph) -> int:
    """Diameter of the largest connected component (0 for a single node)."""
    largest = connected_components(graph)[0]
    member_set = frozenset(largest.tolist())
    return max(_bfs_eccentricity(graph, int(s), member_set) for s in largest)


def dataset_stats(dataset: GraphDataset) -> DatasetStats:
    """Summary statistics over a dataset (node/edge counts, diameter, density)."""
    if not dataset.graphs:
        raise ValueError("empty dataset")
    nodes = np.array([g.node_count for g in dataset.graphs], dtype=np.int64)
    edges = np.array([g.edge_count for g in dataset.graphs], dtype=np.int64)
    densities = np.array(
        [
            0.0 if g.node_count < 2 else 200.0 * g.edge_count / (g.node_count * (g.node_count - 1))
            for g in dataset.graphs
        ]
    )
    diameters = np.array([graph_diameter(g) for g in dataset.graphs], dtype=np.float64)
    class_sizes = Counter(int(g.label) for g in dataset.graphs)
    imbalance = max(class_sizes.values()) / min(class_sizes.values())
    return DatasetStats(
        graph_count=len(dataset.graphs),
        class_count=dataset.class_count,
        max_nodes=int(nodes.max()),
        min_nodes=int(nodes.min()),
        avg_nodes=float(nodes.mean()),
        max_edges=int(edges.max()),
        min_edges=int(edges.min()),
        avg_edges=float(edges.mean()),
        avg_diameter=float(diameters.mean()),
        avg_density_pct=float(densities.mean()),
        max_class_imbalance=float(imbalance),
    )
