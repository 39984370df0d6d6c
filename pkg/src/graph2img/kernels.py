"""Baseline graph kernels: sampled graphlet kernel and WL subtree kernel.

Graphlet counting buckets sampled induced subgraphs by a canonical code (the
minimum adjacency bitmask over all node permutations, exact for up to 6
nodes); similarity is the cosine of two count vectors. The WL subtree kernel
iteratively compresses (label, sorted neighbor labels) pairs with a
dictionary shared across all graphs of a collection and sums, over
iterations, the dot products of per-iteration label histograms. Degrees
serve as the initial labels since the graphs are unlabeled.
"""

from __future__ import annotations

import itertools
import time
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, degrees

_MAX_GRAPHLET_NODES = 6


@dataclass(frozen=True)
class GraphletConfig:
    samples_per_graph: int = 2000
    min_size: int = 3
    max_size: int = 6
    seed: int = 0

    def __post_init__(self):
        if not (3 <= self.min_size <= self.max_size <= _MAX_GRAPHLET_NODES):
            raise ValueError("graphlet sizes must satisfy 3 <= min <= max <= 6")
        if self.samples_per_graph < 1:
            raise ValueError("need at least one sample")


@dataclass(frozen=True)
class WlConfig:
    iterations: int = 3

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("need at least one relabeling iteration")


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    seconds: float
    evaluations: int

    def __post_init__(self):
        if not np.array_equal(self.values, self.values.T):
            raise ValueError("kernel matrix must be symmetric")


# ---------------------------------------------------------------------------
# canonical codes for graphs on <= 6 nodes
# ---------------------------------------------------------------------------

def _pair_bit(i: int, j: int, n: int) -> int:
    """Bit position of pair (i, j), i < j, in lexicographic order."""
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def _permutation_bit_tables(n: int):
    """For each permutation of n nodes, old bit position per new bit position."""
    pairs = list(itertools.combinations(range(n), 2))
    tables = []
    for perm in itertools.permutations(range(n)):
        table = [0] * len(pairs)
        for new_bit, (i, j) in enumerate(pairs):
            a, b = perm[i], perm[j]
            if a > b:
                a, b = b, a
            table[new_bit] = _pair_bit(a, b, n)
        tables.append(tuple(table))
    return tuple(tables)

_PERM_TABLES = {n: _permutation_bit_tables(n) for n in range(1, _MAX_GRAPHLET_NODES + 1)}
_CANONICAL_CACHE: dict = {}


def _canonical_mask(n: int, mask: int) -> int:
    key = (n, mask)
    cached = _CANONICAL_CACHE.get(key)
    if cached is not None:
        return cached
    set_bits = [b for b in range(n * (n - 1) // 2) if mask >> b & 1]
    best = mask
    for table in _PERM_TABLES[n]:
        permuted = 0
        for new_bit, old_bit in enumerate(table):
            # invariant: permuted mask bit new_bit = old mask bit table[new_bit]
            if mask >> old_bit & 1:
                permuted |= 1 << new_bit
        if permuted < best:
            best = permuted
    _CANONICAL_CACHE[key] = best
    return best


def _subset_mask(subset, neighbor_sets) -> int:
    mask = 0
    bit = 0
    n = len(subset)
    for i in range(n):
        for j in range(i + 1, n):
            if subset[j] in neighbor_sets[subset[i]]:
                mask |= 1 << bit
            bit += 1
    return mask


def canonical_form(graph: Graph) -> tuple[int, int]:
    """Canonical code (node count, minimal adjacency mask) of a small graph.

    Two graphs on at most 6 nodes get the same code iff they are isomorphic.
    """
    n = graph.node_count
    if n > _MAX_GRAPHLET_NODES:
        raise ValueError(f"canonical form only supported up to {_MAX_GRAPHLET_NODES} nodes")
    mask = 0
    for u, v in graph.edges:
        mask |= 1 << _pair_bit(u, v, n)
    return n, _canonical_mask(n, mask)


def graphlet_count_vector(graph: Graph, config: GraphletConfig,
                          exhaustive: bool = False) -> dict:
    """Occurrence counts of induced subgraphs keyed by canonical code.

    Sampling draws a size uniformly from [min_size, min(max_size, |V|)] and
    then a uniform node subset of that size; the induced subgraph (possibly
    disconnected) is counted under its canonical code. ``exhaustive``
    enumerates every subset instead of sampling.
    """
    counts: Counter = Counter()
    if graph.node_count < config.min_size:
        warnings.warn(
            f"graph with {graph.node_count} nodes is smaller than min graphlet size "
            f"{config.min_size}; returning empty count vector"
        )
        return dict(counts)
    top = min(config.max_size, graph.node_count)
    nbrs = graph.neighbor_sets
    if exhaustive:
        for size in range(config.min_size, top + 1):
            for subset in itertools.combinations(range(graph.node_count), size):
                counts[(size, _canonical_mask(size, _subset_mask(subset, nbrs)))] += 1
        return dict(counts)
    rng = np.random.default_rng(config.seed)
    sizes = rng.integers(config.min_size, top + 1, size=config.samples_per_graph)
    for size in sizes:
        subset = rng.choice(graph.node_count, size=int(size), replace=False)
        subset = tuple(int(v) for v in subset)
        counts[(int(size), _canonical_mask(int(size), _subset_mask(subset, nbrs)))] += 1
    return dict(counts)


def graphlet_kernel(vec_a: dict, vec_b: dict) -> float:
    """Cosine similarity of two sparse count vectors; zero vectors give 0."""
    if not vec_a or not vec_b:
        warnings.warn("cosine of an empty count vector defined as 0")
        return 0.0
    dot = sum(vec_a[k] * vec_b[k] for k in vec_a.keys() & vec_b.keys())
    norm_a = np.sqrt(sum(v * v for v in vec_a.values()))
    norm_b = np.sqrt(sum(v * v for v in vec_b.values()))
    return float(dot / (norm_a * norm_b))


# ---------------------------------------------------------------------------
# Weisfeiler-Lehman subtree kernel
# ---------------------------------------------------------------------------

def wl_relabel(labels: np.ndarray, graph: Graph, dictionary: dict) -> np.ndarray:
    """One relabeling sweep: compress (own label, sorted neighbor labels).

    ``dictionary`` is the injective compression map; pass the same dict for
    every graph of a collection within one iteration so codes are comparable
    across graphs.
    """
    labels = np.asarray(labels)
    if len(labels) != graph.node_count:
        raise ValueError("one label per node required")
    new_labels = np.empty(graph.node_count, dtype=np.int64)
    for node in range(graph.node_count):
        signature = (int(labels[node]),
                     tuple(sorted(int(labels[nb]) for nb in graph.neighbors[node])))
        new_labels[node] = dictionary.setdefault(signature, len(dictionary))
    return new_labels


def wl_label_histograms(graphs, iterations: int) -> list[list[Counter]]:
    """Per-iteration, per-graph label histograms (iteration 0 = degree labels)."""
    labels = [degrees(g) for g in graphs]
    per_iteration = [[Counter(lab.tolist()) for lab in labels]]
    for _ in range(iterations):
        dictionary: dict = {}
        labels = [wl_relabel(lab, g, dictionary) for lab, g in zip(labels, graphs)]
        per_iteration.append([Counter(lab.tolist()) for lab in labels])
    return per_iteration


def wl_subtree_kernel(graph_a: Graph, graph_b: Graph, config: WlConfig) -> float:
    """Sum over iterations 0..h of the label-histogram dot products."""
    histograms = wl_label_histograms([graph_a, graph_b], config.iterations)
    total = 0.0
    for hist_a, hist_b in ((hists[0], hists[1]) for hists in histograms):
        total += sum(hist_a[k] * hist_b[k] for k in hist_a.keys() & hist_b.keys())
    return total


# ---------------------------------------------------------------------------
# kernel matrices
# ---------------------------------------------------------------------------

def kernel_matrix(items, pair_fn) -> KernelMatrix:
    """Symmetric matrix from N(N+1)/2 pair evaluations (diagonal included)."""
    n = len(items)
    if n == 0:
        raise ValueError("empty collection")
    values = np.zeros((n, n))
    evaluations = 0
    started = time.perf_counter()
    for i in range(n):
        for j in range(i, n):
            values[i, j] = pair_fn(items[i], items[j])
            values[j, i] = values[i, j]
            evaluations += 1
    return KernelMatrix(values=values, seconds=time.perf_counter() - started,
                        evaluations=evaluations)


def graphlet_kernel_matrix(graphs, config: GraphletConfig,
                           exhaustive: bool = False) -> KernelMatrix:
    """Count vectors per graph (linear pass), then pairwise cosines."""
    vectors = []
    for idx, g in enumerate(graphs):
        cfg = GraphletConfig(samples_per_graph=config.samples_per_graph,
                             min_size=config.min_size, max_size=config.max_size,
                             seed=config.seed + idx)
        vectors.append(graphlet_count_vector(g, cfg, exhaustive=exhaustive))
    return kernel_matrix(vectors, graphlet_kernel)


def wl_kernel_matrix(graphs, iterations: int) -> KernelMatrix:
    """Histograms once per graph per iteration, then pairwise histogram dots."""
    per_iteration = wl_label_histograms(graphs, iterations)
    feature_sets = [[hists[i] for hists in per_iteration] for i in range(len(graphs))]

    def pair(fa, fb):
        return float(sum(
            sum(ha[k] * hb[k] for k in ha.keys() & hb.keys())
            for ha, hb in zip(fa, fb)
        ))

    return kernel_matrix(feature_sets, pair)


def wl_kernel_matrices(graphs, iteration_values) -> dict[int, KernelMatrix]:
    """Kernel matrices for several iteration counts in one histogram pass.

    Per-iteration label-count matrices are multiplied once (dense BLAS) and
    accumulated, so the cost of the whole grid is that of the deepest value.
    """
    iteration_values = sorted(set(int(h) for h in iteration_values))
    if not iteration_values or iteration_values[0] < 1:
        raise ValueError("iteration counts must be positive")
    n = len(graphs)
    if n == 0:
        raise ValueError("empty collection")
    started = time.perf_counter()
    per_iteration = wl_label_histograms(graphs, iteration_values[-1])
    running = np.zeros((n, n))
    out = {}
    wanted = set(iteration_values)
    for it, histograms in enumerate(per_iteration):
        label_space = sorted({lab for hist in histograms for lab in hist})
        index = {lab: col for col, lab in enumerate(label_space)}
        counts = np.zeros((n, len(label_space)))
        for row, hist in enumerate(histograms):
            for lab, count in hist.items():
                counts[row, index[lab]] = count
        running = running + counts @ counts.T
        if it in wanted:
            values = np.triu(running) + np.triu(running, 1).T  # exactly symmetric
            out[it] = KernelMatrix(values=values,
                                   seconds=time.perf_counter() - started,
                                   evaluations=n * (n + 1) // 2)
    return out
