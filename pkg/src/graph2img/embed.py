"""Node embeddings from biased second-order random walks + skip-gram.

Walk transition probabilities follow the usual return / in-out biasing: from
``current`` (reached via ``prev``), a neighbor equal to ``prev`` gets weight
1/p, a neighbor adjacent to ``prev`` gets 1, and anything else gets 1/q.
Sampling uses alias tables built once per directed edge. The skip-gram stage
trains with negative sampling in vectorized minibatches.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .graphs import Graph, GraphDataset
from . import tensorio

_SKIPGRAM_BATCH = 8192
_LR_FLOOR = 1e-4  # final learning rate as a fraction of the initial one


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walks_per_node: int = 10
    walk_length: int = 80
    context_size: int = 10

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.walks_per_node < 1 or self.walk_length < 1:
            raise ValueError("walk counts must be positive")
        if not (1 <= self.context_size <= max(1, self.walk_length - 1)):
            raise ValueError("context size must lie in [1, walk_length - 1]")


@dataclass(frozen=True)
class EmbeddingConfig:
    dimensions: int = 128
    negative_samples: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.dimensions < 2:
            raise ValueError("need at least 2 embedding dimensions")
        if self.negative_samples < 1:
            raise ValueError("need at least one negative sample")
        if self.epochs < 0 or self.learning_rate <= 0:
            raise ValueError("bad training schedule")


@dataclass(frozen=True)
class NodeEmbeddings:
    matrix: np.ndarray  # |V| x d
    graph_id: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("non-finite embedding entries")


class AliasTable:
    """O(1) sampling from a discrete distribution (Walker's alias method)."""

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 1 or len(weights) == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("weights must be nonnegative and not all zero")
        probs = weights / weights.sum()
        n = len(probs)
        self.accept = np.zeros(n, dtype=np.float64)
        self.alias = np.zeros(n, dtype=np.int64)
        scaled = probs * n
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.accept[s] = scaled[s]
            self.alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        for leftover in small + large:
            self.accept[leftover] = 1.0

    def __len__(self):
        return len(self.accept)

    def draw(self, u1: float, u2: float) -> int:
        """Sample one index from two uniforms in [0, 1)."""
        k = int(u1 * len(self.accept))
        return k if u2 < self.accept[k] else int(self.alias[k])

    def draw_many(self, rng: np.random.Generator, shape) -> np.ndarray:
        k = rng.integers(0, len(self.accept), size=shape)
        keep = rng.random(size=shape) < self.accept[k]
        return np.where(keep, k, self.alias[k])


def transition_weights(prev: int, current: int, graph: Graph, p: float, q: float) -> np.ndarray:
    """Unnormalized walk weights over ``graph.neighbors[current]``."""
    if p <= 0 or q <= 0:
        raise ValueError("p and q must be positive")
    if not graph.has_edge(prev, current):
        raise ValueError(f"prev={prev} and current={current} are not adjacent")
    prev_nbrs = graph.neighbor_sets[prev]
    weights = np.empty(len(graph.neighbors[current]), dtype=np.float64)
    for idx, nb in enumerate(graph.neighbors[current]):
        nb = int(nb)
        if nb == prev:
            weights[idx] = 1.0 / p
        elif nb in prev_nbrs:
            weights[idx] = 1.0
        else:
            weights[idx] = 1.0 / q
    return weights


def _edge_alias_tables(graph: Graph, p: float, q: float) -> dict:
    tables = {}
    for u, v in graph.edges:
        tables[(u, v)] = AliasTable(transition_weights(u, v, graph, p, q))
        tables[(v, u)] = AliasTable(transition_weights(v, u, graph, p, q))
    return tables


def generate_walks(graph: Graph, config: WalkConfig, seed: int = 0) -> list[np.ndarray]:
    """All truncated biased walks: ``walks_per_node`` starts from every node.

    Walks from isolated nodes have length 1. Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    edge_tables = _edge_alias_tables(graph, config.p, config.q)
    neighbors = graph.neighbors
    walks = []
    for start in range(graph.node_count):
        for _ in range(config.walks_per_node):
            if config.walk_length == 1 or len(neighbors[start]) == 0:
                walks.append(np.array([start], dtype=np.int64))
                continue
            walk = np.empty(config.walk_length, dtype=np.int64)
            walk[0] = start
            uniforms = rng.random((config.walk_length, 2))
            walk[1] = neighbors[start][int(uniforms[0, 0] * len(neighbors[start]))]
            for step in range(2, config.walk_length):
                prev, cur = int(walk[step - 2]), int(walk[step - 1])
                table = edge_tables[(prev, cur)]
                walk[step] = neighbors[cur][table.draw(*uniforms[step])]
            walks.append(walk)
    return walks


def context_pairs(walks, context_size: int) -> np.ndarray:
    """(target, context) pairs for all walk positions within the window.

    Returns an (n, 2) int array; row order is unspecified.
    """
    if context_size < 1:
        raise ValueError("context size must be >= 1")
    targets, contexts = [], []
    for walk in walks:
        walk = np.asarray(walk, dtype=np.int64)
        for offset in range(1, min(context_size, len(walk) - 1) + 1):
            targets.append(walk[:-offset])
            contexts.append(walk[offset:])
            targets.append(walk[offset:])
            contexts.append(walk[:-offset])
    if not targets:
        return np.empty((0, 2), dtype=np.int64)
    return np.stack([np.concatenate(targets), np.concatenate(contexts)], axis=1)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def skipgram_train(pairs: np.ndarray, node_count: int, config: EmbeddingConfig):
    """Train skip-gram with negative sampling; returns (embeddings, epoch losses).

    The returned matrix is the input-side one. Negatives are drawn from the
    target visit distribution raised to 3/4; a negative that collides with
    the positive context of its pair is masked out of that update.
    """
    if config.dimensions > node_count:
        raise ValueError(
            f"dimensions={config.dimensions} exceeds node count {node_count}; shrink it"
        )
    rng = np.random.default_rng(config.seed)
    d = config.dimensions
    emb = (rng.random((node_count, d)) - 0.5) / d
    ctx = np.zeros((node_count, d))

    pairs = np.asarray(pairs, dtype=np.int64)
    if config.epochs == 0 or len(pairs) == 0:
        return emb, []

    visit_counts = np.bincount(pairs[:, 0], minlength=node_count).astype(np.float64)
    noise = visit_counts**0.75
    if noise.sum() == 0:
        noise = np.ones(node_count)
    noise_table = AliasTable(noise)

    n_pairs = len(pairs)
    k = config.negative_samples
    batches_per_epoch = max(1, (n_pairs + _SKIPGRAM_BATCH - 1) // _SKIPGRAM_BATCH)
    total_steps = config.epochs * batches_per_epoch
    step = 0
    epoch_losses = []
    for _ in range(config.epochs):
        order = rng.permutation(n_pairs)
        loss_sum = 0.0
        for lo in range(0, n_pairs, _SKIPGRAM_BATCH):
            idx = order[lo : lo + _SKIPGRAM_BATCH]
            t, c = pairs[idx, 0], pairs[idx, 1]
            neg = noise_table.draw_many(rng, (len(idx), k))
            lr = config.learning_rate * max(_LR_FLOOR, 1.0 - step / total_steps * (1.0 - _LR_FLOOR))
            step += 1

            et = emb[t]                                        # B x d
            ec = ctx[c]                                        # B x d
            en = ctx[neg]                                      # B x k x d
            pos_score = _sigmoid(np.einsum("bd,bd->b", et, ec))
            neg_score = _sigmoid(np.einsum("bd,bkd->bk", et, en))
            mask = neg != c[:, None]

            g_pos = pos_score - 1.0                            # d(loss)/d(score)
            g_neg = np.where(mask, neg_score, 0.0)
            grad_t = g_pos[:, None] * ec + np.einsum("bk,bkd->bd", g_neg, en)
            np.add.at(emb, t, -lr * grad_t)
            np.add.at(ctx, c, -lr * g_pos[:, None] * et)
            np.add.at(ctx, neg.reshape(-1), (-lr * g_neg[..., None] * et[:, None, :]).reshape(-1, d))

            loss = -np.log(pos_score + 1e-12).sum()
            loss -= (np.log1p(-neg_score + 1e-12) * mask).sum()
            loss_sum += loss
        epoch_losses.append(loss_sum / n_pairs)
        if not np.isfinite(epoch_losses[-1]):
            raise FloatingPointError("skip-gram loss diverged")
    return emb, epoch_losses


def embed_graph(graph: Graph, walk_config: WalkConfig, embedding_config: EmbeddingConfig,
                graph_id: int = 0) -> NodeEmbeddings:
    """Walks + skip-gram for one graph."""
    walks = generate_walks(graph, walk_config, seed=embedding_config.seed)
    pairs = context_pairs(walks, walk_config.context_size)
    matrix, _ = skipgram_train(pairs, graph.node_count, embedding_config)
    return NodeEmbeddings(matrix=matrix, graph_id=graph_id)


def embed_dataset(dataset: GraphDataset, walk_config: WalkConfig,
                  embedding_config: EmbeddingConfig) -> list[NodeEmbeddings]:
    """Embed every graph independently, with a per-graph seed derived from the base one."""
    out = []
    for gid, graph in enumerate(dataset.graphs):
        cfg = replace(embedding_config, seed=embedding_config.seed + gid)
        out.append(embed_graph(graph, walk_config, cfg, graph_id=gid))
    return out


def save_embeddings(path, embeddings: list[NodeEmbeddings], walk_config: WalkConfig,
                    embedding_config: EmbeddingConfig):
    tensorio.write_records(path, [(e.graph_id, e.matrix) for e in embeddings])
    tensorio.write_manifest(path, {
        "kind": "node-embeddings",
        "walk_config": asdict(walk_config),
        "embedding_config": asdict(embedding_config),
    })


def load_embeddings(path) -> list[NodeEmbeddings]:
    return [NodeEmbeddings(matrix=m, graph_id=int(k)) for k, m in tensorio.read_records(path)]
