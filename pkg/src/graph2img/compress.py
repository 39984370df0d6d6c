"""PCA alignment of node embeddings across a collection, plus attribute channels.

Embeddings from stochastic trainers are not comparable dimension-by-dimension
across graphs, so one PCA model is fitted on the stacked node vectors of the
whole collection (or of a training subset) and applied everywhere. Continuous
node attributes, when present, get their own PCA and are then rescaled to the
value range of the compressed embeddings so both kinds of channel share one
histogram extent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import GraphDataset
from . import tensorio

_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray                 # (D,)
    components: np.ndarray           # (d, D), rows orthonormal
    explained_variance: np.ndarray   # (d,), non-increasing
    # indices of the graphs whose nodes the model was fitted on (leakage audit)
    fitted_on: tuple[int, ...] = ()

    def __post_init__(self):
        gram = self.components @ self.components.T
        if np.abs(gram - np.eye(len(self.components))).max() > _ORTHO_TOL:
            raise ValueError("components are not orthonormal")
        if np.any(np.diff(self.explained_variance) > 1e-12):
            raise ValueError("explained variance must be non-increasing")

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]


def pca_fit(vectors: np.ndarray, d: int, fitted_on: tuple[int, ...] = ()) -> PcaModel:
    """Top-``d`` principal directions of the sample covariance of ``vectors``.

    The sign of each component is fixed so its largest-magnitude entry is
    positive, which makes repeated fits reproducible.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an M x D matrix")
    m, dim = x.shape
    if d > m:
        raise ValueError(f"cannot retain {d} components from {m} samples")
    if d > dim:
        raise ValueError(f"cannot retain {d} components from {dim} input dimensions")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (m - 1) if m > 1 else np.zeros((dim, dim))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:d]
    components = eigvecs[:, order].T.copy()
    variance = np.clip(eigvals[order], 0.0, None)
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components,
                    explained_variance=variance, fitted_on=tuple(fitted_on))


def pca_transform(model: PcaModel, vectors: np.ndarray) -> np.ndarray:
    """Project (centered) vectors onto the retained components."""
    x = np.asarray(vectors, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise ValueError(f"vector width {x.shape[1]} != model input dim {model.input_dim}")
    out = (x - model.mean) @ model.components.T
    return out[0] if squeeze else out


@dataclass(frozen=True)
class CompressedNodeVectors:
    """Per-graph compressed coordinates: embedding part plus optional attributes.

    The embedding width must be even — coordinates are consumed in consecutive
    pairs, one 2D histogram channel per pair, attribute pairs after embedding
    pairs.
    """

    embedding: np.ndarray                 # |V| x d
    attributes: np.ndarray | None = None  # |V| x d_attr
    graph_id: int = 0

    def __post_init__(self):
        if self.embedding.shape[1] % 2 != 0:
            raise ValueError("embedding width must be even (channels are dimension pairs)")
        if self.attributes is not None:
            if self.attributes.shape[0] != self.embedding.shape[0]:
                raise ValueError("attribute rows != embedding rows")
            if self.attributes.shape[1] % 2 != 0:
                raise ValueError("attribute width must be even")

    @property
    def stacked(self) -> np.ndarray:
        if self.attributes is None:
            return self.embedding
        return np.hstack([self.embedding, self.attributes])

    @property
    def channel_count(self) -> int:
        width = self.embedding.shape[1]
        if self.attributes is not None:
            width += self.attributes.shape[1]
        return width // 2


def compress_embeddings(embeddings, d: int, fit_graphs=None):
    """Fit one PCA over the collection's node vectors and transform every graph.

    ``fit_graphs`` restricts the fit to those graph indices (fold-safe mode);
    the transform is still applied to all graphs. Returns (model, list of
    per-graph compressed matrices).
    """
    if d % 2 != 0:
        raise ValueError("retained dimensionality must be even")
    matrices = [e.matrix for e in embeddings]
    if fit_graphs is None:
        fit_graphs = range(len(matrices))
    fit_graphs = tuple(int(i) for i in fit_graphs)
    stacked = np.vstack([matrices[i] for i in fit_graphs])
    model = pca_fit(stacked, d, fitted_on=fit_graphs)
    return model, [pca_transform(model, m) for m in matrices]


def rescale_to_range(columns: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Affinely map each column onto [lo, hi]; constant columns go to the midpoint."""
    out = np.empty_like(columns, dtype=np.float64)
    for j in range(columns.shape[1]):
        col = columns[:, j]
        cmin, cmax = col.min(), col.max()
        if cmax == cmin:
            out[:, j] = 0.5 * (lo + hi)
        else:
            out[:, j] = (col - cmin) / (cmax - cmin) * (hi - lo) + lo
    return out


def prepare_attribute_channels(dataset: GraphDataset, d_attr: int,
                               embedding_range: tuple[float, float],
                               fit_graphs=None):
    """PCA-compress node attributes jointly, then match the embedding range.

    Every compressed attribute dimension is affinely rescaled so its min/max
    equal the global min/max of the compressed node embeddings, making
    attribute histograms share the embedding histogram extent. Returns
    (attribute PCA model, list of per-graph |V| x d_attr matrices).
    """
    if not dataset.has_attributes:
        raise ValueError("dataset has no node attributes")
    if d_attr % 2 != 0:
        raise ValueError("attribute dimensionality must be even")
    if fit_graphs is None:
        fit_graphs = range(len(dataset.graphs))
    fit_graphs = tuple(int(i) for i in fit_graphs)
    stacked = np.vstack([dataset.graphs[i].node_attributes for i in fit_graphs])
    model = pca_fit(stacked, d_attr, fitted_on=fit_graphs)
    lo, hi = embedding_range
    # source ranges are taken from the fit graphs only, then applied everywhere
    fit_rows = pca_transform(model, stacked)
    col_min, col_max = fit_rows.min(axis=0), fit_rows.max(axis=0)
    span = col_max - col_min
    out = []
    for g in dataset.graphs:
        z = pca_transform(model, g.node_attributes)
        rescaled = np.empty_like(z)
        for j in range(z.shape[1]):
            if span[j] == 0:
                rescaled[:, j] = 0.5 * (lo + hi)
            else:
                rescaled[:, j] = (z[:, j] - col_min[j]) / span[j] * (hi - lo) + lo
        out.append(rescaled)
    return model, out


def save_pca_model(path, model: PcaModel, extra_manifest: dict | None = None):
    tensorio.write_records(path, [(0, model.mean), (1, model.components),
                                  (2, model.explained_variance)])
    manifest = {"kind": "pca-model", "records": ["mean", "components", "explained_variance"],
                "fitted_on": list(model.fitted_on)}
    manifest.update(extra_manifest or {})
    tensorio.write_manifest(path, manifest)


def load_pca_model(path) -> PcaModel:
    records = dict(tensorio.read_records(path))
    manifest = tensorio.read_manifest(path)
    return PcaModel(mean=records[0], components=records[1], explained_variance=records[2],
                    fitted_on=tuple(manifest.get("fitted_on", ())))
