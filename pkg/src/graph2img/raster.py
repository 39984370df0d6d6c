"""Fixed-shape multi-channel 2D histogram images of compressed node vectors.

One global extent (the min/max of all flattened coordinates) and a resolution
in bins per coordinate unit fix the image size for a whole collection; channel
``k`` is the 2D count histogram of coordinate pair (2k, 2k+1). Tensors hold
raw integer counts — node counts carry class signal, so histograms are not
normalized unless the ablation flag asks for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compress import CompressedNodeVectors
from . import tensorio


@dataclass(frozen=True)
class ImageSpec:
    resolution: float
    extent: tuple[float, float]   # one scalar range shared by both axes
    width: int
    height: int
    channels: int
    # indices of the graphs whose coordinates defined the extent (leakage audit)
    fitted_on: tuple[int, ...] = ()

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("need at least one channel")
        if self.width < 1 or self.height < 1:
            raise ValueError("degenerate image shape")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)


@dataclass(frozen=True)
class GraphImage:
    tensor: np.ndarray   # channels x height x width, raw counts unless normalized
    graph_id: int
    label: int


def compute_spec(vector_collection, resolution: float, fitted_on=None) -> ImageSpec:
    """Image geometry for a collection of per-graph coordinate matrices.

    The extent is the min/max over every retained dimension of every graph,
    and the per-axis bin count is ``ceil(range * resolution)``. A zero range
    (all coordinates identical) is padded to a single one-unit bin.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    lo, hi = math.inf, -math.inf
    width_cols = None
    count = 0
    for vectors in vector_collection:
        coords = vectors.stacked if isinstance(vectors, CompressedNodeVectors) else np.asarray(vectors)
        if width_cols is None:
            width_cols = coords.shape[1]
            if width_cols % 2 != 0:
                raise ValueError("coordinate width must be even")
        elif coords.shape[1] != width_cols:
            raise ValueError("inconsistent coordinate widths across graphs")
        if coords.size:
            lo = min(lo, float(coords.min()))
            hi = max(hi, float(coords.max()))
        count += 1
    if count == 0 or width_cols is None:
        raise ValueError("empty collection")
    if hi <= lo:
        hi = lo + 1.0
        bins = 1
    else:
        bins = int(math.ceil((hi - lo) * resolution))
    return ImageSpec(
        resolution=resolution,
        extent=(lo, hi),
        width=bins,
        height=bins,
        channels=width_cols // 2,
        fitted_on=tuple(int(i) for i in fitted_on) if fitted_on is not None else (),
    )


def rasterize_graph(vectors, spec: ImageSpec, normalize: bool = False,
                    graph_id: int = 0, label: int = 0) -> GraphImage:
    """Bin one graph's coordinates into a (channels, H, W) count tensor.

    Bins are half-open except the last one, which is closed so coordinates
    sitting exactly on the upper extent edge still land inside. Coordinates
    outside the extent (possible only when the extent was fitted on a subset)
    are dropped. ``tensor[k, iy, ix]`` counts nodes whose dimension ``2k``
    fell in column ``ix`` and dimension ``2k+1`` in row ``iy``.
    """
    coords = vectors.stacked if isinstance(vectors, CompressedNodeVectors) else np.asarray(vectors)
    if isinstance(vectors, CompressedNodeVectors):
        graph_id = vectors.graph_id
    if coords.shape[1] != 2 * spec.channels:
        raise ValueError(
            f"coordinate width {coords.shape[1]} does not match {spec.channels} channels"
        )
    lo, hi = spec.extent
    tensor = np.zeros(spec.shape, dtype=np.int64)
    for k in range(spec.channels):
        x = coords[:, 2 * k]
        y = coords[:, 2 * k + 1]
        inside = (x >= lo) & (x <= hi) & (y >= lo) & (y <= hi)
        ix = np.floor((x[inside] - lo) * spec.resolution).astype(np.int64)
        iy = np.floor((y[inside] - lo) * spec.resolution).astype(np.int64)
        np.clip(ix, 0, spec.width - 1, out=ix)
        np.clip(iy, 0, spec.height - 1, out=iy)
        np.add.at(tensor[k], (iy, ix), 1)
    if normalize:
        total = coords.shape[0]
        out = tensor.astype(np.float64) / max(total, 1)
        return GraphImage(tensor=out, graph_id=graph_id, label=label)
    return GraphImage(tensor=tensor, graph_id=graph_id, label=label)


def rasterize_dataset(vector_collection, spec: ImageSpec, labels=None,
                      normalize: bool = False) -> list[GraphImage]:
    """Rasterize every graph with one shared spec; output order matches input."""
    images = []
    for idx, vectors in enumerate(vector_collection):
        label = int(labels[idx]) if labels is not None else 0
        images.append(rasterize_graph(vectors, spec, normalize=normalize,
                                      graph_id=idx, label=label))
    shapes = {img.tensor.shape for img in images}
    if len(shapes) > 1:
        raise AssertionError(f"non-uniform image shapes {shapes}")
    return images


def save_images(path, images: list[GraphImage], spec: ImageSpec,
                extra_manifest: dict | None = None):
    tensorio.write_records(path, [(img.graph_id, img.tensor) for img in images])
    manifest = {
        "kind": "graph-images",
        "resolution": spec.resolution,
        "extent": list(spec.extent),
        "width": spec.width,
        "height": spec.height,
        "channels": spec.channels,
        "labels": {str(img.graph_id): int(img.label) for img in images},
    }
    manifest.update(extra_manifest or {})
    tensorio.write_manifest(path, manifest)


def load_images(path):
    """Read (images, spec) back from a container written by :func:`save_images`."""
    manifest = tensorio.read_manifest(path)
    spec = ImageSpec(
        resolution=manifest["resolution"],
        extent=tuple(manifest["extent"]),
        width=manifest["width"],
        height=manifest["height"],
        channels=manifest["channels"],
    )
    labels = manifest.get("labels", {})
    images = [
        GraphImage(tensor=t, graph_id=int(k), label=int(labels.get(str(k), 0)))
        for k, t in tensorio.read_records(path)
    ]
    return images, spec
