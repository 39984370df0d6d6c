"""Experiment orchestration: repeated stratified CV, grid search, reporting.

The evaluation protocol is 10-fold stratified cross-validation, the whole
protocol repeated (3 repeats by default) with different shuffles, reporting
mean accuracy with the population standard deviation over all fold values.
Kernel methods tune their hyperparameters per fold on a 90-10 split of the
training fold. By default every fitted object (PCA, histogram extent) sees
training-fold graphs only; ``global_preprocessing`` switches to fitting on
the whole collection for comparability studies.
"""

from __future__ import annotations

import itertools
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import cnn as cnn_mod
from . import svm as svm_mod
from .compress import CompressedNodeVectors, compress_embeddings, pca_fit, pca_transform, \
    prepare_attribute_channels
from .embed import EmbeddingConfig, WalkConfig, embed_dataset
from .graphs import Graph, GraphDataset
from .kernels import GraphletConfig, graphlet_kernel_matrix, wl_kernel_matrices
from .raster import compute_spec, rasterize_graph

_EXACT_MW_LIMIT = 20  # total sample size up to which the U distribution is enumerated


@dataclass(frozen=True)
class CvConfig:
    folds: int = 10
    repeats: int = 3
    inner_validation_fraction: float = 0.1   # the 10% side of the 90-10 inner split
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least two folds")
        if self.repeats < 1:
            raise ValueError("need at least one repeat")
        if not (0.0 < self.inner_validation_fraction < 1.0):
            raise ValueError("inner validation fraction must lie in (0, 1)")


@dataclass
class EvalResult:
    method: str
    fold_accuracies: np.ndarray     # folds x repeats values
    rows: list                       # per-fold dicts (repeat, fold, accuracy, ...)
    timings: dict
    metadata: dict = field(default_factory=dict)
    mean: float = 0.0
    std: float = 0.0

    def __post_init__(self):
        self.fold_accuracies = np.asarray(self.fold_accuracies, dtype=np.float64)
        self.mean = float(self.fold_accuracies.mean())
        # population standard deviation over all fold values
        self.std = float(self.fold_accuracies.std(ddof=0))


def stratified_kfold(labels, folds: int, seed: int = 0) -> np.ndarray:
    """Fold index per sample; per-class counts differ by at most one per fold.

    Classes are dealt largest-first, each class giving its remainder to the
    currently least-loaded folds, which also keeps total fold sizes within
    one sample of each other.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    assignment = np.full(len(labels), -1, dtype=np.int64)
    classes = sorted(np.unique(labels).tolist(),
                     key=lambda c: -int((labels == c).sum()))
    loads = np.zeros(folds, dtype=np.int64)
    for cls in classes:
        members = np.flatnonzero(labels == cls)
        if len(members) < folds:
            raise ValueError(
                f"class {cls} has {len(members)} members but {folds} folds are requested; "
                "reduce the fold count or merge classes"
            )
        members = members[rng.permutation(len(members))]
        base, extra = divmod(len(members), folds)
        order = np.lexsort((rng.permutation(folds), loads))
        cursor = 0
        for rank, fold in enumerate(order):
            take = base + (1 if rank < extra else 0)
            assignment[members[cursor : cursor + take]] = fold
            loads[fold] += take
            cursor += take
    return assignment


def stratified_split(labels, holdout_fraction: float, seed: int = 0):
    """(kept, held out) index arrays with every class present on both sides."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    keep_idx, hold_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        take = max(1, int(round(holdout_fraction * len(members))))
        take = min(take, len(members) - 1) if len(members) > 1 else 0
        hold_idx.extend(members[:take])
        keep_idx.extend(members[take:])
    return np.array(sorted(keep_idx)), np.array(sorted(hold_idx))


# ---------------------------------------------------------------------------
# Mann-Whitney U
# ---------------------------------------------------------------------------

def _midranks(pooled: np.ndarray) -> np.ndarray:
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled))
    sorted_vals = pooled[order]
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(sample_a, sample_b) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test with midranks for ties.

    Exact enumeration of the U distribution when the pooled size is at most
    20, normal approximation with tie correction and continuity correction
    above that. Returns (U of sample_a, two-sided p).
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be nonempty")
    na, nb = len(a), len(b)
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    u_a = float(ranks[:na].sum() - na * (na + 1) / 2)

    if na + nb <= _EXACT_MW_LIMIT:
        at_most = at_least = total = 0
        base = na * (na + 1) / 2
        for subset in itertools.combinations(range(na + nb), na):
            u = ranks[list(subset)].sum() - base
            total += 1
            at_most += u <= u_a + 1e-12
            at_least += u >= u_a - 1e-12
        p = 2.0 * min(at_most / total, at_least / total)
        return u_a, min(1.0, p)

    mean = na * nb / 2.0
    n = na + nb
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(((tie_counts**3 - tie_counts).sum()) / (n * (n - 1)))
    sigma_sq = na * nb / 12.0 * ((n + 1) - tie_term)
    if sigma_sq <= 0:
        return u_a, 1.0
    # continuity correction toward the mean
    z = (u_a - mean - 0.5 * np.sign(u_a - mean)) / math.sqrt(sigma_sq)
    p = 2.0 * (1.0 - 0.5 * (1.0 + math.erf(abs(z) / math.sqrt(2.0))))
    return u_a, min(1.0, p)


# ---------------------------------------------------------------------------
# synthetic datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassSpec:
    kind: str                 # "uniform" (edge probability) or "preferential"
    nodes: int
    count: int
    edge_probability: float | None = None
    attachment: int | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "preferential"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.nodes < 1 or self.count < 1:
            raise ValueError("nodes and count must be positive")
        if self.kind == "uniform":
            if self.edge_probability is None or not (0.0 <= self.edge_probability <= 1.0):
                raise ValueError("uniform generator needs edge_probability in [0, 1]")
        if self.kind == "preferential":
            if self.attachment is None or not (1 <= self.attachment < self.nodes):
                raise ValueError("preferential generator needs 1 <= attachment < nodes")


def _uniform_edge_graph(n: int, p: float, rng) -> list[tuple[int, int]]:
    if n < 2:
        return []
    iu, ju = np.triu_indices(n, k=1)
    chosen = rng.random(len(iu)) < p
    return list(zip(iu[chosen].tolist(), ju[chosen].tolist()))


def _preferential_attachment_graph(n: int, m: int, rng) -> list[tuple[int, int]]:
    """Each new node attaches to m distinct targets chosen by degree."""
    edges = []
    repeated = []  # endpoint multiset; sampling from it is degree-proportional
    for new in range(1, n):
        if new <= m:
            targets = list(range(new))
        else:
            targets = set()
            while len(targets) < m:
                pick = repeated[rng.integers(0, len(repeated))]
                targets.add(pick)
            targets = sorted(targets)
        for t in targets:
            edges.append((t, new))
            repeated.extend((t, new))
    return edges


def generate_synthetic_dataset(class_specs, seed: int = 0,
                               name: str = "synthetic") -> GraphDataset:
    """Labeled random-graph dataset; one class per spec, deterministic per seed."""
    specs = list(class_specs)
    if len(specs) < 2:
        raise ValueError("need at least two class specs")
    rng = np.random.default_rng(seed)
    graphs = []
    for label, spec in enumerate(specs):
        for _ in range(spec.count):
            if spec.kind == "uniform":
                edges = _uniform_edge_graph(spec.nodes, spec.edge_probability, rng)
            else:
                edges = _preferential_attachment_graph(spec.nodes, spec.attachment, rng)
            graphs.append(Graph(node_count=spec.nodes, edges=tuple(edges), label=label))
    return GraphDataset(graphs=tuple(graphs), class_count=len(specs), name=name,
                        label_map={i: i for i in range(len(specs))})


def parse_synthetic_spec(text: str) -> list[ClassSpec]:
    """Parse ``uniform:n=60,p=0.1,count=100;preferential:n=60,m=3,count=100``."""
    specs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        kind, _, args = chunk.partition(":")
        kind = {"er": "uniform", "ba": "preferential"}.get(kind, kind)
        kwargs = {}
        for token in args.split(","):
            key, _, value = token.partition("=")
            kwargs[key.strip()] = value.strip()
        specs.append(ClassSpec(
            kind=kind,
            nodes=int(kwargs["n"]),
            count=int(kwargs.get("count", 100)),
            edge_probability=float(kwargs["p"]) if "p" in kwargs else None,
            attachment=int(kwargs["m"]) if "m" in kwargs else None,
        ))
    return specs


# ---------------------------------------------------------------------------
# method configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CnnMethodConfig:
    walk: WalkConfig = WalkConfig()
    embedding: EmbeddingConfig = EmbeddingConfig()
    channels: int = 2                       # embedding channels; d = 2 * channels
    resolution: float = 9.0
    target_image_px: int | None = None      # derive resolution from the fit extent
    use_attributes: bool | None = None      # None: use them when the dataset has them
    normalize_histograms: bool = False
    pca_scope: str = "collection"           # or "per-graph"
    global_preprocessing: bool = False
    train: cnn_mod.TrainConfig = cnn_mod.TrainConfig()
    hidden_units: int = 128

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("need at least one channel")
        if self.pca_scope not in ("collection", "per-graph"):
            raise ValueError("pca_scope must be 'collection' or 'per-graph'")


@dataclass(frozen=True)
class KernelMethodConfig:
    kind: str                               # "wl" or "graphlet"
    wl_grid: tuple = (2, 3, 4, 5, 6, 7)
    graphlet: GraphletConfig = GraphletConfig()
    c_values: tuple = tuple(svm_mod.c_grid())
    tolerance: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("wl", "graphlet"):
            raise ValueError("kernel kind must be 'wl' or 'graphlet'")


# node2vec-style settings that performed best per dataset in our experiments
CNN_PRESETS = {
    "REDDIT-B": dict(resolution=9.0, channels=5, walk=WalkConfig(p=2.0, q=0.5)),
    "REDDIT-5K": dict(resolution=9.0, channels=2, walk=WalkConfig(p=4.0, q=0.25)),
    "REDDIT-12K": dict(resolution=9.0, channels=5, walk=WalkConfig(p=1.0, q=1.0)),
    "COLLAB": dict(resolution=9.0, channels=5, walk=WalkConfig(p=0.5, q=2.0, context_size=2),
                   embedding=EmbeddingConfig(dimensions=12)),
    "IMDB-B": dict(resolution=14.0, channels=5, walk=WalkConfig(p=1.0, q=1.0)),
    "PROTEINS_full": dict(resolution=9.0, channels=2, walk=WalkConfig(p=0.5, q=2.0),
                          embedding=EmbeddingConfig(dimensions=4), use_attributes=True),
}


def preset_cnn_config(name: str) -> CnnMethodConfig:
    if name not in CNN_PRESETS:
        raise KeyError(f"no preset named {name!r}; choices: {sorted(CNN_PRESETS)}")
    return CnnMethodConfig(**CNN_PRESETS[name])


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

@dataclass
class GridSearchResult:
    c: float
    h: int
    accuracy: float
    trainings: int


def grid_search_kernel(train_kernels: dict, train_labels, c_values,
                       inner_fraction: float = 0.1, seed: int = 0,
                       tolerance: float = 1e-3) -> GridSearchResult:
    """Joint (C, h) search on one inner split of the training fold.

    ``train_kernels`` maps each h to the kernel submatrix over the training
    fold. Ties are resolved toward the smaller h, then the smaller C.
    """
    train_labels = np.asarray(train_labels)
    inner_train, inner_val = stratified_split(train_labels, inner_fraction, seed=seed)
    best = None
    trainings = 0
    for h in sorted(train_kernels):
        kernel = train_kernels[h]
        sub_train = kernel[np.ix_(inner_train, inner_train)]
        rows_val = kernel[np.ix_(inner_val, inner_train)]
        for c_value in sorted(c_values):
            model = svm_mod.train_multiclass(
                sub_train, train_labels[inner_train],
                svm_mod.CsvmConfig(C=float(c_value), tolerance=tolerance))
            predicted = svm_mod.predict(model, rows_val)
            accuracy = float((predicted == train_labels[inner_val]).mean())
            trainings += 1
            if best is None or accuracy > best.accuracy:
                best = GridSearchResult(c=float(c_value), h=int(h),
                                        accuracy=accuracy, trainings=0)
    best.trainings = trainings
    return best


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _assert_fold_hygiene(fitted_on, test_idx, what: str):
    overlap = set(fitted_on) & set(int(i) for i in test_idx)
    if overlap:
        raise AssertionError(f"{what} was fitted on test graphs {sorted(overlap)}")


def _squeeze_dataset(dataset: GraphDataset, min_nodes: int):
    """Drop graphs too small to support the requested dimensionality."""
    keep = [i for i, g in enumerate(dataset.graphs) if g.node_count >= min_nodes]
    if len(keep) == len(dataset.graphs):
        return dataset, list(range(len(dataset.graphs)))
    warnings.warn(
        f"dropping {len(dataset.graphs) - len(keep)} graph(s) with fewer than "
        f"{min_nodes} nodes"
    )
    graphs = tuple(dataset.graphs[i] for i in keep)
    return (GraphDataset(graphs=graphs, class_count=dataset.class_count,
                         name=dataset.name, label_map=dataset.label_map), keep)


def _run_cnn_experiment(dataset: GraphDataset, method: CnnMethodConfig,
                        cv: CvConfig, progress=None) -> EvalResult:
    d = 2 * method.channels
    dataset, kept = _squeeze_dataset(dataset, d)
    labels = dataset.labels
    n = len(dataset.graphs)
    min_nodes = min(g.node_count for g in dataset.graphs)
    if method.embedding.dimensions > min_nodes:
        raise ValueError(
            f"embedding dimensionality {method.embedding.dimensions} exceeds the smallest "
            f"graph ({min_nodes} nodes); shrink it"
        )
    if d > method.embedding.dimensions:
        raise ValueError("channels require more dimensions than the embedding provides")

    use_attributes = dataset.has_attributes if method.use_attributes is None \
        else method.use_attributes
    if use_attributes and not dataset.has_attributes:
        raise ValueError("attribute channels requested but the dataset has none")

    t0 = time.perf_counter()
    embeddings = embed_dataset(dataset, method.walk, method.embedding)
    embed_seconds = time.perf_counter() - t0

    rows = []
    audit = []
    raster_seconds = []
    epoch_seconds = []
    last_history = None
    for repeat in range(cv.repeats):
        folds = stratified_kfold(labels, cv.folds, seed=cv.seed + repeat)
        for fold in range(cv.folds):
            test_idx = np.flatnonzero(folds == fold)
            train_idx = np.flatnonzero(folds != fold)
            fit_set = np.arange(n) if method.global_preprocessing else train_idx

            t1 = time.perf_counter()
            if method.pca_scope == "per-graph":
                compressed = []
                for gid, emb in enumerate(embeddings):
                    local = pca_fit(emb.matrix, d, fitted_on=(gid,))
                    compressed.append(pca_transform(local, emb.matrix))
                pca_fitted_on = tuple()  # per-graph models never cross folds
            else:
                pca_model, compressed = compress_embeddings(embeddings, d, fit_graphs=fit_set)
                pca_fitted_on = pca_model.fitted_on
                if not method.global_preprocessing:
                    _assert_fold_hygiene(pca_fitted_on, test_idx, "PCA model")

            attr_parts = [None] * n
            if use_attributes:
                fit_rows = np.vstack([compressed[i] for i in fit_set])
                attr_model, attr_parts = prepare_attribute_channels(
                    dataset, d, (float(fit_rows.min()), float(fit_rows.max())),
                    fit_graphs=fit_set)
                if not method.global_preprocessing:
                    _assert_fold_hygiene(attr_model.fitted_on, test_idx, "attribute PCA")

            vectors = [
                CompressedNodeVectors(embedding=compressed[i], attributes=attr_parts[i],
                                      graph_id=i)
                for i in range(n)
            ]
            resolution = method.resolution
            if method.target_image_px is not None:
                lo = min(float(vectors[i].stacked.min()) for i in fit_set)
                hi = max(float(vectors[i].stacked.max()) for i in fit_set)
                resolution = method.target_image_px / max(hi - lo, 1e-9)
            spec = compute_spec((vectors[i] for i in fit_set), resolution,
                                fitted_on=fit_set)
            if not method.global_preprocessing:
                _assert_fold_hygiene(spec.fitted_on, test_idx, "image extent")
            images = [rasterize_graph(vectors[i], spec,
                                      normalize=method.normalize_histograms,
                                      graph_id=i, label=int(labels[i]))
                      for i in range(n)]
            raster_seconds.append(time.perf_counter() - t1)

            x = np.stack([img.tensor for img in images]).astype(np.float32)
            fold_seed = cv.seed * 1000 + repeat * cv.folds + fold
            model = cnn_mod.CnnModel(
                input_shape=spec.shape, class_count=dataset.class_count,
                hidden_units=method.hidden_units, dropout_rate=method.train.dropout,
                seed=fold_seed)
            train_cfg = replace(method.train, seed=fold_seed)
            model, history = cnn_mod.train(model, x[train_idx], labels[train_idx], train_cfg)
            predicted, _ = cnn_mod.predict(model, x[test_idx])
            accuracy = float((predicted == labels[test_idx]).mean())
            epoch_seconds.extend(row["seconds"] for row in history.rows)
            rows.append({
                "repeat": repeat, "fold": fold, "accuracy": accuracy,
                "epochs": history.stopped_epoch,
                "image_side": spec.width,
            })
            audit.append({
                "repeat": repeat, "fold": fold,
                "pca_fitted_on": sorted(int(i) for i in pca_fitted_on),
                "extent_fitted_on": sorted(int(i) for i in spec.fitted_on),
                "test_indices": sorted(int(i) for i in test_idx),
            })
            if progress:
                progress(f"cnn repeat {repeat} fold {fold}: acc={accuracy:.3f} "
                         f"({history.stopped_epoch} epochs, {spec.width}px)")
            last_history = history
    timings = {
        "embed_seconds": embed_seconds,
        "raster_seconds_per_fold": float(np.mean(raster_seconds)),
        "train_seconds_per_epoch": float(np.mean(epoch_seconds)),
    }
    return EvalResult(
        method="cnn",
        fold_accuracies=np.array([r["accuracy"] for r in rows]),
        rows=rows,
        timings=timings,
        metadata={
            "kept_graphs": kept,
            "leakage_audit": audit,
            "config": _jsonable(asdict(method)),
            "cv": asdict(cv),
            "std_convention": "population std over all repeat x fold accuracies",
            "last_history": [dict(r) for r in last_history.rows] if last_history else [],
        },
    )


def _run_kernel_experiment(dataset: GraphDataset, method: KernelMethodConfig,
                           cv: CvConfig, progress=None) -> EvalResult:
    labels = dataset.labels
    graphs = dataset.graphs
    if method.kind == "wl":
        matrices = wl_kernel_matrices(graphs, sorted(method.wl_grid))
        fill_seconds = sum(m.seconds for m in matrices.values())
        kernels_by_h = {h: m.values for h, m in matrices.items()}
    else:
        matrix = graphlet_kernel_matrix(graphs, method.graphlet)
        fill_seconds = matrix.seconds
        kernels_by_h = {0: matrix.values}

    rows = []
    svm_seconds = 0.0
    for repeat in range(cv.repeats):
        folds = stratified_kfold(labels, cv.folds, seed=cv.seed + repeat)
        for fold in range(cv.folds):
            test_idx = np.flatnonzero(folds == fold)
            train_idx = np.flatnonzero(folds != fold)
            t1 = time.perf_counter()
            train_kernels = {
                h: k[np.ix_(train_idx, train_idx)] for h, k in kernels_by_h.items()
            }
            best = grid_search_kernel(
                train_kernels, labels[train_idx], method.c_values,
                inner_fraction=cv.inner_validation_fraction,
                seed=cv.seed * 1000 + repeat * cv.folds + fold,
                tolerance=method.tolerance)
            model = svm_mod.train_multiclass(
                train_kernels[best.h], labels[train_idx],
                svm_mod.CsvmConfig(C=best.c, tolerance=method.tolerance))
            rows_test = kernels_by_h[best.h][np.ix_(test_idx, train_idx)]
            predicted = svm_mod.predict(model, rows_test)
            accuracy = float((predicted == labels[test_idx]).mean())
            svm_seconds += time.perf_counter() - t1
            rows.append({
                "repeat": repeat, "fold": fold, "accuracy": accuracy,
                "best_c": best.c, "best_h": best.h,
                "grid_trainings": best.trainings,
            })
            if progress:
                progress(f"{method.kind} repeat {repeat} fold {fold}: acc={accuracy:.3f} "
                         f"(C={best.c:g}, h={best.h})")
    timings = {
        "kernel_fill_seconds": fill_seconds,
        "svm_seconds_total": svm_seconds,
    }
    return EvalResult(
        method=method.kind,
        fold_accuracies=np.array([r["accuracy"] for r in rows]),
        rows=rows,
        timings=timings,
        metadata={
            "config": _jsonable(asdict(method)),
            "cv": asdict(cv),
            "std_convention": "population std over all repeat x fold accuracies",
        },
    )


def run_experiment(dataset: GraphDataset, method, cv: CvConfig,
                   out_dir=None, baseline: EvalResult | None = None,
                   progress=None) -> EvalResult:
    """Run the full protocol for one method; optionally write report files.

    ``baseline`` adds a Mann-Whitney U comparison of the two fold-accuracy
    samples to the summary.
    """
    if isinstance(method, CnnMethodConfig):
        result = _run_cnn_experiment(dataset, method, cv, progress=progress)
    elif isinstance(method, KernelMethodConfig):
        result = _run_kernel_experiment(dataset, method, cv, progress=progress)
    else:
        raise TypeError(f"unsupported method config {type(method).__name__}")
    if baseline is not None:
        u_stat, p_value = mann_whitney_u(result.fold_accuracies, baseline.fold_accuracies)
        result.metadata["baseline_comparison"] = {
            "baseline_method": baseline.method,
            "u_statistic": u_stat,
            "p_value": p_value,
        }
    if out_dir is not None:
        write_report(result, dataset, out_dir)
    return result


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    if isinstance(value, type):
        return value.__name__
    return value


def write_report(result: EvalResult, dataset: GraphDataset, out_dir):
    """results.csv + summary.json + timings.csv + figures under ``out_dir``."""
    from pathlib import Path
    from . import plots

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    columns = sorted({key for row in result.rows for key in row})
    ordered = ["repeat", "fold", "accuracy"] + [c for c in columns
                                                if c not in ("repeat", "fold", "accuracy")]
    with (out_dir / "results.csv").open("w") as fh:
        fh.write(",".join(ordered) + "\n")
        for row in result.rows:
            fh.write(",".join(str(row.get(c, "")) for c in ordered) + "\n")

    summary = {
        "method": result.method,
        "dataset": dataset.name,
        "graphs": len(dataset.graphs),
        "classes": dataset.class_count,
        "mean_accuracy": result.mean,
        "std_accuracy": result.std,
        "fold_accuracies": result.fold_accuracies.tolist(),
        "timings": result.timings,
        "metadata": _jsonable({k: v for k, v in result.metadata.items()
                               if k != "last_history"}),
    }
    with (out_dir / "summary.json").open("w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")

    with (out_dir / "timings.csv").open("w") as fh:
        fh.write("dataset,phase,seconds\n")
        for phase, seconds in result.timings.items():
            fh.write(f"{dataset.name},{phase},{seconds:.6g}\n")

    plots.fold_accuracy_figure({result.method: result.fold_accuracies},
                               out_dir / "accuracy_per_fold.png")
    history = result.metadata.get("last_history")
    if history:
        plots.history_figure(history, out_dir / "training_history.png")
