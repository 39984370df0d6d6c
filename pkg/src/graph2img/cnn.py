"""From-scratch 2D CNN: four parallel conv-pool branches over one input.

Architecture: for each region size in (3, 4, 5, 6), two blocks of
[same-padded convolution -> ReLU -> dropout -> 2x2 max pool] with 64 then 96
filters; branch outputs are flattened, concatenated, passed through one
hidden dense layer and a softmax output. Everything runs on numpy with
im2col so the heavy lifting is BLAS matmuls; float32 by default, float64
for gradient checking.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import tensorio

REGION_SIZES = (3, 4, 5, 6)
CONV1_FILTERS = 64
CONV2_FILTERS = 96

_MIN_IMAGE_SIDE = max(REGION_SIZES)
_TINY = 1e-12


def xavier_init(shape, seed: int = 0) -> np.ndarray:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out)).

    Fans are derived from the shape: (out, in, kh, kw) for convolution
    filters, (in, out) for dense weights, and the vector length for biases.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) == 4:
        out_ch, in_ch, kh, kw = shape
        fan_in, fan_out = in_ch * kh * kw, out_ch * kh * kw
    elif len(shape) == 2:
        fan_in, fan_out = shape
    elif len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        raise ValueError(f"cannot derive fans from shape {shape}")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    rng = np.random.default_rng(seed)
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# layer primitives: forward returns (out, cache), backward consumes the cache
# ---------------------------------------------------------------------------

def _same_pads(k: int) -> tuple[int, int]:
    before = (k - 1) // 2
    return before, k - 1 - before


def _im2col(x, kh, kw, pads):
    """(B, C, H, W) -> (B*Ho*Wo, C*kh*kw) patch matrix."""
    pt, pb, pl, pr = pads
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # B,C,Ho,Wo,kh,kw
    b, c, ho, wo = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, c * kh * kw)
    return np.ascontiguousarray(cols), ho, wo


def conv2d_forward(x, weights, bias, pads=None):
    """Stride-1 cross-correlation plus bias; same padding when pads is None."""
    f, c, kh, kw = weights.shape
    if x.shape[1] != c:
        raise ValueError(f"input channels {x.shape[1]} != filter channels {c}")
    if pads is None:
        pt, pb = _same_pads(kh)
        pl, pr = _same_pads(kw)
        pads = (pt, pb, pl, pr)
    cols, ho, wo = _im2col(x, kh, kw, pads)
    out = cols @ weights.reshape(f, -1).T + bias
    out = out.reshape(x.shape[0], ho, wo, f).transpose(0, 3, 1, 2)
    cache = (x.shape, cols, weights, pads)
    return np.ascontiguousarray(out), cache


def conv2d_backward(dout, cache, need_dx=True):
    x_shape, cols, weights, pads = cache
    f, c, kh, kw = weights.shape
    b = x_shape[0]
    dout_mat = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (dout_mat.T @ cols).reshape(weights.shape)
    db = dout_mat.sum(axis=0)
    dx = None
    if need_dx:
        # gradient w.r.t. the input is a correlation with the spatially
        # flipped filters, channel axes swapped, and complementary padding
        pt, pb, pl, pr = pads
        w_back = weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        back_pads = (kh - 1 - pt, kh - 1 - pb, kw - 1 - pl, kw - 1 - pr)
        dx, _ = conv2d_forward(dout, np.ascontiguousarray(w_back),
                               np.zeros(c, dtype=dout.dtype), pads=back_pads)
        assert dx.shape == x_shape
    return dx, dw, db


def maxpool2x2_forward(x):
    """2x2/stride-2 max pooling; odd trailing rows/columns are dropped."""
    b, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    windows = (
        x[:, :, : h2 * 2, : w2 * 2]
        .reshape(b, c, h2, 2, w2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h2, w2, 4)
    )
    arg = windows.argmax(axis=-1)  # first occurrence wins on ties
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg)


def maxpool2x2_backward(dout, cache):
    x_shape, arg = cache
    b, c, h, w = x_shape
    h2, w2 = h // 2, w // 2
    dwin = np.zeros((b, c, h2, w2, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, : h2 * 2, : w2 * 2] = (
        dwin.reshape(b, c, h2, w2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h2 * 2, w2 * 2)
    )
    return dx


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def dropout_forward(x, rate, rng, train_mode):
    """Inverted dropout: scaled at train time, identity at inference."""
    if not train_mode or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def dense_forward(x, weights, bias):
    return x @ weights + bias, x


def dense_backward(dout, x, weights):
    return dout @ weights.T, x.T @ dout, dout.sum(axis=0)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy; returns (loss, probabilities, dlogits)."""
    probs = softmax(logits)
    n = logits.shape[0]
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, _TINY)).mean())
    dlogits = probs.astype(np.float64).copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, probs, dlogits.astype(logits.dtype)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

class CnnModel:
    """Parameters and forward/backward pass of the four-branch network."""

    def __init__(self, input_shape, class_count, hidden_units=128,
                 dropout_rate=0.3, seed=0, dtype=np.float32):
        c, h, w = (int(v) for v in input_shape)
        if h < _MIN_IMAGE_SIDE or w < _MIN_IMAGE_SIDE:
            raise ValueError(
                f"input {h}x{w} smaller than the largest region size "
                f"{_MIN_IMAGE_SIDE}x{_MIN_IMAGE_SIDE}"
            )
        if class_count < 2:
            raise ValueError("need at least two classes")
        self.input_shape = (c, h, w)
        self.class_count = int(class_count)
        self.hidden_units = int(hidden_units)
        self.dropout_rate = float(dropout_rate)
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)

        h4, w4 = h // 2 // 2, w // 2 // 2
        self.merge_width = len(REGION_SIZES) * CONV2_FILTERS * h4 * w4

        rng = np.random.default_rng(seed)
        self.params = {}

        def init(name, shape):
            self.params[name] = xavier_init(shape, seed=int(rng.integers(2**31))).astype(self.dtype)

        def zeros(name, n):
            self.params[name] = np.zeros(n, dtype=self.dtype)

        for rs in REGION_SIZES:
            init(f"branch{rs}.conv1.W", (CONV1_FILTERS, c, rs, rs))
            zeros(f"branch{rs}.conv1.b", CONV1_FILTERS)
            init(f"branch{rs}.conv2.W", (CONV2_FILTERS, CONV1_FILTERS, rs, rs))
            zeros(f"branch{rs}.conv2.b", CONV2_FILTERS)
        init("dense1.W", (self.merge_width, self.hidden_units))
        zeros("dense1.b", self.hidden_units)
        init("output.W", (self.hidden_units, self.class_count))
        zeros("output.b", self.class_count)

    def param_names(self):
        return sorted(self.params)

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}

    def set_params(self, params):
        for k in self.params:
            self.params[k] = params[k].astype(self.dtype)

    def forward_logits(self, x, train_mode=False, rng=None):
        """Returns (logits, cache); ``rng`` drives dropout masks in train mode."""
        if rng is None:
            rng = np.random.default_rng(0)
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ValueError(f"batch shape {x.shape[1:]} != model input {self.input_shape}")
        rate = self.dropout_rate
        caches = {"branches": {}}
        flats = []
        for rs in REGION_SIZES:
            p = self.params
            h1, c_conv1 = conv2d_forward(x, p[f"branch{rs}.conv1.W"], p[f"branch{rs}.conv1.b"])
            a1, m_relu1 = relu_forward(h1)
            d1, m_drop1 = dropout_forward(a1, rate, rng, train_mode)
            p1, c_pool1 = maxpool2x2_forward(d1)
            h2, c_conv2 = conv2d_forward(p1, p[f"branch{rs}.conv2.W"], p[f"branch{rs}.conv2.b"])
            a2, m_relu2 = relu_forward(h2)
            d2, m_drop2 = dropout_forward(a2, rate, rng, train_mode)
            p2, c_pool2 = maxpool2x2_forward(d2)
            flats.append(p2.reshape(x.shape[0], -1))
            caches["branches"][rs] = (
                c_conv1, m_relu1, m_drop1, c_pool1, c_conv2, m_relu2, m_drop2, c_pool2,
                p2.shape,
            )
        merged = np.concatenate(flats, axis=1)
        z1, c_dense1 = dense_forward(merged, self.params["dense1.W"], self.params["dense1.b"])
        a_hidden, m_relu_d = relu_forward(z1)
        d_hidden, m_drop_d = dropout_forward(a_hidden, rate, rng, train_mode)
        logits, c_out = dense_forward(d_hidden, self.params["output.W"], self.params["output.b"])
        caches["head"] = (c_dense1, m_relu_d, m_drop_d, c_out)
        return logits, caches

    def backward(self, dlogits, caches, need_input_grad=False):
        """Gradients for every parameter given d(loss)/d(logits)."""
        grads = {}
        c_dense1, m_relu_d, m_drop_d, c_out = caches["head"]
        d_hidden, grads["output.W"], grads["output.b"] = dense_backward(
            dlogits, c_out, self.params["output.W"])
        d_hidden = dropout_backward(d_hidden, m_drop_d)
        d_hidden = relu_backward(d_hidden, m_relu_d)
        dmerged, grads["dense1.W"], grads["dense1.b"] = dense_backward(
            d_hidden, c_dense1, self.params["dense1.W"])

        dx_total = None
        offset = 0
        for rs in REGION_SIZES:
            (c_conv1, m_relu1, m_drop1, c_pool1, c_conv2, m_relu2, m_drop2, c_pool2,
             p2_shape) = caches["branches"][rs]
            width = int(np.prod(p2_shape[1:]))
            dflat = dmerged[:, offset : offset + width].reshape(p2_shape)
            offset += width
            d = maxpool2x2_backward(dflat, c_pool2)
            d = dropout_backward(d, m_drop2)
            d = relu_backward(d, m_relu2)
            d, grads[f"branch{rs}.conv2.W"], grads[f"branch{rs}.conv2.b"] = conv2d_backward(
                d, c_conv2)
            d = maxpool2x2_backward(d, c_pool1)
            d = dropout_backward(d, m_drop1)
            d = relu_backward(d, m_relu1)
            dx, grads[f"branch{rs}.conv1.W"], grads[f"branch{rs}.conv1.b"] = conv2d_backward(
                d, c_conv1, need_dx=need_input_grad)
            if need_input_grad:
                dx_total = dx if dx_total is None else dx_total + dx
        return (grads, dx_total) if need_input_grad else (grads, None)

    def loss_and_grads(self, x, labels, train_mode=True, rng=None):
        logits, caches = self.forward_logits(x, train_mode=train_mode, rng=rng)
        loss, probs, dlogits = softmax_cross_entropy(logits, labels)
        grads, _ = self.backward(dlogits, caches)
        return loss, grads, probs


def forward(model: CnnModel, batch, train_mode=False, rng=None) -> np.ndarray:
    """Class probability matrix for a batch; rows sum to one."""
    logits, _ = model.forward_logits(batch, train_mode=train_mode, rng=rng)
    return softmax(logits)


def predict(model: CnnModel, images, batch_size: int = 64):
    """Argmax inference. Returns (labels, probabilities)."""
    images = np.asarray(images)
    probs = np.vstack([
        forward(model, images[lo : lo + batch_size])
        for lo in range(0, len(images), batch_size)
    ])
    return probs.argmax(axis=1), probs


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    dropout: float = 0.3
    patience: int = 5            # epochs without val-loss improvement (null delta)
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 50
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must lie in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not (0.0 < self.validation_fraction < 1.0):
            raise ValueError("validation fraction must lie in (0, 1)")


class Adam:
    """Bias-corrected Adam over a parameter dict."""

    def __init__(self, params, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] -= self.learning_rate * (self.m[k] / c1) / (
                np.sqrt(self.v[k] / c2) + self.epsilon
            )


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)   # dicts per epoch
    stopped_epoch: int = 0
    best_val_loss: float = float("inf")

    def to_csv(self, path):
        cols = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "seconds"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{row[c]:.6g}" if c != "epoch" else str(row[c])
                                  for c in cols) + "\n")


def _stratified_holdout(labels, fraction, rng):
    """Index split (train, held_out) that keeps every class in both sides."""
    labels = np.asarray(labels)
    train_idx, val_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        take = max(1, int(round(fraction * len(members))))
        take = min(take, len(members) - 1) if len(members) > 1 else 0
        val_idx.extend(members[:take])
        train_idx.extend(members[take:])
    return np.array(sorted(train_idx)), np.array(sorted(val_idx))


def evaluate_loss(model, images, labels, batch_size=64):
    """Mean cross-entropy and accuracy in inference mode."""
    total_loss, correct = 0.0, 0
    n = len(images)
    for lo in range(0, n, batch_size):
        batch = images[lo : lo + batch_size]
        batch_labels = labels[lo : lo + batch_size]
        logits, _ = model.forward_logits(batch, train_mode=False)
        loss, probs, _ = softmax_cross_entropy(logits, batch_labels)
        total_loss += loss * len(batch)
        correct += int((probs.argmax(axis=1) == batch_labels).sum())
    return total_loss / n, correct / n


def train(model: CnnModel, images, labels, config: TrainConfig):
    """Adam + early stopping on a held-out validation split.

    Stops once the validation loss has failed to strictly improve for
    ``patience`` consecutive epochs and restores the best-validation weights.
    Returns (model, history).
    """
    images = np.asarray(images, dtype=model.dtype)
    labels = np.asarray(labels, dtype=np.int64)
    if images.ndim != 4 or images.shape[1:] != model.input_shape:
        raise ValueError(f"images shaped {images.shape[1:]}, expected {model.input_shape}")
    if labels.min() < 0 or labels.max() >= model.class_count:
        raise ValueError("labels out of range")

    model.dropout_rate = config.dropout
    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = _stratified_holdout(labels, config.validation_fraction, rng)
    if len(val_idx) == 0 or len(train_idx) == 0:
        raise ValueError("validation split is empty; need more samples per class")
    x_train, y_train = images[train_idx], labels[train_idx]
    x_val, y_val = images[val_idx], labels[val_idx]

    optimizer = Adam(model.params, learning_rate=config.learning_rate,
                     beta1=config.beta1, beta2=config.beta2, epsilon=config.epsilon)
    history = TrainHistory()
    best_params = model.copy_params()
    best_val = float("inf")
    since_improvement = 0

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(x_train))
        epoch_loss, correct = 0.0, 0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            loss, grads, probs = model.loss_and_grads(
                x_train[idx], y_train[idx], train_mode=True, rng=rng)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch {lo // config.batch_size}"
                )
            optimizer.step(model.params, grads)
            epoch_loss += loss * len(idx)
            correct += int((probs.argmax(axis=1) == y_train[idx]).sum())
        val_loss, val_acc = evaluate_loss(model, x_val, y_val)
        history.rows.append({
            "epoch": epoch,
            "train_loss": epoch_loss / len(x_train),
            "train_acc": correct / len(x_train),
            "val_loss": val_loss,
            "val_acc": val_acc,
            "seconds": time.perf_counter() - started,
        })
        if val_loss < best_val:
            best_val = val_loss
            best_params = model.copy_params()
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= config.patience:
                break
    model.set_params(best_params)
    history.stopped_epoch = history.rows[-1]["epoch"] if history.rows else 0
    history.best_val_loss = best_val
    return model, history


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_model(path, model: CnnModel):
    names = model.param_names()
    tensorio.write_records(path, [(i, model.params[n]) for i, n in enumerate(names)])
    tensorio.write_manifest(path, {
        "kind": "cnn-checkpoint",
        "input_shape": list(model.input_shape),
        "class_count": model.class_count,
        "hidden_units": model.hidden_units,
        "dropout_rate": model.dropout_rate,
        "dtype": model.dtype.name,
        "param_names": names,
    })


def load_model(path) -> CnnModel:
    manifest = tensorio.read_manifest(path)
    model = CnnModel(
        input_shape=tuple(manifest["input_shape"]),
        class_count=manifest["class_count"],
        hidden_units=manifest["hidden_units"],
        dropout_rate=manifest["dropout_rate"],
        dtype=np.dtype(manifest["dtype"]),
    )
    records = dict(tensorio.read_records(path))
    model.set_params({name: records[i] for i, name in enumerate(manifest["param_names"])})
    return model
