"""Minimal deterministic neural primitives with exact manual backprop.

Dense stacks, an autoencoder, a single-cell LSTM classifier, the two losses
used by the lab (summed squared reconstruction error and binary
cross-entropy), plain SGD, and a central-difference gradient checker.
Everything runs in float64 and is deterministic for a fixed seed, which is
what makes the finite-difference verification and the checkpoint round-trip
guarantees meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("identity", "relu", "sigmoid", "tanh")

BCE_CLAMP = 1e-7  # probability clamp guarding log(0)


class CheckpointError(Exception):
    """Raised for version, corruption, or shape problems in checkpoint files."""


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def _activate(name, a):
    if name == "identity":
        return a
    if name == "relu":
        return np.maximum(a, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-a))
    if name == "tanh":
        return np.tanh(a)
    raise ValueError(f"unknown activation {name!r}")


def _activate_grad(name, a, y):
    # derivative w.r.t. pre-activation a, given post-activation y
    if name == "identity":
        return np.ones_like(a)
    if name == "relu":
        return (a > 0.0).astype(float)
    if name == "sigmoid":
        return y * (1.0 - y)
    if name == "tanh":
        return 1.0 - y * y
    raise ValueError(f"unknown activation {name!r}")


def sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


# ---------------------------------------------------------------------------
# dense layers
# ---------------------------------------------------------------------------

@dataclass
class DenseParams:
    """One fully connected layer: activation(w @ x + b), w is [out, in]."""

    w: np.ndarray
    b: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.w.ndim != 2 or self.b.ndim != 1:
            raise ValueError("w must be 2-D and b 1-D")
        if self.w.shape[0] != self.b.shape[0]:
            raise ValueError("w rows must match b length")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.w).all() and np.isfinite(self.b).all()):
            raise ValueError("non-finite layer parameters")

    @property
    def n_in(self):
        return self.w.shape[1]

    @property
    def n_out(self):
        return self.w.shape[0]


def dense_init(n_in, n_out, activation, rng):
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init from a seeded generator."""
    bound = 1.0 / np.sqrt(n_in)
    w = rng.uniform(-bound, bound, size=(n_out, n_in))
    b = rng.uniform(-bound, bound, size=n_out)
    return DenseParams(w, b, activation)


def dense_forward(params, x):
    """activation(w @ x + b) for a single 1-D input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != params.n_in:
        raise ValueError(
            f"input length {x.shape} does not match layer input {params.n_in}"
        )
    return _activate(params.activation, params.w @ x + params.b)


def stack_forward(layers, x):
    """Run a batch [B, d_in] (or a single vector) through a dense stack.

    Returns (output, caches); caches hold per-layer inputs, pre- and
    post-activations for the matching backward pass.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    caches = []
    for layer in layers:
        if x.shape[1] != layer.n_in:
            raise ValueError(
                f"stack input width {x.shape[1]} != layer input {layer.n_in}"
            )
        a = x @ layer.w.T + layer.b
        y = _activate(layer.activation, a)
        caches.append((x, a, y))
        x = y
    return (x[0] if squeeze else x), caches


def stack_backward(layers, caches, d_out):
    """Backpropagate d_out [B, d_last] through the stack.

    Returns (grads, d_input) where grads is a list of (dw, db) matching the
    layer list.
    """
    d_out = np.asarray(d_out, dtype=float)
    if d_out.ndim == 1:
        d_out = d_out[None, :]
    grads = [None] * len(layers)
    dy = d_out
    for i in range(len(layers) - 1, -1, -1):
        x_in, a, y = caches[i]
        da = dy * _activate_grad(layers[i].activation, a, y)
        grads[i] = (da.T @ x_in, da.sum(axis=0))
        dy = da @ layers[i].w
    return grads, dy


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def mse_loss(x, x_hat):
    """Summed squared reconstruction error  sum_i (x_i - x_hat_i)^2.

    This is the anomaly score used on traffic features: zero iff the
    reconstruction is exact.
    """
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise ValueError("mse_loss inputs must share a shape")
    d = x - x_hat
    return float(d @ d) if d.ndim == 1 else float((d * d).sum())


def bce_loss(y_hat, y):
    """Binary cross-entropy with the probability clamped to [1e-7, 1-1e-7]."""
    if not 0.0 <= y_hat <= 1.0:
        raise ValueError(f"probability {y_hat} outside [0, 1]")
    if y not in (0, 1):
        raise ValueError("target must be 0 or 1")
    p = min(max(y_hat, BCE_CLAMP), 1.0 - BCE_CLAMP)
    return float(-(y * np.log(p) + (1 - y) * np.log(1.0 - p)))


# ---------------------------------------------------------------------------
# autoencoder
# ---------------------------------------------------------------------------

@dataclass
class AutoencoderModel:
    """Encoder/decoder dense stacks; decoder output dim equals input dim."""

    encoder: list
    decoder: list
    input_dim: int = 8
    latent_dim: int = 8

    def __post_init__(self):
        if self.encoder[0].n_in != self.input_dim:
            raise ValueError("encoder input dim mismatch")
        if self.encoder[-1].n_out != self.latent_dim:
            raise ValueError("encoder output dim != latent_dim")
        if self.decoder[-1].n_out != self.input_dim:
            raise ValueError("decoder must reconstruct the input dimension")

    def encode(self, x):
        h, _ = stack_forward(self.encoder, x)
        return h

    def reconstruct(self, x):
        """Returns (latent, reconstruction) for a vector or a batch."""
        h, _ = stack_forward(self.encoder, x)
        x_hat, _ = stack_forward(self.decoder, h)
        return h, x_hat

    def anomaly_score(self, x):
        _, x_hat = self.reconstruct(x)
        return mse_loss(x, x_hat)


def autoencoder_init(rng, input_dim=8, hidden_dim=16, latent_dim=8):
    """Default lab architecture: in -> hidden(relu) -> latent -> hidden(relu) -> in."""
    encoder = [
        dense_init(input_dim, hidden_dim, "relu", rng),
        dense_init(hidden_dim, latent_dim, "identity", rng),
    ]
    decoder = [
        dense_init(latent_dim, hidden_dim, "relu", rng),
        dense_init(hidden_dim, input_dim, "identity", rng),
    ]
    return AutoencoderModel(encoder, decoder, input_dim, latent_dim)


def autoencoder_train_step(model, batch, lr):
    """One batch-mean SGD step on the reconstruction error; returns the loss."""
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    h, enc_caches = stack_forward(model.encoder, batch)
    x_hat, dec_caches = stack_forward(model.decoder, h)
    diff = x_hat - batch
    loss = float((diff * diff).sum(axis=1).mean())
    d_xhat = 2.0 * diff / batch.shape[0]
    dec_grads, d_h = stack_backward(model.decoder, dec_caches, d_xhat)
    enc_grads, _ = stack_backward(model.encoder, enc_caches, d_h)
    for layer, (dw, db) in zip(model.decoder, dec_grads):
        layer.w -= lr * dw
        layer.b -= lr * db
    for layer, (dw, db) in zip(model.encoder, enc_grads):
        layer.w -= lr * dw
        layer.b -= lr * db
    return loss


# ---------------------------------------------------------------------------
# LSTM cell and classifier
# ---------------------------------------------------------------------------

@dataclass
class LstmParams:
    """Gate weights [hidden, input+hidden] and biases for one LSTM cell."""

    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def __post_init__(self):
        shape = self.w_i.shape
        for name in ("w_f", "w_o", "w_g"):
            if getattr(self, name).shape != shape:
                raise ValueError("all gate weight blocks must share a shape")
        for name in ("b_i", "b_f", "b_o", "b_g"):
            if getattr(self, name).shape != (shape[0],):
                raise ValueError("gate bias length must equal hidden size")

    @property
    def hidden_dim(self):
        return self.w_i.shape[0]

    @property
    def input_dim(self):
        return self.w_i.shape[1] - self.w_i.shape[0]


def lstm_init(input_dim, hidden_dim, rng):
    bound = 1.0 / np.sqrt(input_dim + hidden_dim)
    def mat():
        return rng.uniform(-bound, bound, size=(hidden_dim, input_dim + hidden_dim))
    def vec():
        return rng.uniform(-bound, bound, size=hidden_dim)
    return LstmParams(mat(), mat(), mat(), mat(), vec(), vec(), vec(), vec())


def lstm_cell_step(params, x, h_prev, c_prev):
    """Standard gate equations; returns the new (h, c)."""
    h, c, _ = _lstm_cell_forward(params, x, h_prev, c_prev)
    return h, c


def _lstm_cell_forward(params, x, h_prev, c_prev):
    x = np.asarray(x, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    if x.shape[0] != params.input_dim or h_prev.shape[0] != params.hidden_dim:
        raise ValueError("lstm step dimension mismatch")
    z = np.concatenate([x, h_prev])
    i = sigmoid(params.w_i @ z + params.b_i)
    f = sigmoid(params.w_f @ z + params.b_f)
    o = sigmoid(params.w_o @ z + params.b_o)
    g = np.tanh(params.w_g @ z + params.b_g)
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = (z, i, f, o, g, c_prev, tanh_c)
    return h, c, cache


@dataclass
class LstmClassifier:
    """LSTM over a feature window followed by a sigmoid read-out head."""

    cell: LstmParams
    head_w: np.ndarray
    head_b: np.ndarray  # 0-d array so the gradient checker can perturb it
    window_len: int = 8

    def __post_init__(self):
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")
        self.head_b = np.asarray(self.head_b, dtype=float)

    def classify(self, window):
        """Attack probability in (0, 1) for a [T, input_dim] window."""
        y_hat, _, _ = _classifier_forward(self, window)
        return y_hat

    def hidden(self, window):
        """Final hidden state h_T for the window (used as DRL state input)."""
        _, hs, _ = _classifier_forward(self, window)
        return hs[-1]


def lstm_classifier_init(input_dim, hidden_dim, window_len, rng):
    cell = lstm_init(input_dim, hidden_dim, rng)
    bound = 1.0 / np.sqrt(hidden_dim)
    head_w = rng.uniform(-bound, bound, size=hidden_dim)
    head_b = np.asarray(rng.uniform(-bound, bound))
    return LstmClassifier(cell, head_w, head_b, window_len)


def _classifier_forward(model, window):
    window = np.atleast_2d(np.asarray(window, dtype=float))
    h = np.zeros(model.cell.hidden_dim)
    c = np.zeros(model.cell.hidden_dim)
    hs, caches = [], []
    for x in window:
        h, c, cache = _lstm_cell_forward(model.cell, x, h, c)
        hs.append(h)
        caches.append(cache)
    logit = float(model.head_w @ h + model.head_b)
    y_hat = float(sigmoid(np.asarray(logit)))
    return y_hat, hs, caches


# ---------------------------------------------------------------------------
# unified parameter access, backward, SGD, gradient check
# ---------------------------------------------------------------------------

def iter_params(model):
    """Yields (name, array) for every trainable parameter of a model.

    Arrays are the live views, so in-place edits (SGD, finite-difference
    probes) hit the model directly.  Supports AutoencoderModel,
    LstmClassifier, and bare dense stacks (lists of DenseParams).
    """
    if isinstance(model, AutoencoderModel):
        for part, layers in (("encoder", model.encoder), ("decoder", model.decoder)):
            for idx, layer in enumerate(layers):
                yield f"{part}.{idx}.w", layer.w
                yield f"{part}.{idx}.b", layer.b
    elif isinstance(model, LstmClassifier):
        cell = model.cell
        for name in ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g"):
            yield f"cell.{name}", getattr(cell, name)
        yield "head_w", model.head_w
        yield "head_b", model.head_b
    elif isinstance(model, (list, tuple)):
        for idx, layer in enumerate(model):
            yield f"{idx}.w", layer.w
            yield f"{idx}.b", layer.b
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")


def _loss_of(model, x, target):
    if isinstance(model, AutoencoderModel):
        ref = np.asarray(x if target is None else target, dtype=float)
        _, x_hat = model.reconstruct(x)
        return mse_loss(ref, x_hat)
    if isinstance(model, LstmClassifier):
        if target is None:
            raise ValueError("classifier loss needs a 0/1 target")
        y_hat, _, _ = _classifier_forward(model, x)
        return bce_loss(y_hat, target)
    if isinstance(model, (list, tuple)):
        if target is None:
            raise ValueError("dense stack loss needs a target vector")
        out, _ = stack_forward(model, x)
        return mse_loss(np.asarray(target, dtype=float), out)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def backward(model, x, target=None):
    """Exact analytic gradients of the model's loss on one input.

    Autoencoder: summed squared reconstruction error against `target`
    (defaults to the input itself).  LstmClassifier: binary cross-entropy
    against a 0/1 target.  Dense stack: summed squared error against a
    target vector.  Returns (loss, {param_name: gradient}).
    """
    if isinstance(model, AutoencoderModel):
        ref = np.asarray(x if target is None else target, dtype=float)
        h, enc_caches = stack_forward(model.encoder, x)
        x_hat, dec_caches = stack_forward(model.decoder, h)
        loss = mse_loss(ref, x_hat)
        d_xhat = 2.0 * (x_hat - ref)
        dec_grads, d_h = stack_backward(model.decoder, dec_caches, d_xhat)
        enc_grads, _ = stack_backward(model.encoder, enc_caches, d_h)
        grads = {}
        for part, g in (("encoder", enc_grads), ("decoder", dec_grads)):
            for idx, (dw, db) in enumerate(g):
                grads[f"{part}.{idx}.w"] = dw
                grads[f"{part}.{idx}.b"] = db
        return loss, grads

    if isinstance(model, LstmClassifier):
        return _classifier_backward(model, x, target)

    if isinstance(model, (list, tuple)):
        tgt = np.asarray(target, dtype=float)
        out, caches = stack_forward(model, x)
        loss = mse_loss(tgt, out)
        stack_grads, _ = stack_backward(model, caches, 2.0 * (out - tgt))
        grads = {}
        for idx, (dw, db) in enumerate(stack_grads):
            grads[f"{idx}.w"] = dw
            grads[f"{idx}.b"] = db
        return loss, grads

    raise TypeError(f"unsupported model type {type(model).__name__}")


def _classifier_backward(model, window, y):
    if y not in (0, 1):
        raise ValueError("classifier target must be 0 or 1")
    window = np.atleast_2d(np.asarray(window, dtype=float))
    y_hat, hs, caches = _classifier_forward(model, window)
    loss = bce_loss(y_hat, y)

    cell = model.cell
    hdim = cell.hidden_dim
    grads = {f"cell.{n}": np.zeros_like(getattr(cell, n))
             for n in ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g")}
    # d(loss)/d(logit) for sigmoid + BCE; the clamp is inactive in (eps, 1-eps)
    d_logit = y_hat - y
    grads["head_w"] = d_logit * hs[-1]
    grads["head_b"] = np.asarray(d_logit)

    dh = d_logit * model.head_w
    dc = np.zeros(hdim)
    for t in range(len(window) - 1, -1, -1):
        z, i, f, o, g, c_prev, tanh_c = caches[t]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        da_i = di * i * (1.0 - i)
        da_f = df * f * (1.0 - f)
        da_o = do * o * (1.0 - o)
        da_g = dg * (1.0 - g * g)
        grads["cell.w_i"] += np.outer(da_i, z)
        grads["cell.w_f"] += np.outer(da_f, z)
        grads["cell.w_o"] += np.outer(da_o, z)
        grads["cell.w_g"] += np.outer(da_g, z)
        grads["cell.b_i"] += da_i
        grads["cell.b_f"] += da_f
        grads["cell.b_o"] += da_o
        grads["cell.b_g"] += da_g
        dz = (cell.w_i.T @ da_i + cell.w_f.T @ da_f
              + cell.w_o.T @ da_o + cell.w_g.T @ da_g)
        dh = dz[cell.input_dim:]
        dc = dc * f
    return loss, grads


def apply_gradients(model, grads, lr):
    """Plain SGD: every parameter p <- p - lr * grad."""
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    for name, param in iter_params(model):
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for {name}")
        param -= lr * np.asarray(g)
    return model


@dataclass
class GradCheckReport:
    max_rel_error: float
    param_count: int
    epsilon_used: float
    worst_param: str = ""


def grad_check(model, x, target=None, epsilon=1e-5):
    """Compare analytic gradients against central finite differences.

    Relative error per entry is |a - n| / max(|a|, |n|, 1e-3); the guard in
    the denominator keeps finite-difference noise on near-zero gradients
    from registering as error while still catching a corrupted entry.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    _, grads = backward(model, x, target)
    max_rel = 0.0
    worst = ""
    count = 0
    for name, param in iter_params(model):
        analytic = np.atleast_1d(np.asarray(grads[name], dtype=float)).ravel()
        flat = param.reshape(-1)
        for j in range(flat.shape[0]):
            orig = flat[j]
            flat[j] = orig + epsilon
            up = _loss_of(model, x, target)
            flat[j] = orig - epsilon
            down = _loss_of(model, x, target)
            flat[j] = orig
            numeric = (up - down) / (2.0 * epsilon)
            denom = max(abs(analytic[j]), abs(numeric), 1e-3)
            rel = abs(analytic[j] - numeric) / denom
            if rel > max_rel:
                max_rel = rel
                worst = f"{name}[{j}]"
            count += 1
    return GradCheckReport(max_rel, count, epsilon, worst)


# ---------------------------------------------------------------------------
# checkpoint text format
# ---------------------------------------------------------------------------
#
# Versioned, self-describing, line-oriented text:
#
#   edgeids-checkpoint 1
#   model <name> <kind>          kind in {autoencoder, lstm_classifier, dense_stack}
#   meta <key> <value>           integer metadata (dims, window length)
#   section <name> <n_layers>    dense stacks only
#   dense <out> <in> <activation>
#   w <row-major floats>
#   b <floats>
#   lstm <hidden> <input>        followed by w_i/w_f/w_o/w_g/b_* and head lines
#   end
#
# Floats are written with repr(), which round-trips exactly in Python, so
# the documented < 1e-12 round-trip error holds with margin.

CHECKPOINT_TAG = "edgeids-checkpoint"
CHECKPOINT_VERSION = 1


def _write_array(out, label, arr):
    flat = np.asarray(arr, dtype=float).reshape(-1)
    out.write(label + " " + " ".join(repr(float(v)) for v in flat) + "\n")


def _write_dense_stack(out, section, layers):
    out.write(f"section {section} {len(layers)}\n")
    for layer in layers:
        out.write(f"dense {layer.n_out} {layer.n_in} {layer.activation}\n")
        _write_array(out, "w", layer.w)
        _write_array(out, "b", layer.b)


def save_checkpoint(models, path):
    """Write a named set of models to the versioned text format."""
    with open(path, "w", encoding="ascii") as out:
        out.write(f"{CHECKPOINT_TAG} {CHECKPOINT_VERSION}\n")
        for name, model in models.items():
            if isinstance(model, AutoencoderModel):
                out.write(f"model {name} autoencoder\n")
                out.write(f"meta input_dim {model.input_dim}\n")
                out.write(f"meta latent_dim {model.latent_dim}\n")
                _write_dense_stack(out, "encoder", model.encoder)
                _write_dense_stack(out, "decoder", model.decoder)
            elif isinstance(model, LstmClassifier):
                out.write(f"model {name} lstm_classifier\n")
                out.write(f"meta window_len {model.window_len}\n")
                cell = model.cell
                out.write(f"lstm {cell.hidden_dim} {cell.input_dim}\n")
                for gate in ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g"):
                    _write_array(out, gate, getattr(cell, gate))
                _write_array(out, "head_w", model.head_w)
                _write_array(out, "head_b", model.head_b)
            elif isinstance(model, (list, tuple)):
                out.write(f"model {name} dense_stack\n")
                _write_dense_stack(out, "layers", list(model))
            else:
                raise TypeError(f"cannot checkpoint {type(model).__name__}")
        out.write("end\n")


class _LineReader:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self):
        if self.pos >= len(self.lines):
            raise CheckpointError("truncated checkpoint file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None


def _read_array(reader, label, shape):
    line = reader.next()
    parts = line.split()
    if not parts or parts[0] != label:
        raise CheckpointError(f"expected {label!r} line, got {line[:40]!r}")
    values = np.array([float(v) for v in parts[1:]])
    n = int(np.prod(shape))
    if values.shape[0] != n:
        raise CheckpointError(
            f"{label} expects {n} values, found {values.shape[0]}"
        )
    return values.reshape(shape)


def _read_dense_stack(reader, section):
    header = reader.next().split()
    if len(header) != 3 or header[0] != "section" or header[1] != section:
        raise CheckpointError(f"expected section {section!r}")
    layers = []
    for _ in range(int(header[2])):
        spec = reader.next().split()
        if len(spec) != 4 or spec[0] != "dense":
            raise CheckpointError("malformed dense layer header")
        n_out, n_in, activation = int(spec[1]), int(spec[2]), spec[3]
        w = _read_array(reader, "w", (n_out, n_in))
        b = _read_array(reader, "b", (n_out,))
        layers.append(DenseParams(w, b, activation))
    return layers


def load_checkpoint(path):
    """Read a checkpoint file; raises CheckpointError on any defect."""
    with open(path, "r", encoding="ascii") as f:
        reader = _LineReader(f.read())
    head = reader.next().split()
    if len(head) != 2 or head[0] != CHECKPOINT_TAG:
        raise CheckpointError("not a checkpoint file")
    if int(head[1]) != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {head[1]}")
    models = {}
    saw_end = False
    while True:
        line = reader.peek()
        if line is None:
            break
        if line.strip() == "end":
            saw_end = True
            break
        fields = reader.next().split()
        if len(fields) != 3 or fields[0] != "model":
            raise CheckpointError(f"malformed model header {line[:40]!r}")
        name, kind = fields[1], fields[2]
        meta = {}
        while reader.peek() is not None and reader.peek().startswith("meta "):
            _, key, value = reader.next().split()
            meta[key] = int(value)
        if kind == "autoencoder":
            encoder = _read_dense_stack(reader, "encoder")
            decoder = _read_dense_stack(reader, "decoder")
            models[name] = AutoencoderModel(
                encoder, decoder, meta["input_dim"], meta["latent_dim"]
            )
        elif kind == "lstm_classifier":
            spec = reader.next().split()
            if len(spec) != 3 or spec[0] != "lstm":
                raise CheckpointError("malformed lstm header")
            hidden, inp = int(spec[1]), int(spec[2])
            gshape = (hidden, inp + hidden)
            gates = {g: _read_array(reader, g, gshape)
                     for g in ("w_i", "w_f", "w_o", "w_g")}
            biases = {b: _read_array(reader, b, (hidden,))
                      for b in ("b_i", "b_f", "b_o", "b_g")}
            head_w = _read_array(reader, "head_w", (hidden,))
            head_b = _read_array(reader, "head_b", ())
            models[name] = LstmClassifier(
                LstmParams(**gates, **biases), head_w, head_b, meta["window_len"]
            )
        elif kind == "dense_stack":
            models[name] = _read_dense_stack(reader, "layers")
        else:
            raise CheckpointError(f"unknown model kind {kind!r}")
    if not saw_end:
        raise CheckpointError("truncated checkpoint file (missing end marker)")
    return models
