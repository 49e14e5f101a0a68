"""Masked feedforward networks with hand-rolled reverse-mode gradients.

The effective weight of every layer is weight * mask, maintained as an
invariant: weights are masked at initialization and re-masked after every
optimizer step, so structural zeros stay exactly zero through training.
Hidden layers use ReLU; the head is either ``binary`` (d logits) or
``gaussian`` (2d outputs: means then log-sigmas, the final mask stacked twice
vertically).
"""

from dataclasses import dataclass

import numpy as np

from . import factorizer
from .errors import (
    ConfigError,
    DimMismatchError,
    InvalidDimError,
    NonBinaryInputError,
    NonFiniteInputError,
    ParseError,
)

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
LOG_SIGMA_CLAMP = 7.0


class MaskedMLP:
    """Feedforward network whose weights are elementwise-masked.

    ``pattern`` records the input-dependency pattern the network claims to
    respect (the binary sparsity pattern of the mask product, before any head
    duplication); audits and checkpoints use it.
    """

    def __init__(self, weights, biases, masks, head, pattern):
        self.weights = weights
        self.biases = biases
        self.masks = masks
        self.head = head
        self.pattern = np.asarray(pattern, dtype=np.int64)

    @property
    def dim(self):
        return self.masks[0].shape[1]

    @property
    def out_dim(self):
        return self.masks[-1].shape[0]

    @classmethod
    def from_masks(cls, masks, head, rng):
        """Build a network from a factorization mask list (input side first).

        Initialization is Kaiming-uniform with each row's fan-in counted from
        its mask row, then masked.  Biases start at zero.
        """
        if head not in ("binary", "gaussian"):
            raise ConfigError(f"unknown head {head!r}")
        if not masks:
            raise InvalidDimError("mask list is empty")
        masks = [np.asarray(M, dtype=np.float64) for M in masks]
        pattern = (factorizer.mask_product(masks) > 0).astype(np.int64)
        if head == "gaussian":
            masks = masks[:-1] + [np.vstack([masks[-1], masks[-1]])]
        rng = np.random.default_rng(rng)
        weights, biases = [], []
        for M in masks:
            fan_in = np.maximum(M.sum(axis=1), 1.0)
            bound = np.sqrt(6.0 / fan_in)[:, None]
            W = rng.uniform(-1.0, 1.0, size=M.shape) * bound * M
            weights.append(W)
            biases.append(np.zeros(M.shape[0]))
        return cls(weights, biases, masks, head, pattern)

    def apply_masks(self):
        """Re-impose the structural zeros (call after every optimizer step)."""
        for W, M in zip(self.weights, self.masks):
            W *= M

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimMismatchError(f"expected inputs of width {self.dim}, got shape {x.shape}")
        if not np.isfinite(x).all():
            raise NonFiniteInputError("non-finite value in network input")
        return x, squeeze

    def forward(self, x):
        """Batch forward pass; 1-D input returns a 1-D output."""
        x, squeeze = self._check_input(x)
        h = x
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W.T + b, 0.0)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out[0] if squeeze else out

    def forward_cached(self, x):
        """Forward pass that keeps layer inputs/pre-activations for backward."""
        x, _ = self._check_input(x)
        inputs, preacts = [], []
        h = x
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            inputs.append(h)
            z = h @ W.T + b
            preacts.append(z)
            h = np.maximum(z, 0.0)
        inputs.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out, (inputs, preacts)

    def backward(self, cache, grad_out):
        """Reverse-mode pass from an output gradient.

        Returns ((weight_grads, bias_grads), grad_input).  Gradients are dense;
        masked positions are irrelevant because updates get re-masked.
        """
        inputs, preacts = cache
        weight_grads = [None] * len(self.weights)
        bias_grads = [None] * len(self.biases)
        delta = np.asarray(grad_out, dtype=np.float64)
        weight_grads[-1] = delta.T @ inputs[-1]
        bias_grads[-1] = delta.sum(axis=0)
        grad_h = delta @ self.weights[-1]
        for layer in range(len(self.weights) - 2, -1, -1):
            delta = grad_h * (preacts[layer] > 0.0)
            weight_grads[layer] = delta.T @ inputs[layer]
            bias_grads[layer] = delta.sum(axis=0)
            grad_h = delta @ self.weights[layer]
        return (weight_grads, bias_grads), grad_h

    def params(self):
        return self.weights + self.biases

    def snapshot(self):
        return [p.copy() for p in self.params()]

    def restore(self, snap):
        for p, s in zip(self.params(), snap):
            p[...] = s


def _check_binary(x):
    x = np.asarray(x, dtype=np.float64)
    if ((x != 0.0) & (x != 1.0)).any():
        raise NonBinaryInputError("binary NLL requires entries in {0, 1}")
    return x


def nll_binary(net, x):
    """Negative log-likelihood of binary vectors under the logit head.

    Uses the numerically stable form softplus(o) - x * o per coordinate.
    Scalar for a single vector, per-sample array for a batch.
    """
    if net.head != "binary":
        raise ConfigError("nll_binary needs a binary-head network")
    x = _check_binary(x)
    o = net.forward(x)
    per = np.logaddexp(0.0, o) - x * o
    return per.sum(axis=-1)


def gaussian_outputs(net, x):
    """Means and clamped log-sigmas from a gaussian-head network."""
    if net.head != "gaussian":
        raise ConfigError("gaussian outputs need a gaussian-head network")
    out = net.forward(x)
    d = net.dim
    mu = out[..., :d]
    log_sigma = np.clip(out[..., d:], -LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP)
    return mu, log_sigma


def nll_gaussian(net, x):
    """Negative log-likelihood of real vectors under the heteroscedastic head:
    sum_j log sigma_j + 0.5 log 2 pi + (x_j - mu_j)^2 / (2 sigma_j^2)."""
    mu, log_sigma = gaussian_outputs(net, x)
    x = np.asarray(x, dtype=np.float64)
    sq = (x - mu) ** 2
    per = log_sigma + HALF_LOG_2PI + sq * np.exp(-2.0 * log_sigma) / 2.0
    return per.sum(axis=-1)


def nll(net, x):
    return nll_binary(net, x) if net.head == "binary" else nll_gaussian(net, x)


def mean_nll(net, x):
    return float(np.mean(nll(net, x)))


def loss_and_grads(net, x):
    """Mean NLL over the batch and its gradients w.r.t. every parameter."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out, cache = net.forward_cached(x)
    d = net.dim
    if net.head == "binary":
        x = _check_binary(x)
        p = 1.0 / (1.0 + np.exp(-out))
        loss = float(np.mean(np.sum(np.logaddexp(0.0, out) - x * out, axis=1)))
        grad_out = (p - x) / n
    else:
        mu = out[:, :d]
        raw = out[:, d:]
        log_sigma = np.clip(raw, -LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP)
        inv_var = np.exp(-2.0 * log_sigma)
        sq = (x - mu) ** 2
        loss = float(np.mean(np.sum(log_sigma + HALF_LOG_2PI + sq * inv_var / 2.0, axis=1)))
        g_mu = (mu - x) * inv_var / n
        in_range = (np.abs(raw) < LOG_SIGMA_CLAMP).astype(np.float64)
        g_raw = (1.0 - sq * inv_var) * in_range / n
        grad_out = np.concatenate([g_mu, g_raw], axis=1)
    grads, _ = net.backward(cache, grad_out)
    return loss, grads


class AdamW:
    """Adam with decoupled weight decay over a flat list of parameter arrays."""

    def __init__(self, params, learning_rate, weight_decay=0.0,
                 beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = learning_rate
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** self.t)
            v_hat = v / (1.0 - b2 ** self.t)
            p -= self.lr * (m_hat / (np.sqrt(v_hat) + self.epsilon)
                            + self.weight_decay * p)


@dataclass
class TrainConfig:
    """Optimization settings shared by network and flow training."""

    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 200
    max_epochs: int = 200
    early_stop_patience: int = 50
    seed: int = 0
    lr_schedule: str = "fixed"
    plateau_factor: float = 0.1
    plateau_patience: int = 5
    epsilon: float = 1e-8

    def validate(self):
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")
        if self.early_stop_patience < 1 or self.plateau_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if not (0.0 < self.plateau_factor <= 1.0):
            raise ConfigError("plateau_factor must lie in (0, 1]")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.lr_schedule not in ("fixed", "plateau"):
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        return self


@dataclass
class Dataset:
    """A data matrix with frozen train/val/test index partitions."""

    x: np.ndarray
    kind: str
    idx_train: np.ndarray
    idx_val: np.ndarray
    idx_test: np.ndarray

    @property
    def train_x(self):
        return self.x[self.idx_train]

    @property
    def val_x(self):
        return self.x[self.idx_val]

    @property
    def test_x(self):
        return self.x[self.idx_test]


def _minibatches(n, batch_size, perm):
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def train(net, dataset, config, loss_fn=None):
    """AdamW training with optional plateau schedule and early stopping.

    ``loss_fn(batch) -> (loss, flat_grads)`` (gradients aligned with
    ``net.params()``) defaults to the head NLL of ``net``; flow training
    passes its own closure.  Validation NLL drives both the
    plateau schedule and early stopping; the parameters from the best
    validation epoch are restored at the end.  Deterministic given
    (seed, config, dataset).  Returns (net, history) where history rows are
    (epoch, train_nll, val_nll, lr).
    """
    config.validate()
    if loss_fn is None:
        def loss_fn(batch):
            loss, grads = loss_and_grads(net, batch)
            return loss, _flatten_grads(grads)

    def eval_fn(x):
        return mean_nll(net, x)

    return _optimize(net, dataset, config, loss_fn, eval_fn)


def _optimize(model, dataset, config, loss_fn, eval_fn):
    rng = np.random.default_rng(config.seed)
    params = model.params()
    opt = AdamW(params, config.learning_rate, config.weight_decay,
                epsilon=config.epsilon)
    train_x = dataset.train_x
    n = train_x.shape[0]
    history = []
    best_val = np.inf
    best_snap = model.snapshot()
    stall = 0
    plateau_stall = 0
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        for idx in _minibatches(n, config.batch_size, perm):
            _, grads = loss_fn(train_x[idx])
            opt.step(params, grads)
            model.apply_masks()
        train_nll = eval_fn(train_x)
        val_nll = eval_fn(dataset.val_x)
        history.append((epoch, train_nll, val_nll, opt.lr))
        if val_nll < best_val:
            best_val = val_nll
            best_snap = model.snapshot()
            stall = 0
            plateau_stall = 0
        else:
            stall += 1
            plateau_stall += 1
        if config.lr_schedule == "plateau" and plateau_stall >= config.plateau_patience:
            opt.lr *= config.plateau_factor
            plateau_stall = 0
        if stall >= config.early_stop_patience:
            break
    model.restore(best_snap)
    return model, history


def _flatten_grads(grads):
    weight_grads, bias_grads = grads
    return weight_grads + bias_grads


def test_summary(net, dataset):
    """Mean test NLL and its standard error across the test set."""
    per = nll(net, dataset.test_x)
    n = len(per)
    stderr = float(np.std(per, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(np.mean(per)), stderr


def audit_invariance(net, rng, n_probes=4, deltas=(1.0, -2.5, 10.0)):
    """Exhaustive perturbation audit of structural independence.

    For every input j and output row i whose dependency pattern forbids the
    edge, perturbing coordinate j must leave output i exactly unchanged
    (float equality).  Returns a list of violations (i, j, max_abs_diff);
    an empty list means the audit passed.
    """
    rng = np.random.default_rng(rng)
    d = net.dim
    pattern = net.pattern
    if net.head == "gaussian":
        pattern = np.vstack([pattern, pattern])
    base = rng.normal(0.0, 2.0, size=(n_probes, d))
    y0 = net.forward(base)
    found = {}
    for j in range(d):
        free = np.flatnonzero(pattern[:, j] == 0)
        if len(free) == 0:
            continue
        for delta in deltas:
            for mode in ("shift", "set"):
                x1 = base.copy()
                x1[:, j] = x1[:, j] + delta if mode == "shift" else delta
                diff = np.abs(net.forward(x1)[:, free] - y0[:, free])
                col_max = diff.max(axis=0)
                for k in np.flatnonzero(col_max > 0.0):
                    key = (int(free[k]), j)
                    found[key] = max(found.get(key, 0.0), float(col_max[k]))
    return [(i, j, worst) for (i, j), worst in sorted(found.items())]


# ---------------------------------------------------------------------------
# Checkpoint format: line-oriented structured text, bitwise round trip.

def _fmt_floats(a):
    return " ".join(repr(float(v)) for v in np.asarray(a).ravel())


def write_array_block(fh, name, a):
    a = np.asarray(a)
    r, c = (a.shape if a.ndim == 2 else (1, a.shape[0]))
    fh.write(f"{name}\n{r} {c}\n")
    if a.ndim == 2:
        for row in a:
            fh.write(_fmt_floats(row) + "\n")
    else:
        fh.write(_fmt_floats(a) + "\n")


class Reader:
    def __init__(self, path, lines):
        self.path = path
        self.lines = lines
        self.pos = 0

    def next_line(self):
        if self.pos >= len(self.lines):
            raise ParseError(self.path, self.pos + 1, "unexpected end of checkpoint")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, token):
        line = self.next_line()
        if line.split()[0] != token:
            raise ParseError(self.path, self.pos, f"expected {token!r}, got {line!r}")
        return line

    def read_array_block(self, name, dtype=np.float64):
        self.expect(name)
        dims = self.next_line().split()
        if len(dims) != 2:
            raise ParseError(self.path, self.pos, "array block needs 'rows cols'")
        r, c = int(dims[0]), int(dims[1])
        rows = []
        for _ in range(r):
            vals = self.next_line().split()
            if len(vals) != c:
                raise ParseError(self.path, self.pos, f"expected {c} values per row")
            rows.append([float(v) for v in vals])
        return np.asarray(rows, dtype=dtype)


def write_mlp_body(fh, net):
    fh.write(f"head {net.head}\n")
    fh.write(f"dim {net.dim}\n")
    fh.write(f"layers {len(net.weights)}\n")
    write_array_block(fh, "pattern", net.pattern)
    for k, (W, b, M) in enumerate(zip(net.weights, net.biases, net.masks)):
        write_array_block(fh, f"mask {k}", M)
        write_array_block(fh, f"weight {k}", W)
        write_array_block(fh, f"bias {k}", b)


def read_mlp_body(reader):
    head = reader.expect("head").split()[1]
    reader.expect("dim")
    n_layers = int(reader.expect("layers").split()[1])
    pattern = reader.read_array_block("pattern", dtype=np.int64)
    weights, biases, masks = [], [], []
    for _ in range(n_layers):
        masks.append(reader.read_array_block("mask"))
        weights.append(reader.read_array_block("weight"))
        biases.append(reader.read_array_block("bias").ravel())
    return MaskedMLP(weights, biases, masks, head, pattern)


def save_mlp(net, path):
    """Write a network checkpoint; load_mlp(save) reproduces outputs bitwise."""
    with open(path, "w") as fh:
        fh.write("strnn-checkpoint 1\n")
        fh.write("kind mlp\n")
        write_mlp_body(fh, net)
        fh.write("end\n")


def load_mlp(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() != ""]
    reader = Reader(path, lines)
    reader.expect("strnn-checkpoint")
    kind = reader.expect("kind").split()[1]
    if kind != "mlp":
        raise ParseError(path, reader.pos, f"expected an mlp checkpoint, found {kind!r}")
    net = read_mlp_body(reader)
    reader.expect("end")
    return net
