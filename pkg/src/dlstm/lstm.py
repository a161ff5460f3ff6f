"""Single-layer LSTM regressor with an affine readout and exact BPTT gradients.

Gate pre-activations act on the concatenation ``[h_{t-1}, x_t]`` (hidden state
first). The readout sees the last hidden state followed by the sample's
exogenous ``readout_context`` features.
"""

from dataclasses import dataclass, field

import numpy as np

from .numerics import pack_params, sigmoid, unpack_params

GATES = ("f", "j", "c", "o")


@dataclass
class LstmParams:
    input_size: int
    hidden_size: int
    readout_extras: int
    W_f: np.ndarray
    b_f: np.ndarray
    W_j: np.ndarray
    b_j: np.ndarray
    W_c: np.ndarray
    b_c: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray
    W_v: np.ndarray
    b_v: float

    @property
    def dims(self):
        return self.input_size, self.hidden_size, self.readout_extras

    def flat(self):
        return pack_params(self)

    @classmethod
    def from_flat(cls, flat, input_size, hidden_size, readout_extras=0):
        return unpack_params(flat, input_size, hidden_size, readout_extras)

    @classmethod
    def zeros(cls, input_size, hidden_size, readout_extras=0):
        from .numerics import param_count
        n = param_count(input_size, hidden_size, readout_extras)
        return unpack_params(np.zeros(n), input_size, hidden_size, readout_extras)


@dataclass
class CellState:
    h: np.ndarray
    c: np.ndarray


@dataclass
class SequenceSample:
    steps: np.ndarray  # (T, D)
    readout_context: np.ndarray  # (E,)
    target: float

    def __post_init__(self):
        self.steps = np.atleast_2d(np.asarray(self.steps, dtype=float))
        self.readout_context = np.asarray(self.readout_context, dtype=float).reshape(-1)
        self.target = float(self.target)


@dataclass
class Batch:
    """Samples stacked into arrays: ``X`` (B, T, D), ``ctx`` (B, E), ``y`` (B,)."""

    X: np.ndarray
    ctx: np.ndarray
    y: np.ndarray
    samples: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.y)


def stack(samples):
    """Stack a list of samples sharing ``T``, ``D`` and ``E`` into a :class:`Batch`."""
    if isinstance(samples, Batch):
        return samples
    samples = list(samples)
    if not samples:
        raise ValueError("empty batch")
    shapes = {(s.steps.shape, s.readout_context.shape) for s in samples}
    if len(shapes) != 1:
        raise ValueError(f"samples have inconsistent shapes: {sorted(shapes)}")
    return Batch(
        X=np.stack([s.steps for s in samples]),
        ctx=np.stack([s.readout_context for s in samples]),
        y=np.array([s.target for s in samples]),
        samples=samples,
    )


def init_params(input_size, hidden_size, readout_extras=0, seed=0):
    """Uniform ``[-1/sqrt(H), 1/sqrt(H)]`` weights, zero biases, forget bias 1."""
    if input_size < 1 or hidden_size < 1:
        raise ValueError("input_size and hidden_size must be at least 1")
    rng = np.random.default_rng(seed)
    H, D, E = hidden_size, input_size, readout_extras
    bound = 1.0 / np.sqrt(H)
    blocks = {}
    for g in GATES:
        blocks[f"W_{g}"] = rng.uniform(-bound, bound, size=(H, H + D))
        blocks[f"b_{g}"] = np.zeros(H)
    blocks["b_f"] = np.ones(H)
    blocks["W_v"] = rng.uniform(-bound, bound, size=(1, H + E))
    blocks["b_v"] = 0.0
    return LstmParams(input_size=D, hidden_size=H, readout_extras=E, **blocks)


def cell_forward(p, prev, x_t):
    """One LSTM step.

    Works for a single sample (``x_t`` of shape ``(D,)``) or a stacked batch
    (``(B, D)``). Returns the new :class:`CellState` and a cache dict holding
    the gate activations and everything the backward pass needs.
    """
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape[-1] != p.input_size:
        raise ValueError(f"input has {x_t.shape[-1]} features, model expects {p.input_size}")
    if prev.h.shape[-1] != p.hidden_size or prev.c.shape[-1] != p.hidden_size:
        raise ValueError("previous state does not match hidden_size")
    z = np.concatenate([prev.h, x_t], axis=-1)
    f = sigmoid(z @ p.W_f.T + p.b_f)
    j = sigmoid(z @ p.W_j.T + p.b_j)
    c_hat = np.tanh(z @ p.W_c.T + p.b_c)
    o = sigmoid(z @ p.W_o.T + p.b_o)
    c = f * prev.c + j * c_hat
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = dict(z=z, f=f, j=j, c_hat=c_hat, o=o, c_prev=prev.c, tanh_c=tanh_c)
    return CellState(h=h, c=c), cache


def _forward(p, batch):
    B, T, _ = batch.X.shape
    if batch.ctx.shape[1] != p.readout_extras:
        raise ValueError(f"readout context has {batch.ctx.shape[1]} features, "
                         f"model expects {p.readout_extras}")
    state = CellState(h=np.zeros((B, p.hidden_size)), c=np.zeros((B, p.hidden_size)))
    caches = []
    for t in range(T):
        state, cache = cell_forward(p, state, batch.X[:, t, :])
        caches.append(cache)
    r = np.concatenate([state.h, batch.ctx], axis=1)
    y = r @ p.W_v[0] + p.b_v
    return y, r, caches


def predict_batch(p, samples):
    """Forecasts for every sample, as an array."""
    y, _, _ = _forward(p, stack(samples))
    return y


def predict(p, s):
    """Run the sequence from a zero state and apply the affine readout."""
    if len(s.steps) == 0:
        raise ValueError("sample has no steps")
    return float(predict_batch(p, [s])[0])


def empirical_loss(p, batch):
    """Mean squared error over the batch."""
    b = stack(batch)
    y, _, _ = _forward(p, b)
    return float(np.mean((y - b.y) ** 2))


def loss_and_gradient(p, batch):
    """Mean squared error and its exact gradient, in packed order.

    Per-sample contributions are summed by numpy reductions over the batch
    axis, which are order-fixed for a given batch, so results are
    reproducible.
    """
    b = stack(batch)
    y, r, caches = _forward(p, b)
    bad = (~np.isfinite(y) | ~np.isfinite(b.y) | ~np.isfinite(b.X).all(axis=(1, 2))
           | ~np.isfinite(b.ctx).all(axis=1))
    if bad.any():
        raise FloatingPointError(f"non-finite value in sample {int(np.flatnonzero(bad)[0])}")
    n = len(b)
    H = p.hidden_size
    resid = y - b.y
    loss = float(np.mean(resid ** 2))
    dy = 2.0 * resid / n

    grads = {f"W_{g}": np.zeros_like(getattr(p, f"W_{g}")) for g in GATES}
    grads.update({f"b_{g}": np.zeros(H) for g in GATES})
    grads["W_v"] = (dy @ r)[None, :]
    grads["b_v"] = float(dy.sum())

    dh = np.outer(dy, p.W_v[0, :H])
    dc = np.zeros_like(dh)
    for cache in reversed(caches):
        f, j, c_hat, o, tanh_c = (cache[k] for k in ("f", "j", "c_hat", "o", "tanh_c"))
        da_o = dh * tanh_c * o * (1.0 - o)
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        da_f = dc * cache["c_prev"] * f * (1.0 - f)
        da_j = dc * c_hat * j * (1.0 - j)
        da_c = dc * j * (1.0 - c_hat ** 2)
        dc = dc * f
        dz = np.zeros_like(cache["z"])
        for g, da in (("f", da_f), ("j", da_j), ("c", da_c), ("o", da_o)):
            grads[f"W_{g}"] += da.T @ cache["z"]
            grads[f"b_{g}"] += da.sum(axis=0)
            dz += da @ getattr(p, f"W_{g}")
        dh = dz[:, :H]

    flat = pack_params(LstmParams(*p.dims, **grads))
    if not np.all(np.isfinite(flat)):
        raise FloatingPointError("non-finite gradient")
    return loss, flat


def backward_bptt(p, batch):
    """Gradient of :func:`empirical_loss` w.r.t. every parameter, packed."""
    return loss_and_gradient(p, batch)[1]
