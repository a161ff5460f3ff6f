"""Activations, parameter flattening and a finite-difference gradient oracle.

Everything here works on plain numpy arrays. The activations are elementwise
and accept scalars or arrays of any shape.
"""

import numpy as np


def sigmoid(x):
    """Logistic function, stable for large positive and negative inputs."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def tanh_act(x):
    out = np.tanh(np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


def softmax(v):
    """Softmax of a 1-D vector (max-subtracted).

    Kept for completeness; the forecaster itself uses an affine readout.
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(v - v.max())
    return e / e.sum()


def finite_difference_gradient(loss_fn, theta, eps=1e-5):
    """Central-difference gradient of ``loss_fn`` at ``theta``.

    Parameters
    ----------
    loss_fn : callable
        Maps a flat parameter vector to a scalar loss. Must be deterministic.
    theta : array_like
        Point at which to differentiate.
    eps : float
        Perturbation size.

    Returns
    -------
    ndarray
        ``(f(theta + eps e_k) - f(theta - eps e_k)) / (2 eps)`` for every k.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    theta = np.array(theta, dtype=float)
    grad = np.empty_like(theta)
    for k in range(theta.size):
        old = theta[k]
        theta[k] = old + eps
        plus = loss_fn(theta)
        theta[k] = old - eps
        minus = loss_fn(theta)
        theta[k] = old
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise FloatingPointError(f"non-finite loss when perturbing coordinate {k}")
        grad[k] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(a, b):
    """Elementwise ``|a - b| / max(1e-8, |a| + |b|)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))


# Flat layout: W_f, b_f, W_j, b_j, W_C, b_C, W_o, b_o, W_v, b_v (row-major).
PARAM_ORDER = ("W_f", "b_f", "W_j", "b_j", "W_c", "b_c", "W_o", "b_o", "W_v", "b_v")


def param_shapes(input_size, hidden_size, readout_extras=0):
    """Shapes of every parameter block, in packing order."""
    H, D, E = hidden_size, input_size, readout_extras
    gate = (H, H + D)
    return {
        "W_f": gate, "b_f": (H,),
        "W_j": gate, "b_j": (H,),
        "W_c": gate, "b_c": (H,),
        "W_o": gate, "b_o": (H,),
        "W_v": (1, H + E), "b_v": (),
    }


def param_count(input_size, hidden_size, readout_extras=0):
    shapes = param_shapes(input_size, hidden_size, readout_extras)
    return sum(int(np.prod(s)) for s in shapes.values())


def pack_params(params):
    """Flatten an :class:`~dlstm.lstm.LstmParams` into one vector."""
    return np.concatenate(
        [np.ravel(np.asarray(getattr(params, name), dtype=float)) for name in PARAM_ORDER]
    )


def unpack_params(flat, input_size, hidden_size, readout_extras=0):
    """Inverse of :func:`pack_params`."""
    from .lstm import LstmParams

    flat = np.asarray(flat, dtype=float)
    shapes = param_shapes(input_size, hidden_size, readout_extras)
    expected = param_count(input_size, hidden_size, readout_extras)
    if flat.ndim != 1 or flat.size != expected:
        raise ValueError(f"expected a flat vector of length {expected}, got shape {flat.shape}")
    blocks = {}
    pos = 0
    for name in PARAM_ORDER:
        shape = shapes[name]
        size = int(np.prod(shape))
        chunk = flat[pos:pos + size].copy()
        blocks[name] = float(chunk[0]) if shape == () else chunk.reshape(shape)
        pos += size
    return LstmParams(input_size=input_size, hidden_size=hidden_size,
                      readout_extras=readout_extras, **blocks)
