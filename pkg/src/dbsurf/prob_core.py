"""Probability vectors, parameterizations and sample discrepancy.

Arrays are plain float64 numpy arrays. Validators return read-only copies so a
probability vector handed to a sampler cannot be mutated underneath it.

Bernoulli samples are ``(n, d)`` arrays of 0/1. Categorical samples are one-hot
along the last axis: ``(n, m)`` for a single slot or ``(n, k, m)`` for ``k``
independent slots.
"""

import numpy as np

ROW_SUM_TOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def as_prob_vector(p):
    """Validate Bernoulli success probabilities; scalars become length-1 vectors."""
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probability vector must be 1-D and non-empty")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError(f"probabilities must lie in [0, 1], got {p.tolist()}")
    return _frozen(p)


def as_categorical_rows(rows):
    """Validate one categorical row ``(m,)`` or a stack of rows ``(k, m)``."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim not in (1, 2) or rows.shape[-1] == 0:
        raise ValueError("categorical rows must have shape (m,) or (k, m)")
    if not np.all(np.isfinite(rows)) or np.any(rows < 0.0):
        raise ValueError("categorical probabilities must be finite and non-negative")
    sums = rows.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
        raise ValueError(f"categorical rows must sum to 1, got sums {np.atleast_1d(sums).tolist()}")
    return _frozen(rows)


def as_logits(theta):
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ValueError("logits must be finite")
    return theta


def sigmoid(theta):
    """Componentwise logistic function ``1 / (1 + exp(-theta))``.

    Evaluated in a form that never overflows; saturates to exactly 0 or 1 for
    very large ``|theta|``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    out = np.empty_like(theta)
    pos = theta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-theta[pos]))
    e = np.exp(theta[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def softmax(theta, axis=-1):
    """Softmax along ``axis`` with max-subtraction for stability."""
    theta = np.asarray(theta, dtype=np.float64)
    z = np.exp(theta - theta.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def update_running_mean(p_hat, x, i):
    """One step of the running average ``((i - 1) * p_hat + x) / i`` for 1-based ``i``.

    Shared by the samplers and the enumeration oracle so both produce the same
    floating-point values.
    """
    return ((i - 1) * p_hat + x) / i


def as_samples(samples):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] == 0:
        raise ValueError("sample set is empty")
    if not np.all((samples == 0.0) | (samples == 1.0)):
        raise ValueError("samples must be 0/1 valued")
    return samples


def empirical_mean(samples):
    """Componentwise average of the sample rows, accumulated as a running mean."""
    samples = as_samples(samples)
    p_hat = np.zeros(samples.shape[1:])
    for i, x in enumerate(samples, start=1):
        p_hat = update_running_mean(p_hat, x, i)
    return p_hat


def discrepancy(samples, p):
    """Empirical mean minus the target probabilities, ``p_hat - p``."""
    samples = as_samples(samples)
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 0:
        p = p[None]
    if samples.shape[1:] != p.shape:
        raise ValueError(f"sample shape {samples.shape[1:]} does not match p shape {p.shape}")
    return empirical_mean(samples) - p


def one_hot(indices, m):
    indices = np.asarray(indices, dtype=np.int64)
    return np.eye(m)[indices]


def to_indices(onehot):
    """Index view of one-hot samples (argmax over the last axis)."""
    return np.asarray(onehot).argmax(axis=-1)
