"""Discrepancy-based sampling (DBsample) for discrete distributions.

Every sampler draws sequentially. After each draw the running empirical mean
``p_hat`` is updated and the next sampling parameter is shifted away from
over-represented outcomes::

    q = min(1, (p * (1 + alpha) - alpha * p_hat)_+)

``alpha = 0`` recovers i.i.d. sampling. Uniforms are consumed in a fixed order
(one vector of ``d`` uniforms per Bernoulli row, one uniform per categorical
slot) so that runs are reproducible from the seed alone.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .prob_core import (
    as_categorical_rows,
    as_prob_vector,
    one_hot,
    update_running_mean,
)

DEFAULT_ALPHA = 1.0
DEFAULT_EPSILON = 1e-6
_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class SamplerConfig:
    n: int
    alpha: float = DEFAULT_ALPHA
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def make_rng(self):
        return np.random.default_rng(self.seed)


def corrected_parameter(p, p_hat, alpha):
    """``min(1, (p(1 + alpha) - alpha p_hat)_+)``: positive part first, then the cap."""
    return np.minimum(1.0, np.maximum(p * (1.0 + alpha) - alpha * p_hat, 0.0))


class SamplerState:
    """Mutable state of one Bernoulli DBsample run.

    ``rng`` only needs a ``random(size)`` method, so both
    ``numpy.random.Generator`` and the legacy ``RandomState`` work.
    """

    def __init__(self, p, alpha=DEFAULT_ALPHA, rng=None):
        self.p = as_prob_vector(p)
        self.alpha = float(alpha)
        self.p_hat = self.p.copy()
        self.q = self.p.copy()
        self.step = 0
        self.rng = rng if rng is not None else np.random.default_rng()

    def draw(self):
        u = self.rng.random(self.p.shape[0])
        x = (u < self.q).astype(np.float64)
        self.step += 1
        self.p_hat = update_running_mean(self.p_hat, x, self.step)
        self.q = corrected_parameter(self.p, self.p_hat, self.alpha)
        return x


def iid_sample(p, cfg, rng=None):
    """``n`` independent Bernoulli(p) rows using the same uniform stream layout as DBsample."""
    p = as_prob_vector(p)
    rng = rng if rng is not None else cfg.make_rng()
    # row-major fill consumes the stream exactly like n calls of random(d)
    return (rng.random((cfg.n, p.shape[0])) < p).astype(np.float64)


def db_sample_bernoulli(p, cfg, rng=None):
    """Draw ``cfg.n`` rows of DBsample for independent Bernoulli(p) dimensions.

    Returns an ``(n, d)`` float array of 0/1.
    """
    rng = rng if rng is not None else cfg.make_rng()
    state = SamplerState(p, cfg.alpha, rng)
    return np.stack([state.draw() for _ in range(cfg.n)])


def db_sample_bernoulli_batch(p, cfg, reps, rng=None):
    """``reps`` independent DBsample runs at once, shape ``(reps, n, d)``.

    Same law as :func:`db_sample_bernoulli`, but uniforms are drawn one
    ``(reps, d)`` block per step, so individual runs differ from the sequential
    sampler under a shared seed.
    """
    p = as_prob_vector(p)
    rng = rng if rng is not None else cfg.make_rng()
    p_hat = np.broadcast_to(p, (reps, p.shape[0])).copy()
    q = p_hat.copy()
    out = np.empty((reps, cfg.n, p.shape[0]))
    for i in range(1, cfg.n + 1):
        x = (rng.random((reps, p.shape[0])) < q).astype(np.float64)
        out[:, i - 1] = x
        p_hat = update_running_mean(p_hat, x, i)
        q = corrected_parameter(p, p_hat, cfg.alpha)
    return out


def _categorical_draw(q, u):
    # inverse cdf; u < q[0] selects category 0, matching the Bernoulli (u < q) convention
    cdf = np.cumsum(q, axis=-1)
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, q.shape[-1] - 1)


def renormalize(q, p):
    """Normalize each row of ``q``; rows whose mass fell below 1e-12 revert to ``p``."""
    mass = q.sum(axis=-1, keepdims=True)
    bad = mass < _NORM_FLOOR
    safe = np.where(bad, 1.0, mass)
    return np.where(bad, p, q / safe)


class CategoricalSamplerState:
    """Mutable state of a categorical DBsample run over ``k`` independent slots."""

    def __init__(self, rows, alpha=DEFAULT_ALPHA, rng=None):
        rows = as_categorical_rows(rows)
        self.single = rows.ndim == 1
        self.p = np.atleast_2d(rows)
        self.alpha = float(alpha)
        self.p_hat = self.p.copy()
        self.q = self.p.copy()
        self.step = 0
        self.rng = rng if rng is not None else np.random.default_rng()

    def draw(self):
        u = self.rng.random(self.p.shape[0])
        x = one_hot(_categorical_draw(self.q, u), self.p.shape[1])
        self.step += 1
        self.p_hat = update_running_mean(self.p_hat, x, self.step)
        clipped = corrected_parameter(self.p, self.p_hat, self.alpha)
        self.q = renormalize(clipped, self.p)
        return x[0] if self.single else x


def db_sample_categorical(rows, cfg, rng=None):
    """Categorical DBsample.

    ``rows`` is one probability row ``(m,)`` or ``k`` independent rows
    ``(k, m)``. Output is one-hot: ``(n, m)`` or ``(n, k, m)``.
    """
    rng = rng if rng is not None else cfg.make_rng()
    state = CategoricalSamplerState(rows, cfg.alpha, rng)
    return np.stack([state.draw() for _ in range(cfg.n)])


def iid_sample_categorical(rows, cfg, rng=None):
    return db_sample_categorical(rows, SamplerConfig(cfg.n, 0.0, cfg.seed), rng)


@dataclass(frozen=True)
class FiniteSupport:
    atoms: tuple
    probs: tuple

    def __post_init__(self):
        atoms = tuple(float(a) for a in self.atoms)
        if len(set(atoms)) != len(atoms):
            raise ValueError("atoms must be distinct")
        probs = as_categorical_rows(self.probs)
        if probs.ndim != 1 or probs.shape[0] != len(atoms):
            raise ValueError("need exactly one probability per atom")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", tuple(probs.tolist()))


def db_sample_finite_support(support, cfg, rng=None):
    """Sample a finite-support distribution by one-hot encoding its atoms."""
    x = db_sample_categorical(np.array(support.probs), cfg, rng)
    return x @ np.array(support.atoms)


@dataclass(frozen=True)
class TailGroupedSupport:
    """Head atoms plus one grouped tail category.

    ``tail_sampler(rng)`` returns a draw from the distribution conditioned on
    the tail set; it is only called when the tail category is selected.
    """

    atoms: tuple
    head_probs: tuple
    tail_prob: float
    tail_sampler: Optional[Callable] = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if len(self.atoms) != len(self.head_probs):
            raise ValueError("need exactly one head probability per atom")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        total = sum(self.head_probs) + self.tail_prob
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"head and tail mass must sum to 1, got {total!r}")
        if self.tail_prob > 0 and self.tail_sampler is None:
            raise ValueError("a tail sampler is required when tail_prob > 0")

    def category_row(self):
        return np.array(list(self.head_probs) + [self.tail_prob])


def _head_atoms(pmf, lower, epsilon, max_atoms):
    atoms, probs = [], []
    before = 0.0
    a = lower
    while before < 1.0 - epsilon:
        if len(atoms) >= max_atoms:
            raise ValueError("head would exceed max_atoms; increase epsilon")
        w = float(pmf(a))
        atoms.append(float(a))
        probs.append(w)
        before += w
        a += 1
    tail = max(0.0, 1.0 - sum(probs))
    if tail <= 1e-15:
        probs[-1] += tail
        tail = 0.0
    return tuple(atoms), tuple(probs), tail


def group_tail(pmf, lower, epsilon=DEFAULT_EPSILON, tail_sampler=None, max_atoms=10**6):
    """Build a :class:`TailGroupedSupport` for an integer-valued distribution.

    Atoms ``lower, lower + 1, ...`` enter the head while the cumulative mass
    strictly before them is below ``1 - epsilon``, i.e. the head is the image
    of ``[0, 1 - epsilon)`` under the quantile function. The remaining mass
    becomes the tail category.
    """
    atoms, probs, tail = _head_atoms(pmf, lower, epsilon, max_atoms)
    return TailGroupedSupport(atoms, probs, tail, tail_sampler, epsilon)


def group_tail_scipy(dist, epsilon=DEFAULT_EPSILON, max_atoms=10**6):
    """Tail-grouped support for a frozen ``scipy.stats`` discrete distribution.

    Tail draws use the inverse cdf restricted to values above the last head atom.
    """
    atoms, probs, tail = _head_atoms(dist.pmf, int(dist.support()[0]), epsilon, max_atoms)
    last = atoms[-1]
    lo = float(dist.cdf(last))

    def tail_sampler(rng):
        u = lo + (1.0 - lo) * rng.random()
        return float(max(dist.ppf(u), last + 1))

    return TailGroupedSupport(atoms, probs, tail, tail_sampler if tail > 0 else None, epsilon)


def db_sample_infinite_support(support, cfg, rng=None):
    """DBsample over the head atoms plus one grouped tail category.

    Tail values are drawn lazily from ``support.tail_sampler`` with the same
    generator, only for draws that land in the tail category.
    """
    rng = rng if rng is not None else cfg.make_rng()
    row = support.category_row()
    if support.tail_prob == 0.0:
        row = row[:-1]
    idx = db_sample_categorical(row, cfg, rng).argmax(axis=-1)
    m = len(support.atoms)
    out = np.empty(cfg.n)
    for i, k in enumerate(idx):
        out[i] = support.tail_sampler(rng) if k == m else support.atoms[k]
    return out
