"""Score-function gradient estimators for Bernoulli and categorical distributions.

All estimators return gradients with respect to the logits. For a sigmoid
Bernoulli or a softmax categorical the score of a sample is ``x - p``, so an
estimate is a weighted sum of ``x_i - p`` terms. Sample arrays follow
:mod:`dbsurf.prob_core`: ``(n, d)`` for Bernoulli, ``(n, m)`` or ``(n, k, m)``
one-hot for categorical; ``f`` receives one sample (one leading-axis slice).
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .prob_core import as_samples
from .sampler import SamplerConfig, db_sample_bernoulli, db_sample_categorical

LOGIT_SPACE = "logit-space"
PROB_SPACE = "prob-space"


@dataclass(frozen=True)
class GradientEstimate:
    grad: np.ndarray
    estimator: str
    n: int
    alpha: Optional[float] = None
    seed: Optional[int] = None
    space: str = LOGIT_SPACE
    extras: dict = field(default_factory=dict)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.grad, dtype=dtype)


def to_space(estimate, p, space):
    """Convert a Bernoulli estimate between logit and probability coordinates.

    ``dp/dtheta = p(1 - p)`` for the sigmoid, so a logit gradient divides by
    ``p(1 - p)`` to become a gradient in ``p`` and multiplies back the other way.
    """
    if space not in (LOGIT_SPACE, PROB_SPACE):
        raise ValueError(f"unknown space {space!r}")
    if estimate.space == space:
        return estimate
    p = np.asarray(p, dtype=np.float64)
    jac = p * (1.0 - p)
    if space == PROB_SPACE:
        if np.any(jac == 0):
            raise ValueError("probability-space gradient is undefined at p in {0, 1}")
        grad = estimate.grad / jac
    else:
        grad = estimate.grad * jac
    return dataclasses.replace(estimate, grad=grad, space=space)


def _prepare(samples, p):
    x = np.asarray(samples, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if x.ndim == 1 or (p.ndim == 0):
        x = as_samples(x)
        p = np.atleast_1d(p)
    if x.shape[1:] != p.shape:
        raise ValueError(f"sample shape {x.shape[1:]} does not match parameter shape {p.shape}")
    return x, p


def _evaluate(f, x):
    return np.array([float(f(xi)) for xi in x])


def _weighted_scores(weights, x, p):
    return np.tensordot(weights, x - p, axes=(0, 0))


def reinforce(samples, p, f):
    """Plain score-function estimate ``(1/n) sum_i f(x_i)(x_i - p)``."""
    x, p = _prepare(samples, p)
    fx = _evaluate(f, x)
    grad = _weighted_scores(fx, x, p) / x.shape[0]
    return GradientEstimate(grad, "reinforce", x.shape[0])


def loorf(samples, p, f):
    """Leave-one-out Reinforce: each sample's baseline is the mean of the others."""
    x, p = _prepare(samples, p)
    n = x.shape[0]
    if n < 2:
        raise ValueError("LOORF needs at least two samples")
    fx = _evaluate(f, x)
    # f_i minus the mean of the others, built from pairwise differences so a constant f cancels exactly
    weights = (fx[:, None] - fx[None, :]).sum(axis=1) / (n - 1)
    grad = _weighted_scores(weights, x, p) / n
    return GradientEstimate(grad, "loorf", n)


def loorf_decomposed(samples, p, f):
    """LOORF written as a rescaled Reinforce term minus a discrepancy correction.

    ``(1/(n-1)) sum_i f(x_i)(x_i - p) - (p_hat - p) (1/(n-1)) sum_i f(x_i)``
    """
    x, p = _prepare(samples, p)
    n = x.shape[0]
    if n < 2:
        raise ValueError("LOORF needs at least two samples")
    fx = _evaluate(f, x)
    reinforce_term = _weighted_scores(fx, x, p) / (n - 1)
    correction = (x.mean(axis=0) - p) * fx.sum() / (n - 1)
    return GradientEstimate(reinforce_term - correction, "loorf_decomposed", n)


def loorf_pairwise(samples, p, f):
    """LOORF as a sum over pairs: ``(1/(n(n-1))) sum_{i<j} (f_i - f_j)(x_i - x_j)``."""
    x, p = _prepare(samples, p)
    n = x.shape[0]
    if n < 2:
        raise ValueError("LOORF needs at least two samples")
    fx = _evaluate(f, x)
    grad = np.zeros(p.shape)
    for i in range(n):
        for j in range(i + 1, n):
            grad += (fx[i] - fx[j]) * (x[i] - x[j])
    return GradientEstimate(grad / (n * (n - 1)), "loorf_pairwise", n)


def dbsurf(p, f, cfg, rng=None):
    """LOORF on DBsample draws.

    ``p`` is a Bernoulli probability vector ``(d,)`` or, when 2-D, a stack of
    categorical rows ``(k, m)``.
    """
    if cfg.n < 2:
        raise ValueError("DBsurf needs at least two samples")
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 2:
        x = db_sample_categorical(p, cfg, rng)
    else:
        x = db_sample_bernoulli(p, cfg, rng)
    est = loorf(x, p, f)
    return GradientEstimate(est.grad, "dbsurf", cfg.n, cfg.alpha, cfg.seed,
                            extras={"samples": x})


def kappa_unbiased_estimator(x1, x2, p, f, kappa):
    """Paired estimator ``p(1-p)/kappa * (f(x1) - f(x2))(x1 - x2)`` for one Bernoulli.

    Unbiased for ``(f(1) - f(0)) p (1 - p)`` when ``kappa = P(x1 != x2)`` under
    the pair's sampling law.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    f1 = float(f(np.atleast_1d(float(x1))))
    f2 = float(f(np.atleast_1d(float(x2))))
    return p * (1.0 - p) / kappa * (f1 - f2) * (float(x1) - float(x2))


def debias_factor(p, mus, cond):
    """``n(n-1)p(1-p) / sum_{i<j}(mu_i + mu_j - 2 mu_i S_ij)`` with ``S_ij = P(x_j=1 | x_i=1)``."""
    mus = np.asarray(mus, dtype=np.float64)
    cond = np.asarray(cond, dtype=np.float64)
    n = mus.shape[0]
    tol = 1e-9
    if np.any(mus < -tol) or np.any(mus > 1 + tol) or np.any(cond < -tol) or np.any(cond > 1 + tol):
        raise ValueError("marginals and conditionals must lie in [0, 1]")
    mus, cond = np.clip(mus, 0.0, 1.0), np.clip(cond, 0.0, 1.0)
    iu, ju = np.triu_indices(n, k=1)
    denom = float(np.sum(mus[iu] + mus[ju] - 2.0 * mus[iu] * cond[iu, ju]))
    if denom <= 0:
        raise ValueError("debias denominator is not positive; p is degenerate")
    return n * (n - 1) * p * (1.0 - p) / denom


def debias_1d(estimate, p, mus, cond):
    """Rescale a one-dimensional LOORF estimate so its expectation under DBsample is exact."""
    grad = np.asarray(estimate.grad if isinstance(estimate, GradientEstimate) else estimate,
                      dtype=np.float64)
    if grad.size != 1:
        raise ValueError("debias_1d applies to one-dimensional estimates only")
    factor = debias_factor(p, mus, cond)
    if isinstance(estimate, GradientEstimate):
        return GradientEstimate(grad * factor, estimate.estimator + "_debiased", estimate.n,
                                estimate.alpha, estimate.seed, estimate.space,
                                dict(estimate.extras, debias_factor=factor))
    return grad * factor


def dbsample_debias_factor(p, alpha, n):
    """Debias factor for DBsurf at ``(p, alpha, n)`` from the exact path law."""
    from .oracle import enumerate_path_law, moments

    rep = moments(enumerate_path_law(p, alpha, n))
    return debias_factor(p, rep.mu, rep.cond)


def dbsurf_debiased(p, f, cfg, rng=None):
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if p.shape != (1,):
        raise ValueError("debiased DBsurf is defined for one dimension")
    est = dbsurf(p, f, cfg, rng)
    factor = dbsample_debias_factor(float(p[0]), cfg.alpha, cfg.n)
    return GradientEstimate(est.grad * factor, "dbsurf_debiased", cfg.n, cfg.alpha, cfg.seed,
                            extras=dict(est.extras, debias_factor=factor))


def sample_estimator(name, p, alpha, n):
    """Return ``g(samples, p, f) -> grad`` for a named estimator at fixed ``(p, alpha, n)``.

    Names: ``reinforce``, ``loorf``, ``dbsurf`` (LOORF formula; the sampling
    law is supplied separately) and ``dbsurf_debiased`` (one dimension only).
    """
    if name == "reinforce":
        return lambda x, p_, f: reinforce(x, p_, f).grad
    if name in ("loorf", "dbsurf"):
        return lambda x, p_, f: loorf(x, p_, f).grad
    if name == "dbsurf_debiased":
        p = np.atleast_1d(p)
        if p.shape != (1,):
            raise ValueError("debiased DBsurf is defined for one dimension")
        factor = dbsample_debias_factor(float(p[0]), alpha, n)
        return lambda x, p_, f: loorf(x, p_, f).grad * factor
    raise ValueError(f"unknown estimator {name!r}")


ESTIMATOR_NAMES = ("reinforce", "loorf", "dbsurf", "dbsurf_debiased")


def estimate(name, p, f, cfg, rng=None):
    """Draw samples for a named estimator and return its :class:`GradientEstimate`.

    ``reinforce`` and ``loorf`` sample i.i.d.; the ``dbsurf`` variants use
    DBsample with ``cfg.alpha``.
    """
    rng = rng if rng is not None else cfg.make_rng()
    if name == "dbsurf":
        return dbsurf(p, f, cfg, rng)
    if name == "dbsurf_debiased":
        return dbsurf_debiased(p, f, cfg, rng)
    iid = SamplerConfig(cfg.n, 0.0, cfg.seed)
    x = db_sample_bernoulli(p, iid, rng)
    if name == "reinforce":
        return reinforce(x, p, f)
    if name == "loorf":
        return loorf(x, p, f)
    raise ValueError(f"unknown estimator {name!r}")
