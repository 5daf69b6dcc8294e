"""Exact reference computations for DBsample and the estimators built on it.

Everything here is brute force or closed form. The path-law enumeration replays
the sampler's own update expressions, so oracle and sampler agree to the last
bit on every branch probability. Multi-dimensional laws are products of the
per-dimension laws, since DBsample runs independently in each dimension.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .prob_core import update_running_mean
from .sampler import corrected_parameter

MAX_OUTCOMES = 2**20


class ResourceGuardError(RuntimeError):
    """Raised when an exact computation would exceed its size guard."""


def _guard(outcomes):
    if outcomes > MAX_OUTCOMES:
        raise ResourceGuardError(
            f"exact enumeration needs {outcomes} outcomes, limit is {MAX_OUTCOMES}")


def _f_at(f, x):
    return float(f(np.atleast_1d(np.asarray(x, dtype=np.float64))))


def exact_gradient(p, f):
    """``(f(1) - f(0)) p (1 - p)``: the logit gradient of ``E[f]`` for one Bernoulli."""
    return (_f_at(f, 1.0) - _f_at(f, 0.0)) * p * (1.0 - p)


def exact_gradient_vector(p, f):
    """Logit gradient of ``E[f(x)]`` for ``x ~ Bernoulli(p)`` in ``d`` dimensions, by enumeration."""
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    d = p.shape[0]
    _guard(2**d)
    grad = np.zeros(d)
    for bits in itertools.product((0.0, 1.0), repeat=d):
        x = np.array(bits)
        w = np.prod(np.where(x == 1.0, p, 1.0 - p))
        grad += w * float(f(x)) * (x - p)
    return grad


@dataclass(frozen=True)
class PathLaw:
    """Exact law of one dimension of DBsample: ``paths[s]`` has probability ``probs[s]``."""

    p: float
    alpha: float
    n: int
    paths: np.ndarray
    probs: np.ndarray

    def as_dict(self):
        return {tuple(int(v) for v in row): float(w) for row, w in zip(self.paths, self.probs)}


def enumerate_path_law(p, alpha, n, max_n=20):
    """Probability of every 0/1 sequence of length ``n`` under DBsample(p, alpha).

    Prefixes are extended one draw at a time; each branch multiplies in the
    conditional probability of its next draw, recomputed with the sampler's
    running-mean and clamp arithmetic.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > max_n:
        raise ResourceGuardError(f"n={n} exceeds the enumeration limit {max_n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    p = float(p)
    paths = np.zeros((1, 0))
    probs = np.ones(1)
    p_hat = np.full(1, p)
    q = np.full(1, p)
    for i in range(1, n + 1):
        ones = np.ones((paths.shape[0], 1))
        paths = np.vstack([np.hstack([paths, 0 * ones]), np.hstack([paths, ones])])
        probs = np.concatenate([probs * (1.0 - q), probs * q])
        x = paths[:, -1]
        p_hat = update_running_mean(np.concatenate([p_hat, p_hat]), x, i)
        q = corrected_parameter(p, p_hat, alpha)
    order = np.lexsort(paths.T[::-1])
    return PathLaw(p, float(alpha), n, paths[order], probs[order])


def nu_recursion(p, alpha, n):
    """``nu[m][k] = P(p_hat_m = k / m)`` for ``m = 1..n`` (row 0 unused, set to [1]).

    Uses the recursion over the count of ones with the clamp applied to the
    corrected parameter, independent of path enumeration.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    nu = np.zeros((n + 1, n + 1))
    nu[0, 0] = 1.0
    nu[1, 0], nu[1, 1] = 1.0 - p, p
    for m in range(2, n + 1):
        for k in range(m + 1):
            stay = 0.0
            if k <= m - 1:
                stay = (1.0 - _clamp(p * (1 + alpha) - alpha * k / (m - 1))) * nu[m - 1, k]
            move = 0.0
            if k >= 1:
                move = _clamp(p * (1 + alpha) - alpha * (k - 1) / (m - 1)) * nu[m - 1, k - 1]
            nu[m, k] = stay + move
    return nu


def _clamp(v):
    return min(1.0, max(0.0, v))


def nu_from_law(law):
    """Marginalize a path law onto the count of ones, as a row of length ``n + 1``."""
    counts = law.paths.sum(axis=1).astype(int)
    return np.bincount(counts, weights=law.probs, minlength=law.n + 1)


def marginals_from_nu(p, alpha, n):
    """``E[x_m]`` via ``E[x_m] = sum_k k nu[m][k] - sum_{j<m} E[x_j]``."""
    nu = nu_recursion(p, alpha, n)
    mus = np.zeros(n)
    for m in range(1, n + 1):
        mus[m - 1] = (np.arange(n + 1) * nu[m]).sum() - mus[: m - 1].sum()
    return mus


@dataclass(frozen=True)
class MomentReport:
    mu: np.ndarray
    joint: np.ndarray
    cov: np.ndarray
    corr: np.ndarray
    cond: np.ndarray
    exp_sq_discrepancy: float
    bias: np.ndarray


def moments(law):
    """Marginals, pairwise ``P(x_i = 1, x_j = 1)``, covariances and correlations.

    ``cond[i, j] = P(x_j = 1 | x_i = 1)`` (zero where ``mu_i = 0``). Correlations
    with a degenerate marginal are reported as 0.
    """
    X = law.paths
    w = law.probs
    mu = w @ X
    joint = (X * w[:, None]).T @ X
    cov = joint - np.outer(mu, mu)
    var = np.maximum(mu * (1.0 - mu), 0.0)
    denom = np.sqrt(np.outer(var, var))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), 0.0)
        cond = np.where(mu[:, None] > 0, joint / np.where(mu > 0, mu, 1.0)[:, None], 0.0)
    corr = np.clip(corr, -1.0, 1.0)
    means = X.mean(axis=1)
    esd = float(w @ (means - law.p) ** 2)
    return MomentReport(mu, joint, cov, corr, cond, esd, mu - law.p)


def expected_sq_discrepancy(p, alpha, n):
    """``E[||p_hat - p||^2]`` summed over the dimensions of ``p``."""
    return sum(moments(enumerate_path_law(pk, alpha, n)).exp_sq_discrepancy
               for pk in np.atleast_1d(p))


def iid_sq_discrepancy(p, n):
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    return float(p @ (1.0 - p)) / n


def alpha_bounds(p):
    """``(min, max)`` of ``(1 - p) / p`` and ``p / (1 - p)``."""
    a, b = (1.0 - p) / p, p / (1.0 - p)
    return min(a, b), max(a, b)


def kappa(law):
    """``P(x_1 != x_2)`` for a two-draw law: the unbiasing constant of the paired estimator."""
    if law.n != 2:
        raise ValueError("kappa is defined for n = 2")
    d = law.as_dict()
    return d[(1, 0)] + d[(0, 1)]


def closed_form_variance(p, alpha, f):
    """Variance of the unbiased paired estimator for ``d = 1, n = 2`` under DBsample(p, alpha).

    Four regimes: ``alpha = 0``; ``alpha`` up to the smaller bound (marginals
    preserved); up to the larger bound (one branch clamps); beyond it (the two
    draws are always antithetic and the variance vanishes). At a regime
    boundary the lower-alpha formula is used; neighbouring formulas agree there.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    c_f = (_f_at(f, 1.0) - _f_at(f, 0.0)) ** 2
    v = p * (1.0 - p)
    lo, hi = alpha_bounds(p)
    if alpha == 0:
        bracket = 0.5 - v
    elif alpha <= lo:
        bracket = 1.0 / (2.0 * (1.0 + alpha)) - v
    elif alpha <= hi:
        m = max(p, 1.0 - p)
        bracket = m / (m * (1.0 + alpha) + 1.0) - v
    else:
        return 0.0
    # the bracket reaches zero at the upper boundary; drop rounding dust below it
    return c_f * v * max(bracket, 0.0)


def joint_law(p, alpha, n):
    """Product law over ``d`` dimensions: samples ``(S, n, d)`` and weights ``(S,)``."""
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    d = p.shape[0]
    _guard(2 ** (n * d))
    laws = [enumerate_path_law(pk, alpha, n) for pk in p]
    samples = np.zeros((1, n, 0))
    weights = np.ones(1)
    for law in laws:
        S = samples.shape[0]
        K = law.paths.shape[0]
        samples = np.concatenate(
            [np.repeat(samples, K, axis=0), np.tile(law.paths, (S, 1))[:, :, None]], axis=2)
        weights = np.repeat(weights, K) * np.tile(law.probs, S)
    keep = weights > 0
    return samples[keep], weights[keep]


def estimator_moments(p, alpha, n, f, estimator):
    """Exact mean and per-dimension variance of ``estimator(samples, p, f)`` under DBsample.

    ``estimator`` returns a gradient array of shape ``(d,)``. Raises
    :class:`ResourceGuardError` when ``2^(n d)`` exceeds the enumeration limit.
    """
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    samples, weights = joint_law(p, alpha, n)
    values = np.array([np.asarray(estimator(s, p, f), dtype=np.float64) for s in samples])
    mean = weights @ values
    var = weights @ (values - mean) ** 2
    return mean, var


def mc_estimator_moments(p, alpha, n, f, estimator, reps, rng):
    """Monte-Carlo mean, variance and standard error of the variance over ``reps`` draws."""
    from .sampler import SamplerConfig, db_sample_bernoulli

    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    cfg = SamplerConfig(n, alpha)
    values = np.array([np.asarray(estimator(db_sample_bernoulli(p, cfg, rng), p, f))
                       for _ in range(reps)])
    return mc_summary(values)


def mc_summary(values):
    """Mean, unbiased variance and the standard error of that variance, per column."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    r = values.shape[0]
    if r < 2:
        raise ValueError("need at least two replicates")
    mean = values.mean(axis=0)
    var = values.var(axis=0, ddof=1)
    m4 = ((values - mean) ** 4).mean(axis=0)
    se_var = np.sqrt(np.maximum(m4 - var**2 * (r - 3) / (r - 1), 0.0) / r)
    return mean, var, se_var


def enumerate_categorical_law(row, alpha, n, max_outcomes=MAX_OUTCOMES):
    """Exact law of categorical DBsample for one slot.

    Returns ``(paths, probs)`` with ``paths`` of shape ``(m^n, n)`` holding
    category indices. Branch probabilities replay the sampler's clip and
    renormalize step.
    """
    from .sampler import renormalize

    row = np.asarray(row, dtype=np.float64)
    m = row.shape[0]
    _guard(m**n)
    paths = np.zeros((1, 0), dtype=np.int64)
    probs = np.ones(1)
    p_hat = row[None, :].copy()
    q = row[None, :].copy()
    eye = np.eye(m)
    for i in range(1, n + 1):
        S = paths.shape[0]
        nxt = np.tile(np.arange(m), S)
        paths = np.hstack([np.repeat(paths, m, axis=0), nxt[:, None]])
        probs = (probs[:, None] * q).reshape(-1)
        p_hat = update_running_mean(np.repeat(p_hat, m, axis=0), eye[nxt], i)
        q = renormalize(corrected_parameter(row, p_hat, alpha), row)
    return paths, probs
