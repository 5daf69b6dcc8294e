"""Sweeps and toy runs that regenerate the discrepancy, bias/correlation and variance curves.

Every sweep returns a :class:`Table` (header, rows, comment lines) that can be
written as CSV. Exact enumeration is used wherever the path law fits under the
oracle's size guard; otherwise a seeded Monte-Carlo estimate is reported with
its standard error. Monte-Carlo seeds are derived from ``(spec.seed, point
index)``, so output does not depend on the number of worker processes.
"""

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .estimators import estimate, sample_estimator
from .oracle import (
    MAX_OUTCOMES,
    ResourceGuardError,
    enumerate_path_law,
    estimator_moments,
    exact_gradient,
    expected_sq_discrepancy,
    mc_summary,
    moments,
)
from .optim import make_optimizer
from .prob_core import sigmoid
from .sampler import SamplerConfig, db_sample_bernoulli, db_sample_bernoulli_batch

P_CLIP = 1e-3
METHODS = ("auto", "enum", "mc")


@dataclass(frozen=True)
class SweepSpec:
    p_min: float = 0.02
    p_max: float = 0.98
    p_count: int = 49
    n_list: tuple = (2, 4)
    alpha_list: tuple = (0.0, 1.0)
    estimator_list: tuple = ("dbsurf_debiased",)
    mc_reps: int = 1000
    seed: int = 0
    d: int = 1
    target: float = 0.49
    method: str = "auto"

    def __post_init__(self):
        if self.p_count < 1 or self.mc_reps < 1 or self.d < 1:
            raise ValueError("p_count, mc_reps and d must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if any(int(n) != n or n < 1 for n in self.n_list):
            raise ValueError("n_list entries must be positive integers")
        if any(a < 0 for a in self.alpha_list):
            raise ValueError("alpha_list entries must be >= 0")

    def p_grid(self):
        grid = np.linspace(self.p_min, self.p_max, self.p_count)
        return np.clip(grid, P_CLIP, 1.0 - P_CLIP)


@dataclass
class Table:
    name: str
    header: list
    rows: list
    comments: list = dataclasses.field(default_factory=list)

    def column(self, name):
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self):
        lines = [f"# {line}" for line in self.comments]
        lines.append(",".join(self.header))
        lines.extend(",".join(fmt(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def spec_comments(kind, spec):
    lines = [f"dbsurf {__version__}", f"sweep={kind}"]
    for k, v in dataclasses.asdict(spec).items():
        if isinstance(v, (tuple, list)):
            v = " ".join(fmt(x) for x in v)
        lines.append(f"{k}={fmt(v)}")
    return lines


def toy_objective(target=0.49):
    """``f(x) = sum_k (x_k - target)^2``."""

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return float(np.sum((x - target) ** 2))

    return f


def point_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _map(worker, items, jobs):
    if jobs <= 1:
        return [worker(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, items, chunksize=max(1, len(items) // (4 * jobs))))


def _use_enum(spec, n):
    feasible = 2 ** (n * spec.d) <= MAX_OUTCOMES
    if spec.method == "enum" and not feasible:
        raise ResourceGuardError(f"exact enumeration infeasible for n={n}, d={spec.d}")
    return spec.method == "enum" or (spec.method == "auto" and feasible)


def _variance_point(item):
    spec, index, p, n, alpha, name = item
    f = toy_objective(spec.target)
    pv = np.full(spec.d, p)
    g = sample_estimator(name, pv, alpha, n)
    if _use_enum(spec, n):
        _, var = estimator_moments(pv, alpha, n, f, g)
        return [p, n, alpha, name, float(var.sum()), 0.0, "enum"]
    rng = point_rng(spec.seed, index)
    cfg = SamplerConfig(n, alpha)
    values = [g(db_sample_bernoulli(pv, cfg, rng), pv, f) for _ in range(spec.mc_reps)]
    _, var, se = mc_summary(values)
    return [p, n, alpha, name, float(var.sum()), float(np.sqrt((se**2).sum())), "mc"]


def variance_sweep(spec=SweepSpec(), jobs=1):
    """Variance of each estimator over the ``p`` grid for every ``(n, alpha)``.

    Estimator names select the formula; ``alpha`` selects the sampling law
    (``alpha = 0`` is i.i.d., so ``dbsurf`` at ``alpha = 0`` is plain LOORF).
    For ``d > 1`` the variance is the trace of the covariance.
    """
    items = []
    for p in spec.p_grid():
        for n in spec.n_list:
            for alpha in spec.alpha_list:
                for name in spec.estimator_list:
                    items.append((spec, len(items), float(p), int(n), float(alpha), name))
    rows = _map(_variance_point, items, jobs)
    comments = spec_comments("variance", spec)
    comments.append("variance=trace of the estimator covariance (sum over dimensions)")
    return Table("variance", ["p", "n", "alpha", "estimator", "variance", "stderr", "method"],
                 rows, comments)


def _discrepancy_point(item):
    spec, index, p, n, alpha, sampler = item
    pv = np.full(spec.d, p)
    if _use_enum(spec, n):
        return [p, n, alpha, sampler, expected_sq_discrepancy(pv, alpha, n), 0.0, "enum"]
    rng = point_rng(spec.seed, index)
    cfg = SamplerConfig(n, alpha)
    x = db_sample_bernoulli_batch(pv, cfg, spec.mc_reps, rng)
    sq = np.sum((x.mean(axis=1) - pv) ** 2, axis=-1)
    se = sq.std(ddof=1) / np.sqrt(len(sq)) if len(sq) > 1 else 0.0
    return [p, n, alpha, sampler, float(sq.mean()), float(se), "mc"]


def discrepancy_sweep(spec=SweepSpec(), jobs=1):
    """Expected squared discrepancy of i.i.d. sampling and DBsample at each ``alpha``."""
    items = []
    for p in spec.p_grid():
        for n in spec.n_list:
            items.append((spec, len(items), float(p), int(n), 0.0, "iid"))
            for alpha in spec.alpha_list:
                if alpha == 0:
                    continue
                items.append((spec, len(items), float(p), int(n), float(alpha), "dbsample"))
    rows = _map(_discrepancy_point, items, jobs)
    return Table("discrepancy",
                 ["p", "n", "alpha", "sampler", "E_sq_discrepancy", "stderr", "method"],
                 rows, spec_comments("discrepancy", spec))


def _biascorr_point(item):
    p, alpha = item
    rep = moments(enumerate_path_law(p, alpha, 2))
    return [p, alpha, float(rep.mu.mean() - p), float(rep.corr[0, 1]), "enum"]


def bias_correlation_sweep(spec=SweepSpec(), jobs=1):
    """Bias ``E[(x1 + x2)/2] - p`` and ``Corr(x1, x2)`` for two draws in one dimension."""
    items = [(float(p), float(a)) for p in spec.p_grid() for a in spec.alpha_list]
    rows = _map(_biascorr_point, items, jobs)
    return Table("biascorr", ["p", "alpha", "bias", "correlation", "method"], rows,
                 spec_comments("biascorr", spec))


def _corrmatrix_point(item):
    p, alpha, n = item
    rep = moments(enumerate_path_law(p, alpha, n))
    return [[p, alpha, i + 1, j + 1, float(rep.corr[i, j])]
            for i in range(n) for j in range(i + 1, n)]


def correlation_matrix_sweep(spec=SweepSpec(), n=4, jobs=1):
    """Pairwise correlations among ``n`` one-dimensional DBsample draws."""
    items = [(float(p), float(a), n) for p in spec.p_grid() for a in spec.alpha_list]
    rows = [r for block in _map(_corrmatrix_point, items, jobs) for r in block]
    return Table("corrmatrix", ["p", "alpha", "i", "j", "corr"], rows,
                 spec_comments("corrmatrix", spec))


SWEEPS = {
    "variance": variance_sweep,
    "discrepancy": discrepancy_sweep,
    "biascorr": bias_correlation_sweep,
    "corrmatrix": correlation_matrix_sweep,
}


@dataclass(frozen=True)
class OptimRunSpec:
    theta0: float = 0.0
    target: float = 0.49
    step_size: float = 0.1
    steps: int = 2000
    n: int = 2
    alpha: float = 1.0
    estimator: str = "dbsurf"
    maximize: bool = True
    seed: int = 0
    optimizer: str = "adam"
    max_abs_theta: float = 50.0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")


@dataclass
class OptimResult:
    table: Table
    status: str
    theta: float
    p: float


def optimize_toy(spec=OptimRunSpec()):
    """Ascend (or descend) ``E[(x - target)^2]`` over one sigmoid-Bernoulli logit.

    ``estimator`` is ``exact`` for the true gradient or any name accepted by
    :func:`dbsurf.estimators.estimate`. The run stops early with status
    ``diverged`` once ``|theta|`` exceeds ``max_abs_theta``.
    """
    f = toy_objective(spec.target)
    opt = make_optimizer(spec.optimizer, spec.step_size)
    rng = np.random.default_rng(spec.seed)
    cfg = SamplerConfig(spec.n, spec.alpha, spec.seed)
    sign = 1.0 if spec.maximize else -1.0
    theta = float(spec.theta0)
    rows = []
    status = "ok"
    for step in range(spec.steps):
        p = sigmoid(theta)
        true_grad = exact_gradient(p, f)
        if spec.estimator == "exact":
            g = true_grad
        elif p * (1.0 - p) == 0.0:
            g = 0.0
        else:
            g = float(estimate(spec.estimator, np.array([p]), f, cfg, rng).grad[0])
        value = p * f(1.0) + (1.0 - p) * f(0.0)
        rows.append([step, theta, p, g, true_grad, value])
        theta = theta + float(opt.direction(sign * g))
        if abs(theta) > spec.max_abs_theta:
            status = "diverged"
            break
    p = sigmoid(theta)
    rows.append([len(rows), theta, p, "", exact_gradient(p, f), p * f(1.0) + (1.0 - p) * f(0.0)])
    comments = spec_comments("optimize", spec) + [f"status={status}"]
    table = Table("optimize", ["step", "theta", "p", "estimate", "true_gradient", "objective"],
                  rows, comments)
    return OptimResult(table, status, theta, p)
