"""Tabular architecture-search simulator driven by categorical DBsurf.

An architecture picks one operation per edge. A :class:`ScoreTable` maps every
architecture to a score and stands in for the accuracy of a trained
supernetwork: there are no network weights here, only table lookups. The
search keeps a logit matrix ``pi`` (edges x operations), samples paths with
categorical DBsample, forms per-edge LOORF gradients over the one-hot samples,
and updates ``pi`` with an adaptive-moment step. Edges whose top operation
leads the runner-up by more than a threshold are pruned (fixed for good).
"""

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .bench import Table, fmt
from .estimators import loorf
from .optim import make_optimizer
from .prob_core import softmax
from .sampler import SamplerConfig, db_sample_categorical

MAX_TABLE_SIZE = 10**6
NASBENCH201_OPS = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3")


class TableFormatError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    n_e: int
    n_op: int
    op_names: Optional[tuple] = None

    def __post_init__(self):
        if self.n_e < 1 or self.n_op < 2:
            raise ValueError("need n_e >= 1 and n_op >= 2")
        if self.op_names is None:
            object.__setattr__(self, "op_names", tuple(f"op{k}" for k in range(self.n_op)))
        elif len(self.op_names) != self.n_op:
            raise ValueError("op_names must have one label per operation")

    @property
    def size(self):
        return self.n_op**self.n_e

    def architectures(self):
        """All architectures as an ``(n_op^n_e, n_e)`` index array, lexicographic order."""
        if self.size > MAX_TABLE_SIZE:
            raise ValueError(f"search space of {self.size} architectures is too large to enumerate")
        return np.array(list(itertools.product(range(self.n_op), repeat=self.n_e)), dtype=np.int64)


def nasbench201_space():
    return SearchSpace(6, 5, NASBENCH201_OPS)


@dataclass
class ScoreTable:
    """Dense score array indexed by architecture; NaN marks an absent entry."""

    space: SearchSpace
    scores: np.ndarray
    higher_is_better: bool = True
    meta: dict = field(default_factory=dict)

    def score(self, arch):
        v = self.scores[tuple(int(a) for a in arch)]
        if np.isnan(v):
            raise KeyError(f"architecture {tuple(arch)} is not in the table")
        return float(v)

    def _oriented(self):
        s = self.scores if self.higher_is_better else -self.scores
        return np.where(np.isnan(s), -np.inf, s)

    def best(self):
        """Best architecture and its score; ties go to the lexicographically smallest."""
        flat = int(np.argmax(self._oriented()))
        arch = tuple(int(i) for i in np.unravel_index(flat, self.scores.shape))
        return arch, self.score(arch)

    def n_better(self, arch):
        """Number of architectures scoring strictly better than ``arch``."""
        o = self._oriented()
        return int(np.sum(o > o[tuple(arch)]))

    def in_top_fraction(self, arch, frac):
        return self.n_better(arch) < frac * np.count_nonzero(~np.isnan(self.scores))

    def to_csv(self):
        lines = [f"# dbsurf {__version__}",
                 f"# higher_is_better={int(self.higher_is_better)}",
                 f"# op_names={' '.join(self.space.op_names)}"]
        lines += [f"# {k}={fmt(v)}" for k, v in self.meta.items()]
        lines.append(",".join([f"op_{e + 1}" for e in range(self.space.n_e)] + ["score"]))
        for arch in self.space.architectures():
            v = self.scores[tuple(arch)]
            if not np.isnan(v):
                lines.append(",".join([str(int(a)) for a in arch] + [fmt(float(v))]))
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())


def generate_synthetic_table(space, seed=0, pair_scale=0.5):
    """Surrogate scores with known optimum: per-edge unary terms plus pairwise edge interactions.

    ``score(a) = sum_e u[e, a_e] + sum_{e<e'} V[e, e', a_e, a_e']`` with standard
    normal ``u`` and normal ``V`` of scale ``pair_scale``.
    """
    if space.size > MAX_TABLE_SIZE:
        raise ValueError(f"search space of {space.size} architectures is too large to enumerate")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 201]))
    unary = rng.standard_normal((space.n_e, space.n_op))
    pair = pair_scale * rng.standard_normal((space.n_e, space.n_e, space.n_op, space.n_op))
    shape = (space.n_op,) * space.n_e
    scores = np.zeros(shape)
    grids = np.indices(shape)
    for e in range(space.n_e):
        scores += unary[e][grids[e]]
        for e2 in range(e + 1, space.n_e):
            scores += pair[e, e2][grids[e], grids[e2]]
    table = ScoreTable(space, scores, True, {"seed": int(seed), "pair_scale": pair_scale})
    arch, best = table.best()
    table.meta["argmax"] = " ".join(str(a) for a in arch)
    table.meta["best_score"] = best
    return table


def load_table(path, op_names=None, exhaustive=True, higher_is_better=True):
    """Read a score table CSV with header ``op_1,...,op_<n_e>,score``.

    Operation cells are integer indices or names from ``op_names``; lines
    starting with ``#`` are ignored, except that ``# op_names=`` and
    ``# higher_is_better=`` supply defaults. In exhaustive mode every
    architecture must be present.
    """
    with open(path, newline="") as fh:
        raw = fh.read().splitlines()
    body = []
    for lineno, line in enumerate(raw, start=1):
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key == "op_names" and op_names is None:
                op_names = tuple(val.split())
            elif key == "higher_is_better":
                higher_is_better = val.strip() not in ("0", "false", "False")
        elif line.strip():
            body.append((lineno, line))
    if not body:
        raise TableFormatError(f"{path}: no header row")
    header_no, header_line = body[0]
    header = next(csv.reader([header_line]))
    n_e = len(header) - 1
    expected = [f"op_{e + 1}" for e in range(n_e)] + ["score"]
    if n_e < 1 or [h.strip() for h in header] != expected:
        raise TableFormatError(f"line {header_no}: header must be {','.join(expected)}")
    lookup = {name: k for k, name in enumerate(op_names)} if op_names else {}

    entries = []
    for lineno, line in body[1:]:
        cells = [c.strip() for c in next(csv.reader([line]))]
        if len(cells) != n_e + 1:
            raise TableFormatError(f"line {lineno}: expected {n_e + 1} fields, got {len(cells)}")
        arch = []
        for c in cells[:-1]:
            if c in lookup:
                arch.append(lookup[c])
            elif c.isdigit():
                arch.append(int(c))
            else:
                raise TableFormatError(f"line {lineno}: unknown operation {c!r}")
        try:
            score = float(cells[-1])
        except ValueError:
            raise TableFormatError(f"line {lineno}: score {cells[-1]!r} is not numeric") from None
        if not np.isfinite(score):
            raise TableFormatError(f"line {lineno}: score must be finite")
        entries.append((lineno, tuple(arch), score))

    if not entries:
        raise TableFormatError(f"{path}: no data rows")
    n_op = len(op_names) if op_names else max(max(a) for _, a, _ in entries) + 1
    space = SearchSpace(n_e, max(n_op, 2), tuple(op_names) if op_names else None)
    scores = np.full((space.n_op,) * n_e, np.nan)
    for lineno, arch, score in entries:
        if any(a >= space.n_op for a in arch):
            raise TableFormatError(f"line {lineno}: operation index out of range")
        if not np.isnan(scores[arch]):
            raise TableFormatError(f"line {lineno}: duplicate architecture {arch}")
        scores[arch] = score
    if exhaustive:
        missing = np.argwhere(np.isnan(scores))
        if len(missing):
            shown = ", ".join(str(tuple(int(v) for v in m)) for m in missing[:10])
            more = f" and {len(missing) - 10} more" if len(missing) > 10 else ""
            raise TableFormatError(f"table is missing {len(missing)} architectures: {shown}{more}")
    return ScoreTable(space, scores, higher_is_better, {"source": str(path)})


@dataclass
class ArchDistribution:
    """Per-edge logits plus pruning marks (``-1`` for an edge that is still searched)."""

    pi: np.ndarray
    pruned: np.ndarray

    @classmethod
    def uniform(cls, space):
        return cls(np.zeros((space.n_e, space.n_op)), np.full(space.n_e, -1, dtype=np.int64))

    def probs(self):
        return softmax(self.pi, axis=-1)

    @property
    def active(self):
        return np.flatnonzero(self.pruned < 0)

    def argmax(self):
        arch = np.argmax(self.pi, axis=-1)
        return tuple(int(self.pruned[e]) if self.pruned[e] >= 0 else int(arch[e])
                     for e in range(len(arch)))

    def copy(self):
        return ArchDistribution(self.pi.copy(), self.pruned.copy())


@dataclass(frozen=True)
class SearchConfig:
    n_paths: int = 5
    alpha: float = 1.0
    warmup_steps: int = 100
    train_steps: int = 4000
    prune_threshold: float = 0.8
    optimizer: str = "adam"
    lr: float = 1e-3
    betas: tuple = (0.5, 0.999)
    seed: int = 0
    eval_budget: Optional[int] = None

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("n_paths must be >= 2 for leave-one-out gradients")
        if self.warmup_steps < 0 or self.train_steps < 0:
            raise ValueError("step counts must be non-negative")
        if not 0.0 < self.prune_threshold <= 1.0:
            raise ValueError("prune_threshold must lie in (0, 1]")
        if self.alpha < 0 or self.lr <= 0:
            raise ValueError("alpha must be >= 0 and lr > 0")


def sample_paths(dist, cfg, rng):
    """``n_paths`` architectures: pruned edges fixed, the rest drawn by categorical DBsample.

    Returns ``(archs, onehots)`` where ``onehots`` has shape ``(n_paths, k, n_op)``
    for the ``k`` active edges.
    """
    n_e, n_op = dist.pi.shape
    archs = np.tile(np.where(dist.pruned >= 0, dist.pruned, 0), (cfg.n_paths, 1))
    active = dist.active
    if len(active) == 0:
        return archs, np.zeros((cfg.n_paths, 0, n_op))
    rows = dist.probs()[active]
    x = db_sample_categorical(rows, SamplerConfig(cfg.n_paths, cfg.alpha), rng)
    archs[:, active] = x.argmax(axis=-1)
    return archs, x


@dataclass
class StepReport:
    archs: np.ndarray
    scores: np.ndarray
    grad: np.ndarray
    evals: int


class _Evaluator:
    def __init__(self, table, budget):
        self.table = table
        self.budget = budget
        self.used = 0

    def __call__(self, archs):
        if self.budget is not None and self.used + len(archs) > self.budget:
            raise BudgetExhausted(f"evaluation budget {self.budget} exhausted")
        self.used += len(archs)
        return np.array([self.table.score(a) for a in archs])


def search_step(dist, table, cfg, opt, rng, evaluator=None):
    """One architecture update: sample, score, LOORF per edge, optimizer step.

    Returns the updated distribution (a copy) and a :class:`StepReport`. The
    update ascends the score when ``table.higher_is_better`` and descends
    otherwise; pruned edges are never touched.
    """
    evaluator = evaluator or _Evaluator(table, cfg.eval_budget)
    archs, x = sample_paths(dist, cfg, rng)
    scores = evaluator(archs)
    new = dist.copy()
    grad = np.zeros_like(dist.pi)
    active = dist.active
    if len(active):
        probs = dist.probs()[active]
        lookup = {a.tobytes(): s for a, s in zip(archs[:, active], scores)}
        grad[active] = loorf(x, probs, lambda row: lookup[row.argmax(axis=-1).tobytes()]).grad
        sign = 1.0 if table.higher_is_better else -1.0
        step = opt.direction(sign * grad)
        new.pi[active] += step[active]
    return new, StepReport(archs, scores, grad, len(archs))


def maybe_prune(dist, cfg):
    """Fix every active edge whose top-1 minus top-2 probability exceeds the threshold."""
    new = dist.copy()
    probs = dist.probs()
    for e in dist.active:
        top2 = np.sort(probs[e])[-2:]
        if top2[1] - top2[0] > cfg.prune_threshold:
            new.pruned[e] = int(np.argmax(probs[e]))
    return new


def entropy(probs):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.sum(np.where(probs > 0, probs * np.log(probs), 0.0), axis=-1)


@dataclass
class SearchResult:
    arch: tuple
    score: float
    best_arch: tuple
    best_score: float
    regret: float
    evals: int
    steps_run: int
    pruned: tuple
    status: str
    trajectory: Table
    dist: ArchDistribution

    def summary(self):
        items = {
            "version": __version__,
            "status": self.status,
            "arch": " ".join(map(str, self.arch)),
            "score": fmt(self.score),
            "best_arch": " ".join(map(str, self.best_arch)),
            "best_score": fmt(self.best_score),
            "regret": fmt(self.regret),
            "evals": self.evals,
            "steps_run": self.steps_run,
            "pruned_edges": " ".join(str(e) for e, v in enumerate(self.pruned) if v >= 0),
        }
        return "".join(f"{k}={v}\n" for k, v in items.items())


def run_search(space, table, cfg=SearchConfig()):
    """Warm-up (sampling only, uniform logits) then training with pruning.

    Stops early if every edge gets pruned or the evaluation budget runs out.
    """
    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(cfg.optimizer, cfg.lr, cfg.betas)
    evaluator = _Evaluator(table, cfg.eval_budget)
    dist = ArchDistribution.uniform(space)
    rows = []
    status = "ok"
    sign = 1.0 if table.higher_is_better else -1.0
    step = 0

    def record(phase, scores):
        best = scores.max() if table.higher_is_better else scores.min()
        pruned = ";".join(str(e) for e in range(space.n_e) if dist.pruned[e] >= 0)
        rows.append([step, phase, *entropy(dist.probs()).tolist(), float(best), pruned])

    try:
        for _ in range(cfg.warmup_steps):
            archs, _ = sample_paths(dist, cfg, rng)
            record("warmup", evaluator(archs))
            step += 1
        for _ in range(cfg.train_steps):
            if len(dist.active) == 0:
                status = "all_pruned"
                break
            dist, report = search_step(dist, table, cfg, opt, rng, evaluator)
            dist = maybe_prune(dist, cfg)
            record("train", report.scores)
            step += 1
    except BudgetExhausted:
        status = "budget_exhausted"

    arch = dist.argmax()
    score = table.score(arch)
    best_arch, best_score = table.best()
    regret = sign * (best_score - score)
    header = (["step", "phase"] + [f"entropy_{e + 1}" for e in range(space.n_e)]
              + ["best_sampled_score", "pruned_edges"])
    comments = [f"dbsurf {__version__}", "trajectory=search"]
    comments += [f"{k}={fmt(v) if not isinstance(v, tuple) else ' '.join(map(fmt, v))}"
                 for k, v in cfg.__dict__.items()]
    trajectory = Table("search", header, rows, comments)
    return SearchResult(arch, score, best_arch, best_score, regret, evaluator.used, step,
                        tuple(int(v) for v in dist.pruned), status, trajectory, dist)
