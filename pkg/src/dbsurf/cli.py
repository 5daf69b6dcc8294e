"""Command-line entry point.

Subcommands: ``sample``, ``oracle``, ``sweep``, ``optimize``, ``nas gen`` and
``nas search``. ``--config FILE`` reads flat ``key=value`` lines whose keys are
flag names (``n-list`` or ``n_list``); flags given on the command line win.

Exit codes: 0 success, 1 internal error, 2 validation error, 3 resource guard.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .bench import SWEEPS, OptimRunSpec, SweepSpec, Table, fmt, optimize_toy, toy_objective
from .estimators import debias_factor, loorf
from .nas_sim import (
    SearchConfig,
    SearchSpace,
    TableFormatError,
    generate_synthetic_table,
    load_table,
    nasbench201_space,
    run_search,
)
from .oracle import (
    ResourceGuardError,
    closed_form_variance,
    enumerate_path_law,
    estimator_moments,
    moments,
    nu_recursion,
)
from .prob_core import discrepancy, empirical_mean, sigmoid
from .sampler import (
    FiniteSupport,
    SamplerConfig,
    db_sample_bernoulli,
    db_sample_categorical,
    db_sample_finite_support,
    db_sample_infinite_support,
    group_tail_scipy,
)

EXIT_INTERNAL, EXIT_VALIDATION, EXIT_GUARD = 1, 2, 3
BUILD_ID = f"dbsurf {__version__}"


class UsageError(ValueError):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in vals]


def _names(text):
    return [v for v in text.replace(" ", "").split(",") if v]


def _flag(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (or directory for sweep)")
    p.add_argument("--config", default=None, help="key=value file; flags override it")
    p.add_argument("--jobs", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="dbsurf", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=BUILD_ID)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="draw DBsample / i.i.d. samples")
    _common(s)
    src = s.add_mutually_exclusive_group()
    src.add_argument("--p", default=None,
                     help="probabilities: comma list; categorical rows separated by ';'")
    src.add_argument("--theta", default=None, help="logits (bernoulli mode)")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--mode", choices=["bernoulli", "categorical", "finite", "infinite"],
                   default="bernoulli")
    s.add_argument("--atoms", type=_floats, default=None, help="finite mode support points")
    s.add_argument("--dist", default=None,
                   help="infinite mode: poisson:<lam>, geometric:<p> or nbinom:<r>:<p>")
    s.add_argument("--epsilon", type=float, default=1e-6)
    s.add_argument("--rng", choices=["pcg64", "mt19937"], default="pcg64",
                   help="mt19937 reproduces numpy's legacy global stream for a given seed")

    o = sub.add_parser("oracle", help="exact path laws, moments and closed forms")
    _common(o)
    o.add_argument("--query", choices=["law", "nu", "moments", "variance"], required=True)
    o.add_argument("--p", type=float, required=True)
    o.add_argument("--alpha", type=float, default=1.0)
    o.add_argument("--n", type=int, default=2)
    o.add_argument("--target", type=float, default=0.49)

    w = sub.add_parser("sweep", help="CSV sweeps over the probability grid")
    _common(w)
    w.add_argument("kind", choices=sorted(SWEEPS))
    d = SweepSpec()
    w.add_argument("--p-min", type=float, default=d.p_min)
    w.add_argument("--p-max", type=float, default=d.p_max)
    w.add_argument("--p-count", type=int, default=d.p_count)
    w.add_argument("--n-list", type=_ints, default=list(d.n_list))
    w.add_argument("--alpha-list", type=_floats, default=list(d.alpha_list))
    w.add_argument("--estimators", type=_names, default=list(d.estimator_list))
    w.add_argument("--mc-reps", type=int, default=d.mc_reps)
    w.add_argument("--method", choices=["auto", "enum", "mc"], default=d.method)
    w.add_argument("--d", type=int, default=d.d)
    w.add_argument("--target", type=float, default=d.target)
    w.add_argument("--corr-n", type=int, default=4, help="sample count for corrmatrix")
    w.add_argument("--tag", default=None, help="file tag when --out is a directory")

    t = sub.add_parser("optimize", help="toy objective optimization trajectory")
    _common(t)
    r = OptimRunSpec()
    t.add_argument("--theta0", type=float, default=r.theta0)
    t.add_argument("--target", type=float, default=r.target)
    t.add_argument("--step-size", type=float, default=r.step_size)
    t.add_argument("--steps", type=int, default=r.steps)
    t.add_argument("--n", type=int, default=r.n)
    t.add_argument("--alpha", type=float, default=r.alpha)
    t.add_argument("--estimator", default=r.estimator,
                   choices=["exact", "reinforce", "loorf", "dbsurf", "dbsurf_debiased"])
    t.add_argument("--maximize", type=_flag, default=r.maximize)
    t.add_argument("--optimizer", choices=["adam", "sgd"], default=r.optimizer)

    nas = sub.add_parser("nas", help="tabular architecture search")
    nsub = nas.add_subparsers(dest="nas_command", required=True)
    g = nsub.add_parser("gen", help="write a synthetic score table")
    _common(g)
    g.add_argument("--n-e", type=int, default=6)
    g.add_argument("--n-op", type=int, default=5)
    g.add_argument("--pair-scale", type=float, default=0.5)

    q = nsub.add_parser("search", help="run the search on a table")
    _common(q)
    tsrc = q.add_mutually_exclusive_group()
    tsrc.add_argument("--table", default=None, help="score table CSV")
    tsrc.add_argument("--table-seed", type=int, default=None,
                      help="generate a synthetic table with this seed instead")
    q.add_argument("--n-e", type=int, default=6)
    q.add_argument("--n-op", type=int, default=5)
    q.add_argument("--pair-scale", type=float, default=0.5)
    q.add_argument("--lower-is-better", action="store_true")
    c = SearchConfig()
    q.add_argument("--n-paths", type=int, default=c.n_paths)
    q.add_argument("--alpha", type=float, default=c.alpha)
    q.add_argument("--warmup-steps", type=int, default=c.warmup_steps)
    q.add_argument("--train-steps", type=int, default=c.train_steps)
    q.add_argument("--prune-threshold", type=float, default=c.prune_threshold)
    q.add_argument("--optimizer", choices=["adam", "sgd"], default=c.optimizer)
    q.add_argument("--lr", type=float, default=c.lr)
    q.add_argument("--beta1", type=float, default=c.betas[0])
    q.add_argument("--beta2", type=float, default=c.betas[1])
    q.add_argument("--eval-budget", type=int, default=None)
    return parser


def read_config(path):
    """Flat ``key=value`` lines to ``--key value`` arguments; ``#`` starts a comment."""
    args = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key = key.strip().replace("_", "-")
            if key == "config":
                raise UsageError(f"{path}:{lineno}: nested config files are not supported")
            value = value.strip()
            if key == "lower-is-better":
                if _flag(value):
                    args.append("--lower-is-better")
                continue
            args += [f"--{key}", value]
    return args


def _splice_config(argv):
    """Insert config-file arguments right after the subcommand words so flags override them."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    words = 2 if argv and argv[0] == "nas" else 1
    return argv[:words] + read_config(known.config) + argv[words:]


def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline="\n"), True


def _emit(text, path):
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def _make_rng(args):
    if getattr(args, "rng", "pcg64") == "mt19937":
        return np.random.RandomState(args.seed)
    return np.random.default_rng(args.seed)


def _infinite_support(spec, epsilon):
    from scipy import stats

    name, _, rest = spec.partition(":")
    params = [float(v) for v in rest.split(":") if v]
    if name == "poisson" and len(params) == 1:
        dist = stats.poisson(params[0])
    elif name == "geometric" and len(params) == 1:
        dist = stats.geom(params[0])
    elif name == "nbinom" and len(params) == 2:
        dist = stats.nbinom(params[0], params[1])
    else:
        raise UsageError(f"unsupported --dist {spec!r}")
    return group_tail_scipy(dist, epsilon)


def cmd_sample(args):
    cfg = SamplerConfig(args.n, args.alpha, args.seed)
    rng = _make_rng(args)
    comments = [BUILD_ID, f"mode={args.mode}", f"n={args.n}", f"alpha={fmt(args.alpha)}",
                f"seed={args.seed}"]
    if args.mode == "bernoulli":
        if args.theta is not None:
            p = np.atleast_1d(sigmoid(np.array(_floats(args.theta))))
        elif args.p is not None:
            p = np.array(_floats(args.p))
        else:
            raise UsageError("bernoulli mode needs --p or --theta")
        x = db_sample_bernoulli(p, cfg, rng)
        header = [f"x_{k + 1}" for k in range(x.shape[1])]
        rows = x.astype(int).tolist()
        footer = [f"p_hat={' '.join(fmt(v) for v in empirical_mean(x))}",
                  f"discrepancy={' '.join(fmt(v) for v in discrepancy(x, p))}"]
    elif args.mode == "categorical":
        if args.p is None:
            raise UsageError("categorical mode needs --p rows")
        rows_p = np.array([_floats(r) for r in args.p.split(";")])
        x = db_sample_categorical(rows_p, cfg, rng)
        idx = x.argmax(axis=-1)
        header = [f"slot_{k + 1}" for k in range(rows_p.shape[0])]
        rows = idx.tolist()
        footer = [f"p_hat={';'.join(' '.join(fmt(v) for v in r) for r in x.mean(axis=0))}",
                  f"discrepancy={';'.join(' '.join(fmt(v) for v in r) for r in x.mean(axis=0) - rows_p)}"]
    elif args.mode == "finite":
        if args.p is None or args.atoms is None:
            raise UsageError("finite mode needs --p and --atoms")
        support = FiniteSupport(tuple(args.atoms), tuple(_floats(args.p)))
        vals = db_sample_finite_support(support, cfg, rng)
        header, rows = ["value"], [[fmt(v)] for v in vals]
        footer = [f"sample_mean={fmt(vals.mean())}"]
    else:
        if args.dist is None:
            raise UsageError("infinite mode needs --dist")
        support = _infinite_support(args.dist, args.epsilon)
        vals = db_sample_infinite_support(support, cfg, rng)
        header, rows = ["value"], [[fmt(v)] for v in vals]
        footer = [f"head_atoms={len(support.atoms)}", f"tail_prob={fmt(support.tail_prob)}",
                  f"sample_mean={fmt(vals.mean())}"]
    table = Table("sample", header, rows, comments)
    _emit(table.to_csv() + "".join(f"# {line}\n" for line in footer), args.out)


def cmd_oracle(args):
    comments = [BUILD_ID, f"query={args.query}", f"p={fmt(args.p)}", f"alpha={fmt(args.alpha)}",
                f"n={args.n}"]
    if args.query == "law":
        law = enumerate_path_law(args.p, args.alpha, args.n)
        header = [f"x_{i + 1}" for i in range(args.n)] + ["prob"]
        rows = [list(map(int, path)) + [float(w)] for path, w in zip(law.paths, law.probs)]
    elif args.query == "nu":
        nu = nu_recursion(args.p, args.alpha, args.n)
        header = ["m"] + [f"k_{k}" for k in range(args.n + 1)]
        rows = [[m] + nu[m].tolist() for m in range(1, args.n + 1)]
    elif args.query == "moments":
        rep = moments(enumerate_path_law(args.p, args.alpha, args.n))
        comments.append(f"E_sq_discrepancy={fmt(rep.exp_sq_discrepancy)}")
        header = ["i", "j", "mu_i", "mu_j", "joint", "cov", "corr"]
        rows = [[i + 1, j + 1, rep.mu[i], rep.mu[j], rep.joint[i, j], rep.cov[i, j],
                 rep.corr[i, j]] for i in range(args.n) for j in range(args.n)]
    else:
        f = toy_objective(args.target)
        rep = moments(enumerate_path_law(args.p, args.alpha, 2))
        factor = debias_factor(args.p, rep.mu, rep.cond)
        _, var = estimator_moments(args.p, args.alpha, 2, f,
                                   lambda x, p, f_: loorf(x, p, f_).grad * factor)
        header = ["p", "alpha", "closed_form_variance", "enum_variance"]
        rows = [[args.p, args.alpha, closed_form_variance(args.p, args.alpha, f), float(var[0])]]
        comments.append(f"target={fmt(args.target)}")
    _emit(Table(args.query, header, rows, comments).to_csv(), args.out)


def cmd_sweep(args):
    spec = SweepSpec(args.p_min, args.p_max, args.p_count, tuple(args.n_list),
                     tuple(args.alpha_list), tuple(args.estimators), args.mc_reps, args.seed,
                     args.d, args.target, args.method)
    if args.kind == "corrmatrix":
        table = SWEEPS[args.kind](spec, n=args.corr_n, jobs=args.jobs)
    else:
        table = SWEEPS[args.kind](spec, jobs=args.jobs)
    out = args.out
    if out is not None and os.path.isdir(out):
        tag = args.tag or f"seed{args.seed}"
        out = os.path.join(out, f"{args.kind}_{tag}.csv")
    _emit(table.to_csv(), out)


def cmd_optimize(args):
    spec = OptimRunSpec(args.theta0, args.target, args.step_size, args.steps, args.n,
                        args.alpha, args.estimator, args.maximize, args.seed, args.optimizer)
    _emit(optimize_toy(spec).table.to_csv(), args.out)


def _space(args):
    if args.n_e == 6 and args.n_op == 5:
        return nasbench201_space()
    return SearchSpace(args.n_e, args.n_op)


def cmd_nas(args):
    if args.nas_command == "gen":
        table = generate_synthetic_table(_space(args), args.seed, args.pair_scale)
        _emit(table.to_csv(), args.out)
        return
    if args.table is not None:
        table = load_table(args.table)
        if args.lower_is_better:
            table.higher_is_better = False
    else:
        seed = args.table_seed if args.table_seed is not None else 0
        table = generate_synthetic_table(_space(args), seed, args.pair_scale)
        table.higher_is_better = not args.lower_is_better
    cfg = SearchConfig(args.n_paths, args.alpha, args.warmup_steps, args.train_steps,
                       args.prune_threshold, args.optimizer, args.lr, (args.beta1, args.beta2),
                       args.seed, args.eval_budget)
    result = run_search(table.space, table, cfg)
    if args.out is None:
        sys.stdout.write(result.summary())
        return
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "summary.txt"), "w", newline="\n") as fh:
        fh.write(result.summary())
    result.trajectory.write(os.path.join(args.out, "trajectory.csv"))


COMMANDS = {
    "sample": cmd_sample,
    "oracle": cmd_oracle,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "nas": cmd_nas,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _splice_config(argv)
    except (OSError, UsageError) as exc:
        print(f"dbsurf: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if getattr(args, "jobs", 1) < 1:
        print("dbsurf: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        COMMANDS[args.command](args)
    except ResourceGuardError as exc:
        print(f"dbsurf: resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, TableFormatError, KeyError, OSError) as exc:
        print(f"dbsurf: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"dbsurf: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
