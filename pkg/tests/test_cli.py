import numpy as np
import pytest

from dbsurf import __version__
from dbsurf.cli import main, read_config

from .reference_dbsample import DBsample


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def data_rows(text):
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    return [l.split(",") for l in lines[1:]]


def comment(text, key):
    for line in text.splitlines():
        if line.startswith(f"# {key}="):
            return line.split("=", 1)[1]
    raise KeyError(key)


class TestBasics:
    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            from dbsurf.cli import build_parser
            build_parser().parse_args(["--version"])
        assert __version__ in capsys.readouterr().out
        assert main(["--version"]) == 0

    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, "sample", "--p", "0.5", "--bogus", "1")
        assert code == 2 and "unrecognized" in err

    def test_mutually_exclusive(self, capsys):
        code, _, err = run(capsys, "sample", "--p", "0.5", "--theta", "0")
        assert code == 2 and "not allowed" in err

    def test_jobs_must_be_positive(self, capsys):
        assert run(capsys, "sweep", "biascorr", "--jobs", "0")[0] == 2


class TestSample:
    def test_antithetic(self, capsys):
        code, out, _ = run(capsys, "sample", "--p", "0.5", "--n", "2", "--alpha", "1", "--seed", "7")
        assert code == 0
        rows = data_rows(out)
        assert sorted(int(r[0]) for r in rows) == [0, 1]
        assert float(comment(out, "discrepancy")) == 0.0

    def test_embeds_version(self, capsys):
        _, out, _ = run(capsys, "sample", "--p", "0.3")
        assert out.startswith(f"# dbsurf {__version__}")

    def test_invalid_p(self, capsys):
        code, _, err = run(capsys, "sample", "--p", "1.5")
        assert code == 2 and "error" in err

    @pytest.mark.parametrize("seed", [0, 5, 11])
    def test_reference_parity_alpha_zero(self, capsys, seed):
        _, out, _ = run(capsys, "sample", "--p", "0.3,0.6", "--n", "6", "--alpha", "0",
                        "--seed", str(seed), "--rng", "mt19937")
        np.random.seed(seed)
        ref = DBsample(np.array([0.3, 0.6]), 6, 0.0)
        np.testing.assert_array_equal(np.array(data_rows(out), dtype=float), ref)

    def test_theta(self, capsys):
        _, a, _ = run(capsys, "sample", "--theta", "0", "--n", "4", "--seed", "2")
        _, b, _ = run(capsys, "sample", "--p", "0.5", "--n", "4", "--seed", "2")
        assert data_rows(a) == data_rows(b)

    def test_other_modes(self, capsys):
        code, out, _ = run(capsys, "sample", "--mode", "categorical", "--p", "0.2,0.8;0.5,0.5",
                           "--n", "3")
        assert code == 0 and len(data_rows(out)) == 3
        code, out, _ = run(capsys, "sample", "--mode", "finite", "--p", "0.5,0.5",
                           "--atoms=-1,1", "--n", "2")
        assert code == 0 and float(comment(out, "sample_mean")) == 0.0
        code, out, _ = run(capsys, "sample", "--mode", "infinite", "--dist", "geometric:0.5",
                           "--epsilon", "0.25", "--n", "5")
        assert code == 0 and comment(out, "head_atoms") == "2"
        assert run(capsys, "sample", "--mode", "infinite", "--dist", "zipf:2")[0] == 2
        assert run(capsys, "sample", "--mode", "finite", "--p", "0.5,0.5")[0] == 2


class TestOracle:
    def test_variance(self, capsys):
        code, out, _ = run(capsys, "oracle", "--query", "variance", "--p", "0.5", "--alpha", "1")
        assert code == 0
        (row,) = data_rows(out)
        assert float(row[2]) == 0.0 and abs(float(row[3])) < 1e-18

    def test_moments_alpha_zero(self, capsys):
        _, out, _ = run(capsys, "oracle", "--query", "moments", "--p", "0.3", "--alpha", "0",
                        "--n", "3")
        for r in data_rows(out):
            if r[0] != r[1]:
                assert abs(float(r[6])) < 1e-12

    def test_nu_first_row(self, capsys):
        _, out, _ = run(capsys, "oracle", "--query", "nu", "--p", "0.3", "--n", "1")
        assert [float(v) for v in data_rows(out)[0][1:]] == [0.7, 0.3]

    def test_law(self, capsys):
        _, out, _ = run(capsys, "oracle", "--query", "law", "--p", "0.5", "--alpha", "1")
        probs = {tuple(r[:2]): float(r[2]) for r in data_rows(out)}
        assert probs[("0", "1")] == 0.5 and probs[("1", "1")] == 0.0

    def test_guard_exit_code(self, capsys):
        code, _, err = run(capsys, "oracle", "--query", "law", "--p", "0.5", "--n", "25")
        assert code == 3 and "resource guard" in err


class TestSweep:
    def test_default_variance_rows(self, capsys, tmp_path):
        code, _, _ = run(capsys, "sweep", "variance", "--out", str(tmp_path), "--tag", "t")
        assert code == 0
        text = (tmp_path / "variance_t.csv").read_text()
        assert len(data_rows(text)) == 49 * 2 * 2
        assert f"# dbsurf {__version__}" in text

    def test_enum_guard(self, capsys):
        code, _, _ = run(capsys, "sweep", "variance", "--method", "enum", "--n-list", "30",
                         "--p-count", "1")
        assert code == 3

    def test_bad_list(self, capsys):
        assert run(capsys, "sweep", "variance", "--n-list", "a,b")[0] == 2

    def test_default_name_uses_seed(self, capsys, tmp_path):
        run(capsys, "sweep", "biascorr", "--out", str(tmp_path), "--seed", "4")
        assert (tmp_path / "biascorr_seed4.csv").exists()


class TestConfig:
    def test_file_and_override(self, capsys, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("# toy run\nsteps=5\nseed=3\nstep_size=0.05\n")
        _, a, _ = run(capsys, "optimize", "--config", str(cfg))
        assert len(data_rows(a)) == 6 and comment(a, "seed") == "3"
        _, b, _ = run(capsys, "optimize", "--config", str(cfg), "--steps", "7")
        assert len(data_rows(b)) == 8 and comment(b, "step_size") == "0.050000000000000003"

    def test_nas_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("n_e=2\nn_op=3\nwarmup_steps=2\ntrain_steps=5\nlower_is_better=true\n")
        code, out, _ = run(capsys, "nas", "search", "--config", str(cfg))
        assert code == 0 and "status=ok" in out

    def test_read_config_errors(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("steps\n")
        with pytest.raises(Exception):
            read_config(bad)

    def test_bad_config_exit(self, capsys, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("steps\n")
        assert run(capsys, "optimize", "--config", str(bad))[0] == 2
        assert run(capsys, "optimize", "--config", str(tmp_path / "missing.txt"))[0] == 2
        unknown = tmp_path / "unknown.txt"
        unknown.write_text("nonsense=1\n")
        assert run(capsys, "optimize", "--config", str(unknown))[0] == 2


class TestOptimize:
    def test_reaches_optimum(self, capsys):
        code, out, _ = run(capsys, "optimize", "--seed", "1")
        assert code == 0 and comment(out, "status") == "ok"
        assert float(data_rows(out)[-1][2]) > 0.99

    def test_invalid(self, capsys):
        assert run(capsys, "optimize", "--steps", "0")[0] == 2
        assert run(capsys, "optimize", "--estimator", "nope", "--steps", "2")[0] == 2


class TestNas:
    def test_gen_and_search_table(self, capsys, tmp_path):
        table = tmp_path / "t.csv"
        assert run(capsys, "nas", "gen", "--n-e", "2", "--n-op", "3", "--out", str(table))[0] == 0
        out_dir = tmp_path / "run"
        code, _, _ = run(capsys, "nas", "search", "--table", str(table), "--warmup-steps", "2",
                         "--train-steps", "10", "--out", str(out_dir))
        assert code == 0
        assert "regret=" in (out_dir / "summary.txt").read_text()
        assert len(data_rows((out_dir / "trajectory.csv").read_text())) == 12

    def test_bad_table(self, capsys, tmp_path):
        table = tmp_path / "t.csv"
        table.write_text("op_1,score\n0,x\n")
        code, _, err = run(capsys, "nas", "search", "--table", str(table))
        assert code == 2 and "line 2" in err

    def test_budget(self, capsys):
        code, out, _ = run(capsys, "nas", "search", "--n-e", "2", "--n-op", "2",
                           "--warmup-steps", "1", "--train-steps", "5", "--eval-budget", "12")
        assert code == 0 and "status=budget_exhausted" in out


def _files(path):
    return {p.relative_to(path): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


COMMANDS = [
    ["sample", "--p", "0.3,0.7", "--n", "8"],
    ["sample", "--mode", "infinite", "--dist", "poisson:2", "--n", "20"],
    ["oracle", "--query", "moments", "--p", "0.4", "--n", "4"],
    ["sweep", "variance", "--p-count", "7", "--method", "mc", "--mc-reps", "50",
     "--estimators", "loorf,dbsurf"],
    ["sweep", "discrepancy", "--p-count", "7", "--method", "mc", "--mc-reps", "200"],
    ["sweep", "corrmatrix", "--p-count", "5"],
    ["optimize", "--steps", "50"],
    ["nas", "gen", "--n-e", "3", "--n-op", "3"],
]


@pytest.mark.parametrize("cmd", COMMANDS, ids=lambda c: "_".join(c[:2]))
def test_byte_identical_reruns(capsys, tmp_path, cmd):
    outs = []
    for k, jobs in enumerate(["1", "1", "2"]):
        target = tmp_path / f"out{k}.csv"
        extra = ["--jobs", jobs] if cmd[0] == "sweep" else []
        assert main(cmd + ["--seed", "3", "--out", str(target)] + extra) == 0
        outs.append(target.read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1] == outs[2]


def test_nas_search_rerun_identical(tmp_path):
    argv = ["nas", "search", "--n-e", "3", "--n-op", "3", "--warmup-steps", "3",
            "--train-steps", "40", "--seed", "2"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
