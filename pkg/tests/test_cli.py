import csv
import shutil
import subprocess
import sys

import numpy as np
import pytest

from fracsparse.cli import main, parse_args
from fracsparse.dyadic import SparseFamily, verify_sparse
from fracsparse.grid import Box, GridFunction, sample


def rows(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# fracsparse ")
    return lines[0], list(csv.DictReader(lines[1:]))


def test_kappa(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "kappa", "--K", "4", "--m", "1"]) == 0
    head, r = rows(tmp_path / "kappa.csv")
    assert float(r[0]["kappa"]) == pytest.approx(16.0)
    assert "m=1" in head and "seed=0" in head


def test_kappa_unit_constants(tmp_path, capsys):
    main(["--out", str(tmp_path), "kappa", "--m", "1"])
    assert float(capsys.readouterr().out) == 2.0


def test_config_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 7\nm = 0\nK = 2  # inline\n")
    main(["--config", str(cfg), "kappa", "--m", "2", "--out", str(tmp_path)])
    head, r = rows(tmp_path / "kappa.csv")
    assert "seed=7" in head and "m=2" in head and "K=2.0" in head


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense = 1\n")
    with pytest.raises(SystemExit):
        parse_args(["--config", str(cfg), "kappa"])


def test_global_flags_after_subcommand(tmp_path):
    args = parse_args(["kappa", "--seed", "5", "--grid", "64", "--out", str(tmp_path)])
    assert (args.seed, args.grid, args.out) == (5, 64, str(tmp_path))
    args = parse_args(["--seed", "6", "kappa"])
    assert args.seed == 6


def test_sparse_dominate_with_files(tmp_path, capsys):
    box = Box((0.0,), 1.0)
    f = sample(lambda x: ((x >= 3 / 8) & (x < 5 / 8)).astype(float), box, 128)
    b = sample(lambda x: x, box, 128)
    f.to_csv(tmp_path / "f.csv")
    b.to_csv(tmp_path / "b.csv")
    main(["--out", str(tmp_path), "sparse-dominate", "--f", str(tmp_path / "f.csv"), "--b", str(tmp_path / "b.csv"), "--m", "1"])
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "constant,max_adaptive_C,family_sizes"
    _, summ = rows(tmp_path / "sparse_summary.csv")
    assert np.isfinite(float(summ[0]["constant"]))
    _, rep = rows(tmp_path / "sparse_report.csv")
    assert len(rep) == 128 and set(rep[0]) == {"cell", "lhs", "rhs", "ratio"}
    fams = sorted(tmp_path.glob("sparse_S*.csv"))
    assert fams
    for p in fams:
        assert verify_sparse(SparseFamily.from_csv(p)).passed


def test_sparse_dominate_random_seeded(tmp_path):
    for d in ("a", "b"):
        main(["--out", str(tmp_path / d), "--seed", "3", "--grid", "64", "sparse-dominate", "--m", "0"])
    # headers differ only in --out; the data lines must match exactly
    a, b = ((tmp_path / d / "sparse_summary.csv").read_text().splitlines()[1:] for d in ("a", "b"))
    assert a == b


def test_domination_report_and_plot(tmp_path):
    main(["--out", str(tmp_path), "--grid", "64", "--emit-plot-script", "domination-report", "--trials", "2", "--m", "1"])
    head, r = rows(tmp_path / "domination_report.csv")
    assert len(r) == 2 and "trials=2" in head
    script = (tmp_path / "plot_domination_report.py").read_text()
    compile(script, "plot", "exec")
    assert "domination_report.csv" in script


def test_weights(tmp_path):
    box = Box((-1.0,), 2.0)
    sample(lambda x: np.abs(x) ** 0.1, box, 64).to_csv(tmp_path / "w.csv")
    main(["--out", str(tmp_path), "weights", "--weight", str(tmp_path / "w.csv")])
    _, r = rows(tmp_path / "weights_certificate.csv")
    names = [x["constant"] for x in r]
    assert names == ["A_p", "A_pq", "A_p(w^p)", "A_q(w^q)", "A_inf"]
    vals = {x["constant"]: float(x["value"]) for x in r}
    assert all(v >= 1 for v in vals.values())
    assert vals["A_q(w^q)"] <= vals["A_pq"] * (1 + 1e-12)


def test_bloom_and_necessity(tmp_path):
    main(["--out", str(tmp_path), "--grid", "64", "bloom-check", "--trials", "3"])
    _, r = rows(tmp_path / "bloom.csv")
    assert float(r[0]["empirical_c"]) > 0
    main(["--out", str(tmp_path), "--grid", "64", "necessity", "--symbol", "x"])
    _, r = rows(tmp_path / "necessity.csv")
    assert r[0]["holds_i"] == "True"


def test_sharpness_small(tmp_path):
    main(["--out", str(tmp_path), "--grid", "256", "--emit-plot-script", "sharpness", "--m", "0", "--no-refine-check"])
    head, r = rows(tmp_path / "sharpness.csv")
    assert len(r) == 6 and "slope=" in head
    assert (tmp_path / "plot_sharpness.py").exists()


@pytest.mark.parametrize("op", ["ialpha", "malpha", "grand", "commutator"])
def test_apply(tmp_path, op):
    box = Box((0.0,), 1.0)
    f = GridFunction(box, 32, np.random.default_rng(0).normal(size=32))
    f.to_csv(tmp_path / "f.csv")
    sample(lambda x: x, box, 32).to_csv(tmp_path / "b.csv")
    main(["--out", str(tmp_path), "apply", "--op", op, "--f", str(tmp_path / "f.csv"), "--b", str(tmp_path / "b.csv")])
    g = GridFunction.from_csv(tmp_path / f"apply_{op}.csv")
    assert g.same_grid(f)


def test_apply_commutator_needs_b(tmp_path):
    sample(lambda x: x, Box((0.0,), 1.0), 8).to_csv(tmp_path / "f.csv")
    with pytest.raises(SystemExit):
        main(["--out", str(tmp_path), "apply", "--op", "commutator", "--f", str(tmp_path / "f.csv")])


def test_console_script():
    exe = shutil.which("fracsparse")
    cmd = [exe] if exe else [sys.executable, "-m", "fracsparse.cli"]
    out = subprocess.run(cmd + ["--help"], capture_output=True, text=True, check=True).stdout
    for name in ("sharpness", "sparse-dominate", "weights", "bloom-check", "necessity", "kappa", "apply"):
        assert name in out
