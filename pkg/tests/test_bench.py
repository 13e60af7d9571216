import runpy
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_runs(capsys):
    mod = runpy.run_path(str(BENCH))
    mod["main"](["--sizes", "64", "--repeat", "1"])
    out = capsys.readouterr().out
    assert "active backend" in out
    assert sum(line.startswith(("toeplitz", "commutator", "window", "truncated")) for line in out.splitlines()) == 4
