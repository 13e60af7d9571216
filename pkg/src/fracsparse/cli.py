"""Command line entry point ``fracsparse``."""

from __future__ import annotations

import argparse
import csv
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import experiments as ex
from .dyadic import CubeFamily, base_lattice
from .frac_ops import frac_integral, frac_maximal, grand_maximal_truncated, iterated_commutator
from .grid import Box, ExponentSet, GridFunction, sample
from .sparse import build_sparse_domination
from .weights import PowerWeight, Weight, ainfty_constant, ap_constant, apq_constant

GLOBAL_DEFAULTS = {"seed": 0, "out": ".", "grid": None, "emit_plot_script": False}


def _num(s: str) -> float:
    return float(Fraction(s.strip()))


def _float_list(s: str) -> list[float]:
    return [_num(t) for t in s.replace(";", ",").split(",") if t.strip()]


def _common(suppress: bool) -> argparse.ArgumentParser:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d(0), help="RNG seed (u64)")
    p.add_argument("--out", default=d("."), help="output directory")
    p.add_argument("--grid", type=int, default=d(None), help="cells per side N")
    p.add_argument("--emit-plot-script", action="store_true", default=d(False))
    return p


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="fracsparse", parents=[_common(False)])
    parser.add_argument("--config", help="key=value file; command line flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = [_common(True)]
    subs = {}

    s = sub.add_parser("sharpness", parents=parent, help="power-weight scaling experiment")
    s.add_argument("--alpha", type=_num, default=0.5)
    s.add_argument("--p", type=_num, default=4 / 3)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--deltas", type=_float_list, default=[2.0**-k for k in range(3, 9)])
    s.add_argument("--half-width", type=_num, default=4.0)
    s.add_argument("--no-refine-check", action="store_true")
    subs["sharpness"] = s

    s = sub.add_parser("sparse-dominate", parents=parent, help="build and certify a sparse domination")
    s.add_argument("--alpha", type=_num, default=0.5)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--b", help="symbol CSV (random if omitted)")
    s.add_argument("--f", help="function CSV (random if omitted)")
    s.add_argument("--depth", type=int, default=None, help="leaf level of the recursion")
    subs["sparse-dominate"] = s

    s = sub.add_parser("domination-report", parents=parent, help="constants over seeded random pairs")
    s.add_argument("--alpha", type=_num, default=0.5)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--trials", type=int, default=20)
    subs["domination-report"] = s

    s = sub.add_parser("weights", parents=parent, help="weight constants of a sampled weight")
    s.add_argument("--weight", required=True, help="weight CSV")
    s.add_argument("--p", type=_num, default=4 / 3)
    s.add_argument("--q", type=_num, default=4.0)
    s.add_argument("--family-depth", type=int, default=None)
    subs["weights"] = s

    s = sub.add_parser("bloom-check", parents=parent, help="two-weight upper bound check")
    s.add_argument("--alpha", type=_num, default=0.5)
    s.add_argument("--p", type=_num, default=4 / 3)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--mu-exp", type=_num, default=0.125)
    s.add_argument("--lam-exp", type=_num, default=-0.125)
    s.add_argument("--symbol", choices=["log", "x", "const"], default="log")
    subs["bloom-check"] = s

    s = sub.add_parser("necessity", parents=parent, help="set construction on one cube")
    s.add_argument("--alpha", type=_num, default=0.5)
    s.add_argument("--p", type=_num, default=4 / 3)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--symbol", choices=["log", "x", "random"], default="log")
    s.add_argument("--level", type=int, default=0)
    s.add_argument("--index", type=int, default=0)
    subs["necessity"] = s

    s = sub.add_parser("kappa", parents=parent, help="evaluate kappa_m")
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--alpha", type=_num, default=0.5)
    s.add_argument("--p", type=_num, default=4 / 3)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--K", type=_num, default=None, help="one-weight constant [mu]_{A_p,q}")
    for name in ("lam-apq", "mu-apq", "lam-p-ap", "mu-p-ap", "lam-q-aq", "mu-q-aq"):
        s.add_argument(f"--{name}", type=_num, default=1.0)
    subs["kappa"] = s

    s = sub.add_parser("apply", parents=parent, help="apply one operator to a grid function")
    s.add_argument("--op", choices=["ialpha", "malpha", "grand", "commutator"], required=True)
    s.add_argument("--alpha", type=_num, default=0.5)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--b", help="symbol CSV (commutator only)")
    s.add_argument("--f", required=True, help="function CSV")
    subs["apply"] = s
    return parser, subs


def read_config(path: str) -> dict[str, str]:
    cfg = {}
    for ln in Path(path).read_text().splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise ValueError(f"{path}: expected key=value, got {ln!r}")
        k, v = ln.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def _apply_config(parser, subparser, cfg: dict[str, str]) -> None:
    for key, raw in cfg.items():
        target = None
        for p in (subparser, parser):
            for act in p._actions:
                if act.dest == key and act.option_strings:
                    target = (p, act)
                    break
            if target:
                break
        if target is None:
            raise SystemExit(f"unknown config key {key!r}")
        p, act = target
        if isinstance(act, argparse._StoreTrueAction):
            val = raw.lower() in ("1", "true", "yes", "on")
        else:
            val = act.type(raw) if act.type else raw
        p.set_defaults(**{key: val})
        if key in GLOBAL_DEFAULTS:
            parser.set_defaults(**{key: val})


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cmd = next((a for a in argv if a in subs), None)
        if cmd is not None:
            _apply_config(parser, subs[cmd], read_config(known.config))
    return parser.parse_args(argv)


def _header(args: argparse.Namespace) -> str:
    items = " ".join(f"{k}={v}" for k, v in sorted(vars(args).items()))
    return f"fracsparse {args.command} {items}"


def _write_csv(path: Path, header: str, fields: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        wr = csv.writer(fh)
        wr.writerow(fields)
        for r in rows:
            wr.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])


PLOT_TEMPLATE = '''"""Plot {title} from {csv_name}."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
with open(path) as fh:
    rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
x = [float(r["{x}"]) for r in rows]
y = [float(r["{y}"]) for r in rows]
fig, ax = plt.subplots()
ax.loglog(x, y, "o-")
ax.set_xlabel("{x}")
ax.set_ylabel("{y}")
ax.set_title("{title}")
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
'''


def _plot_script(out: Path, csv_name: str, x: str, y: str, title: str) -> None:
    (out / f"plot_{csv_name.rsplit('.', 1)[0]}.py").write_text(
        PLOT_TEMPLATE.format(csv_name=csv_name, x=x, y=y, title=title)
    )


def _random_pair(args, N: int) -> tuple[GridFunction, GridFunction]:
    box = Box((0.0,), 1.0)
    rng = np.random.default_rng(args.seed)
    f = ex.random_test_function(box, N, rng, "smooth")
    b = ex.random_test_function(box, N, rng, "smooth")
    return f, b


def cmd_sharpness(args, out: Path) -> int:
    N = args.grid or 2**12
    res = ex.sharpness_experiment(
        1, args.alpha, args.p, args.m, args.deltas, N, args.half_width, refine_check=not args.no_refine_check
    )
    rows = [[r.delta, r.K, r.R, r.numerator, r.denominator, r.grid_part, r.inner_tail, r.outer_tail] for r in res.rows]
    head = _header(args) + (
        f" | slope={res.fit.slope:.6g} theory={res.theory_slope:.6g} residual={res.fit.max_residual:.3g}"
        f" weight_slope={res.weight_fit.slope:.6g} dropped={list(res.dropped)} dual={res.dual}"
    )
    _write_csv(out / "sharpness.csv", head, ["delta", "K", "R", "numerator", "denominator", "grid_part", "inner_tail", "outer_tail"], rows)
    if args.emit_plot_script:
        _plot_script(out, "sharpness.csv", "K", "R", "R(delta) against [w_delta]")
    print(f"slope={res.fit.slope:.6f} theory={res.theory_slope:.6f} residual={res.fit.max_residual:.4f} weight_slope={res.weight_fit.slope:.6f}")
    return 0


def cmd_sparse(args, out: Path) -> int:
    N = args.grid or 2**8
    if args.f and args.b:
        f, b = GridFunction.from_csv(args.f), GridFunction.from_csv(args.b)
    else:
        f, b = _random_pair(args, N)
        if args.f:
            f = GridFunction.from_csv(args.f)
        if args.b:
            b = GridFunction.from_csv(args.b)
    rep = build_sparse_domination(f, b, args.alpha, args.m, depth=args.depth)
    head = _header(args)
    for S in rep.families:
        if len(S):
            S.to_csv(out / f"sparse_S{S.cubes[0].j}.csv", head)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rep.rhs > 0, rep.lhs / rep.rhs, 0.0)
    rows = [[i, float(rep.lhs[i]), float(rep.rhs[i]), float(ratio[i])] for i in range(f.size)]
    _write_csv(out / "sparse_report.csv", head, ["cell", "lhs", "rhs", "ratio"], rows)
    if args.emit_plot_script:
        _plot_script(out, "sparse_report.csv", "cell", "ratio", "pointwise lhs / rhs")
    sizes = ";".join(str(s) for s in rep.family_sizes)
    _write_csv(out / "sparse_summary.csv", head, ["constant", "max_adaptive_C", "family_sizes"], [[rep.constant, rep.max_adaptive_C, sizes]])
    print(f"constant,max_adaptive_C,family_sizes\n{rep.constant:.17g},{rep.max_adaptive_C:g},{sizes}")
    return 0


def cmd_domination_report(args, out: Path) -> int:
    rows = ex.domination_constant_report(1, args.alpha, args.m, args.trials, args.grid or 2**8, args.seed)
    ex.write_rows(out / "domination_report.csv", rows, _header(args))
    if args.emit_plot_script:
        _plot_script(out, "domination_report.csv", "trial", "constant", "measured domination constants")
    for r in rows:
        print(f"{r['trial']},{r['constant']:.6g}")
    return 0


def cmd_weights(args, out: Path) -> int:
    w = Weight(GridFunction.from_csv(args.weight))
    F = CubeFamily.standard(w.w.box, w.w.N, args.family_depth)
    p, q = args.p, args.q
    certs = [
        ("A_p", ap_constant(w, p, F)),
        ("A_pq", apq_constant(w, p, q, F)),
        ("A_p(w^p)", ap_constant(w.power(p), p, F)),
        ("A_q(w^q)", ap_constant(w.power(q), q, F)),
        ("A_inf", ainfty_constant(w, F)),
    ]
    rows = [[name, c.value, c.cube.j, c.cube.level, ";".join(map(str, c.cube.index))] for name, c in certs]
    _write_csv(out / "weights_certificate.csv", _header(args), ["constant", "value", "j", "k", "index"], rows)
    for r in rows:
        print(",".join(str(v) for v in r))
    return 0


def _symbol(kind: str, box: Box, N: int, seed: int) -> GridFunction:
    if kind == "log":
        return sample(lambda x: np.log(np.abs(x)), box, N)
    if kind == "x":
        return sample(lambda x: x, box, N)
    if kind == "const":
        return sample(lambda x: 0 * x + 1.0, box, N)
    return ex.random_test_function(box, N, np.random.default_rng(seed), "smooth")


def cmd_bloom(args, out: Path) -> int:
    N = args.grid or 2**8
    box = Box((-1.0,), 2.0)
    mu = PowerWeight.make(args.mu_exp, box, N)
    lam = PowerWeight.make(args.lam_exp, box, N)
    b = _symbol(args.symbol, box, N, args.seed)
    rep = ex.bloom_upper_check(mu, lam, b, args.m, args.alpha, args.p, args.trials, args.seed)
    fields = ["ratio", "bmo", "kappa", "empirical_c"] + list(rep.constants)
    row = [rep.ratio, rep.bmo, rep.kappa, rep.empirical_c] + list(rep.constants.values())
    _write_csv(out / "bloom.csv", _header(args), fields, [row])
    print(f"ratio={rep.ratio:.6g} kappa={rep.kappa:.6g} bmo={rep.bmo:.6g} c={rep.empirical_c:.6g}")
    return 0


def cmd_necessity(args, out: Path) -> int:
    N = args.grid or 2**8
    box = Box((-1.0,), 2.0)
    b = _symbol(args.symbol, box, N, args.seed)
    one = Weight(sample(lambda x: 0 * x + 1.0, box, N))
    Q = base_lattice(box, N).cube(args.level, (args.index,))
    rep = ex.necessity_check(b, one, one, args.m, args.alpha, Q, args.p)
    fields = list(rep.__dataclass_fields__)
    _write_csv(out / "necessity.csv", _header(args), fields, [[getattr(rep, k) for k in fields]])
    print(f"holds_i={rep.holds_i} lhs={rep.lhs_i:.6g} rhs={rep.rhs_i:.6g} c={rep.c:.6g}")
    return 0


def cmd_kappa(args, out: Path) -> int:
    exps = ExponentSet(args.n, args.alpha, args.p, args.m)
    if args.K is not None:
        inp = ex.KappaInputs.one_weight(exps, args.K)
    else:
        inp = ex.KappaInputs(exps, args.lam_apq, args.mu_apq, args.lam_p_ap, args.mu_p_ap, args.lam_q_aq, args.mu_q_aq)
    val = ex.kappa_m(inp)
    _write_csv(out / "kappa.csv", _header(args), ["kappa"], [[val]])
    print(f"{val:.17g}")
    return 0


def cmd_apply(args, out: Path) -> int:
    f = GridFunction.from_csv(args.f)
    if args.op == "ialpha":
        g = frac_integral(f, args.alpha)
    elif args.op == "malpha":
        g = frac_maximal(f, args.alpha, CubeFamily.standard(f.box, f.N))
    elif args.op == "grand":
        g = grand_maximal_truncated(f, args.alpha, CubeFamily.standard(f.box, f.N))
    else:
        if not args.b:
            raise SystemExit("--b is required for --op commutator")
        g = iterated_commutator(GridFunction.from_csv(args.b), args.m, f, args.alpha)
    path = out / f"apply_{args.op}.csv"
    g.to_csv(path)
    print(path)
    return 0


COMMANDS = {
    "sharpness": cmd_sharpness,
    "sparse-dominate": cmd_sparse,
    "domination-report": cmd_domination_report,
    "weights": cmd_weights,
    "bloom-check": cmd_bloom,
    "necessity": cmd_necessity,
    "kappa": cmd_kappa,
    "apply": cmd_apply,
}


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[args.command](args, out)


if __name__ == "__main__":
    sys.exit(main())
