"""Command line runner: ``czxlab <subcommand> [options]``.

Every subcommand writes ``<name>.json`` (config, version, result, timestamp)
into ``--output`` and, where the result is a table, ``<name>.csv``.  With
``--plot`` a PNG of the main sweep is written next to them.  Exit status is 0
when the checks pass, 1 when a check fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, experiments as ex
from .io import csv_with_config, dumps, envelope, rows_to_csv

# ---------------------------------------------------------------- selftests


def _st_kernel():
    from .kernel import bump, decay_factor, kernel_of_difference, pure
    yield "decay at r = 1 is 2^-theta2", np.isclose(decay_factor((0.5, 0.5), (0.25, 0.25), 0.5), 2 ** -0.5)
    yield "bump vanishes off its support", kernel_of_difference(bump(0.1, 0.1), 0.5, 0.01) == 0.0
    yield "pure kernel is even", np.isclose(kernel_of_difference(pure(), 0.3, -0.2),
                                            kernel_of_difference(pure(), -0.3, 0.2))


def _st_slice():
    from .kernel import pure, slice_closed_form, slice_integral
    yield "theta2 = 1 slice is pi / h", np.isclose(slice_closed_form(1.0, 0.5), 2 * np.pi)
    yield "quadrature matches closed form", np.isclose(
        slice_integral(pure(), (0.3, 0.5), 0.25), slice_closed_form(1.0, 0.25), rtol=1e-6)


def _st_hormander():
    from .kernel import hormander_integral, pure
    yield "x at the centre gives zero", hormander_integral(pure(), (0.5, 0.5), 0.25, (0.5, 0.5)).total == 0.0


def _st_haar():
    from .signals import haar_coeffs, haar_synth
    rng = np.random.default_rng(0)
    c = rng.standard_normal((4, 4, 4))
    yield "Haar synthesis inverts analysis", np.allclose(haar_coeffs(haar_synth(c, 2, 4), 2), c)


def _st_kgood():
    from .lattice import DyadicInterval, ShiftBits, is_k_good
    z = ShiftBits.zeros(4)
    yield "interval at the ancestor edge is not 2-good", not is_k_good(DyadicInterval(4, 0, z), 2)
    yield "inner interval is 2-good", is_k_good(DyadicInterval(4, 1, z), 2)


def _st_rep():
    from .rep import Paraproduct, apply_paraproduct, paraproduct_triple
    rng = np.random.default_rng(0)
    b = rng.standard_normal((16, 16))
    f = rng.standard_normal((16, 16))
    yield "constant symbol gives zero", np.allclose(apply_paraproduct(Paraproduct(np.ones((16, 16))), f), 0)
    yield "pi_b 1 = b - <b>", np.allclose(apply_paraproduct(Paraproduct(b), np.ones((16, 16))), b - b.mean())
    a1, a2, a3 = paraproduct_triple(np.full((16, 16), 2.0), f)
    yield "constant b: a1 = a2 = 0", np.allclose(a1, 0) and np.allclose(a2, 0)
    yield "constant b: a3 = c (f - <f>)", np.allclose(a3, 2.0 * (f - f.mean()))


def _st_shift():
    from .rep import apply_shift, random_shift
    rng = np.random.default_rng(0)
    Q = random_shift((0, 0), 4, rng)
    yield "balanced k = (0, 0) shift is zero", np.allclose(apply_shift(Q, rng.standard_normal((16, 16))), 0)
    Q = random_shift((1, 1), 4, rng)
    for a in Q.coeffs.values():
        a[:] = 0
    yield "zero coefficients give zero", np.allclose(apply_shift(Q, rng.standard_normal((16, 16))), 0)


def _st_commutator():
    from .form import BumpOperator
    from .kernel import bump
    from .rep import commutator_apply
    T = BumpOperator(bump(0.25, 0.25), 4)
    f = np.random.default_rng(0).standard_normal((16, 16))
    yield "constant b commutes", np.allclose(commutator_apply(np.full((16, 16), 3.0), T, f), 0)


def _st_sparse():
    from .sparse import SparseFamily, sparse_form_eval, verify_sparseness
    yield "single cube, indicator", np.allclose(sparse_form_eval([(0, 16, 0, 16)], np.ones((16, 16)), 2.0), 1)
    fam = SparseFamily(2, [(0, 2, 0, 2), (2, 4, 2, 4)],
                       [np.array([0, 1, 4, 5]), np.array([10, 11, 14, 15])], 1.0)
    yield "disjoint cubes with full witnesses are 1-sparse", verify_sparseness(fam) == 1.0


def _st_maximal():
    from .maximal import lattice_maximal, strong_maximal
    c = np.full((8, 8), 2.5)
    yield "strong maximal of a constant", np.allclose(strong_maximal(c), c)
    yield "lattice maximal of a constant", np.allclose(lattice_maximal(c, 2.0), c)


def _st_ap():
    from .weights import ap_constant, unit_weight
    yield "unit weight has A_p = 1", np.isclose(ap_constant(unit_weight(4), 2.0), 1.0)


def _st_weights():
    from .weights import power_weight, weighted_norm
    w = power_weight(4, 0.0)
    f = np.random.default_rng(0).standard_normal((16, 16))
    yield "alpha = 0 weight is Lebesgue", np.isclose(weighted_norm(f, w, 2.0), np.sqrt(np.mean(f ** 2)))


SELFTESTS = {
    "verify-kernel": _st_kernel, "slice-integrals": _st_slice, "hormander": _st_hormander,
    "haar-decay": _st_haar, "kgood": _st_kgood, "rep-check": _st_rep, "shift-norms": _st_shift,
    "commutator": _st_commutator, "sparse": _st_sparse, "sharp-maximal": _st_maximal,
    "ap": _st_ap, "counterexample": _st_weights, "weighted-check": _st_weights,
}


# ---------------------------------------------------------------- commands


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise _UsageError(msg)


class _UsageError(ValueError):
    pass


def cmd_verify_kernel(a):
    _check(0 < a.theta1 <= 1 and 0 < a.theta2 <= 1, "theta1, theta2 must lie in (0, 1]")
    _check(not a.log or a.theta2 == 1.0, "--log requires --theta2 1")
    _check(a.samples > 0, "--samples must be positive")
    res = ex.kernel_estimates(a.theta1, a.theta2, a.log, a.kernel, a.t1, a.t2, a.samples, a.seed)
    rows = [[k, v["max_ratio"]] for k, v in res["reports"].items()]
    plot = ("bars", list(res["reports"]), [v["max_ratio"] for v in res["reports"].values()], "max ratio")
    return res, rows_to_csv(["estimate", "max_ratio"], rows), plot


def cmd_slice(a):
    res = ex.slice_scaling(tuple(a.theta2s), range(1, a.hmax + 1))
    rows = [[r["theta2"], r["h"], r["scaled"], r["closed_form"]] for r in res["rows"]]
    series = {f"theta2={t}": ([r["h"] for r in res["rows"] if r["theta2"] == t],
                              [r["scaled"] for r in res["rows"] if r["theta2"] == t]) for t in a.theta2s}
    return res, rows_to_csv(["theta2", "h", "h_times_integral", "closed_form"], rows), \
        ("loglog", series, "h", "h * slice integral")


def cmd_hormander(a):
    _check(all(t in ex.HORMANDER_BOUNDS for t in a.theta2s),
           f"--theta2s must be among {sorted(ex.HORMANDER_BOUNDS)}")
    res = ex.hormander_uniformity(tuple(a.theta2s), range(1, a.scales + 1))
    rows = [[r["theta2"], r["scale"], r["position"], r["value"], r["tail"], r["total"]] for r in res["rows"]]
    series = {f"theta2={t} pos={q}": ([2.0 ** -r["scale"] for r in res["rows"] if r["theta2"] == t and r["position"] == q],
                                      [r["total"] for r in res["rows"] if r["theta2"] == t and r["position"] == q])
              for t in a.theta2s for q in (1, 2)}
    return res, rows_to_csv(["theta2", "scale", "position", "value", "tail", "total"], rows), \
        ("loglog", series, "side of J", "Hörmander integral")


def cmd_haar(a):
    _check(len(a.ns) == 2, "--ns takes two resolutions")
    _check(0 <= a.j < min(a.ns), "--j must be below both resolutions")
    res = ex.haar_decay(tuple(a.ns), j=a.j)
    rows = [[r["theta1"], r["theta2"], r["n"], r["case"], r["max_ratio"]] for r in res["rows"]]
    return res, rows_to_csv(["theta1", "theta2", "n", "case", "max_ratio"], rows), \
        ("bars", [f'{r["theta2"]}/{r["n"]}/{r["case"]}' for r in res["rows"]],
         [r["max_ratio"] for r in res["rows"]], "normalised max ratio")


def cmd_kgood(a):
    _check(a.jmax >= 2, "--jmax must be at least 2")
    _check(a.trials > 0, "--trials must be positive")
    res = ex.kgood_sweep(a.jmax, a.trials, a.seed)
    rows = [[r["j"], r["k"], r["p"]] for r in res["rows"]]
    return res, rows_to_csv(["j", "k", "probability"], rows), \
        ("bars", [f'{r["j"]},{r["k"]}' for r in res["rows"]], [r["p"] for r in res["rows"]], "P(k-good)")


def cmd_rep(a):
    _check(1 <= a.n <= 6, "--n must lie in 1..6")
    _check(a.kernel in ("bump", "pure", "both"), "--kernel must be bump, pure or both")
    kernels = ("bump", "pure") if a.kernel == "both" else (a.kernel,)
    res = ex.rep_identity(a.n, kernels, a.trials, a.lattices, a.seed, a.t1, a.t2, a.domain, a.threads)
    rows = [[r["kernel"], r["lattice"], r["max_residual"], r["passed"]] for r in res["rows"]]
    if a.ledger:
        from .form import assemble_form
        from .kernel import bump, pure
        from .lattice import GridGeometry
        from .rep import decompose
        from .signals import random_signal
        rng = np.random.default_rng(a.seed)
        spec = bump(a.t1, a.t2) if kernels[0] == "bump" else pure()
        B = assemble_form(spec, GridGeometry(a.n, a.domain))
        f = random_signal(a.n, rng, mean_zero=True, domain=a.domain)
        g = random_signal(a.n, rng, mean_zero=True, domain=a.domain)
        R = decompose(B, f.values, g.values)
        (Path(a.output) / "rep-check-ledger.csv").write_text(csv_with_config(vars_clean(a), R.ledger_csv()))
    return res, rows_to_csv(["kernel", "lattice", "max_relative_residual", "passed"], rows), \
        ("bars", [f'{r["kernel"]}{r["lattice"]}' for r in res["rows"]],
         [max(r["max_residual"], 1e-18) for r in res["rows"]], "max residual")


def cmd_shift(a):
    _check(a.kmax < a.n, "--kmax must be below --n")
    res = ex.shift_norms(a.n, a.kmax, a.draws, a.seed, threads=a.threads)
    rows = [[r["k1"], r["k2"], r["norm"], r.get("envelope", "")] for r in res["diagonal"] + res["eccentric"]]
    series = {"(k,k)": ([1 + r["k1"] for r in res["diagonal"]], [r["norm"] for r in res["diagonal"]]),
              "(k,0)": ([1 + r["k1"] for r in res["eccentric"]], [r["norm"] for r in res["eccentric"]]),
              "envelope": ([1 + r["k1"] for r in res["eccentric"]], [r["envelope"] for r in res["eccentric"]])}
    return res, rows_to_csv(["k1", "k2", "norm", "envelope"], rows), ("loglog", series, "1 + k", "norm")


def cmd_commutator(a):
    _check(all(p >= 1 for p in a.ps), "--ps must be >= 1")
    res = ex.commutator_check(tuple(a.ns), tuple(a.ps), a.trials, a.seed)
    rows = [[r["n"], r["p"], r["max_ratio"]] for r in res["rows"]]
    series = {f"n={n}": ([r["p"] for r in res["rows"] if r["n"] == n],
                         [r["max_ratio"] for r in res["rows"] if r["n"] == n]) for n in a.ns}
    return res, rows_to_csv(["n", "p", "max_ratio"], rows), ("loglog", series, "p", "ratio")


def cmd_sparse(a):
    _check(all(p >= 1 for p in a.ps), "--ps must be >= 1")
    _check(2 <= a.n <= 7, "--n must lie in 2..7")
    res = ex.sparse_check(a.n, tuple(a.ps), a.trials, a.seed, a.t1, a.t2, threads=a.threads)
    keys = ["p", "operator", "cubes", "epsilon", "epsilon_3Q", "max_halving", "c", "A",
            "constant", "domination_ratio", "passed"]
    rows = [[r[k] for k in keys] for r in res["rows"]]
    return res, rows_to_csv(keys, rows), \
        ("bars", [f'{r["operator"][0]}{r["p"]}' for r in res["rows"]],
         [r["domination_ratio"] for r in res["rows"]], "max |lhs| / (C sparse)")


def cmd_sharp(a):
    _check(a.theta2 == 1.0 or a.trend, "the certified check needs --theta2 1; use --trend otherwise")
    if a.trend:
        res = ex.sharp_trend(a.theta2, a.n, a.trials, a.seed)
        rows = [[r["ecc"], r["max_ratio"]] for r in res["rows"]]
        return res, rows_to_csv(["ecc", "max_ratio"], rows), \
            ("loglog", {"trend": ([r[0] for r in rows], [r[1] for r in rows])}, "ecc", "ratio")
    res = ex.sharp_maximal_check(a.n, a.trials, a.seed, threads=a.threads)
    rows = [[r["t1"], r["t2"], r["max_ratio"]] for r in res["rows"]]
    grid = np.array([r[2] for r in rows]).reshape(6, 6)
    return res, rows_to_csv(["t1", "t2", "max_ratio"], rows), ("heatmap", grid, "sharp / strong maximal")


def cmd_ap(a):
    from .weights import ap_constant, power_weight
    _check(a.p > 1, "--p must exceed 1")
    rows = []
    for alpha in a.alphas:
        w = power_weight(a.n, alpha)
        rows.append([alpha, ap_constant(w, a.p, "cubes"), ap_constant(w, a.p, "rectangles")])
    res = {"p": a.p, "n": a.n, "rows": [{"alpha": r[0], "cubes": r[1], "rectangles": r[2]} for r in rows]}
    series = {"cubes": ([r[0] for r in rows], [r[1] for r in rows]),
              "rectangles": ([r[0] for r in rows], [r[2] for r in rows])}
    return res, rows_to_csv(["alpha", "ap_cubes", "ap_rectangles"], rows), ("loglog", series, "alpha", "[w]_Ap")


def cmd_counterexample(a):
    _check(a.p > 1, "--p must exceed 1")
    _check(a.p - 1 < a.alpha < 2 * (a.p - 1), "--alpha must lie in (p - 1, 2(p - 1))")
    _check(not a.log or a.theta2 == 1.0, "--log requires --theta2 1")
    res = ex.counterexample(a.p, a.alpha, a.theta2, a.n, a.log)
    text = res.pop("csv")
    rows = res["rows"]
    series = {"<sigma>": ([r["eps"] for r in rows], [r["avg_sigma"] for r in rows]),
              "<w>": ([r["eps"] for r in rows], [r["avg_w"] for r in rows]),
              "measured ratio": ([r["eps"] for r in rows], [r["measured_ratio"] for r in rows]),
              "lower bound": ([r["eps"] for r in rows], [r["lower_bound"] for r in rows])}
    return res, text, ("loglog", series, "eps", "value")


def cmd_weighted(a):
    _check(a.p > 1, "--p must exceed 1")
    res = ex.weighted_contrast(a.p, a.alpha, a.n, a.trials, a.seed)
    rows = []
    for run in res["uniform_runs"]:
        rows += [[1.0, run["log_flag"], e, r] for e, r in zip(run["ecc"], run["ratios"])]
    small = res["theta2_small"]
    rows += [[0.1, False, e, r] for e, r in zip(small["ecc"], small["ratios"])]
    series = {f'theta2=1 log={run["log_flag"]}': (run["ecc"], run["ratios"]) for run in res["uniform_runs"]}
    series["theta2=0.1"] = (small["ecc"], small["ratios"])
    return res, rows_to_csv(["theta2", "log_flag", "ecc", "ratio"], rows), ("loglog", series, "ecc", "ratio")


def vars_clean(a) -> dict:
    return {k: v for k, v in vars(a).items() if k not in ("func", "output", "threads")}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (default per command)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    p.add_argument("--output", default="results", help="output directory")
    p.add_argument("--plot", action="store_true", help="also write a PNG of the sweep")
    p.add_argument("--selftest", action="store_true", help="run the trivial checks for this command")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="czxlab", description="Numerical experiments on CZX forms.")
    ap.add_argument("--version", action="version", version=f"czxlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, seed, help_):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.set_defaults(func=func, default_seed=seed)
        return p

    p = add("verify-kernel", cmd_verify_kernel, 7, "size and Hölder estimates by random sampling")
    p.add_argument("--kernel", choices=["pure", "bump"], default="pure")
    p.add_argument("--theta1", type=float, default=1.0)
    p.add_argument("--theta2", type=float, default=0.5)
    p.add_argument("--log", action="store_true", help="logarithmic variant (theta2 = 1)")
    p.add_argument("--t1", type=float, default=0.25)
    p.add_argument("--t2", type=float, default=0.25)
    p.add_argument("--samples", type=int, default=10000)

    p = add("slice-integrals", cmd_slice, 0, "scale invariance of one-variable slice integrals")
    p.add_argument("--theta2s", type=float, nargs="+", default=[1.0, 0.5])
    p.add_argument("--hmax", type=int, default=8, help="h runs over 2^-1 .. 2^-hmax")

    p = add("hormander", cmd_hormander, 0, "Hörmander integral over scales and positions")
    p.add_argument("--theta2s", type=float, nargs="+", default=[1.0, 0.5])
    p.add_argument("--scales", type=int, default=6)

    p = add("haar-decay", cmd_haar, 0, "decay of Haar coefficients of the pure kernel")
    p.add_argument("--ns", type=int, nargs=2, default=[5, 6])
    p.add_argument("--j", type=int, default=3)

    p = add("kgood", cmd_kgood, 0, "Monte Carlo probability of k-goodness")
    p.add_argument("--jmax", type=int, default=8)
    p.add_argument("--trials", type=int, default=10000)

    p = add("rep-check", cmd_rep, 1, "exact representation identity")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--kernel", default="both", help="bump, pure or both")
    p.add_argument("--t1", type=float, default=0.25)
    p.add_argument("--t2", type=float, default=0.25)
    p.add_argument("--trials", type=int, default=20, help="(f, g) pairs per lattice")
    p.add_argument("--lattices", type=int, default=5)
    p.add_argument("--domain", choices=["torus", "box"], default="torus")
    p.add_argument("--ledger", action="store_true", help="also write the (k, m) ledger of one pair")

    p = add("shift-norms", cmd_shift, 3, "norms of random dyadic shifts")
    p.add_argument("--n", type=int, default=7)
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--draws", type=int, default=3)

    p = add("commutator", cmd_commutator, 9, "commutator norm against BMO")
    p.add_argument("--ns", type=int, nargs=2, default=[5, 6])
    p.add_argument("--ps", type=float, nargs="+", default=[1.5, 2.0, 3.0])
    p.add_argument("--trials", type=int, default=20)

    p = add("sparse", cmd_sparse, 11, "sparse domination of T and [b, T]")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--ps", type=float, nargs="+", default=[1.1, 2.0])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--t1", type=float, default=0.05)
    p.add_argument("--t2", type=float, default=0.2)

    p = add("sharp-maximal", cmd_sharp, 6, "sharp maximal against strong maximal")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--theta2", type=float, default=1.0)
    p.add_argument("--trend", action="store_true", help="report the ratio against eccentricity only")

    p = add("ap", cmd_ap, 0, "A_p constants of power weights")
    p.add_argument("--n", type=int, default=7)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--alphas", type=float, nargs="+", default=[0.5, 1.0, 1.5])

    p = add("counterexample", cmd_counterexample, 0, "eccentric rectangle sweep with a power weight")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--theta2", type=float, default=0.1)
    p.add_argument("--n", type=int, default=9)
    p.add_argument("--log", action="store_true")

    p = add("weighted-check", cmd_weighted, 0, "weighted ratios across kernel eccentricities")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--n", type=int, default=9)
    p.add_argument("--trials", type=int, default=3)
    return ap


def _plot(kind, spec, path: Path, title: str) -> None:
    from . import plotting
    if kind == "loglog":
        series, xl, yl = spec
        plotting.loglog(path, series, xl, yl, title)
    elif kind == "bars":
        labels, values, yl = spec
        plotting.bars(path, labels, values, yl, title)
    else:
        grid, t = spec
        plotting.heatmap(path, grid, t)


def run_selftest(name: str) -> int:
    bad = 0
    for label, ok in SELFTESTS[name]():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {label}")
        bad += not ok
    return 1 if bad else 0


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    if a.selftest:
        return run_selftest(a.command)
    if a.seed is None:
        a.seed = a.default_seed
    if a.threads < 1:
        ap.error("--threads must be at least 1")
    out = Path(a.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        res, text, plot = a.func(a)
    except _UsageError as e:
        ap.error(str(e))
    config = {"command": a.command, **vars_clean(a)}
    config.pop("default_seed", None)
    config.pop("plot", None)
    config.pop("selftest", None)
    stem = a.command
    (out / f"{stem}.json").write_text(dumps(envelope(config, res)))
    if text:
        (out / f"{stem}.csv").write_text(csv_with_config(config, text))
    if a.plot:
        kind, *spec = plot
        _plot(kind, spec, out / f"{stem}.png", stem)
    passed = res.get("passed", True)
    print(f"{stem}: {'pass' if passed else 'FAIL'} -> {out / (stem + '.json')}")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
