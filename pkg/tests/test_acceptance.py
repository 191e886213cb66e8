"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py`` for the summary lines only.
"""

import sys

import pytest

from czxlab import experiments as ex

pytestmark = pytest.mark.slow

LINES: list[str] = []


def _report(num: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
    LINES.append(line)
    print(line, file=sys.__stdout__, flush=True)


def criterion_1():
    r = ex.rep_identity(n=5, kernels=("bump", "pure"), pairs=20, lattices=5, seed=1)
    return r["passed"], f"representation identity, max residual {r['max_residual']:.2e}"


def criterion_2():
    r = ex.kgood_sweep(jmax=8, trials=10_000, seed=0)
    return r["passed"], f"k-good probability in [{r['min']:.4f}, {r['max']:.4f}] vs [0.48, 0.52]"


def criterion_3():
    r = ex.haar_decay(ns=(5, 6), thetas=((1.0, 0.5), (1.0, 1.0)), j=3)
    bad = [c for c in r["checks"] if not c["passed"]]
    slopes = ", ".join(f"{c['slope']:.3f}>={c['target']:.2f}" for c in r["checks"] if "slope" in c)
    detail = f"Haar decay slopes {slopes}; failing checks: " + (
        "; ".join(f"{c.get('case', 'slope')} theta={c['theta']} factor={c.get('factor', c.get('slope')):.3g}"
                  for c in bad) or "none")
    return r["passed"], detail


def criterion_4():
    r = ex.counterexample(p=2.0, alpha=1.5, theta2=0.1, n=9)
    return r["passed"], (f"sigma slope {r['slope_sigma']:.3f} (target {r['target_slope_sigma']:.2f} +- 0.05), "
                         f"w slope {r['slope_w']:.3f} (target 0 +- 0.05), monotone tail {r['monotone_tail']}")


def criterion_5():
    r = ex.weighted_contrast(p=2.0, alpha=1.5, n=9, trials=3)
    runs = ", ".join(f"log={u['log_flag']}: max/base {u['max_over_baseline']:.3f}" for u in r["uniform_runs"])
    return r["passed"], f"uniform runs {runs}; theta2=0.1 growth {r['theta2_small']['growth']:.3f} (need >= 2)"


def criterion_6():
    first = ex.sharp_maximal_check(n=6, trials=10, seed=6)
    rerun = ex.sharp_maximal_check(n=6, trials=10, seed=606)
    ok = first["passed"] and rerun["passed"]
    return ok, (f"sharp/strong maximal ratio {first['max_ratio']:.3f}, rerun {rerun['max_ratio']:.3f}, "
                f"frozen C = {first['constant']}")


def criterion_7():
    r = ex.sparse_check(n=6, ps=(1.1, 2.0), trials=10, seed=11)
    rows = r["rows"]
    eps = min(x["epsilon_3Q"] for x in rows)
    halv = max(x["max_halving"] for x in rows)
    dom = max(x["domination_ratio"] for x in rows)
    return r["passed"], (f"sparse families: min eps(3Q) {eps:.4f} >= 1/16, max halving {halv:.3f}, "
                         f"max domination ratio {dom:.3f}")


def criterion_8():
    r = ex.shift_norms(n=7, kmax=6, draws=3, seed=3)
    env = max(e["norm"] / e["envelope"] for e in r["eccentric"])
    return r["passed"], f"shift norm slope {r['slope']:.3f} <= 0.6, max norm/envelope {env:.3f}"


def criterion_9():
    r = ex.commutator_check(ns=(5, 6), ps=(1.5, 2.0, 3.0), trials=20, seed=9)
    worst = max(x["max_ratio"] for x in r["rows"])
    by_p = {}
    for x in r["rows"]:
        by_p.setdefault(x["p"], []).append(x["max_ratio"])
    stab = max(max(v) / min(v) for v in by_p.values())
    return r["passed"], f"commutator ratio {worst:.4f} <= {r['constant']}, n=5 vs 6 spread {stab:.3f}"


def criterion_10():
    s = ex.slice_scaling(thetas=(1.0, 0.5), exps=range(1, 9))
    h = ex.hormander_uniformity(thetas=(1.0, 0.5), scales=range(1, 7))
    k = ex.kernel_estimates()
    ok = s["passed"] and h["passed"] and k["passed"]
    return ok, (f"slice scaling {s['passed']}, Hormander uniform {h['passed']}, "
                f"kernel estimates {k['passed']}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("num", range(1, 11))
def test_criterion(num):
    ok, detail = CRITERIA[num - 1]()
    _report(num, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for i, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        _report(i, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
