"""Weights, A_p and BMO functionals, and the two weighted experiments.

The eccentricity experiment feeds ``f = 1_R sigma`` on thin rectangles
``R = (0, eps) x (eps, 1)`` through the bump operator whose parameters match
the sides of R, for a power weight ``|x|^alpha``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import integrate

from ._windows import dyadic_sides, window_means
from .form import BumpOperator
from .kernel import KernelSpec, bump, phi
from .lattice import BOX, TORUS
from .signals import Signal2D, as_array, random_signal


@dataclass(frozen=True, eq=False)
class Weight:
    signal: Signal2D
    tag: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not np.all(self.signal.values > 0):
            raise ValueError("weights must be positive in every cell")

    @property
    def values(self) -> np.ndarray:
        return self.signal.values

    @property
    def n(self) -> int:
        return self.signal.n

    def dual(self, p: float) -> "Weight":
        """sigma = w^(-1/(p-1))."""
        tag = dict(self.tag)
        if "alpha" in tag:
            tag["alpha"] = -tag["alpha"] / (p - 1.0)
        return Weight(Signal2D(self.values ** (-1.0 / (p - 1.0)), self.signal.domain), tag)


def power_weight(n: int, alpha: float, domain: str = BOX) -> Weight:
    """|x|^alpha at cell centres of the unit box."""
    c = (np.arange(1 << n) + 0.5) / (1 << n)
    r = np.hypot(c[:, None], c[None, :])
    return Weight(Signal2D(r ** alpha, domain), {"kind": "power", "alpha": alpha})


def unit_weight(n: int, domain: str = TORUS) -> Weight:
    return Weight(Signal2D.constant(n, 1.0, domain), {"kind": "unit"})


def checkerboard_weight(n: int, level: int, ratio: float, domain: str = TORUS) -> Weight:
    """Alternating values 1 and ``ratio`` on squares of side 2^-level."""
    N = 1 << n
    i = np.arange(N) >> (n - level)
    v = np.where((i[:, None] + i[None, :]) % 2 == 0, 1.0, ratio)
    return Weight(Signal2D(v, domain), {"kind": "checkerboard", "level": level, "ratio": ratio})


def power_integral_unit_square(alpha: float) -> float:
    """Integral of |x|^alpha over [0,1]^2 by a polar 1D quadrature."""
    val, _ = integrate.quad(lambda t: (1.0 / math.cos(t)) ** (alpha + 2.0), 0.0, math.pi / 4,
                            epsabs=0.0, epsrel=1e-13)
    return 2.0 * val / (alpha + 2.0)


def power_average_rect(alpha: float, a1: float, b1: float, a2: float, b2: float) -> float:
    """Average of |x|^alpha over [a1,b1] x [a2,b2] by nested adaptive quadrature."""
    val, _ = integrate.dblquad(lambda y, x: math.hypot(x, y) ** alpha, a1, b1, a2, b2,
                               epsabs=0.0, epsrel=1e-11)
    return val / ((b1 - a1) * (b2 - a2))


def weighted_norm(f, w, p: float) -> float:
    """(sum |f|^p w a)^(1/p)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    v = as_array(f)
    wv = 1.0 if w is None else (w.values if isinstance(w, Weight) else as_array(w))
    return float(np.mean(np.abs(v) ** p * wv) ** (1.0 / p))


def _families(N: int, family: str, sides: str, max_cells: int | None):
    side_list = dyadic_sides(N) if sides == "dyadic" else list(range(1, N + 1))
    if family == "cubes":
        pairs = [(s, s) for s in side_list]
    elif family == "rectangles":
        pairs = [(a, b) for a in side_list for b in side_list]
    else:
        raise ValueError("family must be 'cubes' or 'rectangles'")
    if max_cells is not None:
        pairs = [(a, b) for a, b in pairs if a * b <= max_cells]
    return pairs


def ap_constant(w, p: float, family: str = "cubes", sides: str = "dyadic",
                max_cells: int | None = None) -> float:
    """sup <w>_R <w^(-1/(p-1))>_R^(p-1) over grid-aligned squares or rectangles.

    Sides are dyadic cell counts (or every count with ``sides="all"``), at all
    translates; torus weights wrap around, box weights stay inside the box.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    wv = w.values if isinstance(w, Weight) else as_array(w)
    domain = w.signal.domain if isinstance(w, Weight) else TORUS
    wrap = domain == TORUS
    sv = wv ** (-1.0 / (p - 1.0))
    best = 0.0
    for b1, b2 in _families(wv.shape[0], family, sides, max_cells):
        aw = window_means(wv, b1, b2, wrap)
        asg = window_means(sv, b1, b2, wrap)
        best = max(best, float(np.max(aw * asg ** (p - 1.0))))
    return best


def _mean_osc(v: np.ndarray, s: int, wrap: bool) -> np.ndarray:
    if wrap:
        v = np.pad(v, ((0, s - 1), (0, s - 1)), mode="wrap")
    win = sliding_window_view(v, (s, s))
    m = win.mean(axis=(-2, -1), keepdims=True)
    return np.abs(win - m).mean(axis=(-2, -1))


def bmo_norms(b, nu=None, sides: str = "dyadic") -> tuple[float, float]:
    """(||b||_BMO, ||b||_BMO_nu) as sups over grid-aligned squares."""
    v = as_array(b)
    domain = b.domain if isinstance(b, Signal2D) else TORUS
    wrap = domain == TORUS
    nv = None
    if nu is not None:
        nv = nu.values if isinstance(nu, Weight) else as_array(nu)
        if not np.all(nv > 0):
            raise ValueError("nu must be positive")
    plain = weighted = 0.0
    N = v.shape[0]
    side_list = dyadic_sides(N) if sides == "dyadic" else list(range(1, N + 1))
    for s in side_list:
        osc = _mean_osc(v, s, wrap)
        plain = max(plain, float(osc.max()))
        if nv is not None:
            weighted = max(weighted, float((osc / window_means(nv, s, s, wrap)).max()))
    return plain, (plain if nv is None else weighted)


# ---------------------------------------------------------------- eccentricity experiment


def rect_slices(n: int, eps: float) -> tuple[slice, slice]:
    """Cells of R_eps = (0, eps) x (eps, 1)."""
    N = 1 << n
    m = int(round(eps * N))
    if m < 1 or abs(m - eps * N) > 1e-9:
        raise ValueError("eps must be a multiple of the cell size")
    return slice(0, m), slice(m, N)


def default_eps(n: int) -> list[float]:
    return [2.0 ** -k for k in range(2, n)]


def _fit(x, y, trim: bool = True) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if trim and len(x) > 4:
        order = np.argsort(x)
        x, y = x[order][1:-1], y[order][1:-1]
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class SweepRow:
    eps: float
    ecc: float
    avg_w: float
    avg_sigma: float
    lower_bound: float
    measured_ratio: float


@dataclass
class CounterexampleReport:
    config: dict
    rows: list[SweepRow]
    slope_sigma: float = 0.0          # d log <sigma> / d log eps
    slope_w: float = 0.0              # d log <w> / d log eps
    slope_lower_bound: float = 0.0    # d log L / d log ecc
    slope_measured: float = 0.0       # d log ratio / d log ecc
    monotone_tail: bool = False
    weighted_bound_violated: bool = False

    def csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["eps", "ecc", "avg_w", "avg_sigma", "lower_bound", "measured_ratio"])
        for r in self.rows:
            wr.writerow([f"{r.eps:.10g}", f"{r.ecc:.10g}", f"{r.avg_w:.12g}", f"{r.avg_sigma:.12g}",
                         f"{r.lower_bound:.12g}", f"{r.measured_ratio:.12g}"])
        return buf.getvalue()

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "rows"}
        return d

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def is_monotone_increasing(vals, last: int = 5) -> bool:
    tail = np.asarray(vals[-last:], dtype=float)
    return bool(np.all(np.diff(tail) > 0))


def counterexample_experiment(p: float, alpha: float, theta2: float,
                              eps_list: list[float] | None = None, n: int = 9,
                              log_flag: bool = False, quadrature: str = "cell") -> CounterexampleReport:
    """Sweep R_eps, recording <w>_R, <sigma>_R, the eccentricity lower bound and ||K f|| / ||f||.

    Sweep order is decreasing eps (increasing eccentricity).
    """
    if not (p - 1.0 < alpha < 2.0 * (p - 1.0)):
        raise ValueError("alpha must lie in (p - 1, 2(p - 1))")
    eps_list = sorted(eps_list or default_eps(n), reverse=True)
    w = power_weight(n, alpha, BOX)
    sigma = w.dual(p)
    pp = p / (p - 1.0)
    rows = []
    for eps in eps_list:
        s1, s2 = rect_slices(n, eps)
        ecc = (1.0 - eps) / eps
        aw = float(w.values[s1, s2].mean())
        asg = float(sigma.values[s1, s2].mean())
        f = np.zeros_like(w.values)
        f[s1, s2] = sigma.values[s1, s2]
        nf = weighted_norm(f, w, p)
        # ||f||_{L^p(w)} / sigma(R)^(1/p) is one in exact arithmetic; kept as a grid check
        area = (s1.stop - s1.start) * (s2.stop - s2.start) * 4.0 ** (-n)
        norm_ratio = nf / (asg * area) ** (1.0 / p)
        lower = ecc ** (-theta2) * aw ** (1.0 / p) * asg ** (1.0 / pp) / norm_ratio
        T = BumpOperator(bump(eps, 1.0 - eps, theta2, log_flag), n, quadrature)
        measured = weighted_norm(T.apply(f), w, p) / nf
        rows.append(SweepRow(eps, ecc, aw, asg, lower, measured))
    rep = CounterexampleReport(
        {"p": p, "alpha": alpha, "theta2": theta2, "n": n, "log_flag": log_flag,
         "quadrature": quadrature, "eps": eps_list}, rows)
    eps = [r.eps for r in rows]
    ecc = [r.ecc for r in rows]
    rep.slope_sigma = _fit(eps, [r.avg_sigma for r in rows])
    rep.slope_w = _fit(eps, [r.avg_w for r in rows])
    rep.slope_lower_bound = _fit(ecc, [r.lower_bound for r in rows])
    rep.slope_measured = _fit(ecc, [r.measured_ratio for r in rows])
    rep.monotone_tail = is_monotone_increasing([r.measured_ratio for r in rows])
    rep.weighted_bound_violated = weighted_bound_violation(rows, p, theta2)
    return rep


def weighted_bound_violation(rows: list[SweepRow], p: float, theta2: float) -> bool:
    """True if <w>^(p'/p) <sigma> outgrows C ecc^(theta2 p') for C fitted on the small-ecc half."""
    pp = p / (p - 1.0)
    lhs = np.array([r.avg_w ** (pp / p) * r.avg_sigma for r in rows])
    ecc = np.array([r.ecc for r in rows])
    ratio = lhs / ecc ** (theta2 * pp)
    half = max(1, len(rows) // 2)
    C = ratio[:half].max()
    return bool(np.any(ratio[half:] > C))


def lower_bound_constant(theta2: float) -> float:
    """c in K*f >= c ecc^(-theta2) 1_R <f>_R for R with sides (t1, t2)."""
    return 2.0 ** (-theta2) * phi(1.0) ** 2


def lower_bound_check(spec: KernelSpec, n: int, f: np.ndarray, corner: tuple[int, int],
                      quadrature: str = "cell") -> float:
    """min over cells of R of K*f / (c ecc^-theta2 <f>_R) for nonnegative f supported anywhere.

    R has sides (t1, t2) (whole cells) and lower-left cell ``corner``.
    """
    N = 1 << n
    m1, m2 = int(round(spec.t1 * N)), int(round(spec.t2 * N))
    s1 = slice(corner[0], corner[0] + m1)
    s2 = slice(corner[1], corner[1] + m2)
    T = BumpOperator(spec, n, quadrature)
    Kf = T.apply(f)
    avg = f[s1, s2].mean()
    bound = lower_bound_constant(spec.theta2) * spec.eccentricity ** (-spec.theta2) * avg
    return float((Kf[s1, s2] / bound).min())


# ---------------------------------------------------------------- weighted boundedness


@dataclass
class WeightedCheck:
    config: dict
    ecc: list[float]
    ratios: list[float]          # sup over test functions of ||Tf|| / ||f|| per eccentricity
    ap: float
    max_ratio: float             # max over everything of ||Tf|| / (||f|| [w]^p')

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def weighted_boundedness_check(spec: KernelSpec, p: float, w: Weight, trials: int,
                               eccs: list[float] | None = None, seed: int = 0,
                               long_side: float = 0.5, quadrature: str = "cell") -> WeightedCheck:
    """Sweep the bump kernel over eccentricities, testing f = 1_R sigma and random f.

    For eccentricity e the kernel has t2 = ``long_side`` and t1 = t2 / e; R is
    the cell-aligned rectangle (0, t1) x (t1, t1 + t2), widened to one cell.
    """
    n = w.n
    N = 1 << n
    eccs = eccs or [2.0 ** i for i in range(11)]
    sig = w.dual(p)
    pp = p / (p - 1.0)
    A = ap_constant(w, p)
    rng = np.random.default_rng(seed)
    tests = []
    for _ in range(trials):
        tests.append(np.abs(random_signal(n, rng, base=min(n, 5), domain=BOX).values))
    ratios = []
    for e in eccs:
        t2 = long_side
        t1 = t2 / e
        sp = KernelSpec(spec.theta1, spec.theta2, spec.log_flag, "bump", t1, t2)
        T = BumpOperator(sp, n, quadrature)
        m1 = max(1, int(round(t1 * N)))
        m2 = int(round(t2 * N))
        f = np.zeros((N, N))
        f[:m1, m1:m1 + m2] = sig.values[:m1, m1:m1 + m2]
        best = 0.0
        for g in [f, *tests]:
            best = max(best, weighted_norm(T.apply(g), w, p) / weighted_norm(g, w, p))
        ratios.append(best)
    return WeightedCheck(
        {"theta2": spec.theta2, "log_flag": spec.log_flag, "p": p, "n": n, "trials": trials,
         "seed": seed, "long_side": long_side, "weight": w.tag},
        list(eccs), ratios, A, max(ratios) / A ** pp)
