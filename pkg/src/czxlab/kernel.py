"""CZX kernels: the decay factor, the model power kernel, the bump family, and
numerical verifiers for their size, Hölder and integral estimates.

Points are arrays whose last axis has length 2.  All evaluators are
vectorised over leading axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

PURE = "pure"
BUMP = "bump"

# half-width of the bump's support; phi >= phi(1) > 0 on [-1, 1]
BUMP_RADIUS = 2.0


class SingularityError(ValueError):
    """Kernel evaluated on a coordinate line where it is undefined."""


def phi(t):
    """Smooth bump exp(1 - 1/(1 - (t/2)^2)) on (-2, 2), zero outside; phi(0) = 1."""
    t = np.asarray(t, dtype=np.float64)
    u = (t / BUMP_RADIUS) ** 2
    out = np.zeros_like(u)
    inside = u < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside]))
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def phi_integral() -> float:
    val, _ = integrate.quad(phi, -BUMP_RADIUS, BUMP_RADIUS, epsabs=1e-14, epsrel=1e-13)
    return val


@lru_cache(maxsize=None)
def _phi_cdf_table(m: int = 1 << 14):
    x = np.linspace(-BUMP_RADIUS, BUMP_RADIUS, 2 * m + 1)
    y = phi(x)
    c = integrate.cumulative_trapezoid(y, x=x, initial=0.0)
    return x, c


def phi_cdf(t):
    """Integral of phi from -inf to t."""
    x, c = _phi_cdf_table()
    t = np.clip(np.asarray(t, dtype=np.float64), -BUMP_RADIUS, BUMP_RADIUS)
    return np.interp(t, x, c)


@dataclass(frozen=True)
class KernelSpec:
    theta1: float = 1.0
    theta2: float = 1.0
    log_flag: bool = False
    kind: str = PURE
    t1: float = 1.0
    t2: float = 1.0

    def __post_init__(self) -> None:
        for name in ("theta1", "theta2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.log_flag and self.theta2 != 1.0:
            raise ValueError("the logarithmic variant requires theta2 = 1")
        if self.kind not in (PURE, BUMP):
            raise ValueError(f"kind must be {PURE!r} or {BUMP!r}")
        if self.kind == BUMP and not (self.t1 > 0 and self.t2 > 0):
            raise ValueError("bump parameters t1, t2 must be positive")

    @property
    def theta(self) -> float:
        return min(self.theta1, self.theta2) / 2.0

    @property
    def eccentricity(self) -> float:
        return max(self.t1 / self.t2, self.t2 / self.t1)

    @property
    def bump_prefactor(self) -> float:
        e = self.t1 / self.t2 + self.t2 / self.t1
        pre = e ** (-self.theta2)
        return pre * math.log(e) if self.log_flag else pre

    @property
    def support(self) -> tuple[float, float]:
        return BUMP_RADIUS * self.t1, BUMP_RADIUS * self.t2

    def with_t(self, t1: float, t2: float) -> "KernelSpec":
        return KernelSpec(self.theta1, self.theta2, self.log_flag, BUMP, t1, t2)


def pure(theta1: float = 1.0, theta2: float = 1.0, log_flag: bool = False) -> KernelSpec:
    return KernelSpec(theta1, theta2, log_flag, PURE)


def bump(t1: float, t2: float, theta2: float = 1.0, log_flag: bool = False) -> KernelSpec:
    return KernelSpec(1.0, theta2, log_flag, BUMP, t1, t2)


def _decay(a, b, theta2: float, log_flag: bool):
    r = np.asarray(a, dtype=np.float64) / np.asarray(b, dtype=np.float64)
    s = r + 1.0 / r
    out = s ** (-theta2)
    return out * np.log(s) if log_flag else out


def decay_factor(x, y, theta2: float, log_flag: bool = False):
    """(r + 1/r)^(-theta2), r = |x1 - y1| / |x2 - y2|, optionally times log(r + 1/r)."""
    d = np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))
    if np.any(d[..., 0] == 0) or np.any(d[..., 1] == 0):
        raise SingularityError("decay factor undefined when a coordinate coincides")
    out = _decay(d[..., 0], d[..., 1], theta2, log_flag)
    return float(out) if np.ndim(out) == 0 else out


def kernel_of_difference(spec: KernelSpec, z1, z2):
    """K as a function of x - y = (z1, z2); the pure kernel is +inf-free only off the axes."""
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if spec.kind == BUMP:
        return (spec.bump_prefactor / (spec.t1 * spec.t2)
                * phi(z1 / spec.t1) * phi(z2 / spec.t2))
    a, b = np.abs(z1), np.abs(z2)
    if np.any(a == 0) or np.any(b == 0):
        raise SingularityError("pure kernel undefined on coordinate lines")
    return _decay(a, b, spec.theta2, spec.log_flag) / (a * b)


def kernel_eval(spec: KernelSpec, x, y):
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    out = kernel_of_difference(spec, d[..., 0], d[..., 1])
    return float(out) if np.ndim(out) == 0 else out


def size_bound(spec: KernelSpec, z1, z2):
    """Right side of the size estimate with constant one."""
    a, b = np.abs(z1), np.abs(z2)
    return _decay(a, b, spec.theta2, spec.log_flag) / (a * b)


# ------------------------------------------------------------------ reports


@dataclass
class BoundReport:
    name: str
    max_ratio: float
    location: list
    samples: int
    seed: int
    scale_range: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _loguniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def _estimate_ratios(spec: KernelSpec, rng, count: int, zmin: float, zmax: float):
    """Size and four Hölder ratios on random configurations (x, y, w)."""
    sgn = lambda: rng.choice([-1.0, 1.0], count)
    if spec.kind == BUMP:
        # sample the support of each factor on a log scale in units of t_i
        z1 = sgn() * spec.t1 * _loguniform(rng, 1e-4, BUMP_RADIUS, count)
        z2 = sgn() * spec.t2 * _loguniform(rng, 1e-4, BUMP_RADIUS, count)
    else:
        z1 = sgn() * _loguniform(rng, zmin, zmax, count)
        z2 = sgn() * _loguniform(rng, zmin, zmax, count)
    x = rng.uniform(-1.0, 1.0, (count, 2))
    y = x - np.stack([z1, z2], axis=-1)
    K = kernel_eval(spec, x, y)
    out = {"size": (np.abs(K) / size_bound(spec, z1, z2), x, y)}
    th1 = spec.theta1
    for var in ("x1", "x2", "y1", "y2"):
        axis = int(var[1]) - 1
        gap = np.abs([z1, z2][axis])
        other = np.abs([z2, z1][axis])
        delta = sgn() * gap / 2.0 * _loguniform(rng, 1e-6, 1.0, count)
        if var[0] == "x":
            xw, yw = x.copy(), y
            xw[:, axis] += delta
        else:
            xw, yw = x, y.copy()
            yw[:, axis] += delta
        lhs = np.abs(K - kernel_eval(spec, xw, yw))
        rhs = (np.abs(delta) ** th1 / gap ** (1.0 + th1) / other
               * _decay(np.abs(z1), np.abs(z2), spec.theta2, spec.log_flag))
        out[f"holder_{var}"] = (lhs / rhs, x, y)
    return out


def verify_kernel_estimates(spec: KernelSpec, sample_count: int, seed: int,
                            t_ratios: list[float] | None = None,
                            zrange: tuple[float, float] = (1e-6, 1e2)) -> dict[str, BoundReport]:
    """Largest ratio LHS / RHS (constant one) for the size and the four Hölder estimates.

    For bump kernels a list of ratios t1/t2 may be given; the report is then the
    maximum over all of them (t2 fixed to ``spec.t2``).
    """
    rng = np.random.default_rng(seed)
    specs = [spec] if spec.kind != BUMP or not t_ratios else [
        spec.with_t(spec.t2 * r, spec.t2) for r in t_ratios]
    per = max(1, sample_count // len(specs))
    best: dict[str, BoundReport] = {}
    for sp in specs:
        for name, (ratio, x, y) in _estimate_ratios(sp, rng, per, *zrange).items():
            ratio = np.where(np.isfinite(ratio), ratio, 0.0)
            i = int(np.argmax(ratio))
            r = float(ratio[i])
            loc = {"x": x[i].tolist(), "y": y[i].tolist(), "t": [sp.t1, sp.t2]}
            cur = best.get(name)
            if cur is None or r > cur.max_ratio:
                best[name] = BoundReport(name, r, [loc], 0, seed)
    scale = list(zrange) if spec.kind == PURE else [min(t_ratios or [1.0]), max(t_ratios or [1.0])]
    for rep in best.values():
        rep.samples = per * len(specs)
        rep.scale_range = scale
    return best


# ------------------------------------------------------------ slice integrals


def slice_closed_form(theta2: float, h: float) -> float:
    """Exact integral over the real line of the pure kernel in y1 (no log factor)."""
    return special.beta(theta2 / 2.0, theta2 / 2.0) / h


def slice_integral(spec: KernelSpec, x, y2: float, L: float | None = None,
                   window: float = 2.0 ** -11) -> float:
    """Integral of |K(x, (y1, y2))| over y1, optionally restricted to |x1 - y1| <= L.

    The pure kernel has an integrable singularity at y1 = x1; a window of half-width
    ``window`` is excluded and the missing piece is recovered by Richardson
    extrapolation between ``window`` and ``window/2``.
    """
    x = np.asarray(x, dtype=np.float64)
    h = abs(x[1] - y2)
    if h == 0:
        raise SingularityError("slice integral needs x2 != y2")
    if spec.kind == BUMP:
        r = spec.support[0]
        hi = r if L is None else min(L, r)
        f = lambda s: abs(float(kernel_of_difference(spec, s, h)))
        val, _ = integrate.quad(f, -hi, hi, limit=400, epsabs=0.0, epsrel=1e-11)
        return val
    upper = np.inf if L is None else L
    g = lambda s: float(size_bound(spec, s, h))

    def one_sided(d: float) -> float:
        if upper <= d:
            return 0.0
        total = 0.0
        # split at the natural scale h so quad sees the peak
        cuts = [d] + [c for c in (h, 16 * h) if d < c < upper] + [upper]
        for a, b in zip(cuts[:-1], cuts[1:]):
            val, err = integrate.quad(g, a, b, limit=500, epsabs=0.0, epsrel=1e-12)
            if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300):
                raise ArithmeticError("slice quadrature did not converge")
            total += val
        return 2.0 * total

    coarse, fine = one_sided(window), one_sided(window / 2.0)
    # near s = 0 the integrand behaves like s^(theta2 - 1)
    q = 2.0 ** (-spec.theta2)
    return (fine - q * coarse) / (1.0 - q)


def restricted_slice_asymptotic(theta2: float, h: float, L: float) -> float:
    """Leading term of the restricted slice integral for L << h."""
    return 2.0 * h ** (-1.0 - theta2) * L ** theta2 / theta2


# ------------------------------------------------------------ Hörmander


def _graded(a: float, b: float, sing: list[float], order: int = 12, levels: int = 24,
            ratio: float = 0.3):
    """Gauss-Legendre nodes on [a, b], geometrically refined toward singular points."""
    pts = sorted({a, b, *[s for s in sing if a < s < b]})
    is_sing = lambda v: any(abs(v - s) < 1e-14 for s in sing)
    edges = [pts[0]]
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (lo + hi)
        w = 0.5 * (hi - lo)
        left = [lo + w * ratio ** k for k in range(levels, 0, -1)] if is_sing(lo) else []
        right = [hi - w * ratio ** k for k in range(1, levels + 1)] if is_sing(hi) else []
        edges.extend(left + [mid] + right + [hi])
    e = np.array(edges)
    gx, gw = np.polynomial.legendre.leggauss(order)
    lo, hi = e[:-1, None], e[1:, None]
    return ((0.5 * (hi - lo) * gx + 0.5 * (hi + lo)).ravel(), (0.5 * (hi - lo) * gw).ravel())


def _outward(lo: float, hi: float, order: int = 12, growth: float = 1.6):
    """Nodes on [lo, hi] with panels growing geometrically away from lo (lo > 0 scale)."""
    edges = [lo]
    step = max(lo, 1e-3) * 0.25
    while edges[-1] < hi:
        edges.append(min(hi, edges[-1] + step))
        step *= growth
    gx, gw = np.polynomial.legendre.leggauss(order)
    e = np.array(edges)
    a, b = e[:-1, None], e[1:, None]
    return ((0.5 * (b - a) * gx + 0.5 * (b + a)).ravel(), (0.5 * (b - a) * gw).ravel())


@dataclass
class HormanderResult:
    value: float        # integral over the truncated region
    tail: float         # contribution from beyond the truncation
    parts: dict

    @property
    def total(self) -> float:
        return self.value + self.tail


def _axis_nodes(lo: float, hi: float, sing: list[float], inner: float):
    """Nodes for one coordinate: graded near singular points inside [-inner, inner]."""
    parts = []
    if lo < -inner:
        x, w = _outward(inner, -lo)
        parts.append((-x, w))
    a, b = max(lo, -inner), min(hi, inner)
    if a < b:
        parts.append(_graded(a, b, sing))
    if hi > inner:
        parts.append(_outward(inner, hi))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def hormander_integral(spec: KernelSpec, center, side: float, x, M: float = 8.0,
                       far: float = 1e7) -> HormanderResult:
    """Integral of |K(x, y) - K(c_J, y)| over the complement of 3J.

    ``center`` and ``side`` describe the square J; the integration region is
    [-M, 1 + M]^2 (box coordinates) minus 3J, with the remainder out to ``far``
    side lengths reported as ``tail``.  Coordinates are normalised by the side
    length, which the pure kernel's homogeneity makes exact.
    """
    c = np.asarray(center, dtype=np.float64)
    xs = (np.asarray(x, dtype=np.float64) - c) / side
    if np.any(np.abs(xs) > 0.5 + 1e-12):
        raise ValueError("x must lie in J")
    if spec.kind == BUMP:
        spec = spec.with_t(spec.t1 / side, spec.t2 / side)

    def integrand(u1, u2):
        U1, U2 = np.meshgrid(u1, u2, indexing="ij")
        with np.errstate(divide="ignore", invalid="ignore"):
            a = kernel_of_difference_safe(spec, xs[0] - U1, xs[1] - U2)
            b = kernel_of_difference_safe(spec, -U1, -U2)
        return np.abs(a - b)

    lo = (-M - c) / side
    hi = (1.0 + M - c) / side
    sing1, sing2 = [xs[0], 0.0], [xs[1], 0.0]

    def region_sum(r1, r2, w1, w2, mask1, mask2):
        u1, v1 = r1[mask1], w1[mask1]
        u2, v2 = r2[mask2], w2[mask2]
        if u1.size == 0 or u2.size == 0:
            return 0.0
        F = integrand(u1, u2)
        return float(v1 @ F @ v2)

    def total_over(lo_, hi_):
        r1, w1 = _axis_nodes(lo_[0], hi_[0], [-1.5, 1.5, *sing1], 1.5)
        r2, w2 = _axis_nodes(lo_[1], hi_[1], [-1.5, 1.5, *sing2], 1.5)
        in1, in2 = np.abs(r1) < 1.5, np.abs(r2) < 1.5
        return {
            "far_both": region_sum(r1, r2, w1, w2, ~in1, ~in2),
            "strip_1": region_sum(r1, r2, w1, w2, ~in1, in2),
            "strip_2": region_sum(r1, r2, w1, w2, in1, ~in2),
        }

    parts = total_over(lo, hi)
    big = total_over(np.full(2, -far), np.full(2, far))
    value = sum(parts.values())
    return HormanderResult(value, max(0.0, sum(big.values()) - value), parts)


def kernel_of_difference_safe(spec: KernelSpec, z1, z2):
    """Like ``kernel_of_difference`` but returns 0 on coordinate lines (measure zero)."""
    if spec.kind == BUMP:
        return kernel_of_difference(spec, z1, z2)
    a, b = np.abs(z1), np.abs(z2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _decay(a, b, spec.theta2, spec.log_flag) / (a * b)
    return np.where((a > 0) & (b > 0), out, 0.0)


def away_difference_check(spec: KernelSpec, side: float, samples: int, seed: int):
    """Ratios of |K(x,y) - K(c_J,y)| against both away-from-J bounds.

    y is drawn in the complement of 3J in both coordinates, x in J. Returns
    (sharper_ratio_max, product_ratio_max).
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-side / 2, side / 2, (samples, 2))
    dist = side * _loguniform(rng, 1.0, 1e4, (samples, 2))
    sgn = rng.choice([-1.0, 1.0], (samples, 2))
    y = sgn * (side / 2 + dist)
    lhs = np.abs(kernel_eval(spec, x, y) - kernel_eval(spec, np.zeros(2), y))
    d1, d2 = dist[:, 0], dist[:, 1]
    dmin, dmax = np.minimum(d1, d2), np.maximum(d1, d2)
    th1, th2, th = spec.theta1, spec.theta2, spec.theta
    sharp = side ** th1 * dmin ** (th2 - th1) / dmax ** th2 / (d1 * d2)
    prod = side ** (2 * th) / (d1 * d2) ** (1 + th)
    return float(np.max(lhs / sharp)), float(np.max(lhs / prod))


def dft_bound_check(spec: KernelSpec, n: int) -> tuple[float, float]:
    """Max |DFT| of the sampled bump kernel against the product of sampled phi masses."""
    N = 1 << n
    h = 1.0 / N
    d = (np.arange(N) - N // 2) * h
    k1 = phi(d / spec.t1) / spec.t1 * h
    k2 = phi(d / spec.t2) / spec.t2 * h
    K = spec.bump_prefactor * np.outer(k1, k2)
    return float(np.abs(np.fft.fft2(K)).max()), float(k1.sum() * k2.sum())
