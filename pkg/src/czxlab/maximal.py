"""Maximal operators on the cell grid.

Rectangles and squares are grid-aligned with cell-resolution corners and stay
inside the unit box (no wraparound), except for the lattice maximal function,
which follows its lattice.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ._windows import cover_max, dyadic_sides, window_means
from .lattice import ShiftBits
from .signals import Signal2D, as_array, cond_exp

EXACT_STRONG_MAX_N = 7


def _out(template, v: np.ndarray):
    if isinstance(template, Signal2D):
        return Signal2D(v, template.domain)
    return v


def lattice_maximal(f, lam: float, sigma: tuple[ShiftBits, ShiftBits] | None = None):
    """sup over rectangles of D_lam(sigma) containing the cell of <|f|>."""
    v = np.abs(as_array(f))
    n = v.shape[-1].bit_length() - 1
    e = np.log2(lam)
    if not float(e).is_integer() or abs(e) > n:
        raise ValueError(f"ratio {lam} is not representable at n={n}")
    e = int(e)
    out = np.zeros_like(v)
    # l(I^1) = lam l(I^2): scale of I^1 is j - e when I^2 sits at scale j
    for j in range(max(0, e), min(n, n + e) + 1):
        out = np.maximum(out, cond_exp(v, j - e, sigma, j2=j))
    return _out(f, out)


def square_maximal(f, sigma=None):
    return lattice_maximal(f, 1.0, sigma)


def maximal_1d(v: np.ndarray, axis: int) -> np.ndarray:
    """Exact one-dimensional maximal function of |v| along an axis (all intervals)."""
    a = np.moveaxis(np.abs(v), axis, 0)
    N = a.shape[0]
    c = np.concatenate([np.zeros((1,) + a.shape[1:]), a.cumsum(0)])
    out = a.copy()
    for L in range(2, N + 1):
        means = (c[L:] - c[:-L]) / L                    # window starts 0..N-L
        pad = np.full((L - 1,) + a.shape[1:], -np.inf)
        Q = np.concatenate([pad, means, pad])
        # cell x is covered by starts x-L+1..x
        win = np.lib.stride_tricks.sliding_window_view(Q, L, axis=0).max(axis=-1)
        out = np.maximum(out, win)
    return np.moveaxis(out, 0, axis)


def iterated_maximal(f):
    """M^2 M^1 f: 1D maximal along axis 0, then along axis 1."""
    v = as_array(f)
    return _out(f, maximal_1d(maximal_1d(v, 0), 1))


def _strong_exact(v: np.ndarray) -> np.ndarray:
    A = np.abs(v)
    N = A.shape[0]
    S = np.zeros((N + 1, N + 1))
    S[1:, 1:] = A.cumsum(0).cumsum(1)
    out = np.zeros_like(A)
    idx = np.arange(N)
    width = (idx[None, :] - idx[:, None] + 1).astype(float)      # [a2, b2]
    valid = width > 0
    below = idx[:, None] <= idx[None, :]                          # a2 <= x2
    for a1 in range(N):
        rows = S[a1 + 1:, :] - S[a1, :]                           # (nb, N+1)
        sums = rows[:, None, 1:] - rows[:, :N, None]              # (nb, a2, b2)
        height = np.arange(1, N - a1 + 1, dtype=float)[:, None, None]
        avg = np.where(valid, sums / (height * np.where(valid, width, 1.0)), -np.inf)
        F = np.maximum.accumulate(avg[..., ::-1], axis=-1)[..., ::-1]   # max over b2 >= x2
        G = np.where(below[None], F, -np.inf).max(axis=1)               # max over a2 <= x2
        H = np.maximum.accumulate(G[::-1], axis=0)[::-1]                # max over b1 >= x1
        out[a1:] = np.maximum(out[a1:], H)
    return out


def strong_maximal(f, exact_limit_n: int = EXACT_STRONG_MAX_N):
    """sup of <|f|>_R over all grid rectangles R containing the cell.

    Exact enumeration up to ``exact_limit_n`` (rectangles of at most 4^n cells);
    beyond that the iterated bound M^2 M^1 f is returned, which dominates it.
    """
    v = as_array(f)
    n = v.shape[-1].bit_length() - 1
    if n <= exact_limit_n:
        return _out(f, _strong_exact(v))
    return iterated_maximal(f)


def hl_maximal(v: np.ndarray, sides: list[int]) -> np.ndarray:
    """Uncentred maximal function over squares of the given cell sides; zero padding outside."""
    A = np.abs(v)
    N1, N2 = A.shape
    out = np.zeros_like(A)
    for s in sides:
        P = np.pad(A, s - 1)
        means = window_means(P, s, s)                 # starts -(s-1)..N-1
        out = np.maximum(out, cover_max(means, s, s)[s - 1:s - 1 + N1, s - 1:s - 1 + N2])
    return out


# ---------------------------------------------------------------- sharp maximal


def _window_factor(K: np.ndarray, starts: np.ndarray, B: int, src: tuple[int, int]) -> np.ndarray:
    """W[p, u, y] = K[p + u, y] restricted to y in 3J = [p - B, p + 2B), y in src range."""
    y = np.arange(src[0], src[1])
    rows = starts[:, None] + np.arange(B)[None, :]
    W = K[rows][:, :, src[0]:src[1]]
    inside = (y[None, :] >= (starts[:, None] - B)) & (y[None, :] < (starts[:, None] + 2 * B))
    return W * inside[:, None, :]


def sharp_maximal_region(T, f: np.ndarray, target: tuple[int, int, int, int] | None = None,
                         support: tuple[int, int, int, int] | None = None,
                         max_side: int | None = None) -> np.ndarray:
    """Sharp maximal function of f (batch allowed) on the cells of ``target``.

    ``target`` and ``support`` are (r0, r1, c0, c1) cell boxes; f must vanish
    outside ``support``.  Squares J have dyadic sides up to ``max_side``, lie in
    the box and meet the target.  Returns values on the target box.
    """
    f = np.asarray(f, dtype=np.float64)
    batch = f.ndim == 3
    F = f if batch else f[None]
    N = F.shape[-1]
    r0, r1, c0, c1 = target or (0, N, 0, N)
    s0, s1, t0, t1 = support or (0, N, 0, N)
    fs = F[:, s0:s1, t0:t1]
    out = np.zeros((F.shape[0], r1 - r0, c1 - c0))
    for B in dyadic_sides(N):
        if max_side is not None and B > max_side:
            break
        p1 = np.arange(max(0, r0 - B + 1), min(N - B, r1 - 1) + 1)
        p2 = np.arange(max(0, c0 - B + 1), min(N - B, c1 - 1) + 1)
        if p1.size == 0 or p2.size == 0:
            continue
        W1 = _window_factor(T.K1, p1, B, (s0, s1))          # (P1, B, S1)
        W2 = _window_factor(T.K2, p2, B, (t0, t1))          # (P2, B, S2)
        X = np.einsum("puy,kyz->kpuz", W1, fs)              # (k, P1, B, S2)
        near = T.prefactor * (X.reshape(-1, fs.shape[-1]) @ W2.reshape(-1, fs.shape[-1]).T)
        near = near.reshape(F.shape[0], p1.size, B, p2.size, B)
        # full T f on the rows/cols covered by the squares
        er = slice(p1[0], p1[-1] + B)
        ec = slice(p2[0], p2[-1] + B)
        Tf = np.stack([T.apply_block(g, (slice(s0, s1), slice(t0, t1)), (er, ec)) for g in fs])
        win = np.lib.stride_tricks.sliding_window_view(Tf, (B, B), axis=(-2, -1))
        far = win.transpose(0, 1, 3, 2, 4) - near              # (k, P1, B, P2, B)
        osc = far.max(axis=(2, 4)) - far.min(axis=(2, 4))      # (k, P1, P2)
        for k in range(F.shape[0]):
            cov = cover_max(osc[k], B, B)                       # rows p1[0]..p1[-1]+B-1
            a0, b0 = r0 - p1[0], c0 - p2[0]
            out[k] = np.maximum(out[k], cov[a0:a0 + (r1 - r0), b0:b0 + (c1 - c0)])
    return out if batch else out[0]


def sharp_maximal(T, f, max_side: int | None = None):
    """sup over squares J containing the cell of the oscillation of T(1_{(3J)^c} f) on J."""
    v = as_array(f)
    return _out(f, sharp_maximal_region(T, v, max_side=max_side))


@dataclass
class MaximalReport:
    tag: str
    max_ratio: float
    argmax: list
    domination_constant: float
    mean_ratio: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def maximal_report(num, den, tag: str, constant: float = float("nan"), floor: float = 1e-300) -> MaximalReport:
    a, b = as_array(num), as_array(den)
    r = np.where(b > floor, a / np.maximum(b, floor), np.where(a > floor, np.inf, 0.0))
    k = np.unravel_index(int(np.argmax(r)), r.shape)
    return MaximalReport(tag, float(r[k]), [int(i) for i in k], constant, float(r.mean()))
