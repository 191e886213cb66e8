"""Piecewise-constant signals on the 2**n x 2**n grid and their Haar calculus.

Grid-wide operators (``cond_exp``, ``martingale_diff``, ``haar_coeffs``...)
work on all squares of one scale at once by rolling the array so that the
lattice squares become aligned blocks.  Object-level helpers
(``haar_function``, ``expectation_and_difference``...) take single
rectangles and are mainly for tests and small examples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .lattice import (BOX, DOMAINS, TORUS, DyadicRect, GridGeometry, ResolutionError,
                      ShiftBits)

SIGNATURES = ((0, 0), (0, 1), (1, 0), (1, 1))
CANCELLATIVE = SIGNATURES[1:]


@dataclass(frozen=True, eq=False)
class Signal2D:
    """Cell values of a piecewise-constant function; immutable."""

    values: np.ndarray
    domain: str = TORUS

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("signal must be a square array")
        N = v.shape[0]
        if N < 2 or N & (N - 1):
            raise ValueError("side must be a power of two >= 2")
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, n: int, domain: str = TORUS) -> "Signal2D":
        return cls(np.zeros((1 << n, 1 << n)), domain)

    @classmethod
    def constant(cls, n: int, c: float, domain: str = TORUS) -> "Signal2D":
        return cls(np.full((1 << n, 1 << n), float(c)), domain)

    @property
    def n(self) -> int:
        return self.values.shape[0].bit_length() - 1

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.n, self.domain)

    @property
    def cell_area(self) -> float:
        return 4.0 ** (-self.n)

    def integral(self) -> float:
        return float(self.values.mean())

    def inner(self, other: "Signal2D") -> float:
        return float(np.sum(self.values * _arr(other))) * self.cell_area

    def norm(self, p: float = 2.0) -> float:
        return float(np.mean(np.abs(self.values) ** p) ** (1.0 / p))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def _wrap(self, v) -> "Signal2D":
        return Signal2D(v, self.domain)

    def __add__(self, o):
        return self._wrap(self.values + _arr(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.values - _arr(o))

    def __rsub__(self, o):
        return self._wrap(_arr(o) - self.values)

    def __mul__(self, o):
        return self._wrap(self.values * _arr(o))

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self._wrap(self.values / _arr(o))

    def __neg__(self):
        return self._wrap(-self.values)

    def __abs__(self):
        return self._wrap(np.abs(self.values))

    def allclose(self, other, rtol=1e-12, atol=1e-12) -> bool:
        return bool(np.allclose(self.values, _arr(other), rtol=rtol, atol=atol))


def _arr(x) -> np.ndarray | float:
    if isinstance(x, Signal2D):
        return x.values
    return x


def as_array(x) -> np.ndarray:
    return np.asarray(_arr(x), dtype=np.float64)


@dataclass(frozen=True)
class HaarIndex:
    rect: DyadicRect
    eta: tuple[int, int]

    def __post_init__(self) -> None:
        if not self.rect.is_square:
            raise ValueError("Haar functions live on squares")
        if tuple(self.eta) not in SIGNATURES:
            raise ValueError(f"signature must be one of {SIGNATURES}")
        object.__setattr__(self, "eta", tuple(int(e) for e in self.eta))

    @property
    def cancellative(self) -> bool:
        return self.eta != (0, 0)


def _haar_1d(cells_n: int, I, eta: int) -> np.ndarray:
    v = np.zeros(cells_n)
    if eta == 0:
        v[I.cells()] = 1.0
    else:
        if I.width < 2:
            raise ResolutionError("cancellative Haar function needs an interval of >= 2 cells")
        left, right = I.halves()
        v[left], v[right] = 1.0, -1.0
    return v / np.sqrt(I.length)


def haar_function(idx: HaarIndex, domain: str = TORUS) -> Signal2D:
    I1, I2 = idx.rect.first, idx.rect.second
    N = 1 << I1.n
    return Signal2D(np.outer(_haar_1d(N, I1, idx.eta[0]), _haar_1d(N, I2, idx.eta[1])), domain)


def indicator(rect: DyadicRect, domain: str = TORUS) -> Signal2D:
    return Signal2D(rect.mask().astype(float), domain)


def balanced_haar(I: DyadicRect, J: DyadicRect, domain: str = TORUS) -> Signal2D:
    """h_I^0 - h_J^0 for two squares of equal side."""
    if I.scales != J.scales or not I.is_square:
        raise ValueError("balanced Haar functions need squares of equal side")
    return (haar_function(HaarIndex(I, (0, 0)), domain)
            - haar_function(HaarIndex(J, (0, 0)), domain))


def average(f, rect: DyadicRect) -> float:
    return float(as_array(f)[rect.mask()].mean())


def expectation_and_difference(f: Signal2D, I: DyadicRect) -> tuple[Signal2D, Signal2D]:
    f = f if isinstance(f, Signal2D) else Signal2D(f)
    mask = I.mask()
    E = np.where(mask, f.values[mask].mean(), 0.0)
    if I.first.j >= I.first.n:
        return Signal2D(E, f.domain), Signal2D.zeros(f.n, f.domain)
    fine = np.zeros_like(E)
    for a in I.first.children():
        for b in I.second.children():
            child = DyadicRect(a, b).mask()
            fine[child] = f.values[child].mean()
    return Signal2D(E, f.domain), Signal2D(fine - E, f.domain)


# ---------------------------------------------------------------- grid-wide


def check_domain(domain: str, shifts: tuple[ShiftBits, ShiftBits] | None) -> None:
    if domain == BOX and shifts is not None and not (shifts[0].is_zero and shifts[1].is_zero):
        raise ValueError("box mode supports only the unshifted lattice")


def to_blocks(v: np.ndarray, j1: int, j2: int, roll: tuple[int, int]) -> np.ndarray:
    """View cells as (2**j1, B1, 2**j2, B2) after aligning the lattice origin."""
    N = v.shape[-1]
    w = np.roll(v, (-roll[0], -roll[1]), axis=(-2, -1)) if any(roll) else v
    lead = v.shape[:-2]
    return w.reshape(*lead, 1 << j1, N >> j1, 1 << j2, N >> j2)


def from_blocks(b: np.ndarray, roll: tuple[int, int]) -> np.ndarray:
    lead = b.shape[:-4]
    N = b.shape[-4] * b.shape[-3]
    v = b.reshape(*lead, N, N)
    return np.roll(v, roll, axis=(-2, -1)) if any(roll) else v


def scale_roll(shifts: tuple[ShiftBits, ShiftBits] | None, j1: int, j2: int | None = None):
    if shifts is None:
        return (0, 0)
    j2 = j1 if j2 is None else j2
    return (shifts[0].offset(j1), shifts[1].offset(j2))


def block_means(v: np.ndarray, j1: int, j2: int, roll=(0, 0)) -> np.ndarray:
    return to_blocks(v, j1, j2, roll).mean(axis=(-3, -1))


def cond_exp(f, j: int, shifts=None, j2: int | None = None) -> np.ndarray:
    """E_{j} f: replace each lattice rectangle of scales (j, j2) by its mean."""
    v = as_array(f)
    j2 = j if j2 is None else j2
    roll = scale_roll(shifts, j, j2)
    b = to_blocks(v, j, j2, roll)
    m = b.mean(axis=(-3, -1), keepdims=True)
    return from_blocks(np.broadcast_to(m, b.shape).copy(), roll)


def martingale_diff(f, j: int, shifts=None) -> np.ndarray:
    """D_j f = E_{j+1} f - E_j f (zero at the finest scale)."""
    n = as_array(f).shape[-1].bit_length() - 1
    if j >= n:
        return np.zeros_like(as_array(f))
    return cond_exp(f, j + 1, shifts) - cond_exp(f, j, shifts)


def _split(b: np.ndarray) -> np.ndarray:
    """(.., M1, B1, M2, B2) -> (.., M1, 2, B1/2, M2, 2, B2/2)."""
    *lead, M1, B1, M2, B2 = b.shape
    return b.reshape(*lead, M1, 2, B1 // 2, M2, 2, B2 // 2)


_SIGN = np.array([[1.0, 1.0], [1.0, -1.0]])  # row eta, column half


def haar_coeffs(f, j: int, roll=(0, 0)) -> np.ndarray:
    """<f, h_I^eta> for every square of scale j < n; shape (4, 2**j, 2**j) in SIGNATURES order.

    ``roll`` aligns the squares; for a lattice pair pass ``scale_roll(shifts, j)``.
    """
    v = as_array(f)
    N = v.shape[-1]
    n = N.bit_length() - 1
    if j >= n:
        raise ResolutionError("cancellative coefficients need squares of >= 2 cells")
    q = _split(to_blocks(v, j, j, roll)).sum(axis=(-4, -1))  # (.., M, 2, M, 2)
    a = 4.0 ** (-n)
    ell = 2.0 ** (-j)
    out = np.einsum("ea,fb,...manb->...efmn", _SIGN, _SIGN, q)
    return out.reshape(*v.shape[:-2], 4, 1 << j, 1 << j) * (a / ell)


def haar_synth(c: np.ndarray, j: int, n: int, roll=(0, 0)) -> np.ndarray:
    """Inverse of ``haar_coeffs``: sum of c[eta, I] h_I^eta over one scale."""
    M = 1 << j
    B = 1 << (n - j)
    c4 = c.reshape(*c.shape[:-3], 2, 2, M, M)
    half = np.einsum("ea,fb,...efmn->...manb", _SIGN, _SIGN, c4) * (2.0 ** j)
    blk = np.broadcast_to(half[..., :, :, None, :, :, None],
                          (*half.shape[:-4], M, 2, B // 2, M, 2, B // 2))
    return from_blocks(blk.reshape(*half.shape[:-4], M, B, M, B).copy(), roll)


def reconstruct(f, shifts=None) -> np.ndarray:
    """<f> + sum over scales of the cancellative Haar parts; equals f on the grid."""
    v = as_array(f)
    n = v.shape[-1].bit_length() - 1
    out = np.full_like(v, v.mean())
    for j in range(n):
        roll = scale_roll(shifts, j)
        c = haar_coeffs(v, j, roll)
        c[0] = 0.0
        out = out + haar_synth(c, j, n, roll)
    return out


def block_projection(f, K: DyadicRect, k1: int) -> Signal2D:
    """1_K times the sum of D_L f over squares L with 2^-k1 l(K^1) <= l(L) <= l(K^1).

    Assumes k1 >= k2, so that K sits inside one square of side l(K^1).
    """
    fs = f if isinstance(f, Signal2D) else Signal2D(f)
    jK = K.first.j
    j_fine = jK + k1
    n = fs.n
    if j_fine > n:
        raise ResolutionError("block projection needs scales finer than the grid")
    shifts = (K.first.shift, K.second.shift)
    fine = fs.values if j_fine >= n else cond_exp(fs, j_fine + 1, shifts)
    v = (fine - cond_exp(fs, jK, shifts)) * K.mask()
    return Signal2D(v, fs.domain)


def block_difference(g, K: DyadicRect, k: tuple[int, int]) -> Signal2D:
    """Sum of D_J g over squares J whose k-th ancestor is K; supported in K."""
    gs = g if isinstance(g, Signal2D) else Signal2D(g)
    j = K.first.j + k[0]
    if K.second.j + k[1] != j:
        raise ValueError("K and k do not describe a square descendant")
    if j > gs.n:
        raise ResolutionError("descendant scale finer than the grid")
    shifts = (K.first.shift, K.second.shift)
    return Signal2D(martingale_diff(gs, j, shifts) * K.mask(), gs.domain)


def squares(shifts: tuple[ShiftBits, ShiftBits], j: int) -> Iterable[DyadicRect]:
    from .lattice import DyadicInterval
    for a in range(1 << j):
        for b in range(1 << j):
            yield DyadicRect(DyadicInterval(j, a, shifts[0]), DyadicInterval(j, b, shifts[1]))


def upsample(v: np.ndarray, n: int) -> np.ndarray:
    """Repeat cells of a coarse array so it lives on the 2**n grid."""
    r = (1 << n) // v.shape[-1]
    return np.repeat(np.repeat(v, r, axis=-2), r, axis=-1)


def random_signal(n: int, rng: np.random.Generator, base: int | None = None,
                  domain: str = TORUS, mean_zero: bool = False) -> Signal2D:
    """Gaussian cell values drawn on a 2**base grid and upsampled to 2**n."""
    base = n if base is None else min(base, n)
    v = upsample(rng.standard_normal((1 << base, 1 << base)), n)
    if mean_zero:
        v = v - v.mean()
    return Signal2D(v, domain)
