"""Discretised bilinear forms B(f, g) = sum_x sum_y K(x_c, y_c) f(y) g(x) a^2.

Convolution kernels are stored as a stencil over cell offsets and applied by
FFT; arbitrary kernels are stored as a dense cell-by-cell matrix.  Cells are
flattened row-major.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import signal as spsignal

from .kernel import BUMP, PURE, KernelSpec, kernel_of_difference, kernel_of_difference_safe
from .lattice import BOX, TORUS, GridGeometry, ShiftBits
from .signals import (SIGNATURES, HaarIndex, Signal2D, as_array, haar_coeffs, haar_function,
                      scale_roll)

ZERO = "zero"
KERNEL = "kernel"
DENSE_LIMIT_N = 6


class ResourceError(MemoryError):
    """Dense assembly would exceed the configured size."""


@dataclass(frozen=True, eq=False)
class FormMatrix:
    geometry: GridGeometry
    stencil: np.ndarray | None = None    # K at offsets; torus (N, N), box (2N-1, 2N-1)
    matrix: np.ndarray | None = None     # K[x, y] over flattened cells
    diagonal_convention: str = KERNEL
    spec: KernelSpec | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def N(self) -> int:
        return self.geometry.size

    @property
    def cell_area(self) -> float:
        return self.geometry.cell_area

    @property
    def is_convolution(self) -> bool:
        return self.stencil is not None

    def _fft_stencil(self) -> np.ndarray:
        if "fft" not in self._cache:
            self._cache["fft"] = np.fft.rfft2(self.stencil)
        return self._cache["fft"]

    def apply(self, f) -> Signal2D:
        """T f(x) = sum_y K(x, y) f(y) a."""
        v = as_array(f)
        a = self.cell_area
        if self.matrix is not None:
            out = (self.matrix @ v.reshape(-1)).reshape(v.shape)
        elif self.geometry.domain == TORUS:
            out = np.fft.irfft2(np.fft.rfft2(v) * self._fft_stencil(), s=v.shape)
        else:
            N = self.N
            out = spsignal.fftconvolve(v, self.stencil, mode="full")[N - 1:2 * N - 1, N - 1:2 * N - 1]
        return Signal2D(out * a, self.geometry.domain)

    def apply_adjoint(self, g) -> Signal2D:
        v = as_array(g)
        a = self.cell_area
        if self.matrix is not None:
            out = (self.matrix.T @ v.reshape(-1)).reshape(v.shape)
        elif self.geometry.domain == TORUS:
            flipped = np.roll(self.stencil[::-1, ::-1], (1, 1), axis=(0, 1))
            out = np.fft.irfft2(np.fft.rfft2(v) * np.fft.rfft2(flipped), s=v.shape)
        else:
            N = self.N
            out = spsignal.fftconvolve(v, self.stencil[::-1, ::-1], mode="full")[N - 1:2 * N - 1, N - 1:2 * N - 1]
        return Signal2D(out * a, self.geometry.domain)

    def pair(self, f, g) -> float:
        """B(f, g)."""
        return float(np.sum(as_array(g) * self.apply(f).values)) * self.cell_area

    def dense(self) -> np.ndarray:
        """K[x, y] over flattened cells (without the cell area factors)."""
        if self.matrix is not None:
            return self.matrix
        if self.n > DENSE_LIMIT_N:
            raise ResourceError(f"dense form at n={self.n} exceeds the limit n={DENSE_LIMIT_N}")
        if "dense" not in self._cache:
            N = self.N
            i = np.arange(N)
            d = i[:, None] - i[None, :]
            if self.geometry.domain == TORUS:
                d = d % N
            else:
                d = d + N - 1
            # M[(x1,x2),(y1,y2)] = S[d1[x1,y1], d2[x2,y2]]
            M = self.stencil[d[:, None, :, None], d[None, :, None, :]]
            self._cache["dense"] = M.reshape(N * N, N * N)
        return self._cache["dense"]


def _offsets(geometry: GridGeometry) -> np.ndarray:
    N, h = geometry.size, geometry.cell
    if geometry.domain == TORUS:
        d = np.arange(N)
        d = np.where(d > N // 2, d - N, d)   # nearest image on the torus
    else:
        d = np.arange(-(N - 1), N)
    return d * h


def assemble_form(spec: KernelSpec, geometry: GridGeometry,
                  diagonal_convention: str | None = None) -> FormMatrix:
    """Convolution form of a kernel sampled at cell-centre offsets.

    Bump kernels on the torus use the nearest-image offset, exact while the
    support fits inside the torus (t_i <= 1/4).
    """
    conv = diagonal_convention or (ZERO if spec.kind == PURE else KERNEL)
    if spec.kind == PURE and conv != ZERO:
        raise ValueError("the pure kernel requires the zero diagonal convention")
    d = _offsets(geometry)
    Z1, Z2 = np.meshgrid(d, d, indexing="ij")
    if spec.kind == PURE:
        S = kernel_of_difference_safe(spec, Z1, Z2)
    else:
        S = kernel_of_difference(spec, Z1, Z2)
        if conv == ZERO:
            S = np.where((Z1 == 0) | (Z2 == 0), 0.0, S)
    return FormMatrix(geometry, stencil=S, diagonal_convention=conv, spec=spec)


def form_from_callable(kernel: Callable[[np.ndarray, np.ndarray], np.ndarray],
                       geometry: GridGeometry, diagonal_convention: str = KERNEL,
                       spec: KernelSpec | None = None) -> FormMatrix:
    """Dense form from K(x, y) evaluated on cell-centre arrays of shape (..., 2)."""
    if geometry.n > DENSE_LIMIT_N:
        raise ResourceError(f"dense form at n={geometry.n} exceeds the limit n={DENSE_LIMIT_N}")
    c = geometry.centers()
    X = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1).reshape(-1, 2)
    M = np.asarray(kernel(X[:, None, :], X[None, :, :]), dtype=np.float64)
    if diagonal_convention == ZERO:
        same = (X[:, None, 0] == X[None, :, 0]) | (X[:, None, 1] == X[None, :, 1])
        M = np.where(same, 0.0, M)
    return FormMatrix(geometry, matrix=M, diagonal_convention=diagonal_convention, spec=spec)


# ---------------------------------------------------------------- Haar pairings


def haar_coefficient(B: FormMatrix, I: HaarIndex, J: HaarIndex) -> float:
    """B(h_I^beta, h_J^gamma): h_I enters as f, h_J as g."""
    if I.rect.scales != J.rect.scales:
        raise ValueError("Haar coefficients need squares of equal side")
    d = B.geometry.domain
    return B.pair(haar_function(I, d), haar_function(J, d))


def wbp_check(B: FormMatrix, I) -> float:
    """|B(1_I, 1_I)| / |I|."""
    mask = I.mask().astype(float)
    return abs(B.pair(mask, mask)) / I.area


def wbp_sweep(B: FormMatrix, shifts: tuple[ShiftBits, ShiftBits] | None = None) -> float:
    """Largest WBP ratio over all squares at scales 0..n of one lattice."""
    best = 0.0
    N = B.N
    invariant = B.is_convolution and B.geometry.domain == TORUS
    for j in range(B.n + 1):
        roll = scale_roll(shifts, j)
        M, W = 1 << j, N >> j
        # translation invariance: one square per scale suffices for torus convolutions
        positions = [(0, 0)] if invariant else [(a, b) for a in range(M) for b in range(M)]
        for m1, m2 in positions:
            mask = np.zeros((N, N))
            mask[m1 * W:(m1 + 1) * W, m2 * W:(m2 + 1) * W] = 1.0
            mask = np.roll(mask, roll, axis=(0, 1))
            best = max(best, abs(B.pair(mask, mask)) * 4.0 ** j)
    return best


@dataclass
class T1Data:
    b1: Signal2D      # T*1, column sums
    b2: Signal2D      # T1, row sums
    bmo1: float
    bmo2: float

    @property
    def t_one(self) -> Signal2D:
        return self.b2

    @property
    def t_star_one(self) -> Signal2D:
        return self.b1


def t1_functions(B: FormMatrix) -> T1Data:
    """b2 = T1 (row sums), b1 = T*1 (column sums) on the torus."""
    if B.geometry.domain != TORUS:
        raise ValueError("T1 data is defined in torus mode")
    from .weights import bmo_norms
    one = np.ones((B.N, B.N))
    b2 = B.apply(one)
    b1 = B.apply_adjoint(one)
    return T1Data(b1, b2, bmo_norms(b1)[0], bmo_norms(b2)[0])


# ---------------------------------------------------------------- decay report

CASES = ("equal", "adjacent", "separated_one", "separated_both")


def _patterns(B_cells: int) -> np.ndarray:
    """The four Haar sign patterns on a B x B block (unnormalised)."""
    h = B_cells // 2
    s = np.r_[np.ones(h), -np.ones(h)]
    o = np.ones(B_cells)
    rows = {0: o, 1: s}
    return np.array([np.outer(rows[e1], rows[e2]) for e1, e2 in SIGNATURES])


def offset_coefficients(B: FormMatrix, j: int) -> tuple[np.ndarray, np.ndarray]:
    """B(h_I^beta, h_J^gamma) for every lattice offset m = J - I at scale j.

    Returns (m_values, C) with C[gamma, beta, m1, m2]; valid for convolution forms,
    where the pairing depends on the offset only.  In box mode offsets run over
    -(2^j - 1)..(2^j - 1); on the torus over 0..2^j - 1 (cyclic).
    """
    if not B.is_convolution:
        raise ValueError("offset coefficients need a convolution form")
    N, n = B.N, B.n
    W = N >> j
    P = _patterns(W)
    a = B.cell_area
    norm = 4.0 ** j   # |I|^-1/2 |J|^-1/2 = 2^j * 2^j
    S = B.stencil
    if B.geometry.domain == TORUS:
        # C(m) = sum_e S[mW + e] G[e] with G the cyclic correlation of the two patterns
        F = np.fft.fft2(S)
        Pf = np.fft.fft2(P, s=(N, N))
        corr = np.fft.ifft2(F[None, None] * np.conj(Pf)[:, None] * Pf[None, :]).real
        C = corr[:, :, ::W, ::W]
        m = np.arange(1 << j)
    else:
        # S is indexed by offset + N - 1; sampling the valid correlation at mW + N - W
        C = np.empty((4, 4, 2 * (1 << j) - 1, 2 * (1 << j) - 1))
        for g in range(4):
            for b in range(4):
                Q = spsignal.correlate(P[g], P[b], mode="full")
                C[g, b] = spsignal.correlate(S, Q, mode="valid")[::W, ::W]
        m = np.arange(-(1 << j) + 1, 1 << j)
    return m, C * a * a * norm


def _case(m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    a1, a2 = np.abs(m1), np.abs(m2)
    out = np.full(np.broadcast(a1, a2).shape, 3)
    out[(a1 <= 1) & (a2 <= 1)] = 1
    out[((a1 <= 1) & (a2 >= 2)) | ((a1 >= 2) & (a2 <= 1))] = 2
    out[(a1 == 0) & (a2 == 0)] = 0
    return out


def separation_bound(m1, m2, theta1: float, theta2: float) -> np.ndarray:
    """Sharper coefficient bound in units of the side length.

    prod 1/(1 + d_i) * (1 + min d)^(theta2 - theta1) / (1 + max d)^theta2,
    with d_i = max(|m_i| - 1, 0) the gap between the squares.
    """
    d1 = np.maximum(np.abs(m1) - 1, 0) + 1.0
    d2 = np.maximum(np.abs(m2) - 1, 0) + 1.0
    lo, hi = np.minimum(d1, d2), np.maximum(d1, d2)
    return lo ** (theta2 - theta1) / hi ** theta2 / (d1 * d2)


def product_bound(m1, m2, theta: float) -> np.ndarray:
    d1 = np.maximum(np.abs(m1) - 1, 0) + 1.0
    d2 = np.maximum(np.abs(m2) - 1, 0) + 1.0
    return (d1 * d2) ** (-1.0 - theta)


@dataclass
class DecayRow:
    case: str
    scale: int
    theta1: float
    theta2: float
    max_ratio: float
    argmax_I: str
    argmax_J: str


def decay_report(B: FormMatrix, spec: KernelSpec, j: int) -> list[DecayRow]:
    """Per position case, max of |B(h_I^beta, h_J^gamma)| / sharper bound (one cancellative)."""
    m, C = offset_coefficients(B, j)
    if B.geometry.domain == TORUS:
        M = 1 << j
        m = np.where(m > M // 2, m - M, m)
    M1, M2 = np.meshgrid(m, m, indexing="ij")
    cases = _case(M1, M2)
    bound = separation_bound(M1, M2, spec.theta1, spec.theta2)
    canc = np.ones((4, 4), dtype=bool)
    canc[0, 0] = False
    mag = np.abs(C) * canc[:, :, None, None]
    best = mag.max(axis=(0, 1)) / bound
    rows = []
    for ci, name in enumerate(CASES):
        sel = cases == ci
        if not sel.any():
            continue
        vals = np.where(sel, best, -1.0)
        k = np.unravel_index(np.argmax(vals), vals.shape)
        off = (int(M1[k]), int(M2[k]))
        I = f"{j}:0,0" if B.geometry.domain == TORUS else f"{j}:{max(0, -off[0])},{max(0, -off[1])}"
        if B.geometry.domain == TORUS:
            J = f"{j}:{off[0] % (1 << j)},{off[1] % (1 << j)}"
        else:
            J = f"{j}:{max(0, -off[0]) + off[0]},{max(0, -off[1]) + off[1]}"
        rows.append(DecayRow(name, j, spec.theta1, spec.theta2, float(vals[k]), I, J))
    return rows


def diagonal_decay_slope(B: FormMatrix, j: int, mmin: int = 2) -> float:
    """Per-parameter decay exponent of the separated-in-both coefficients along the diagonal.

    Fits -log2 max|C(m, m)| against log2(m) over m >= mmin and halves the slope.
    """
    m, C = offset_coefficients(B, j)
    canc = np.ones((4, 4), dtype=bool)
    canc[0, 0] = False
    mag = (np.abs(C) * canc[:, :, None, None]).max(axis=(0, 1))
    idx = np.nonzero(m >= mmin)[0]
    if B.geometry.domain == TORUS:
        idx = idx[m[idx] <= (1 << j) // 2]
    diag = mag[idx, idx]
    slope = np.polyfit(np.log2(m[idx]), -np.log2(diag), 1)[0]
    return float(slope / 2.0)


def decay_csv(rows: list[DecayRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case", "scale", "theta1", "theta2", "max_ratio", "argmax_I", "argmax_J"])
    for r in rows:
        w.writerow([r.case, r.scale, r.theta1, r.theta2, f"{r.max_ratio:.10g}", r.argmax_I, r.argmax_J])
    return buf.getvalue()


# ---------------------------------------------------------------- separable bump operator

CELL = "cell"
MIDPOINT = "midpoint"


def bump_factor(t: float, n: int, quadrature: str = CELL) -> np.ndarray:
    """One-dimensional factor k[x, y] of the bump operator on the box.

    ``cell`` integrates (1/t) phi((x_c - s)/t) over the source cell exactly (via the
    cumulative integral of phi), which stays meaningful for t below the cell size;
    ``midpoint`` samples at the source centre and multiplies by the cell length.
    """
    from .kernel import phi, phi_cdf
    N = 1 << n
    h = 1.0 / N
    xc = (np.arange(N) + 0.5) * h
    if quadrature == CELL:
        lo = np.arange(N) * h
        return phi_cdf((xc[:, None] - lo[None, :]) / t) - phi_cdf((xc[:, None] - lo[None, :] - h) / t)
    if quadrature == MIDPOINT:
        return phi((xc[:, None] - xc[None, :]) / t) / t * h
    raise ValueError(f"unknown quadrature {quadrature!r}")


class BumpOperator:
    """Box-mode convolution with a bump kernel, applied as pre * K1 f K2^T."""

    def __init__(self, spec: KernelSpec, n: int, quadrature: str = CELL):
        if spec.kind != BUMP:
            raise ValueError("BumpOperator needs a bump kernel")
        self.spec = spec
        self.n = n
        self.N = 1 << n
        self.quadrature = quadrature
        self.prefactor = spec.bump_prefactor
        self.K1 = bump_factor(spec.t1, n, quadrature)
        self.K2 = bump_factor(spec.t2, n, quadrature)
        self.geometry = GridGeometry(n, BOX)

    @property
    def cell_area(self) -> float:
        return 4.0 ** (-self.n)

    def apply(self, f) -> np.ndarray:
        v = as_array(f)
        return self.prefactor * (self.K1 @ v @ self.K2.T)

    def apply_adjoint(self, g) -> np.ndarray:
        v = as_array(g)
        return self.prefactor * (self.K1.T @ v @ self.K2)

    def apply_block(self, f_block: np.ndarray, src: tuple[slice, slice],
                    dst: tuple[slice, slice]) -> np.ndarray:
        """T applied to a signal supported on ``src`` cells, evaluated on ``dst`` cells."""
        return self.prefactor * (self.K1[dst[0], src[0]] @ f_block @ self.K2[dst[1], src[1]].T)

    def pair(self, f, g) -> float:
        return float(np.sum(as_array(g) * self.apply(f))) * self.cell_area
