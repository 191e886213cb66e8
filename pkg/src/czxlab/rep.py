"""Dyadic model operators and the exact finite representation of a form.

Haar data at scale j is handled grid-wide: ``haar_coeffs`` returns arrays of
shape (4, 2**j, 2**j) indexed by signature and square position in the
lattice, and ``haar_synth`` inverts it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import BOX, TORUS, ShiftBits
from .signals import (SIGNATURES, Signal2D, as_array, check_domain, cond_exp, haar_coeffs,
                      haar_synth, martingale_diff, scale_roll)

BALANCED = "balanced"
SYMMETRIC = "symmetric"
STANDARD = "standard"
ADJOINT = "adjoint"


def _grid_n(v: np.ndarray) -> int:
    return v.shape[-1].bit_length() - 1


def _wrap(template, v: np.ndarray, domain: str):
    if isinstance(template, Signal2D):
        return Signal2D(v, template.domain)
    return v


# ---------------------------------------------------------------- shifts


@dataclass
class ShiftOperator:
    """Dyadic shift with complexity k = (k1, k2) on the lattice pair ``sigma``.

    ``coeffs[j]`` has shape (nK, P, P), P = 2**(k1 + k2): entry [K, p, q] is the
    coefficient of the pair (I, J) = (p-th, q-th square of scale j inside K),
    with squares inside K enumerated row-major over (2**k1, 2**k2).
    Balanced flavor: sum a <f, h_I^0 - h_J^0> h_J^eta.
    Symmetric flavor: sum a <f, h_I^eta> h_J^eta.
    """
    k: tuple[int, int]
    n: int
    sigma: tuple[ShiftBits, ShiftBits]
    coeffs: dict[int, np.ndarray]
    flavor: str = BALANCED
    eta: int = 3
    domain: str = TORUS

    def __post_init__(self) -> None:
        check_domain(self.domain, self.sigma)
        if self.flavor not in (BALANCED, SYMMETRIC):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.eta == 0:
            raise ValueError("output Haar functions must be cancellative")
        bound = 2.0 ** (-sum(self.k))
        for a in self.coeffs.values():
            if np.any(np.abs(a) > bound * (1 + 1e-12)):
                raise ValueError("shift coefficients must satisfy |a_IJK| <= |I|/|K|")

    @property
    def scales(self) -> list[int]:
        return sorted(self.coeffs)


def shift_scales(k: tuple[int, int], n: int) -> list[int]:
    """Square scales j < n whose k-th ancestors exist."""
    return list(range(max(k), n))


def _k_roll(sigma, j: int, k: tuple[int, int], n: int) -> tuple[int, int]:
    """Offset (in squares of scale j) of the ancestor lattice relative to the scale-j lattice."""
    W = 1 << (n - j)
    M = 1 << j
    out = []
    for s, kk in zip(sigma, k):
        out.append(((s.offset(j - kk) - s.offset(j)) // W) % M)
    return tuple(out)


def _to_K(c: np.ndarray, j: int, k: tuple[int, int], r: tuple[int, int]) -> np.ndarray:
    """(M, M) square array -> (nK, P) grouped by ancestor."""
    M = 1 << j
    P1, P2 = 1 << k[0], 1 << k[1]
    c = np.roll(c, (-r[0], -r[1]), axis=(0, 1))
    b = c.reshape(M // P1, P1, M // P2, P2).transpose(0, 2, 1, 3)
    return b.reshape((M // P1) * (M // P2), P1 * P2)


def _from_K(b: np.ndarray, j: int, k: tuple[int, int], r: tuple[int, int]) -> np.ndarray:
    M = 1 << j
    P1, P2 = 1 << k[0], 1 << k[1]
    c = b.reshape(M // P1, M // P2, P1, P2).transpose(0, 2, 1, 3).reshape(M, M)
    return np.roll(c, r, axis=(0, 1))


def random_shift(k: tuple[int, int], n: int, rng: np.random.Generator,
                 sigma: tuple[ShiftBits, ShiftBits] | None = None, flavor: str = BALANCED,
                 domain: str = TORUS, eta: int = 3) -> ShiftOperator:
    """Shift whose coefficients are +-|I|/|K| with independent random signs."""
    sigma = sigma or (ShiftBits.zeros(n), ShiftBits.zeros(n))
    P = 1 << (k[0] + k[1])
    mag = 2.0 ** (-(k[0] + k[1]))
    coeffs = {}
    for j in shift_scales(k, n):
        nK = (1 << (2 * j)) // P
        coeffs[j] = mag * rng.choice([-1.0, 1.0], size=(nK, P, P))
    return ShiftOperator(k, n, sigma, coeffs, flavor, eta, domain)


def apply_shift(Q: ShiftOperator, f):
    v = as_array(f)
    n = Q.n
    out = np.zeros_like(v)
    for j, a in Q.coeffs.items():
        roll = scale_roll(Q.sigma, j)
        r = _k_roll(Q.sigma, j, Q.k, n)
        c = haar_coeffs(v, j, roll)
        if Q.flavor == BALANCED:
            c0 = _to_K(c[0], j, Q.k, r)
            res = np.einsum("kpq,kp->kq", a, c0) - c0 * a.sum(axis=1)
        else:
            res = np.einsum("kpq,kp->kq", a, _to_K(c[Q.eta], j, Q.k, r))
        d = np.zeros_like(c)
        d[Q.eta] = _from_K(res, j, Q.k, r)
        out = out + haar_synth(d, j, n, roll)
    return _wrap(f, out, Q.domain)


def apply_shift_adjoint(Q: ShiftOperator, g):
    v = as_array(g)
    n = Q.n
    out = np.zeros_like(v)
    for j, a in Q.coeffs.items():
        roll = scale_roll(Q.sigma, j)
        r = _k_roll(Q.sigma, j, Q.k, n)
        c = haar_coeffs(v, j, roll)
        dg = _to_K(c[Q.eta], j, Q.k, r)
        e = np.zeros_like(c)
        if Q.flavor == BALANCED:
            res = np.einsum("kpq,kq->kp", a, dg) - dg * a.sum(axis=1)
            e[0] = _from_K(res, j, Q.k, r)
        else:
            e[Q.eta] = _from_K(np.einsum("kpq,kq->kp", a, dg), j, Q.k, r)
        out = out + haar_synth(e, j, n, roll)
    return _wrap(g, out, Q.domain)


def shift_norm(Q: ShiftOperator, seed: int = 0, iters: int = 300, rtol: float = 1e-8) -> float:
    """L2 norm (normalised measure on the unit square) by power iteration."""
    from .norms import power_norm
    N = 1 << Q.n
    return power_norm(lambda x: apply_shift(Q, x), lambda y: apply_shift_adjoint(Q, y),
                      (N, N), seed=seed, iters=iters, rtol=rtol)


# ---------------------------------------------------------------- paraproducts


@dataclass
class Paraproduct:
    """sum_I sum_eta <b, h_I^eta> <f>_I h_I^eta (standard) or its adjoint."""
    symbol: np.ndarray
    sigma: tuple[ShiftBits, ShiftBits] | None = None
    flavor: str = STANDARD

    def __post_init__(self) -> None:
        self.symbol = as_array(self.symbol)
        if self.flavor not in (STANDARD, ADJOINT):
            raise ValueError(f"unknown flavor {self.flavor!r}")


def _para_standard(b: np.ndarray, v: np.ndarray, sigma) -> np.ndarray:
    n = _grid_n(v)
    out = np.zeros_like(v)
    for j in range(n):
        roll = scale_roll(sigma, j)
        cb = haar_coeffs(b, j, roll)
        cb[0] = 0.0
        # <f>_I on the scale-j lattice, one value per square
        avg = haar_coeffs(v, j, roll)[0] * (2.0 ** j)
        out = out + haar_synth(cb * avg, j, n, roll)
    return out


def _para_adjoint(b: np.ndarray, v: np.ndarray, sigma) -> np.ndarray:
    n = _grid_n(v)
    out = np.zeros_like(v)
    for j in range(n):
        roll = scale_roll(sigma, j)
        cb = haar_coeffs(b, j, roll)
        cg = haar_coeffs(v, j, roll)
        s = (cb[1:] * cg[1:]).sum(axis=0)       # sum_eta <b,h><g,h> per square
        d = np.zeros_like(cb)
        d[0] = s * (2.0 ** j)                    # 1_I/|I| = 2^j h_I^0
        out = out + haar_synth(d, j, n, roll)
    return out


def apply_paraproduct(pi: Paraproduct, f):
    v = as_array(f)
    if pi.flavor == STANDARD:
        out = _para_standard(pi.symbol, v, pi.sigma)
    else:
        out = _para_adjoint(pi.symbol, v, pi.sigma)
    return _wrap(f, out, TORUS)


def apply_paraproduct_adjoint(pi: Paraproduct, g):
    v = as_array(g)
    if pi.flavor == STANDARD:
        out = _para_adjoint(pi.symbol, v, pi.sigma)
    else:
        out = _para_standard(pi.symbol, v, pi.sigma)
    return _wrap(g, out, TORUS)


def paraproduct_triple(b, f, sigma=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(sum D_j b D_j f, sum D_j b E_j f, sum E_j b D_j f); they add up to bf - <b><f>."""
    bv, fv = as_array(b), as_array(f)
    n = _grid_n(fv)
    a1 = np.zeros_like(fv)
    a2 = np.zeros_like(fv)
    a3 = np.zeros_like(fv)
    for j in range(n):
        db, df = martingale_diff(bv, j, sigma), martingale_diff(fv, j, sigma)
        eb, ef = cond_exp(bv, j, sigma), cond_exp(fv, j, sigma)
        a1 += db * df
        a2 += db * ef
        a3 += eb * df
    return a1, a2, a3


def commutator_apply(b, T, f):
    """[b, T] f = b T f - T(b f), cellwise."""
    bv, fv = as_array(b), as_array(f)
    out = bv * as_array(T.apply(fv)) - as_array(T.apply(bv * fv))
    return _wrap(f, out, TORUS)


# ---------------------------------------------------------------- representation


@dataclass
class LedgerRow:
    k1: int
    k2: int
    m1: int
    m2: int
    band_sum: float
    coefficient_max: float


@dataclass
class RepDecomposition:
    total: float
    sigma1: float
    sigma2: float
    sigma3: float
    sigma1_shift: float
    sigma1_para: float
    sigma2_shift: float
    sigma2_para: float
    ledger: list[LedgerRow] = field(default_factory=list)

    @property
    def residual(self) -> float:
        return abs(self.sigma1 + self.sigma2 + self.sigma3 - self.total)

    @property
    def relative_residual(self) -> float:
        return self.residual / max(abs(self.total), 1e-300)

    def within(self, rtol: float = 1e-10, atol: float = 1e-12) -> bool:
        return self.residual <= max(rtol * abs(self.total), atol)

    def ledger_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k1", "k2", "m1", "m2", "band_sum", "coefficient_max"])
        for r in self.ledger:
            w.writerow([r.k1, r.k2, r.m1, r.m2, repr(r.band_sum), repr(r.coefficient_max)])
        return buf.getvalue()


def band_index(m: np.ndarray) -> np.ndarray:
    """0 for m = 0, otherwise k with |m| in (2^(k-3), 2^(k-2)]."""
    a = np.abs(np.asarray(m))
    out = np.zeros(a.shape, dtype=np.int64)
    nz = a > 0
    out[nz] = 2 + np.ceil(np.log2(a[nz])).astype(np.int64)
    return out


def _pair_offsets(M: int, domain: str) -> np.ndarray:
    """m[p, q] = q - p per coordinate; nearest image on the torus."""
    i = np.arange(M)
    d = i[None, :] - i[:, None]
    if domain == TORUS:
        d = (d + M // 2) % M - M // 2
        if M == 2:
            d = np.abs(d)
    return d


def haar_pair_table(B, j: int, sigma=None) -> np.ndarray:
    """G[gamma, I, J] = B(h_I^0, h_J^gamma) for all squares I, J of scale j (flattened)."""
    n = B.n
    M = 1 << j
    roll = scale_roll(sigma, j)
    out = np.empty((4, M * M, M * M))
    for idx in range(M * M):
        c = np.zeros((4, M, M))
        c[0].flat[idx] = 1.0
        h = haar_synth(c, j, n, roll)
        out[:, idx, :] = haar_coeffs(as_array(B.apply(h)), j, roll).reshape(4, -1)
    return out


def _normaliser(k1, k2, theta1: float, theta2: float):
    kmax = np.maximum(k1, k2)
    kmin = np.minimum(k1, k2)
    return 2.0 ** (-theta2 * (kmax - kmin)) * 2.0 ** (-theta1 * kmin) * 2.0 ** (-(k1 + k2))


def decompose(B, f, g, sigma=None, ledger: bool = True) -> RepDecomposition:
    """Split B(f, g) for mean-zero f, g into the three diagonal-collapse sums.

    Sigma_1 = sum_j B(E_j f, D_j g), Sigma_2 = sum_j B(D_j f, E_j g),
    Sigma_3 = sum_j B(D_j f, D_j g).  Sigma_1 is further split into the
    balanced-shift part and the paraproduct part sum_j B(1, E_j f D_j g);
    likewise Sigma_2.  The ledger groups the shift part of Sigma_1 by the
    offset m = J - I and its band k.
    """
    fv, gv = as_array(f), as_array(g)
    domain = B.geometry.domain
    check_domain(domain, sigma)
    for name, v in (("f", fv), ("g", gv)):
        if abs(v.mean()) > 1e-12 * max(1.0, np.abs(v).max()):
            raise ValueError(f"{name} must have mean zero")
    n = _grid_n(fv)
    one = np.ones_like(fv)
    T1 = as_array(B.apply(one))
    Ts1 = as_array(B.apply_adjoint(one))
    a = 4.0 ** (-n)
    s1 = s2 = s3 = p1 = p2 = 0.0
    for j in range(n):
        Ef, Eg = cond_exp(fv, j, sigma), cond_exp(gv, j, sigma)
        Df, Dg = martingale_diff(fv, j, sigma), martingale_diff(gv, j, sigma)
        s1 += B.pair(Ef, Dg)
        s2 += B.pair(Df, Eg)
        s3 += B.pair(Df, Dg)
        p1 += a * float(np.sum(T1 * Ef * Dg))
        p2 += a * float(np.sum(Ts1 * Df * Eg))
    rows = _ledger(B, fv, gv, sigma, domain) if ledger else []
    return RepDecomposition(B.pair(fv, gv), s1, s2, s3, s1 - p1, p1, s2 - p2, p2, rows)


def _ledger(B, fv, gv, sigma, domain) -> list[LedgerRow]:
    n = _grid_n(fv)
    spec = getattr(B, "spec", None)
    th1 = spec.theta1 if spec is not None else 1.0
    th2 = spec.theta2 if spec is not None else 1.0
    sums: dict[tuple[int, int], float] = {}
    cmax: dict[tuple[int, int], float] = {}
    for j in range(n):
        M = 1 << j
        roll = scale_roll(sigma, j)
        G = haar_pair_table(B, j, sigma)
        cf = haar_coeffs(fv, j, roll)[0].reshape(-1)
        cg = haar_coeffs(gv, j, roll).reshape(4, -1)
        # term[I, J] = <f, H_IJ> B(h_I^0, Delta_J g)
        term = (cf[:, None] - cf[None, :]) * np.einsum("gij,gj->ij", G[1:], cg[1:])
        d = _pair_offsets(M, domain)
        m1 = np.repeat(np.repeat(d, M, axis=0), M, axis=1)      # row offset of (I, J)
        m2 = np.tile(d, (M, M))
        k1, k2 = band_index(m1), band_index(m2)
        coef = np.abs(G[1:]).max(axis=0) / _normaliser(k1, k2, th1, th2)
        keys = m1 * (4 * M) + m2
        for key in np.unique(keys):
            sel = keys == key
            mm = (int(m1[sel][0]), int(m2[sel][0]))
            sums[mm] = sums.get(mm, 0.0) + float(term[sel].sum())
            cmax[mm] = max(cmax.get(mm, 0.0), float(coef[sel].max()))
    out = []
    for mm in sorted(sums):
        kk = band_index(np.array(mm))
        out.append(LedgerRow(int(kk[0]), int(kk[1]), mm[0], mm[1], sums[mm], cmax[mm]))
    return out
