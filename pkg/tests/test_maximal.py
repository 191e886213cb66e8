import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from czxlab.form import BumpOperator
from czxlab.kernel import bump
from czxlab.lattice import ShiftBits
from czxlab.maximal import (hl_maximal, iterated_maximal, lattice_maximal, maximal_1d,
                            maximal_report, sharp_maximal, sharp_maximal_region, square_maximal,
                            strong_maximal)

seeds = st.integers(0, 2 ** 32 - 1)


def _strong_brute(f):
    A = np.abs(f)
    N1, N2 = A.shape
    out = np.zeros_like(A)
    for a1 in range(N1):
        for b1 in range(a1, N1):
            for a2 in range(N2):
                for b2 in range(a2, N2):
                    m = A[a1:b1 + 1, a2:b2 + 1].mean()
                    out[a1:b1 + 1, a2:b2 + 1] = np.maximum(out[a1:b1 + 1, a2:b2 + 1], m)
    return out


def _hl_brute(f, sides):
    A = np.abs(f)
    N1, N2 = A.shape
    out = np.zeros_like(A)
    for s in sides:
        for a in range(-s + 1, N1):
            for b in range(-s + 1, N2):
                r0, r1, c0, c1 = max(a, 0), min(a + s, N1), max(b, 0), min(b + s, N2)
                m = A[r0:r1, c0:c1].sum() / s ** 2
                out[r0:r1, c0:c1] = np.maximum(out[r0:r1, c0:c1], m)
    return out


def _sharp_brute(T, f):
    N = f.shape[0]
    out = np.zeros_like(f)
    B = 1
    while B <= N:
        for p1 in range(N - B + 1):
            for p2 in range(N - B + 1):
                g = f.copy()
                g[max(0, p1 - B):p1 + 2 * B, max(0, p2 - B):p2 + 2 * B] = 0
                v = T.apply(g)[p1:p1 + B, p2:p2 + B]
                out[p1:p1 + B, p2:p2 + B] = np.maximum(out[p1:p1 + B, p2:p2 + B], v.max() - v.min())
        B *= 2
    return out


@given(seeds)
@settings(max_examples=10, deadline=None)
def test_strong_maximal_exact(seed):
    f = np.random.default_rng(seed).standard_normal((8, 8))
    ref = _strong_brute(f)
    assert np.allclose(strong_maximal(f), ref)
    assert np.all(iterated_maximal(f) >= ref - 1e-12)


def test_strong_falls_back_to_iterated(rng):
    f = rng.standard_normal((8, 8))
    assert np.allclose(strong_maximal(f, exact_limit_n=2), iterated_maximal(f))


def test_maximal_1d_by_hand():
    v = np.array([0.0, 3.0, 0.0, 1.0])
    assert np.allclose(maximal_1d(v, 0), [1.5, 3.0, 1.5, 4 / 3])


@given(seeds, st.sampled_from([(4, 4), (4, 6), (8, 5)]))
@settings(max_examples=10, deadline=None)
def test_hl_maximal_against_brute(seed, shape):
    f = np.random.default_rng(seed).standard_normal(shape)
    sides = [1, 2, 3, 4]
    assert np.allclose(hl_maximal(f, sides), _hl_brute(f, sides))


def test_lattice_maximal_bounds(rng):
    f = rng.standard_normal((16, 16))
    sig = (ShiftBits.random(4, rng), ShiftBits.random(4, rng))
    M1 = square_maximal(f, sig)
    assert np.all(M1 >= np.abs(f) - 1e-12)
    # eccentric rectangles cannot shrink to one cell: compare with the finest one
    for lam, shape in ((0.25, (1, 4)), (4.0, (4, 1))):
        L = lattice_maximal(f, lam)
        A = np.abs(f).reshape(16 // shape[0], shape[0], 16 // shape[1], shape[1]).mean(axis=(1, 3))
        assert np.all(L >= np.kron(A, np.ones(shape)) - 1e-12)
        assert np.all(L <= np.abs(f).max() + 1e-12)
    with pytest.raises(ValueError):
        lattice_maximal(f, 3.0)


def test_lattice_maximal_dominated_by_strong(rng):
    f = rng.standard_normal((16, 16))
    S = strong_maximal(f)
    for lam in (0.25, 1.0, 8.0):
        assert np.all(lattice_maximal(f, lam) <= S + 1e-12)


@given(seeds)
@settings(max_examples=5, deadline=None)
def test_sharp_maximal_against_brute(seed):
    f = np.random.default_rng(seed).standard_normal((8, 8))
    T = BumpOperator(bump(0.25, 0.125), 3)
    ref = _sharp_brute(T, f)
    assert np.allclose(sharp_maximal(T, f), ref)
    assert np.allclose(sharp_maximal_region(T, f, target=(2, 6, 1, 5)), ref[2:6, 1:5])


def test_sharp_maximal_batch(rng):
    T = BumpOperator(bump(0.25, 0.125), 3)
    F = rng.standard_normal((3, 8, 8))
    out = sharp_maximal_region(T, F)
    for k in range(3):
        assert np.allclose(out[k], sharp_maximal(T, F[k]))


def test_maximal_report():
    r = maximal_report(np.array([[1.0, 4.0]]), np.array([[1.0, 2.0]]), "x", 3.0)
    assert r.max_ratio == 2.0 and r.argmax == [0, 1]
    assert json.loads(r.to_json())["tag"] == "x"
    r = maximal_report(np.array([[1.0]]), np.array([[0.0]]), "zero")
    assert r.max_ratio == np.inf
