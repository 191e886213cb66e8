import numpy as np
import pytest

from czxlab.lattice import DyadicInterval, DyadicRect, ShiftBits, TORUS, BOX
from czxlab.signals import (HaarIndex, SIGNATURES, Signal2D, average, balanced_haar,
                            block_difference, block_projection, check_domain, cond_exp,
                            expectation_and_difference, haar_coeffs, haar_function, haar_synth,
                            martingale_diff, random_signal, reconstruct, scale_roll, squares)


def _sig(n, rng):
    return (ShiftBits.random(n, rng), ShiftBits.random(n, rng))


def test_signal_is_read_only_and_arithmetic(rng):
    s = Signal2D(rng.standard_normal((8, 8)))
    with pytest.raises(ValueError):
        s.values[0, 0] = 1.0
    t = s * 2 - s
    assert t.allclose(s)
    assert np.isclose(s.inner(s), s.norm() ** 2)


def test_haar_orthonormal(rng):
    n = 3
    sig = _sig(n, rng)
    fs = [haar_function(HaarIndex(Q, e)) for j in range(n) for Q in squares(sig, j)
          for e in SIGNATURES[1:]]
    fs.append(Signal2D.constant(n, 1.0))
    G = np.array([[a.inner(b) for b in fs] for a in fs])
    assert G.shape == (64, 64)
    assert np.allclose(G, np.eye(64), atol=1e-12)


def test_haar_coeffs_match_object_level(rng):
    n, j = 4, 2
    sig = _sig(n, rng)
    f = Signal2D(rng.standard_normal((16, 16)))
    roll = scale_roll(sig, j)
    c = haar_coeffs(f, j, roll)
    for Q in squares(sig, j):
        for e, eta in enumerate(SIGNATURES):
            ref = f.inner(haar_function(HaarIndex(Q, eta)))
            assert np.isclose(c[e, Q.first.m, Q.second.m], ref)


def test_reconstruct_and_synth(rng):
    n = 5
    sig = _sig(n, rng)
    f = rng.standard_normal((32, 32))
    assert np.allclose(reconstruct(f, sig), f)
    c = rng.standard_normal((4, 8, 8))
    assert np.allclose(haar_coeffs(haar_synth(c, 3, n), 3), c)


def test_cond_exp_against_averages(rng):
    n = 4
    sig = _sig(n, rng)
    f = Signal2D(rng.standard_normal((16, 16)))
    E = cond_exp(f, 2, sig)
    for Q in squares(sig, 2):
        assert np.allclose(E[Q.mask()], average(f, Q))


def test_expectation_and_difference(rng):
    z = ShiftBits.zeros(4)
    Q = DyadicRect(DyadicInterval(2, 1, z), DyadicInterval(2, 3, z))
    f = Signal2D(rng.standard_normal((16, 16)))
    E, D = expectation_and_difference(f, Q)
    assert np.allclose((E + D).values[Q.mask()].mean(), average(f, Q))
    assert np.isclose(D.values.sum(), 0.0)
    mask = Q.mask()
    assert np.allclose(D.values, (martingale_diff(f, 2) * mask))


def test_telescoping(rng):
    n = 4
    sig = _sig(n, rng)
    f = rng.standard_normal((16, 16))
    total = cond_exp(f, 0, sig) + sum(martingale_diff(f, j, sig) for j in range(n))
    assert np.allclose(total, f)


def test_block_projection_and_difference(rng):
    z = ShiftBits.zeros(5)
    K = DyadicRect(DyadicInterval(1, 1, z), DyadicInterval(1, 0, z))
    f = rng.standard_normal((32, 32))
    # sum of D_L over L in K with scales 1..2
    P = block_projection(f, K, 1)
    ref = (cond_exp(f, 3) - cond_exp(f, 1)) * K.mask()
    assert np.allclose(P.values, ref)
    Dk = block_difference(f, K, (1, 1))
    assert np.allclose(Dk.values, martingale_diff(f, 2) * K.mask())


def test_balanced_haar_properties():
    z = ShiftBits.zeros(3)
    I = DyadicRect(DyadicInterval(1, 0, z), DyadicInterval(1, 0, z))
    J = DyadicRect(DyadicInterval(1, 1, z), DyadicInterval(1, 0, z))
    H = balanced_haar(I, J)
    assert np.isclose(H.values.sum(), 0.0)
    assert np.all(H.values[~(I.mask() | J.mask())] == 0)


def test_box_rejects_shifts(rng):
    with pytest.raises(ValueError):
        check_domain(BOX, _sig(3, rng) if True else None)
    check_domain(BOX, (ShiftBits.zeros(3), ShiftBits.zeros(3)))


def test_random_signal_is_upsampled(rng):
    s = random_signal(5, rng, base=2, mean_zero=True)
    assert abs(s.values.mean()) < 1e-12
    assert np.allclose(s.values, cond_exp(s, 2))
