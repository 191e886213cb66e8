import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from czxlab.form import BumpOperator, assemble_form
from czxlab.kernel import bump, pure
from czxlab.lattice import BOX, TORUS, GridGeometry, ShiftBits
from czxlab.rep import (BALANCED, SYMMETRIC, ADJOINT, Paraproduct, ShiftOperator,
                        apply_paraproduct, apply_paraproduct_adjoint, apply_shift,
                        apply_shift_adjoint, band_index, commutator_apply, decompose,
                        haar_pair_table, paraproduct_triple, random_shift, shift_norm)
from czxlab.signals import SIGNATURES, HaarIndex, haar_function, squares


def _sig(n, rng):
    return (ShiftBits.random(n, rng), ShiftBits.random(n, rng))


def as_np(v):
    return getattr(v, "values", v)


def _mean_zero(rng, N):
    v = rng.standard_normal((N, N))
    return v - v.mean()


def test_band_index():
    assert list(band_index(np.array([0, 1, -1, 2, 3, 4, 5, 8, 9]))) == [0, 2, 2, 3, 4, 4, 5, 5, 6]


@pytest.mark.parametrize("domain", [TORUS, BOX])
@pytest.mark.parametrize("spec", [pure(1.0, 0.5), bump(0.25, 0.125)])
def test_decomposition_identity(domain, spec, rng):
    n = 4
    B = assemble_form(spec, GridGeometry(n, domain))
    sigma = _sig(n, rng) if domain == TORUS else None
    f, g = _mean_zero(rng, 16), _mean_zero(rng, 16)
    R = decompose(B, f, g, sigma)
    assert R.within(1e-10, 1e-12)
    assert np.isclose(R.sigma1, R.sigma1_shift + R.sigma1_para)
    assert np.isclose(R.sigma2, R.sigma2_shift + R.sigma2_para)
    # the ledger accounts for the whole shift part of the first sum
    assert np.isclose(sum(r.band_sum for r in R.ledger), R.sigma1_shift)
    assert R.ledger_csv().splitlines()[0].startswith("k1,k2,m1,m2")


def test_decompose_rejects_nonzero_mean(rng):
    B = assemble_form(pure(), GridGeometry(3))
    with pytest.raises(ValueError):
        decompose(B, np.ones((8, 8)), _mean_zero(rng, 8))


def test_haar_pair_table_against_direct_pairing(rng):
    n, j = 3, 1
    B = assemble_form(pure(1.0, 0.5), GridGeometry(n))
    sigma = _sig(n, rng)
    G = haar_pair_table(B, j, sigma)
    sq = {(Q.first.m, Q.second.m): Q for Q in squares(sigma, j)}
    for (a, b), I in sq.items():
        for (c, d), J in sq.items():
            for gm, gamma in enumerate(SIGNATURES):
                ref = B.pair(haar_function(HaarIndex(I, SIGNATURES[0])),
                             haar_function(HaarIndex(J, gamma)))
                assert np.isclose(G[gm, a * 2 + b, c * 2 + d], ref, atol=1e-12)


@pytest.mark.parametrize("flavor", [BALANCED, SYMMETRIC])
def test_shift_adjoint_identity(flavor, rng):
    n = 5
    Q = random_shift((2, 1), n, rng, _sig(n, rng), flavor)
    x, y = rng.standard_normal((32, 32)), rng.standard_normal((32, 32))
    assert np.isclose(np.sum(as_np(apply_shift(Q, x)) * y), np.sum(x * as_np(apply_shift_adjoint(Q, y))))


def test_shift_dense_norm_matches_power_iteration(rng):
    n = 4
    Q = random_shift((1, 1), n, rng, _sig(n, rng), SYMMETRIC)
    M = np.stack([as_np(apply_shift(Q, e.reshape(16, 16))).reshape(-1) for e in np.eye(256)], 1)
    assert np.isclose(shift_norm(Q, iters=3000, rtol=1e-12), np.linalg.norm(M, 2), rtol=1e-6)


def test_shift_coefficient_bound_enforced(rng):
    Q = random_shift((1, 0), 4, rng)
    bad = {j: 10 * c for j, c in Q.coeffs.items()}
    with pytest.raises(ValueError):
        ShiftOperator(Q.k, Q.n, Q.sigma, bad, Q.flavor)


def test_balanced_zero_complexity_vanishes(rng):
    Q = random_shift((0, 0), 4, rng, flavor=BALANCED)
    assert np.abs(as_np(apply_shift(Q, rng.standard_normal((16, 16))))).max() == 0.0


def test_balanced_shift_kills_constants(rng):
    Q = random_shift((2, 2), 5, rng, _sig(5, rng), BALANCED)
    assert np.abs(as_np(apply_shift(Q, np.ones((32, 32))))).max() < 1e-12


def test_paraproduct_of_one_is_symbol_minus_mean(rng):
    b = rng.standard_normal((16, 16))
    P = Paraproduct(b)
    assert np.allclose(as_np(apply_paraproduct(P, np.ones((16, 16)))), b - b.mean())


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=10, deadline=None)
def test_paraproduct_adjoint_and_triple(seed):
    rng = np.random.default_rng(seed)
    b, x, y = (rng.standard_normal((8, 8)) for _ in range(3))
    sigma = _sig(3, rng)
    for flavor in ("standard", ADJOINT):
        P = Paraproduct(b, sigma, flavor)
        lhs = np.sum(as_np(apply_paraproduct(P, x)) * y)
        assert np.isclose(lhs, np.sum(x * as_np(apply_paraproduct_adjoint(P, y))))
    a1, a2, a3 = paraproduct_triple(b, x, sigma)
    assert np.allclose(a1 + a2 + a3 + b.mean() * x.mean(), b * x)


def test_commutator_of_constant_symbol_vanishes(rng):
    T = BumpOperator(bump(0.25, 0.125), 4)
    f = rng.standard_normal((16, 16))
    assert np.abs(as_np(commutator_apply(np.full((16, 16), 3.0), T, f))).max() < 1e-12
