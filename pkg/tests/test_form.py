import numpy as np
import pytest

from czxlab.form import (BumpOperator, FormMatrix, ResourceError, assemble_form, bump_factor,
                         diagonal_decay_slope, form_from_callable, haar_coefficient,
                         separation_bound, offset_coefficients, t1_functions, wbp_check, wbp_sweep)
from czxlab.kernel import bump, kernel_of_difference_safe, phi, pure
from czxlab.lattice import BOX, TORUS, DyadicInterval, DyadicRect, GridGeometry, ShiftBits
from czxlab.signals import SIGNATURES, HaarIndex, haar_function


def _brute_matrix(spec, g):
    # direct K(x, y) with nearest-image offsets on the torus
    c = g.centers()
    X = np.stack(np.meshgrid(c, c, indexing="ij"), -1).reshape(-1, 2)
    d = X[:, None, :] - X[None, :, :]
    if g.domain == TORUS:
        d = (d + 0.5) % 1.0 - 0.5
        # the exact half-period offset stays positive
        d = np.where(np.isclose(np.abs(d), 0.5), 0.5, d)
    return kernel_of_difference_safe(spec, d[..., 0], d[..., 1])


@pytest.mark.parametrize("domain", [TORUS, BOX])
def test_apply_matches_dense_oracle(domain, rng):
    g = GridGeometry(3, domain)
    spec = pure(1.0, 0.5)
    B = assemble_form(spec, g)
    M = _brute_matrix(spec, g)
    f = rng.standard_normal((8, 8))
    ref = (M @ f.reshape(-1)).reshape(8, 8) / 64
    assert np.allclose(B.apply(f).values, ref)
    assert np.allclose(B.dense(), M)
    h = rng.standard_normal((8, 8))
    assert np.isclose(B.pair(f, h), np.sum(B.apply_adjoint(h).values * f) / 64)


def test_callable_form_matches_convolution(rng):
    g = GridGeometry(3, BOX)
    spec = bump(0.3, 0.2)
    B = assemble_form(spec, g)
    from czxlab.kernel import kernel_eval
    C = form_from_callable(lambda x, y: kernel_eval(spec, x, y), g)
    f = rng.standard_normal((8, 8))
    assert np.allclose(B.apply(f).values, C.apply(f).values)


def test_pure_requires_zero_diagonal():
    with pytest.raises(ValueError):
        assemble_form(pure(), GridGeometry(3), diagonal_convention="kernel")


def test_dense_limit():
    B = assemble_form(pure(), GridGeometry(8))
    with pytest.raises(ResourceError):
        B.dense()


def test_pure_form_t1_constant_and_wbp():
    # even kernel on the torus: T1 is constant
    B = assemble_form(pure(), GridGeometry(4))
    d = t1_functions(B)
    assert np.allclose(d.t_one.values, d.t_one.values[0, 0])
    assert d.bmo1 < 1e-12 and d.bmo2 < 1e-12
    z = ShiftBits.zeros(4)
    I = DyadicRect(DyadicInterval(1, 0, z), DyadicInterval(1, 1, z))
    mask = I.mask().astype(float)
    assert np.isclose(wbp_check(B, I), abs(B.pair(mask, mask)) / I.area)
    assert wbp_sweep(B) >= wbp_check(B, I) - 1e-12


def test_offset_coefficients_match_haar_pairs(rng):
    n, j = 4, 2
    for domain in (TORUS, BOX):
        B = assemble_form(pure(1.0, 0.5), GridGeometry(n, domain))
        m, C = offset_coefficients(B, j)
        z = ShiftBits.zeros(n)
        I = DyadicRect(DyadicInterval(j, 1, z), DyadicInterval(j, 0, z))
        for (k1, k2) in [(1, 0), (2, 3), (0, 2)]:
            J = DyadicRect(DyadicInterval(j, k1, z), DyadicInterval(j, k2, z))
            o1, o2 = k1 - 1, k2 - 0
            i1 = int(np.nonzero(m == (o1 % 4 if domain == TORUS else o1))[0][0])
            i2 = int(np.nonzero(m == (o2 % 4 if domain == TORUS else o2))[0][0])
            for b, beta in enumerate(SIGNATURES):
                for gm, gamma in enumerate(SIGNATURES):
                    ref = haar_coefficient(B, HaarIndex(I, beta), HaarIndex(J, gamma))
                    assert np.isclose(C[gm, b, i1, i2], ref, atol=1e-12)


def test_separation_bound_shape():
    assert separation_bound(0, 0, 1.0, 1.0) == 1.0
    # more separation, smaller bound
    assert separation_bound(5, 5, 1.0, 1.0) < separation_bound(5, 1, 1.0, 1.0) < separation_bound(1, 1, 1.0, 1.0)
    assert np.isclose(separation_bound(3, 3, 1.0, 1.0), 1 / 3 ** 2 / 3)


def test_diagonal_decay_slope_positive():
    B = assemble_form(pure(), GridGeometry(6, BOX))
    assert diagonal_decay_slope(B, 3) > 1.0


def test_bump_factor_quadratures_agree_for_wide_bumps():
    a = bump_factor(0.3, 6, "cell")
    b = bump_factor(0.3, 6, "midpoint")
    assert np.allclose(a, b, atol=2e-3)
    with pytest.raises(ValueError):
        bump_factor(0.3, 4, "simpson")


def test_bump_operator_matches_assembled_box_form(rng):
    spec = bump(0.25, 0.4)
    T = BumpOperator(spec, 4, quadrature="midpoint")
    B = assemble_form(spec, GridGeometry(4, BOX))
    f = rng.standard_normal((16, 16))
    assert np.allclose(T.apply(f), B.apply(f).values)
    g = rng.standard_normal((16, 16))
    assert np.isclose(T.pair(f, g), np.sum(T.apply_adjoint(g) * f) / 256)
    blk = T.apply_block(f[2:6, 3:9], (slice(2, 6), slice(3, 9)), (slice(0, 16), slice(0, 16)))
    mask = np.zeros_like(f)
    mask[2:6, 3:9] = f[2:6, 3:9]
    assert np.allclose(blk, T.apply(mask))
