import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from czxlab.kernel import (KernelSpec, SingularityError, bump, decay_factor, kernel_eval,
                           kernel_of_difference, phi, phi_cdf, phi_integral, pure, size_bound,
                           slice_closed_form, slice_integral, verify_kernel_estimates)

pos = st.floats(1e-3, 1e3)


def test_phi_values():
    assert phi(0.0) == 1.0
    assert phi(2.0) == 0.0 and phi(-2.5) == 0.0
    assert np.isclose(phi(1.0), math.exp(1 - 1 / 0.75))
    assert np.isclose(phi_cdf(2.0), phi_integral())
    assert np.isclose(phi_cdf(0.0), phi_integral() / 2, rtol=1e-6)


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(theta2=1.5)
    with pytest.raises(ValueError):
        pure(1.0, 0.5, log_flag=True)
    with pytest.raises(ValueError):
        bump(0.0, 1.0)
    assert pure(0.5, 1.0).theta == 0.25


@given(pos, pos, st.floats(0.05, 1.0))
@settings(max_examples=60, deadline=None)
def test_decay_is_symmetric_and_bounded(a, b, th):
    x, y = (a, b), (0.0, 0.0)
    d = decay_factor(x, y, th)
    assert np.isclose(d, decay_factor((b, a), y, th))
    assert 0 < d <= 2 ** -th + 1e-15


def test_log_variant_maximum():
    r = np.logspace(-3, 3, 20001)
    s = r + 1 / r
    assert np.isclose((np.log(s) / s).max(), 1 / math.e, rtol=1e-6)


def test_pure_kernel_formula():
    spec = pure(1.0, 0.5)
    z1, z2 = 0.3, -0.1
    ref = (3.0 + 1 / 3.0) ** -0.5 / (0.3 * 0.1)
    assert np.isclose(kernel_of_difference(spec, z1, z2), ref)
    assert np.isclose(kernel_eval(spec, (0.5, 0.2), (0.2, 0.3)), ref)
    assert np.isclose(size_bound(spec, z1, z2), ref)
    with pytest.raises(SingularityError):
        kernel_of_difference(spec, 0.0, 0.2)


def test_bump_kernel_formula_and_support():
    spec = bump(0.1, 0.3)
    e = 1 / 3 + 3
    ref = e ** -1 / 0.03 * phi(0.5) * phi(1 / 3)
    assert np.isclose(kernel_of_difference(spec, 0.05, 0.1), ref)
    assert kernel_of_difference(spec, 0.21, 0.0) == 0.0
    assert spec.support == (pytest.approx(0.2), pytest.approx(0.6))


def test_bump_integral_is_prefactor():
    spec = bump(0.2, 0.05)
    from scipy import integrate
    val, _ = integrate.dblquad(lambda y, x: kernel_of_difference(spec, x, y), -0.4, 0.4, -0.1, 0.1,
                               epsabs=1e-12)
    assert np.isclose(val, spec.bump_prefactor * phi_integral() ** 2, rtol=1e-7)


def test_slice_closed_form_against_quadrature():
    for th in (1.0, 0.5):
        h = 0.01
        from scipy import integrate
        f = lambda d: (d / h + h / d) ** -th / (d * h)
        val = 2 * integrate.quad(f, 0, np.inf, limit=400)[0]
        assert np.isclose(slice_closed_form(th, h), val, rtol=1e-6)


def test_estimates_hold_for_pure_kernels():
    rep = verify_kernel_estimates(pure(1.0, 1.0), 2000, seed=0)
    assert all(r.max_ratio <= 8.0 for r in rep.values())
