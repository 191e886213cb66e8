import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from czxlab.form import BumpOperator
from czxlab.kernel import bump
from czxlab.sparse import (SparseFamily, SparsenessError, _select, box_mask, commutator_domination_ratio,
                           commutator_sparse, domination_ratio, expand, ownership_map,
                           sparse_dominate, sparse_form_eval, verify_sparseness,
                           weighted_sparse_eval)


def test_expand_clips_to_box():
    assert expand((4, 8, 4, 8), 16) == (0, 12, 0, 12)
    assert expand((0, 4, 12, 16), 16) == (0, 8, 8, 16)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1.0, 1.5, 2.0]))
@settings(max_examples=20, deadline=None)
def test_sparse_form_eval_against_loop(seed, p):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((8, 8))
    cubes = [(0, 8, 0, 8), (2, 4, 1, 5), (7, 8, 7, 8)]
    ref = np.zeros((8, 8))
    for r0, r1, c0, c1 in cubes:
        ref[r0:r1, c0:c1] += np.mean(np.abs(f[r0:r1, c0:c1]) ** p) ** (1 / p)
    assert np.allclose(sparse_form_eval(cubes, f, p), ref)
    vals = [1.0, f, 2.0]
    ref2 = np.zeros((8, 8))
    ref2[:, :] += 1.0
    ref2[2:4, 1:5] += f[2:4, 1:5]
    ref2[7, 7] += 2.0
    assert np.allclose(weighted_sparse_eval(cubes, vals, 8), ref2)


def test_ownership_and_verification():
    N = 4
    fam = SparseFamily(2, [(0, 4, 0, 4), (0, 2, 0, 2)],
                       [np.array([15, 14]), np.array([0])], 2.0)
    assert verify_sparseness(fam) == pytest.approx(1 / 8)
    own = fam.ownership()
    assert own[3, 3] == 0 and own[0, 0] == 1 and own[1, 1] == -1
    with pytest.raises(SparsenessError):
        ownership_map(N, [np.array([1]), np.array([1])])
    bad = SparseFamily(2, [(0, 2, 0, 2)], [np.array([15])], 2.0)
    with pytest.raises(SparsenessError):
        verify_sparseness(bad)


def test_select_maximal_squares():
    omega = np.zeros((8, 8), dtype=bool)
    omega[0:2, 0:2] = True          # 4 of 16 in the top-left 4x4 block
    omega[6, 6] = True              # 1 of 4 in a 2x2 block, 1 of 16 at 4x4
    got = sorted(_select(omega, 8))
    assert got == [(0, 0, 4), (6, 6, 2)]


@pytest.fixture(scope="module")
def operator():
    return BumpOperator(bump(0.1, 0.2), 5)


@pytest.mark.parametrize("p", [1.1, 2.0])
def test_sparse_domination_holds(operator, p):
    rng = np.random.default_rng(4)
    f = rng.standard_normal((32, 32))
    fam = sparse_dominate(operator, f, p, seed=4)
    assert fam.cubes[0] == (0, 32, 0, 32)
    assert verify_sparseness(fam) >= 0.5
    assert verify_sparseness(fam, expanded=True) >= 1 / 18
    assert max(fam.halving) <= 0.5
    assert domination_ratio(operator, f, fam) <= 1.0
    d = json.loads(fam.to_json())
    assert d["n"] == 5 and len(d["cubes"]) == len(fam.cubes)


def test_sparse_rejects_support_outside_root(operator):
    f = np.ones((32, 32))
    with pytest.raises(ValueError):
        sparse_dominate(operator, f, 2.0, root=(0, 16, 0, 16))
    with pytest.raises(ValueError):
        sparse_dominate(operator, f, 2.0, root=(0, 16, 0, 12))


def test_commutator_domination_holds(operator):
    rng = np.random.default_rng(5)
    f = rng.standard_normal((32, 32))
    b = rng.standard_normal((32, 32))
    cs = commutator_sparse(operator, b, f, 2.0)
    assert verify_sparseness(cs.family) >= 0.5
    assert commutator_domination_ratio(operator, b, f, cs) <= 1.0
    assert len(cs.family.extras["betas"]) == len(cs.family.cubes)
    # the symbol mean over the root's clipped 3Q is the global mean
    assert np.isclose(cs.family.extras["betas"][0], b.mean())
