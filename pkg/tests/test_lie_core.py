import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holonomy_lab.errors import BranchError, DegeneracyError, DomainError
from holonomy_lab.lie_core import (GROUP_IDS, Ad, AlgebraVector, GroupElement, commutator, exp_group,
                                   generic_torus_vector, get_group, inner, killing_inner, log_group,
                                   root_decomposition)

groups = pytest.mark.parametrize("gid", GROUP_IDS)
seeds = st.integers(0, 2 ** 32 - 1)


def mp_expm(x):
    m = mpmath.matrix(x.tolist())
    mpmath.mp.dps = 30
    e = mpmath.expm(m)
    return np.array([[complex(e[i, j]) for j in range(e.cols)] for i in range(e.rows)])


@groups
def test_basis_is_orthonormal_and_in_algebra(gid):
    g = get_group(gid)
    gram = g.inner(g.basis[:, None], g.basis[None, :])
    assert np.allclose(gram, np.eye(g.dim), atol=1e-14)
    assert g.is_algebra(g.basis)
    assert g.dim == {"su2": 3, "su3": 8, "so3": 3}[gid]


@groups
def test_inner_is_negative_killing_form(gid, rng):
    # brute-force tr(ad x ad y) from the structure constants
    g = get_group(gid)
    x, y = g.random_algebra(rng), g.random_algebra(rng)
    ad = lambda a: np.array([g.coords(commutator(a, b)) for b in g.basis]).T  # noqa: E731
    brute = np.trace(ad(x) @ ad(y))
    assert g.inner(x, y) == pytest.approx(-brute, rel=1e-12, abs=1e-12)


@groups
def test_exp_matches_high_precision_oracle(gid, rng):
    g = get_group(gid)
    for scale in (1e-3, 0.7, 2.5):
        x = g.random_algebra(rng, scale)
        assert np.max(np.abs(g.exp(x) - mp_expm(x))) < 5e-15


@groups
def test_exp_is_in_group_and_log_round_trips(gid, rng):
    g = get_group(gid)
    x = g.random_algebra(rng, 0.8, size=64)
    e = g.exp(x)
    assert g.is_group(e)
    assert np.max(np.abs(g.log(e) - x)) < 1e-13


def test_su2_exp_of_half_turn_is_minus_identity():
    g = get_group("su2")
    h = np.diag([1j, -1j]) * np.pi
    assert np.allclose(g.exp(h), -np.eye(2), atol=1e-15)
    with pytest.raises(BranchError):
        g.log(-np.eye(2))


def test_so3_log_rejects_half_turn():
    g = get_group("so3")
    with pytest.raises(BranchError):
        g.log(np.diag([1.0, -1.0, -1.0]))


def test_su3_log_rejects_eigenvalue_minus_one():
    g = get_group("su3")
    with pytest.raises(BranchError):
        g.log(np.diag([-1.0, -1.0, 1.0]).astype(complex))


@groups
@given(seed=seeds)
def test_ad_preserves_inner_product(gid, seed):
    g = get_group(gid)
    r = np.random.default_rng(seed)
    x, y = g.random_algebra(r), g.random_algebra(r)
    h = g.random_group(r)
    assert g.inner(g.Ad(h, x), g.Ad(h, y)) == pytest.approx(g.inner(x, y), abs=1e-12)


@groups
@given(seed=seeds)
def test_exp_of_ad_is_conjugate(gid, seed):
    g = get_group(gid)
    r = np.random.default_rng(seed)
    x = g.random_algebra(r)
    h = g.random_group(r)
    assert np.allclose(g.exp(g.Ad(h, x)), h @ g.exp(x) @ g.inv(h), atol=1e-12)


@groups
@given(seed=seeds, s=st.floats(-2, 2), t=st.floats(-2, 2))
def test_one_parameter_subgroup(gid, seed, s, t):
    g = get_group(gid)
    x = g.random_algebra(np.random.default_rng(seed))
    assert np.allclose(g.exp(s * x) @ g.exp(t * x), g.exp((s + t) * x), atol=1e-12)


def test_value_types_validate_and_compose(rng):
    g = get_group("su2")
    x = AlgebraVector(g.random_algebra(rng), "su2")
    with pytest.raises(DomainError):
        AlgebraVector(np.eye(2), "su2")
    with pytest.raises(DomainError):
        GroupElement(2 * np.eye(2), "su2")
    e = exp_group(x)
    assert np.allclose(log_group(e).matrix, x.matrix, atol=1e-14)
    assert np.allclose((e @ e.inverse()).matrix, np.eye(2), atol=1e-15)
    assert inner(x, x) == pytest.approx(killing_inner(x, x), rel=1e-12)
    assert np.allclose(Ad(e, x).matrix, x.matrix, atol=1e-14)  # x commutes with exp(x)
    assert np.allclose((x + x - x * 2.0).matrix, 0.0)
    with pytest.raises(DomainError):
        inner(x, AlgebraVector(get_group("so3").basis[0], "so3"))
    with pytest.raises(ValueError):
        x.matrix[0, 0] = 1.0


def test_unknown_group():
    with pytest.raises(DomainError):
        get_group("sp2")


# -- root decomposition -------------------------------------------------------


def test_su2_half_diagonal_has_unit_root():
    d = root_decomposition(np.diag([0.5j, -0.5j]), "su2")
    assert len(d.roots) == 1
    assert d.roots[0].alpha_value == pytest.approx(1.0, abs=1e-14)


def test_su3_root_values_are_phase_differences():
    g = get_group("su3")
    a = np.array([0.9, -0.2, -0.7])
    d = root_decomposition(g.torus_vector(a), "su3")
    expected = sorted((abs(a[i] - a[j]) for i in range(3) for j in range(i + 1, 3)), reverse=True)
    assert [r.alpha_value for r in d.roots] == pytest.approx(expected, abs=1e-12)


def test_so3_root_value_is_rotation_rate():
    g = get_group("so3")
    d = root_decomposition(g.torus_vector([0.8]), "so3")
    assert [r.alpha_value for r in d.roots] == pytest.approx([0.8])


@groups
def test_root_pairs_satisfy_bracket_relations(gid, rng):
    g = get_group(gid)
    v = generic_torus_vector(gid, rng)
    d = root_decomposition(v, gid)
    for r in d.roots:
        assert np.allclose(commutator(v, r.e), r.alpha_value * r.e_k, atol=1e-12)
        assert np.allclose(commutator(v, r.e_k), -r.alpha_value * r.e, atol=1e-12)
    B = g.coords(d.ordered_basis())
    assert np.allclose(B @ B.T, np.eye(g.dim), atol=1e-12)


def test_degenerate_and_off_torus_vectors_are_rejected():
    g = get_group("su3")
    with pytest.raises(DegeneracyError):
        root_decomposition(g.torus_vector([1.0, 1.0, -2.0]), "su3")  # a root vanishes
    with pytest.raises(DomainError):
        root_decomposition(g.basis[0], "su3")
    with pytest.raises(DegeneracyError):
        root_decomposition(np.zeros((2, 2), complex), "su2")


@given(t=st.floats(0.1, 5.0))
def test_root_values_scale_linearly(t):
    g = get_group("su3")
    v = g.torus_vector([0.9, -0.2, -0.7])
    a = [r.alpha_value for r in root_decomposition(v, "su3").roots]
    b = [r.alpha_value for r in root_decomposition(t * v, "su3").roots]
    assert np.allclose(b, t * np.array(a), rtol=1e-10)
