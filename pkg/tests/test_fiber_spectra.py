import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holonomy_lab.errors import DomainError
from holonomy_lab.fiber_spectra import (EXAMPLE_ZETA_BOUND, SpectrumEntry, SpectrumTable, analytic_fiber_spectrum,
                                        cluster_eigenvalues, divergence_verdict, isoparametric_probe, log_fit,
                                        numeric_shape_operator, regularized_traces, sphere_radius, trace_square,
                                        two_sequence_example)
from holonomy_lab.lie_core import GROUP_IDS, generic_torus_vector, get_group

HALF = np.diag([0.5j, -0.5j])  # su2 torus vector with root value 1


def test_su2_table_for_unit_root():
    table = analytic_fiber_spectrum(HALF, 2, "su2")
    expected = [1 / (2 * np.pi)] * 2 + [1 / (4 * np.pi)] * 2 + [0.0] * 4 + [-1 / (4 * np.pi)] * 2 \
        + [-1 / (2 * np.pi)] * 2
    assert np.allclose(table.eigenvalues(), expected, atol=1e-15)
    assert len(table) == 3 * 2 * 2


@pytest.mark.parametrize("gid", GROUP_IDS)
def test_table_size_and_symmetry(gid, rng):
    v = generic_torus_vector(gid, rng)
    table = analytic_fiber_spectrum(v, 3, gid)
    assert len(table) == get_group(gid).dim * 6
    ev = table.eigenvalues()
    assert np.allclose(np.sort(ev), np.sort(-ev), atol=1e-15)


@given(t=st.floats(0.1, 10.0))
def test_table_scales_linearly(t):
    g = get_group("su3")
    v = g.torus_vector([0.9, -0.2, -0.7])
    a = analytic_fiber_spectrum(v, 2, "su3").eigenvalues()
    b = analytic_fiber_spectrum(t * v, 2, "su3").eigenvalues()
    assert np.allclose(b, t * a, rtol=1e-12, atol=1e-15)


def test_table_distance_and_rows():
    a = SpectrumTable([SpectrumEntry(1.0, 2), SpectrumEntry(-1.0, 1)])
    b = SpectrumTable([SpectrumEntry(1.1, 2), SpectrumEntry(-1.0, 1)])
    assert a.distance(b) == pytest.approx(0.1)
    assert a.distance(SpectrumTable([SpectrumEntry(1.0, 1)])) == math.inf
    assert list(a.rows())[0] == (1.0, 2, "numeric", "analytic")
    with pytest.raises(DomainError):
        SpectrumEntry(1.0, 0)


def test_clustering_merges_close_values():
    entries = cluster_eigenvalues([0.5, 0.5 + 1e-9, -0.1, 0.2], tol=1e-6)
    assert [(round(e.eigenvalue, 6), e.multiplicity) for e in entries] == [(0.5, 2), (0.2, 1), (-0.1, 1)]


@pytest.mark.parametrize("gid", ["su2", "so3"])
def test_numeric_shape_operator_matches_table(gid, rng):
    v = generic_torus_vector(gid, rng)
    num = numeric_shape_operator(v, K=2, N=64, group_id=gid)
    assert num.distance(analytic_fiber_spectrum(v, 2, gid)) < 1e-4
    assert num.diagnostics["asymmetry"] < 1e-6


def test_zero_normal_gives_zero_operator():
    num = numeric_shape_operator(np.zeros((2, 2), complex), K=1, N=32, group_id="su2")
    assert np.max(np.abs(num.eigenvalues())) < 1e-10
    with pytest.raises(DomainError):
        numeric_shape_operator(HALF, K=9, group_id="su2")


def test_trace_square_unit_root():
    out = trace_square(HALF, 64, "su2")
    assert out["closed_form"] == pytest.approx(1 / 6, abs=1e-15)
    assert abs(out["total"] - 1 / 6) < 1e-12
    assert 0 < 1 / 6 - out["partial"] <= out["tail_bound"]
    assert trace_square(np.zeros((2, 2), complex), 4, "su2")["total"] == 0.0


def test_trace_square_su3_sums_root_squares(rng):
    g = get_group("su3")
    a = np.array([0.9, -0.2, -0.7])
    out = trace_square(g.torus_vector(a), 128, "su3")
    weight = sum((a[i] - a[j]) ** 2 for i in range(3) for j in range(i + 1, 3))
    assert out["total"] == pytest.approx(weight / 6, rel=1e-12)


def test_paired_trace_of_finite_table_is_exactly_zero(rng):
    table = analytic_fiber_spectrum(generic_torus_vector("su3", rng), 5, "su3")
    rep = regularized_traces(table)
    assert rep.hlo_trace.verdict == "value" and rep.hlo_trace.value == 0.0
    ev = np.abs(table.eigenvalues())
    assert rep.ls_norms[2.0] == pytest.approx(np.sqrt(np.sum(ev ** 2)), rel=1e-12)
    assert rep.ls_norms[math.inf] == pytest.approx(np.max(ev))


def test_empty_table_is_rejected():
    with pytest.raises(DomainError):
        regularized_traces(SpectrumTable([]))


@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
def test_example_power_sums_match_zeta_oracle(s):
    # (2^s - 1) zeta(s) from the two sequences 2/k and 1/k
    tail = two_sequence_example()
    mpmath.mp.dps = 30
    assert tail.power_sum(s, 1.0, -1.0, 1) == pytest.approx(float((2 ** mpmath.mpf(s) - 1) * mpmath.zeta(s)),
                                                            rel=1e-13)
    assert tail.power_sum(1.0, 1.0, -1.0, 1) == math.inf


def test_example_partial_sums_are_harmonic_numbers():
    rep = regularized_traces(None, two_sequence_example(), m_max=10 ** 6, reference_bound=EXAMPLE_ZETA_BOUND)
    h = float(mpmath.harmonic(10 ** 6))
    assert rep.hlo_trace.evidence["final_partial_sum"] == pytest.approx(h, rel=1e-12)
    assert abs(h - rep.hlo_trace.evidence["ln_m_plus_gamma"]) < 1e-6
    assert rep.hlo_trace.verdict == "diverges"
    assert rep.hlo_trace.slope == pytest.approx(1.0, abs=1e-3)
    assert rep.zeta_trace.verdict == "diverges"
    assert rep.flags and rep.flags[0]["kind"] == "zeta_trace_exceeds_reference_bound"
    assert rep.ls_norms[1.1] < math.inf


def test_log_fit_and_verdicts():
    m = np.geomspace(10, 1e5, 20)
    a, b, r2 = log_fit(m, 2.0 * np.log(m) + 1.0)
    assert (a, b, r2) == pytest.approx((2.0, 1.0, 1.0))
    assert divergence_verdict(m, np.log(m) + 0.5).verdict == "diverges"
    settled = 1.0 - 1.0 / m ** 3
    settled[-2:] = 1.0
    assert divergence_verdict(m, settled).verdict == "value"


def test_sphere_radius_of_su2():
    # a unit algebra vector rotates by 1 / (2 sqrt 2) per unit time
    assert sphere_radius("su2") == pytest.approx(2 * math.sqrt(2), rel=1e-14)
    with pytest.raises(DomainError):
        sphere_radius("so3")


def test_point_probe_matches_table():
    out = isoparametric_probe({"kind": "point"}, K=2, N=64, seed=3)
    assert out["distance"] < 1e-4
    with pytest.raises(DomainError):
        isoparametric_probe({"kind": "torus"})
    with pytest.raises(DomainError):
        isoparametric_probe({"kind": "distance_sphere", "radius": 20.0})


def test_distance_sphere_probe_is_point_independent():
    r = math.pi / 4
    out = isoparametric_probe({"kind": "distance_sphere", "radius": r}, K=2, N=64, point_count=1, seed=1)
    assert out["discrepancy"] < 1e-3
    R = sphere_radius()
    assert out["sphere_curvature_prediction"] == pytest.approx(1 / (math.tan(r / R) * R))
    assert out["sphere_curvature_error"] < 1e-3


def test_numeric_operator_is_diagonal_with_mirrored_mode_labels():
    num = numeric_shape_operator(HALF, K=2, N=64, group_id="su2")
    M, labels = num.diagnostics["matrix"], num.diagnostics["labels"]
    assert np.max(np.abs(M - np.diag(np.diag(M)))) < 1e-8
    for lab, val in zip(labels, np.diag(M)):
        expected = 0.0 if lab.space == "flat" else 1.0 / (2 * lab.k * np.pi)  # formula value at -k
        assert val == pytest.approx(expected, abs=1e-6)


def test_example_traces_at_small_cutoff():
    rep = regularized_traces(None, two_sequence_example(), m_max=1000, reference_bound=EXAMPLE_ZETA_BOUND)
    assert rep.hlo_trace.verdict == "diverges"
    assert rep.hlo_trace.evidence["final_partial_sum"] == pytest.approx(float(mpmath.harmonic(1000)), rel=1e-12)
    with pytest.raises(DomainError):
        regularized_traces(None, two_sequence_example(), m_max=10)
