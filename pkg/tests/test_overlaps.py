import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afkp.eigensolver import solve_spectrum
from afkp.errors import ConfigError, CutoffError
from afkp.oracle import quad_overlap
from afkp.overlaps import build_overlap_matrix, choose_cutoff, cutoff_and_spectrum, inner_product
from afkp.potential import PotentialSpec, lattice

from conftest import spectrum

# choose_cutoff(0 -> 0.04, n_rows=10, tol=1e-8), pinned from the first verified run
CUTOFF_10_ROWS = 7670


def test_self_overlap_is_one():
    s = spectrum(0.04)
    for n in (1, 10, 25):
        assert inner_product(s.state(n), s.state(n)) == pytest.approx(1.0, abs=1e-10)


def test_same_potential_pairs_are_orthogonal():
    s = spectrum(0.3)
    assert abs(inner_product(s.state(3), s.state(17))) < 1e-10
    assert abs(quad_overlap(s.state(3), s.state(17))) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.sampled_from([(0.0, 0.04), (0.3, 0.4), (-0.2, 0.9)]))
def test_closed_form_matches_quadrature(i, j, pair):
    a, b = spectrum(pair[0]), spectrum(pair[1])
    assert inner_product(a.state(i), b.state(j)) == pytest.approx(
        quad_overlap(a.state(i), b.state(j)), abs=1e-6)


def test_matrix_matches_pairwise_products():
    a, b = spectrum(0.0), spectrum(0.04)
    O = build_overlap_matrix(a, b, 5, 7)
    assert O.shape == (5, 7)
    for i in range(5):
        for j in range(7):
            assert O.values[i, j] == pytest.approx(inner_product(a.state(i + 1), b.state(j + 1)), abs=1e-13)
    rows, defects = O.table()
    assert rows[0][:2] == (1, 1) and len(rows) == 35
    assert np.all(defects >= -1e-12)


def test_rows_are_bounded_by_one():
    O = build_overlap_matrix(spectrum(0.0), spectrum(0.4))
    assert np.all(np.sum(O.values**2, axis=1) <= 1 + 1e-10)


def test_different_boxes_rejected():
    s1 = solve_spectrum(PotentialSpec(10.0), 3)
    s2 = solve_spectrum(PotentialSpec(11.0), 3)
    with pytest.raises(ConfigError):
        build_overlap_matrix(s1, s2)
    with pytest.raises(ConfigError):
        inner_product(s1.state(1), s2.state(1))


def test_oversized_request_rejected():
    with pytest.raises(ConfigError):
        build_overlap_matrix(spectrum(0.0), spectrum(0.04), 61, 5)


def test_choose_cutoff_regression():
    a, b = spectrum(0.0), spectrum(0.04)
    cut, grown = cutoff_and_spectrum(a, b, 10, 1e-8)
    assert cut == CUTOFF_10_ROWS
    O = build_overlap_matrix(a, grown, 10, cut)
    assert O.defects.max() < 1e-8
    # one column fewer fails somewhere
    assert build_overlap_matrix(a, grown, 10, cut - 1).defects.max() >= 1e-8
    assert O.defects[0] < 1e-6


def test_choose_cutoff_identical_potentials():
    s = spectrum(0.3)
    assert choose_cutoff(s, s, 10, 1e-8) == 10


def test_cutoff_cap_reports_defect():
    with pytest.raises(CutoffError) as exc:
        choose_cutoff(spectrum(0.0), spectrum(0.04), 10, 1e-8, max_states=200)
    assert exc.value.n_cols == 200
    assert 1e-8 < exc.value.achieved_defect < 1e-2


def test_invalid_tolerance():
    with pytest.raises(ConfigError):
        choose_cutoff(spectrum(0.0), spectrum(0.04), 10, 0.0)
