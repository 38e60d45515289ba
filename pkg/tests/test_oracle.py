import numpy as np
import pytest

from afkp.errors import ConfigError
from afkp.oracle import dvr_diagonalize, grid_hamiltonian, quad_overlap
from afkp.potential import lattice

from conftest import spectrum


def test_free_box_ground_state():
    res = dvr_diagonalize(lattice(10, 10, 0.0, 0.0), 3, 10 / 4000)
    assert res.energies[0] == pytest.approx(np.pi**2 / 200, abs=1e-5)


def test_error_shrinks_with_grid():
    exact = spectrum(0.04).energies[:20]
    p = lattice(10, 10, 50, 0.04)
    errs = [np.max(np.abs(dvr_diagonalize(p, 20, 10 / n).energies - exact)) for n in (2000, 4000, 8000)]
    assert errs[0] > errs[1] > errs[2]
    # second order: halving the step quarters the error, roughly
    assert 2.5 < errs[1] / errs[2] < 5.5


def test_richardson_matches_solver():
    p = lattice(10, 10, 50, 0.04)
    e1 = dvr_diagonalize(p, 30, 10 / 8000).energies
    e2 = dvr_diagonalize(p, 30, 10 / 16000).energies
    rich = (4 * e2 - e1) / 3
    assert np.allclose(rich, spectrum(0.04).energies[:30], rtol=2e-6)


def test_symmetric_lattice_densities_are_even():
    res = dvr_diagonalize(lattice(10, 10, 50, 0.0), 20, 10 / 4000)
    dens = res.psi**2
    assert np.max(np.abs(dens - dens[:, ::-1])) < 1e-6


def test_oracle_states_match_solver():
    s = spectrum(0.04)
    res = dvr_diagonalize(s.potential, 30, 10 / 16000)
    for n in range(30):
        assert abs(res.overlap_with(s.state(n + 1), n)) > 0.999


def test_quadrature_orthonormality():
    s = spectrum(0.3)
    for i, j in [(1, 1), (10, 10), (20, 20), (1, 2), (9, 10), (10, 11), (19, 31)]:
        val = quad_overlap(s.state(i), s.state(j))
        assert val == pytest.approx(float(i == j), abs=1e-8)


def test_coarse_grid_rejected():
    with pytest.raises(ConfigError):
        grid_hamiltonian(lattice(10, 10, 50, 0.0), 0.1)
    with pytest.raises(ConfigError):
        grid_hamiltonian(lattice(10, 10, 50, 0.0), -1.0)


def test_smoothed_barriers_converge():
    p = lattice(10, 10, 50, 0.0)
    exact = spectrum(0.0).energies[:10]
    errs = [np.max(np.abs(dvr_diagonalize(p, 10, 10 / n, smooth=True).energies - exact))
            for n in (2000, 8000)]
    # the finite width costs accuracy but the error still falls with dx
    assert errs[1] < errs[0] / 3
