import numpy as np
import pytest

from afkp.errors import ConfigError
from afkp.manybody import (
    FermiSea, dynamic_overlap, fermi_scale, fermi_time_grid, integrated_density,
    loschmidt_amplitude, oc_exponent_fit, signed_det, static_overlap, transition_probabilities,
)
from afkp.overlaps import build_overlap_matrix, inner_product

from conftest import spectrum

# |nu_N|^2 for 0 -> 0.04 and 0.3 -> 0.4 at h=50, pinned from the first verified run
STATIC_0_004 = {1: 0.9967122661590272, 9: 0.9681308407612478, 10: 0.114230482192042,
                19: 0.10598242485028435, 20: 0.8855669222151411, 30: 0.09512463256156925}
STATIC_03_04 = {9: 0.819613681353907, 10: 0.806569356742305, 19: 0.4966158147921031,
                29: 1.2376652177979981e-10, 30: 0.20744733891188627}


def test_static_regression():
    got = transition_probabilities(spectrum(0.0), spectrum(0.04), STATIC_0_004)
    for N, v in STATIC_0_004.items():
        assert got[N] == pytest.approx(v, rel=1e-9)
    got = transition_probabilities(spectrum(0.3), spectrum(0.4), STATIC_03_04)
    for N, v in STATIC_03_04.items():
        assert got[N] == pytest.approx(v, rel=1e-6, abs=1e-15)


def test_single_particle_overlap():
    a, b = spectrum(0.0), spectrum(0.04)
    nu = static_overlap(FermiSea(a, 1), FermiSea(b, 1))
    assert nu == pytest.approx(inner_product(a.state(1), b.state(1)), abs=1e-14)


def test_identity_quench():
    s = spectrum(0.3)
    assert static_overlap(FermiSea(s, 25), FermiSea(s, 25)) == pytest.approx(1.0, abs=1e-10)


def test_static_overlap_is_bounded():
    probs = transition_probabilities(spectrum(0.3), spectrum(-0.6), range(1, 61))
    assert all(0.0 <= p <= 1.0 + 1e-10 for p in probs.values())


def test_particle_number_checks():
    s = spectrum(0.0)
    with pytest.raises(ConfigError):
        FermiSea(s, 0)
    with pytest.raises(ConfigError):
        FermiSea(s, 61)
    with pytest.raises(ConfigError):
        static_overlap(FermiSea(s, 3), FermiSea(s, 4))


def test_signed_det():
    A = np.array([[0.0, 2.0], [3.0, 1.0]])
    assert signed_det(A) == pytest.approx(-6.0)
    assert signed_det(np.zeros((3, 3))) == 0.0


def test_oc_fit_recovers_power_law():
    N = np.arange(5, 40)
    data = np.column_stack([N, 0.8 * N**-0.37])
    assert oc_exponent_fit(data) == pytest.approx(0.37, abs=1e-12)
    assert oc_exponent_fit(data, window=(10, 20)) == pytest.approx(0.37, abs=1e-12)
    with pytest.raises(ConfigError):
        oc_exponent_fit(data[:2])


def test_fermi_scale():
    s = spectrum(0.04)
    E_F, t_F = fermi_scale(s, 10)
    assert E_F == s.energies[9] and t_F == 1 / E_F
    t = fermi_time_grid(s, 10)
    assert len(t) == 2001 and t[-1] == pytest.approx(20 * t_F)


@pytest.mark.parametrize("N", [9, 10, 30])
def test_integrated_density_normalization(N):
    x = np.linspace(-5, 5, 20001)
    rho = integrated_density(FermiSea(spectrum(0.04), N), x)
    assert np.sum((rho[1:] + rho[:-1]) / 2) * (x[1] - x[0]) == pytest.approx(N, abs=1e-4)


def test_loschmidt_matches_direct_assembly():
    rng = np.random.default_rng(1)
    O = rng.normal(size=(3, 8)) / 3
    e1 = np.sort(rng.uniform(1, 5, 3))
    e2 = np.sort(rng.uniform(1, 5, 8))
    t = np.array([0.0, 0.3, 1.7])
    got = loschmidt_amplitude(O, e1, e2, t)
    for ti, g in zip(t, got):
        A = np.diag(np.exp(1j * e1 * ti)) @ O @ np.diag(np.exp(-1j * e2 * ti)) @ O.T
        assert g == pytest.approx(np.linalg.det(A), abs=1e-12)


def test_identity_dynamics():
    s = spectrum(0.3)
    tr = dynamic_overlap(FermiSea(s, 12), s, times=np.linspace(0, 3, 31))
    assert tr.cutoff == 12
    assert np.allclose(tr.probability, 1.0, atol=1e-10)


def test_dynamic_overlap_properties():
    tr = dynamic_overlap(FermiSea(spectrum(0.0), 10), spectrum(0.04), times=np.linspace(0, 2, 201))
    assert abs(tr.nu[0] - 1) <= 10 * tr.defect + 1e-12
    assert np.all(tr.probability <= 1 + 1e-5)
    assert tr.defect < 1e-8
    cols = tr.columns()
    assert cols.shape == (201, 5)
    assert np.allclose(cols[:, 1], tr.times * tr.fermi_energy)


def test_default_sampling_resolves_the_signal():
    # halving the step: the coarse trace interpolated at the new midpoints
    a, b = spectrum(0.0), spectrum(0.04)
    t1 = fermi_time_grid(b, 10)
    t2 = fermi_time_grid(b, 10, samples=4001)
    p1 = dynamic_overlap(FermiSea(a, 10), b, t1).probability
    p2 = dynamic_overlap(FermiSea(a, 10), b, t2).probability
    assert np.allclose(p1, p2[::2], atol=1e-12)
    assert np.max(np.abs(np.interp(t2[1::2], t1, p1) - p2[1::2])) < 1e-3
