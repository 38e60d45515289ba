import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from afkp import _kernels_py, kernels
from afkp.potential import lattice

needs_ext = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="extension not built")


def test_backend_selection():
    assert kernels.BACKEND in kernels.BACKENDS
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
    with kernels.using("python"):
        assert kernels.BACKEND == "python"
    assert kernels.get_backend("python") is _kernels_py


def test_free_box_node_count():
    # eigenvalues of the empty box sit at k = n pi / L
    L = 10.0
    ks = (np.arange(1, 50) + 0.5) * np.pi / L
    for name in kernels.BACKENDS:
        vals, nodes = kernels.get_backend(name).shoot(ks, np.array([L]), np.array([]))
        assert np.array_equal(nodes, np.arange(1, 50))
        assert np.allclose(np.abs(vals), 1.0)


def test_node_count_monotone_through_barriers():
    p = lattice(10, 10, 50, 0.04)
    ks = np.linspace(0.05, 400, 40001)
    for name in kernels.BACKENDS:
        _, nodes = kernels.get_backend(name).shoot(ks, p.widths, p.strengths)
        assert np.all(np.diff(nodes) >= 0)
        assert nodes[0] == 0


@needs_ext
@settings(max_examples=50, deadline=None)
@given(
    arrays(float, st.integers(1, 30), elements=st.floats(0.01, 300.0)),
    st.floats(-1.0, 1.0), st.floats(0.0, 200.0),
)
def test_shoot_backends_agree(ks, delta, h):
    p = lattice(10, 10, h, delta)
    v1, n1 = _kernels_py.shoot(ks, p.widths, p.strengths)
    v2, n2 = kernels.get_backend("cython").shoot(ks, p.widths, p.strengths)
    assert np.array_equal(n1, n2)
    assert np.allclose(v1, v2, atol=1e-12)


def _random_coeffs(rng, n, nseg):
    return rng.normal(size=(n, nseg)), rng.normal(size=(n, nseg))


@needs_ext
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_overlap_backends_agree(seed):
    rng = np.random.default_rng(seed)
    nseg = int(rng.integers(1, 8))
    edges = np.sort(rng.uniform(-5, 5, nseg - 1))
    lo = np.concatenate([[-5.0], edges])
    hi = np.concatenate([edges, [5.0]])
    k1 = rng.uniform(0.1, 50, 4)
    k2 = np.concatenate([rng.uniform(0.1, 50, 3), k1[:1]])
    a1, b1 = _random_coeffs(rng, 4, nseg)
    a2, b2 = _random_coeffs(rng, 4, nseg)
    r1 = _kernels_py.overlap_block(k1, a1, b1, k2, a2, b2, lo, hi)
    r2 = kernels.get_backend("cython").overlap_block(k1, a1, b1, k2, a2, b2, lo, hi)
    assert np.allclose(r1, r2, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", sorted(kernels.BACKENDS))
def test_overlap_against_numerical_integral(name):
    rng = np.random.default_rng(7)
    lo, hi = np.array([-1.0, 0.3]), np.array([0.3, 2.0])
    k1, k2 = np.array([3.1]), np.array([7.4])
    a1, b1 = _random_coeffs(rng, 1, 2)
    a2, b2 = _random_coeffs(rng, 1, 2)
    got = kernels.get_backend(name).overlap_block(k1, a1, b1, k2, a2, b2, lo, hi)[0, 0]
    want = 0.0
    for s in range(2):
        x = np.linspace(lo[s], hi[s], 200001)
        f = (a1[0, s] * np.sin(k1[0] * x) + b1[0, s] * np.cos(k1[0] * x)) * (
            a2[0, s] * np.sin(k2[0] * x) + b2[0, s] * np.cos(k2[0] * x))
        want += np.trapezoid(f, x) if hasattr(np, "trapezoid") else np.trapz(f, x)
    assert got == pytest.approx(want, abs=1e-8)


@pytest.mark.parametrize("name", sorted(kernels.BACKENDS))
def test_overlap_continuous_through_equal_frequencies(name):
    fns = kernels.get_backend(name)
    lo, hi = np.array([-5.0]), np.array([5.0])
    a, b = np.array([[0.3]]), np.array([[0.7]])
    k = 4.2
    exact = fns.overlap_block(np.array([k]), a, b, np.array([k]), a, b, lo, hi)[0, 0]
    near = fns.overlap_block(np.array([k]), a, b, np.array([k * (1 + 1e-7)]), a, b, lo, hi)[0, 0]
    assert near == pytest.approx(exact, rel=1e-5)
    x = np.linspace(-5, 5, 400001)
    f = (0.3 * np.sin(k * x) + 0.7 * np.cos(k * x)) ** 2
    assert exact == pytest.approx(np.sum((f[1:] + f[:-1]) / 2) * (x[1] - x[0]), rel=1e-8)
