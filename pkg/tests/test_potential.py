import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afkp.errors import ConfigError
from afkp.potential import (
    PotentialSpec, ShiftConfig, from_shift, lattice, merged_breakpoints, shift_positions,
)

deltas = st.floats(-1.0, 1.0, allow_nan=False)


def test_canonical_positions():
    p = lattice(10, 10, 50, 0.0)
    assert p.n_barriers == 10
    assert np.allclose(p.positions, np.arange(-4.5, 5.0, 1.0))
    assert p.lattice_constant == 1.0
    assert np.allclose(p.widths.sum(), 10.0)


def test_shift_moves_lattice_right():
    y0 = shift_positions(10, 10, 0.0)
    y1 = shift_positions(10, 10, 0.04)
    assert np.allclose(y1 - y0, 0.02)


@pytest.mark.parametrize("delta", [-1.0, 1.0])
def test_wall_barrier_is_pruned(delta):
    p = lattice(10, 10, 50, delta)
    assert p.n_barriers == 9
    assert np.all(np.abs(p.positions) < 5.0)


@given(deltas)
def test_mirror_is_negated_shift(delta):
    p = lattice(10, 10, 50, delta)
    q = lattice(10, 10, 50, -delta)
    m = p.mirrored()
    assert m.positions == q.positions
    assert m.strengths == q.strengths
    assert m.shift == q.shift


@given(deltas, st.integers(1, 40), st.floats(0.5, 50.0))
def test_positions_inside_and_increasing(delta, M, L):
    p = lattice(L, M, 1.0, delta)
    y = np.asarray(p.positions)
    assert np.all(np.diff(y) > 0)
    assert np.all(np.abs(y) < L / 2)
    assert M - 1 <= p.n_barriers <= M


@pytest.mark.parametrize("kwargs", [
    dict(L=0.0, M=10, h=1.0, delta=0.0),
    dict(L=10.0, M=0, h=1.0, delta=0.0),
    dict(L=10.0, M=10, h=-1.0, delta=0.0),
    dict(L=10.0, M=10, h=1.0, delta=1.5),
])
def test_shift_config_validation(kwargs):
    with pytest.raises(ConfigError):
        ShiftConfig(**kwargs)


@pytest.mark.parametrize("pos,strength", [
    ((5.0,), (1.0,)),
    ((1.0, 0.5), (1.0, 1.0)),
    ((0.0,), (-1.0,)),
    ((0.0, 1.0), (1.0,)),
])
def test_potential_validation(pos, strength):
    with pytest.raises(ConfigError):
        PotentialSpec(10.0, pos, strength)


def test_serialization_round_trip_and_digest():
    p = lattice(10, 10, 50, 0.04)
    q = PotentialSpec.from_record(p.to_record())
    assert q == p
    assert q.digest() == p.digest()
    assert lattice(10, 10, 50, 0.0400000001).digest() != p.digest()


def test_merged_breakpoints():
    p1 = lattice(10, 10, 50, 0.0)
    p2 = lattice(10, 10, 50, 0.04)
    bp = merged_breakpoints(p1, p2)
    assert len(bp) == 22
    assert bp[0] == -5.0 and bp[-1] == 5.0
    assert np.all(np.diff(bp) > 0)
    # identical potentials merge completely
    assert len(merged_breakpoints(p1, p1)) == 12
    with pytest.raises(ConfigError):
        merged_breakpoints(p1, lattice(12, 10, 50, 0.0))


def test_merged_breakpoints_collapses_near_points():
    p = PotentialSpec(10.0, (1.0,), (1.0,))
    q = PotentialSpec(10.0, (1.0 + 1e-14,), (1.0,))
    assert len(merged_breakpoints(p, q)) == 3


def test_free_box():
    p = from_shift(ShiftConfig(10, 10, 0.0, 0.0))
    assert p.is_free
    assert not lattice(10, 10, 50, 0.0).is_free
