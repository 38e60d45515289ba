"""Hard-wall box with a set of delta barriers.

Lengths are measured from the box centre, so the walls sit at ``-L/2`` and
``+L/2``. A barrier of strength ``h`` at ``y`` adds ``h * delta(x - y)`` to the
Hamiltonian ``-1/2 d^2/dx^2``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

#: Barriers closer than ``WALL_TOL * L`` to a wall sit on a node and are dropped.
WALL_TOL = 1e-12
#: Breakpoints closer than ``MERGE_TOL * L`` are treated as one.
MERGE_TOL = 1e-12


@dataclass(frozen=True)
class ShiftConfig:
    """Equally spaced lattice of ``M`` barriers of strength ``h``, shifted by ``delta``."""

    L: float
    M: int
    h: float
    delta: float

    def __post_init__(self):
        for name in ("L", "h", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.L > 0:
            raise ConfigError(f"box length must be positive, got {self.L}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"need at least one barrier, got M={self.M}")
        object.__setattr__(self, "M", int(self.M))
        if not self.h >= 0:
            raise ConfigError(f"barrier strength must be non-negative, got {self.h}")
        if not -1.0 <= self.delta <= 1.0:
            raise ConfigError(f"shift must lie in [-1, 1], got {self.delta}")

    @property
    def lattice_constant(self) -> float:
        return self.L / self.M


@dataclass(frozen=True)
class PotentialSpec:
    """Box length plus ordered barrier positions and strengths."""

    box_length: float
    positions: tuple[float, ...] = ()
    strengths: tuple[float, ...] = ()
    shift: Optional[ShiftConfig] = None

    def __post_init__(self):
        object.__setattr__(self, "box_length", float(self.box_length))
        object.__setattr__(self, "positions", tuple(float(y) for y in self.positions))
        object.__setattr__(self, "strengths", tuple(float(h) for h in self.strengths))
        L = self.box_length
        if not L > 0:
            raise ConfigError(f"box length must be positive, got {L}")
        if len(self.positions) != len(self.strengths):
            raise ConfigError("positions and strengths differ in length")
        y = np.asarray(self.positions)
        if np.any(y <= -L / 2) or np.any(y >= L / 2):
            raise ConfigError("barriers must lie strictly inside the box")
        if np.any(np.diff(y) <= 0):
            raise ConfigError("barrier positions must be strictly increasing")
        if any(h < 0 for h in self.strengths):
            raise ConfigError("barrier strengths must be non-negative")

    @property
    def n_barriers(self) -> int:
        return len(self.positions)

    @property
    def lattice_constant(self) -> float:
        if self.shift is not None:
            return self.shift.lattice_constant
        return self.box_length / max(self.n_barriers, 1)

    @property
    def edges(self) -> np.ndarray:
        """Segment boundaries: the two walls with every barrier in between."""
        L = self.box_length
        return np.concatenate([[-L / 2], self.positions, [L / 2]])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def is_free(self) -> bool:
        return not any(h > 0 for h in self.strengths)

    def mirrored(self) -> "PotentialSpec":
        """Image under ``x -> -x``."""
        shift = None
        if self.shift is not None:
            s = self.shift
            shift = ShiftConfig(s.L, s.M, s.h, -s.delta)
        return PotentialSpec(
            self.box_length,
            tuple(-y for y in reversed(self.positions)),
            tuple(reversed(self.strengths)),
            shift,
        )

    def to_record(self) -> dict:
        rec = {
            "L": self.box_length,
            "barriers": [[y, h] for y, h in zip(self.positions, self.strengths)],
        }
        if self.shift is not None:
            s = self.shift
            rec["shift"] = {"L": s.L, "M": s.M, "h": s.h, "delta": s.delta}
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "PotentialSpec":
        shift = ShiftConfig(**rec["shift"]) if rec.get("shift") else None
        bars = rec.get("barriers", [])
        return cls(
            float(rec["L"]),
            tuple(b[0] for b in bars),
            tuple(b[1] for b in bars),
            shift,
        )

    def serialize(self) -> str:
        # repr-exact floats keep the cache key stable across runs
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def shift_positions(L: float, M: int, delta: float) -> np.ndarray:
    """Unpruned barrier positions of the shifted lattice.

    Written as ``(n - (M+1)/2 + delta/2) * L/M`` which is algebraically the
    usual ``-L/2 + (n + (delta-1)/2) L/M`` but mirrors exactly in floating
    point under ``delta -> -delta``.
    """
    n = np.arange(1, M + 1, dtype=float)
    return (n - (M + 1) / 2 + delta / 2) * (L / M)


def from_shift(cfg: ShiftConfig) -> PotentialSpec:
    y = shift_positions(cfg.L, cfg.M, cfg.delta)
    tol = WALL_TOL * cfg.L
    keep = (y > -cfg.L / 2 + tol) & (y < cfg.L / 2 - tol)
    y = y[keep]
    return PotentialSpec(cfg.L, tuple(y), (cfg.h,) * len(y), cfg)


def lattice(L: float, M: int, h: float, delta: float) -> PotentialSpec:
    """Shorthand for ``from_shift(ShiftConfig(L, M, h, delta))``."""
    return from_shift(ShiftConfig(L, M, h, delta))


def merged_breakpoints(
    p1: PotentialSpec, p2: PotentialSpec, extra: Sequence[float] = ()
) -> np.ndarray:
    """Sorted union of both walls, both barrier sets and any ``extra`` points.

    Points closer than ``MERGE_TOL * L`` collapse onto the first of the run.
    """
    if p1.box_length != p2.box_length:
        raise ConfigError(
            f"box lengths differ: {p1.box_length} vs {p2.box_length}"
        )
    L = p1.box_length
    pts = np.sort(np.concatenate([p1.edges, p2.positions, np.asarray(extra, float)]))
    pts = pts[(pts >= -L / 2) & (pts <= L / 2)]
    keep = np.concatenate([[True], np.diff(pts) > MERGE_TOL * L])
    pts = pts[keep]
    # the wall itself must survive a merge with a nearby interior point
    pts[0], pts[-1] = -L / 2, L / 2
    return pts
