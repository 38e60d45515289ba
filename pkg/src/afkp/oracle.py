"""Brute-force cross-checks for the exact solver.

Nothing here is used by the production code paths. The finite-difference
diagonalizer and the quadrature integrators share no numerics with the
transfer-matrix solver and the closed-form overlaps, which is what makes
them useful as oracles.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

from .eigensolver import Eigenstate
from .errors import ConfigError, SolverError
from .potential import PotentialSpec

MIN_POINTS_PER_SEGMENT = 20
QUAD_EPSABS = 1e-9


@dataclass(frozen=True, eq=False)
class GridHamiltonian:
    """Symmetric tridiagonal ``-1/2 d^2/dx^2 + V`` on the interior grid points."""

    dx: float
    x: np.ndarray
    diagonal: np.ndarray
    offdiagonal: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.x)

    def dense(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.offdiagonal, 1)
                + np.diag(self.offdiagonal, -1))


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Lowest eigenpairs on the grid; ``psi[n]`` is normalized with weight ``dx``."""

    hamiltonian: GridHamiltonian
    energies: np.ndarray
    psi: np.ndarray

    def __iter__(self):
        return iter(zip(self.energies, self.psi))

    def __len__(self):
        return len(self.energies)

    def overlap_with(self, state: Eigenstate, n: int) -> float:
        """Grid inner product of oracle state ``n`` (0-based) with ``state``."""
        return float(np.sum(self.psi[n] * state(self.hamiltonian.x)) * self.hamiltonian.dx)


def grid_hamiltonian(p: PotentialSpec, dx: float, smooth: bool = False) -> GridHamiltonian:
    """Discretize on ``round(L / dx)`` cells; walls are the excluded end points.

    Each delta becomes ``h / dx`` on its nearest grid point, or with
    ``smooth`` a Gaussian of width ``2 dx`` normalized on the grid.
    """
    L = p.box_length
    if not dx > 0:
        raise ConfigError(f"grid step must be positive, got {dx}")
    n_cells = int(round(L / dx))
    dx = L / n_cells
    if min(p.widths) / dx < MIN_POINTS_PER_SEGMENT:
        raise ConfigError(
            f"grid too coarse: {min(p.widths) / dx:.1f} points in the narrowest "
            f"segment, need {MIN_POINTS_PER_SEGMENT}"
        )
    x = -L / 2 + dx * np.arange(1, n_cells)
    V = np.zeros_like(x)
    for y, h in zip(p.positions, p.strengths):
        if smooth:
            w = 2.0 * dx
            g = np.exp(-0.5 * ((x - y) / w) ** 2)
            V += h * g / (g.sum() * dx)
        else:
            V[int(np.argmin(np.abs(x - y)))] += h / dx
    diag = 1.0 / dx**2 + V
    off = np.full(len(x) - 1, -0.5 / dx**2)
    return GridHamiltonian(dx, x, diag, off)


def dvr_diagonalize(p: PotentialSpec, n_states: int, dx: float,
                    smooth: bool = False) -> OracleResult:
    """Lowest ``n_states`` eigenpairs of the finite-difference Hamiltonian.

    Signs follow the solver convention: positive slope at the left wall.
    """
    H = grid_hamiltonian(p, dx, smooth)
    if not 1 <= n_states <= H.n_points:
        raise ConfigError(f"n_states must be in 1..{H.n_points}")
    E, vec = eigh_tridiagonal(H.diagonal, H.offdiagonal, select="i",
                              select_range=(0, n_states - 1))
    psi = vec.T / np.sqrt(H.dx)
    psi *= np.where(psi[:, :1] < 0, -1.0, 1.0)
    return OracleResult(H, E, psi)


def quad_overlap(s1: Eigenstate, s2: Eigenstate, epsabs: float = QUAD_EPSABS,
                 limit: int = 200) -> float:
    """Adaptive quadrature of ``psi1 psi2`` split at every barrier of both states."""
    pts = np.unique(np.concatenate([s1.edges, s2.edges]))
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo <= 0:
            continue

        def f(x):
            return float(s1(x) * s2(x))

        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=0.0, limit=limit)
            except integrate.IntegrationWarning as exc:
                raise SolverError(f"quadrature on [{lo}, {hi}] did not converge: {exc}")
        total += val
    return total


def _gauss_nodes(breakpoints, order):
    t, w = np.polynomial.legendre.leggauss(order)
    lo, hi = breakpoints[:-1, None], breakpoints[1:, None]
    x = 0.5 * (hi + lo) + 0.5 * (hi - lo) * t
    return x.ravel(), (0.5 * (hi - lo) * w).ravel()


def slater_overlap(states1: Sequence[Eigenstate], states2: Sequence[Eigenstate],
                   order: int = 40) -> float:
    """``<Psi1|Psi2>`` of two 2-particle Slater determinants by 2D quadrature.

    The wavefunctions are tabulated on a tensor Gauss-Legendre grid whose
    panels are the merged segments of both potentials, and the full
    antisymmetrized product is integrated over the square.
    """
    if len(states1) != 2 or len(states2) != 2:
        raise ConfigError("slater_overlap handles exactly two particles")
    bp = np.unique(np.concatenate([s.edges for s in (*states1, *states2)]))
    x, w = _gauss_nodes(bp, order)

    def antisym(states):
        a, b = (s(x) for s in states)
        return (np.outer(a, b) - np.outer(b, a)) / np.sqrt(2.0)

    W = np.outer(w, w)
    return float(np.sum(antisym(states1) * antisym(states2) * W))
