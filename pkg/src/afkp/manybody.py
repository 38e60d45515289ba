"""Zero-temperature Fermi-sea observables built from single-particle data.

The ground state of ``N`` free fermions is the Slater determinant of the
``N`` lowest orbitals, so every many-body amplitude here reduces to a
determinant of single-particle overlaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .eigensolver import Spectrum
from .errors import ConfigError
from .overlaps import DEFAULT_MAX_STATES, build_overlap_matrix, cutoff_and_spectrum

DEFAULT_SPAN = 20.0
DEFAULT_SAMPLES = 2001
DEFAULT_DEFECT_TOL = 1e-8

_TIME_CHUNK_ELEMS = 1 << 21


@dataclass(frozen=True, eq=False)
class FermiSea:
    spectrum: Spectrum
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError(f"need at least one particle, got N={self.N}")
        if self.N > len(self.spectrum):
            raise ConfigError(
                f"N={self.N} exceeds the {len(self.spectrum)} solved states"
            )

    @property
    def ground_energy(self) -> float:
        return float(self.spectrum.energies[: self.N].sum())


@dataclass(frozen=True, eq=False)
class SurvivalTrace:
    """Loschmidt amplitude on a time grid.

    ``times`` are absolute; ``scaled_times`` divides by the Fermi time of the
    final Hamiltonian.
    """

    times: np.ndarray
    nu: np.ndarray
    N: int
    fermi_energy: float
    cutoff: int
    defect: float
    meta: dict = field(default_factory=dict)

    @property
    def fermi_time(self) -> float:
        return 1.0 / self.fermi_energy

    @property
    def scaled_times(self) -> np.ndarray:
        return self.times / self.fermi_time

    @property
    def probability(self) -> np.ndarray:
        return np.abs(self.nu) ** 2

    def columns(self) -> np.ndarray:
        """``(t, t/t_F, Re nu, Im nu, |nu|^2)`` as an ``(n, 5)`` array."""
        return np.column_stack(
            [self.times, self.scaled_times, self.nu.real, self.nu.imag, self.probability]
        )


def signed_det(matrix: np.ndarray) -> float:
    """Determinant through a pivoted LU with log-magnitude accumulation."""
    sign, logabs = np.linalg.slogdet(matrix)
    return float(sign * np.exp(logabs))


def _orbitals_on_grid(spec: Spectrum, n: int, grid) -> np.ndarray:
    x = np.asarray(grid, dtype=float)
    L = spec.potential.box_length
    if np.any(np.abs(x) > L / 2 * (1 + 1e-12)):
        raise ConfigError("grid points must lie inside the box")
    edges = spec.edges
    seg = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, spec.alpha.shape[1] - 1)
    k = spec.k[:n, None]
    return spec.alpha[:n, seg] * np.sin(k * x) + spec.beta[:n, seg] * np.cos(k * x)


def integrated_density(sea: FermiSea, grid) -> np.ndarray:
    """``sum_{n<=N} |psi_n(x)|^2`` on ``grid``."""
    psi = _orbitals_on_grid(sea.spectrum, sea.N, grid)
    return (psi**2).sum(axis=0)


def static_overlap(sea1: FermiSea, sea2: FermiSea) -> float:
    """Signed ground-state overlap ``nu``; square it for the transition probability."""
    if sea1.N != sea2.N:
        raise ConfigError(f"particle numbers differ: {sea1.N} vs {sea2.N}")
    O = build_overlap_matrix(sea1.spectrum, sea2.spectrum, sea1.N, sea2.N)
    return signed_det(O.values)


def transition_probabilities(spec1: Spectrum, spec2: Spectrum, Ns: Iterable[int]) -> dict:
    """``{N: |nu_N|^2}`` from one overlap matrix covering the largest ``N``."""
    Ns = sorted(set(int(n) for n in Ns))
    if not Ns or Ns[0] < 1:
        raise ConfigError("particle numbers must be >= 1")
    O = build_overlap_matrix(spec1, spec2, Ns[-1], Ns[-1]).values
    return {n: signed_det(O[:n, :n]) ** 2 for n in Ns}


def oc_exponent_fit(probabilities: Sequence, window: Optional[tuple] = None) -> float:
    """Exponent ``alpha`` of ``|nu|^2 ~ N^-alpha`` by least squares in log-log.

    ``probabilities`` holds ``(N, |nu|^2)`` pairs; ``window = (lo, hi)``
    restricts the fit to ``lo <= N <= hi``.
    """
    data = np.asarray(probabilities, dtype=float).reshape(-1, 2)
    if window is not None:
        lo, hi = window
        data = data[(data[:, 0] >= lo) & (data[:, 0] <= hi)]
    if len(data) < 3:
        raise ConfigError("need at least three points to fit the exponent")
    if np.any(data[:, 1] <= 0):
        raise ConfigError("probabilities in the fit window must be positive")
    slope = np.polyfit(np.log(data[:, 0]), np.log(data[:, 1]), 1)[0]
    return float(-slope)


def fermi_scale(spec2: Spectrum, N: int) -> tuple:
    """``(E_F, t_F)`` with ``E_F`` the ``N``-th level of the final Hamiltonian."""
    if not 1 <= N <= len(spec2):
        raise ConfigError(f"N={N} outside 1..{len(spec2)}")
    E_F = float(spec2.energies[N - 1])
    return E_F, 1.0 / E_F


def fermi_time_grid(spec2: Spectrum, N: int, span: float = DEFAULT_SPAN,
                    samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Uniform absolute times covering ``[0, span * t_F]``."""
    _, t_F = fermi_scale(spec2, N)
    return np.linspace(0.0, span * t_F, samples)


def loschmidt_amplitude(O: np.ndarray, e1: np.ndarray, e2: np.ndarray, times) -> np.ndarray:
    """``det A(t)`` with ``A = diag(e^{i e1 t}) O diag(e^{-i e2 t}) O^T``.

    ``O`` has one row per occupied initial orbital and one column per retained
    final orbital.
    """
    times = np.asarray(times, dtype=float)
    N, C = O.shape
    E0 = float(np.sum(e1[:N]))
    out = np.empty(len(times), dtype=complex)
    step = max(1, _TIME_CHUNK_ELEMS // (N * C))
    Ot = O.T
    for i0 in range(0, len(times), step):
        t = times[i0 : i0 + step]
        arg = np.outer(t, e2)
        re = (O[None, :, :] * np.cos(arg)[:, None, :]) @ Ot
        im = (O[None, :, :] * np.sin(arg)[:, None, :]) @ Ot
        sign, logabs = np.linalg.slogdet(re - 1j * im)
        out[i0 : i0 + step] = sign * np.exp(logabs + 1j * E0 * t)
    return out


def dynamic_overlap(
    sea1: FermiSea,
    spec2: Spectrum,
    times=None,
    defect_tol: float = DEFAULT_DEFECT_TOL,
    max_states: int = DEFAULT_MAX_STATES,
) -> SurvivalTrace:
    """Survival amplitude after a sudden switch to the Hamiltonian of ``spec2``.

    The sum over final orbitals is truncated at the smallest cutoff for which
    every occupied row of the overlap matrix is complete to ``defect_tol``.
    Defaults to ``DEFAULT_SAMPLES`` points on ``[0, DEFAULT_SPAN t_F]``.
    """
    N = sea1.N
    cutoff, spec2 = cutoff_and_spectrum(sea1.spectrum, spec2, N, defect_tol, max_states)
    if times is None:
        times = fermi_time_grid(spec2, N)
    O = build_overlap_matrix(sea1.spectrum, spec2, N, cutoff)
    nu = loschmidt_amplitude(O.values, sea1.spectrum.energies, spec2.energies[:cutoff], times)
    E_F, _ = fermi_scale(spec2, N)
    meta = {"defect_tol": defect_tol}
    for tag, spec in (("delta1", sea1.spectrum), ("delta2", spec2)):
        if spec.potential.shift is not None:
            meta[tag] = spec.potential.shift.delta
            meta["h"] = spec.potential.shift.h
    return SurvivalTrace(
        np.asarray(times, float), nu, N, E_F, cutoff, float(O.defects.max()), meta
    )
