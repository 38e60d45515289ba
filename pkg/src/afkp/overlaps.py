"""Exact inner products between eigenstates of two potentials in the same box."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .eigensolver import Eigenstate, Spectrum, extend_spectrum
from .errors import ConfigError, CutoffError
from .potential import MERGE_TOL, merged_breakpoints

#: Relative wavenumber gap below which the equal-frequency integral is used.
DEGENERATE_TOL = 1e-8
#: Largest target spectrum ``choose_cutoff`` may solve.
DEFAULT_MAX_STATES = 20000


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    """``values[k, l] = <psi_source_k | psi_target_l>`` for the leading states."""

    source: Spectrum
    target: Spectrum
    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape

    @property
    def defects(self) -> np.ndarray:
        """Per-row completeness defect ``1 - sum_l O[k, l]^2``."""
        return 1.0 - np.einsum("kl,kl->k", self.values, self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def table(self):
        """Rows ``(k, l, value)`` with 1-based indices, plus the row defects."""
        n, m = self.shape
        rows = [(k + 1, l + 1, float(self.values[k, l])) for k in range(n) for l in range(m)]
        return rows, self.defects


def _on_segments(edges, alpha, beta, bp):
    # coefficients of each state on the merged segments [bp[s], bp[s+1]]
    mid = 0.5 * (bp[:-1] + bp[1:])
    idx = np.clip(np.searchsorted(edges, mid) - 1, 0, alpha.shape[-1] - 1)
    return alpha[..., idx], beta[..., idx]


def _common_breakpoints(e1, e2):
    L = e1[-1] - e1[0]
    if abs((e2[-1] - e2[0]) - L) > MERGE_TOL * L:
        raise ConfigError("states live in boxes of different length")
    pts = np.sort(np.concatenate([e1, e2]))
    keep = np.concatenate([[True], np.diff(pts) > MERGE_TOL * L])
    pts = pts[keep]
    pts[0], pts[-1] = e1[0], e1[-1]
    return pts


def inner_product(s1: Eigenstate, s2: Eigenstate, breakpoints=None) -> float:
    """Closed-form ``<s1|s2>`` integrated segment by segment."""
    bp = _common_breakpoints(s1.edges, s2.edges) if breakpoints is None else np.asarray(breakpoints, float)
    a1, b1 = _on_segments(s1.edges, s1.alpha[None, :], s1.beta[None, :], bp)
    a2, b2 = _on_segments(s2.edges, s2.alpha[None, :], s2.beta[None, :], bp)
    val = kernels.overlap_block(
        np.array([s1.k]), a1, b1, np.array([s2.k]), a2, b2, bp[:-1], bp[1:], DEGENERATE_TOL
    )
    return float(val[0, 0])


def _block(spec1: Spectrum, spec2: Spectrum, rows: slice, cols: slice) -> np.ndarray:
    bp = merged_breakpoints(spec1.potential, spec2.potential)
    a1, b1 = _on_segments(spec1.edges, spec1.alpha[rows], spec1.beta[rows], bp)
    a2, b2 = _on_segments(spec2.edges, spec2.alpha[cols], spec2.beta[cols], bp)
    return kernels.overlap_block(
        spec1.k[rows], a1, b1, spec2.k[cols], a2, b2, bp[:-1], bp[1:], DEGENERATE_TOL
    )


def build_overlap_matrix(
    spec1: Spectrum,
    spec2: Spectrum,
    n_rows: Optional[int] = None,
    n_cols: Optional[int] = None,
) -> OverlapMatrix:
    n_rows = len(spec1) if n_rows is None else n_rows
    n_cols = len(spec2) if n_cols is None else n_cols
    if n_rows > len(spec1) or n_cols > len(spec2):
        raise ConfigError(
            f"asked for {n_rows}x{n_cols} but spectra hold {len(spec1)} and {len(spec2)} states"
        )
    vals = _block(spec1, spec2, slice(0, n_rows), slice(0, n_cols))
    return OverlapMatrix(spec1.truncated(n_rows), spec2.truncated(n_cols), vals)


def cutoff_and_spectrum(
    spec1: Spectrum,
    spec2: Spectrum,
    n_rows: int,
    defect_tol: float,
    max_states: int = DEFAULT_MAX_STATES,
):
    """Like :func:`choose_cutoff` but also returns the (possibly grown) target spectrum."""
    if not defect_tol > 0:
        raise ConfigError(f"defect tolerance must be positive, got {defect_tol}")
    if n_rows > len(spec1):
        raise ConfigError(f"source spectrum holds only {len(spec1)} states")
    n = min(max(n_rows, len(spec2)), max_states)
    if n < n_rows:
        raise CutoffError(f"hard cap {max_states} is below the row count {n_rows}")
    spec2 = extend_spectrum(spec2, n)
    O = _block(spec1, spec2, slice(0, n_rows), slice(0, n))
    while True:
        remaining = 1.0 - np.cumsum(O**2, axis=1)
        ok = remaining < defect_tol
        if ok[:, -1].all():
            first = ok.argmax(axis=1) + 1
            return max(int(first.max()), n_rows), spec2
        if n >= max_states:
            raise CutoffError(
                f"cutoff would exceed the hard cap of {max_states} states; "
                f"worst row defect there is {remaining[:, -1].max():.3e}",
                achieved_defect=float(remaining[:, -1].max()),
                n_cols=n,
            )
        n_new = min(2 * n, max_states)
        spec2 = extend_spectrum(spec2, n_new)
        O = np.concatenate([O, _block(spec1, spec2, slice(0, n_rows), slice(n, n_new))], axis=1)
        n = n_new


def choose_cutoff(
    spec1: Spectrum,
    spec2: Spectrum,
    n_rows: int,
    defect_tol: float,
    max_states: int = DEFAULT_MAX_STATES,
) -> int:
    """Smallest column count for which every leading row is complete to ``defect_tol``.

    The target spectrum is solved further when needed. Raises
    :class:`CutoffError` when more than ``max_states`` states would be needed.
    """
    return cutoff_and_spectrum(spec1, spec2, n_rows, defect_tol, max_states)[0]
