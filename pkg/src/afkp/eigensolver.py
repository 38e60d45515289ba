"""Exact single-particle spectrum of the box with delta barriers.

Between barriers every eigenfunction is a sinusoid of the same wavenumber
``k = sqrt(2 E)``, so a state is stored as one ``(alpha, beta)`` pair per
segment, ``psi(x) = alpha sin(kx) + beta cos(kx)``.

Eigenvalues are located with a node-counting shooting function and refined by
bisection. The per-segment coefficients are then recovered as the null vector
of the linear matching system, which stays accurate for edge states that are
exponentially localized at either wall.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigError, SolverError
from .potential import PotentialSpec

DEFAULT_THETA = 0.5

_BISECT_RTOL = 1e-14
_MAX_HALVINGS = 60
_SVD_CHUNK_ELEMS = 1 << 23

#: Settings that change solved values; part of every cache key.
SOLVER_TOLERANCES = {"bisect_rtol": _BISECT_RTOL, "max_halvings": _MAX_HALVINGS}


class GapLabelWarning(UserWarning):
    """The index rule and the level-spacing check disagree about a gap state."""


@dataclass(frozen=True, eq=False)
class Eigenstate:
    """One normalized eigenfunction; ``index`` is 1-based in energy order."""

    index: int
    energy: float
    k: float
    edges: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    norm: float = 1.0

    @property
    def box_length(self) -> float:
        return float(self.edges[-1] - self.edges[0])

    @property
    def segments(self):
        return [
            (float(self.edges[s]), float(self.edges[s + 1]), (float(a), float(b)))
            for s, (a, b) in enumerate(zip(self.alpha, self.beta))
        ]

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.edges[0], self.edges[-1]
        tol = 1e-12 * (hi - lo)
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise ConfigError("evaluation point outside the box")
        seg = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.alpha) - 1)
        return x, seg

    def __call__(self, x):
        x, seg = self._locate(x)
        return self.alpha[seg] * np.sin(self.k * x) + self.beta[seg] * np.cos(self.k * x)

    def derivative(self, x, side="right"):
        """``psi'(x)``; at a barrier, the one-sided value from ``side``."""
        x, seg = self._locate(x)
        if side == "left":
            seg = np.clip(np.searchsorted(self.edges, x, side="left") - 1, 0, len(self.alpha) - 1)
        k = self.k
        return k * (self.alpha[seg] * np.cos(k * x) - self.beta[seg] * np.sin(k * x))

    def density(self, x):
        return self(x) ** 2


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Lowest eigenstates of one potential, with gap and chirality labels.

    Array attributes are indexed by 0-based position; ``state(n)`` takes the
    1-based quantum number.
    """

    potential: PotentialSpec
    k: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    norms: np.ndarray
    side_weights: np.ndarray
    labels: np.ndarray = field(default=None)
    chirality: np.ndarray = field(default=None)
    theta: float = DEFAULT_THETA

    @property
    def energies(self) -> np.ndarray:
        return 0.5 * self.k**2

    @property
    def edges(self) -> np.ndarray:
        return self.potential.edges

    def __len__(self):
        return len(self.k)

    def state(self, n: int) -> Eigenstate:
        if not 1 <= n <= len(self):
            raise IndexError(f"state {n} not in 1..{len(self)}")
        i = n - 1
        return Eigenstate(
            n, float(self.energies[i]), float(self.k[i]), self.edges,
            self.alpha[i], self.beta[i], float(self.norms[i]),
        )

    def __getitem__(self, i):
        return self.state(range(1, len(self) + 1)[i])

    def __iter__(self):
        return (self.state(n) for n in range(1, len(self) + 1))

    def truncated(self, n: int) -> "Spectrum":
        if n > len(self):
            raise ValueError(f"only {len(self)} states solved, asked for {n}")
        return Spectrum(
            self.potential, self.k[:n], self.alpha[:n], self.beta[:n],
            self.norms[:n], self.side_weights[:n],
            None if self.labels is None else self.labels[:n],
            None if self.chirality is None else self.chirality[:n],
            self.theta,
        )

    def gap_indices(self) -> list[int]:
        return [i + 1 for i, lab in enumerate(self.labels) if lab == "gap"]

    def table(self):
        """Rows ``(index, energy, k, label, side_weight, chirality)``."""
        return [
            (i + 1, float(self.energies[i]), float(self.k[i]), str(self.labels[i]),
             float(self.side_weights[i]), str(self.chirality[i]))
            for i in range(len(self))
        ]


def quantization_function(p: PotentialSpec, k: float) -> float:
    """Right-wall value of the normalized left-wall solution; zero at eigenvalues."""
    if not k > 0:
        raise ConfigError(f"wavenumber must be positive, got {k}")
    f, _ = kernels.shoot(np.array([k], float), p.widths, np.asarray(p.strengths))
    return float(f[0])


def count_below(p: PotentialSpec, k) -> np.ndarray:
    """Number of eigen-wavenumbers strictly below ``k`` (Sturm node count)."""
    _, nodes = kernels.shoot(np.atleast_1d(np.asarray(k, float)), p.widths, np.asarray(p.strengths))
    return nodes


def _ceiling(p: PotentialSpec, n: int) -> float:
    # Replacing every barrier by a hard wall can only raise each level, so the
    # n-th level of the decoupled boxes bounds k_n from above.
    m = np.arange(1, n + 1)
    cand = np.sort(np.concatenate([m * np.pi / d for d in p.widths]))
    return float(cand[n - 1]) * (1.0 + 1e-9)


def _brackets(p: PotentialSpec, first: int, last: int, k_ceiling: float, backend):
    """Intervals ``(a, b]`` each holding exactly one level, for levels first..last."""
    widths, hs = p.widths, np.asarray(p.strengths)
    L = p.box_length
    step = np.pi / (4.0 * L)
    grid = np.arange(0.5 * np.pi / L, k_ceiling + step, step)
    _, counts = backend.shoot(grid, widths, hs)
    if counts[-1] < last:
        return None
    a, b = grid[:-1], grid[1:]
    ca, cb = counts[:-1], counts[1:]
    found_a, found_b, found_n = [], [], []
    for _ in range(_MAX_HALVINGS):
        want = (cb >= first) & (ca < last) & (cb > ca)
        a, b, ca, cb = a[want], b[want], ca[want], cb[want]
        single = cb - ca == 1
        found_a.append(a[single])
        found_b.append(b[single])
        found_n.append(cb[single])
        a, b, ca, cb = a[~single], b[~single], ca[~single], cb[~single]
        if len(a) == 0:
            break
        m = 0.5 * (a + b)
        _, cm = backend.shoot(m, widths, hs)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        ca, cb = np.concatenate([ca, cm]), np.concatenate([cm, cb])
    else:
        raise SolverError("levels closer than the bracketing resolution")
    a, b, n = (np.concatenate(x) for x in (found_a, found_b, found_n))
    order = np.argsort(n)
    return a[order], b[order], n[order]


def _bisect(p: PotentialSpec, a, b, backend):
    widths, hs = p.widths, np.asarray(p.strengths)
    a, b = a.copy(), b.copy()
    fa, _ = backend.shoot(a, widths, hs)
    fb, _ = backend.shoot(b, widths, hs)
    if np.any(np.sign(fa) * np.sign(fb) > 0):
        raise SolverError("bracket without a sign change")
    for _ in range(200):
        active = (b - a) > _BISECT_RTOL * b
        if not active.any():
            break
        m = 0.5 * (a + b)
        fm, _ = backend.shoot(m, widths, hs)
        go_right = (np.sign(fm) == np.sign(fa)) & (fm != 0.0) & active
        go_left = ~go_right & active
        exact = (fm == 0.0) & active
        a = np.where(go_right, m, a)
        fa = np.where(go_right, fm, fa)
        b = np.where(go_left, m, b)
        a = np.where(exact, m, a)
    return 0.5 * (a + b)


def _matching_matrices(widths, hs, ks):
    """Stack of square systems whose null vectors are the segment amplitudes.

    Unknowns are ``(u_j, v_j)`` with ``psi = u_j cos(k s) + v_j sin(k s)`` on
    segment ``j`` (``s`` measured from its left end).
    """
    S = len(widths)
    n = len(ks)
    A = np.zeros((n, 2 * S, 2 * S))
    kd = ks[:, None] * widths[None, :]
    c, s = np.cos(kd), np.sin(kd)
    A[:, 0, 0] = 1.0
    for j in range(S - 1):
        r = 1 + 2 * j
        g = 2.0 * hs[j] / ks
        A[:, r, 2 * j] = c[:, j]
        A[:, r, 2 * j + 1] = s[:, j]
        A[:, r, 2 * j + 2] = -1.0
        A[:, r + 1, 2 * j] = -s[:, j] + g * c[:, j]
        A[:, r + 1, 2 * j + 1] = c[:, j] + g * s[:, j]
        A[:, r + 1, 2 * j + 3] = -1.0
    A[:, -1, -2] = c[:, -1]
    A[:, -1, -1] = s[:, -1]
    return A


def _local_amplitudes(p: PotentialSpec, ks):
    widths, hs = p.widths, np.asarray(p.strengths)
    S = len(widths)
    U = np.empty((len(ks), S))
    V = np.empty((len(ks), S))
    chunk = max(1, _SVD_CHUNK_ELEMS // (4 * S * S))
    for i0 in range(0, len(ks), chunk):
        sl = slice(i0, i0 + chunk)
        _, _, vt = np.linalg.svd(_matching_matrices(widths, hs, ks[sl]))
        x = vt[:, -1, :]
        # sign convention: psi'(-L/2) > 0
        x = x * np.where(x[:, 1:2] < 0, -1.0, 1.0)
        U[sl], V[sl] = x[:, 0::2], x[:, 1::2]
    return U, V


def _square_integral(k, alpha, beta, lo, hi):
    """Integral of ``(alpha sin kx + beta cos kx)^2`` over ``[lo, hi]``, per segment."""
    k = np.asarray(k, float)[:, None]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    f = 2.0 * k
    sh = np.sin(f * half) / f
    icos = 2.0 * np.cos(f * mid) * sh
    isin = 2.0 * np.sin(f * mid) * sh
    return (
        0.5 * (alpha**2 + beta**2) * (2.0 * half)
        + 0.5 * (beta**2 - alpha**2) * icos
        + alpha * beta * isin
    )


def _side_weights(edges, k, alpha, beta):
    # right-minus-left probability, splitting the segment that contains 0
    lo, hi = edges[:-1], edges[1:]
    right_lo = np.maximum(lo, 0.0)
    left_hi = np.minimum(hi, 0.0)
    w_right = np.where(hi > 0.0, _square_integral(k, alpha, beta, right_lo, np.maximum(hi, 0.0)), 0.0)
    w_left = np.where(lo < 0.0, _square_integral(k, alpha, beta, np.minimum(lo, 0.0), left_hi), 0.0)
    return w_right.sum(axis=1) - w_left.sum(axis=1)


def _solve_levels(p: PotentialSpec, first: int, last: int, backend):
    k_ceiling = _ceiling(p, last)
    for _ in range(6):
        br = _brackets(p, first, last, k_ceiling, backend)
        if br is not None and len(br[2]) == last - first + 1:
            break
        k_ceiling *= 1.5
    else:
        raise SolverError(f"found fewer than {last} levels below k={k_ceiling:.6g}")
    a, b, n = br
    if not np.array_equal(n, np.arange(first, last + 1)):
        raise SolverError("level bracketing lost track of indices")
    return _bisect(p, a, b, backend)


def _states_from_k(p: PotentialSpec, ks):
    U, V = _local_amplitudes(p, ks)
    edges = p.edges
    x0 = edges[:-1][None, :]
    kk = ks[:, None]
    widths = p.widths[None, :]
    kd = kk * widths
    norm2 = (
        U**2 * (0.5 * widths + np.sin(2 * kd) / (4 * kk))
        + V**2 * (0.5 * widths - np.sin(2 * kd) / (4 * kk))
        + U * V * np.sin(kd) ** 2 / kk
    ).sum(axis=1)
    scale = 1.0 / np.sqrt(norm2)
    U = U * scale[:, None]
    V = V * scale[:, None]
    alpha = U * np.sin(kk * x0) + V * np.cos(kk * x0)
    beta = U * np.cos(kk * x0) - V * np.sin(kk * x0)
    sw = _side_weights(edges, ks, alpha, beta)
    return alpha, beta, scale, sw


def solve_spectrum(
    p: PotentialSpec,
    n_states: int,
    theta: float = DEFAULT_THETA,
    backend: Optional[str] = None,
) -> Spectrum:
    """Lowest ``n_states`` normalized eigenstates of ``p``, classified."""
    if n_states < 1:
        raise ConfigError(f"n_states must be >= 1, got {n_states}")
    kb = kernels.get_backend(backend)
    ks = _solve_levels(p, 1, n_states, kb)
    return _assemble(p, ks, theta)


def extend_spectrum(spec: Spectrum, n_states: int, backend: Optional[str] = None) -> Spectrum:
    """Return ``spec`` grown to ``n_states`` levels, solving only the new ones."""
    if n_states <= len(spec):
        return spec
    kb = kernels.get_backend(backend)
    new_k = _solve_levels(spec.potential, len(spec) + 1, n_states, kb)
    return _assemble(spec.potential, np.concatenate([spec.k, new_k]), spec.theta, reuse=spec)


def _assemble(p, ks, theta, reuse=None):
    if np.any(np.diff(ks) <= 0):
        raise SolverError("eigenvalues not strictly increasing")
    if reuse is None:
        alpha, beta, norms, sw = _states_from_k(p, ks)
    else:
        n0 = len(reuse)
        a2, b2, n2, s2 = _states_from_k(p, ks[n0:])
        alpha = np.concatenate([reuse.alpha, a2])
        beta = np.concatenate([reuse.beta, b2])
        norms = np.concatenate([reuse.norms, n2])
        sw = np.concatenate([reuse.side_weights, s2])
    spec = Spectrum(p, ks, alpha, beta, norms, sw)
    return classify_states(spec, theta)


def side_weight(state: Eigenstate) -> float:
    """Probability in the right half minus probability in the left half."""
    return float(
        _side_weights(state.edges, np.array([state.k]), state.alpha[None, :], state.beta[None, :])[0]
    )


def _lattice_period(p: PotentialSpec) -> int:
    if p.shift is not None:
        return p.shift.M
    return p.n_barriers


def classify_states(spec: Spectrum, theta: float = DEFAULT_THETA) -> Spectrum:
    """Fill band/gap labels and chirality.

    A state is labeled ``gap`` when its index is a multiple of the barrier
    count (and the potential is not free). The labels are cross-checked
    against level spacings: a gap state should be separated from both
    neighbours by more than the median spacing of the adjacent bands. A
    mismatch raises a :class:`GapLabelWarning`, it never changes the label.
    """
    if not 0 < theta < 1:
        raise ConfigError(f"chirality threshold must lie in (0, 1), got {theta}")
    n = len(spec)
    M = _lattice_period(spec.potential)
    labels = np.full(n, "band", dtype=object)
    if M > 0 and not spec.potential.is_free:
        labels[M - 1 :: M] = "gap"
        E = spec.energies
        spacing = np.diff(E)
        bad = []
        for i in range(M - 1, n - 1, M):
            lo, hi = max(0, i - M + 1), min(len(spacing), i + M - 1)
            local = np.concatenate([spacing[lo : i - 1], spacing[i + 1 : hi]])
            if len(local) == 0:
                continue
            ref = np.median(local)
            if not (spacing[i - 1] > ref and spacing[i] > ref):
                bad.append(i + 1)
        if bad:
            head = ", ".join(map(str, bad[:6])) + (", ..." if len(bad) > 6 else "")
            warnings.warn(
                f"{len(bad)} gap-indexed states ({head}) are not isolated in energy",
                GapLabelWarning, stacklevel=2,
            )
    sw = spec.side_weights
    chir = np.where(sw < -theta, "left", np.where(sw > theta, "right", "delocalized")).astype(object)
    return replace(spec, labels=labels, chirality=chir, theta=theta)


def evaluate_density(state: Eigenstate, grid) -> np.ndarray:
    """``|psi(x)|^2`` on ``grid``; raises for points outside the box."""
    return state.density(grid)
