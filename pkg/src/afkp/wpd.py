"""Work probability distribution of a sudden quench.

A post-quench eigenstate is a Slater determinant over a set of final
orbitals. Its weight in the initial Fermi sea is the squared determinant of
the overlap submatrix with rows ``1..N`` and the configuration's columns.

Enumeration is organized by excitation order ``p``: ``p`` of the ``N`` lowest
final orbitals are left empty and ``p`` orbitals above ``N`` are filled.
With ``G = B0^{-1} B`` (``B0`` the leading ``N x N`` block) every such weight
is ``det(B0)^2 det(G[holes, particles])^2``, a ``p x p`` determinant.
The total weight of every excitation order follows in closed form from
Cauchy-Binet, so the captured probability does not depend on how many
entries are listed.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from math import comb
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh

from .eigensolver import Spectrum
from .errors import BudgetExceeded, ConfigError
from .manybody import SurvivalTrace
from .overlaps import OverlapMatrix

DEFAULT_ORDER_CAP = 3
DEFAULT_PROB_FLOOR = 1e-8
DEFAULT_MAX_CONFIGS = 50_000_000
DEFAULT_TARGET_DEFECT = 1e-3
CHIRAL_THRESHOLD = 0.05
DEGENERATE_ENERGY_TOL = 1e-9

SYMBOLS = {"ground": "o", "single": "*", "double": "[]", "higher": "<>"}

_COND_LIMIT = 1e10
_BATCH = 1 << 18


@dataclass(frozen=True)
class Configuration:
    """One post-quench Slater determinant; ``occupied`` holds 1-based orbital indices."""

    occupied: tuple
    energy: float
    probability: float
    order: int
    is_ground: bool
    kind: str = ""
    chiral: Optional[bool] = None
    side_imbalance: Optional[float] = None

    @property
    def symbol(self) -> str:
        return SYMBOLS.get(self.kind, "?")

    def encode(self) -> str:
        return ",".join(map(str, self.occupied))


@dataclass(frozen=True, eq=False)
class WpdResult:
    entries: list
    captured: float
    n_enumerated: int
    N: int
    E0: float
    fermi_energy: float
    params: dict = field(default_factory=dict)

    @property
    def defect(self) -> float:
        return 1.0 - self.captured

    def top(self, m: int) -> list:
        return self.entries[:m]


def _order_of(occupied, N):
    return N - sum(1 for l in occupied if l <= N)


def _kind(order):
    return {0: "ground", 1: "single", 2: "double"}.get(order, "higher")


def configuration_probability(O, occupied: Sequence[int], N: int) -> float:
    """``det(O[1..N, occupied])^2`` with 1-based column indices."""
    vals = O.values if isinstance(O, OverlapMatrix) else np.asarray(O, float)
    occ = [int(l) for l in occupied]
    if len(occ) != N:
        raise ConfigError(f"configuration has {len(occ)} orbitals, need {N}")
    if len(set(occ)) != N:
        raise ConfigError("configuration repeats an orbital")
    if min(occ) < 1 or max(occ) > vals.shape[1] or N > vals.shape[0]:
        raise ConfigError("orbital index outside the overlap matrix")
    sub = vals[:N, np.asarray(occ) - 1]
    sign, logabs = np.linalg.slogdet(sub)
    return float(np.exp(2.0 * logabs)) if sign != 0 else 0.0


def classify_configuration(
    cfg: Configuration, spec2: Spectrum, N: Optional[int] = None,
    threshold: float = CHIRAL_THRESHOLD,
) -> Configuration:
    """Fill excitation order, symbol class and chirality flag.

    The chirality flag marks configurations whose total density is lopsided:
    ``|sum of orbital side weights| / N > threshold``.
    """
    N = len(cfg.occupied) if N is None else N
    order = _order_of(cfg.occupied, N)
    sw = float(np.sum(spec2.side_weights[np.asarray(cfg.occupied) - 1]))
    return replace(
        cfg, order=order, is_ground=order == 0, kind=_kind(order),
        side_imbalance=sw / N, chiral=bool(abs(sw) / N > threshold),
    )


def sector_masses(B: np.ndarray, N: int) -> np.ndarray:
    """Total weight of each excitation order among the columns of ``B``.

    By Cauchy-Binet ``det(B W B^T)`` with ``W = diag(1, .., 1, x, .., x)``
    (``x`` on columns above ``N``) is ``sum_m P_m x^order(m)`` over every
    configuration inside the cutoff. Writing ``B W B^T = S + (x - 1) A``
    with ``S = B B^T`` and ``A`` the part from columns above ``N`` gives
    ``det(S) prod_i (1 - t_i + t_i x)``, ``t_i`` the eigenvalues of the
    pencil ``(A, S)``. Entry ``p`` of the result is the mass of order ``p``.
    """
    B = np.asarray(B, dtype=float)
    S = B @ B.T
    above = B[:, N:]
    A = above @ above.T
    sign, logdet = np.linalg.slogdet(S)
    out = np.zeros(N + 1)
    if sign <= 0:
        return out
    t = np.clip(eigh(A, S, eigvals_only=True), 0.0, 1.0)
    poly = np.array([1.0])
    for ti in t:
        poly = np.convolve(poly, [1.0 - ti, ti])
    return np.exp(logdet) * poly


def _bounded_combos(c, p, tau):
    # index tuples i1 < .. < ip into the descending array c with prod c >= tau
    if p == 0:
        return np.zeros((1, 0), dtype=np.int64)
    neg = -c
    n = len(c)
    combos = np.zeros((1, 0), dtype=np.int64)
    prods = np.ones(1)
    for depth in range(p):
        r = p - depth
        start = combos[:, -1] + 1 if depth else np.zeros(1, dtype=np.int64)
        # remaining factors are at most c[j], so prod * c[j]**r must reach tau
        with np.errstate(divide="ignore"):
            need = (tau / prods) ** (1.0 / r)
        stop = np.searchsorted(neg, -need, side="right")
        stop = np.minimum(stop, n - r + 1)
        counts = np.maximum(stop - start, 0)
        total = int(counts.sum())
        if total == 0:
            return np.zeros((0, p), dtype=np.int64)
        owner = np.repeat(np.arange(len(combos)), counts)
        offset = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        nxt = start[owner] + offset
        combos = np.column_stack([combos[owner], nxt])
        prods = prods[owner] * c[nxt]
    return combos


def _minor_dets(Gh, parts):
    # determinants of Gh[:, parts[c]] for every particle combination c
    p = Gh.shape[0]
    if p == 1:
        return Gh[0, parts[:, 0]]
    if p == 2:
        a, b = parts[:, 0], parts[:, 1]
        return Gh[0, a] * Gh[1, b] - Gh[0, b] * Gh[1, a]
    if p == 3:
        a, b, c = (Gh[:, parts[:, i]] for i in range(3))
        return (a[0] * (b[1] * c[2] - b[2] * c[1])
                - b[0] * (a[1] * c[2] - a[2] * c[1])
                + c[0] * (a[1] * b[2] - a[2] * b[1]))
    return np.linalg.det(Gh[:, parts].transpose(1, 0, 2))


def _direct_dets(B, holes, parts, N):
    keep = np.setdiff1d(np.arange(N), holes)
    occ = np.concatenate(
        [np.broadcast_to(keep, (len(parts), len(keep))), parts + N], axis=1
    )
    return np.linalg.det(B[:, occ].transpose(1, 0, 2))


def _default_cutoff(spec2, N):
    pot = spec2.potential
    M = pot.shift.M if pot.shift is not None else pot.n_barriers
    return N + 2 * M


def raise_caps(O: OverlapMatrix, N: int, order_cap: int, orbital_cutoff: int,
               target_defect: float, n_max: Optional[int] = None) -> tuple:
    """Grow ``(order_cap, orbital_cutoff)`` until the captured mass reaches
    ``1 - target_defect`` or the overlap matrix is exhausted.

    Each step takes whichever of "one more order" or "twice the orbitals"
    gains more mass, so the defect decreases monotonically.
    """
    vals = O.values[:N]
    n_max = vals.shape[1] if n_max is None else min(n_max, vals.shape[1])

    def mass(cap, cut):
        return float(sector_masses(vals[:, :cut], N)[: cap + 1].sum())

    cur = mass(order_cap, orbital_cutoff)
    while 1.0 - cur > target_defect:
        options = []
        if order_cap < min(N, orbital_cutoff - N):
            options.append((mass(order_cap + 1, orbital_cutoff), order_cap + 1, orbital_cutoff))
        if orbital_cutoff < n_max:
            cut = min(2 * orbital_cutoff, n_max)
            options.append((mass(order_cap, cut), order_cap, cut))
        if not options:
            warnings.warn(
                f"captured probability stalls at {cur:.6f} with {n_max} orbitals; "
                "supply a wider overlap matrix",
                RuntimeWarning, stacklevel=2,
            )
            break
        cur, order_cap, orbital_cutoff = max(options)
    return order_cap, orbital_cutoff


def enumerate_wpd(
    O: OverlapMatrix,
    spec2: Spectrum,
    N: int,
    order_cap: int = DEFAULT_ORDER_CAP,
    orbital_cutoff: Optional[int] = None,
    prob_floor: float = DEFAULT_PROB_FLOOR,
    max_configs: int = DEFAULT_MAX_CONFIGS,
    chiral_threshold: float = CHIRAL_THRESHOLD,
    target_defect: Optional[float] = DEFAULT_TARGET_DEFECT,
) -> WpdResult:
    """Configurations with at most ``order_cap`` promoted particles.

    Parameters
    ----------
    O : OverlapMatrix
        Initial-by-final overlaps with at least ``N`` rows and
        ``orbital_cutoff`` columns.
    spec2 : Spectrum
        Final spectrum, for energies and side weights.
    N : int
        Particle number.
    order_cap, orbital_cutoff : int
        Excitation order and orbital index limits. ``orbital_cutoff``
        defaults to ``N + 2 M``.
    prob_floor : float
        Entries below this are left out of the listing. They still count
        toward ``captured``, which is the exact total of the enumerated
        sector (see :func:`sector_masses`).
    max_configs : int
        Budget on the number of determinants evaluated.
    target_defect : float or None
        The caps are first raised by :func:`raise_caps` until the captured
        probability reaches ``1 - target_defect``, as far as the columns of
        ``O`` allow. ``None`` enumerates exactly the requested sector.

    Notes
    -----
    Only configurations whose weight can reach ``prob_floor`` are evaluated:
    ``|det G[H, P]|`` is bounded by the product of the column norms of ``G``.
    """
    if orbital_cutoff is None:
        orbital_cutoff = _default_cutoff(spec2, N)
    if orbital_cutoff < N:
        raise ConfigError("orbital cutoff must be at least N")
    if order_cap < 1:
        raise ConfigError("order cap must be at least 1")
    if orbital_cutoff > O.shape[1] or orbital_cutoff > len(spec2) or N > O.shape[0]:
        raise ConfigError(
            f"overlap matrix {O.shape} / spectrum ({len(spec2)}) too small for "
            f"N={N}, cutoff={orbital_cutoff}"
        )
    if target_defect is not None:
        order_cap, orbital_cutoff = raise_caps(
            O, N, order_cap, orbital_cutoff, target_defect, len(spec2)
        )
    n_above = orbital_cutoff - N
    order_cap = min(order_cap, N, n_above)

    B = O.values[:N, :orbital_cutoff]
    captured = float(sector_masses(B, N)[: order_cap + 1].sum())
    B0 = B[:, :N]
    sign0, logdet0 = np.linalg.slogdet(B0)
    use_minors = sign0 != 0 and np.linalg.cond(B0) < _COND_LIMIT

    if use_minors:
        det0_sq = float(np.exp(2.0 * logdet0))
        G = np.linalg.solve(B0, B[:, N:])
        order = np.argsort(-np.linalg.norm(G, axis=0), kind="stable")
        cnorm = np.linalg.norm(G, axis=0)[order]
        tau = np.sqrt(prob_floor / det0_sq)
        plan = [(p, order[_bounded_combos(cnorm, p, tau)]) for p in range(order_cap + 1)]
    else:
        plan = [(p, _pair_index(n_above, p)) for p in range(order_cap + 1)]
    budget = sum(comb(N, p) * len(parts) for p, parts in plan)
    if budget > max_configs:
        raise BudgetExceeded(
            f"{budget} configurations exceed the budget of {max_configs}; "
            "lower order_cap or orbital_cutoff, or raise prob_floor"
        )

    e2 = spec2.energies[:orbital_cutoff]
    ground_E = float(e2[:N].sum())
    kept = []
    for p, parts_all in plan:
        if len(parts_all) == 0:
            continue
        for holes in itertools.combinations(range(N), p):
            holes = np.asarray(holes, dtype=np.int64)
            for c0 in range(0, len(parts_all), _BATCH):
                parts = parts_all[c0 : c0 + _BATCH]
                if p == 0:
                    probs = np.array([float(np.exp(2.0 * logdet0)) if sign0 else 0.0])
                elif use_minors:
                    probs = det0_sq * _minor_dets(G[holes], parts) ** 2
                else:
                    probs = _direct_dets(B, holes, parts, N) ** 2
                hit = np.nonzero(probs >= prob_floor)[0]
                if len(hit):
                    energy = ground_E - e2[holes].sum() + e2[parts[hit] + N].sum(axis=1)
                    for i, P, E in zip(hit, probs[hit], energy):
                        kept.append((float(P), float(E), holes, parts[i]))

    entries = []
    base = np.arange(N)
    for P, E, holes, parts in kept:
        occ = np.sort(np.concatenate([np.setdiff1d(base, holes), parts + N])) + 1
        cfg = Configuration(tuple(int(i) for i in occ), E, P, len(parts), len(parts) == 0)
        entries.append(classify_configuration(cfg, spec2, N, chiral_threshold))
    entries.sort(key=lambda c: (-c.probability, c.energy, c.occupied))
    return WpdResult(
        entries, captured, budget, N, float(O.source.energies[:N].sum()),
        float(spec2.energies[N - 1]),
        {"order_cap": order_cap, "orbital_cutoff": orbital_cutoff,
         "prob_floor": prob_floor, "chiral_threshold": chiral_threshold},
    )


def _pair_index(n, p):
    # every p-subset of range(n), one per row
    if p == 0:
        return np.zeros((1, 0), dtype=np.int64)
    count = comb(n, p)
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n), p)),
        dtype=np.int64, count=count * p,
    )
    return flat.reshape(count, p)


def reconstruct_survival(entries: Sequence[Configuration], E0: float, times,
                         fermi_energy: float = float("nan"),
                         normalize: bool = False) -> SurvivalTrace:
    """``nu(t) = sum_m P_m exp(-i (E'_m - E0) t)`` over the given entries.

    The phase sign matches :func:`afkp.manybody.dynamic_overlap`; ``|nu|^2``
    is independent of it. With ``normalize`` the sum is divided by
    ``sum_m P_m`` so that ``nu(0) = 1``; the default is the bare sum.
    """
    if not entries:
        raise ConfigError("need at least one configuration")
    times = np.asarray(times, dtype=float)
    P = np.array([c.probability for c in entries])
    W = np.array([c.energy for c in entries]) - E0
    nu = np.exp(-1j * np.outer(times, W)) @ P
    if normalize:
        nu = nu / P.sum()
    meta = {"used": [c.encode() for c in entries], "sum_P": float(P.sum()),
            "normalized": normalize}
    return SurvivalTrace(times, nu, len(entries[0].occupied), fermi_energy,
                         len(entries), float(1.0 - P.sum()), meta)


def wpd_histogram(result: WpdResult, E0: Optional[float] = None,
                  E_F: Optional[float] = None, merge_degenerate: bool = False):
    """Stem data ``(W / E_F, P, kind, chiral)`` sorted by work.

    With ``merge_degenerate`` entries whose energies agree to
    ``DEGENERATE_ENERGY_TOL`` are summed into one stem (class and chirality
    taken from the heaviest member).
    """
    E0 = result.E0 if E0 is None else E0
    E_F = result.fermi_energy if E_F is None else E_F
    stems = sorted(
        ((c.energy - E0) / E_F, c.probability, c.kind, bool(c.chiral), c.energy)
        for c in result.entries
    )
    if merge_degenerate:
        merged = []
        for w, P, kind, chiral, E in stems:
            if merged and abs(E - merged[-1][4]) < DEGENERATE_ENERGY_TOL * max(1.0, abs(E)):
                pw, pP, pk, pc, pE = merged[-1]
                if P > pP:
                    pk, pc = kind, chiral
                merged[-1] = (pw, pP + P, pk, pc, pE)
            else:
                merged.append((w, P, kind, chiral, E))
        stems = merged
    return [(w, P, kind, chiral) for w, P, kind, chiral, _ in stems]
