"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same two functions with identical signatures and
results (to rounding); ``afkp.kernels`` picks one at import time.
"""

import numpy as np

_CHUNK_ELEMS = 1 << 22


def shoot(ks, widths, strengths):
    """Propagate the left-wall solution to the right wall for every ``k``.

    The unit state vector ``(psi, psi'/k) = (sin theta, cos theta)`` is carried
    as a Pruefer angle ``theta = cell * pi + phi`` with integer ``cell`` and
    ``phi`` in ``[0, pi)``. A free segment of width ``d`` advances ``theta`` by
    ``k d``; a barrier adds ``2 h psi / k`` to the second component, which
    moves ``phi`` inside its cell. Keeping both outputs on one angle makes
    the sign of ``psi`` and the node count agree exactly.

    Returns
    -------
    values : ndarray
        ``psi`` at the right wall of the normalized state vector.
    nodes : ndarray of int64
        Interior zeros of ``psi``, i.e. the number of eigenvalues below ``k``.
    """
    ks = np.asarray(ks, dtype=float)
    widths = np.asarray(widths, dtype=float)
    strengths = np.asarray(strengths, dtype=float)
    phi = np.zeros_like(ks)
    cell = np.zeros(ks.shape, dtype=np.int64)
    last = len(widths) - 1
    for j, d in enumerate(widths):
        t = phi + ks * d
        n = np.floor(t / np.pi)
        phi = np.maximum(t - n * np.pi, 0.0)
        cell += n.astype(np.int64)
        wrap = phi >= np.pi
        phi = np.where(wrap, 0.0, phi)
        cell += wrap
        if j < last:
            s = np.sin(phi)
            phi = np.arctan2(s, np.cos(phi) + (2.0 * strengths[j] / ks) * s)
            wrap = phi >= np.pi
            phi = np.where(wrap, 0.0, phi)
            cell += wrap
    values = np.where(cell % 2 == 0, 1.0, -1.0) * np.sin(phi)
    # a zero exactly on the right wall is the eigenvalue itself, not below it
    nodes = cell - (phi == 0.0)
    return values, nodes


def _int_cos(q, mid, half):
    # integral of cos(q x) over [mid - half, mid + half], stable as q -> 0
    with np.errstate(invalid="ignore", divide="ignore"):
        sh = np.where(q == 0.0, half, np.sin(q * half) / np.where(q == 0.0, 1.0, q))
    return 2.0 * np.cos(q * mid) * sh


def _int_sin(q, mid, half):
    with np.errstate(invalid="ignore", divide="ignore"):
        sh = np.where(q == 0.0, half, np.sin(q * half) / np.where(q == 0.0, 1.0, q))
    return 2.0 * np.sin(q * mid) * sh


def overlap_block(k1, a1, b1, k2, a2, b2, lo, hi, degenerate_tol=1e-8):
    """Closed-form ``<psi1_i | psi2_j>`` summed over common segments.

    On segment ``s`` state ``i`` of the first set is
    ``a1[i, s] sin(k1[i] x) + b1[i, s] cos(k1[i] x)``, likewise for the
    second set. Segment ``s`` spans ``[lo[s], hi[s]]``. When
    ``|k1 - k2| < degenerate_tol * k1`` the difference frequency is taken as
    exactly zero (equal-frequency antiderivative).
    """
    k1 = np.asarray(k1, float)
    k2 = np.asarray(k2, float)
    a1 = np.asarray(a1, float)
    b1 = np.asarray(b1, float)
    a2 = np.asarray(a2, float)
    b2 = np.asarray(b2, float)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    n1, n2, nseg = len(k1), len(k2), len(lo)
    out = np.empty((n1, n2))
    step = max(1, _CHUNK_ELEMS // max(1, n2 * nseg))
    for i0 in range(0, n1, step):
        sl = slice(i0, i0 + step)
        K1 = k1[sl, None, None]
        K2 = k2[None, :, None]
        q = K1 - K2
        q = np.where(np.abs(q) < degenerate_tol * K1, 0.0, q)
        p = K1 + K2
        A1 = a1[sl, None, :]
        B1 = b1[sl, None, :]
        A2 = a2[None, :, :]
        B2 = b2[None, :, :]
        seg = (
            (A1 * A2 + B1 * B2) * _int_cos(q, mid, half)
            + (B1 * B2 - A1 * A2) * _int_cos(p, mid, half)
            + (A1 * B2 + B1 * A2) * _int_sin(p, mid, half)
            + (A1 * B2 - B1 * A2) * _int_sin(q, mid, half)
        )
        out[sl] = 0.5 * seg.sum(axis=-1)
    return out
