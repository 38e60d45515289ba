"""Backend selection for the hot kernels.

The compiled extension ``afkp._kernels`` is used when it imports; otherwise,
or when ``AFKP_BACKEND=python`` is set, the numpy fallback is used.
"""

import os
from contextlib import contextmanager

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}"
        ) from None


def _select():
    want = os.environ.get("AFKP_BACKEND", "").strip().lower()
    if want:
        return want, get_backend(want)
    if _compiled is not None:
        return "cython", _compiled
    return "python", _kernels_py


BACKEND, _active = _select()


def set_backend(name):
    """Make ``name`` the active backend for subsequent calls."""
    global BACKEND, _active
    _active = get_backend(name)
    BACKEND = name


@contextmanager
def using(name):
    """Temporarily switch the active backend."""
    previous = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def shoot(ks, widths, strengths):
    return _active.shoot(ks, widths, strengths)


def overlap_block(k1, a1, b1, k2, a2, b2, lo, hi, degenerate_tol=1e-8):
    return _active.overlap_block(k1, a1, b1, k2, a2, b2, lo, hi, degenerate_tol)
