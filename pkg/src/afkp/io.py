"""Tabular output with metadata headers, and the on-disk spectrum cache.

Every table is plain whitespace-separated text. The header is a block of
``# key: value`` lines followed by ``# columns: ...``; the same metadata is
written as a JSON sidecar next to the table. Both are written atomically
and contain no wall-clock data, so identical inputs give identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .eigensolver import SOLVER_TOLERANCES, Spectrum, classify_states, extend_spectrum, solve_spectrum
from .errors import ConfigError
from .potential import PotentialSpec

CACHE_SCHEMA = "afkp-spectrum-v1"
CACHE_ENV = "AFKP_CACHE_DIR"


def _package_version() -> str:
    from . import __version__

    return __version__


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temporary file in the target directory, then rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise ConfigError(f"cannot write to {path.parent}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".15e")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence], meta: dict) -> Path:
    """Write ``rows`` under a commented header and a ``.json`` sidecar.

    Returns the table path.
    """
    path = Path(path)
    meta = dict(meta)
    meta.setdefault("afkp_version", _package_version())
    lines = [f"# {k}: {json.dumps(_jsonable(meta[k]), sort_keys=True)}" for k in sorted(meta)]
    lines.append("# columns: " + " ".join(columns))
    n_rows = 0
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        lines.append(" ".join(_fmt(v) for v in row))
        n_rows += 1
    atomic_write(path, ("\n".join(lines) + "\n").encode())
    sidecar = {"table": path.name, "columns": list(columns), "rows": n_rows,
               "meta": _jsonable(meta)}
    atomic_write(path.with_suffix(path.suffix + ".json"),
                 (json.dumps(sidecar, sort_keys=True, indent=2) + "\n").encode())
    return path


def read_table(path):
    """Inverse of :func:`write_table`: ``(meta, columns, rows)`` with string fields."""
    meta, columns, rows = {}, [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# columns: "):
            columns = line[len("# columns: "):].split()
        elif line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = json.loads(val)
        elif line.strip():
            rows.append(line.split())
    return meta, columns, rows


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "afkp"


def cache_key(p: PotentialSpec, n_states: Optional[int] = None) -> str:
    """SHA-256 of the serialized potential, the solver tolerances and ``n_states``."""
    payload = {"schema": CACHE_SCHEMA, "potential": p.serialize(),
               "tolerances": SOLVER_TOLERANCES, "n_states": n_states}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class SpectrumCache:
    """Write-once store of solved spectra.

    Entries live at ``<dir>/<family>/<n_states>.npz``; ``family`` hashes the
    potential and tolerances, and the full key (including ``n_states``) is
    stored in the file and checked on load. A request is served by the
    smallest entry holding at least the requested number of states.
    """

    def __init__(self, directory=None, enabled: bool = True):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.enabled = enabled
        self.hits = 0
        self.misses = 0

    def _family(self, p: PotentialSpec) -> Path:
        return self.directory / cache_key(p)[:32]

    def _load(self, path: Path, p: PotentialSpec, n: int) -> Optional[Spectrum]:
        try:
            with np.load(path, allow_pickle=False) as z:
                if str(z["schema"]) != CACHE_SCHEMA or str(z["key"]) != cache_key(p, n):
                    return None
                k, alpha, beta = z["k"], z["alpha"], z["beta"]
                norms, sw = z["norms"], z["side_weights"]
        except (OSError, KeyError, ValueError):
            return None
        return Spectrum(p, k, alpha, beta, norms, sw)

    def lookup(self, p: PotentialSpec, n_states: int, theta: float) -> Optional[Spectrum]:
        if not self.enabled:
            return None
        fam = self._family(p)
        if not fam.is_dir():
            return None
        sizes = sorted(int(f.stem) for f in fam.glob("*.npz") if f.stem.isdigit())
        for n in sizes:
            if n >= n_states:
                spec = self._load(fam / f"{n}.npz", p, n)
                if spec is not None:
                    return classify_states(spec.truncated(n_states) if n > n_states else spec, theta)
        return None

    def largest(self, p: PotentialSpec, theta: float) -> Optional[Spectrum]:
        """The biggest cached spectrum of ``p``, if any."""
        if not self.enabled or not self._family(p).is_dir():
            return None
        sizes = sorted((int(f.stem) for f in self._family(p).glob("*.npz") if f.stem.isdigit()),
                       reverse=True)
        for n in sizes:
            spec = self._load(self._family(p) / f"{n}.npz", p, n)
            if spec is not None:
                return classify_states(spec, theta)
        return None

    def store(self, spec: Spectrum) -> None:
        if not self.enabled:
            return
        n = len(spec)
        path = self._family(spec.potential) / f"{n}.npz"
        if path.exists():
            return
        buf = io.BytesIO()
        np.savez(buf, schema=CACHE_SCHEMA, key=cache_key(spec.potential, n), k=spec.k,
                 alpha=spec.alpha, beta=spec.beta, norms=spec.norms,
                 side_weights=spec.side_weights)
        atomic_write(path, buf.getvalue())

    def get(self, p: PotentialSpec, n_states: int, theta: float) -> Spectrum:
        """Cached spectrum with ``n_states`` levels, solving and storing on a miss."""
        spec = self.lookup(p, n_states, theta)
        if spec is not None:
            self.hits += 1
            return spec
        self.misses += 1
        base = self.largest(p, theta)
        spec = extend_spectrum(base, n_states) if base is not None else solve_spectrum(p, n_states, theta)
        if len(spec) > n_states:
            spec = classify_states(spec.truncated(n_states), theta)
        self.store(spec)
        return spec
