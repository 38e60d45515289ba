"""Command-line driver: ``afkp <command> [--config run.json] [--field value ...]``.

Commands write plain-text tables (see :mod:`afkp.io`) into the output
directory and print the paths they wrote. Exit codes: 0 success, 1 a
``validate`` check failed, 2 configuration or I/O error, 3 solver failure,
4 budget or cutoff exceeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from .eigensolver import SOLVER_TOLERANCES
from .errors import AFKPError, BudgetExceeded, ConfigError, SolverError
from .io import SpectrumCache, write_table
from .manybody import (
    FermiSea, dynamic_overlap, fermi_time_grid, integrated_density, oc_exponent_fit,
)
from .overlaps import build_overlap_matrix, inner_product
from .potential import PotentialSpec, lattice
from .wpd import enumerate_wpd, reconstruct_survival, wpd_histogram

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_BUDGET = 4


@dataclass
class RunConfig:
    """Every knob of a run. JSON config keys and ``--flags`` use these names."""

    L: float = 10.0
    M: int = 10
    h: float = 50.0
    barriers: Optional[list] = None
    deltas: list = field(default_factory=lambda: [0.0, 0.04, 0.3, 0.4])
    delta_range: Optional[list] = None
    quench: list = field(default_factory=lambda: [[0.0, 0.04]])
    N: list = field(default_factory=lambda: [10])
    N_range: Optional[list] = None
    n_states: int = 60
    time_span: float = 20.0
    time_samples: int = 2001
    defect_tol: float = 1e-8
    max_states: int = 20000
    theta: float = 0.5
    chiral_threshold: float = 0.05
    prob_floor: float = 1e-8
    order_cap: int = 3
    orbital_cutoff: Optional[int] = None
    wpd_target_defect: float = 1e-3
    wpd_columns: int = 2000
    max_configs: int = 50_000_000
    top_m: Optional[int] = None
    density_points: int = 2001
    map: bool = False
    merge_degenerate: bool = False
    oracle_cells: int = 16000
    oracle_pairs: int = 20
    seed: int = 0
    output_dir: str = "afkp-out"
    cache_dir: Optional[str] = None
    no_cache: bool = False
    workers: int = 1

    def validate(self) -> "RunConfig":
        positive = ("L", "time_span", "defect_tol", "prob_floor", "chiral_threshold",
                    "wpd_target_defect")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.theta < 1:
            raise ConfigError("theta must lie in (0, 1)")
        for name in ("M", "n_states", "time_samples", "order_cap", "wpd_columns",
                     "max_states", "max_configs", "density_points", "oracle_cells",
                     "oracle_pairs", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.h < 0:
            raise ConfigError("h must be non-negative")
        if any(n < 1 for n in self.particle_numbers()):
            raise ConfigError("particle numbers must be >= 1")
        ds = list(self.delta_list()) + [d for pair in self.quench for d in pair]
        if any(not -1.0 <= d <= 1.0 for d in ds):
            raise ConfigError("shifts must lie in [-1, 1]")
        if any(len(pair) != 2 for pair in self.quench):
            raise ConfigError("each quench entry is a (delta1, delta2) pair")
        return self

    def delta_list(self) -> list:
        if self.delta_range is None:
            return [float(d) for d in self.deltas]
        start, stop, step = self.delta_range
        if not step > 0:
            raise ConfigError("delta_range step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]

    def particle_numbers(self) -> list:
        if self.N_range is None:
            return sorted({int(n) for n in self.N})
        lo, hi = self.N_range
        return list(range(int(lo), int(hi) + 1))

    def potential(self, delta: float) -> PotentialSpec:
        if self.barriers:
            ys, hs = zip(*self.barriers)
            return PotentialSpec(self.L, tuple(float(y) for y in ys), tuple(float(v) for v in hs))
        return lattice(self.L, self.M, self.h, delta)

    def cache(self) -> SpectrumCache:
        return SpectrumCache(self.cache_dir, enabled=not self.no_cache)

    def physical_meta(self) -> dict:
        meta = {"L": self.L, "theta": self.theta, "solver": SOLVER_TOLERANCES}
        if self.barriers:
            meta["barriers"] = self.barriers
        else:
            meta.update(M=self.M, h=self.h)
        return meta


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    data.update(overrides or {})
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return RunConfig(**data).validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _tag(delta: float) -> str:
    return f"{delta:+.4f}"


def _pair_tag(d1, d2) -> str:
    return f"d1{_tag(d1)}_d2{_tag(d2)}"


def _cells(fn, items, workers):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# spectrum ---------------------------------------------------------------

def _spectrum_cell(cfg: RunConfig, delta: float):
    spec = cfg.cache().get(cfg.potential(delta), cfg.n_states, cfg.theta)
    return delta, spec.table()


def cmd_spectrum(cfg: RunConfig) -> list:
    out = Path(cfg.output_dir)
    written = []
    combined = []
    for delta, table in _cells(partial(_spectrum_cell, cfg), cfg.delta_list(), cfg.workers):
        meta = dict(cfg.physical_meta(), delta=delta, n_states=cfg.n_states)
        written.append(write_table(
            out / f"spectrum_delta{_tag(delta)}.tsv",
            ["index", "energy", "k", "label", "side_weight", "chirality"], table, meta,
        ))
        combined.extend((delta, i, e, lab, sw) for i, e, _, lab, sw, _ in table)
    meta = dict(cfg.physical_meta(), deltas=cfg.delta_list(), n_states=cfg.n_states)
    written.append(write_table(out / "spectrum_vs_delta.tsv",
                               ["delta", "index", "energy", "label", "side_weight"],
                               combined, meta))
    return written


# density ----------------------------------------------------------------

def _density_cell(cfg: RunConfig, delta: float):
    n_max = max(cfg.particle_numbers())
    spec = cfg.cache().get(cfg.potential(delta), max(cfg.n_states, n_max), cfg.theta)
    x = np.linspace(-cfg.L / 2, cfg.L / 2, cfg.density_points)
    res = {}
    for N in cfg.particle_numbers():
        rho = integrated_density(FermiSea(spec, N), x)
        edge_modes = sum(1 for lab in spec.labels[:N] if lab == "gap")
        res[N] = (rho, float(trapezoid(rho, x)), float(spec.side_weights[:N].sum()), edge_modes)
    return delta, x, res


def cmd_density(cfg: RunConfig) -> list:
    out = Path(cfg.output_dir)
    cells = _cells(partial(_density_cell, cfg), cfg.delta_list(), cfg.workers)
    written, summary = [], []
    for N in cfg.particle_numbers():
        rows = []
        for delta, x, res in cells:
            rho, integral, imbalance, edges = res[N]
            rows.extend(zip(np.full(len(x), delta), x, rho))
            summary.append((N, delta, integral, imbalance, edges))
        meta = dict(cfg.physical_meta(), N=N, deltas=cfg.delta_list(), points=cfg.density_points)
        written.append(write_table(out / f"density_N{N}.tsv", ["delta", "x", "rho"], rows, meta))
    meta = dict(cfg.physical_meta(), deltas=cfg.delta_list())
    written.append(write_table(
        out / "density_summary.tsv",
        ["N", "delta", "integral", "side_imbalance", "edge_modes"], summary, meta,
    ))
    return written


# static overlap ---------------------------------------------------------

def _static_cell(cfg: RunConfig, pair):
    d1, d2 = pair
    n = max(cfg.n_states, max(cfg.particle_numbers()))
    cache = cfg.cache()
    s1 = cache.get(cfg.potential(d1), n, cfg.theta)
    s2 = cache.get(cfg.potential(d2), n, cfg.theta)
    Ns = cfg.particle_numbers()
    O = build_overlap_matrix(s1, s2, max(Ns), max(Ns)).values
    out = []
    for N in Ns:
        sign, logabs = np.linalg.slogdet(O[:N, :N])
        nu = float(sign * np.exp(logabs))
        out.append((N, nu, nu * nu))
    return pair, out


def cmd_static_overlap(cfg: RunConfig) -> list:
    out = Path(cfg.output_dir)
    pairs = [tuple(map(float, p)) for p in cfg.quench]
    written = []
    for (d1, d2), rows in _cells(partial(_static_cell, cfg), pairs, cfg.workers):
        meta = dict(cfg.physical_meta(), delta1=d1, delta2=d2)
        pos = [(N, p) for N, _, p in rows if p > 0]
        if len(pos) >= 3:
            meta["oc_exponent_all_N"] = oc_exponent_fit(pos)
        written.append(write_table(out / f"static_{_pair_tag(d1, d2)}.tsv",
                                   ["N", "nu", "probability"], rows, meta))
    if cfg.map:
        for d1 in sorted({p[0] for p in pairs}):
            sweep = [(d1, d2) for d2 in cfg.delta_list()]
            rows = []
            for (_, d2), vals in _cells(partial(_static_cell, cfg), sweep, cfg.workers):
                rows.extend((d2, N, p) for N, _, p in vals)
            meta = dict(cfg.physical_meta(), delta1=d1, deltas2=cfg.delta_list())
            written.append(write_table(out / f"static_map_d1{_tag(d1)}.tsv",
                                       ["delta2", "N", "probability"], rows, meta))
    return written


# quench -----------------------------------------------------------------

def _survival(cfg: RunConfig, d1, d2, N):
    cache = cfg.cache()
    s1 = cache.get(cfg.potential(d1), max(cfg.n_states, N), cfg.theta)
    p2 = cfg.potential(d2)
    s2 = cache.largest(p2, cfg.theta) or cache.get(p2, max(cfg.n_states, N), cfg.theta)
    times = fermi_time_grid(s2, N, cfg.time_span, cfg.time_samples) if len(s2) >= N else None
    trace = dynamic_overlap(FermiSea(s1, N), s2, times, cfg.defect_tol, cfg.max_states)
    return trace


def _quench_cell(cfg: RunConfig, cell):
    d1, d2, N = cell
    trace = _survival(cfg, d1, d2, N)
    return cell, trace


def cmd_quench(cfg: RunConfig) -> list:
    out = Path(cfg.output_dir)
    written = []
    for d1, d2 in [tuple(map(float, p)) for p in cfg.quench]:
        cells = [(d1, d2, N) for N in cfg.particle_numbers()]
        map_rows = []
        for (_, _, N), tr in _cells(partial(_quench_cell, cfg), cells, cfg.workers):
            meta = dict(cfg.physical_meta(), N=N, delta1=d1, delta2=d2, cutoff=tr.cutoff,
                        defect=tr.defect, defect_tol=cfg.defect_tol, fermi_energy=tr.fermi_energy,
                        fermi_time=tr.fermi_time, time_span_tF=cfg.time_span)
            written.append(write_table(
                out / f"survival_{_pair_tag(d1, d2)}_N{N}.tsv",
                ["t", "t_over_tF", "re_nu", "im_nu", "probability"], tr.columns(), meta,
            ))
            if cfg.map:
                map_rows.extend(zip(np.full(len(tr.times), N), tr.scaled_times, tr.probability))
        if cfg.map:
            meta = dict(cfg.physical_meta(), delta1=d1, delta2=d2, Ns=cfg.particle_numbers())
            written.append(write_table(out / f"survival_map_{_pair_tag(d1, d2)}.tsv",
                                       ["N", "t_over_tF", "probability"], map_rows, meta))
    return written


# wpd --------------------------------------------------------------------

def default_top_m(N: int, M: int) -> int:
    """3 entries when the Fermi level sits at a band edge, 5 otherwise."""
    r = N % M
    return 3 if min(r, M - r) <= 1 else 5


def _wpd_cell(cfg: RunConfig, cell):
    d1, d2, N = cell
    cache = cfg.cache()
    s1 = cache.get(cfg.potential(d1), max(cfg.n_states, N), cfg.theta)
    s2 = cache.get(cfg.potential(d2), max(cfg.wpd_columns, N), cfg.theta)
    O = build_overlap_matrix(s1, s2, N, len(s2))
    res = enumerate_wpd(
        O, s2, N, order_cap=cfg.order_cap, orbital_cutoff=cfg.orbital_cutoff,
        prob_floor=cfg.prob_floor, max_configs=cfg.max_configs,
        chiral_threshold=cfg.chiral_threshold, target_defect=cfg.wpd_target_defect,
    )
    exact = _survival(cfg, d1, d2, N)
    m = cfg.top_m or default_top_m(N, cfg.M)
    top = reconstruct_survival(res.top(m), res.E0, exact.times, exact.fermi_energy)
    full = reconstruct_survival(res.entries, res.E0, exact.times, exact.fermi_energy)
    return cell, res, exact, m, top, full


def cmd_wpd(cfg: RunConfig) -> list:
    out = Path(cfg.output_dir)
    written = []
    for d1, d2 in [tuple(map(float, p)) for p in cfg.quench]:
        cells = [(d1, d2, N) for N in cfg.particle_numbers()]
        summary = []
        for (_, _, N), res, exact, m, top, full in _cells(partial(_wpd_cell, cfg), cells, cfg.workers):
            base = dict(cfg.physical_meta(), N=N, delta1=d1, delta2=d2, E0=res.E0,
                        fermi_energy=res.fermi_energy, captured=res.captured, **res.params)
            stems = [
                (c.energy - res.E0, (c.energy - res.E0) / res.fermi_energy, c.probability,
                 c.order, c.kind, c.chiral, c.encode())
                for c in res.entries
            ]
            written.append(write_table(
                out / f"wpd_{_pair_tag(d1, d2)}_N{N}.tsv",
                ["W", "W_over_EF", "P", "order", "class", "chiral", "occupied"], stems, base,
            ))
            if cfg.merge_degenerate:
                hist = wpd_histogram(res, merge_degenerate=True)
                written.append(write_table(
                    out / f"wpd_merged_{_pair_tag(d1, d2)}_N{N}.tsv",
                    ["W_over_EF", "P", "class", "chiral"], hist, base,
                ))
            err_top = float(np.max(np.abs(top.probability - exact.probability)))
            err_full = float(np.max(np.abs(full.probability - exact.probability)))
            rows = np.column_stack([exact.times, exact.scaled_times, exact.probability,
                                    top.probability, full.probability])
            written.append(write_table(
                out / f"reconstruction_{_pair_tag(d1, d2)}_N{N}.tsv",
                ["t", "t_over_tF", "exact", f"top{m}", "all"], rows,
                dict(base, top_m=m, sup_error_top=err_top, sup_error_all=err_full,
                     cutoff=exact.cutoff),
            ))
            P = [c.probability for c in res.entries]
            summary.append((N, sum(P[:3]), m, sum(P[:m]), res.captured,
                            res.params["order_cap"], res.params["orbital_cutoff"],
                            err_top, err_full))
        written.append(write_table(
            out / f"wpd_summary_{_pair_tag(d1, d2)}.tsv",
            ["N", "top3_sum", "top_m", "top_m_sum", "captured", "order_cap",
             "orbital_cutoff", "sup_error_top_m", "sup_error_all"],
            summary, dict(cfg.physical_meta(), delta1=d1, delta2=d2),
        ))
    return written


# validate ---------------------------------------------------------------

def run_validation(cfg: RunConfig) -> list:
    """Oracle cross-checks as ``(name, value, threshold, passed)`` rows."""
    from .oracle import dvr_diagonalize, quad_overlap

    rows = []
    cache = cfg.cache()
    hs = sorted({5.0, 50.0} | ({float(cfg.h)} if not cfg.barriers else set()))
    dx = cfg.L / cfg.oracle_cells
    for h in hs:
        for delta in cfg.delta_list():
            p = lattice(cfg.L, cfg.M, h, delta) if not cfg.barriers else cfg.potential(delta)
            spec = cache.get(p, 30, cfg.theta)
            ref = dvr_diagonalize(p, 30, dx)
            err = float(np.max(np.abs(ref.energies / spec.energies - 1.0)))
            rows.append((f"energies_h{h:g}_delta{_tag(delta)}", err, 1e-4, err < 1e-4))
    rng = np.random.default_rng(cfg.seed)
    d1, d2 = (float(v) for v in cfg.quench[0])
    s1 = cache.get(cfg.potential(d1), 30, cfg.theta)
    s2 = cache.get(cfg.potential(d2), 30, cfg.theta)
    worst = 0.0
    for _ in range(cfg.oracle_pairs):
        i, j = rng.integers(1, 31, size=2)
        worst = max(worst, abs(inner_product(s1.state(i), s2.state(j))
                               - quad_overlap(s1.state(i), s2.state(j))))
    rows.append(("inner_products_vs_quadrature", worst, 1e-6, worst < 1e-6))
    s = cache.get(cfg.potential(d1), 60, cfg.theta)
    G = build_overlap_matrix(s, s).values
    ortho = float(np.max(np.abs(G - np.eye(len(s)))))
    rows.append(("orthonormality_60", ortho, 1e-8, ortho < 1e-8))
    return rows


def cmd_validate(cfg: RunConfig) -> list:
    rows = run_validation(cfg)
    for name, value, thr, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} (threshold {thr:.0e})")
    path = write_table(Path(cfg.output_dir) / "validate.tsv",
                       ["check", "value", "threshold", "passed"], rows,
                       dict(cfg.physical_meta(), oracle_cells=cfg.oracle_cells, seed=cfg.seed))
    if not all(r[3] for r in rows):
        raise _ChecksFailed([path])
    return [path]


class _ChecksFailed(Exception):
    def __init__(self, written):
        super().__init__("validation checks failed")
        self.written = written


COMMANDS = {
    "spectrum": cmd_spectrum,
    "density": cmd_density,
    "static-overlap": cmd_static_overlap,
    "quench": cmd_quench,
    "wpd": cmd_wpd,
    "validate": cmd_validate,
}


def _pair(text):
    a, sep, b = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}")
    return [float(a), float(b)]


_FLAG_TYPES = {
    "barriers": dict(nargs="+", type=_pair, metavar="Y:H"),
    "deltas": dict(nargs="+", type=float),
    "delta_range": dict(nargs=3, type=float, metavar=("START", "STOP", "STEP")),
    "quench": dict(nargs="+", type=_pair, metavar="D1:D2"),
    "N": dict(nargs="+", type=int),
    "N_range": dict(nargs=2, type=int, metavar=("LO", "HI")),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        kw = dict(dest=f.name, default=argparse.SUPPRESS)
        if f.name in _FLAG_TYPES:
            kw.update(_FLAG_TYPES[f.name])
        elif f.type in ("bool",) or isinstance(f.default, bool):
            kw["action"] = argparse.BooleanOptionalAction
        elif f.name in ("M", "n_states", "time_samples", "order_cap", "orbital_cutoff",
                        "wpd_columns", "max_states", "max_configs", "top_m",
                        "density_points", "oracle_cells", "oracle_pairs", "seed", "workers"):
            kw["type"] = int
        elif f.name in ("output_dir", "cache_dir"):
            kw["type"] = str
        else:
            kw["type"] = float
        common.add_argument(flag, **kw)
    parser = argparse.ArgumentParser(
        prog="afkp", description="Shifted Kronig-Penney box: spectra and quench observables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "eigenenergies, labels and side weights per shift",
        "density": "integrated Fermi-sea densities per shift",
        "static-overlap": "ground-state transition probabilities |nu|^2 vs N",
        "quench": "survival probability |nu(t)|^2 after a sudden shift change",
        "wpd": "work probability distribution and its survival reconstruction",
        "validate": "cross-check the solver against brute-force oracles",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = load_config(config_path, args)
        written = COMMANDS[command](cfg)
    except _ChecksFailed as exc:
        for p in exc.written:
            print(p)
        return EXIT_CHECK_FAILED
    except ConfigError as exc:
        print(f"afkp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"afkp: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SolverError, AFKPError) as exc:
        print(f"afkp: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
