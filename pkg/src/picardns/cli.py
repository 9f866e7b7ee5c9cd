"""Batch runner: solve, verify, bootstrap and bench on a JSON run configuration.

Exit codes: 0 success, 2 non-convergence, 3 check failure, 64 bad config
or missing artifacts.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (EPS_MAX, DiagnosticsReport, bootstrap_schedule, equicontinuity_report,
                       existence_constant, fit_decay_exponent, k_minus1_for_depth,
                       one_step_closure, regularity_bootstrap_run, saturating_existence_constant,
                       smoothing_gain, uniform_bound_report)
from .convolution import (bilinear_direct_at, bilinear_fft, divergence_defect, power_law_field,
                          set_fft_workers)
from .integrator import TimeGrid, Trajectory, forcing_trajectory, picard_solve, restart_residual
from .lattice import (DATA_KINDS, GENERATOR_NAME, hermitian_defect, lattice, make_small_data,
                      phi2_norm, read_snapshot, write_snapshot)
from .symbol import BilinearSymbol, SymbolKind

log = logging.getLogger("picardns")

EXIT_OK, EXIT_NONCONVERGED, EXIT_CHECK_FAILED, EXIT_BAD_CONFIG = 0, 2, 3, 64


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------

@dataclass
class SymbolConfig:
    kind: str = SymbolKind.WORST_CASE_SCALAR.value
    bound_constant: float = 1.0


@dataclass
class DataConfig:
    kind: str = "random_ball"
    seed: int = 0
    solenoidal: bool = False


@dataclass
class ScheduleConfig:
    rho: float = 0.5
    k_minus1: Optional[float] = None  # None: put k_depth at R/2
    depth: int = 0
    recurrence_mode: str = "corrected"


@dataclass
class BenchConfig:
    radii: list = field(default_factory=lambda: [4, 8, 16, 32])
    direct_sample_rows: int = 256  # direct path is timed on a sample above R = 8
    repeats: int = 3


@dataclass
class RunConfig:
    eps: float = 1e-3
    radius: float = 8.0
    T: float = 1.0
    steps: int = 32
    tol: float = 1e-10
    max_iter: int = 50
    method: str = "fft"
    snapshot_every: int = 0  # 0: first and last node only
    symbol: SymbolConfig = field(default_factory=SymbolConfig)
    data: DataConfig = field(default_factory=DataConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _build(cls, d, "config")

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def validate(self) -> "RunConfig":
        def need(ok, msg):
            if not ok:
                raise ConfigError(msg)
        for name in ("eps", "radius", "T", "tol"):
            v = getattr(self, name)
            need(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0
                 and math.isfinite(v), f"{name} must be a positive number, got {v!r}")
        need(self.radius >= 1, f"radius must be at least 1, got {self.radius}")
        for name in ("steps", "max_iter"):
            v = getattr(self, name)
            need(isinstance(v, int) and not isinstance(v, bool) and v >= 1,
                 f"{name} must be a positive integer, got {v!r}")
        need(isinstance(self.snapshot_every, int) and self.snapshot_every >= 0,
             "snapshot_every must be a nonnegative integer")
        need(self.method in ("fft", "direct"), f"method must be fft or direct, got {self.method!r}")
        try:
            BilinearSymbol(self.symbol.kind, self.symbol.bound_constant)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"symbol: {e}") from None
        need(self.data.kind in DATA_KINDS, f"data.kind must be one of {DATA_KINDS}")
        need(isinstance(self.data.seed, int) and self.data.seed >= 0,
             "data.seed must be a nonnegative integer")
        s = self.schedule
        need(isinstance(s.rho, (int, float)) and 0 < s.rho < self.T,
             f"schedule.rho must lie in (0, T), got {s.rho}")
        need(s.k_minus1 is None or s.k_minus1 > 0, "schedule.k_minus1 must be positive or null")
        need(isinstance(s.depth, int) and s.depth >= 0, "schedule.depth must be a nonnegative integer")
        need(s.recurrence_mode in ("corrected", "paper_literal"),
             "schedule.recurrence_mode must be corrected or paper_literal")
        b = self.bench
        need(len(b.radii) > 0 and all(r >= 1 for r in b.radii), "bench.radii must be >= 1")
        need(b.direct_sample_rows >= 1 and b.repeats >= 1, "bench counts must be positive")
        return self

    @property
    def sym(self) -> BilinearSymbol:
        return BilinearSymbol(self.symbol.kind, self.symbol.bound_constant)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.steps)

    def initial_data(self):
        return make_small_data(self.eps, self.radius, self.data.seed, self.data.kind,
                               solenoidal=self.data.solenoidal)


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in d.items():
        sub = {"symbol": SymbolConfig, "data": DataConfig, "schedule": ScheduleConfig,
               "bench": BenchConfig}.get(name) if cls is RunConfig else None
        kwargs[name] = _build(sub, value, f"{where}.{name}") if sub else value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None


def load_config(path: Optional[str], seed: Optional[int] = None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
    else:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        cfg = RunConfig.from_json(text)
    if seed is not None:
        cfg.data.seed = seed
    return cfg.validate()


# -- artifact output -------------------------------------------------------------

class ArtifactDir:
    """Collects files in a scratch directory; ``commit`` swaps it into place."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.out.name}.", dir=self.out.parent))

    def path(self, name: str) -> Path:
        p = self.tmp / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text)

    def commit(self) -> None:
        old = None
        if self.out.exists():
            old = self.out.with_name(f".{self.out.name}.old.{os.getpid()}")
            os.replace(self.out, old)
        os.replace(self.tmp, self.out)
        if old is not None:
            shutil.rmtree(old)

    def discard(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def _write_file_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x: float) -> str:
    return "%.17g" % x


def dyadic_shell_edges(radius: float) -> list:
    """Shell j covers 2^j <= |xi| < 2^(j+1); the last one is closed at R."""
    edges = [1.0]
    while edges[-1] * 2 <= radius:
        edges.append(edges[-1] * 2)
    return edges


def timeseries_rows(traj: Trajectory) -> tuple:
    """Header and rows (t, phi2_norm, max |xi|^2 |v| per dyadic shell)."""
    lat = traj.lattice
    edges = dyadic_shell_edges(traj.radius)
    which = np.searchsorted(np.array(edges), lat.norm, side="right") - 1
    header = ["t", "phi2_norm"] + [f"shell_{int(a)}_{int(2 * a)}" for a in edges]
    rows = []
    weighted = np.abs(traj.values).max(axis=1) * lat.norm2
    for j, t in enumerate(traj.grid.nodes):
        peaks = [float(weighted[j, which == s].max(initial=0.0)) for s in range(len(edges))]
        rows.append([float(t), float(weighted[j].max(initial=0.0))] + peaks)
    return header, rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _stamp(cfg: RunConfig, command: str) -> dict:
    return {"version": __version__, "command": command, "config": cfg.to_dict(),
            "generator": GENERATOR_NAME}


def snapshot_nodes(cfg: RunConfig) -> list:
    M = cfg.steps
    if cfg.snapshot_every <= 0:
        return [0, M]
    return sorted(set(range(0, M + 1, cfg.snapshot_every)) | {M})


def _snapshot_name(j: int) -> str:
    return f"snapshots/node_{j:05d}.txt"


def _solve(cfg: RunConfig, keep_iterates: bool = False):
    psi = cfg.initial_data()
    return psi, *picard_solve(psi, cfg.sym, cfg.grid, cfg.tol, cfg.max_iter, method=cfg.method,
                              keep_iterates=keep_iterates)


# -- commands ------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    psi, traj, rep = _solve(cfg)
    art = ArtifactDir(out)
    try:
        art.write_text("convergence.csv", _csv_text(
            ["iteration", "distance"], [[n + 1, d] for n, d in enumerate(rep.distances)]))
        art.write_text("timeseries.csv", _csv_text(*timeseries_rows(traj)))
        files = ["convergence.csv", "timeseries.csv"]
        for j in snapshot_nodes(cfg):
            name = _snapshot_name(j)
            write_snapshot(art.path(name), traj[j], seed=cfg.data.seed, kind=cfg.data.kind,
                           t=_fmt(float(traj.grid.nodes[j])), node=j, version=__version__)
            files.append(name)
        manifest = _stamp(cfg, "solve")
        manifest.update({
            "results": {"iterations": rep.iterations, "converged": rep.converged,
                        "distances": rep.distances, "final_residual": rep.final_residual,
                        "tail_bound": rep.tail_bound, "sup_norm": rep.sup_norm,
                        "initial_phi2_norm": phi2_norm(psi)},
            "files": files,
            "wall_seconds": time.perf_counter() - t0,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        })
        art.write_text("manifest.json", json.dumps(manifest, indent=2))
        art.commit()
    except BaseException:
        art.discard()
        raise
    status = "converged" if rep.converged else "did not converge"
    print(f"solve: {status} after {rep.iterations} iterations, residual "
          f"{rep.final_residual:.3e}, sup phi2 {rep.sup_norm:.3e} -> {out}")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def _load_manifest(out: Path) -> dict:
    path = Path(out) / "manifest.json"
    if not path.is_file():
        raise ConfigError(f"no solve artifacts in {out} (missing manifest.json)")
    return json.loads(path.read_text())


def _config_for(out: Path, cfg: Optional[RunConfig], seed: Optional[int]) -> RunConfig:
    manifest = _load_manifest(out)
    if cfg is None:
        cfg = RunConfig.from_dict(manifest["config"])
        if seed is not None:
            cfg.data.seed = seed
        cfg.validate()
    return cfg


def _snapshot_mismatch(out: Path, cfg: RunConfig, traj: Trajectory) -> float:
    worst = 0.0
    for j in snapshot_nodes(cfg):
        p = Path(out) / _snapshot_name(j)
        if not p.is_file():
            raise ConfigError(f"missing snapshot {p}")
        f, _ = read_snapshot(p)
        if f.radius != traj.radius:
            return math.inf
        worst = max(worst, float(np.abs(f.values - traj.values[j]).max(initial=0.0)))
    return worst


def _symbol_multiplier(sym: BilinearSymbol) -> float:
    # sum_ij |M_ijk(xi)| <= multiplier * |xi|
    return {SymbolKind.ZERO: 0.0, SymbolKind.WORST_CASE_SCALAR: 1.0,
            SymbolKind.NAVIER_STOKES_LERAY: 3.0}[sym.kind]


def verify_report(cfg: RunConfig, iterates: list, traj: Trajectory, rep,
                  mismatch: float) -> DiagnosticsReport:
    sym, eps, R = cfg.sym, cfg.eps, cfg.radius
    out = DiagnosticsReport()
    out.add("reproduction", "stored snapshots", mismatch, 0.0, seed=cfg.data.seed)
    ub = uniform_bound_report(iterates, eps)
    out.add("uniform_bound", "uniform-bound", max(ub.sup_norms), eps, passed=ub.passed,
            margin=ub.worst_margin, note=f"worst at {ub.location}", eps=eps, radius=R)
    eq = equicontinuity_report(iterates)
    out.add("equicontinuity", "equicontinuity", eq.modulus, (1 + eq.tolerance) * eq.median,
            note=f"moduli per iterate {eq.moduli}", steps=cfg.steps)
    out.add("fixed_point_residual", "mild-form residual", rep.final_residual, 10 * cfg.tol,
            note=f"truncation tail allowance {rep.tail_bound:.3e} reported separately",
            tol=cfg.tol)
    forcing = forcing_trajectory(traj, sym, cfg.method)
    half = traj.grid.nodes[traj.grid.node_index(cfg.T / 2)]
    out.add("restart_residual", "restarted mild form",
            restart_residual(traj, float(half), sym, forcing=forcing), 10 * cfg.tol,
            tau=float(half))
    if traj.hermitian:
        scale = max(1.0, float(np.abs(traj.values).max(initial=0.0)))
        defect = max(hermitian_defect(traj[j]) for j in range(len(traj)))
        out.add("hermitian", "real-valued solution", defect, 1e-13 * scale)
    if sym.kind is SymbolKind.NAVIER_STOKES_LERAY and cfg.data.solenoidal:
        defect = max(divergence_defect(traj[j]) for j in range(len(traj)))
        out.add("divergence", "incompressibility", defect, 1e-12 * max(1.0, R))
    D = rep.sup_norm
    if D > 0 and sym.kind is not SymbolKind.ZERO:
        measured = max(existence_constant(traj[j], sym, D) for j in range(len(traj)))
        bound = _symbol_multiplier(sym) * saturating_existence_constant(R)
        out.add("bilinear_bound", "bounded-growth estimate", measured, bound, D=D, radius=R)
    if eps < EPS_MAX and R >= 4:
        cl = one_step_closure(eps, 1, R, mode=cfg.schedule.recurrence_mode, breakdown=0)
        out.add("one_step_closure", "decay bootstrap step", cl.max_constant,
                cl.aggregate_constant, eps=eps, mu_m=1, radius=R, k_next=cl.k_next,
                note="synthetic saturating field")
    if R >= 16:
        g = smoothing_gain(power_law_field(R, 1.0, 2.25), BilinearSymbol(
            SymbolKind.WORST_CASE_SCALAR), 0.25, 2.0, R / 2)
        floor = g.target - g.tolerance
        out.add("smoothing_gain", "decay gain", g.fit.exponent, floor, passed=g.passed,
                margin=g.fit.exponent - floor, eta=0.25, radius=R,
                note="lower bound on the fitted exponent; synthetic power-law field")
    return out


def cmd_verify(cfg: Optional[RunConfig], out: Path, seed: Optional[int] = None) -> int:
    cfg = _config_for(out, cfg, seed)
    _, traj, rep = _solve(cfg, keep_iterates=True)
    report = verify_report(cfg, rep.iterates, traj, rep, _snapshot_mismatch(out, cfg, traj))
    doc = _stamp(cfg, "verify")
    doc.update(report.to_dict())
    _write_file_atomic(Path(out) / "report.json", json.dumps(doc, indent=2))
    for line in report.summary_lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def bootstrap_analysis(cfg: RunConfig, traj: Trajectory) -> tuple:
    """Schedule, bootstrap report and per-node decay fits for a solved trajectory."""
    s = cfg.schedule
    D = traj.sup_norm()
    k_minus1 = s.k_minus1 if s.k_minus1 is not None else k_minus1_for_depth(
        cfg.eps, D, cfg.radius, s.depth)
    sched = bootstrap_schedule(cfg.eps, s.rho, D, k_minus1, s.depth, s.recurrence_mode, T=cfg.T)
    rep = regularity_bootstrap_run(traj, sched, cfg.sym)
    fits = []
    for j, t in enumerate(traj.grid.nodes):
        if t >= s.rho - 1e-12:
            try:
                fits.append((float(t), fit_decay_exponent(traj[j], sched.k0)))
            except ValueError as e:
                fits.append((float(t), str(e)))
    rep.fits = fits
    return sched, rep


def cmd_bootstrap(cfg: Optional[RunConfig], out: Path, seed: Optional[int] = None) -> int:
    cfg = _config_for(out, cfg, seed)
    if not cfg.eps < EPS_MAX:
        raise ConfigError(f"bootstrap needs eps < 1/28, got {cfg.eps}")
    _, traj, _ = _solve(cfg)
    try:
        sched, rep = bootstrap_analysis(cfg, traj)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    report = DiagnosticsReport()
    for st in rep.stages:
        report.add(f"stage_{st.m}", "decay induction", -st.margin, 0.0, passed=st.passed,
                   margin=st.margin, k_m=st.k_m, level=st.level, tau_m=st.tau_m, nodes=st.nodes,
                   restart_residual=st.restart_residual)
    report.add("chain", "decay induction", 0.0 if rep.chain_ok else 1.0, 0.0)
    report.add("terminal_decay", "terminal decay", -rep.terminal_margin, 0.0,
               passed=rep.terminal_passed, margin=rep.terminal_margin, D=sched.D, k0=sched.k0)
    target = 2.25 - 0.15
    for t, fit in rep.fits:
        if isinstance(fit, str):
            report.add(f"decay_fit_t={t:g}", "terminal decay", math.nan, target, passed=False,
                       margin=math.nan, note=fit)
        else:
            report.add(f"decay_fit_t={t:g}", "terminal decay", fit.exponent, target,
                       passed=fit.exponent >= target, margin=fit.exponent - target,
                       k_min=fit.k_min, shells=fit.shells, residual=fit.residual,
                       note="lower bound on the fitted exponent")
    doc = _stamp(cfg, "bootstrap")
    doc["schedule"] = dataclasses.asdict(sched)
    doc.update(report.to_dict())
    _write_file_atomic(Path(out) / "bootstrap.json", json.dumps(_jsonable(doc), indent=2))
    for line in report.summary_lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


@dataclass
class BenchRow:
    radius: float
    points: int
    fft_seconds: float
    direct_seconds: float
    direct_rows: int
    speedup: float
    rel_error: float


def bench_radius(radius: float, sym: BilinearSymbol, seed: int = 0, sample_rows: int = 256,
                 repeats: int = 3, full_direct_max: float = 8) -> BenchRow:
    """Time both paths at one radius; the direct time is extrapolated from a row sample above
    ``full_direct_max``.  Agreement is checked on every computed output."""
    u = make_small_data(1.0, radius, seed)
    v = make_small_data(1.0, radius, seed + 1)
    lat = lattice(radius)
    fft_t = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        W = bilinear_fft(u, v, sym)
        fft_t = min(fft_t, time.perf_counter() - t0)
    if radius <= full_direct_max:
        rows = np.arange(lat.size)
    else:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(lat.size, size=min(sample_rows, lat.size), replace=False))
    t0 = time.perf_counter()
    direct = bilinear_direct_at(u, v, sym, rows)
    direct_t = (time.perf_counter() - t0) * lat.size / len(rows)
    w = lat.norm2[rows]
    scale = float((np.abs(direct) * w).max(initial=0.0))
    err = float((np.abs(W.values[:, rows] - direct) * w).max(initial=0.0))
    rel = err / scale if scale > 0 else err
    return BenchRow(radius, lat.size, fft_t, direct_t, len(rows),
                    direct_t / fft_t if fft_t > 0 else math.inf, rel)


def cmd_bench(cfg: RunConfig, out: Path) -> int:
    rows = []
    for R in cfg.bench.radii:
        row = bench_radius(R, cfg.sym, cfg.data.seed, cfg.bench.direct_sample_rows,
                           cfg.bench.repeats)
        print(f"R={R:g}: points={row.points} fft={row.fft_seconds:.4f}s "
              f"direct={row.direct_seconds:.4f}s ({row.direct_rows} rows) "
              f"speedup={row.speedup:.1f} rel_error={row.rel_error:.2e}")
        if not row.rel_error <= 1e-12:
            print(f"bench: fft and direct disagree at R={R:g} (rel error {row.rel_error:.3e}); "
                  "aborting", file=sys.stderr)
            return EXIT_CHECK_FAILED
        rows.append(row)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    header = [f.name for f in dataclasses.fields(BenchRow)]
    _write_file_atomic(out / "bench.csv", _csv_text(
        header, [[getattr(r, h) for h in header] for r in rows]))
    doc = _stamp(cfg, "bench")
    doc["rows"] = [_jsonable(dataclasses.asdict(r)) for r in rows]
    _write_file_atomic(out / "bench.json", json.dumps(doc, indent=2))
    return EXIT_OK


# -- entry point --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="picardns", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--print-default-config", action="store_true",
                   help="print the default configuration as JSON and exit")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command")
    for name, text in [("solve", "run the Picard solver and write artifacts"),
                       ("verify", "recompute a solve and run the estimate checks"),
                       ("bootstrap", "run the decay induction on a solve"),
                       ("bench", "time the direct and transform convolutions")]:
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help="JSON run configuration (defaults if omitted)")
        s.add_argument("--out", default="run", help="output directory (default: ./run)")
        s.add_argument("--threads", type=int, default=None, help="transform worker threads")
        s.add_argument("--seed", type=int, default=None, help="override data.seed")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_default_config:
        print(RunConfig().to_json())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_BAD_CONFIG
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_BAD_CONFIG
        set_fft_workers(args.threads)
    out = Path(args.out)
    try:
        if args.command in ("verify", "bootstrap"):
            cfg = load_config(args.config, args.seed) if args.config else None
            fn = cmd_verify if args.command == "verify" else cmd_bootstrap
            return fn(cfg, out, args.seed)
        cfg = load_config(args.config, args.seed)
        return cmd_solve(cfg, out) if args.command == "solve" else cmd_bench(cfg, out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
