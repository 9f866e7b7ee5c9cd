"""Verification of the a-priori estimates on computed solutions.

Checks are plain functions returning small report objects; failures are
data, never exceptions.  :class:`DiagnosticsReport` collects them into one
diffable document.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .convolution import (bilinear_fft, saturating_field, shell_diagnostics_regularity)
from .integrator import Trajectory, forcing_trajectory, restart_residual
from .lattice import Frequency, SpectralField, lattice
from .symbol import BilinearSymbol, SymbolKind

EPS_MAX = 1.0 / 28.0
RECURRENCE_MODES = ("corrected", "paper_literal")


# -- report plumbing -----------------------------------------------------------

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


@dataclass
class CheckRecord:
    check_id: str
    anchor: str
    inputs: dict
    measured: float
    bound: float
    margin: float
    passed: bool
    note: str = ""


@dataclass
class DiagnosticsReport:
    records: list = field(default_factory=list)

    def add(self, check_id: str, anchor: str, measured: float, bound: float,
            passed: Optional[bool] = None, margin: Optional[float] = None,
            note: str = "", **inputs) -> CheckRecord:
        if margin is None:
            margin = bound - measured
        if passed is None:
            passed = measured <= bound
        rec = CheckRecord(check_id, anchor, inputs, float(measured), float(bound),
                          float(margin), bool(passed), note)
        self.records.append(rec)
        return rec

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failed(self) -> list:
        return [r for r in self.records if not r.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "records": [_plain(asdict(r)) for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def summary_lines(self) -> list:
        return [f"{'PASS' if r.passed else 'FAIL'} {r.check_id}: measured={r.measured:.6g} "
                f"bound={r.bound:.6g} margin={r.margin:.3g}" for r in self.records]


# -- bootstrap schedule -----------------------------------------------------------

def mu_sequence(n_terms: int, mode: str = "corrected") -> list:
    """Exponents mu_0, mu_1, ... of the decay bootstrap.

    ``paper_literal`` starts from mu_0 = mu_1 = 1 and stays at 1 under
    mu_{n+1} = 2 mu_n - 1; ``corrected`` starts from mu_1 = 2, giving
    mu_n = 2^(n-1) + 1 for n >= 1.
    """
    if mode not in RECURRENCE_MODES:
        raise ValueError(f"unknown recurrence mode {mode!r}")
    mu = [1, 1 if mode == "paper_literal" else 2]
    while len(mu) < n_terms:
        mu.append(2 * mu[-1] - 1)
    return mu[:n_terms]


@dataclass
class BootstrapSchedule:
    eps: float
    rho: float
    D: float
    k_minus1: float
    k0: float
    mu: list
    k: list
    tau: list
    depth: int
    recurrence_mode: str = "corrected"

    def level(self, m: int) -> float:
        return self.eps ** self.mu[m]

    def invariant_violations(self) -> list:
        out = []
        if not (self.k_minus1 / self.k0) * self.D < min(self.eps, 0.5):
            out.append("k0 does not satisfy (k_-1/k0) D < min(eps, 1/2)")
        if any(b <= a for a, b in zip(self.k, self.k[1:])):
            out.append("k not strictly increasing")
        if any(b <= a for a, b in zip(self.tau, self.tau[1:])) or self.tau[-1] >= self.rho:
            out.append("tau not strictly increasing below rho")
        if any(b < a for a, b in zip(self.mu, self.mu[1:])):
            out.append("mu decreasing")
        return out

    def max_feasible_depth(self, radius: float) -> int:
        return max_feasible_depth(self.k0, self.eps, radius)


def schedule_k(k0: float, eps: float, n: int) -> float:
    """k_0 is the base itself; k_n = k0 / eps^(2^n) for n >= 1."""
    return k0 if n == 0 else k0 / eps ** (2 ** n)


def max_feasible_depth(k0: float, eps: float, radius: float) -> int:
    """Largest depth d with k_d <= radius (-1 if none)."""
    d = -1
    while d < 64 and schedule_k(k0, eps, d + 1) <= radius:
        d += 1
    return d


def bootstrap_schedule(eps: float, rho: float, D: float, k_minus1: float, depth: int,
                       recurrence_mode: str = "corrected",
                       T: Optional[float] = None) -> BootstrapSchedule:
    """Schedules k_n = k0 / eps^(2^n) (n >= 1), tau_n = rho - rho / 2^n and the mu exponents.

    k_0 = k0 is the base of the sequence, the smallest value (up to a 1e-9 relative margin) with
    (k_-1 / k0) D < min(eps, 1/2).
    """
    if not 0 < eps < EPS_MAX:
        raise ValueError(f"eps must lie in (0, 1/28), got {eps}")
    if not rho > 0 or (T is not None and not rho < T):
        raise ValueError(f"rho must lie in (0, T), got rho={rho}, T={T}")
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    if k_minus1 < 0 or D < 0:
        raise ValueError("k_minus1 and D must be nonnegative")
    k0 = k_minus1 * D / min(eps, 0.5) * (1 + 1e-9)
    k0 = max(k0, np.finfo(float).tiny)
    n = depth + 2
    mu = mu_sequence(n, recurrence_mode)
    k = [schedule_k(k0, eps, i) for i in range(n)]
    tau = [rho - rho / 2 ** i for i in range(n)]
    return BootstrapSchedule(eps, rho, D, k_minus1, k0, mu, k, tau, depth, recurrence_mode)


def k_minus1_for_depth(eps: float, D: float, radius: float, depth: int,
                       fraction: float = 0.5) -> float:
    """k_-1 whose schedule puts k_depth at ``fraction * radius``.

    Keeping k_depth below R leaves shells between k_0 and R for the
    terminal decay fit.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    k0 = fraction * radius * (eps ** (2 ** depth) if depth > 0 else 1.0)
    if D <= 0:
        return k0
    return k0 * min(eps, 0.5) / D / (1 + 1e-9)


# -- uniform bound and equicontinuity -----------------------------------------------------

@dataclass
class UniformBoundReport:
    eps: float
    passed: bool
    worst_margin: float  # eps - max |xi|^2 |v|, phi2 units
    location: dict
    sup_norms: list

    def violations(self) -> int:
        return sum(1 for s in self.sup_norms if s > self.eps)


def uniform_bound_report(iterates: Sequence[Trajectory], eps: float) -> UniformBoundReport:
    """Check |v_n^k(xi, t)| <= eps / |xi|^2 for every iterate, node, xi and k."""
    worst, loc, sups = math.inf, {}, []
    for n, traj in enumerate(iterates):
        weighted = np.abs(traj.values) * traj.lattice.norm2
        j, k, p = np.unravel_index(int(np.argmax(weighted)), weighted.shape)
        top = float(weighted[j, k, p])
        sups.append(top)
        if eps - top < worst:
            worst = eps - top
            loc = {"iterate": n, "t": float(traj.grid.nodes[j]),
                   "xi": tuple(int(c) for c in traj.lattice.points[p]), "component": int(k)}
    return UniformBoundReport(eps, worst >= 0, worst, loc, sups)


def lipschitz_moduli(iterates: Sequence[Trajectory]) -> np.ndarray:
    """Per iterate: max over xi, k and adjacent nodes of |v(t2) - v(t1)| / (t2 - t1)."""
    out = []
    for traj in iterates:
        if len(traj) < 2:
            raise ValueError("need at least two grid nodes")
        dv = np.abs(np.diff(traj.values, axis=0))
        dt = np.diff(traj.grid.nodes)
        out.append(float((dv.max(axis=(1, 2)) / dt).max()))
    return np.array(out)


def equicontinuity_modulus(iterates: Sequence[Trajectory]) -> float:
    return float(lipschitz_moduli(iterates).max())


@dataclass
class EquicontinuityReport:
    moduli: list
    modulus: float
    median: float
    tolerance: float = 0.05

    @property
    def uniform_in_n(self) -> bool:
        return self.modulus <= (1 + self.tolerance) * self.median


def equicontinuity_report(iterates: Sequence[Trajectory], tolerance: float = 0.05) -> EquicontinuityReport:
    m = lipschitz_moduli(iterates)
    return EquicontinuityReport(m.tolist(), float(m.max()), float(np.median(m)), tolerance)


# -- decay checks ------------------------------------------------------------------------

def shell_decay_check(f: SpectralField, k: float, bound: float) -> tuple:
    """(passed, margin): |f^k(xi)| <= bound / |xi|^2 for every |xi| >= k.

    The margin is min over that range of bound/|xi|^2 - |f(xi)| (absolute
    units); ``inf`` when no stored frequency reaches k.
    """
    lat = f.lattice
    sel = lat.norm >= k * (1 - 1e-12)
    if not sel.any():
        return True, math.inf
    slack = bound / lat.norm2[sel] - np.abs(f.values[:, sel]).max(axis=0)
    margin = float(slack.min())
    return margin >= 0, margin


@dataclass
class DecayFit:
    exponent: float
    prefactor: float
    frequencies_used: tuple
    shells: int
    residual: float
    k_min: float


def shell_maxima(f: SpectralField) -> tuple:
    """Distinct |xi| and max over each shell (all components) of |f|."""
    n2, inverse = f.lattice.shells
    amp = np.abs(f.values).max(axis=0)
    peaks = np.zeros(len(n2))
    np.maximum.at(peaks, inverse, amp)
    return np.sqrt(n2.astype(float)), peaks


def fit_decay_exponent(f: SpectralField, k_min: float, floor_rel: float = 1e-12) -> DecayFit:
    """Least-squares fit |f| ~ D |xi|^-exponent over shell maxima with |xi| >= k_min.

    Shells whose maximum is below ``floor_rel`` times the largest value of
    the field are unresolved at double precision and left out.
    """
    norms, peaks = shell_maxima(f)
    top = peaks.max(initial=0.0)
    use = (norms >= k_min * (1 - 1e-12)) & (peaks > floor_rel * top) & (peaks > 0)
    if use.sum() < 3:
        raise ValueError(f"need at least 3 resolved shells with |xi| >= {k_min}, got {int(use.sum())}")
    x = np.log(norms[use])
    y = np.log(peaks[use])
    A = np.stack([np.ones_like(x), -x], axis=1)
    (logD, p), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.abs(A @ np.array([logD, p]) - y).max())
    return DecayFit(float(p), float(math.exp(logD)),
                    (float(norms[use].min()), float(norms[use].max())), int(use.sum()), resid,
                    float(k_min))


# -- bootstrap run ---------------------------------------------------------------------------

@dataclass
class StageResult:
    m: int
    k_m: float
    level: float
    tau_m: float
    nodes: int
    passed: bool
    margin: float
    restart_residual: float


@dataclass
class BootstrapReport:
    schedule: BootstrapSchedule
    stages: list
    terminal_passed: bool
    terminal_margin: float
    chain_ok: bool
    fits: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stages) and self.terminal_passed and self.chain_ok


def regularity_bootstrap_run(traj: Trajectory, schedule: BootstrapSchedule,
                             sym: BilinearSymbol) -> BootstrapReport:
    """Run the decay induction on a computed solution.

    Stage m checks |v(xi, t)| <= eps^mu_m / |xi|^2 for |xi| >= k_m at every
    node t > tau_m, and records the defect of the mild form restarted at
    the first node at or after tau_m.  The terminal check is
    |v(xi, t)| <= D / |xi|^(2 + 1/4) for t >= rho, |xi| >= k0.
    """
    R = traj.radius
    if schedule.k[schedule.depth] > R:
        feasible = schedule.max_feasible_depth(R)
        raise ValueError(
            f"k_{schedule.depth} = {schedule.k[schedule.depth]:.3g} exceeds radius {R}; "
            f"largest feasible depth is {feasible}")
    grid = traj.grid
    nodes = grid.nodes
    forcing = forcing_trajectory(traj, sym)
    stages = []
    for m in range(schedule.depth + 1):
        level = schedule.level(m)
        active = np.nonzero(nodes > schedule.tau[m] + 1e-12)[0]
        margins = [shell_decay_check(traj[j], schedule.k[m], level)[1] for j in active]
        margin = min(margins) if margins else math.inf
        j0 = grid.first_node_at_or_after(schedule.tau[m])
        res = restart_residual(traj, float(nodes[j0]), sym, forcing=forcing)
        stages.append(StageResult(m, schedule.k[m], level, schedule.tau[m], len(active),
                                  margin >= 0, margin, res))
    # stage m + 1 rests on stage m holding on its (larger) time window
    chain_ok = all(not b.passed or a.passed for a, b in zip(stages, stages[1:]))

    term_margin = math.inf
    lat = traj.lattice
    sel = lat.norm >= schedule.k0
    for j in np.nonzero(nodes >= schedule.rho - 1e-12)[0]:
        if sel.any():
            env = schedule.D / lat.norm[sel] ** 2.25
            slack = env - np.abs(traj.values[j][:, sel]).max(axis=0)
            term_margin = min(term_margin, float(slack.min()))
    return BootstrapReport(schedule, stages, term_margin >= 0, term_margin, chain_ok)


def decay_fits_after(traj: Trajectory, t_min: float, k_min: float) -> list:
    """fit_decay_exponent at every node t >= t_min, as (t, DecayFit) pairs."""
    out = []
    for j, t in enumerate(traj.grid.nodes):
        if t >= t_min - 1e-12:
            out.append((float(t), fit_decay_exponent(traj[j], k_min)))
    return out


# -- synthetic estimates ------------------------------------------------------------------------

@dataclass
class ClosureResult:
    eps: float
    m: int
    mu_m: int
    k_minus1: float
    k_m: float
    k_next: float
    tested: int
    max_constant: float
    worst_xi: tuple
    aggregate_constant: float
    conclusion_ok: bool
    breakdown: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_constant <= self.aggregate_constant


def closure_field(radius: float, eps: float, mu_m: float, k_minus1: float, k_m: float,
                  D: float) -> SpectralField:
    """Field saturating both bootstrap hypotheses: D, eps, eps^mu_m over |q|^2 by band."""
    def amp(n):
        return np.where(n < k_minus1, D, np.where(n < k_m, eps, eps ** mu_m))
    return saturating_field(radius, amp)


def one_step_closure(eps: float, mu_m: int, radius: float, *, m: Optional[int] = None,
                     mode: str = "corrected", k_m: Optional[float] = None, k_minus1: Optional[float] = None,
                     D: Optional[float] = None, sym: Optional[BilinearSymbol] = None,
                     aggregate_constant: float = 28.0, breakdown: int = 3) -> ClosureResult:
    """Measure max over |xi| >= k_{m+1} of |B(u, u)(xi)| / eps^(2 mu_m) for a saturating u.

    With k_{m+1} = k_m / eps^(2^m), the default places k_{m+1} at R/4 so a
    range of shells is tested; k_-1 defaults to k_m eps^mu_m / D and D to eps.
    The stage index m defaults to the first stage whose exponent is mu_m.
    """
    if m is None:
        mu = mu_sequence(max(2, int(mu_m) + 1), mode)
        if mu_m not in mu:
            raise ValueError(f"mu_m = {mu_m} is not an exponent of the {mode} recurrence")
        m = mu.index(mu_m)
    D = eps if D is None else D
    if k_m is None:
        k_m = radius / 4 * eps ** (2 ** m)
    if k_minus1 is None:
        k_minus1 = k_m * eps ** mu_m / D
    k_next = k_m / eps ** (2 ** m)
    sym = sym or BilinearSymbol(SymbolKind.WORST_CASE_SCALAR)
    u = closure_field(radius, eps, mu_m, k_minus1, k_m, D)
    B = bilinear_fft(u, u, sym)
    lat = u.lattice
    sel = lat.norm >= k_next * (1 - 1e-12)
    scale = eps ** (2 * mu_m)
    const = np.abs(B.values[:, sel]).max(axis=0) / scale
    if const.size == 0:
        raise ValueError(f"no frequency with |xi| >= k_(m+1) = {k_next:.3g} inside R = {radius}")
    w = int(np.argmax(const))
    worst_xi = tuple(int(c) for c in lat.points[sel][w])
    conclusion = bool(np.all(np.abs(B.values[:, sel]).max(axis=0) <= eps ** (2 * mu_m - 1)))
    reps = []
    if breakdown:
        shells = np.unique(lat.norm[sel])
        picks = shells[np.linspace(0, len(shells) - 1, min(breakdown, len(shells))).astype(int)]
        for s in picks:
            p = int(np.nonzero(sel & (lat.norm == s))[0][-1])
            reps.append(shell_diagnostics_regularity(u, sym, lat.points[p], k_minus1, k_m, eps,
                                                     mu_m, aggregate_constant))
        reps.append(shell_diagnostics_regularity(u, sym, worst_xi, k_minus1, k_m, eps, mu_m,
                                                 aggregate_constant))
    return ClosureResult(eps, m, mu_m, k_minus1, k_m, k_next, int(sel.sum()),
                         float(const.max()), worst_xi, aggregate_constant, conclusion, reps)


def existence_constant(u: SpectralField, sym: BilinearSymbol, eps: float) -> float:
    """max over xi of |B(u, u)(xi)| / eps^2."""
    B = bilinear_fft(u, u, sym)
    return float(np.abs(B.values).max(initial=0.0)) / (eps * eps)


def saturating_existence_constant(radius: float, sym: Optional[BilinearSymbol] = None) -> float:
    """The same constant for u = 1/|q|^2 on every component (eps = 1)."""
    sym = sym or BilinearSymbol(SymbolKind.WORST_CASE_SCALAR)
    return existence_constant(saturating_field(radius, 1.0), sym, 1.0)


@dataclass
class SmoothingGain:
    eta: float
    target: float
    fit: DecayFit
    tolerance: float = 0.15

    @property
    def passed(self) -> bool:
        return self.fit.exponent >= self.target - self.tolerance


def smoothing_gain(u: SpectralField, sym: BilinearSymbol, eta: float, k_min: float,
                   k_max: Optional[float] = None, tolerance: float = 0.15) -> SmoothingGain:
    """Decay exponent of the Duhamel response B(u, u)/|xi|^2 for u ~ |q|^-(2+eta).

    The long-time limit of the Duhamel term at xi is B(xi)/|xi|^2, so its
    fitted exponent should reach 2 + min(1/2, 3 eta / 2).
    """
    B = bilinear_fft(u, u, sym)
    lat = u.lattice
    vals = B.values / lat.norm2
    if k_max is not None:
        vals = np.where(lat.norm <= k_max, vals, 0.0)
    f = SpectralField(lat, vals, B.hermitian)
    fit = fit_decay_exponent(f, k_min)
    return SmoothingGain(eta, 2 + min(0.5, 1.5 * eta), fit, tolerance)


def basic_sum_constants(radii: Sequence[float]) -> dict:
    """Measured constants of the two lattice inequalities over the given radii."""
    from .lattice import lattice_tail_sum, shell_sum_inverse_power

    near = [shell_sum_inverse_power(0, r, 2) / r for r in radii]
    far = [lattice_tail_sum(r, 4).upper * r for r in radii]
    return {"radii": list(radii), "inverse_square": near, "inverse_fourth_tail": far,
            "c": max(near), "c_tail": max(far)}
