"""Heat semigroup, Duhamel quadrature and the Picard fixed-point solve.

The mild form on the truncated lattice reads

    v(xi, t) = psi(xi) exp(-|xi|^2 t)
               + int_0^t exp(-|xi|^2 (t - s)) B(v, v)(xi, s) ds

and the solver iterates it from the heat trajectory.  Time is a uniform
grid; the kernel is integrated exactly against the piecewise-linear
interpolant of the forcing, so the scheme is stable for every |xi|.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .convolution import bilinear
from .lattice import Frequency, Lattice, SpectralField, lattice_tail_sum
from .symbol import BilinearSymbol, active_pairs

log = logging.getLogger(__name__)

# below this |xi|^2 dt the weights come from their Taylor series
SERIES_THRESHOLD = 1e-4
# sum_{1 <= |q| < r} |q|^-2 <= BASIC_SUM_CONSTANT * r (checked up to r = 128)
BASIC_SUM_CONSTANT = 4 * math.pi


@dataclass(frozen=True)
class TimeGrid:
    T: float
    steps: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.dt
        t[-1] = self.T
        return t

    def node_index(self, t: float) -> int:
        """Index of the node equal to ``t`` (within rounding)."""
        j = int(round(t / self.dt))
        if not 0 <= j <= self.steps or abs(j * self.dt - t) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"t = {t} is not a node of {self}")
        return j

    def first_node_at_or_after(self, t: float) -> int:
        j = int(math.ceil(t / self.dt - 1e-9))
        return min(max(j, 0), self.steps)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots on every grid node, ``values[j]`` of shape (3, lattice.size)."""

    grid: TimeGrid
    lattice: Lattice
    values: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        shape = (self.grid.steps + 1, 3, self.lattice.size)
        if self.values.shape != shape:
            raise ValueError(f"trajectory values must have shape {shape}, got {self.values.shape}")
        if self.values.flags.writeable:
            self.values.setflags(write=False)

    @property
    def radius(self) -> float:
        return self.lattice.radius

    def __len__(self) -> int:
        return self.grid.steps + 1

    def __getitem__(self, j: int) -> SpectralField:
        return SpectralField(self.lattice, self.values[j], self.hermitian)

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    @classmethod
    def from_snapshots(cls, grid: TimeGrid, snapshots) -> "Trajectory":
        snapshots = list(snapshots)
        if len(snapshots) != grid.steps + 1:
            raise ValueError(f"need {grid.steps + 1} snapshots, got {len(snapshots)}")
        lat = snapshots[0].lattice
        for s in snapshots:
            if s.radius != lat.radius:
                raise ValueError("snapshots must share one truncation radius")
        vals = np.stack([s.values for s in snapshots])
        return cls(grid, lat, vals, all(s.hermitian for s in snapshots))

    def sup_norm(self) -> float:
        """sup over nodes of phi2_norm."""
        return float((np.abs(self.values) * self.lattice.norm2).max(initial=0.0))

    def node_norms(self) -> np.ndarray:
        return (np.abs(self.values) * self.lattice.norm2).max(axis=(1, 2))


def trajectory_distance(a: Trajectory, b: Trajectory) -> float:
    """sup over nodes of phi2_norm(a(t) - b(t))."""
    return float((np.abs(a.values - b.values) * a.lattice.norm2).max(initial=0.0))


# -- heat flow and quadrature ------------------------------------------------

def heat_propagate(f: SpectralField, dt: float) -> SpectralField:
    """f(xi) exp(-|xi|^2 dt)."""
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    return SpectralField(f.lattice, f.values * np.exp(-f.lattice.norm2 * dt), f.hermitian)


def heat_trajectory(psi: SpectralField, grid: TimeGrid) -> Trajectory:
    decay = np.exp(-np.outer(grid.nodes, psi.lattice.norm2))
    return Trajectory(grid, psi.lattice, decay[:, None, :] * psi.values[None], psi.hermitian)


def quadrature_weights(x) -> tuple[np.ndarray, np.ndarray]:
    """Weights (phi1, w_left) of the exponential-kernel rule at x = |xi|^2 dt.

    Over one step of length h with linear forcing F_l -> F_r,
        int_0^h exp(-lam (h - s)) F(s) ds = h (w_left F_l + (phi1 - w_left) F_r)
    where phi1 = (1 - e^-x)/x and w_left = (1 - (1 + x) e^-x)/x^2.
    """
    x = np.asarray(x, dtype=float)
    small = x < SERIES_THRESHOLD
    xs = np.where(small, 1.0, x)
    em1 = -np.expm1(-xs)
    phi1 = em1 / xs
    w_left = (em1 - xs * np.exp(-xs)) / (xs * xs)
    xx = x
    phi1_series = 1 - xx / 2 + xx * xx / 6 - xx ** 3 / 24
    left_series = 0.5 - xx / 3 + xx * xx / 8 - xx ** 3 / 30
    return np.where(small, phi1_series, phi1), np.where(small, left_series, w_left)


def duhamel_integral(lam: np.ndarray, forcing: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative quadrature I_j ~ int_0^{t_j} exp(-lam (t_j - s)) F(s) ds.

    ``forcing`` has the node axis first; ``lam`` broadcasts against the
    remaining axes.  Uses I_{j+1} = e^{-lam dt} I_j + dt (w F_j + (phi1 - w) F_{j+1}),
    the exact propagation of the kernel over each step.
    """
    x = lam * dt
    phi1, w_left = quadrature_weights(x)
    w_right = phi1 - w_left
    decay = np.exp(-x)
    out = np.empty(forcing.shape, dtype=np.complex128)
    out[0] = 0.0
    for j in range(len(forcing) - 1):
        out[j + 1] = decay * out[j] + dt * (w_left * forcing[j] + w_right * forcing[j + 1])
    return out


def duhamel_quadrature(xi, forcing_samples, t: float) -> np.ndarray:
    """int_0^t exp(-|xi|^2 (t - s)) F(s) ds from samples of F on a uniform grid of [0, t]."""
    xi = Frequency(xi)
    samples = np.asarray(forcing_samples, dtype=np.complex128)
    if samples.ndim == 1:
        samples = samples[:, None]
    if len(samples) < 2:
        if len(samples) == 1 and t == 0:
            return np.zeros(samples.shape[1:], dtype=np.complex128)
        raise ValueError("need samples at both ends of [0, t]")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    dt = t / (len(samples) - 1)
    return duhamel_integral(np.float64(xi.norm2), samples, dt)[-1]


# -- Picard iteration --------------------------------------------------------

def forcing_trajectory(traj: Trajectory, sym: BilinearSymbol, method: str = "fft") -> np.ndarray:
    """B(v(t_j), v(t_j)) at every node, shape like ``traj.values``."""
    out = np.zeros(traj.values.shape, dtype=np.complex128)
    if not active_pairs(sym):
        return out
    for j in range(len(traj)):
        snap = traj[j]
        out[j] = bilinear(snap, snap, sym, method).values
    return out


def _check_radius(traj: Trajectory, psi: SpectralField) -> None:
    if traj.lattice is not psi.lattice and traj.radius != psi.radius:
        raise ValueError(f"truncation radius mismatch: {traj.radius} vs {psi.radius}")


def duhamel_map(forcing: np.ndarray, psi: SpectralField, grid: TimeGrid) -> Trajectory:
    lam = psi.lattice.norm2.astype(float)
    heat = np.exp(-np.outer(grid.nodes, lam))[:, None, :] * psi.values[None]
    vals = heat + duhamel_integral(lam, forcing, grid.dt)
    return Trajectory(grid, psi.lattice, vals, psi.hermitian)


def picard_iterate(current: Trajectory, psi: SpectralField, sym: BilinearSymbol,
                   method: str = "fft") -> Trajectory:
    """One application of the mild-form map to ``current``."""
    _check_radius(current, psi)
    forcing = forcing_trajectory(current, sym, method)
    out = duhamel_map(forcing, psi, current.grid)
    herm = psi.hermitian and current.hermitian and sym.preserves_hermitian
    return Trajectory(out.grid, out.lattice, out.values, herm)


def truncation_tail_bound(radius: float, D: float, sym: BilinearSymbol) -> float:
    """Upper bound, in phi2 units, for what the truncation drops from the forcing.

    For a field with |v| <= D/|q|^2 everywhere, the terms with |q| > R or
    |xi - q| > R are bounded by splitting at |q| = 2|xi| (where
    |xi - q| >= |q|/2) and the annulus R < |q| < 2|xi|.  The Duhamel
    integral of a forcing bounded by F is at most F / |xi|^2, so the
    phi2 contribution is the forcing bound itself.
    """
    pairs = len(active_pairs(sym))
    if pairs == 0 or D == 0:
        return 0.0
    # xi * tail(max(R, 2xi)) grows up to |xi| = R/2 and the annulus term
    # grows beyond it, so the two candidates below bracket the maximum
    L = int(math.floor(radius))
    candidates = {math.sqrt(n2) for n2 in (max(1, int(radius * radius / 4)), L * L)}
    worst = 0.0
    for xin in candidates:
        far_part = 4.0 * lattice_tail_sum(max(radius, 2 * xin), 4).upper
        near_part = 0.0
        if 2 * xin > radius:
            near_part = 3.0 * xin * BASIC_SUM_CONSTANT / (radius * radius)
        worst = max(worst, 2.0 * pairs * sym.bound_constant * xin * D * D
                    * (far_part + near_part))
    return worst


@dataclass
class PicardReport:
    iterations: int
    distances: list
    converged: bool
    final_residual: float
    tail_bound: float
    sup_norm: float
    tol: float
    max_iter: int
    iterates: Optional[list] = field(default=None, repr=False)

    @property
    def ratios(self) -> list:
        d = self.distances
        return [d[n + 1] / d[n] if d[n] > 0 else 0.0 for n in range(len(d) - 1)]


def picard_solve(psi: SpectralField, sym: BilinearSymbol, grid: TimeGrid, tol: float = 1e-10,
                 max_iter: int = 50, *, method: str = "fft", keep_iterates: bool = False,
                 callback: Optional[Callable[[int, Trajectory], bool]] = None,
                 ) -> tuple[Trajectory, PicardReport]:
    """Iterate from the heat trajectory until successive iterates are within ``tol``.

    ``distances[n-1]`` is sup_t phi2_norm(v_n(t) - v_{n-1}(t)).  The
    ``callback`` sees every iterate (v_0 included) and may return True to
    stop early.  Non-convergence is reported, not raised.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    current = heat_trajectory(psi, grid)
    iterates = [current] if keep_iterates else None
    distances: list[float] = []
    converged = False
    stop = bool(callback and callback(0, current))
    forcing, forcing_of = None, None
    n = 0
    while not stop and n < max_iter:
        forcing, forcing_of = forcing_trajectory(current, sym, method), current
        nxt = duhamel_map(forcing, psi, grid)
        nxt = Trajectory(grid, nxt.lattice, nxt.values,
                         psi.hermitian and sym.preserves_hermitian)
        n += 1
        d = trajectory_distance(nxt, current)
        distances.append(d)
        log.debug("picard iterate %d: distance %.3e", n, d)
        current = nxt
        if keep_iterates:
            iterates.append(current)
        halt = bool(callback and callback(n, current))
        if d <= tol:
            converged = True
            break
        if halt:
            break
    if not converged:
        log.info("picard: stopped after %d iterations without convergence (last distance %s)",
                 n, f"{distances[-1]:.3e}" if distances else "n/a")
    if forcing_of is not current:
        forcing = forcing_trajectory(current, sym, method)
    residual = _defect(current, psi, forcing, 0)
    D = current.sup_norm()
    report = PicardReport(n, distances, converged, residual,
                          truncation_tail_bound(psi.radius, D, sym), D, tol, max_iter, iterates)
    return current, report


def _defect(traj: Trajectory, start: SpectralField, forcing: np.ndarray, j0: int) -> float:
    grid = traj.grid
    lam = traj.lattice.norm2.astype(float)
    tail = forcing[j0:]
    rel = grid.nodes[j0:] - grid.nodes[j0]
    predicted = np.exp(-np.outer(rel, lam))[:, None, :] * start.values[None]
    predicted = predicted + duhamel_integral(lam, tail, grid.dt)
    diff = np.abs(traj.values[j0:] - predicted) * traj.lattice.norm2
    return float(diff[1:].max(initial=0.0))


def restart_residual(traj: Trajectory, tau: float, sym: BilinearSymbol,
                     method: str = "fft", forcing: Optional[np.ndarray] = None) -> float:
    """Defect of the mild form restarted at node ``tau``.

    sup over nodes t > tau of phi2_norm(v(t) - [v(tau) e^{-|xi|^2 (t - tau)}
    + int_tau^t e^{-|xi|^2 (t - s)} B(v, v)(s) ds]).  At tau = 0 this is
    the fixed-point residual of the whole trajectory.
    """
    j0 = traj.grid.node_index(tau)
    if forcing is None:
        forcing = forcing_trajectory(traj, sym, method)
    return _defect(traj, traj[j0], forcing, j0)
