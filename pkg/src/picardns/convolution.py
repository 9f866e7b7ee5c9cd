"""The lattice bilinear term and its shell decompositions.

    B(u, v)^k(xi) = sum_q M_ijk(xi) u^i(q) v^j(xi - q)

over the Galerkin-truncated lattice: q, xi - q and xi all nonzero with
norm <= R.  :func:`bilinear_direct` is the brute-force oracle,
:func:`bilinear_fft` the fast path through zero-padded transforms.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .lattice import Frequency, Lattice, SpectralField, phi2_norm
from .symbol import BilinearSymbol, active_pairs, eval_symbol, symbol_table

# output rows per block in the direct sum; bounds the gathered block size
_DIRECT_BLOCK_ENTRIES = 1 << 21
_DIRECT_BLOCK_ROWS = 128

# pair tables up to this many entries are cached (int32, ~100 MB)
_PAIR_INDEX_MAX = 25_000_000

_fft_workers = 1


def set_fft_workers(n: int) -> None:
    global _fft_workers
    _fft_workers = max(1, int(n))


def _check_pair(u: SpectralField, v: SpectralField) -> Lattice:
    if u.lattice is not v.lattice and u.radius != v.radius:
        raise ValueError(f"truncation radius mismatch: {u.radius} vs {v.radius}")
    return u.lattice


def _contract(tab: np.ndarray, W: dict, cols) -> np.ndarray:
    n = len(next(iter(W.values())))
    out = np.zeros((3, n), dtype=np.complex128)
    for (i, j), w in W.items():
        out += tab[i, j][:, cols] * w
    return out


@functools.lru_cache(maxsize=2)
def _pair_index(lat: Lattice) -> np.ndarray:
    """idx[x, q] = point index of points[x] - points[q] (``size`` if absent)."""
    idx = np.empty((lat.size, lat.size), dtype=np.int32)
    step = max(1, (1 << 21) // max(lat.size, 1))
    for s in range(0, lat.size, step):
        idx[s: s + step] = lat.offset_index(lat.points[s: s + step, None, :] - lat.points[None, :, :])
    idx.setflags(write=False)
    return idx


def bilinear_direct_at(u: SpectralField, v: SpectralField, sym: BilinearSymbol,
                       outputs: np.ndarray) -> np.ndarray:
    """Direct sums at the given output point indices -> (3, len(outputs)).

    For each output xi the sum runs over every stored q in lexicographic
    order; absent xi - q hit an appended zero column.
    """
    lat = _check_pair(u, v)
    outputs = np.asarray(outputs, dtype=np.int64)
    pairs = active_pairs(sym)
    if not pairs or len(outputs) == 0:
        return np.zeros((3, len(outputs)), dtype=np.complex128)
    tab = symbol_table(sym, lat)
    vext = np.ascontiguousarray(
        np.concatenate([v.values, np.zeros((3, 1), dtype=np.complex128)], axis=1))
    uT = np.ascontiguousarray(u.values.T)
    js = sorted({j for _, j in pairs})
    out = np.empty((3, len(outputs)), dtype=np.complex128)
    block = max(1, min(_DIRECT_BLOCK_ROWS, _DIRECT_BLOCK_ENTRIES // max(lat.size, 1)))
    full = _pair_index(lat) if lat.size ** 2 <= _PAIR_INDEX_MAX else None
    buf = np.empty((block, lat.size), dtype=np.complex128)
    for start in range(0, len(outputs), block):
        rows = outputs[start: start + block]
        if full is not None:
            idx = full[rows]
        else:
            idx = lat.offset_index(lat.points[rows, None, :] - lat.points[None, :, :])
        gathered = buf[: len(rows)]
        W = {}
        for j in js:
            np.take(vext[j], idx, out=gathered)
            # (rows, q) @ (q, i): sum over q of v^j(xi - q) u^i(q)
            prod = gathered @ uT
            for (i, jj) in pairs:
                if jj == j:
                    W[(i, j)] = prod[:, i]
        out[:, start: start + len(rows)] = _contract(tab, W, rows)
    return out


def bilinear_direct(u: SpectralField, v: SpectralField, sym: BilinearSymbol) -> SpectralField:
    """Brute-force Galerkin-truncated bilinear term (the oracle)."""
    lat = _check_pair(u, v)
    vals = bilinear_direct_at(u, v, sym, np.arange(lat.size))
    return SpectralField(lat, vals, u.hermitian and v.hermitian and sym.preserves_hermitian)


def fft_grid_size(radius: float) -> int:
    """Transform side length N >= 4 ceil(R) + 1, rounded up to a fast size."""
    return sfft.next_fast_len(4 * math.ceil(radius - 1e-12) + 1)


class _Grid:
    """Scatter/gather indices between packed points and an N^3 transform grid."""

    def __init__(self, lat: Lattice):
        N = fft_grid_size(lat.radius)
        self.N = N
        wrapped = np.mod(lat.points, N)
        self.full = (wrapped[:, 0] * N + wrapped[:, 1]) * N + wrapped[:, 2]
        # half spectrum layout used by rfftn: last axis 0..N//2
        H = N // 2 + 1
        self.H = H
        self.upper = lat.points[:, 2] >= 0
        up = wrapped[self.upper]
        self.half_scatter = (up[:, 0] * N + up[:, 1]) * H + up[:, 2]
        # every point read from the half spectrum at xi (z >= 0) or at -xi
        src = np.where(self.upper[:, None], lat.points, -lat.points)
        src = np.mod(src, N)
        self.half_gather = (src[:, 0] * N + src[:, 1]) * H + src[:, 2]


@functools.lru_cache(maxsize=8)
def _grid(lat: Lattice) -> _Grid:
    return _Grid(lat)


def _physical_complex(g: _Grid, comp: np.ndarray) -> np.ndarray:
    N = g.N
    spectrum = np.zeros(N ** 3, dtype=np.complex128)
    spectrum[g.full] = comp
    return sfft.ifftn(spectrum.reshape(N, N, N), norm="forward", workers=_fft_workers)


def _physical_real(g: _Grid, comp: np.ndarray) -> np.ndarray:
    N, H = g.N, g.H
    spectrum = np.zeros(N * N * H, dtype=np.complex128)
    spectrum[g.half_scatter] = comp[g.upper]
    return sfft.irfftn(spectrum.reshape(N, N, H), s=(N, N, N), norm="forward",
                       workers=_fft_workers)


def bilinear_fft(u: SpectralField, v: SpectralField, sym: BilinearSymbol) -> SpectralField:
    """Same sum as :func:`bilinear_direct`, through padded transforms.

    Each coupled pair (i, j) is one linear convolution
    W_ij(xi) = sum_q u^i(q) v^j(xi - q), computed as a pointwise product
    in physical space; the grid is large enough that no wraparound term
    reaches an output |xi| <= R.  Hermitian inputs use real transforms.
    """
    lat = _check_pair(u, v)
    herm = u.hermitian and v.hermitian and sym.preserves_hermitian
    pairs = active_pairs(sym)
    if not pairs:
        return SpectralField(lat, np.zeros((3, lat.size), dtype=np.complex128), herm)
    g = _grid(lat)
    real = u.hermitian and v.hermitian
    to_phys = _physical_real if real else _physical_complex
    same = u is v or np.array_equal(u.values, v.values)
    U = {i: to_phys(g, u.values[i]) for i in sorted({i for i, _ in pairs})}
    V = U if same else {j: to_phys(g, v.values[j]) for j in sorted({j for _, j in pairs})}
    W = {}
    for (i, j) in pairs:
        if same and (j, i) in W:
            W[(i, j)] = W[(j, i)]
            continue
        prod = U[i] * V[j]
        if real:
            spectrum = sfft.rfftn(prod, norm="forward", workers=_fft_workers).ravel()
            w = spectrum[g.half_gather]
            w[~g.upper] = np.conj(w[~g.upper])
        else:
            spectrum = sfft.fftn(prod, norm="forward", workers=_fft_workers).ravel()
            w = spectrum[g.full]
        W[(i, j)] = w
    vals = _contract(symbol_table(sym, lat), W, slice(None))
    return SpectralField(lat, vals, herm)


def bilinear(u: SpectralField, v: SpectralField, sym: BilinearSymbol,
             method: str = "fft") -> SpectralField:
    if method == "fft":
        return bilinear_fft(u, v, sym)
    if method == "direct":
        return bilinear_direct(u, v, sym)
    raise ValueError(f"unknown bilinear method {method!r}")


def divergence_defect(f: SpectralField) -> float:
    """max over xi of |sum_k xi_k f^k(xi)|."""
    pts = f.lattice.points.T.astype(float)
    return float(np.abs(np.einsum("kp,kp->p", pts, f.values)).max(initial=0.0))


# -- shell decompositions --------------------------------------------------

EXISTENCE_REGIONS = ("I", "II", "III")
REGULARITY_REGIONS = ("low", "middle", "high_inner", "high_mid_far", "high_mid_near", "high_outer")
SMOOTHING_REGIONS = ("I_a", "II_a", "III_a", "IV_a", "I_b", "II_b", "III_b", "IV_b")


def existence_regions(nq, nr, nxi) -> np.ndarray:
    """Membership masks (3, n) for the bounded-growth split, on squared norms.

    I: |q| < 2|xi| and |xi - q| <= |xi|/2;  II: |q| < 2|xi| and
    |xi - q| > |xi|/2;  III: |q| >= 2|xi|.
    """
    nq, nr, nxi = (np.asarray(a, dtype=np.int64) for a in (nq, nr, nxi))
    far = nq >= 4 * nxi
    near = 4 * nr <= nxi
    return np.stack([~far & near, ~far & ~near, far])


def regularity_regions(nq, nr, nxi, k_minus1: float, k_m: float) -> np.ndarray:
    """Membership masks (6, n) for the decay-bootstrap split.

    low: |q| < k_-1; middle: k_-1 <= |q| < k_m; the rest (|q| >= k_m) is
    cut into |q| < |xi|/2, the annulus |xi|/2 <= |q| < 2|xi| (split by
    |xi - q| >= k_m or < k_m) and |q| >= 2|xi|.
    """
    nq, nr, nxi = (np.asarray(a, dtype=np.int64) for a in (nq, nr, nxi))
    qn = np.sqrt(nq.astype(float))
    rn = np.sqrt(nr.astype(float))
    low = qn < k_minus1
    middle = ~low & (qn < k_m)
    high = ~low & ~middle
    inner = 4 * nq < nxi
    outer = nq >= 4 * nxi
    annulus = ~inner & ~outer
    return np.stack([low, middle, high & inner, high & annulus & (rn >= k_m),
                     high & annulus & (rn < k_m), high & outer])


def smoothing_regions(nq, nr, nxi) -> np.ndarray:
    """Membership masks (8, n) for the decay-gain split.

    The "a" regions take q as the smaller partner (|q| <= |xi - q|), the
    "b" regions swap the roles (|xi - q| < |q|).  With s the smaller and
    l the larger norm: I: s <= sqrt|xi|; II: sqrt|xi| < s <= |xi|/2;
    III: s > |xi|/2, l < 2|xi|; IV: s > |xi|/2, l >= 2|xi|.
    """
    nq, nr, nxi = (np.asarray(a, dtype=np.int64) for a in (nq, nr, nxi))
    a_case = nq <= nr
    small = np.where(a_case, nq, nr)
    large = np.where(a_case, nr, nq)
    r1 = small * small <= nxi
    r2 = ~r1 & (4 * small <= nxi)
    rest = ~r1 & ~r2
    r3 = rest & (large < 4 * nxi)
    r4 = rest & ~r3
    parts = [r1, r2, r3, r4]
    return np.stack([p & a_case for p in parts] + [p & ~a_case for p in parts])


@dataclass
class PairTerms:
    """Per-q summands of B(u, u)(xi) over the admissible q of a truncated lattice."""

    xi: Frequency
    nq: np.ndarray
    nr: np.ndarray
    terms: np.ndarray  # (3, n): M_ijk(xi) u^i(q) u^j(xi - q)

    def region_sums(self, masks: np.ndarray) -> np.ndarray:
        """max_k |sum over the region| for every mask row."""
        return np.array([np.abs(self.terms[:, m].sum(axis=1)).max() if m.any() else 0.0
                         for m in masks])

    @property
    def total(self) -> float:
        return float(np.abs(self.terms.sum(axis=1)).max()) if self.terms.size else 0.0


def pair_terms(u: SpectralField, sym: BilinearSymbol, xi) -> PairTerms:
    xi = Frequency(xi)
    lat = u.lattice
    diff = np.asarray(xi)[None, :] - lat.points
    ridx = lat.lookup(diff)
    ok = ridx >= 0
    qi = np.nonzero(ok)[0]
    ri = ridx[ok]
    M = eval_symbol(sym, xi)
    uq = u.values[:, qi]
    ur = u.values[:, ri]
    terms = np.einsum("ijk,ip,jp->kp", M, uq, ur)
    return PairTerms(xi, lat.norm2[qi], lat.norm2[ri], terms)


@dataclass
class ShellReportExistence:
    xi: tuple
    eps: float
    parts: dict
    total: float
    claimed_bound: float
    effective_c: float
    counts: dict
    admissible: int
    hypothesis_ok: bool = True

    @property
    def I(self) -> float:
        return self.parts["I"]

    @property
    def II(self) -> float:
        return self.parts["II"]

    @property
    def III(self) -> float:
        return self.parts["III"]


def shell_diagnostics_existence(u: SpectralField, sym: BilinearSymbol, xi, eps: float,
                                c: float | None = None) -> ShellReportExistence:
    """Split B(u, u)(xi) into the three bounded-growth regions.

    ``effective_c`` is (|I| + |II| + |III|) / eps^2; the claimed bound is
    c eps^2 with ``c`` defaulting to the symbol's bound constant.
    """
    xi = Frequency(xi)
    ok = phi2_norm(u) <= eps * (1 + 1e-12)
    if not ok:
        warnings.warn(f"phi2_norm(u) = {phi2_norm(u):.3e} exceeds eps = {eps:.3e}",
                      stacklevel=2)
    pt = pair_terms(u, sym, xi)
    masks = existence_regions(pt.nq, pt.nr, xi.norm2)
    sums = pt.region_sums(masks)
    parts = dict(zip(EXISTENCE_REGIONS, sums.tolist()))
    c = sym.bound_constant if c is None else c
    return ShellReportExistence(
        xi=tuple(xi), eps=eps, parts=parts, total=pt.total,
        claimed_bound=c * eps * eps, effective_c=float(sums.sum()) / (eps * eps),
        counts=dict(zip(EXISTENCE_REGIONS, masks.sum(axis=1).tolist())),
        admissible=len(pt.nq), hypothesis_ok=ok)


@dataclass
class ShellReportRegularity:
    xi: tuple
    eps: float
    mu_m: float
    k_minus1: float
    k_m: float
    parts: dict
    total: float
    counts: dict
    admissible: int
    measured_constant: float  # total / eps^(2 mu_m)
    aggregate_constant: float = 28.0
    geometry_ok: bool = True  # |xi| >= 2 k_m

    @property
    def conclusion_bound(self) -> float:
        return self.eps ** (2 * self.mu_m - 1)

    @property
    def constant_ok(self) -> bool:
        return self.measured_constant <= self.aggregate_constant

    @property
    def passed(self) -> bool:
        return self.total <= self.conclusion_bound

    @property
    def margin(self) -> float:
        return self.conclusion_bound - self.total


def shell_diagnostics_regularity(u: SpectralField, sym: BilinearSymbol, xi, k_minus1: float,
                                 k_m: float, eps: float, mu_m: float,
                                 aggregate_constant: float = 28.0) -> ShellReportRegularity:
    """Region sums for one bootstrap step at output frequency xi.

    The step concludes |B(u, u)(xi)| <= eps^(2 mu_m - 1); the measured
    constant total / eps^(2 mu_m) is compared with ``aggregate_constant``.
    """
    xi = Frequency(xi)
    pt = pair_terms(u, sym, xi)
    masks = regularity_regions(pt.nq, pt.nr, xi.norm2, k_minus1, k_m)
    sums = pt.region_sums(masks)
    return ShellReportRegularity(
        xi=tuple(xi), eps=eps, mu_m=mu_m, k_minus1=k_minus1, k_m=k_m,
        parts=dict(zip(REGULARITY_REGIONS, sums.tolist())), total=pt.total,
        counts=dict(zip(REGULARITY_REGIONS, masks.sum(axis=1).tolist())),
        admissible=len(pt.nq), measured_constant=pt.total / eps ** (2 * mu_m),
        aggregate_constant=aggregate_constant, geometry_ok=xi.norm >= 2 * k_m)


def smoothing_rates(eta: float) -> dict:
    """Claimed |xi|-exponents of each decay-gain part (negative = decaying)."""
    rates = {"I": -(0.5 + eta), "II": -1.5 * eta, "III": -2.0 * eta, "IV": -2.0 * eta}
    return {f"{r}_{s}": rates[r] for s in ("a", "b") for r in ("I", "II", "III", "IV")}


def smoothing_scales(eta: float, D: float, xi_norm: float) -> dict:
    """Claimed bounds of the eight parts (with unit lattice constants)."""
    pre = 2.0 ** (2 + eta) * D * D
    base = {"I": pre, "II": pre, "III": pre, "IV": D * D}
    rates = smoothing_rates(eta)
    return {name: base[name.split("_")[0]] * xi_norm ** rates[name] for name in rates}


@dataclass
class ShellReportSmoothing:
    xi: tuple
    eta: float
    D: float
    parts: dict
    claimed: dict
    total: float
    counts: dict
    admissible: int
    hypothesis_ok: bool

    @property
    def effective_constants(self) -> dict:
        return {k: (self.parts[k] / self.claimed[k] if self.claimed[k] > 0 else 0.0)
                for k in self.parts}


def shell_diagnostics_smoothing(u: SpectralField, sym: BilinearSymbol, xi, D: float,
                                eta: float) -> ShellReportSmoothing:
    xi = Frequency(xi)
    lat = u.lattice
    envelope = D / lat.norm ** (2 + eta)
    ok = bool(np.all(np.abs(u.values) <= envelope * (1 + 1e-12)))
    if not ok:
        warnings.warn("field exceeds the D/|q|^(2+eta) envelope", stacklevel=2)
    pt = pair_terms(u, sym, xi)
    masks = smoothing_regions(pt.nq, pt.nr, xi.norm2)
    sums = pt.region_sums(masks)
    return ShellReportSmoothing(
        xi=tuple(xi), eta=eta, D=D, parts=dict(zip(SMOOTHING_REGIONS, sums.tolist())),
        claimed=smoothing_scales(eta, D, xi.norm), total=pt.total,
        counts=dict(zip(SMOOTHING_REGIONS, masks.sum(axis=1).tolist())),
        admissible=len(pt.nq), hypothesis_ok=ok)


@dataclass
class SmoothingScaling:
    eta: float
    xi_norms: list
    slopes: dict
    claimed: dict
    tolerance: float = 0.15
    reports: list = field(default_factory=list)

    @property
    def passed(self) -> dict:
        # the claimed rates are upper bounds: a part may decay faster
        return {k: self.slopes[k] <= self.claimed[k] + self.tolerance for k in self.slopes}


def smoothing_scaling(u: SpectralField, sym: BilinearSymbol, xis, D: float, eta: float,
                      tolerance: float = 0.15) -> SmoothingScaling:
    """Log-log slopes of every decay-gain part across several output frequencies."""
    reps = [shell_diagnostics_smoothing(u, sym, xi, D, eta) for xi in xis]
    x = np.log([Frequency(xi).norm for xi in xis])
    slopes = {}
    for name in SMOOTHING_REGIONS:
        y = np.array([r.parts[name] for r in reps])
        if np.all(y > 0):
            slopes[name] = float(np.polyfit(x, np.log(y), 1)[0])
        else:
            slopes[name] = -math.inf
    return SmoothingScaling(eta, [float(v) for v in np.exp(x)], slopes,
                            smoothing_rates(eta), tolerance, reps)


def saturating_field(radius: float, amplitude) -> SpectralField:
    """u^k(q) = A(|q|) / |q|^2 on every component, A given as a scalar or callable."""
    from .lattice import lattice

    lat = lattice(radius)
    amp = amplitude(lat.norm) if callable(amplitude) else amplitude * np.ones(lat.size)
    vals = np.broadcast_to(amp / lat.norm2, (3, lat.size)).astype(np.complex128)
    return SpectralField(lat, vals, True)


def power_law_field(radius: float, D: float, exponent: float) -> SpectralField:
    """u^k(q) = D / |q|^exponent on every component."""
    return saturating_field(radius, lambda n: D * n ** (2.0 - exponent))
