"""Integer frequency lattice, truncated spectral fields and lattice sums.

A field truncated at radius R stores one complex 3-vector per nonzero
frequency with |xi| <= R.  Values are kept packed along the lattice points
(in lexicographic order of the integer triples), so every field on the same
radius shares one :class:`Lattice` geometry object.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

import numpy as np

GENERATOR_NAME = "numpy.random.PCG64"
DATA_KINDS = ("random_ball", "single_mode", "deterministic_profile")


class Frequency(tuple):
    """A nonzero integer triple."""

    __slots__ = ()

    def __new__(cls, *components):
        if len(components) == 1:
            components = tuple(components[0])
        if len(components) != 3:
            raise ValueError(f"a frequency has three components, got {components!r}")
        comps = []
        for c in components:
            if int(c) != c:
                raise ValueError(f"non-integer frequency component {c!r}")
            comps.append(int(c))
        if comps == [0, 0, 0]:
            raise ValueError("the zero frequency is excluded")
        return super().__new__(cls, comps)

    @property
    def norm2(self) -> int:
        return self[0] * self[0] + self[1] * self[1] + self[2] * self[2]

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm2)

    def __neg__(self) -> "Frequency":
        return Frequency(-self[0], -self[1], -self[2])


class Lattice:
    """Nonzero lattice points in the closed ball of radius ``radius``."""

    def __init__(self, radius: float):
        if not radius >= 1:
            raise ValueError(f"truncation radius must be >= 1, got {radius}")
        self.radius = float(radius)
        L = int(math.floor(self.radius + 1e-12))
        self.side = L
        ax = np.arange(-L, L + 1)
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        n2 = X * X + Y * Y + Z * Z
        keep = (n2 >= 1) & (n2 <= self.radius * self.radius + 1e-9)
        self.points = np.stack([X[keep], Y[keep], Z[keep]], axis=1).astype(np.int64)
        self.norm2 = n2[keep].astype(np.int64)
        self.norm = np.sqrt(self.norm2.astype(float))
        self.size = len(self.points)

        width = 2 * L + 1
        cube = np.full(width ** 3, -1, dtype=np.int64)
        cube[self._cube_flat(self.points)] = np.arange(self.size)
        self._cube = cube
        self.neg = cube[self._cube_flat(-self.points)]
        for arr in (self.points, self.norm2, self.norm, self.neg):
            arr.setflags(write=False)

    def _cube_flat(self, pts: np.ndarray) -> np.ndarray:
        L = self.side
        w = 2 * L + 1
        p = pts + L
        return (p[..., 0] * w + p[..., 1]) * w + p[..., 2]

    def lookup(self, pts) -> np.ndarray:
        """Point indices for integer triples (``-1`` where not stored)."""
        pts = np.asarray(pts, dtype=np.int64)
        inside = np.all(np.abs(pts) <= self.side, axis=-1)
        out = np.full(pts.shape[:-1], -1, dtype=np.int64)
        out[inside] = self._cube[self._cube_flat(pts[inside])]
        return out

    def index(self, xi) -> int:
        return int(self.lookup(np.asarray(xi)[None, :])[0])

    @functools.cached_property
    def offset_table(self) -> np.ndarray:
        """Point index of every offset in [-2L, 2L]^3, ``size`` when absent.

        Used to find xi - q without bounds checks; the sentinel ``size``
        addresses an appended zero column.
        """
        L = self.side
        w = 4 * L + 1
        table = np.full(w ** 3, self.size, dtype=np.int32)
        p = self.points + 2 * L
        table[(p[:, 0] * w + p[:, 1]) * w + p[:, 2]] = np.arange(self.size)
        return table

    def offset_index(self, diff: np.ndarray) -> np.ndarray:
        L = self.side
        w = 4 * L + 1
        p = diff + 2 * L
        return self.offset_table[(p[..., 0] * w + p[..., 1]) * w + p[..., 2]]

    @functools.cached_property
    def shells(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct squared norms and, per point, the shell it falls in."""
        n2, inverse = np.unique(self.norm2, return_inverse=True)
        return n2, inverse

    def __repr__(self) -> str:
        return f"Lattice(radius={self.radius}, points={self.size})"


@functools.lru_cache(maxsize=16)
def lattice(radius: float) -> Lattice:
    return Lattice(float(radius))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Truncated field: ``values[k, p]`` is component k at ``lattice.points[p]``."""

    lattice: Lattice
    values: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (3, self.lattice.size):
            raise ValueError(
                f"values must have shape (3, {self.lattice.size}), got {vals.shape}"
            )
        if vals is self.values and vals.flags.writeable:
            vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def radius(self) -> float:
        return self.lattice.radius

    @classmethod
    def zeros(cls, radius: float, hermitian: bool = True) -> "SpectralField":
        lat = lattice(radius)
        return cls(lat, np.zeros((3, lat.size), dtype=np.complex128), hermitian)

    @classmethod
    def from_entries(cls, radius: float, entries: dict, hermitian: bool = False) -> "SpectralField":
        lat = lattice(radius)
        vals = np.zeros((3, lat.size), dtype=np.complex128)
        for xi, vec in entries.items():
            xi = Frequency(xi)
            idx = lat.index(xi)
            if idx < 0:
                raise ValueError(f"frequency {tuple(xi)} lies outside radius {radius}")
            vals[:, idx] = vec
        return cls(lat, vals, hermitian)

    def __getitem__(self, xi) -> np.ndarray:
        idx = self.lattice.index(Frequency(xi))
        if idx < 0:
            return np.zeros(3, dtype=np.complex128)
        return self.values[:, idx]

    def items(self) -> Iterator[tuple[Frequency, np.ndarray]]:
        for p, vec in zip(self.lattice.points, self.values.T):
            yield Frequency(p), vec

    def _check_same(self, other: "SpectralField") -> None:
        if other.lattice is not self.lattice and other.radius != self.radius:
            raise ValueError(
                f"truncation radius mismatch: {self.radius} vs {other.radius}"
            )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_same(other)
        return SpectralField(self.lattice, self.values + other.values,
                             self.hermitian and other.hermitian)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_same(other)
        return SpectralField(self.lattice, self.values - other.values,
                             self.hermitian and other.hermitian)

    def __mul__(self, alpha) -> "SpectralField":
        alpha = complex(alpha)
        return SpectralField(self.lattice, alpha * self.values,
                             self.hermitian and alpha.imag == 0)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.lattice, -self.values, self.hermitian)


def phi2_norm(f: SpectralField) -> float:
    """sup over stored xi and components of |xi|^2 |f^k(xi)|."""
    if f.lattice.size == 0:
        return 0.0
    weighted = np.abs(f.values) * f.lattice.norm2
    return float(weighted.max(initial=0.0))


def hermitian_defect(f: SpectralField) -> float:
    """max |f(-xi) - conj f(xi)|."""
    return float(np.abs(f.values[:, f.lattice.neg] - np.conj(f.values)).max(initial=0.0))


def is_hermitian(f: SpectralField, atol: float = 0.0) -> bool:
    return hermitian_defect(f) <= atol


def hermitian_project(f: SpectralField) -> SpectralField:
    """Average f with its reflected conjugate, (f(xi) + conj f(-xi)) / 2."""
    vals = 0.5 * (f.values + np.conj(f.values[:, f.lattice.neg]))
    return SpectralField(f.lattice, vals, True)


def leray_project(f: SpectralField) -> SpectralField:
    """Remove the component of f(xi) parallel to xi."""
    pts = f.lattice.points.T.astype(float)
    along = np.einsum("kp,kp->p", pts, f.values) / f.lattice.norm2
    return SpectralField(f.lattice, f.values - pts * along, f.hermitian)


def make_small_data(eps: float, radius: float, seed: int = 0,
                    kind: str = "random_ball", *, mode=(1, 0, 0),
                    component: int = 0, solenoidal: bool = False) -> SpectralField:
    """Hermitian initial data with ``phi2_norm < eps``.

    ``random_ball`` draws c_xi uniformly from the complex unit disc per
    component and sets psi(xi) = eps c_xi / (2 |xi|^2) on a half lattice,
    mirroring by conjugation.  ``single_mode`` puts eps/(2|xi|^2) on one
    Hermitian pair, ``deterministic_profile`` the same value on every
    component of every mode.  ``solenoidal`` projects each value
    orthogonal to xi (scaled by 1/sqrt(3) so the bound survives).
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if kind not in DATA_KINDS:
        raise ValueError(f"unknown data kind {kind!r}; expected one of {DATA_KINDS}")
    lat = lattice(radius)
    amp = eps / (2.0 * lat.norm2)

    if kind == "single_mode":
        xi = Frequency(mode)
        idx, nidx = lat.index(xi), lat.index(-xi)
        if idx < 0:
            raise ValueError(f"mode {tuple(xi)} lies outside radius {radius}")
        vals = np.zeros((3, lat.size), dtype=np.complex128)
        vals[component, idx] = amp[idx]
        vals[component, nidx] = amp[nidx]
        field = SpectralField(lat, vals, True)
        if solenoidal:
            field = leray_project(field)
        return field

    if kind == "deterministic_profile":
        c = np.ones((3, lat.size), dtype=np.complex128)
    else:
        rng = np.random.Generator(np.random.PCG64(seed))
        r = np.sqrt(rng.random((3, lat.size)))
        theta = 2.0 * np.pi * rng.random((3, lat.size))
        c = r * np.exp(1j * theta)
        # canonical representative of each +-xi pair: the later one in
        # lexicographic order, its partner gets the conjugate
        lower = np.arange(lat.size) < lat.neg
        c[:, lower] = np.conj(c[:, lat.neg[lower]])
    if solenoidal:
        pts = lat.points.T.astype(float)
        c = (c - pts * (np.einsum("kp,kp->p", pts, c) / lat.norm2)) / math.sqrt(3.0)
    return SpectralField(lat, amp * c, True)


def field_distance(f: SpectralField, g: SpectralField) -> float:
    return phi2_norm(f - g)


# -- lattice counting ------------------------------------------------------

class TailSum(NamedTuple):
    enumerated: float
    tail_bound: float
    cutoff: float

    @property
    def upper(self) -> float:
        return self.enumerated + self.tail_bound


_R3_CACHE: dict[str, np.ndarray] = {}


def squared_norm_counts(n_max: int) -> np.ndarray:
    """r3(n): number of integer triples with squared norm n, for n <= n_max."""
    cached = _R3_CACHE.get("r3")
    if cached is not None and len(cached) > n_max:
        return cached[: n_max + 1]
    n_max = max(int(n_max), 16)
    r1 = np.zeros(n_max + 1, dtype=np.int64)
    s = math.isqrt(n_max)
    sq = np.arange(-s, s + 1) ** 2
    np.add.at(r1, sq, 1)
    r2 = np.zeros_like(r1)
    for x in range(-s, s + 1):
        r2[x * x:] += r1[: n_max + 1 - x * x]
    r3 = np.zeros_like(r1)
    for x in range(-s, s + 1):
        r3[x * x:] += r2[: n_max + 1 - x * x]
    r3.setflags(write=False)
    _R3_CACHE["r3"] = r3
    return r3


def _inverse_power_terms(n_lo: int, n_hi: int, p: float) -> float:
    """Sum of r3(n) n^(-p/2) over n_lo <= n <= n_hi (n_lo >= 1)."""
    if n_hi < n_lo:
        return 0.0
    r3 = squared_norm_counts(n_hi)
    n = np.arange(n_lo, n_hi + 1)
    counts = r3[n_lo: n_hi + 1]
    nz = counts > 0
    terms = counts[nz] / np.power(n[nz].astype(float), p / 2.0)
    return math.fsum(terms.tolist())


def _squared_range(r_lo: float, r_hi: float) -> tuple[int, int]:
    n_lo = max(1, math.ceil(r_lo * r_lo - 1e-9))
    hi2 = r_hi * r_hi
    n_hi = math.ceil(hi2 - 1e-9) - 1  # n < r_hi^2
    return n_lo, n_hi


def inverse_power_tail_bound(cutoff: float, p: float) -> float:
    """Certified upper bound for the sum of |q|^-p over |q| >= cutoff.

    Each lattice point owns the unit cube around it; on that cube
    |x| - sqrt(3)/2 <= |q|, so the sum is dominated by the integral of
    (|x| - sqrt(3)/2)^-p over |x| >= cutoff - sqrt(3)/2.
    """
    if p <= 3:
        raise ValueError(f"tail of |q|^-{p} diverges in three dimensions")
    a = math.sqrt(3.0) / 2.0
    s0 = cutoff - 2.0 * a
    if s0 <= 0:
        raise ValueError(f"cutoff {cutoff} too small for the integral tail bound")
    return 4.0 * math.pi * (s0 ** (3 - p) / (p - 3) + 2 * a * s0 ** (2 - p) / (p - 2)
                            + a * a * s0 ** (1 - p) / (p - 1))


def lattice_tail_sum(r: float, p: float, cutoff_factor: float = 4.0) -> TailSum:
    """Sum of |q|^-p over |q| >= r: exact up to ``cutoff_factor * r``, bounded beyond."""
    if p <= 3:
        raise ValueError(f"tail of |q|^-{p} diverges in three dimensions")
    cutoff = max(cutoff_factor * max(r, 1.0), 4.0)
    n_lo, n_hi = _squared_range(r, cutoff)
    return TailSum(_inverse_power_terms(n_lo, n_hi, p),
                   inverse_power_tail_bound(cutoff, p), cutoff)


def shell_sum_inverse_power(r_lo: float, r_hi: float, p: int,
                            cutoff_factor: float = 4.0) -> float:
    """Sum of 1/|q|^p over lattice q with max(1, r_lo) <= |q| < r_hi.

    Finite ranges are enumerated exactly through the counts r3(n).  For
    ``r_hi = inf`` the result is the certified upper bound
    (enumeration to the cutoff plus the integral tail bound); use
    :func:`lattice_tail_sum` to see both parts.
    """
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    if math.isinf(r_hi):
        if p <= 3:
            raise ValueError(f"sum of |q|^-{p} to infinity diverges")
        return lattice_tail_sum(r_lo, p, cutoff_factor).upper
    if not r_lo < r_hi:
        raise ValueError(f"need r_lo < r_hi, got {r_lo}, {r_hi}")
    n_lo, n_hi = _squared_range(r_lo, r_hi)
    return _inverse_power_terms(n_lo, n_hi, p)


def lattice_point_count(r: float) -> int:
    """Number of q with 1 <= |q| < r."""
    n_lo, n_hi = _squared_range(1.0, r)
    if n_hi < n_lo:
        return 0
    return int(squared_norm_counts(n_hi)[n_lo: n_hi + 1].sum())


# -- snapshot files ---------------------------------------------------------------

SNAPSHOT_MAGIC = "# picardns spectral field"


def write_snapshot(path, f: SpectralField, seed: Optional[int] = None,
                   kind: Optional[str] = None, **meta) -> None:
    """Write ``f`` as a text document: a key/value header, then one row per stored xi.

    Rows are the three integer components of xi followed by re/im of the
    three field components, printed with 17 significant digits so that
    reading back reproduces every float exactly.
    """
    header = {"truncation_radius": repr(float(f.radius)), "hermitian": int(f.hermitian),
              "seed": "none" if seed is None else int(seed), "kind": kind or "none"}
    header.update({k: v for k, v in meta.items()})
    pts = f.lattice.points
    vals = f.values
    cols = np.empty((len(pts), 6))
    cols[:, 0::2] = vals.real.T
    cols[:, 1::2] = vals.imag.T
    with open(path, "w", encoding="ascii") as fh:
        fh.write(SNAPSHOT_MAGIC + "\n")
        for k, v in header.items():
            fh.write(f"{k} {v}\n")
        fh.write(f"points {len(pts)}\n")
        for p, row in zip(pts, cols):
            fh.write("%d %d %d " % tuple(p) + " ".join("%.17g" % x for x in row) + "\n")


def read_snapshot(path) -> tuple:
    """Inverse of :func:`write_snapshot`: returns (field, header dict)."""
    with open(path, encoding="ascii") as fh:
        if fh.readline().rstrip("\n") != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a field snapshot")
        header = {}
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated header")
            key, _, value = line.rstrip("\n").partition(" ")
            if key == "points":
                count = int(value)
                break
            header[key] = value
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2) if count else np.zeros((0, 9))
    if len(data) != count:
        raise ValueError(f"{path}: expected {count} rows, found {len(data)}")
    radius = float(header["truncation_radius"])
    lat = lattice(radius)
    idx = lat.lookup(data[:, :3].astype(np.int64))
    if count != lat.size or np.any(idx < 0) or len(np.unique(idx)) != count:
        raise ValueError(f"{path}: rows do not cover the lattice of radius {radius}")
    values = np.zeros((3, lat.size), dtype=np.complex128)
    values[:, idx] = (data[:, 3::2] + 1j * data[:, 4::2]).T
    f = SpectralField(lat, values, bool(int(header["hermitian"])))
    return f, header
