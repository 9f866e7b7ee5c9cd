"""Bilinear symbols M_ijk(xi) with growth |M_ijk(xi)| <= c |xi|.

Index convention: slot i contracts with u^i(q), slot j with v^j(xi - q),
slot k is the output component.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lattice import Frequency, Lattice, lattice


class SymbolKind(str, Enum):
    NAVIER_STOKES_LERAY = "navier_stokes_leray"
    WORST_CASE_SCALAR = "worst_case_scalar"
    ZERO = "zero"


@dataclass(frozen=True)
class BilinearSymbol:
    kind: SymbolKind = SymbolKind.NAVIER_STOKES_LERAY
    bound_constant: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SymbolKind(self.kind))
        if not self.bound_constant > 0:
            raise ValueError(f"bound_constant must be positive, got {self.bound_constant}")

    @property
    def preserves_hermitian(self) -> bool:
        # M(-xi) = conj M(xi) for every kind implemented here
        return True

    def __call__(self, xi) -> np.ndarray:
        return eval_symbol(self, xi)


def _tensors(kind: SymbolKind, pts: np.ndarray) -> np.ndarray:
    """Symbol tensors for an (n, 3) array of nonzero frequencies -> (3, 3, 3, n)."""
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    out = np.zeros((3, 3, 3, n), dtype=np.complex128)
    if kind is SymbolKind.ZERO:
        return out
    norm2 = np.einsum("pk,pk->p", pts, pts)
    if kind is SymbolKind.WORST_CASE_SCALAR:
        norm = np.sqrt(norm2)
        for k in range(3):
            out[k, k, k] = norm
        return out
    # -i xi_i (delta_jk - xi_j xi_k / |xi|^2)
    proj = np.eye(3)[:, :, None] - pts.T[:, None, :] * pts.T[None, :, :] / norm2
    out[:] = -1j * pts.T[:, None, None, :] * proj[None, :, :, :]
    return out


def eval_symbol(sym: BilinearSymbol, xi) -> np.ndarray:
    """The 3x3x3 complex tensor M_ijk(xi)."""
    xi = Frequency(xi)
    return _tensors(sym.kind, np.array([xi]))[..., 0]


@functools.lru_cache(maxsize=32)
def _table(kind: SymbolKind, lat: Lattice) -> np.ndarray:
    tab = _tensors(kind, lat.points)
    tab.setflags(write=False)
    return tab


def symbol_table(sym: BilinearSymbol, lat: Lattice) -> np.ndarray:
    """M_ijk at every stored point of ``lat``, shape (3, 3, 3, lat.size)."""
    return _table(sym.kind, lat)


def active_pairs(sym: BilinearSymbol) -> list[tuple[int, int]]:
    """Input component pairs (i, j) the symbol actually couples."""
    if sym.kind is SymbolKind.ZERO:
        return []
    if sym.kind is SymbolKind.WORST_CASE_SCALAR:
        return [(0, 0), (1, 1), (2, 2)]
    return [(i, j) for i in range(3) for j in range(3)]


def symbol_bound_margin(sym: BilinearSymbol, radius: float) -> float:
    """Effective constant: max over 1 <= |xi| <= R of |M_ijk(xi)| / |xi|."""
    lat = lattice(radius)
    tab = symbol_table(sym, lat)
    if lat.size == 0:
        return 0.0
    return float((np.abs(tab) / lat.norm).max())
