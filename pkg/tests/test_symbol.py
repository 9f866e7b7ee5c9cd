"""Bilinear symbol tensors."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from picardns.lattice import lattice
from picardns.symbol import (BilinearSymbol, SymbolKind, active_pairs, eval_symbol,
                             symbol_bound_margin, symbol_table)

nonzero_xi = st.tuples(*[st.integers(-6, 6)] * 3).filter(lambda x: any(x))


def test_kind_parsing_and_validation():
    assert BilinearSymbol("zero").kind is SymbolKind.ZERO
    with pytest.raises(ValueError):
        BilinearSymbol("nonsense")
    with pytest.raises(ValueError):
        BilinearSymbol(SymbolKind.ZERO, bound_constant=0.0)


def test_leray_symbol_explicit_entry():
    M = eval_symbol(BilinearSymbol(SymbolKind.NAVIER_STOKES_LERAY), (1, 2, 2))
    # -i xi_i (delta_jk - xi_j xi_k / 9)
    assert M[1, 0, 0] == pytest.approx(-2j * (1 - 1 / 9))
    assert M[2, 1, 2] == pytest.approx(-2j * (0 - 4 / 9))


@settings(max_examples=40, deadline=None)
@given(xi=nonzero_xi)
def test_leray_symbol_output_is_transverse(xi):
    M = eval_symbol(BilinearSymbol(SymbolKind.NAVIER_STOKES_LERAY), xi)
    assert np.abs(np.einsum("ijk,k->ij", M, np.asarray(xi, float))).max() < 1e-12


@settings(max_examples=40, deadline=None)
@given(xi=nonzero_xi, kind=st.sampled_from(list(SymbolKind)))
def test_symbol_is_hermitian_and_linearly_bounded(xi, kind):
    sym = BilinearSymbol(kind)
    M = eval_symbol(sym, xi)
    Mneg = eval_symbol(sym, tuple(-c for c in xi))
    assert np.allclose(Mneg, np.conj(M), atol=1e-14)
    assert np.abs(M).max() <= np.linalg.norm(xi) * (1 + 1e-12)


def test_worst_case_is_diagonal_norm():
    M = eval_symbol(BilinearSymbol(SymbolKind.WORST_CASE_SCALAR), (3, 4, 0))
    for k in range(3):
        assert M[k, k, k] == 5.0
    assert np.count_nonzero(M) == 3


def test_table_matches_pointwise_evaluation():
    lat = lattice(3)
    sym = BilinearSymbol(SymbolKind.NAVIER_STOKES_LERAY)
    tab = symbol_table(sym, lat)
    for p in (0, 17, lat.size - 1):
        assert np.array_equal(tab[..., p], eval_symbol(sym, lat.points[p]))
    assert not tab.flags.writeable


@pytest.mark.parametrize("kind, expected", [("zero", 0.0), ("worst_case_scalar", 1.0)])
def test_bound_margin(kind, expected):
    assert symbol_bound_margin(BilinearSymbol(kind), 5) == pytest.approx(expected)


def test_leray_bound_margin_at_most_one():
    assert symbol_bound_margin(BilinearSymbol("navier_stokes_leray"), 5) <= 1.0


def test_active_pairs_cover_nonzero_entries():
    pts = lattice(2).points
    for kind in SymbolKind:
        sym = BilinearSymbol(kind)
        pairs = set(active_pairs(sym))
        for xi in pts[:10]:
            M = eval_symbol(sym, xi)
            for i, j in zip(*np.nonzero(np.abs(M).sum(axis=2))):
                assert (i, j) in pairs
