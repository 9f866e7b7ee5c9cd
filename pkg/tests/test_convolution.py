"""Galerkin bilinear term: direct sum, transform path, region splits, diagnostics."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from picardns.convolution import (EXISTENCE_REGIONS, SMOOTHING_REGIONS, bilinear,
                                  bilinear_direct, bilinear_direct_at, bilinear_fft,
                                  divergence_defect, existence_regions, fft_grid_size, pair_terms,
                                  power_law_field, regularity_regions, saturating_field,
                                  shell_diagnostics_existence, shell_diagnostics_regularity,
                                  shell_diagnostics_smoothing, smoothing_rates, smoothing_regions,
                                  smoothing_scaling)
from picardns.lattice import SpectralField, lattice, make_small_data, phi2_norm
from picardns.symbol import BilinearSymbol, SymbolKind, eval_symbol

KINDS = [SymbolKind.NAVIER_STOKES_LERAY, SymbolKind.WORST_CASE_SCALAR, SymbolKind.ZERO]


def naive_bilinear(u, v, sym):
    """Quadruple loop over output xi and q, straight from the definition."""
    lat = u.lattice
    out = np.zeros((3, lat.size), dtype=complex)
    for x, xi in enumerate(lat.points):
        M = eval_symbol(sym, xi)
        for p, q in enumerate(lat.points):
            r = lat.index(xi - q) if np.any(xi - q) else -1
            if r < 0:
                continue
            out[:, x] += np.einsum("ijk,i,j->k", M, u.values[:, p], v.values[:, r])
    return out


def random_field(radius, seed, hermitian=False):
    rng = np.random.default_rng(seed)
    lat = lattice(radius)
    vals = rng.normal(size=(3, lat.size)) + 1j * rng.normal(size=(3, lat.size))
    return SpectralField(lat, vals / lat.norm2, False)


@pytest.mark.parametrize("kind", KINDS)
def test_direct_matches_naive_loop(kind):
    u, v = random_field(2, 1), random_field(2, 2)
    sym = BilinearSymbol(kind)
    assert np.allclose(bilinear_direct(u, v, sym).values, naive_bilinear(u, v, sym),
                       rtol=0, atol=1e-13)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("radius", [1, 2.5, 4, 6])
def test_fft_matches_direct(kind, radius):
    sym = BilinearSymbol(kind)
    u, v = random_field(radius, 3), random_field(radius, 4)
    W, D = bilinear_fft(u, v, sym), bilinear_direct(u, v, sym)
    # at R = 1 no two stored points differ by a stored point, so B vanishes
    scale = max(phi2_norm(D), phi2_norm(u) * phi2_norm(v))
    assert phi2_norm(W - D) <= 1e-12 * scale


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), kind=st.sampled_from(KINDS[:2]))
def test_fft_matches_direct_on_hermitian_data(seed, kind):
    sym = BilinearSymbol(kind)
    u = make_small_data(1.0, 5, seed)
    v = make_small_data(1.0, 5, seed + 1)
    W, D = bilinear_fft(u, v, sym), bilinear_direct(u, v, sym)
    assert phi2_norm(W - D) <= 1e-12 * phi2_norm(D)
    assert W.hermitian


def test_bilinear_dispatch_and_zero_symbol():
    u = make_small_data(1.0, 3, 0)
    assert phi2_norm(bilinear(u, u, BilinearSymbol("zero"))) == 0.0
    with pytest.raises(ValueError):
        bilinear(u, u, BilinearSymbol("zero"), method="spectral")


def test_radius_mismatch_rejected():
    with pytest.raises(ValueError):
        bilinear_fft(make_small_data(1, 3), make_small_data(1, 4), BilinearSymbol())


def test_grid_is_large_enough_to_avoid_aliasing():
    for R in (1, 3.5, 8, 16, 32):
        assert fft_grid_size(R) >= 4 * np.ceil(R) + 1


def test_direct_at_subset_matches_full():
    sym = BilinearSymbol(SymbolKind.NAVIER_STOKES_LERAY)
    u, v = random_field(4, 5), random_field(4, 6)
    full = bilinear_direct(u, v, sym).values
    rows = np.array([0, 11, 100, u.lattice.size - 1])
    assert np.array_equal(bilinear_direct_at(u, v, sym, rows), full[:, rows])


def test_leray_output_is_divergence_free():
    u = make_small_data(1.0, 6, 2)
    W = bilinear_fft(u, u, BilinearSymbol(SymbolKind.NAVIER_STOKES_LERAY))
    assert divergence_defect(W) <= 1e-12 * phi2_norm(W)


def test_bilinearity():
    sym = BilinearSymbol(SymbolKind.NAVIER_STOKES_LERAY)
    u, v, w = random_field(3, 7), random_field(3, 8), random_field(3, 9)
    lhs = bilinear_fft(u + 2 * w, v, sym)
    rhs = bilinear_fft(u, v, sym) + 2 * bilinear_fft(w, v, sym)
    assert phi2_norm(lhs - rhs) <= 1e-12 * phi2_norm(lhs)


# -- region splits -----------------------------------------------------------------

squared = st.integers(1, 5000)


@settings(max_examples=300, deadline=None)
@given(nq=squared, nr=squared, nxi=squared)
def test_existence_split_is_a_partition(nq, nr, nxi):
    masks = existence_regions([nq], [nr], [nxi])
    assert masks.sum() == 1
    region = EXISTENCE_REGIONS[int(np.argmax(masks[:, 0]))]
    if nq >= 4 * nxi:
        assert region == "III"


@settings(max_examples=300, deadline=None)
@given(nq=squared, nr=squared, nxi=squared)
def test_smoothing_split_is_a_partition(nq, nr, nxi):
    masks = smoothing_regions([nq], [nr], [nxi])
    assert masks.sum() == 1
    region = SMOOTHING_REGIONS[int(np.argmax(masks[:, 0]))]
    assert region.endswith("_a") == (nq <= nr)


@settings(max_examples=300, deadline=None)
@given(nq=squared, nr=squared, nxi=squared, k1=st.floats(0.5, 20), gap=st.floats(0, 40))
def test_regularity_split_is_a_partition(nq, nr, nxi, k1, gap):
    masks = regularity_regions([nq], [nr], [nxi], k1, k1 + gap)
    assert masks.sum() == 1


def test_region_boundaries():
    # |q| = 2|xi| goes to the far region
    assert existence_regions([16], [1], [4])[:, 0].tolist() == [False, False, True]
    # |xi - q| = |xi|/2 counts as near
    assert existence_regions([1], [1], [4])[:, 0].tolist() == [True, False, False]


# -- per-frequency diagnostics --------------------------------------------------------------

def test_pair_terms_sum_to_bilinear_value():
    sym = BilinearSymbol(SymbolKind.NAVIER_STOKES_LERAY)
    u = make_small_data(0.1, 5, 3)
    B = bilinear_direct(u, u, sym)
    for xi in [(1, 0, 0), (2, -1, 3), (0, 0, 5)]:
        pt = pair_terms(u, sym, xi)
        assert np.allclose(pt.terms.sum(axis=1), B[xi], rtol=0, atol=1e-16)
        assert pt.total == pytest.approx(np.abs(B[xi]).max(), rel=1e-12)


def test_existence_report_parts_bound_total():
    u = make_small_data(0.01, 6, 1)
    rep = shell_diagnostics_existence(u, BilinearSymbol(SymbolKind.WORST_CASE_SCALAR),
                                      (2, 1, 0), 0.01)
    assert set(rep.parts) == set(EXISTENCE_REGIONS)
    assert rep.total <= rep.I + rep.II + rep.III + 1e-18
    assert sum(rep.counts.values()) == rep.admissible


def test_existence_report_flags_large_data():
    u = make_small_data(1.0, 4, 1)
    with pytest.warns(UserWarning):
        rep = shell_diagnostics_existence(u, BilinearSymbol(), (1, 1, 0), 0.01)
    assert not rep.hypothesis_ok


def test_regularity_report_on_saturating_field():
    eps, mu = 0.03, 1
    u = saturating_field(12, eps ** mu)
    rep = shell_diagnostics_regularity(u, BilinearSymbol(SymbolKind.WORST_CASE_SCALAR),
                                       (6, 0, 0), 0.5, 0.9, eps, mu)
    assert rep.measured_constant <= 28
    assert rep.passed


def test_smoothing_rates_table():
    rates = smoothing_rates(0.25)
    assert rates["I_a"] == rates["I_b"] == pytest.approx(-0.75)
    assert rates["II_a"] == pytest.approx(-0.375)
    assert rates["III_b"] == rates["IV_a"] == pytest.approx(-0.5)


def test_smoothing_scaling_on_power_law_field():
    eta, D = 0.25, 1.0
    u = power_law_field(24, D, 2 + eta)
    xis = [(4, 0, 0), (6, 0, 0), (8, 0, 0), (10, 0, 0)]
    sc = smoothing_scaling(u, BilinearSymbol(SymbolKind.WORST_CASE_SCALAR), xis, D, eta)
    assert sc.passed, sc
    rep = shell_diagnostics_smoothing(u, BilinearSymbol(SymbolKind.WORST_CASE_SCALAR),
                                      (5, 0, 0), D, eta)
    assert set(rep.parts) == set(SMOOTHING_REGIONS)
