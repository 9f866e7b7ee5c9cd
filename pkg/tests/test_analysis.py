"""Bootstrap schedules, estimate reports, decay fits and the diagnostics document."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from picardns.analysis import (DiagnosticsReport, bootstrap_schedule, equicontinuity_modulus,
                               equicontinuity_report, fit_decay_exponent, k_minus1_for_depth,
                               lipschitz_moduli, max_feasible_depth, mu_sequence,
                               one_step_closure, regularity_bootstrap_run, shell_decay_check,
                               smoothing_gain, uniform_bound_report)
from picardns.convolution import power_law_field, saturating_field
from picardns.integrator import TimeGrid, Trajectory, heat_trajectory, picard_solve
from picardns.lattice import SpectralField, lattice, make_small_data
from picardns.symbol import BilinearSymbol, SymbolKind

WORST = BilinearSymbol(SymbolKind.WORST_CASE_SCALAR)
ZERO = BilinearSymbol(SymbolKind.ZERO)


def radial_field(radius, profile):
    lat = lattice(radius)
    vals = np.repeat(profile(lat.norm)[None, :], 3, axis=0).astype(complex)
    return SpectralField(lat, vals, True)


# -- schedule -----------------------------------------------------------------------------

def test_mu_sequences():
    assert mu_sequence(6, "corrected") == [1, 2, 3, 5, 9, 17]
    assert mu_sequence(6, "paper_literal") == [1] * 6
    mu = mu_sequence(12)
    assert all(mu[n] >= 2 ** (n - 1) for n in range(1, 12))
    with pytest.raises(ValueError):
        mu_sequence(3, "other")


def test_schedule_arithmetic():
    eps = 0.03
    s = bootstrap_schedule(eps, 1.0, 0.01, 0.5, depth=3, T=2.0)
    assert s.k[1] == pytest.approx(s.k0 / eps ** 2, rel=1e-14)
    assert s.k[2] == pytest.approx(s.k0 / eps ** 4, rel=1e-14)
    assert s.tau[:3] == [0.0, 0.5, 0.75]
    assert s.k[0] == s.k0
    for n in range(1, len(s.k) - 1):
        assert s.k[n + 1] / s.k[n] == pytest.approx(eps ** -(2 ** n), rel=1e-13)
    for n in range(len(s.k) - 1):
        assert s.k[n] / s.k[n + 1] <= eps ** s.mu[n] * (1 + 1e-12)
    assert s.invariant_violations() == []


@settings(max_examples=50, deadline=None)
@given(eps=st.floats(1e-4, 0.0357), D=st.floats(1e-6, 10), k1=st.floats(1e-3, 10))
def test_k0_is_smallest_admissible(eps, D, k1):
    s = bootstrap_schedule(eps, 1.0, D, k1, depth=1)
    assert (k1 / s.k0) * D < min(eps, 0.5)
    # one part in 1e8 smaller already violates the condition
    assert (k1 / (s.k0 * (1 - 1e-8))) * D >= min(eps, 0.5)


@pytest.mark.parametrize("kwargs", [dict(eps=1 / 28), dict(eps=0.1), dict(eps=0.0),
                                    dict(rho=0.0), dict(rho=2.0, T=2.0), dict(depth=-1)])
def test_schedule_preconditions(kwargs):
    args = dict(eps=0.03, rho=1.0, D=0.01, k_minus1=1.0, depth=1, T=2.0)
    args.update(kwargs)
    T = args.pop("T")
    with pytest.raises(ValueError):
        bootstrap_schedule(**args, T=T)


def test_feasible_depth_and_k_minus1_helper():
    eps, D, R = 0.03, 0.015, 32
    for depth in range(3):
        k1 = k_minus1_for_depth(eps, D, R, depth)
        s = bootstrap_schedule(eps, 1.0, D, k1, depth)
        assert s.k[depth] <= R
        assert s.max_feasible_depth(R) >= depth
    assert max_feasible_depth(1.0, 0.03, 32) == 0
    assert max_feasible_depth(0.03 ** 2 * 32, 0.03, 32) == 1
    assert max_feasible_depth(40.0, 0.03, 32) == -1


# -- uniform bound and equicontinuity ------------------------------------------------------

def test_uniform_bound_passes_for_heat_flow():
    psi = make_small_data(0.01, 4, 1)
    traj, rep = picard_solve(psi, ZERO, TimeGrid(1, 8), keep_iterates=True)
    ub = uniform_bound_report(rep.iterates, 0.01)
    assert ub.passed and ub.worst_margin >= 0 and ub.violations() == 0


def test_uniform_bound_records_large_data_failure():
    psi = make_small_data(1.0, 4, 0, kind="deterministic_profile")
    _, rep = picard_solve(psi, WORST, TimeGrid(1, 8), max_iter=3, keep_iterates=True)
    ub = uniform_bound_report(rep.iterates, 0.4)
    assert not ub.passed and ub.worst_margin < 0
    assert set(ub.location) == {"iterate", "t", "xi", "component"}


def test_equicontinuity_of_constant_and_heat_trajectories():
    g = TimeGrid(1, 10)
    lat = lattice(2)
    const = Trajectory(g, lat, np.ones((11, 3, lat.size), dtype=complex))
    assert equicontinuity_modulus([const]) == 0.0
    psi = make_small_data(0.2, 3, kind="single_mode", mode=(1, 1, 0))
    heat = heat_trajectory(psi, g)
    bound = 2 * np.abs(psi[(1, 1, 0)]).max()
    assert 0 < equicontinuity_modulus([heat]) <= bound


def test_equicontinuity_report_is_stable_for_small_data():
    psi = make_small_data(1e-3, 6, 2)
    _, rep = picard_solve(psi, WORST, TimeGrid(1, 16), keep_iterates=True)
    eq = equicontinuity_report(rep.iterates)
    assert eq.uniform_in_n
    assert len(eq.moduli) == rep.iterations + 1


# -- shell decay ---------------------------------------------------------------------------

def test_shell_decay_check_cases():
    R, bound = 6, 0.01
    zero = SpectralField.zeros(R)
    ok, margin = shell_decay_check(zero, 2, bound)
    assert ok and margin == pytest.approx(bound / R ** 2)
    sat = saturating_field(R, bound)
    ok, margin = shell_decay_check(sat, 2, bound)
    assert ok and abs(margin) < 1e-18
    vals = np.array(sat.values)
    p = sat.lattice.index((3, 0, 0))
    vals[1, p] *= 1.5
    ok, margin = shell_decay_check(SpectralField(sat.lattice, vals), 2, bound)
    assert not ok and margin == pytest.approx(-0.5 * bound / 9)
    # modes below k are ignored
    ok, _ = shell_decay_check(SpectralField(sat.lattice, vals), 3.5, bound)
    assert ok
    assert shell_decay_check(zero, 100, bound) == (True, math.inf)


@pytest.mark.parametrize("p", [2, 2.25, 3, 4])
def test_fit_recovers_power_law(p):
    D = 0.37
    fit = fit_decay_exponent(radial_field(16, lambda n: D * n ** -p), 2)
    assert fit.exponent == pytest.approx(p, abs=1e-10)
    assert fit.prefactor == pytest.approx(D, rel=1e-10)
    assert fit.residual <= 1e-12
    assert fit.frequencies_used[0] >= 2


def test_fit_detects_super_polynomial_decay():
    f = radial_field(24, lambda n: n ** -2.0 * np.exp(-n))
    exps = [fit_decay_exponent(f, k).exponent for k in (2, 4, 8)]
    assert exps[0] < exps[1] < exps[2]


def test_fit_needs_three_shells():
    with pytest.raises(ValueError):
        fit_decay_exponent(radial_field(3, lambda n: n ** -2.0), 2.9)


def test_fit_ignores_roundoff_floor():
    f = radial_field(12, lambda n: np.where(n < 4, n ** -3.0, 1e-20))
    assert fit_decay_exponent(f, 1).exponent == pytest.approx(3, abs=1e-10)


# -- bootstrap ---------------------------------------------------------------------------------

def test_bootstrap_on_heat_flow_passes_every_stage():
    psi = make_small_data(0.01, 8, 3)
    traj, rep = picard_solve(psi, ZERO, TimeGrid(2, 16))
    D = traj.sup_norm()
    sched = bootstrap_schedule(0.01, 1.0, D, k_minus1_for_depth(0.01, D, 8, 1), 1, T=2)
    out = regularity_bootstrap_run(traj, sched, ZERO)
    assert out.passed and len(out.stages) == 2
    assert all(s.restart_residual <= 1e-15 for s in out.stages)


def test_bootstrap_rejects_infeasible_depth():
    psi = make_small_data(0.01, 8, 3)
    traj, _ = picard_solve(psi, ZERO, TimeGrid(2, 4))
    sched = bootstrap_schedule(0.01, 1.0, 0.005, 1.0, 3, T=2)
    with pytest.raises(ValueError, match="largest feasible depth is 0"):
        regularity_bootstrap_run(traj, sched, ZERO)


# -- synthetic estimates --------------------------------------------------------------------------

@pytest.mark.parametrize("mu", [1, 2, 3])
def test_one_step_closure_small_radius(mu):
    res = one_step_closure(0.02, mu, 12, breakdown=1)
    assert res.passed and res.conclusion_ok
    assert res.max_constant <= 28
    assert res.k_next == pytest.approx(3.0)
    assert all(r.geometry_ok for r in res.breakdown)


def test_one_step_closure_rejects_unknown_exponent():
    with pytest.raises(ValueError):
        one_step_closure(0.02, 4, 12)


def test_smoothing_gain_on_power_law():
    g = smoothing_gain(power_law_field(16, 1.0, 2.25), WORST, 0.25, 2, 8)
    assert g.target == pytest.approx(2.375)
    assert g.passed


# -- report document -------------------------------------------------------------------------------

def test_report_serialization():
    rep = DiagnosticsReport()
    rep.add("a", "uniform-bound", 0.5, 1.0, eps=0.1)
    rep.add("b", "decay gain", 3.0, 2.0, passed=True, margin=1.0, note="lower bound")
    assert rep.passed
    rep.add("c", "x", 2.0, 1.0, radius=np.float64(4.0), xi=(1, 2, 3))
    assert not rep.passed and [r.check_id for r in rep.failed()] == ["c"]
    doc = json.loads(rep.to_json())
    assert doc["passed"] is False and len(doc["records"]) == 3
    assert doc["records"][2]["inputs"] == {"radius": 4.0, "xi": [1, 2, 3]}
    assert rep.summary_lines()[2].startswith("FAIL c")
