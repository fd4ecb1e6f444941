"""Blow-up diagnostics on a configuration that does blow up.

N = 5, p = 3, beta = 2, sigma = 0.01, lambda = 2, delta = 0.05: the analysis
constants are admissible here (they are not for N = 4), so the comparison
ordering and the K corridor can be checked against an actual ``D``.
"""

import numpy as np
import pytest

from nlfkpp.analysis import audit_invariants, estimate_blowup_time, fit_profile_slope, fit_rate_exponent
from nlfkpp.grid import restricted_average
from nlfkpp.model import blowup_time_bound, compute_constants
from nlfkpp.solver import Status, StepControl, run_local_comparison

from conftest import spike_run
from oracles import comparison_bound


def test_blows_up_after_the_comparison_time(blowup_run):
    prm, g, u0, out = blowup_run
    assert out.status == Status.BLOWUP_DETECTED
    T_est = estimate_blowup_time(out.trace, prm.p)
    # sup grows no faster than the ODE from the initial maximum (K < 1)
    assert T_est >= blowup_time_bound(prm) == pytest.approx(comparison_bound(5, 3, 2.0, 0.05))
    assert T_est >= out.t_final


def test_type_one_rate(blowup_run):
    prm, g, u0, out = blowup_run
    fit = fit_rate_exponent(out.trace, estimate_blowup_time(out.trace, prm.p))
    assert abs(fit.slope - 0.5) <= 0.15 * 0.5
    assert fit.half_width < 0.01


def test_blowup_time_stable_under_refinement(blowup_params, blowup_run):
    _, _, _, coarse = blowup_run
    _, _, fine = spike_run(blowup_params, M=4096, t_end=1.0)
    Tc = estimate_blowup_time(coarse.trace, 3.0)
    Tf = estimate_blowup_time(fine.trace, 3.0)
    assert abs(Tf - Tc) / Tf < 0.02


def test_profile_slope_band(blowup_run):
    prm, g, u0, out = blowup_run
    assert out.final.sup_u >= 1e6
    fit = fit_profile_slope(g, out.final.values)
    assert -1.35 <= fit.slope <= -0.85


def test_single_point_evidence(blowup_run):
    prm, g, u0, out = blowup_run
    tr = out.trace
    assert tr.u_at_half[-1] / tr.u_at_half[0] < 10
    outer = tr.outer_average
    assert np.all(np.isfinite(outer)) and outer.max() < 10 * outer[0]
    assert restricted_average(g, out.final.values, 0.25, 1.0) == pytest.approx(outer[-1])


def test_invariant_suite(blowup_run):
    prm, g, u0, out = blowup_run
    c = compute_constants(prm)
    table = audit_invariants(out.trace, prm, c, eps_h=float(g.h.max()) ** 2)
    for name in ("positivity", "m_beta_threshold", "monotone_average", "point_bound", "K_corridor", "K_limit",
                 "radial_monotonicity", "clip_budget"):
        assert table[name].passed is True, (name, table[name].detail)
    assert c.D < out.trace.K.min() < out.trace.K.max() < 1


def test_comparison_ordering(blowup_run):
    prm, g, u0, out = blowup_run
    D = compute_constants(prm).D
    times = (1e-4, 2e-4, 3e-4)
    local = run_local_comparison(prm, g, u0, D, StepControl(t_end=1.0, snapshot_times=times))
    assert local.status == Status.BLOWUP_DETECTED and local.t_final > out.t_final
    eps_h = g.h_min
    for tm in times:
        u = out.snapshot(f"time:{tm!r}").values
        v = local.snapshot(f"time:{tm!r}").values
        assert np.min(u - v) >= -eps_h * u.max()


def test_delta_sweep_blowup_time_decreases(blowup_params):
    finals = []
    for delta in (0.1, 0.05, 0.025):
        _, _, out = spike_run(blowup_params.replace(delta=delta), M=2048, t_end=1.0)
        assert out.status == Status.BLOWUP_DETECTED
        finals.append(out.t_final)
    assert finals[0] > finals[1] > finals[2]
