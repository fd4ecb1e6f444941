import numpy as np
import pytest

from nlfkpp.grid import ball_average, build_grid
from nlfkpp.initdata import (InitialDataError, OutOfDomain, SpikeProfile, UnresolvedSpike, build_u0,
                             check_deltaphi_bound, check_supercritical, eval_phi, eval_phi_prime,
                             load_initial_table, phi_power_average)
from nlfkpp.model import ModelParams, compute_constants

from oracles import outer_spike_margin_symbolic, phi_average_quad, phi_values


def test_phi_examples():
    prof = SpikeProfile(a=1.0, delta=0.5)
    assert eval_phi(prof, 0.75) == pytest.approx(4 / 3)
    assert eval_phi(prof, 0.5) == pytest.approx(2.0)
    assert eval_phi(prof, 0.0) == pytest.approx(3.0)
    assert prof.peak == pytest.approx(3.0)


def test_phi_branches_join_smoothly():
    prof = SpikeProfile(a=2 / 1.7, delta=0.13)
    d = prof.delta
    eps = 1e-7
    inner = d ** -prof.a * (1 + prof.a / 2) - 0.5 * prof.a * d ** -(prof.a + 2) * d ** 2
    assert inner == pytest.approx(d ** -prof.a, rel=1e-14)
    left = (eval_phi(prof, d) - eval_phi(prof, d - eps)) / eps
    right = (eval_phi(prof, d + eps) - eval_phi(prof, d)) / eps
    assert abs(left - right) / abs(right) < 1e-5
    assert eval_phi_prime(prof, d) == pytest.approx(-prof.a * d ** -(prof.a + 1))


def test_phi_strictly_decreasing_and_matches_oracle():
    prof = SpikeProfile(a=1.0, delta=0.05)
    r = np.linspace(0, 1, 2001)
    v = eval_phi(prof, r)
    assert np.all(np.diff(v) < 0)
    assert np.allclose(v, phi_values(r, 1.0, 0.05), rtol=1e-15)


def test_phi_out_of_domain():
    with pytest.raises(OutOfDomain):
        eval_phi(SpikeProfile(1.0, 0.1), 1.5)
    with pytest.raises(OutOfDomain):
        eval_phi(SpikeProfile(1.0, 0.1), -0.1)


def test_build_u0_peak_and_zero_amplitude():
    g = build_grid(2048, 2.0, 4)
    u0 = build_u0(SpikeProfile(1.0, 0.05, lam=0.05), g)
    assert u0[0] == pytest.approx(1.5)
    assert np.all(build_u0(SpikeProfile(1.0, 0.05, lam=0.0), g) == 0)


@pytest.mark.parametrize("N, a, delta, zeta", [
    (4, 1.0, 0.05, 2.0), (4, 1.0, 0.05, 3.0), (3, 1.0, 0.1, 1.0), (5, 2 / 1.7, 0.2, 2.5), (6, 2.0, 0.3, 3.0),
    (4, 2.0, 0.1, 2.0),  # N = a * zeta: logarithmic outer integral
])
def test_exact_power_average_against_quadrature(N, a, delta, zeta):
    assert phi_power_average(N, a, delta, zeta) == pytest.approx(phi_average_quad(N, a, delta, zeta), rel=1e-10)


def test_u0_beta_average_against_oracle():
    g = build_grid(4096, 2.0, 4)
    u0 = build_u0(SpikeProfile(1.0, 0.05, lam=0.05), g)
    exact = 0.05 ** 2 * phi_average_quad(4, 1.0, 0.05, 2.0)
    assert ball_average(g, u0 ** 2) == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("N, p", [(4, 3.0), (3, 2.0), (3, 3.0), (5, 1.8), (6, 4.0)])
def test_deltaphi_bound_holds(N, p):
    # the outer margin a(a+2) r^(-a-2) is positive for every N and p
    g = build_grid(2048, 2.0, N)
    rep = check_deltaphi_bound(SpikeProfile(2 / (p - 1), 0.05), g, p)
    assert rep.passed and bool(rep)
    r = np.linspace(0.06, 1.0, 50)
    assert np.all(outer_spike_margin_symbolic(N, p)(r) > 0)


def test_deltaphi_bound_needs_resolved_spike():
    with pytest.raises(UnresolvedSpike):
        check_deltaphi_bound(SpikeProfile(1.0, 0.05), build_grid(32, 1.0, 4), 3.0)


def test_supercritical_zero_data_passes():
    prm = ModelParams(5, 3, 2, 1, 1e-3, 0.05)
    g = build_grid(1024, 2.0, 5)
    assert check_supercritical(np.zeros(len(g)), compute_constants(prm), g, 3.0).passed


@pytest.mark.parametrize("lam", [1e-3, 1.0])
def test_supercritical_fails_at_spike_maximum(lam):
    prm = ModelParams(5, 3, 2, 1, lam, 0.05)
    g = build_grid(2048, 2.0, 5)
    u0 = build_u0(SpikeProfile.from_params(prm), g)
    c = compute_constants(prm)
    rep = check_supercritical(u0, c, g, 3.0)
    assert not rep.passed
    assert rep.worst_r < prm.delta


def test_table_loading(tmp_path):
    g = build_grid(128, 1.0, 3)
    path = tmp_path / "u0.txt"
    r = np.linspace(0, 1, 11)
    np.savetxt(path, np.column_stack([r, 2 - r]))
    u = load_initial_table(path, g)
    assert np.allclose(u, 2 - g.nodes)
    assert np.all(np.diff(u) <= 0)


@pytest.mark.parametrize("rows", [
    [[0.0, 1.0], [0.5, 1.0]],              # does not reach r = 1
    [[0.0, 1.0], [0.7, 1.0], [0.5, 1.0], [1.0, 1.0]],
    [[0.0, 1.0], [1.0, -1.0]],
])
def test_table_rejections(tmp_path, rows):
    path = tmp_path / "bad.txt"
    np.savetxt(path, np.array(rows))
    with pytest.raises(InitialDataError):
        load_initial_table(path, build_grid(64))
