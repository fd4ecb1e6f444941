import numpy as np
import pytest

from nlfkpp.grid import build_grid
from nlfkpp.initdata import SpikeProfile, build_u0, phi_power_average
from nlfkpp.model import ModelParams
from nlfkpp.operators import NonFiniteField, laplacian_bands, nonlocal_state, radial_laplacian, rhs

from oracles import phi_average_quad, symbolic_radial_laplacian


@pytest.mark.parametrize("gamma", [1.0, 2.0])
@pytest.mark.parametrize("N", [3, 4, 6])
def test_r_squared_exact_except_boundary(N, gamma):
    g = build_grid(200, gamma, N)
    lap = radial_laplacian(g, g.nodes ** 2)
    assert np.allclose(lap[:-1], 2 * N, rtol=1e-9)


def test_constants_annihilated():
    g = build_grid(333, 1.7, 5)
    assert np.max(np.abs(radial_laplacian(g, np.full(len(g), 3.7)))) < 1e-9


@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_r_fourth_second_order(gamma):
    N = 3
    exact, expr = symbolic_radial_laplacian("r**4", N)
    assert str(expr) == "20*r**2"
    errs = []
    for M in (256, 512, 1024):
        g = build_grid(M, gamma, N)
        errs.append(np.max(np.abs(radial_laplacian(g, g.nodes ** 4) - exact(g.nodes))[:-1]))
    assert 3.5 <= errs[0] / errs[1] <= 4.5
    assert 3.5 <= errs[1] / errs[2] <= 4.5
    g = build_grid(1024, gamma, N)
    assert abs(radial_laplacian(g, g.nodes ** 4)[0]) < 1e-4


def test_origin_stencil():
    g = build_grid(64, 1.0, 4)
    f = np.cos(g.nodes)
    assert radial_laplacian(g, f)[0] == pytest.approx(2 * 4 * (f[1] - f[0]) / g.nodes[1] ** 2)


def test_discrete_conservation_and_green_identity():
    g = build_grid(512, 2.0, 4)
    lower, diag, upper = laplacian_bands(g)
    assert np.allclose(lower + diag + upper, 0, atol=1e-6 * np.abs(diag).max())
    f = np.cos(np.pi * g.nodes)
    assert abs(g.quad_weights @ radial_laplacian(g, f)) < 1e-12 * np.abs(f).max() * np.abs(diag).max()


def test_nonlocal_state_examples():
    g = build_grid(256, 1.0, 4)
    prm = ModelParams(4, 3, 2, 4.0, 0.05, 0.05)
    eq = nonlocal_state(g, np.full(len(g), 4.0 ** -0.5), prm)
    assert eq.K == pytest.approx(0.0, abs=1e-14)
    zero = nonlocal_state(g, np.zeros(len(g)), prm)
    assert zero.K == 1.0 and zero.ubar == 0.0 and zero.sup_u == 0.0


def test_nonlocal_state_spike_matches_oracle():
    prm = ModelParams(4, 3, 2, 1, 0.05, 0.05)
    g = build_grid(4096, 2.0, 4)
    st = nonlocal_state(g, build_u0(SpikeProfile.from_params(prm), g), prm)
    exact_K = 1 - 0.05 ** 2 * phi_average_quad(4, 1.0, 0.05, 2.0)
    assert st.K == pytest.approx(exact_K, rel=1e-8)
    assert st.K == pytest.approx(0.995, abs=1e-4)
    assert st.K == 1.0 - prm.sigma * st.m_beta_avg
    assert phi_power_average(4, 1.0, 0.05, 2.0) == pytest.approx(2.0, rel=0.01)


def test_rhs_examples():
    prm = ModelParams(3, 2, 2, 1.0, 1.0, 0.5)
    g = build_grid(128, 1.0, 3)
    assert np.max(np.abs(rhs(g, np.ones(len(g)), prm))) < 1e-12
    c = 0.5
    assert np.allclose(rhs(g, np.full(len(g), c), prm), c ** 2 * (1 - c ** 2), rtol=1e-9)


def test_rhs_sign_at_spike_tip():
    prm = ModelParams(4, 3, 2, 1, 0.05, 0.05)
    g = build_grid(2048, 2.0, 4)
    u0 = build_u0(SpikeProfile.from_params(prm), g)
    # diffusion dominates at the tip for this amplitude
    assert rhs(g, u0, prm)[0] < 0
    strong = prm.replace(lam=2.0, sigma=0.01)
    assert rhs(g, build_u0(SpikeProfile.from_params(strong), g), strong)[0] > 0


def test_rhs_rejects_non_finite():
    prm = ModelParams(3, 2, 2, 1.0, 1.0, 0.5)
    g = build_grid(32)
    u = np.ones(len(g))
    u[3] = np.nan
    with pytest.raises(NonFiniteField):
        rhs(g, u, prm)
