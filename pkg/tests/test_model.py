import math

import numpy as np
import pytest

from nlfkpp.model import (InfeasibleConstants, InvalidDomain, InvalidExponents, ModelParams, RegimeTag,
                          blowup_time_bound, classify_regime, compute_constants, delta_samples, ell_interval,
                          k_interval, validate_params)

from oracles import comparison_bound, regime_by_definition


def test_reference_params_have_a_equal_one():
    prm = validate_params(4, 3, 2, 1, 0.05, 0.05)
    assert prm.a == 1.0
    assert prm.as_dict()["lambda"] == 0.05


def test_p_equal_beta_is_allowed():
    assert validate_params(3, 3, 3, 1, 0.1, 0.1).a == 1.0


@pytest.mark.parametrize("kw, exc", [
    (dict(N=4, p=1.5, beta=2), InvalidExponents),
    (dict(N=4, p=3, beta=1), InvalidExponents),
    (dict(N=2, p=3, beta=2), InvalidDomain),
    (dict(N=4, p=3, beta=2, delta=1.0), InvalidDomain),
    (dict(N=4, p=3, beta=2, sigma=0.0), InvalidDomain),
    (dict(N=4, p=3, beta=2, lam=-1.0), InvalidDomain),
    (dict(N=4.5, p=3, beta=2), InvalidDomain),
    (dict(N=4, p=float("nan"), beta=2), InvalidDomain),
])
def test_invalid_parameters_are_rejected(kw, exc):
    base = dict(sigma=1.0, lam=0.05, delta=0.05)
    with pytest.raises(exc):
        ModelParams(**{**base, **kw})


def test_p_below_beta_message():
    with pytest.raises(InvalidExponents, match="p >= beta required"):
        validate_params(4, 1.5, 2, 1, 0.05, 0.05)


@pytest.mark.parametrize("N, p, beta, tag", [
    (4, 2.0, 3.0, None),  # p < beta is invalid; classified below with beta <= p
    (4, 3.0, 2.0, RegimeTag.BLOWUP_CAPABLE),
    (3, 3.0, 3.0, RegimeTag.CRITICAL),
    (4, 1.6, 1.5, RegimeTag.GLOBAL),
    (4, 1.8, 1.5, RegimeTag.UNDETERMINED),
    (4, 2.5, 1.5, RegimeTag.BLOWUP_CAPABLE),
])
def test_classify_regime_matches_definition(N, p, beta, tag):
    if tag is None:
        with pytest.raises(InvalidExponents):
            ModelParams(N, p, beta, 1, 1, 0.5)
        return
    reg = classify_regime(ModelParams(N, p, beta, 1, 1, 0.5))
    assert reg.tag == tag
    assert reg.tag.value == regime_by_definition(N, p, beta)
    assert reg.q == pytest.approx(2 * N / (N - 2))


def test_global_bound_with_q_four():
    # q = 4 at N = 4: the global bound is 1 + beta/2
    reg = classify_regime(ModelParams(4, 2.0, 1.9, 1, 1, 0.5))
    assert reg.bound_global == pytest.approx(1.95)
    assert reg.tag == RegimeTag.UNDETERMINED


def test_blowup_time_bound_reference_value():
    prm = ModelParams(4, 3, 2, 1, 0.05, 0.05)
    assert blowup_time_bound(prm) == pytest.approx(0.5 * 0.075 ** -2 * 0.0025, rel=1e-14)
    assert blowup_time_bound(prm) == pytest.approx(comparison_bound(4, 3, 0.05, 0.05), rel=1e-12)


def test_blowup_time_bound_scales_as_delta_squared():
    prm = ModelParams(4, 3, 2, 1, 0.05, 0.05)
    ratio = blowup_time_bound(prm.replace(delta=0.1)) / blowup_time_bound(prm)
    assert ratio == pytest.approx(4.0, rel=1e-14)


def test_intervals():
    lo, hi = k_interval(5, 3.0)
    assert (lo, hi) == pytest.approx((1 + 6 / 5, 3.0))
    k = 0.5 * (lo + hi)
    assert ell_interval(5, 3.0, k) == pytest.approx((k - 1, 5 * 2 / 6))


def test_delta_samples_are_dyadic():
    assert np.allclose(delta_samples(20), 2.0 ** -np.arange(1, 21))


def test_constants_infeasible_in_dimension_four():
    # the ell interval (k-1, N(p-1)/(2p)) is empty for every p when N = 4
    with pytest.raises(InfeasibleConstants):
        compute_constants(ModelParams(4, 3, 2, 1, 0.05, 0.05))


@pytest.mark.parametrize("N", [5, 6])
def test_constants_small_lambda(N):
    c = compute_constants(ModelParams(N, 3, 2, 1, 1e-3, 0.05))
    assert c.mu > 3
    lo, hi = ell_interval(N, 3.0, c.k)
    assert lo < c.ell < hi
    assert c.d > 0 and 0 < c.D < 1
    assert math.isclose(c.d, 1e-3 * c.D)
    assert 0 < c.alpha2 <= c.alpha1 < math.inf


def test_constants_D_tends_to_one():
    Ds = [compute_constants(ModelParams(5, 3, 2, 1, lam, 0.05)).D for lam in (1e-2, 1e-3, 1e-4)]
    assert Ds[0] < Ds[1] < Ds[2] < 1
    assert 1 - Ds[2] < 1e-6


def test_constants_override_outside_interval():
    with pytest.raises(InfeasibleConstants):
        compute_constants(ModelParams(5, 3, 2, 1, 1e-3, 0.05), k=3.5)


def test_constants_blowup_demo_values():
    c = compute_constants(ModelParams(5, 3, 2, 0.01, 2.0, 0.05))
    assert c.k == pytest.approx(2.6)
    assert c.ell == pytest.approx(0.5 * (1.6 + 5 / 3))
    assert c.T_tilde == pytest.approx(comparison_bound(5, 3, 2.0, 0.05))
