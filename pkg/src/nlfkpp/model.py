"""Model parameters, regime classification and closed-form analysis constants.

The radially symmetric problem on the unit ball of R^N reads

    u_t = u_rr + (N-1)/r u_r + K(t) u^p,   u_r(0,t) = u_r(1,t) = 0,
    K(t) = 1 - sigma * avg_{B_1} u^beta,

with spiky initial data u_0 = lam * phi_delta and phi_delta built from the
exponent a = 2/(p-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .initdata import phi_power_average

CRITICAL_RTOL = 1e-12


class ModelError(ValueError):
    """Base class for parameter errors."""


class InvalidExponents(ModelError):
    pass


class InvalidDomain(ModelError):
    pass


class InfeasibleConstants(ModelError):
    """The auxiliary exponents k, ell have no admissible value."""


@dataclass(frozen=True)
class ModelParams:
    """Full parameter tuple ``(N, p, beta, sigma, lam, delta)``.

    Construction validates everything; use :func:`validate_params` when the
    input comes from an untrusted mapping.
    """

    N: int
    p: float
    beta: float
    sigma: float
    lam: float
    delta: float
    a: float = field(init=False)

    def __post_init__(self):
        vals = dict(p=self.p, beta=self.beta, sigma=self.sigma, lam=self.lam, delta=self.delta)
        for name, v in vals.items():
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise InvalidDomain(f"{name} must be a finite number, got {v!r}")
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise InvalidDomain(f"N must be an integer, got {self.N!r}")
        if self.beta <= 1:
            raise InvalidExponents(f"beta > 1 required, got beta={self.beta}")
        if self.p < self.beta:
            raise InvalidExponents(f"p >= beta required, got p={self.p}, beta={self.beta}")
        if self.N < 3:
            raise InvalidDomain(f"N >= 3 required, got N={self.N}")
        if not 0 < self.delta < 1:
            raise InvalidDomain(f"delta must lie in (0, 1), got {self.delta}")
        if self.sigma <= 0:
            raise InvalidDomain(f"sigma > 0 required, got {self.sigma}")
        if self.lam <= 0:
            raise InvalidDomain(f"lambda > 0 required, got {self.lam}")
        object.__setattr__(self, "N", int(self.N))
        for name, v in vals.items():
            object.__setattr__(self, name, float(v))
        object.__setattr__(self, "a", 2.0 / (self.p - 1.0))

    def replace(self, **changes) -> "ModelParams":
        kw = dict(N=self.N, p=self.p, beta=self.beta, sigma=self.sigma, lam=self.lam, delta=self.delta)
        kw.update(changes)
        return ModelParams(**kw)

    def as_dict(self) -> dict:
        return {"N": self.N, "p": self.p, "beta": self.beta, "sigma": self.sigma,
                "lambda": self.lam, "delta": self.delta}


def validate_params(N, p, beta, sigma, lam, delta) -> ModelParams:
    return ModelParams(N=N, p=p, beta=beta, sigma=sigma, lam=lam, delta=delta)


class RegimeTag(str, Enum):
    GLOBAL = "Global"
    BLOWUP_CAPABLE = "BlowupCapable"
    CRITICAL = "Critical"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    bound_global: float
    bound_blowup: float
    q: float


def _close(x: float, y: float, rtol: float = CRITICAL_RTOL) -> bool:
    return abs(x - y) <= rtol * max(abs(x), abs(y))


def classify_regime(params: ModelParams) -> Regime:
    """Place ``params`` in the global-existence / blow-up map.

    Only ``N``, ``p`` and ``beta`` matter.  For ``N >= 3`` the Sobolev-type
    exponent is ``q = 2N/(N-2)``, so the global bound is ``1 + 2 beta / N``.
    """
    N, p, beta = params.N, params.p, params.beta
    q = 2.0 * N / (N - 2)
    bound_global = 1.0 + (1.0 - 2.0 / q) * beta
    bound_blowup = N / (N - 2.0)
    if _close(p, beta) and _close(p, bound_blowup):
        tag = RegimeTag.CRITICAL
    elif p < bound_global:
        tag = RegimeTag.GLOBAL
    elif p > bound_blowup:
        tag = RegimeTag.BLOWUP_CAPABLE
    else:
        tag = RegimeTag.UNDETERMINED
    return Regime(tag=tag, bound_global=bound_global, bound_blowup=bound_blowup, q=q)


@dataclass(frozen=True)
class AnalysisConstants:
    k: float
    ell: float
    mu: float
    alpha1: float
    alpha2: float
    Lambda1: float
    d: float
    D: float
    T_tilde: float


def blowup_time_bound(params: ModelParams) -> float:
    """ODE blow-up time of the spike tip, ``[lam(1+a/2)]^(1-p) delta^2 / (p-1)``.

    This is exactly ``u_0(0)^(1-p)/(p-1)``, the blow-up time of
    ``U' = U^p`` started from the initial maximum.
    """
    p, a = params.p, params.a
    return (params.lam * (1.0 + a / 2.0)) ** (1.0 - p) * params.delta ** 2 / (p - 1.0)


def k_interval(N: int, p: float) -> tuple[float, float]:
    return 1.0 + 2.0 * p / N, p


def ell_interval(N: int, p: float, k: float) -> tuple[float, float]:
    return k - 1.0, N * (p - 1.0) / (2.0 * p)


def mu_exponent(p: float, k: float, ell: float) -> float:
    return p * ell / (k - 1.0)


def delta_samples(alpha_sampling: int) -> np.ndarray:
    """Geometric grid ``2^-j, j = 1..alpha_sampling`` standing in for (0, 1)."""
    if alpha_sampling < 1:
        raise ValueError("alpha_sampling must be >= 1")
    return 2.0 ** -np.arange(1, alpha_sampling + 1, dtype=float)


def compute_constants(params: ModelParams, alpha_sampling: int = 20,
                      k: float | None = None, ell: float | None = None) -> AnalysisConstants:
    """Constants of the blow-up argument for ``params``.

    ``k`` and ``ell`` default to the midpoints of their open admissible
    intervals; explicit values are checked against the same intervals.  The
    sup/inf over ``delta`` defining ``alpha1``, ``alpha2`` and ``Lambda1`` are
    replaced by extrema over :func:`delta_samples`, each average computed in
    closed form.

    Raises
    ------
    InfeasibleConstants
        If either interval is empty (for ``N = 4`` the ell-interval is empty
        for every ``p``) or a supplied ``k``/``ell`` lies outside it.
    """
    N, p, beta, sigma, lam, a = params.N, params.p, params.beta, params.sigma, params.lam, params.a
    k_lo, k_hi = k_interval(N, p)
    if not k_lo < k_hi:
        raise InfeasibleConstants(f"k-interval ({k_lo:.6g}, {k_hi:.6g}) is empty; need p > N/(N-2)")
    if k is None:
        k = 0.5 * (k_lo + k_hi)
    elif not k_lo < k < k_hi:
        raise InfeasibleConstants(f"k={k} outside ({k_lo:.6g}, {k_hi:.6g})")
    e_lo, e_hi = ell_interval(N, p, k)
    if not e_lo < e_hi:
        raise InfeasibleConstants(f"ell-interval ({e_lo:.6g}, {e_hi:.6g}) is empty for N={N}, p={p}, k={k:.6g}")
    if ell is None:
        ell = 0.5 * (e_lo + e_hi)
    elif not e_lo < ell < e_hi:
        raise InfeasibleConstants(f"ell={ell} outside ({e_lo:.6g}, {e_hi:.6g})")
    mu = mu_exponent(p, k, ell)

    deltas = delta_samples(alpha_sampling)
    mean_phi = np.array([phi_power_average(N, a, dl, 1.0) for dl in deltas])
    mean_phi_p = np.array([phi_power_average(N, a, dl, p) for dl in deltas])
    ratio = mean_phi_p / mean_phi ** mu
    alpha1, alpha2 = float(ratio.max()), float(ratio.min())
    Lambda1 = float(mean_phi.max())

    coeff = sigma * 2.0 ** (beta * (mu + 1.0) / p) * alpha1 ** (beta / p) * Lambda1 ** (beta * mu / p)
    d = lam - coeff * lam ** (beta + 1.0)
    D = d / lam
    return AnalysisConstants(k=k, ell=ell, mu=mu, alpha1=alpha1, alpha2=alpha2, Lambda1=Lambda1,
                             d=d, D=D, T_tilde=blowup_time_bound(params))
