"""Discrete radial Laplacian with Neumann conditions and the non-local functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .grid import RadialGrid

if TYPE_CHECKING:
    from .model import ModelParams


class NonFiniteField(FloatingPointError):
    pass


def laplacian_bands(grid: RadialGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tridiagonal coefficients ``(lower, diag, upper)`` of the radial Laplacian.

    Flux form on the control volumes of ``grid``::

        (L f)_i = (F_{i+1/2} - F_{i-1/2}) / w_i,
        F_{i+1/2} = N m_{i+1/2}^(N-1) (f_{i+1} - f_i) / h_i,

    with ``F = 0`` at both ends (the Neumann conditions).  At the origin this
    is ``2N (f_1 - f_0) / r_1^2``, the symmetric limit ``N f''(0)``.
    ``lower[i]`` multiplies ``f[i-1]`` and ``upper[i]`` multiplies ``f[i+1]``;
    ``lower[0]`` and ``upper[-1]`` are zero.  Rows sum to zero.
    """
    N = grid.dim
    w = grid.quad_weights
    flux = N * grid.edges[1:-1] ** (N - 1) / grid.h
    lower = np.zeros(len(grid))
    upper = np.zeros(len(grid))
    upper[:-1] = flux / w[:-1]
    lower[1:] = flux / w[1:]
    diag = -(lower + upper)
    return lower, diag, upper


def apply_bands(bands, f: np.ndarray) -> np.ndarray:
    # difference form: rows sum to zero, so constants map to exactly 0
    lower, _, upper = bands
    df = np.diff(f)
    out = np.zeros_like(f, dtype=float)
    out[:-1] += upper[:-1] * df
    out[1:] -= lower[1:] * df
    return out


def radial_laplacian(grid: RadialGrid, f) -> np.ndarray:
    return apply_bands(laplacian_bands(grid), np.asarray(f, dtype=float))


def unit_ball_volume(N: int) -> float:
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


@dataclass(frozen=True)
class NonlocalState:
    m_beta_avg: float
    m_beta_int: float
    ubar: float
    K: float
    sup_u: float


def reaction_coefficient(grid: RadialGrid, u: np.ndarray, params: "ModelParams") -> float:
    return 1.0 - params.sigma * float(grid.quad_weights @ u ** params.beta)


def nonlocal_state(grid: RadialGrid, u, params: "ModelParams") -> NonlocalState:
    u = np.asarray(u, dtype=float)
    m_avg = float(grid.quad_weights @ u ** params.beta)
    return NonlocalState(
        m_beta_avg=m_avg,
        m_beta_int=m_avg * unit_ball_volume(grid.dim),
        ubar=float(grid.quad_weights @ u),
        K=1.0 - params.sigma * m_avg,
        sup_u=float(u.max()),
    )


def rhs(grid: RadialGrid, u, params: "ModelParams", coefficient: float | None = None) -> np.ndarray:
    """``Lap_r u + K u^p`` with ``K`` evaluated from ``u`` itself.

    Passing ``coefficient`` replaces ``K`` by a constant (the local
    comparison problem).
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NonFiniteField("field contains non-finite values")
    K = reaction_coefficient(grid, u, params) if coefficient is None else coefficient
    return radial_laplacian(grid, u) + K * u ** params.p
