"""Spiky initial data ``u_0 = lam * phi_delta`` and the static checks on it.

    phi_delta(r) = r^-a                                   delta <= r <= 1
                 = delta^-a (1 + a/2) - (a/2) delta^-(a+2) r^2   0 <= r < delta

with ``a = 2/(p-1)``.  The two branches meet with equal value and slope at
``r = delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import hyp2f1

from .grid import RadialGrid
from .operators import radial_laplacian

if TYPE_CHECKING:
    from .model import AnalysisConstants, ModelParams

MIN_SPIKE_NODES = 8


class InitialDataError(ValueError):
    pass


class OutOfDomain(InitialDataError):
    pass


class UnresolvedSpike(InitialDataError):
    pass


@dataclass(frozen=True)
class SpikeProfile:
    a: float
    delta: float
    lam: float = 1.0

    @classmethod
    def from_params(cls, params: "ModelParams") -> "SpikeProfile":
        return cls(a=params.a, delta=params.delta, lam=params.lam)

    @property
    def peak(self) -> float:
        """``phi_delta(0) = delta^-a (1 + a/2)``, the maximum of the profile."""
        return self.delta ** -self.a * (1.0 + self.a / 2.0)


def eval_phi(profile: SpikeProfile, r):
    """Evaluate ``phi_delta`` (without the amplitude ``lam``)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0) or np.any(r_arr > 1.0) or np.any(~np.isfinite(r_arr)):
        raise OutOfDomain("phi_delta is defined on 0 <= r <= 1")
    a, dl = profile.a, profile.delta
    outer = np.maximum(r_arr, dl) ** -a
    inner = dl ** -a * (1.0 + a / 2.0) - 0.5 * a * dl ** -(a + 2.0) * r_arr ** 2
    out = np.where(r_arr >= dl, outer, inner)
    return float(out) if out.ndim == 0 else out


def eval_phi_prime(profile: SpikeProfile, r):
    r_arr = np.asarray(r, dtype=float)
    a, dl = profile.a, profile.delta
    out = np.where(r_arr >= dl, -a * np.maximum(r_arr, dl) ** (-a - 1.0), -a * dl ** -(a + 2.0) * r_arr)
    return float(out) if out.ndim == 0 else out


def phi_power_average(N: int, a: float, delta: float, zeta: float) -> float:
    """Exact ball average of ``phi_delta**zeta`` in dimension ``N``.

    The outer shell integrates in closed form; the cap reduces, after
    ``r = delta * sqrt(t)``, to a Gauss hypergeometric value:
    ``N int_0^1 s^(N-1) (c - b s^2)^zeta ds = c^zeta 2F1(-zeta, N/2; N/2+1; b/c)``
    with ``c = 1 + a/2`` and ``b = a/2``.
    """
    e = N - a * zeta
    if abs(e) < 1e-14:
        outer = -N * math.log(delta)
    else:
        outer = N * (1.0 - delta ** e) / e
    c, b = 1.0 + a / 2.0, a / 2.0
    cap = c ** zeta * float(hyp2f1(-zeta, N / 2.0, N / 2.0 + 1.0, b / c))
    return outer + delta ** e * cap


def build_u0(profile: SpikeProfile, grid: RadialGrid) -> np.ndarray:
    return profile.lam * eval_phi(profile, grid.nodes)


def constant_field(grid: RadialGrid, value: float) -> np.ndarray:
    return np.full(len(grid), float(value))


def load_initial_table(path, grid: RadialGrid) -> np.ndarray:
    """Read an ``(r, u)`` two-column text file and interpolate onto ``grid``.

    The table must have strictly increasing radii starting at 0 and ending
    at 1 and nonnegative values.  Interpolation is shape preserving (PCHIP),
    so monotone tables stay monotone.
    """
    try:
        table = np.loadtxt(Path(path), ndmin=2)
    except (OSError, ValueError) as exc:
        raise InitialDataError(f"cannot read initial-data table {path}: {exc}") from exc
    if table.shape[1] != 2 or table.shape[0] < 2:
        raise InitialDataError(f"{path}: expected two columns (r, u) and at least two rows")
    r, u = table[:, 0], table[:, 1]
    if not np.all(np.isfinite(table)):
        raise InitialDataError(f"{path}: non-finite entries")
    if np.any(np.diff(r) <= 0):
        raise InitialDataError(f"{path}: radii must be strictly increasing")
    if r[0] != 0.0 or r[-1] != 1.0:
        raise InitialDataError(f"{path}: radii must cover [0, 1] exactly (got {r[0]}..{r[-1]})")
    if np.any(u < 0):
        raise InitialDataError(f"{path}: initial data must be nonnegative")
    return np.maximum(PchipInterpolator(r, u)(grid.nodes), 0.0)


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of a pointwise inequality ``lhs_i >= -tol_i`` on the grid."""

    passed: bool
    min_margin: float
    worst_r: float
    worst_slack: float

    def __bool__(self) -> bool:
        return self.passed


def _scaled_tolerance(grid: RadialGrid, scale: np.ndarray) -> np.ndarray:
    # kinked data: one-sided inequalities only hold to first order in h
    return 10.0 * grid.h_min * np.abs(scale)


def _report(grid: RadialGrid, margin: np.ndarray, tol: np.ndarray) -> InequalityReport:
    # r = 1 is excluded: the data need not satisfy the Neumann condition there
    slack = margin[:-1] + tol[:-1]
    i = int(np.argmin(slack))
    return InequalityReport(passed=bool(slack[i] >= 0.0), min_margin=float(margin[:-1].min()),
                            worst_r=float(grid.nodes[i]), worst_slack=float(slack[i]))


def check_deltaphi_bound(profile: SpikeProfile, grid: RadialGrid, p: float) -> InequalityReport:
    """Check ``Lap_r phi_delta + N a phi_delta**p >= 0`` on the grid.

    The margin is evaluated with the discrete radial Laplacian at every node
    except ``r = 1``.
    """
    if np.count_nonzero(grid.nodes <= profile.delta) < MIN_SPIKE_NODES:
        raise UnresolvedSpike(f"fewer than {MIN_SPIKE_NODES} nodes inside [0, delta={profile.delta}]")
    phi = eval_phi(profile, grid.nodes)
    reaction = grid.dim * profile.a * phi ** p
    margin = radial_laplacian(grid, phi) + reaction
    return _report(grid, margin, _scaled_tolerance(grid, reaction))


def check_supercritical(u0, constants: "AnalysisConstants", grid: RadialGrid, p: float) -> InequalityReport:
    """Check ``Lap_r u0 + (d/lam) u0**p >= 2 u0**p`` node by node.

    ``d/lam`` is the constant ``D``.  With ``D < 1`` the inequality demands
    ``Lap_r u0 >= (2 - D) u0**p > 0`` wherever ``u0 > 0``, which cannot hold
    at a positive maximum; spike data therefore always fail at ``r = 0``.
    """
    u0 = np.asarray(u0, dtype=float)
    up = u0 ** p
    margin = radial_laplacian(grid, u0) + (constants.D - 2.0) * up
    return _report(grid, margin, _scaled_tolerance(grid, up))
