"""Radial meshes on [0, 1] and ball-average quadrature in dimension N.

Node ``i`` owns the control volume between the neighbouring edge midpoints
(``0`` and ``1`` close the first and last cells).  Its weight is the
normalised ball measure of that shell, ``w_i = m_{i+1/2}^N - m_{i-1/2}^N``, so
the weights are positive, sum to one by telescoping, and pair with the
flux-form Laplacian in :mod:`nlfkpp.operators` to give exact discrete mass
conservation.  Fields are plain float arrays of length ``M + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_NODES = 16


class GridError(ValueError):
    pass


class TooCoarse(GridError):
    pass


class EmptyWindow(GridError):
    pass


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    gamma: float
    dim: int
    edges: np.ndarray
    quad_weights: np.ndarray

    @property
    def M(self) -> int:
        return len(self.nodes) - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h_min(self) -> float:
        return float(self.h.min())

    def __len__(self) -> int:
        return len(self.nodes)


def build_grid(M: int, gamma: float = 1.0, N: int = 3) -> RadialGrid:
    """Graded mesh ``r_i = (i/M)**gamma`` with ``M + 1`` nodes."""
    if M < MIN_NODES:
        raise TooCoarse(f"M >= {MIN_NODES} required, got M={M}")
    if gamma < 1:
        raise GridError(f"gamma >= 1 required, got {gamma}")
    if N < 3:
        raise GridError(f"N >= 3 required, got {N}")
    nodes = (np.arange(M + 1) / M) ** gamma
    nodes[0], nodes[-1] = 0.0, 1.0
    edges = np.concatenate(([0.0], 0.5 * (nodes[1:] + nodes[:-1]), [1.0]))
    weights = np.diff(edges ** N)
    for arr in (nodes, edges, weights):
        arr.setflags(write=False)
    return RadialGrid(nodes=nodes, gamma=float(gamma), dim=int(N), edges=edges, quad_weights=weights)


def ball_average(grid: RadialGrid, f) -> float:
    """Quadrature for ``N * int_0^1 r^(N-1) f(r) dr``, the average over B_1."""
    return float(grid.quad_weights @ np.asarray(f, dtype=float))


def window_weights(grid: RadialGrid, r_lo: float, r_hi: float) -> np.ndarray:
    if not 0.0 <= r_lo < r_hi <= 1.0:
        raise EmptyWindow(f"need 0 <= r_lo < r_hi <= 1, got ({r_lo}, {r_hi})")
    clipped = np.clip(grid.edges, r_lo, r_hi)
    return np.diff(clipped ** grid.dim)


def restricted_average(grid: RadialGrid, f, r_lo: float, r_hi: float) -> float:
    """Contribution of the shell ``r_lo < r < r_hi`` to the ball average.

    Uses the control volumes cut to the window, normalised like
    :func:`ball_average` (so ``f = 1`` gives ``r_hi**N - r_lo**N``).
    """
    return float(window_weights(grid, r_lo, r_hi) @ np.asarray(f, dtype=float))
