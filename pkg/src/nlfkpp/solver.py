"""Time integration into blow-up, plus the two comparison problems.

The stepper is the two-stage, second-order IMEX scheme ARS(2,2,2): the
radial Laplacian is treated implicitly (both stages share one tridiagonal
matrix ``I - g dt L``), the reaction ``K u^p`` explicitly, and ``K`` is
recomputed from the stage field at every stage.  The implicit part is
L-stable, so no diffusive step restriction applies; the step is limited by
the reaction time scale ``safety / (p sup_u^(p-1))`` and by a cap on the
relative change of the field per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .grid import RadialGrid, restricted_average
from .model import ModelParams
from .operators import apply_bands, laplacian_bands

_GAMMA = 1.0 - 1.0 / math.sqrt(2.0)
_DELTA = 1.0 - 1.0 / (2.0 * _GAMMA)

MONOTONE_RTOL = 1e-10
CLIP_FLAG_RTOL = 1e-8
TRACE_COLUMNS = ("t", "dt", "sup_u", "m_beta_avg", "ubar", "K", "min_u", "u_at_half", "monotone_ok")
DIAGNOSTIC_COLUMNS = ("m_p_avg", "point_bound_excess", "outer_average", "clip")


class Status(str, Enum):
    REACHED_HORIZON = "ReachedHorizon"
    BLOWUP_DETECTED = "BlowupDetected"
    STEP_COLLAPSE = "StepCollapse"


def default_levels(u_max: float = 1e8) -> tuple[float, ...]:
    top = int(math.floor(math.log10(u_max)))
    return tuple(10.0 ** k for k in range(2, top + 1))


@dataclass
class StepControl:
    """Step-size policy and stopping rules.

    ``dt_min`` is relative to the reaction time scale
    ``min(1, 1/(p sup_u^(p-1)))``: a step shorter than that fraction of the
    time scale without reaching ``u_max`` ends the run with StepCollapse.
    ``cfl_coeff``, when set, additionally enforces the explicit diffusive
    bound ``dt <= cfl_coeff h_min^2 / (2N)`` (not needed by the implicit
    stepper, kept for experiments).
    """

    t_end: float = 1.0
    dt_init: float = 1e-8
    safety: float = 0.1
    max_rel_change: float = 0.05
    growth: float = 1.25
    u_max: float = 1e8
    dt_min: float = 1e-14
    max_steps: int = 1_000_000
    cfl_coeff: float | None = None
    stride: int = 1
    snapshot_levels: tuple[float, ...] | None = None
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        if self.t_end <= 0 or self.dt_init <= 0 or self.u_max <= 0:
            raise ValueError("t_end, dt_init and u_max must be positive")
        if self.stride < 1 or self.max_steps < 1:
            raise ValueError("stride and max_steps must be >= 1")
        if self.snapshot_levels is None:
            self.snapshot_levels = default_levels(self.u_max)
        self.snapshot_levels = tuple(sorted(float(v) for v in self.snapshot_levels))
        self.snapshot_times = tuple(sorted(float(v) for v in self.snapshot_times))


@dataclass
class Trace:
    """Per-step diagnostics; one array per column of :data:`TRACE_COLUMNS`.

    ``diagnostics`` holds the extra per-record quantities used by the
    invariant audit (see :data:`DIAGNOSTIC_COLUMNS`).
    """

    columns: dict[str, np.ndarray]
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)

    def __getattr__(self, name):
        cols = self.__dict__.get("columns", {})
        if name in cols:
            return cols[name]
        diag = self.__dict__.get("diagnostics", {})
        if name in diag:
            return diag[name]
        raise AttributeError(name)

    def __len__(self) -> int:
        return len(self.columns["t"])

    def truncated(self, n: int) -> "Trace":
        return Trace({k: v[:n] for k, v in self.columns.items()},
                     {k: v[:n] for k, v in self.diagnostics.items()})


@dataclass
class Snapshot:
    t: float
    sup_u: float
    label: str
    values: np.ndarray


@dataclass
class SimulationOutcome:
    status: Status
    t_final: float
    trace: Trace
    snapshots: list[Snapshot]
    steps: int
    clip_total: float = 0.0
    clip_flagged: bool = False
    reason: str = ""

    def snapshot(self, label: str) -> Snapshot:
        for s in self.snapshots:
            if s.label == label:
                return s
        raise KeyError(label)

    @property
    def final(self) -> Snapshot:
        return self.snapshot("final")


class _Recorder:
    def __init__(self, grid: RadialGrid, params: ModelParams):
        self.grid = grid
        self.params = params
        self.rN = grid.nodes ** grid.dim
        self.rows: list[tuple] = []
        self.diag: list[tuple] = []

    def record(self, t, dt, u, min_raw, clip):
        g, prm = self.grid, self.params
        w = g.quad_weights
        sup = float(u.max())
        m_beta = float(w @ u ** prm.beta)
        ubar = float(w @ u)
        mono = bool(np.all(np.diff(u) <= MONOTONE_RTOL * sup))
        self.rows.append((t, dt, sup, m_beta, ubar, 1.0 - prm.sigma * m_beta, min_raw,
                          float(np.interp(0.5, g.nodes, u)), mono))
        self.diag.append((float(w @ u ** prm.p), float(np.max(self.rN * u)) - ubar,
                          restricted_average(g, u, 0.25, 1.0), clip))

    def trace(self) -> Trace:
        cols = {name: np.array([row[i] for row in self.rows], dtype=bool if name == "monotone_ok" else float)
                for i, name in enumerate(TRACE_COLUMNS)}
        diag = {name: np.array([row[i] for row in self.diag], dtype=float)
                for i, name in enumerate(DIAGNOSTIC_COLUMNS)}
        return Trace(cols, diag)


class _Stepper:
    def __init__(self, grid: RadialGrid, params: ModelParams, coefficient: float | None = None):
        self.grid = grid
        self.params = params
        self.coefficient = coefficient
        self.bands = laplacian_bands(grid)
        lower, diag, upper = self.bands
        self._ab = np.zeros((3, len(grid)))
        self._lower, self._diag, self._upper = lower, diag, upper

    def reaction(self, u: np.ndarray) -> np.ndarray:
        prm = self.params
        if self.coefficient is None:
            K = 1.0 - prm.sigma * float(self.grid.quad_weights @ u ** prm.beta)
        else:
            K = self.coefficient
        return K * u ** prm.p

    def _matrix(self, c: float) -> np.ndarray:
        ab = self._ab
        ab[0, 1:] = -c * self._upper[:-1]
        ab[1] = 1.0 - c * self._diag
        ab[2, :-1] = -c * self._lower[1:]
        return ab

    def step(self, u: np.ndarray, dt: float) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            ab = self._matrix(_GAMMA * dt)
            F1 = self.reaction(u)
            U2 = solve_banded((1, 1), ab, u + _GAMMA * dt * F1, check_finite=False)
            F2 = self.reaction(np.maximum(U2, 0.0))
            rhs = u + dt * (_DELTA * F1 + (1.0 - _DELTA) * F2) + dt * (1.0 - _GAMMA) * apply_bands(self.bands, U2)
            return solve_banded((1, 1), ab, rhs, check_finite=False)

    def dt_bound(self, sup: float, control: StepControl) -> float:
        p = self.params.p
        bound = control.safety / (p * max(sup, 1e-300) ** (p - 1.0))
        if control.cfl_coeff is not None:
            bound = min(bound, control.cfl_coeff * self.grid.h_min ** 2 / (2.0 * self.grid.dim))
        return bound

    @staticmethod
    def time_scale(sup: float, p: float) -> float:
        return min(1.0, 1.0 / (p * max(sup, 1e-300) ** (p - 1.0)))


class _StepFailure(Exception):
    def __init__(self, status: Status, reason: str):
        super().__init__(reason)
        self.status = status
        self.reason = reason


def _relative_change(new: np.ndarray, old: np.ndarray, sup: float) -> float:
    return float(np.max(np.abs(new - old) / (np.abs(old) + 1e-3 * sup + 1e-300)))


def _try_step(stepper: _Stepper, u: np.ndarray, dt: float, control: StepControl):
    """Take one accepted step starting from proposal ``dt``.

    Returns ``(u_new, dt_used, rel_change, min_raw, clip)``.
    """
    sup = float(u.max())
    floor = control.dt_min * stepper.time_scale(sup, stepper.params.p)
    while True:
        if dt < floor:
            raise _StepFailure(Status.STEP_COLLAPSE, f"dt={dt:.3e} fell below dt_min floor {floor:.3e}")
        cand = stepper.step(u, dt)
        if not np.all(np.isfinite(cand)):
            if sup > control.u_max / 10.0:
                raise _StepFailure(Status.BLOWUP_DETECTED, "overflow above u_max/10")
            dt *= 0.5
            continue
        rel = _relative_change(cand, u, sup)
        if rel > control.max_rel_change:
            dt *= 0.5
            continue
        min_raw = float(cand.min())
        clip = max(0.0, -min_raw)
        return np.maximum(cand, 0.0), dt, rel, min_raw, clip


def advance(state, t: float, control: StepControl, params: ModelParams, grid: RadialGrid,
            coefficient: float | None = None) -> tuple[np.ndarray, float]:
    """One accepted step from ``state`` at time ``t``.

    The step starts from ``control.dt_init`` capped by the reaction bound and
    the horizon, and is halved until the relative change cap is met.
    """
    u = np.asarray(state, dtype=float)
    stepper = _Stepper(grid, params, coefficient)
    dt = min(control.dt_init, stepper.dt_bound(float(u.max()), control), control.t_end - t)
    u_new, dt_used, *_ = _try_step(stepper, u, dt, control)
    return u_new, dt_used


def run(params: ModelParams, grid: RadialGrid, u0, control: StepControl,
        coefficient: float | None = None) -> SimulationOutcome:
    """Integrate from ``u0`` until the horizon, blow-up or step collapse.

    ``coefficient`` freezes the reaction coefficient (local problem);
    otherwise ``K`` is the non-local functional.
    """
    u = np.array(u0, dtype=float)
    if u.shape != grid.nodes.shape:
        raise ValueError(f"u0 has shape {u.shape}, grid has {grid.nodes.shape}")
    if not np.all(np.isfinite(u)) or np.any(u < 0):
        raise ValueError("u0 must be finite and nonnegative")
    stepper = _Stepper(grid, params, coefficient)
    rec = _Recorder(grid, params)
    rec.record(0.0, 0.0, u, float(u.min()), 0.0)
    snapshots: list[Snapshot] = []
    levels = [lv for lv in control.snapshot_levels if lv > u.max()]
    times = [tm for tm in control.snapshot_times if 0.0 < tm <= control.t_end]

    t, comp = 0.0, 0.0
    dt = control.dt_init
    clip_total = 0.0
    status, reason = None, ""
    steps = 0
    while status is None:
        if steps >= control.max_steps:
            status, reason = Status.STEP_COLLAPSE, f"max_steps={control.max_steps} exhausted"
            break
        sup = float(u.max())
        target = times[0] if times else control.t_end
        proposal = min(dt, stepper.dt_bound(sup, control))
        landing = proposal >= target - t
        step_dt = target - t if landing else proposal
        try:
            u_new, dt_used, rel, min_raw, clip = _try_step(stepper, u, step_dt, control)
        except _StepFailure as exc:
            status, reason = exc.status, exc.reason
            break
        steps += 1
        clip_total += clip
        if landing and dt_used == step_dt:
            t, comp = target, 0.0
        else:
            # compensated summation keeps t accurate when dt << t near blow-up
            y = dt_used - comp
            s = t + y
            comp = (s - t) - y
            t = s
        u = u_new
        sup = float(u.max())
        crossed = []
        while levels and sup >= levels[0]:
            crossed.append(levels.pop(0))
        hit_time = bool(times) and t >= times[0]
        if hit_time:
            times.pop(0)
        if sup >= control.u_max:
            status = Status.BLOWUP_DETECTED
        elif t >= control.t_end * (1.0 - 1e-14):
            status = Status.REACHED_HORIZON
        if status is not None or crossed or hit_time or steps % control.stride == 0:
            rec.record(t, dt_used, u, min_raw, clip)
        for lv in crossed:
            snapshots.append(Snapshot(t, sup, f"level:{lv:.0e}", u.copy()))
        if hit_time:
            snapshots.append(Snapshot(t, sup, f"time:{t!r}", u.copy()))
        if dt_used < step_dt:
            dt = dt_used
        else:
            dt = proposal * (control.growth if rel < 0.5 * control.max_rel_change else 1.0)

    snapshots.append(Snapshot(t, float(u.max()), "final", u.copy()))
    trace = rec.trace()
    ubar = float(trace.ubar[-1]) if len(trace) else 0.0
    return SimulationOutcome(status=status, t_final=t, trace=trace, snapshots=snapshots, steps=steps,
                             clip_total=clip_total, clip_flagged=clip_total >= CLIP_FLAG_RTOL * max(ubar, 1e-300),
                             reason=reason)


def run_local_comparison(params: ModelParams, grid: RadialGrid, u0, D: float,
                         control: StepControl) -> SimulationOutcome:
    """Same stepper for ``v_t = Lap_r v + D v^p`` (frozen coefficient)."""
    if not 0.0 <= D <= 1.0:
        raise ValueError(f"D must lie in [0, 1], got {D}")
    return run(params, grid, u0, control, coefficient=float(D))


@dataclass
class ODETrajectory:
    t: np.ndarray
    U: np.ndarray
    limit_gap: float | None
    blowup_time: float | None


def run_homogeneous_ode(p: float, beta: float, sigma: float, U0: float, t_end: float,
                        u_max: float = 1e8, rtol: float = 1e-12, atol: float = 1e-14,
                        n_out: int = 401) -> ODETrajectory:
    """Spatially homogeneous problem ``U' = U^p (1 - sigma U^beta)``.

    For ``sigma > 0`` and ``U0 >= 0`` the solution is global and tends
    monotonically to ``sigma^(-1/beta)`` (or stays at 0).  ``sigma = 0`` is
    allowed and blows up at ``U0^(1-p)/(p-1)``; integration stops once
    ``U >= u_max``.
    """
    if U0 < 0:
        raise ValueError("U0 must be nonnegative")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    t_eval = np.linspace(0.0, t_end, n_out)
    equilibrium = sigma ** (-1.0 / beta) if sigma > 0 else None
    if U0 == 0.0 or (equilibrium is not None and U0 == equilibrium):
        U = np.full_like(t_eval, U0)
        return ODETrajectory(t_eval, U, None if equilibrium is None else abs(U0 - equilibrium), None)

    def f(_t, y):
        return y ** p * (1.0 - sigma * np.abs(y) ** beta)

    def hit(_t, y):
        return y[0] - u_max
    hit.terminal = True

    sol = solve_ivp(f, (0.0, t_end), [U0], method="DOP853", events=hit, dense_output=True,
                    rtol=rtol, atol=atol)
    t_last = float(sol.t[-1])
    if sol.t_events[0].size:
        blow = float(sol.t_events[0][0])
    elif sol.status == -1 and f(t_last, sol.y[:, -1])[0] > 0:
        # step size underflow on a growing solution: the singularity is
        # closer than the time resolution allows
        blow = t_last
    else:
        blow = None
    t = np.append(t_eval[t_eval < t_last], t_last)
    U = sol.sol(t)[0]
    gap = abs(U[-1] - equilibrium) if (equilibrium is not None and blow is None) else None
    return ODETrajectory(t, U, gap, blow)

