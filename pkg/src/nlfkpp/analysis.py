"""Post-hoc blow-up analysis: blow-up time, rate exponent, profile slope, invariant audit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .grid import RadialGrid
from .model import AnalysisConstants, ModelParams

ASYMPTOTIC_SUP = 1e3
MIN_FIT_RECORDS = 10
MIN_WINDOW_NODES = 8
POSITIVITY_TOL = 1e-12
K_SIGN_TOL = 1e-10
K_LIMIT_SPREAD = 0.2
CLIP_BUDGET_RTOL = 1e-8
# records with T_est - t below this fraction of T_est carry a rounding error
# in log(T_est - t) above ~1e-8 and are left out of the rate fit
GAP_RESOLUTION = 1e8 * np.finfo(float).eps


class AnalysisError(ValueError):
    pass


class InsufficientData(AnalysisError):
    pass


class NonDecaying(AnalysisError):
    pass


class WindowTooNarrow(AnalysisError):
    pass


def _asymptotic_window(trace, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(trace.t, dtype=float)
    s = np.asarray(trace.sup_u, dtype=float)
    sel = s >= threshold
    if np.count_nonzero(sel) < MIN_FIT_RECORDS:
        raise InsufficientData(f"{np.count_nonzero(sel)} records with sup_u >= {threshold:g}; "
                               f"need {MIN_FIT_RECORDS}")
    return t[sel], s[sel]


def estimate_blowup_time(trace, p: float, threshold: float = ASYMPTOTIC_SUP) -> float:
    """Extrapolate the blow-up time from ``y = sup_u^-(p-1)``.

    Under type-I growth ``y`` is asymptotically affine in ``t`` and vanishes
    at the blow-up time.  The line is fitted by least squares on the records
    with ``sup_u >= threshold``, with residuals measured relative to ``y``
    so that the records closest to the singularity (where ``y`` spans many
    decades) fix the intercept.
    """
    t, s = _asymptotic_window(trace, threshold)
    y = s ** -(p - 1.0)
    t_ref = t[-1]
    A = np.column_stack([np.ones_like(t), t - t_ref]) / y[:, None]
    scale = np.abs(A).max(axis=0)
    coef, *_ = np.linalg.lstsq(A / scale, np.ones_like(y), rcond=None)
    c0, c1 = coef / scale
    if not c1 < 0:
        raise NonDecaying(f"fitted slope {c1:.3e} >= 0: sup_u^-(p-1) is not decreasing")
    return max(t_ref - c0 / c1, t_ref)


@dataclass(frozen=True)
class RateFit:
    slope: float
    half_width: float
    n: int


def fit_rate_exponent(trace, T_est: float, threshold: float = ASYMPTOTIC_SUP) -> RateFit:
    """Slope of ``log sup_u`` against ``-log(T_est - t)`` with a 95% half-width.

    Only records whose distance to ``T_est`` is resolved in floating point
    (``T_est - t > GAP_RESOLUTION * T_est``) enter the fit.
    """
    t, s = _asymptotic_window(trace, threshold)
    gap = T_est - t
    keep = gap > GAP_RESOLUTION * abs(T_est)
    if np.count_nonzero(keep) < MIN_FIT_RECORDS:
        raise InsufficientData(f"{np.count_nonzero(keep)} records with T_est - t resolved; need {MIN_FIT_RECORDS}")
    x, y = -np.log(gap[keep]), np.log(s[keep])
    res = stats.linregress(x, y)
    n = len(x)
    half = float(stats.t.ppf(0.975, n - 2) * res.stderr) if n > 2 else float("inf")
    return RateFit(slope=float(res.slope), half_width=half, n=n)


@dataclass(frozen=True)
class ProfileFit:
    slope: float
    log_corrected_slope: float
    n: int
    window: tuple[float, float]


def default_profile_window(grid: RadialGrid) -> tuple[float, float]:
    return 30.0 * grid.h_min, 0.2


def fit_profile_slope(grid: RadialGrid, snapshot, window: tuple[float, float] | None = None) -> ProfileFit:
    """Log-log slope of a late-time field over ``window``.

    Also returns the slope of ``log u`` against ``log(|log r| / r^2)``, the
    exponent of the log-corrected profile form.
    """
    lo, hi = default_profile_window(grid) if window is None else window
    r = grid.nodes
    u = np.asarray(snapshot, dtype=float)
    sel = (r >= lo) & (r <= hi) & (r > 0) & (r < 1) & (u > 0)
    n = int(np.count_nonzero(sel))
    if n < MIN_WINDOW_NODES:
        raise WindowTooNarrow(f"{n} nodes in window ({lo:.3g}, {hi:.3g}); need {MIN_WINDOW_NODES}")
    lr, lu = np.log(r[sel]), np.log(u[sel])
    slope = np.polyfit(lr, lu, 1)[0]
    corrected = np.polyfit(np.log(np.abs(lr)) - 2.0 * lr, lu, 1)[0]
    return ProfileFit(float(slope), float(corrected), n, (float(lo), float(hi)))


@dataclass(frozen=True)
class InvariantResult:
    """``passed`` is None when the invariant's premise does not apply."""

    passed: bool | None
    margin: float | None
    detail: str
    hard: bool = True

    def as_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, "detail": self.detail, "hard": self.hard}


@dataclass
class AuditTable:
    results: dict[str, InvariantResult] = field(default_factory=dict)

    def __getitem__(self, key: str) -> InvariantResult:
        return self.results[key]

    @property
    def hard_failures(self) -> list[str]:
        return [k for k, v in self.results.items() if v.hard and v.passed is False]

    @property
    def all_passed(self) -> bool:
        return not self.hard_failures

    def as_dict(self) -> dict:
        return {k: v.as_dict() for k, v in self.results.items()}


def final_decade(trace) -> np.ndarray | None:
    """Mask of the records after the last time ``sup_u`` was below ``sup_final / 10``.

    None when the trace never grew by a decade up to its final value.
    """
    s = np.asarray(trace.sup_u)
    below = np.nonzero(s <= s[-1] / 10.0)[0]
    if below.size == 0:
        return None
    mask = np.zeros(len(s), dtype=bool)
    mask[below[-1] + 1:] = True
    return mask


def point_bound_tolerance(grid: RadialGrid) -> float:
    """Relative tolerance ``eps_h`` for the point bound: the squared largest spacing."""
    return float(grid.h.max()) ** 2


def audit_invariants(trace, params: ModelParams, constants: AnalysisConstants | None = None,
                     lp_cutoff: float | None = None, eps_h: float = 1e-10) -> AuditTable:
    """Check the recorded trace against the structural properties of the flow.

    ``eps_h`` is the relative tolerance of the point bound
    ``r^N u <= ubar (1 + eps_h)``; see :func:`point_bound_tolerance`.
    ``lp_cutoff`` bounds the time window for the informational two-sided
    estimate of ``avg u^p`` against ``ubar^mu`` (only with ``constants``).
    """
    table = AuditTable()
    R = table.results
    K = np.asarray(trace.K)
    ubar = np.asarray(trace.ubar)
    sup = np.asarray(trace.sup_u)

    worst = float(np.min(trace.min_u))
    R["positivity"] = InvariantResult(worst >= -POSITIVITY_TOL, worst,
                                      f"min over records of min_u = {worst:.3e}")

    m0 = float(trace.m_beta_avg[0])
    if params.sigma * m0 <= 1.0:
        kmin = float(K.min())
        R["m_beta_threshold"] = InvariantResult(kmin > -K_SIGN_TOL, kmin,
                                                f"sigma*avg u0^beta = {params.sigma * m0:.4g} <= 1; min K = {kmin:.3e}")
    else:
        excess = float(np.max(trace.m_beta_avg[1:] - m0)) if len(trace) > 1 else -np.inf
        R["m_beta_threshold"] = InvariantResult(excess < 0, excess,
                                                "sigma*avg u0^beta > 1; avg u^beta must stay below its initial value")

    nonneg = (K[:-1] >= 0) & (K[1:] >= 0)
    if np.any(nonneg):
        drops = (ubar[:-1] - ubar[1:])[nonneg]
        tol = 1e-12 * np.maximum(ubar[:-1], ubar[1:])[nonneg]
        worst_drop = float(np.max(drops - tol))
        R["monotone_average"] = InvariantResult(worst_drop <= 0, -worst_drop,
                                                f"largest decrease of ubar while K >= 0: {float(np.max(drops)):.3e}")
    else:
        R["monotone_average"] = InvariantResult(None, None, "K < 0 throughout")

    if "point_bound_excess" in trace.diagnostics:
        ex = np.asarray(trace.point_bound_excess)
        worst_pb = float(np.max(ex - eps_h * ubar))
        R["point_bound"] = InvariantResult(worst_pb <= 0, float(np.max(ex)),
                                           f"max over records of max_i r_i^N u_i - ubar; eps_h = {eps_h:.3e}")
    else:
        R["point_bound"] = InvariantResult(None, None, "no point-bound diagnostics recorded")

    if "clip" in trace.diagnostics:
        total = float(np.sum(trace.clip))
        budget = CLIP_BUDGET_RTOL * float(ubar[-1])
        R["clip_budget"] = InvariantResult(total < budget or total == 0.0, budget - total,
                                           f"total clipped mass {total:.3e} vs budget {budget:.3e}")

    mono = np.asarray(trace.monotone_ok, dtype=bool)
    R["radial_monotonicity"] = InvariantResult(bool(mono.all()), float(np.count_nonzero(~mono)),
                                               f"{np.count_nonzero(~mono)} records not nonincreasing in r")

    kmax = float(K.max())
    upper_ok = kmax < 1.0
    lower_ok = True
    detail = f"max K = {kmax:.6g}"
    if constants is not None:
        kmin_all = float(K.min())
        lower_ok = kmin_all > constants.D - 1e-10
        detail += f"; min K = {kmin_all:.6g} vs D = {constants.D:.6g}"
    mask = final_decade(trace)
    if mask is None or not np.any(mask):
        R["K_corridor"] = InvariantResult(upper_ok and lower_ok, 1.0 - kmax, detail + "; no final decade of growth")
        R["K_limit"] = InvariantResult(None, None, "sup_u did not grow by a decade to its final value")
    else:
        R["K_corridor"] = InvariantResult(upper_ok and lower_ok, 1.0 - kmax, detail)
        Kd = K[mask]
        spread = float((Kd.max() - Kd.min()) / abs(Kd.mean())) if Kd.mean() != 0 else np.inf
        R["K_limit"] = InvariantResult(bool(spread < K_LIMIT_SPREAD and Kd.min() > 0), spread,
                                       f"relative spread of K over the final decade = {spread:.3e}")

    if constants is not None and "m_p_avg" in trace.diagnostics:
        A1 = params.lam ** (params.p - constants.mu) * constants.alpha1
        A2 = params.lam ** (params.p - constants.mu) * constants.alpha2
        t = np.asarray(trace.t)
        sel = t <= (lp_cutoff if lp_cutoff is not None else t[-1])
        ratio = np.asarray(trace.m_p_avg)[sel] / ubar[sel] ** constants.mu
        inside = bool(np.all((ratio >= 0.5 * A2) & (ratio <= 2.0 * A1)))
        R["lp_estimate"] = InvariantResult(inside, float(ratio.max() / (2.0 * A1)),
                                           f"avg u^p / ubar^mu in [{ratio.min():.4g}, {ratio.max():.4g}] "
                                           f"vs [{0.5 * A2:.4g}, {2.0 * A1:.4g}]", hard=False)
    return table


@dataclass
class BlowupReport:
    status: str
    t_final: float
    T_est: float | None
    T_tilde: float
    rate_exponent: float | None
    rate_target: float
    profile_slope: float | None
    profile_target: float
    singlepoint_ratio: float | None
    K_final: float
    audit: dict

    KEYS = ("status", "t_final", "T_est", "T_tilde", "rate_exponent", "rate_target", "profile_slope",
            "profile_target", "singlepoint_ratio", "K_final", "audit")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.KEYS}


def build_report(status: str, trace, params: ModelParams, grid: RadialGrid | None = None,
                 final_field=None, constants: AnalysisConstants | None = None,
                 T_tilde: float | None = None) -> BlowupReport:
    """Assemble a :class:`BlowupReport`; fits that cannot run are reported, not raised."""
    from .model import blowup_time_bound

    eps_h = point_bound_tolerance(grid) if grid is not None else 1e-10
    audit = audit_invariants(trace, params, constants, eps_h=eps_h).as_dict()
    p = params.p
    T_est = rate = slope = None
    try:
        T_est = estimate_blowup_time(trace, p)
        rate = fit_rate_exponent(trace, T_est).slope
        audit["blowup_fit"] = {"passed": True, "margin": None, "detail": "ok", "hard": False}
    except AnalysisError as exc:
        audit["blowup_fit"] = {"passed": None, "margin": None,
                               "detail": f"{type(exc).__name__}: {exc}", "hard": False}
    if grid is not None and final_field is not None and float(np.max(final_field)) >= 1e6:
        try:
            slope = fit_profile_slope(grid, final_field).slope
        except AnalysisError as exc:
            audit["profile_fit"] = {"passed": None, "margin": None,
                                    "detail": f"{type(exc).__name__}: {exc}", "hard": False}
    else:
        audit["profile_fit"] = {"passed": None, "margin": None,
                                "detail": "no late snapshot with sup_u >= 1e6", "hard": False}
    u_half0 = float(trace.u_at_half[0])
    ratio = float(trace.u_at_half[-1]) / u_half0 if u_half0 > 0 else None
    return BlowupReport(
        status=str(status.value if hasattr(status, "value") else status),
        t_final=float(trace.t[-1]),
        T_est=T_est,
        T_tilde=float(T_tilde if T_tilde is not None else blowup_time_bound(params)),
        rate_exponent=rate,
        rate_target=1.0 / (p - 1.0),
        profile_slope=slope,
        profile_target=-2.0 / (p - 1.0),
        singlepoint_ratio=ratio,
        K_final=float(trace.K[-1]),
        audit=audit,
    )
