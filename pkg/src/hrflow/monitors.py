"""
Trajectory monitors and extinction analysis.

Monitors turn the dynamical estimates of the flow into signed slack series
over the samples of a finished trajectory. They are diagnostic: the report
says which bound failed first and by how much, and nothing here raises on a
failed bound.

Re-basing: the bounds are stated for a start time t0 with p_1(t0) = 1. For
a general start P = p_1(t0) they are evaluated in the equivalent form with
c0 = (p_m + l_n)(t0) / P - 1, which reduces to the literal one when P = 1.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .curvature import diagonality_defect, diagonality_tolerance
from .errors import NotExtinct
from .isotropy import ReductiveSpace, TopologyRegime
from .models import (
    EventKind,
    FlowTrajectory,
    MetricState,
    MonitorReport,
    MonitorResult,
)

logger = logging.getLogger(__name__)

MONITOR_NAMES = (
    "scalar_monotone",
    "p1_lower",
    "sum_upper",
    "pinching_pm",
    "pinching_ln",
    "diagonality",
)
EXTINCTION_FIT_POINTS = 8
HALF_FIT_POINTS = 4
MONITOR_SCALAR_TOL = 1e-8


def _result(
    name: str, times: np.ndarray, slack: np.ndarray, tol: np.ndarray
) -> MonitorResult:
    """Build a MonitorResult; a sample violates when slack < -tol."""
    evaluated = ~np.isnan(slack)
    if not np.any(evaluated):
        return MonitorResult(name=name, applicable=False)
    bad = np.flatnonzero(evaluated & (slack < -tol))
    return MonitorResult(
        name=name,
        applicable=True,
        worst_slack=float(np.nanmin(slack)),
        first_violation_t=float(times[bad[0]]) if bad.size else None,
        series=slack,
    )


def monitor_suite(
    trajectory: FlowTrajectory, space: ReductiveSpace, stride: int | None = None
) -> MonitorReport:
    """Evaluate every monitor over the samples of ``trajectory``."""
    samples = trajectory.samples
    if not samples:
        empty = {n: MonitorResult(n, applicable=False) for n in MONITOR_NAMES}
        return MonitorReport(results=empty)

    times = trajectory.times
    X = trajectory.x_matrix
    R = trajectory.scalar
    n_l = space.n_l
    has_l, has_p = n_l > 0, space.n_p > 0
    t0 = float(times[0])
    nan = np.full(times.size, np.nan)
    results: dict[str, MonitorResult] = {}

    drop = np.concatenate([[np.nan], R[1:] - R[:-1]])
    previous = np.concatenate([[R[0]], R[:-1]])
    tol = MONITOR_SCALAR_TOL * np.maximum(1.0, np.abs(previous))
    results["scalar_monotone"] = _result("scalar_monotone", times, drop, tol)

    c0 = None
    if has_p:
        P_block = X[:, n_l:]
        p_1 = P_block.min(axis=1)
        p_m = P_block.max(axis=1)
        l_n = X[:, :n_l].max(axis=1) if has_l else np.zeros(times.size)
        P = float(p_1[0])
        c0 = float((p_m[0] + l_n[0]) / P - 1.0)
        elapsed = times - t0

        slack = p_1 - (elapsed + P)
        results["p1_lower"] = _result("p1_lower", times, slack, 1e-6 * (1.0 + times))

        bound = (elapsed + P) * (p_m[0] + l_n[0]) / P
        slack = bound - (p_m + l_n)
        results["sum_upper"] = _result("sum_upper", times, slack, 1e-6 * bound)

        slack = p_1 + c0 * np.sqrt(P * p_1) - p_m
        results["pinching_pm"] = _result("pinching_pm", times, slack, 1e-6 * p_m)

        if has_l:
            slack = c0 * np.sqrt(P) * np.sqrt(elapsed + P) - l_n
            results["pinching_ln"] = _result(
                "pinching_ln", times, slack, 1e-6 * np.maximum(l_n, 1.0)
            )
        else:
            results["pinching_ln"] = MonitorResult("pinching_ln", applicable=False)
    else:
        for name in ("p1_lower", "sum_upper", "pinching_pm", "pinching_ln"):
            results[name] = MonitorResult(name, applicable=False)

    config = trajectory.metadata.get("config", {})
    if stride is None:
        stride = int(config.get("monitor_stride", 25))
    # states past the extinction threshold are left to the extinction report
    floor = float(config.get("extinction_eps", 0.0))
    diag = nan.copy()
    for idx in range(0, len(samples), max(stride, 1)):
        sample = samples[idx]
        if float(np.min(sample.x)) < floor:
            continue
        defect = diagonality_defect(MetricState(sample.x, n_l), space, sample.r)
        diag[idx] = diagonality_tolerance(defect["condition"]) - defect["relative"]
    results["diagonality"] = _result("diagonality", times, diag, np.zeros(times.size))

    report = MonitorReport(results=results, c0=c0, t0=t0)
    for name in report.violations:
        logger.warning(
            "monitor %s violated first at t=%.6g",
            name,
            results[name].first_violation_t,
        )
    return report


# =============================================================================
# EXTINCTION
# =============================================================================


@dataclass
class ExtinctionReport:
    """Extrapolated extinction time and the rate diagnostics behind it."""

    T: float
    interval: tuple[float, float]
    t_last: float
    fit_points: int
    first_positive_R_time: float | None
    L_slope: float | None
    lambda_over_d: float | None
    T_richardson: float | None = None
    uncertainty: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def slope_within_bound(self) -> bool | None:
        if self.L_slope is None or self.lambda_over_d is None:
            return None
        return self.L_slope <= -self.lambda_over_d + 1e-9

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "interval": list(self.interval),
            "t_last": self.t_last,
            "fit_points": self.fit_points,
            "T_richardson": self.T_richardson,
            "uncertainty": self.uncertainty,
            "first_positive_R_time": self.first_positive_R_time,
            "L_slope": self.L_slope,
            "slope_bound": (
                -self.lambda_over_d if self.lambda_over_d is not None else None
            ),
            "slope_within_bound": self.slope_within_bound,
            "notes": list(self.notes),
        }


def _zero_crossing(
    t: np.ndarray, x: np.ndarray, t_last: float
) -> tuple[float, float] | None:
    """
    Zero crossing of the least-squares line through (t, x) and its standard
    error, or None when the line does not decrease. Clipped below at t_last.
    """
    if t.size < 2:
        return None
    s = t - t_last
    if t.size > 3:
        (slope, intercept), cov = np.polyfit(s, x, 1, cov=True)
    else:
        slope, intercept = np.polyfit(s, x, 1)
        cov = np.zeros((2, 2))
    if not slope < 0:
        return None
    offset = -intercept / slope
    # delta method on -b/a
    grad = np.array([intercept / slope**2, -1.0 / slope])
    variance = float(grad @ cov @ grad)
    return t_last + max(offset, 0.0), float(np.sqrt(max(variance, 0.0)))


def detect_extinction(
    trajectory: FlowTrajectory, space: ReductiveSpace, regime: TopologyRegime
) -> ExtinctionReport:
    """
    Extrapolate the extinction time from the last accepted steps.

    x_min(t) is close to linear in (T - t) near extinction, so T is the zero
    crossing of a least-squares line through the last 8 steps. The same fit
    over the last 4 steps gives a Richardson estimate 2 T_4 - T_8; the
    uncertainty is the larger of |T_richardson - T| and the standard error of
    the crossing, and the interval runs from the last step to T plus it.
    Raises NotExtinct when the run has no Extinction event.
    """
    if not trajectory.events_of(EventKind.EXTINCTION):
        raise NotExtinct("trajectory did not go extinct", check="extinction_event")

    steps = trajectory.steps[-EXTINCTION_FIT_POINTS:]
    t_fit = np.array([t for t, _ in steps])
    x_fit = np.array([float(np.min(x)) for _, x in steps])
    t_last = float(t_fit[-1])
    notes = []

    T, T_richardson, uncertainty = t_last, None, 0.0
    crossing = _zero_crossing(t_fit, x_fit, t_last)
    if crossing is None:
        notes.append("x_min is not decreasing over the fit window")
    else:
        T, spread = crossing
        tail = slice(-HALF_FIT_POINTS, None)
        half = _zero_crossing(t_fit[tail], x_fit[tail], t_last)
        if half is not None:
            T_richardson = max(t_last, 2.0 * half[0] - T)
            uncertainty = max(abs(T_richardson - T), spread)
        else:
            uncertainty = spread

    times = trajectory.times
    R = trajectory.scalar
    positive = np.flatnonzero(R > 0)
    first_positive = float(times[positive[0]]) if positive.size else None
    if first_positive is None:
        notes.append("R never became positive")

    L_slope = None
    if regime.eligible_indices:
        t0 = float(times[0])
        window = times >= 0.5 * (t0 + T)
        X = trajectory.x_matrix
        L = X[:, list(regime.eligible_indices)].max(axis=1)
        if np.count_nonzero(window) >= 2:
            L_slope = float(np.polyfit(times[window], L[window], 1)[0])
        else:
            notes.append("too few samples in the second half for the L slope")

    report = ExtinctionReport(
        T=float(T),
        interval=(t_last, float(T + uncertainty)),
        t_last=t_last,
        fit_points=len(steps),
        first_positive_R_time=first_positive,
        L_slope=L_slope,
        lambda_over_d=regime.lambda_over_d(space.dim_m),
        T_richardson=T_richardson,
        uncertainty=float(uncertainty),
        notes=notes,
    )
    logger.info("extinction time %.9g (last step %.9g)", report.T, t_last)
    return report
