"""
Integrator for the homogeneous Ricci flow eigenvalue ODE.

The flow dx_i/dt = -2 r_i x_i is integrated as du/dt = -2 r(e^u) in
log coordinates u = log x, which keeps the metric positive and turns the
linear growth near infinity into slow logarithmic growth.

WHY THIS FILE EXISTS:
- One adaptive Dormand-Prince 5(4) stepper with PI step control and
  continuous (dense) output, shared by runs, checks and tests
- Event handling (extinction, end time, step budget) and the diagonality
  cross-check live next to the step loop that triggers them
"""

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .curvature import (
    diagonality_defect,
    diagonality_tolerance,
    ricci_eigen,
    scalar_curvature,
)
from .errors import DegenerateMetric, DiagonalityBroken, IntegratorFailure
from .isotropy import BracketTensor, ReductiveSpace
from .models import (
    EventKind,
    FlowConfig,
    FlowEvent,
    FlowSample,
    FlowTrajectory,
    MetricState,
)

logger = logging.getLogger(__name__)

RicciHook = Callable[[MetricState, ReductiveSpace, BracketTensor], np.ndarray]

# =============================================================================
# DORMAND-PRINCE 5(4) TABLEAU
# =============================================================================

# autonomous system, so the stage times are not needed
BUTCHER = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)

# difference between the 5th and 4th order weights
ERROR_WEIGHTS = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

# continuous extension coefficients
DENSE_WEIGHTS = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
BETA_1 = 0.7 / 5
BETA_2 = 0.4 / 5
UNDERFLOW = 1e-14
MAX_NONFINITE_TRIALS = 10
MONOTONE_TOLERANCE = 1e-8


@dataclass
class StepResult:
    """One trial step: new state, error estimate and the stage derivatives."""

    u_new: np.ndarray
    error: np.ndarray
    stages: list[np.ndarray]
    h: float

    def dense(self, u_old: np.ndarray, theta: float) -> np.ndarray:
        """Fourth-order continuous extension at t + theta * h."""
        k = self.stages
        h = self.h
        r2 = self.u_new - u_old
        r3 = h * k[0] - r2
        r4 = r2 - h * k[6] - r3
        r5 = h * sum(w * ki for w, ki in zip(DENSE_WEIGHTS, k, strict=True) if w)
        t1 = 1.0 - theta
        return u_old + theta * (r2 + t1 * (r3 + theta * (r4 + t1 * r5)))


def dopri_step(
    rhs: Callable[[np.ndarray], np.ndarray], u: np.ndarray, k1: np.ndarray, h: float
) -> StepResult:
    """One Dormand-Prince step from u with first stage k1 already known (FSAL)."""
    stages = [k1]
    for row in BUTCHER:
        increment = sum(a * k for a, k in zip(row, stages, strict=False) if a)
        stages.append(rhs(u + h * increment))
    u_new = u + h * sum(
        b * k for b, k in zip(BUTCHER[-1], stages, strict=False) if b
    )
    # stage 7 is rhs at u_new (FSAL)
    error = h * sum(e * k for e, k in zip(ERROR_WEIGHTS, stages, strict=True) if e)
    return StepResult(u_new=u_new, error=error, stages=stages, h=h)


def error_norm(
    error: np.ndarray, u: np.ndarray, u_new: np.ndarray, rtol: float, atol: float
) -> float:
    scale = atol + rtol * np.maximum(np.abs(u), np.abs(u_new))
    return float(np.sqrt(np.mean((error / scale) ** 2)))


# =============================================================================
# FLOW
# =============================================================================


class _Rhs:
    """du/dt = -2 r(e^u), counting evaluations."""

    def __init__(
        self, space: ReductiveSpace, tensor: BracketTensor, ricci: RicciHook
    ) -> None:
        self.space = space
        self.tensor = tensor
        self.ricci = ricci
        self.calls = 0

    def __call__(self, u: np.ndarray) -> np.ndarray:
        self.calls += 1
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            try:
                state = MetricState(np.exp(u), self.space.n_l)
            except DegenerateMetric:
                return np.full_like(u, np.nan)
            return -2.0 * np.asarray(self.ricci(state, self.space, self.tensor))


def _sample(
    t: float, x: np.ndarray, space: ReductiveSpace, tensor: BracketTensor, ricci
) -> FlowSample:
    state = MetricState(x, space.n_l)
    r = np.asarray(ricci(state, space, tensor), dtype=float)
    return FlowSample(t=t, x=state.x, r=r, R=scalar_curvature(state, space, tensor))


def _initial_step(k1: np.ndarray, span: float) -> float:
    rate = float(np.max(np.abs(k1))) if k1.size else 0.0
    return min(0.01 / max(rate, 1e-12), 0.1 * span)


def integrate_flow(
    state0: MetricState,
    space: ReductiveSpace,
    tensor: BracketTensor,
    config: FlowConfig,
    *,
    ricci: RicciHook | None = None,
    seed: int | None = None,
) -> FlowTrajectory:
    """
    Integrate the eigenvalue ODE from ``state0`` over [t0, t_end].

    Samples follow ``config.sample_times`` (every accepted step when None);
    the terminal state is always sampled. Stops on the first of: t_end,
    extinction (min x below extinction_eps, or step underflow), max_steps.

    Raises:
        IntegratorFailure: non-finite values that step rejection cannot cure
        DiagonalityBroken: ricci_full left the diagonal ansatz (recorded first)
    """
    ricci = ricci or ricci_eigen
    rhs = _Rhs(space, tensor, ricci)
    traj = FlowTrajectory(
        metadata={
            "seed": seed,
            "config": config.to_dict(),
            "space_hash": space.space_hash(),
        }
    )
    started = time.perf_counter()

    t = float(config.t0)
    u = np.log(np.asarray(state0.x, dtype=float))
    k1 = rhs(u)
    if not np.all(np.isfinite(k1)):
        raise IntegratorFailure(
            "non-finite derivative at the initial state",
            check="finite",
            details={"t": t, "x": state0.x.tolist()},
        )

    schedule = list(config.sample_times) if config.sample_times is not None else None
    next_sample = 0
    first = _sample(t, np.exp(u), space, tensor, ricci)
    if schedule is None or (schedule and math.isclose(schedule[0], t)):
        traj.samples.append(first)
        if schedule:
            next_sample = 1
    traj.steps.append((t, np.exp(u)))
    diag_series: list[tuple[float, float, float]] = []
    _check_diagonality(first, space, traj, diag_series)

    R_prev = first.R
    monotone_violated = False
    h = config.initial_step or _initial_step(k1, config.t_end - t)
    err_prev = 1.0
    accepted = rejected = nonfinite = 0
    terminal: FlowEvent | None = None
    last_sample_t = traj.samples[-1].t if traj.samples else None

    while terminal is None:
        if accepted >= config.max_steps:
            terminal = FlowEvent(t, EventKind.COMPLETED, {"reason": "max_steps"})
            break
        reaches_end = h >= config.t_end - t
        h = min(h, config.t_end - t)
        if h < UNDERFLOW * max(1.0, abs(t)):
            terminal = FlowEvent(
                t, EventKind.EXTINCTION, {"reason": "step_underflow", "h": h}
            )
            logger.info("step underflow at t=%.12g; treating as extinction", t)
            break

        step = dopri_step(rhs, u, k1, h)
        if not (np.all(np.isfinite(step.u_new)) and np.all(np.isfinite(step.error))):
            nonfinite += 1
            rejected += 1
            if nonfinite > MAX_NONFINITE_TRIALS:
                exc = IntegratorFailure(
                    "non-finite values persist after step reduction",
                    check="finite",
                    details={"t": t, "x": np.exp(u).tolist(), "h": h},
                )
                exc.trajectory = traj
                raise exc
            h *= FAC_MIN
            continue
        nonfinite = 0

        err = error_norm(step.error, u, step.u_new, config.rel_tol, config.abs_tol)
        if err > 1.0:
            rejected += 1
            h *= max(FAC_MIN, SAFETY * err ** (-1.0 / 5.0))
            logger.debug("rejected step at t=%.6g, err=%.3g", t, err)
            continue

        # accepted
        t_new = config.t_end if reaches_end else t + h
        u_old = u
        u = step.u_new
        k1 = step.stages[-1]
        accepted += 1
        x = np.exp(u)
        traj.steps.append((t_new, x))

        if schedule is not None:
            while (
                next_sample < len(schedule)
                and schedule[next_sample] <= t_new + 1e-12
            ):
                ts = schedule[next_sample]
                theta = (ts - t) / h
                x_ts = np.exp(step.dense(u_old, theta))
                traj.samples.append(_sample(ts, x_ts, space, tensor, ricci))
                last_sample_t = ts
                next_sample += 1
        current = _sample(t_new, x, space, tensor, ricci)
        if schedule is None:
            traj.samples.append(current)
            last_sample_t = t_new
        t = t_new

        if not monotone_violated and current.R < R_prev - MONOTONE_TOLERANCE * max(
            1.0, abs(R_prev)
        ):
            monotone_violated = True
            traj.events.append(
                FlowEvent(
                    t,
                    EventKind.MONITOR_VIOLATION,
                    {"monitor": "scalar_monotone", "R_prev": R_prev, "R": current.R},
                )
            )
            logger.warning("scalar curvature decreased at t=%.6g", t)
        R_prev = current.R

        if float(np.min(x)) < config.extinction_eps:
            payload = {"reason": "threshold", "x_min": float(np.min(x))}
            terminal = FlowEvent(t, EventKind.EXTINCTION, payload)
            logger.info("extinction threshold reached at t=%.12g", t)
            break

        if accepted % config.monitor_stride == 0:
            _check_diagonality(current, space, traj, diag_series)

        if t >= config.t_end - 1e-12 * max(1.0, abs(config.t_end)):
            terminal = FlowEvent(t, EventKind.COMPLETED, {"reason": "t_end"})
        else:
            fac = SAFETY * max(err, 1e-10) ** (-BETA_1) * err_prev**BETA_2
            h *= min(FAC_MAX, max(FAC_MIN, fac))
            err_prev = max(err, 1e-4)

    if last_sample_t is None or last_sample_t < t:
        traj.samples.append(_sample(t, np.exp(u), space, tensor, ricci))
    traj.events.append(terminal)
    traj.metadata.update(
        {
            "accepted_steps": accepted,
            "rejected_steps": rejected,
            "rhs_evaluations": rhs.calls,
            "wall_seconds": time.perf_counter() - started,
            "diagonality": diag_series,
        }
    )
    logger.info(
        "flow finished at t=%.6g (%s, %d accepted, %d rejected)",
        t,
        terminal.kind.value,
        accepted,
        rejected,
    )
    return traj


def _check_diagonality(
    sample: FlowSample,
    space: ReductiveSpace,
    traj: FlowTrajectory,
    series: list[tuple[float, float, float]],
) -> None:
    state = MetricState(sample.x, space.n_l)
    defect = diagonality_defect(state, space, sample.r)
    norm = max(defect["norm"], 1e-300)
    off = defect["off_block"] / norm
    mismatch = defect["diagonal_mismatch"] / norm
    series.append((sample.t, off, mismatch))
    tolerance = diagonality_tolerance(defect["condition"])
    if defect["relative"] > tolerance:
        payload = {
            "off_block": off,
            "diagonal_mismatch": mismatch,
            "tolerance": tolerance,
        }
        traj.events.append(FlowEvent(sample.t, EventKind.DIAGONALITY_BROKEN, payload))
        traj.metadata["diagonality"] = series
        logger.warning("diagonality broken at t=%.6g: %s", sample.t, payload)
        exc = DiagonalityBroken(
            "Ricci tensor is no longer diagonal in the module basis",
            check="diagonality",
            details={"t": sample.t, **payload, "x": sample.x.tolist()},
        )
        exc.trajectory = traj
        raise exc


# =============================================================================
# INITIAL STATES AND SUMMARY
# =============================================================================


def random_initial_state(
    space: ReductiveSpace,
    lo: float,
    hi: float,
    rng: np.random.Generator,
    tied: bool = True,
) -> MetricState:
    """
    Log-uniform draw in [lo, hi], one value per tie group.

    ``tied=False`` draws every module independently; such states are still
    awesome but need not stay diagonal along the flow.
    """
    groups = list(space.tie_groups) if tied else []
    groups = groups or [(i,) for i in range(space.n_modules)]
    covered = {i for group in groups for i in group}
    groups += [(i,) for i in range(space.n_modules) if i not in covered]
    x = np.empty(space.n_modules)
    for group in groups:
        x[list(group)] = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    return MetricState(x, space.n_l)


def flow_summary(traj: FlowTrajectory, space: ReductiveSpace) -> dict:
    """First R > 0 time, extreme eigenvalues, step counts and the final state."""
    R = traj.scalar
    times = traj.times
    positive = np.flatnonzero(R > 0)
    x_all = np.array([x for _, x in traj.steps])
    terminal = traj.terminal_event
    final = traj.steps[-1]
    return {
        "t_final": float(final[0]),
        "x_final": np.asarray(final[1]).tolist(),
        "first_positive_R_time": float(times[positive[0]]) if positive.size else None,
        "x_min": float(np.min(x_all)),
        "x_max": float(np.max(x_all)),
        "accepted_steps": traj.metadata.get("accepted_steps"),
        "rejected_steps": traj.metadata.get("rejected_steps"),
        "terminal": terminal.kind.value if terminal else None,
        "terminal_reason": terminal.payload.get("reason") if terminal else None,
        "n_samples": len(traj.samples),
        "n_modules": space.n_modules,
    }
