"""
Blow-down and blow-up profiles of finished trajectories.

Both profiles are pure post-processing. "Convergence" of a numerical series
is decided by a fixed rule: non-increasing over the last decade of time and
ending below a threshold (default 0.05). The raw series are always reported
so the rule can be tightened by the reader.
"""

import json
import logging

import numpy as np

from .curvature import ricci_eigen
from .errors import WrongRegime
from .isotropy import BracketTensor, ReductiveSpace
from .models import (
    CONVERGENCE_THRESHOLD,
    FlowTrajectory,
    MetricState,
    ProfileMode,
    RescaledProfile,
)

logger = logging.getLogger(__name__)

MONOTONE_ATOL = 1e-9
DECADE_FACTOR = 100.0
TYPE_I_BAND = 4.0
SQRT_GROWTH = 1.1
EINSTEIN_SEARCH_STATES = 1000

BLOWDOWN_DIAGNOSTICS = ("pinching", "p_over_t", "l_over_t")


def _spread(values: np.ndarray) -> float:
    """(max - min) / (2 max |v|); 0 for the zero vector."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    top = float(np.max(np.abs(values)))
    if top == 0.0:
        return 0.0
    return float((np.max(values) - np.min(values)) / (2.0 * top))


def einstein_residual(
    state: MetricState, space: ReductiveSpace, tensor: BracketTensor
) -> float:
    """
    Distance of ric from a multiple of g: min_c max_i |r_i - c| / max_i |r_i|.

    Scale invariant, and 0 exactly for Einstein metrics (including r = 0).
    """
    return _spread(ricci_eigen(state, space, tensor))


def einstein_search(
    space: ReductiveSpace,
    tensor: BracketTensor,
    rng: np.random.Generator,
    states: int = EINSTEIN_SEARCH_STATES,
    lo: float = 0.1,
    hi: float = 10.0,
) -> tuple[float, MetricState]:
    """
    Smallest Einstein residual over seeded random awesome metrics.

    Every module is drawn independently and log-uniformly in [lo, hi]. Returns
    the best residual and the state attaining it; a floor well above zero is
    evidence that the space carries no invariant Einstein metric.
    """
    best, best_state = float("inf"), None
    for _ in range(states):
        x = np.exp(rng.uniform(np.log(lo), np.log(hi), space.n_modules))
        state = MetricState(x, space.n_l)
        residual = einstein_residual(state, space, tensor)
        if residual < best:
            best, best_state = residual, state
    logger.info("Einstein search over %d states: min residual %.3g", states, best)
    return best, best_state


def _loglog_exponent(t: np.ndarray, y: np.ndarray) -> float | None:
    mask = (t > 0) & (y > 0)
    if np.count_nonzero(mask) < 2:
        return None
    slope, _ = np.polyfit(np.log(t[mask]), np.log(y[mask]), 1)
    return float(slope)


def _non_increasing(y: np.ndarray, atol: float = MONOTONE_ATOL) -> bool:
    return bool(np.all(np.diff(y) <= atol))


# =============================================================================
# BLOW-DOWN
# =============================================================================


def blowdown_profile(
    trajectory: FlowTrajectory,
    space: ReductiveSpace,
    threshold: float = CONVERGENCE_THRESHOLD,
) -> RescaledProfile:
    """
    Diagnostics of t^-1 g(t) for an immortal run.

    Tracks p_m/p_1 - 1, max_i |p_i/t - 1| and l_n/t; the run is consistent
    with the blow-down limit iff all three are non-increasing over the last
    decade and end below ``threshold``.

    Raises WrongRegime for extinct runs or runs shorter than two decades.
    """
    if trajectory.is_extinct:
        raise WrongRegime("blow-down needs an immortal run", check="immortal")
    if space.n_p == 0:
        raise WrongRegime("blow-down needs a nonzero p", check="p_nonempty")

    times = trajectory.times
    t_first, t_last = float(times[0]), float(times[-1])
    if t_last < DECADE_FACTOR * max(t_first, 1.0):
        raise WrongRegime(
            f"run ends at t={t_last:g}; blow-down needs t_last >= 100 max(t_first, 1)",
            check="duration",
            details={"t_first": t_first, "t_last": t_last},
        )

    keep = times > 0
    t = times[keep]
    X = trajectory.x_matrix[keep]
    r = trajectory.r_matrix[keep]
    R = trajectory.scalar[keep]
    n_l = space.n_l
    P = X[:, n_l:]
    l_n = X[:, :n_l].max(axis=1) if n_l else np.zeros(t.size)

    series = {
        "pinching": P.max(axis=1) / P.min(axis=1) - 1.0,
        "p_over_t": np.max(np.abs(P / t[:, None] - 1.0), axis=1),
        "l_over_t": l_n / t,
    }
    decade = t >= t_last / 10.0

    final, exponents, monotone = {}, {}, {}
    for name in BLOWDOWN_DIAGNOSTICS:
        y = series[name]
        final[name] = float(y[-1])
        exponents[name] = _loglog_exponent(t[decade], y[decade])
        monotone[name] = _non_increasing(y[decade])
    consistent = all(monotone.values()) and all(
        final[name] < threshold for name in BLOWDOWN_DIAGNOSTICS
    )

    band = t[decade] * np.abs(R[decade])
    sym_residual = float(np.max(np.abs(t[-1] * r[-1, n_l:] + 0.5)))
    extras = {
        "type_III_band": [float(np.min(band)), float(np.max(band))],
        "type_III_ratio": (
            float(np.max(band) / np.min(band)) if np.min(band) > 0 else float("inf")
        ),
        "symmetric_limit_residual": sym_residual,
        "decade_start": float(t[decade][0]),
    }
    if n_l:
        ratio = l_n[decade] / np.sqrt(t[decade])
        extras["ln_sqrt_t_sup"] = float(np.max(ratio))
        extras["ln_sqrt_t_start"] = float(ratio[0])
        extras["ln_sqrt_t_bounded"] = bool(np.max(ratio) <= SQRT_GROWTH * ratio[0])

    series["x_over_t"] = X / t[:, None]
    series["t_times_r"] = r * t[:, None]
    profile = RescaledProfile(
        mode=ProfileMode.BLOWDOWN,
        times=t,
        series=series,
        final=final,
        exponents=exponents,
        monotone=monotone,
        threshold=threshold,
        verdict="consistent" if consistent else "inconsistent",
        extras=extras,
    )
    logger.info("blow-down verdict: %s (final %s)", profile.verdict, final)
    return profile


# =============================================================================
# BLOW-UP
# =============================================================================


def blowup_profile(
    trajectory: FlowTrajectory,
    space: ReductiveSpace,
    T: float,
    threshold: float = CONVERGENCE_THRESHOLD,
    band: float = TYPE_I_BAND,
) -> RescaledProfile:
    """
    Diagnostics of R(t) g(t) as t approaches the extinction time T.

    The window is T - t <= 0.1 (T - t0) minus the samples within
    2 (T - t_last) of T, where extrapolation error dominates.
    Raises WrongRegime on immortal runs or an empty window.
    """
    if not trajectory.is_extinct:
        raise WrongRegime("blow-up needs an extinct run", check="extinct")

    times = trajectory.times
    t0 = float(times[0])
    t_last = float(trajectory.steps[-1][0])
    gap = T - times
    window = (gap <= 0.1 * (T - t0)) & (gap >= 2.0 * (T - t_last))
    n_window = int(np.count_nonzero(window))
    if n_window < 2:
        raise WrongRegime(
            "not enough samples in the last decade before T",
            check="window",
            details={"T": T, "t_last": t_last, "samples": n_window},
        )

    t = times[window]
    X = trajectory.x_matrix[window]
    r = trajectory.r_matrix[window]
    R = trajectory.scalar[window]
    n_l = space.n_l
    dims = space.dims

    type_i = (T - t) * R
    low = float(np.min(type_i))
    ratio = float(np.max(type_i)) / low if low > 0 else float("inf")
    normalized = r / R[:, None]
    last = normalized[-1]
    p_sum = float(np.sum(dims[n_l:] * np.abs(last[n_l:])))
    near_zero = int(np.sum(dims[np.abs(last) < threshold]))
    fiber_residual = _spread(last[:n_l]) if n_l else None

    final = {
        "type_I_ratio": ratio,
        "p_normalized_sum": p_sum,
        "near_zero_directions": float(near_zero),
    }
    if fiber_residual is not None:
        final["fiber_einstein_residual"] = fiber_residual
    checks = {
        "type_I": ratio <= band,
        "p_normalized": p_sum < threshold,
        "near_zero_count": near_zero >= space.dim_p,
    }
    consistent = all(checks.values())

    profile = RescaledProfile(
        mode=ProfileMode.BLOWUP,
        times=t,
        series={
            "T_minus_t_times_R": type_i,
            "normalized_r": normalized,
            "R_times_x": X * R[:, None],
        },
        final=final,
        exponents={"T_minus_t_times_R": _loglog_exponent(T - t, type_i)},
        monotone={},
        threshold=threshold,
        verdict="consistent" if consistent else "inconsistent",
        extras={
            "T": T,
            "band": band,
            "checks": checks,
            "dim_p": space.dim_p,
            "fiber_einstein_ok": (
                fiber_residual < threshold if fiber_residual is not None else None
            ),
            "window": [float(t[0]), float(t[-1])],
        },
    )
    logger.info("blow-up verdict: %s (type I ratio %.3g)", profile.verdict, ratio)
    return profile


# =============================================================================
# PLOT SCRIPT
# =============================================================================


def plot_script(profile: RescaledProfile) -> str:
    """A standalone matplotlib script plotting each scalar diagnostic on log axes."""
    if profile.mode == ProfileMode.BLOWUP:
        T = float(profile.extras.get("T", 0.0))
        axis = (T - np.asarray(profile.times)).tolist()
        xlabel = "T - t"
    else:
        axis = np.asarray(profile.times).tolist()
        xlabel = "t"
    curves = {
        name: np.asarray(values).tolist()
        for name, values in profile.series.items()
        if np.asarray(values).ndim == 1
    }
    data = json.dumps({"axis": axis, "curves": curves})
    return "\n".join(
        [
            f'"""{profile.mode.value} diagnostics (verdict: {profile.verdict})."""',
            "",
            "import json",
            "",
            "import matplotlib.pyplot as plt",
            "",
            f"DATA = json.loads({data!r})",
            "",
            "",
            "def main():",
            "    fig, ax = plt.subplots()",
            '    for name, values in DATA["curves"].items():',
            "        points = [",
            '            (a, abs(v))',
            '            for a, v in zip(DATA["axis"], values)',
            "            if a > 0 and v",
            "        ]",
            "        if points:",
            "            ax.loglog(*zip(*points), label=name)",
            f'    ax.set_xlabel("{xlabel}")',
            f"    ax.axhline({profile.threshold!r}, linestyle=\"--\", color=\"grey\")",
            "    ax.legend()",
            f'    fig.savefig("{profile.mode.value}_profile.png", dpi=150)',
            "",
            "",
            'if __name__ == "__main__":',
            "    main()",
            "",
        ]
    )
