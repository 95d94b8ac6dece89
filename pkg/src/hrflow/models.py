"""
Data models for hrflow.

Entities:
- CheckReport: residuals of a validation check (never a bare boolean)
- MetricState: eigenvalues of an awesome metric relative to Q
- RicciData: Ricci eigenvalues, scalar curvature and optional full tensor
- FlowConfig / FlowSample / FlowEvent / FlowTrajectory: one flow run
- MonitorResult / MonitorReport: dynamical bounds checked along a run
- RescaledProfile: blow-down / blow-up diagnostics
- InitialStateSpec / RunManifest: the run configuration document
- RunRecord: one row of the run registry

Data Typing:
- Eigenvalue vectors are float64 numpy arrays ordered like space.modules
- Times are flow-time floats
- Everything serializes through to_dict() to plain JSON types
"""

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any
from uuid import UUID, uuid4

import numpy as np

from .errors import DegenerateMetric, InputError

DEFAULT_TOLERANCE = 1e-10
SCHUR_TOLERANCE = 1e-9
DEFAULT_EXTINCTION_EPS = 1e-8
CONVERGENCE_THRESHOLD = 0.05


# =============================================================================
# ENUMS
# =============================================================================


class EventKind(str, Enum):
    """Kinds of events recorded on a trajectory."""

    EXTINCTION = "Extinction"
    MONITOR_VIOLATION = "MonitorViolation"
    DIAGONALITY_BROKEN = "DiagonalityBroken"
    COMPLETED = "Completed"


TERMINAL_EVENTS = {
    EventKind.EXTINCTION,
    EventKind.DIAGONALITY_BROKEN,
    EventKind.COMPLETED,
}


class Regime(str, Enum):
    """Outcome of a run."""

    IMMORTAL = "immortal"
    EXTINCT = "extinct"


class ProfileMode(str, Enum):
    """Which parabolic rescaling a profile uses."""

    BLOWDOWN = "blowdown"
    BLOWUP = "blowup"


class InitialKind(str, Enum):
    """How the initial metric of a run is specified."""

    EXPLICIT = "explicit"
    ISOTROPIC = "isotropic"
    RANDOM = "random"


# =============================================================================
# CHECKS
# =============================================================================


@dataclass
class CheckReport:
    """
    Residuals of one validation check.

    A check passes iff ``failed`` is empty. Residuals are reported for every
    sub-check, passing or not, so a near-miss is visible.
    """

    name: str
    residuals: dict[str, float | None] = field(default_factory=dict)
    failed: list[str] = field(default_factory=list)
    tolerance: float = DEFAULT_TOLERANCE
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failed

    def record(self, key: str, value: float, ok: bool) -> None:
        """Store a residual and mark the sub-check failed if needed."""
        self.residuals[key] = float(value)
        if not ok:
            self.failed.append(key)

    def mark_na(self, key: str) -> None:
        """Record a sub-check that does not apply (reported as None)."""
        self.residuals[key] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "residuals": {k: _json_float(v) for k, v in self.residuals.items()},
            "failed": list(self.failed),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class Tolerances:
    """Thresholds shared by the check suites."""

    algebra: float = DEFAULT_TOLERANCE
    schur: float = SCHUR_TOLERANCE
    identity: float = 1e-9
    bound_slack: float = 1e-9
    diagonality: float = 1e-10
    awesome: float = 1e-10
    einstein_floor: float = 1e-3

    def to_dict(self) -> dict:
        return {
            "algebra": self.algebra,
            "schur": self.schur,
            "identity": self.identity,
            "bound_slack": self.bound_slack,
            "diagonality": self.diagonality,
            "awesome": self.awesome,
            "einstein_floor": self.einstein_floor,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tolerances":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(
                f"unknown tolerance fields: {sorted(unknown)}", check="tolerances"
            )
        values = {key: float(value) for key, value in data.items()}
        if any(value <= 0 for value in values.values()):
            raise InputError("tolerances must be positive", check="tolerances")
        return cls(**values)


# =============================================================================
# METRIC AND CURVATURE
# =============================================================================


@dataclass(frozen=True, eq=False)
class MetricState:
    """
    Eigenvalues x = (l_1..l_n, p_1..p_m) of an awesome metric relative to Q.

    The first ``n_l`` entries belong to l-modules, the rest to p-modules, in
    the module order of the ReductiveSpace. Sorted views break ties by module
    index (stable sort).
    """

    x: np.ndarray
    n_l: int = 0

    def __post_init__(self) -> None:
        arr = np.array(self.x, dtype=float).ravel()
        if arr.size == 0:
            raise DegenerateMetric("metric state is empty", check="nonempty")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise DegenerateMetric(
                "metric eigenvalues must be finite and positive",
                check="positivity",
                details={"x": arr.tolist()},
            )
        if not 0 <= self.n_l <= arr.size:
            raise InputError(f"n_l={self.n_l} outside 0..{arr.size}", check="layout")
        arr.flags.writeable = False
        object.__setattr__(self, "x", arr)

    @property
    def size(self) -> int:
        return int(self.x.size)

    @property
    def l_values(self) -> np.ndarray:
        return self.x[: self.n_l]

    @property
    def p_values(self) -> np.ndarray:
        return self.x[self.n_l :]

    def l_order(self) -> np.ndarray:
        """Module indices of the l-block, ascending by eigenvalue."""
        return np.argsort(self.l_values, kind="stable")

    def p_order(self) -> np.ndarray:
        """Module indices of the p-block (global), ascending by eigenvalue."""
        return self.n_l + np.argsort(self.p_values, kind="stable")

    def scaled(self, factor: float) -> "MetricState":
        return MetricState(self.x * factor, self.n_l)

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "n_l": self.n_l}


@dataclass(frozen=True, eq=False)
class RicciData:
    """Ricci eigenvalues r_i, scalar curvature R and optionally the full tensor."""

    r: np.ndarray
    R: float
    full: np.ndarray | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"r": np.asarray(self.r).tolist(), "R": float(self.R)}
        if self.full is not None:
            d["full"] = np.asarray(self.full).tolist()
        return d


# =============================================================================
# FLOW
# =============================================================================


@dataclass
class FlowConfig:
    """Integrator settings for one run."""

    t0: float = 0.0
    t_end: float = 1.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    extinction_eps: float = DEFAULT_EXTINCTION_EPS
    monitor_stride: int = 25
    max_steps: int = 200_000
    sample_times: tuple[float, ...] | None = None
    initial_step: float | None = None

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise InputError("tolerances must be positive", check="tolerance")
        if not self.t_end > self.t0:
            raise InputError("t_end must exceed t0", check="time_span")
        if self.extinction_eps <= 0:
            raise InputError("extinction_eps must be positive", check="extinction_eps")
        if self.monitor_stride < 1 or self.max_steps < 1:
            raise InputError("monitor_stride and max_steps must be >= 1", check="steps")
        if self.sample_times is not None:
            times = tuple(float(t) for t in self.sample_times)
            if any(b <= a for a, b in zip(times, times[1:], strict=False)):
                raise InputError("sample_times must increase", check="sample_times")
            if times and (times[0] < self.t0 or times[-1] > self.t_end):
                raise InputError(
                    "sample_times must lie inside [t0, t_end]", check="sample_times"
                )
            self.sample_times = times

    def with_tolerance(self, rel_tol: float) -> "FlowConfig":
        """Copy with rel_tol overridden and abs_tol tied to it."""
        data = self.to_dict()
        data["rel_tol"] = rel_tol
        data["abs_tol"] = rel_tol / 100.0
        return FlowConfig.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "t_end": self.t_end,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "extinction_eps": self.extinction_eps,
            "monitor_stride": self.monitor_stride,
            "max_steps": self.max_steps,
            "sample_times": list(self.sample_times) if self.sample_times else None,
            "initial_step": self.initial_step,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FlowConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InputError(
                f"unknown flow config fields: {sorted(unknown)}", check="flow_fields"
            )
        kwargs = dict(data)
        if kwargs.get("sample_times") is not None:
            kwargs["sample_times"] = tuple(kwargs["sample_times"])
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class FlowSample:
    """One recorded point of a trajectory."""

    t: float
    x: np.ndarray
    r: np.ndarray
    R: float


@dataclass
class FlowEvent:
    """Something that happened at time t during a run."""

    t: float
    kind: EventKind
    payload: dict = field(default_factory=dict)
    wall_time: datetime = field(default_factory=datetime.now)

    @property
    def is_terminal(self) -> bool:
        return self.kind in TERMINAL_EVENTS

    def to_dict(self) -> dict:
        return {
            "t": _json_float(self.t),
            "kind": self.kind.value,
            "timestamp": self.wall_time.isoformat(),
            "payload": self.payload,
        }


@dataclass
class FlowTrajectory:
    """
    Samples, raw accepted steps and events of one flow run.

    ``samples`` follow the requested schedule (or every accepted step);
    ``steps`` always hold every accepted step and feed extinction fitting.
    """

    samples: list[FlowSample] = field(default_factory=list)
    steps: list[tuple[float, np.ndarray]] = field(default_factory=list)
    events: list[FlowEvent] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def x_matrix(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    @property
    def r_matrix(self) -> np.ndarray:
        return np.array([s.r for s in self.samples])

    @property
    def scalar(self) -> np.ndarray:
        return np.array([s.R for s in self.samples])

    @property
    def terminal_event(self) -> FlowEvent | None:
        for event in reversed(self.events):
            if event.is_terminal:
                return event
        return None

    @property
    def is_extinct(self) -> bool:
        event = self.terminal_event
        return event is not None and event.kind == EventKind.EXTINCTION

    def events_of(self, kind: EventKind) -> list[FlowEvent]:
        return [e for e in self.events if e.kind == kind]


@dataclass
class MonitorResult:
    """Slack series of one monitor; negative slack beyond tolerance is a violation."""

    name: str
    applicable: bool = True
    worst_slack: float | None = None
    first_violation_t: float | None = None
    series: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return not self.applicable or self.first_violation_t is None

    def to_dict(self) -> dict:
        if not self.applicable:
            return {"name": self.name, "status": "n/a"}
        return {
            "name": self.name,
            "status": "pass" if self.passed else "fail",
            "worst_slack": _json_float(self.worst_slack),
            "first_violation_t": _json_float(self.first_violation_t),
        }


@dataclass
class MonitorReport:
    """All monitors of one trajectory plus the constants they were built from."""

    results: dict[str, MonitorResult] = field(default_factory=dict)
    c0: float | None = None
    t0: float | None = None

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results.values())

    @property
    def violations(self) -> list[str]:
        return [name for name, res in self.results.items() if not res.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "c0": _json_float(self.c0),
            "t0": _json_float(self.t0),
            "monitors": {name: res.to_dict() for name, res in self.results.items()},
        }


# =============================================================================
# ASYMPTOTICS
# =============================================================================


@dataclass
class RescaledProfile:
    """Blow-down or blow-up diagnostics of a trajectory."""

    mode: ProfileMode
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    series: dict[str, np.ndarray] = field(default_factory=dict)
    final: dict[str, float] = field(default_factory=dict)
    exponents: dict[str, float | None] = field(default_factory=dict)
    monotone: dict[str, bool] = field(default_factory=dict)
    threshold: float = CONVERGENCE_THRESHOLD
    verdict: str = "inconsistent"
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "final": {k: _json_float(v) for k, v in self.final.items()},
            "exponents": {k: _json_float(v) for k, v in self.exponents.items()},
            "monotone": dict(self.monotone),
            "extras": _jsonable(self.extras),
        }


# =============================================================================
# RUN CONFIGURATION
# =============================================================================


@dataclass
class InitialStateSpec:
    """Exactly one of: explicit eigenvalues, an isotropic value, a random range."""

    kind: InitialKind = InitialKind.ISOTROPIC
    values: tuple[float, ...] | None = None
    value: float | None = 1.0
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self) -> None:
        if self.kind == InitialKind.EXPLICIT and not self.values:
            raise InputError("explicit initial state needs values", check="initial")
        bad_value = self.value is None or self.value <= 0
        if self.kind == InitialKind.ISOTROPIC and bad_value:
            raise InputError("isotropic value must be positive", check="initial")
        if self.kind == InitialKind.RANDOM and not (
            self.lo is not None and self.hi is not None and 0 < self.lo <= self.hi
        ):
            raise InputError("random range needs 0 < lo <= hi", check="initial")

    def to_dict(self) -> dict:
        if self.kind == InitialKind.EXPLICIT:
            return {"explicit": list(self.values or ())}
        if self.kind == InitialKind.ISOTROPIC:
            return {"isotropic": self.value}
        return {"random": {"lo": self.lo, "hi": self.hi}}

    @classmethod
    def from_dict(cls, data: dict) -> "InitialStateSpec":
        if not isinstance(data, dict):
            raise InputError("initial must be an object", check="initial")
        given = [key for key in ("explicit", "isotropic", "random") if key in data]
        if len(given) != 1:
            raise InputError(
                "initial state needs exactly one of explicit/isotropic/random",
                check="initial",
                details={"given": given},
            )
        key = given[0]
        if key == "explicit":
            raw = data[key]
            if not isinstance(raw, list | tuple):
                raise InputError(
                    "explicit needs a list of numbers",
                    check="initial",
                    details={"explicit": raw},
                )
            values = tuple(_initial_number(v, "explicit") for v in raw)
            return cls(InitialKind.EXPLICIT, values=values, value=None)
        if key == "isotropic":
            return cls(
                InitialKind.ISOTROPIC, value=_initial_number(data[key], "isotropic")
            )
        rng = data[key]
        if not isinstance(rng, dict) or not {"lo", "hi"} <= set(rng):
            raise InputError("random needs lo and hi", check="initial")
        lo = _initial_number(rng["lo"], "lo")
        hi = _initial_number(rng["hi"], "hi")
        return cls(InitialKind.RANDOM, value=None, lo=lo, hi=hi)


def _initial_number(value, name: str) -> float:
    """A finite float from a manifest entry; booleans and strings are rejected."""
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise InputError(
            f"{name} must be a number, got {value!r}",
            check="initial",
            details={name: value},
        )
    number = float(value)
    if not math.isfinite(number):
        raise InputError(
            f"{name} must be finite", check="initial", details={name: value}
        )
    return number


@dataclass
class RunManifest:
    """
    A run configuration document.

    ``space`` is either {"catalog": key, "params": {...}} or {"file": path};
    a "h_indices" entry overrides the suggested isotropy of a catalog key.
    """

    space: dict = field(default_factory=dict)
    initial: InitialStateSpec = field(default_factory=InitialStateSpec)
    flow: FlowConfig = field(default_factory=FlowConfig)
    seed: int = 0
    decomposition_seed: int | None = None
    out_dir: str | None = None
    profile_threshold: float = CONVERGENCE_THRESHOLD
    name: str = "run"

    @property
    def space_label(self) -> str:
        if "catalog" in self.space:
            return str(self.space["catalog"])
        return str(self.space.get("file", "unknown"))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "space": self.space,
            "initial": self.initial.to_dict(),
            "flow": self.flow.to_dict(),
            "seed": self.seed,
            "decomposition_seed": self.decomposition_seed,
            "out_dir": self.out_dir,
            "profile_threshold": self.profile_threshold,
        }


# =============================================================================
# RUN REGISTRY
# =============================================================================


@dataclass
class RunRecord:
    """One finished (or failed) run as stored in the registry."""

    run_id: UUID = field(default_factory=uuid4)
    created_at: datetime = field(default_factory=datetime.now)
    space_key: str = ""
    space_hash: str | None = None
    seed: int = 0
    regime: Regime | None = None
    status: str = "ok"
    exit_code: int = 0
    t_final: float | None = None
    extinction_time: float | None = None
    out_dir: str | None = None
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "run_id": str(self.run_id),
            "created_at": self.created_at.isoformat(),
            "space_key": self.space_key,
            "space_hash": self.space_hash,
            "seed": self.seed,
            "regime": self.regime.value if self.regime else None,
            "status": self.status,
            "exit_code": self.exit_code,
            "t_final": self.t_final,
            "extinction_time": self.extinction_time,
            "out_dir": self.out_dir,
            "summary": self.summary,
        }


# =============================================================================
# JSON HELPERS
# =============================================================================


def _json_float(value: float | None) -> float | str | None:
    """Floats for JSON; inf/nan become strings so the output stays valid JSON."""
    if value is None:
        return None
    value = float(value)
    if math.isfinite(value):
        return value
    return str(value)


def _jsonable(value: Any) -> Any:
    """Recursively convert numpy containers and enums to JSON types."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _json_float(float(value))
    return value
