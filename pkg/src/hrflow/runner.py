"""
Run pipeline: manifest in, run directory and registry row out.

A run goes build -> decomposition -> flow -> monitors -> extinction and
blow-up (extinct runs) or blow-down (immortal runs). Every stage writes its
artifact as soon as it has one, so a failed run still leaves the partial
trajectory and an error.json next to what was already computed.

Run directory layout:
- manifest.json, decomposition.json
- samples.csv (t, x_i, r_i, R, slack_<monitor>), events.jsonl
- summary.json, profile.json, plot_profile.py
- error.json (failed runs only)
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .asymptotics import blowdown_profile, blowup_profile, plot_script
from .errors import HRFlowError, InputError, WrongRegime
from .flow import flow_summary, integrate_flow, random_initial_state
from .isotropy import (
    ReductiveSpace,
    bracket_coefficients,
    build_space,
    classify_topology,
    decomposition_report,
)
from .models import (
    FlowTrajectory,
    InitialKind,
    MetricState,
    MonitorReport,
    Regime,
    RunManifest,
    RunRecord,
    _json_float,
    _jsonable,
)
from .monitors import MONITOR_NAMES, detect_extinction, monitor_suite
from .parse import resolve_space
from .storage import get_db_path, save_run

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MONITOR = 5

SUMMARY_KEYS = frozenset(
    {
        "name",
        "space",
        "space_hash",
        "seed",
        "decomposition_seed",
        "dims",
        "regime",
        "outcome",
        "T",
        "T_interval",
        "c0",
        "lambda_over_d",
        "extinction",
        "monitors",
        "verdict",
        "profile_mode",
        "flow",
        "status",
        "exit_code",
    }
)


@dataclass
class RunOutcome:
    """What one run left behind: its exit code, directory and registry row."""

    exit_code: int
    out_dir: Path
    record: RunRecord
    summary: dict | None = None
    error: dict | None = None
    notes: list[str] = field(default_factory=list)


# =============================================================================
# ARTIFACT HELPERS
# =============================================================================


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n")
    return path


def initial_state(
    manifest: RunManifest, space: ReductiveSpace, rng: np.random.Generator
) -> MetricState:
    """The t0 metric described by the manifest's initial block."""
    spec = manifest.initial
    if spec.kind == InitialKind.EXPLICIT:
        values = np.asarray(spec.values, dtype=float)
        if values.size != space.n_modules:
            raise InputError(
                f"explicit initial state has {values.size} values; "
                f"the space has {space.n_modules} modules",
                check="initial",
                details={"dims": space.dims.tolist()},
            )
        return MetricState(values, space.n_l)
    if spec.kind == InitialKind.ISOTROPIC:
        return MetricState(np.full(space.n_modules, spec.value), space.n_l)
    return random_initial_state(space, spec.lo, spec.hi, rng)


def samples_frame(
    trajectory: FlowTrajectory, monitors: MonitorReport | None = None
) -> pd.DataFrame:
    """The samples.csv table: t, x_i, r_i, R and one slack column per monitor."""
    if not trajectory.samples:
        return pd.DataFrame({"t": [], "R": []})
    X = trajectory.x_matrix
    r = trajectory.r_matrix
    frame = pd.DataFrame({"t": trajectory.times})
    for i in range(X.shape[1]):
        frame[f"x_{i}"] = X[:, i]
    for i in range(r.shape[1]):
        frame[f"r_{i}"] = r[:, i]
    frame["R"] = trajectory.scalar
    if monitors is not None:
        for name in MONITOR_NAMES:
            result = monitors.results.get(name)
            if result is None or result.series is None:
                frame[f"slack_{name}"] = np.nan
            else:
                frame[f"slack_{name}"] = result.series
    return frame


def _write_trajectory(
    out_dir: Path, trajectory: FlowTrajectory, monitors: MonitorReport | None
) -> None:
    samples_frame(trajectory, monitors).to_csv(out_dir / "samples.csv", index=False)
    with open(out_dir / "events.jsonl", "w") as fh:
        for event in trajectory.events:
            fh.write(json.dumps(_jsonable(event.to_dict())) + "\n")


def validate_summary(summary: dict) -> dict:
    """Reject a summary whose keys differ from the fixed schema."""
    keys = set(summary)
    if keys != SUMMARY_KEYS:
        raise HRFlowError(
            "summary does not match its schema",
            check="summary_schema",
            details={
                "missing": sorted(SUMMARY_KEYS - keys),
                "unexpected": sorted(keys - SUMMARY_KEYS),
            },
        )
    return summary


# =============================================================================
# SINGLE RUN
# =============================================================================


def _resolve_out_dir(manifest: RunManifest, out_dir: Path | None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    if manifest.out_dir:
        return Path(manifest.out_dir)
    return Path("out") / manifest.name


def execute_run(
    manifest: RunManifest,
    out_dir: Path | None = None,
    register: bool = True,
    registry_dir: Path | None = None,
) -> RunOutcome:
    """
    Run one manifest end to end and write its run directory.

    Never raises HRFlowError: failures end up in error.json and the
    outcome's exit code (the error's own code).
    """
    out_dir = _resolve_out_dir(manifest, out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "manifest.json", manifest.to_dict())
    record = RunRecord(
        space_key=manifest.space_label, seed=manifest.seed, out_dir=str(out_dir)
    )
    outcome = RunOutcome(exit_code=EXIT_OK, out_dir=out_dir, record=record)

    try:
        outcome.summary = _run_pipeline(manifest, out_dir, record, outcome.notes)
        outcome.exit_code = outcome.summary["exit_code"]
    except HRFlowError as exc:
        logger.error("run failed (%s): %s", exc.kind, exc.message)
        outcome.error = exc.to_dict()
        outcome.exit_code = exc.exit_code
        record.status = "error"
        record.summary = {"error": outcome.error}
        if exc.trajectory is not None:
            _write_trajectory(out_dir, exc.trajectory, None)
            if exc.trajectory.samples:
                record.t_final = float(exc.trajectory.times[-1])
        _write_json(out_dir / "error.json", outcome.error)

    record.exit_code = outcome.exit_code
    if register:
        save_run(record, get_db_path(registry_dir or out_dir))
    return outcome


def _run_pipeline(
    manifest: RunManifest, out_dir: Path, record: RunRecord, notes: list[str]
) -> dict:
    source = resolve_space(manifest)
    decomposition_seed = (
        manifest.decomposition_seed
        if manifest.decomposition_seed is not None
        else manifest.seed
    )
    space = build_space(source, seed=decomposition_seed, require_noncompact=True)
    tensor = bracket_coefficients(space)
    topology = classify_topology(space, tensor)
    record.space_hash = space.space_hash()
    record.regime = Regime(topology.regime)
    _write_json(
        out_dir / "decomposition.json", decomposition_report(space, tensor, topology)
    )

    rng = np.random.default_rng(manifest.seed)
    state0 = initial_state(manifest, space, rng)
    trajectory = integrate_flow(
        state0, space, tensor, manifest.flow, seed=manifest.seed
    )
    monitors = monitor_suite(trajectory, space)
    _write_trajectory(out_dir, trajectory, monitors)

    extinction = None
    profile = None
    if trajectory.is_extinct:
        if topology.contractible:
            notes.append("contractible space went extinct numerically")
            logger.warning("contractible space reached extinction; check tolerances")
        extinction = detect_extinction(trajectory, space, topology)
        try:
            profile = blowup_profile(
                trajectory, space, extinction.T, manifest.profile_threshold
            )
        except WrongRegime as exc:
            notes.append(f"blow-up profile skipped: {exc.message}")
    else:
        try:
            profile = blowdown_profile(trajectory, space, manifest.profile_threshold)
        except WrongRegime as exc:
            notes.append(f"blow-down profile skipped: {exc.message}")

    if profile is not None:
        _write_json(out_dir / "profile.json", profile.to_dict())
        (out_dir / "plot_profile.py").write_text(plot_script(profile))
    else:
        _write_json(out_dir / "profile.json", {"verdict": "n/a", "notes": notes})
    for note in notes:
        logger.info("%s", note)

    exit_code = EXIT_OK if monitors.passed else EXIT_MONITOR
    summary = {
        "name": manifest.name,
        "space": space.label or manifest.space_label,
        "space_hash": record.space_hash,
        "seed": manifest.seed,
        "decomposition_seed": decomposition_seed,
        "dims": space.dims.astype(int).tolist(),
        "regime": topology.regime,
        "outcome": "extinct" if trajectory.is_extinct else "immortal",
        "T": _json_float(extinction.T) if extinction else None,
        "T_interval": list(extinction.interval) if extinction else None,
        "c0": _json_float(monitors.c0),
        "lambda_over_d": _json_float(topology.lambda_over_d(space.dim_m)),
        "extinction": extinction.to_dict() if extinction else None,
        "monitors": monitors.to_dict(),
        "verdict": profile.verdict if profile is not None else "n/a",
        "profile_mode": profile.mode.value if profile is not None else None,
        "flow": flow_summary(trajectory, space),
        "status": "ok" if exit_code == EXIT_OK else "monitor_violation",
        "exit_code": exit_code,
    }
    _write_json(out_dir / "summary.json", validate_summary(summary))

    record.status = summary["status"]
    record.t_final = summary["flow"]["t_final"]
    record.extinction_time = extinction.T if extinction else None
    record.summary = _jsonable(
        {
            key: summary[key]
            for key in ("regime", "outcome", "T", "c0", "verdict", "exit_code")
        }
    )
    logger.info(
        "run %s finished: %s, verdict %s, exit %d",
        manifest.name,
        summary["outcome"],
        summary["verdict"],
        exit_code,
    )
    return summary


def run_command(manifest: RunManifest, out_dir: Path | None = None) -> int:
    """Run one manifest and return the process exit code."""
    return execute_run(manifest, out_dir).exit_code


# =============================================================================
# SWEEPS
# =============================================================================


def _sweep_one(manifest: RunManifest, out_dir: Path) -> RunOutcome:
    return execute_run(manifest, out_dir, register=False)


def sweep(
    manifest: RunManifest,
    seeds: list[int],
    batch: int = 1,
    out_dir: Path | None = None,
) -> pd.DataFrame:
    """
    Repeat a run over ``seeds``; each seed owns out/seed_<s>/.

    Runs execute in a process pool of ``batch`` workers. Rows are registered
    by the parent, and sweep.csv aggregates one row per seed.
    """
    if batch < 1:
        raise InputError("batch must be >= 1", check="batch")
    root = _resolve_out_dir(manifest, out_dir)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [
        (replace(manifest, seed=int(s)), root / f"seed_{int(s)}") for s in seeds
    ]

    if batch == 1:
        outcomes = [_sweep_one(m, d) for m, d in jobs]
    else:
        with ProcessPoolExecutor(max_workers=batch) as pool:
            futures = [pool.submit(_sweep_one, m, d) for m, d in jobs]
            outcomes = [future.result() for future in futures]

    db_path = get_db_path(root)
    rows = []
    for outcome in outcomes:
        save_run(outcome.record, db_path)
        summary = outcome.summary or {}
        rows.append(
            {
                "seed": outcome.record.seed,
                "status": outcome.record.status,
                "exit_code": outcome.exit_code,
                "regime": summary.get("regime"),
                "outcome": summary.get("outcome"),
                "T": summary.get("T"),
                "t_final": outcome.record.t_final,
                "c0": summary.get("c0"),
                "verdict": summary.get("verdict"),
                "error": (outcome.error or {}).get("error"),
                "out_dir": str(outcome.out_dir),
            }
        )
    frame = pd.DataFrame(rows)
    frame.to_csv(root / "sweep.csv", index=False)
    logger.info(
        "sweep of %d seeds done: %s",
        len(rows),
        frame["status"].value_counts().to_dict() if rows else {},
    )
    return frame
