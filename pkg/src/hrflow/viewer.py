"""
Read-only helpers behind the Streamlit viewer.

Everything here turns run directories and registry rows into pandas
DataFrames; nothing imports streamlit, so the helpers are testable on
their own.
"""

import json
import math
from pathlib import Path

import pandas as pd

from .models import RunRecord


def load_samples(run_dir: Path) -> pd.DataFrame:
    """samples.csv of a run, or an empty frame when the run wrote none."""
    path = Path(run_dir) / "samples.csv"
    if not path.exists():
        return pd.DataFrame()
    return pd.read_csv(path)


def load_events(run_dir: Path) -> pd.DataFrame:
    """events.jsonl as a frame with t, kind, timestamp and payload columns."""
    path = Path(run_dir) / "events.jsonl"
    columns = ["t", "kind", "timestamp", "payload"]
    if not path.exists():
        return pd.DataFrame(columns=columns)
    rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    if not rows:
        return pd.DataFrame(columns=columns)
    return pd.DataFrame(rows, columns=columns)


def load_summary(run_dir: Path) -> dict:
    """summary.json, falling back to error.json for failed runs."""
    run_dir = Path(run_dir)
    for name in ("summary.json", "error.json"):
        path = run_dir / name
        if path.exists():
            return json.loads(path.read_text())
    return {}


def runs_frame(records: list[RunRecord]) -> pd.DataFrame:
    """One row per registered run, newest first."""
    columns = [
        "run_id",
        "created_at",
        "space_key",
        "seed",
        "regime",
        "status",
        "exit_code",
        "t_final",
        "extinction_time",
        "out_dir",
    ]
    rows = []
    for record in records:
        data = record.to_dict()
        rows.append({key: data[key] for key in columns})
    frame = pd.DataFrame(rows, columns=columns)
    if not frame.empty:
        frame = frame.sort_values("created_at", ascending=False, ignore_index=True)
    return frame


def diagnostics_frame(samples: pd.DataFrame) -> pd.DataFrame:
    """Monitor slacks in long form: t, monitor, slack (unevaluated rows dropped)."""
    slack_cols = [c for c in samples.columns if c.startswith("slack_")]
    if samples.empty or not slack_cols:
        return pd.DataFrame(columns=["t", "monitor", "slack"])
    long = samples.melt(
        id_vars=["t"], value_vars=slack_cols, var_name="monitor", value_name="slack"
    )
    long["monitor"] = long["monitor"].str.removeprefix("slack_")
    return long.dropna(subset=["slack"]).reset_index(drop=True)


def series_columns(samples: pd.DataFrame, prefix: str) -> list[str]:
    """x_* or r_* columns in module order."""
    cols = [c for c in samples.columns if c.startswith(f"{prefix}_")]
    return sorted(cols, key=lambda c: int(c.split("_", 1)[1]))


def format_time(t: float | str | None) -> str:
    """Format a flow time for display."""
    if t is None:
        return "—"
    try:
        value = float(t)
    except (TypeError, ValueError):
        return str(t)
    if math.isnan(value):
        return "—"
    if math.isinf(value):
        return "∞"
    return f"{value:.6g}"
