"""
SQLite run registry for hrflow.

Every `run` (and every seed of a `sweep`) adds one row to the ``runs`` table
of ``runs.db`` inside the output directory. The registry is an index over
the run directories; the directories themselves hold the full artifacts.
"""

import json
import logging
import sqlite3
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from uuid import UUID

from .models import Regime, RunRecord

logger = logging.getLogger(__name__)

DB_NAME = "runs.db"
DEFAULT_DB_PATH = Path("out") / DB_NAME


def get_db_path(out_dir: Path | None = None) -> Path:
    """Registry path inside ``out_dir`` (default ./out), creating the directory."""
    db_path = Path(out_dir) / DB_NAME if out_dir is not None else DEFAULT_DB_PATH
    db_path.parent.mkdir(parents=True, exist_ok=True)
    return db_path


@contextmanager
def get_connection(db_path: Path | None = None):
    """Context manager for database connections."""
    path = db_path or get_db_path()
    conn = sqlite3.connect(str(path))
    conn.row_factory = sqlite3.Row
    try:
        yield conn
        conn.commit()
    finally:
        conn.close()


# =============================================================================
# DATABASE INITIALIZATION
# =============================================================================


def init_db(db_path: Path | None = None) -> None:
    """Create the runs table if it does not exist."""
    with get_connection(db_path) as conn:
        conn.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id TEXT PRIMARY KEY,
                created_at TEXT NOT NULL,
                space_key TEXT NOT NULL,
                space_hash TEXT,
                seed INTEGER NOT NULL,
                regime TEXT,
                status TEXT NOT NULL,
                exit_code INTEGER NOT NULL,
                t_final REAL,
                extinction_time REAL,
                out_dir TEXT,
                summary_json TEXT
            )
        """)
        conn.execute("CREATE INDEX IF NOT EXISTS idx_runs_space ON runs(space_key)")
        conn.execute("CREATE INDEX IF NOT EXISTS idx_runs_regime ON runs(regime)")


def reset_db(db_path: Path | None = None) -> None:
    """Drop and recreate the registry. WARNING: Destroys all rows."""
    path = db_path or get_db_path()
    if path.exists():
        path.unlink()
    init_db(path)


# =============================================================================
# RUN OPERATIONS
# =============================================================================


def _row_to_run(row: sqlite3.Row) -> RunRecord:
    """Convert a database row to a RunRecord."""
    return RunRecord(
        run_id=UUID(row["run_id"]),
        created_at=datetime.fromisoformat(row["created_at"]),
        space_key=row["space_key"],
        space_hash=row["space_hash"],
        seed=row["seed"],
        regime=Regime(row["regime"]) if row["regime"] else None,
        status=row["status"],
        exit_code=row["exit_code"],
        t_final=row["t_final"],
        extinction_time=row["extinction_time"],
        out_dir=row["out_dir"],
        summary=json.loads(row["summary_json"]) if row["summary_json"] else {},
    )


def save_run(record: RunRecord, db_path: Path | None = None) -> RunRecord:
    """Save a run (insert or replace)."""
    init_db(db_path)
    with get_connection(db_path) as conn:
        conn.execute(
            """
            INSERT OR REPLACE INTO runs (
                run_id, created_at, space_key, space_hash, seed, regime,
                status, exit_code, t_final, extinction_time, out_dir, summary_json
            ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """,
            (
                str(record.run_id),
                record.created_at.isoformat(),
                record.space_key,
                record.space_hash,
                record.seed,
                record.regime.value if record.regime else None,
                record.status,
                record.exit_code,
                record.t_final,
                record.extinction_time,
                record.out_dir,
                json.dumps(record.summary),
            ),
        )
    logger.debug("registered run %s (%s)", record.run_id, record.status)
    return record


def get_run(run_id: UUID | str, db_path: Path | None = None) -> RunRecord | None:
    """Get a run by ID."""
    with get_connection(db_path) as conn:
        row = conn.execute(
            "SELECT * FROM runs WHERE run_id = ?", (str(run_id),)
        ).fetchone()
        if row:
            return _row_to_run(row)
        return None


def list_runs(
    space_key: str | None = None,
    regime: Regime | None = None,
    status: str | None = None,
    limit: int = 100,
    offset: int = 0,
    db_path: Path | None = None,
) -> list[RunRecord]:
    """List runs with optional filtering, newest first."""
    with get_connection(db_path) as conn:
        query = "SELECT * FROM runs WHERE 1=1"
        params: list = []

        if space_key:
            query += " AND space_key = ?"
            params.append(space_key)

        if regime:
            query += " AND regime = ?"
            params.append(regime.value)

        if status:
            query += " AND status = ?"
            params.append(status)

        query += " ORDER BY created_at DESC LIMIT ? OFFSET ?"
        params.extend([limit, offset])

        rows = conn.execute(query, params).fetchall()
        return [_row_to_run(row) for row in rows]


def count_runs(status: str | None = None, db_path: Path | None = None) -> int:
    """Count runs, optionally by status."""
    with get_connection(db_path) as conn:
        if status:
            row = conn.execute(
                "SELECT COUNT(*) FROM runs WHERE status = ?", (status,)
            ).fetchone()
        else:
            row = conn.execute("SELECT COUNT(*) FROM runs").fetchone()
        return row[0] if row else 0


def get_regime_counts(db_path: Path | None = None) -> dict[str, int]:
    """Run counts per regime; runs that failed before classification count as n/a."""
    with get_connection(db_path) as conn:
        rows = conn.execute(
            """
            SELECT COALESCE(regime, 'n/a') AS regime, COUNT(*) AS count
            FROM runs
            GROUP BY regime
            """
        ).fetchall()
        return {row["regime"]: row["count"] for row in rows}
