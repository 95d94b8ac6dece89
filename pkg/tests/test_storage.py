"""
Tests for the SQLite run registry.

Uses a temporary database for isolation.
"""

import tempfile
from datetime import datetime, timedelta
from pathlib import Path
from uuid import uuid4

import pytest

from hrflow.models import Regime, RunRecord
from hrflow.storage import (
    DB_NAME,
    count_runs,
    get_db_path,
    get_regime_counts,
    get_run,
    init_db,
    list_runs,
    reset_db,
    save_run,
)


@pytest.fixture
def temp_db():
    """Create a temporary database for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        db_path = Path(tmpdir) / "test_runs.db"
        init_db(db_path)
        yield db_path


def make_record(**overrides) -> RunRecord:
    fields = {
        "space_key": "sl3r_trivial",
        "space_hash": "ab" * 32,
        "seed": 0,
        "regime": Regime.EXTINCT,
        "status": "ok",
        "exit_code": 0,
        "t_final": 41.5,
        "extinction_time": 41.6,
        "out_dir": "out/sl3",
        "summary": {"verdict": "consistent", "c0": 1.0},
    }
    fields.update(overrides)
    return RunRecord(**fields)


class TestSaveAndGetRun:
    def test_save_and_get(self, temp_db):
        """Save a run and load it back."""
        record = make_record()
        saved = save_run(record, temp_db)
        assert saved.run_id == record.run_id

        loaded = get_run(record.run_id, temp_db)
        assert loaded is not None
        assert loaded.space_key == "sl3r_trivial"
        assert loaded.regime == Regime.EXTINCT
        assert loaded.extinction_time == 41.6
        assert loaded.summary == {"verdict": "consistent", "c0": 1.0}
        assert loaded.created_at == record.created_at

    def test_get_by_string_id(self, temp_db):
        record = save_run(make_record(), temp_db)
        assert get_run(str(record.run_id), temp_db) is not None

    def test_get_nonexistent(self, temp_db):
        """Loading an unknown run returns None."""
        assert get_run(uuid4(), temp_db) is None

    def test_error_run_without_regime(self, temp_db):
        record = make_record(
            regime=None, status="error", exit_code=2, t_final=None, summary={}
        )
        save_run(record, temp_db)
        loaded = get_run(record.run_id, temp_db)
        assert loaded.regime is None
        assert loaded.t_final is None
        assert loaded.summary == {}

    def test_save_replaces(self, temp_db):
        record = make_record()
        save_run(record, temp_db)
        record.status = "monitor_violation"
        record.exit_code = 5
        save_run(record, temp_db)
        assert count_runs(db_path=temp_db) == 1
        assert get_run(record.run_id, temp_db).exit_code == 5


class TestListRuns:
    def test_newest_first(self, temp_db):
        now = datetime.now()
        for hours in (3, 1, 2):
            save_run(make_record(created_at=now - timedelta(hours=hours)), temp_db)
        runs = list_runs(db_path=temp_db)
        stamps = [r.created_at for r in runs]
        assert stamps == sorted(stamps, reverse=True)

    def test_filters(self, temp_db):
        save_run(make_record(), temp_db)
        save_run(
            make_record(space_key="sl2r_trivial", regime=Regime.IMMORTAL), temp_db
        )
        save_run(make_record(status="monitor_violation", exit_code=5), temp_db)

        assert len(list_runs(space_key="sl2r_trivial", db_path=temp_db)) == 1
        assert len(list_runs(regime=Regime.EXTINCT, db_path=temp_db)) == 2
        assert len(list_runs(status="monitor_violation", db_path=temp_db)) == 1

    def test_limit_and_offset(self, temp_db):
        for seed in range(5):
            save_run(make_record(seed=seed), temp_db)
        assert len(list_runs(limit=2, db_path=temp_db)) == 2
        assert len(list_runs(limit=10, offset=3, db_path=temp_db)) == 2


class TestCounts:
    def test_count_runs(self, temp_db):
        save_run(make_record(), temp_db)
        save_run(make_record(status="error", exit_code=3, regime=None), temp_db)
        assert count_runs(db_path=temp_db) == 2
        assert count_runs("error", db_path=temp_db) == 1

    def test_regime_counts(self, temp_db):
        save_run(make_record(), temp_db)
        save_run(make_record(), temp_db)
        save_run(make_record(regime=Regime.IMMORTAL), temp_db)
        save_run(make_record(regime=None, status="error"), temp_db)
        assert get_regime_counts(temp_db) == {"extinct": 2, "immortal": 1, "n/a": 1}

    def test_reset(self, temp_db):
        save_run(make_record(), temp_db)
        reset_db(temp_db)
        assert count_runs(db_path=temp_db) == 0


class TestDbPath:
    def test_registry_lives_in_out_dir(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = get_db_path(Path(tmpdir) / "nested")
            assert path.name == DB_NAME
            assert path.parent.is_dir()
