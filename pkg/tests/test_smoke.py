"""Smoke tests to verify basic functionality."""

from hrflow import __version__
from hrflow.main import main


def test_version() -> None:
    """Verify version is defined."""
    assert __version__ == "0.1.0"


def test_main_catalog(capsys) -> None:
    """Verify the catalog command executes without error."""
    assert main(["catalog"]) == 0
    captured = capsys.readouterr()
    assert "sl2r_trivial" in captured.out
