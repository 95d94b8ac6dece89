"""
hrflow viewer - read-only browser over run directories and the run registry.
Built with Streamlit.
"""

import sys
from pathlib import Path

import streamlit as st

# Add src/ to path for engine imports
sys.path.insert(0, str(Path(__file__).parent / "src"))

from hrflow.main import catalog_frame
from hrflow.storage import DB_NAME, get_regime_counts, list_runs
from hrflow.viewer import (
    diagnostics_frame,
    format_time,
    load_events,
    load_samples,
    load_summary,
    runs_frame,
    series_columns,
)

# --- PAGE CONFIG ---
st.set_page_config(
    page_title="hrflow",
    layout="wide",
    initial_sidebar_state="expanded",
)

PAGES = ["Runs", "Run detail", "Catalog"]


def get_current_page() -> str:
    """Get the current page, defaulting to Runs."""
    if "current_page" not in st.session_state:
        st.session_state.current_page = "Runs"
    return st.session_state.current_page


def run_directories(out_dir: Path) -> list[Path]:
    """Directories under out_dir that hold a manifest.json, newest first."""
    if not out_dir.exists():
        return []
    dirs = {p.parent for p in out_dir.rglob("manifest.json")}
    return sorted(dirs, key=lambda p: p.stat().st_mtime, reverse=True)


# =============================================================================
# PAGES
# =============================================================================


def render_runs(out_dir: Path) -> None:
    st.title("Runs")
    db_path = out_dir / DB_NAME
    if not db_path.exists():
        st.info(f"No registry at {db_path}. Run `hrflow run --out {out_dir}` first.")
        return

    counts = get_regime_counts(db_path)
    cols = st.columns(max(len(counts), 1))
    for col, (regime, count) in zip(cols, sorted(counts.items()), strict=False):
        col.metric(regime, count)

    status = st.selectbox("Status", ["all", "ok", "monitor_violation", "error"])
    records = list_runs(
        status=None if status == "all" else status, limit=500, db_path=db_path
    )
    frame = runs_frame(records)
    if frame.empty:
        st.write("No runs match.")
        return
    frame["t_final"] = frame["t_final"].map(format_time)
    frame["extinction_time"] = frame["extinction_time"].map(format_time)
    st.dataframe(frame, use_container_width=True, hide_index=True)


def render_run_detail(out_dir: Path) -> None:
    st.title("Run detail")
    dirs = run_directories(out_dir)
    if not dirs:
        st.info(f"No run directories under {out_dir}.")
        return
    run_dir = st.selectbox(
        "Run", dirs, format_func=lambda p: str(p.relative_to(out_dir))
    )
    summary = load_summary(run_dir)
    if "error" in summary:
        st.error(f"{summary['error']}: {summary.get('message')}")
    else:
        c1, c2, c3, c4 = st.columns(4)
        c1.metric("Regime", str(summary.get("regime")))
        c2.metric("Outcome", str(summary.get("outcome")))
        c3.metric("T", format_time(summary.get("T")))
        c4.metric("Verdict", str(summary.get("verdict")))

    samples = load_samples(run_dir)
    if samples.empty:
        st.write("No samples recorded.")
    else:
        st.subheader("Metric eigenvalues")
        st.line_chart(samples.set_index("t")[series_columns(samples, "x")])
        st.subheader("Ricci eigenvalues")
        st.line_chart(samples.set_index("t")[series_columns(samples, "r")])
        st.subheader("Scalar curvature")
        st.line_chart(samples.set_index("t")["R"])

        diagnostics = diagnostics_frame(samples)
        if not diagnostics.empty:
            st.subheader("Monitor slacks")
            wide = diagnostics.pivot_table(index="t", columns="monitor", values="slack")
            st.line_chart(wide)

    events = load_events(run_dir)
    st.subheader("Events")
    st.dataframe(events, use_container_width=True, hide_index=True)
    with st.expander("summary.json"):
        st.json(summary)


def render_catalog() -> None:
    st.title("Catalog")
    st.dataframe(catalog_frame(), use_container_width=True, hide_index=True)


# =============================================================================
# MAIN
# =============================================================================


def main() -> None:
    with st.sidebar:
        st.markdown("### hrflow")
        out_dir = Path(st.text_input("Output directory", value="out"))
        page = st.radio("Page", PAGES, index=PAGES.index(get_current_page()))
        st.session_state.current_page = page

    if page == "Runs":
        render_runs(out_dir)
    elif page == "Run detail":
        render_run_detail(out_dir)
    else:
        render_catalog()


main()
