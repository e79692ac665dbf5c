"""Streamlit dashboard over one report directory.

Run with ``streamlit run app.py``; point it elsewhere with FREQX_REPORT_DIR.
"""
import glob
import json
import os

import pandas as pd
import streamlit as st

from reports import MANIFEST_FILE, read_manifest

# --- CONFIGURATION ---
REPORT_DIR = os.environ.get("FREQX_REPORT_DIR", "reports")
CURVE_INDEX_COLUMNS = ("fraction", "epoch", "epsilon")


# --- UTILITY FUNCTIONS ---
def list_tables(report_dir: str) -> dict:
    """Table name -> CSV path, sorted by name."""
    paths = sorted(glob.glob(os.path.join(report_dir, "*.csv")))
    return {os.path.splitext(os.path.basename(p))[0]: p for p in paths}


def load_table(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError):
        return pd.DataFrame()


def chart_frame(df: pd.DataFrame):
    """Numeric columns indexed by the curve axis, or None when the table is not a curve."""
    index = next((c for c in CURVE_INDEX_COLUMNS if c in df.columns), None)
    if index is None:
        return None
    frame = df
    if "method" in df.columns and "mode" in df.columns:
        frame = df.pivot_table(index=index, columns=["method", "mode"], values="mean_prob")
        frame.columns = [f"{method} / {mode}" for method, mode in frame.columns]
        return frame
    numeric = frame.select_dtypes("number").drop(columns=[index, "repetitions"], errors="ignore")
    if numeric.empty:
        return None
    return numeric.set_index(frame[index])


# --- PAGE ---
def show_dashboard(report_dir: str = REPORT_DIR):
    st.title("FreqX Reports")
    st.caption(f"Report directory: {report_dir}")
    st.markdown("---")

    tables = list_tables(report_dir)
    if not tables:
        st.info("No report tables found. Run one of the experiments first, e.g. `python cli.py delins`.")
        return

    name = st.sidebar.selectbox("Table", list(tables))
    df = load_table(tables[name])
    st.subheader(name)
    if df.empty:
        st.info("This table is empty.")
    else:
        st.dataframe(df, use_container_width=True)
        frame = chart_frame(df)
        if frame is not None:
            st.line_chart(frame)

    manifest = read_manifest(report_dir)
    with st.sidebar.expander("Run manifest"):
        if manifest:
            st.write(f"Created: {manifest.get('created_at', '')}")
            st.write(f"Model hash: {manifest.get('model_hash') or 'none'}")
            st.code(json.dumps(manifest.get("config", {}), indent=2), language="json")
        else:
            st.write(f"No {MANIFEST_FILE} in this directory.")


show_dashboard()
