"""CSV tables, SVG line plots and run manifests."""
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from typing import Dict, List, Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import pytz  # noqa: E402

logger = logging.getLogger(__name__)

# --- CONFIGURATION ---
MANIFEST_FILE = "manifest.json"
FLOAT_FORMAT = "%.10g"
UTC = pytz.utc

# stable element ids so re-runs write identical SVG files
matplotlib.rcParams["svg.hashsalt"] = "freqx-report"


@dataclass
class LinePlot:
    frame: pd.DataFrame
    x: str
    ys: Sequence[str]
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""


def _ensure_dir(output_dir) -> str:
    output_dir = str(output_dir)
    os.makedirs(output_dir, exist_ok=True)
    if not os.access(output_dir, os.W_OK):
        raise PermissionError(f"output directory {output_dir!r} is not writable")
    return output_dir


def write_table(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_svg(plot: LinePlot, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for y in plot.ys:
        ax.plot(plot.frame[plot.x], plot.frame[y], marker="o", markersize=3, label=y)
    ax.set_title(plot.title)
    ax.set_xlabel(plot.xlabel or plot.x)
    ax.set_ylabel(plot.ylabel)
    if len(plot.ys) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(
    tables: Mapping[str, pd.DataFrame],
    output_dir,
    plots: Optional[Mapping[str, LinePlot]] = None,
) -> List[str]:
    """Writes ``<name>.csv`` per table and ``<name>.svg`` per plot; returns the written paths."""
    output_dir = _ensure_dir(output_dir)
    written = []
    for name in sorted(tables):
        path = os.path.join(output_dir, f"{name}.csv")
        write_table(tables[name], path)
        written.append(path)
    for name in sorted(plots or {}):
        path = os.path.join(output_dir, f"{name}.svg")
        write_svg(plots[name], path)
        written.append(path)
    logger.info("wrote %d report files to %s", len(written), output_dir)
    return written


def write_manifest(output_dir, config: dict, seeds: Dict[str, int], model_hash: str = "", files: Sequence[str] = ()) -> str:
    """Config echo, root and derived seeds, model hash and the file list of one run."""
    output_dir = _ensure_dir(output_dir)
    manifest = {
        "config": config,
        "seeds": seeds,
        "model_hash": model_hash,
        "files": sorted(os.path.basename(f) for f in files),
        "created_at": datetime.now(UTC).isoformat(),
    }
    path = os.path.join(output_dir, MANIFEST_FILE)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=4, sort_keys=True, default=str)
    return path


def read_manifest(output_dir) -> dict:
    path = os.path.join(str(output_dir), MANIFEST_FILE)
    try:
        with open(path, "r") as f:
            return json.load(f)
    except (FileNotFoundError, json.JSONDecodeError):
        return {}
