"""
Result Export Module
CSV tables, the run manifest and optional static plots
"""
import csv
import json
import logging
import platform
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from config import CSV_DIGITS

logger = logging.getLogger(__name__)


def format_float(value) -> str:
    """Float with CSV_DIGITS significant digits; ints and strings pass through"""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{CSV_DIGITS}g}"
    return str(value)


def write_csv(filename, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) for v in row])
    return path


def write_json(filename, payload: Dict) -> Path:
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    return path


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def library_versions() -> Dict[str, str]:
    import scipy
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


class ArtifactWriter:
    """Writes result files into one output directory and keeps the list for the manifest"""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: List[str] = []

    def _register(self, name: str) -> Path:
        if name not in self.outputs:
            self.outputs.append(name)
        return self.out_dir / name

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = write_csv(self._register(name), header, rows)
        logger.info("Wrote %s", path)
        return path

    def plot(self, name: str, x, series: Dict[str, np.ndarray], xlabel: str = "t",
             ylabel: str = "", logy: bool = False) -> Optional[Path]:
        path = save_plot(self.out_dir / name, x, series, xlabel, ylabel, logy)
        if path is not None:
            self._register(name)
        return path

    def manifest(self, config: Dict, seeds: Sequence[int], extra: Optional[Dict] = None) -> Dict:
        """Write manifest.json and return its payload"""
        payload = {
            "config": config,
            "seeds": list(seeds),
            "versions": library_versions(),
            "outputs": sorted(self.outputs),
        }
        if extra:
            payload.update(extra)
        write_json(self.out_dir / "manifest.json", payload)
        return payload

    def error(self, experiment: str, error: Exception) -> Path:
        payload = {
            "experiment": experiment,
            "error": type(error).__name__,
            "message": str(error),
        }
        line = getattr(error, "line", None)
        if line is not None:
            payload["line"] = line
            payload["column"] = getattr(error, "column", None)
        return write_json(self.out_dir / "error.json", payload)


def save_plot(filename, x, series: Dict[str, np.ndarray], xlabel: str = "t",
              ylabel: str = "", logy: bool = False) -> Optional[Path]:
    """Static PNG of one or more series against x; returns None when matplotlib is unavailable"""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib not installed, skipping plot %s", filename)
        return None

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in series.items():
        ax.plot(x, values, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    path = Path(filename)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
