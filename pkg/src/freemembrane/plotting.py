"""Quick-look figures for the CLI result tables (one figure per CSV)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import IoFailure  # noqa: E402
from .tables import ResultTable  # noqa: E402

# subcommand -> (x column, [(y column, scale, label)], x scale, x label)
_LAYOUT = {
    "cv-curve": ("voltage_V", [("peak_displacement_m", 1e6, "peak"), ("max_upward_m", 1e6, "max upward")],
                 1.0, "voltage (V)", "displacement (um)"),
    "ratio-sweep": ("ratio", [("v_pullin_V", 1.0, "pull-in voltage")], 1.0, "S/L", "voltage (V)"),
    "unstick": ("v_charge_V", [("unstick_V", 1.0, "unstick voltage")], 1.0, "charge offset (V)", "voltage (V)"),
    "rf": ("freq_Hz", [("s21_up_dB", 1.0, "S21 up"), ("s21_down_dB", 1.0, "S21 down"),
                       ("s11_up_dB", 1.0, "S11 up")], 1e-9, "frequency (GHz)", "dB"),
}


def _bars(ax, table: ResultTable, label_col: str, value_col: str, ylabel: str):
    labels = [str(v) for v in table.column(label_col)]
    vals = np.asarray(table.column(value_col), dtype=float)
    ax.bar(range(len(vals)), vals)
    ax.set_xticks(range(len(vals)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_yscale("log")
    ax.set_ylabel(ylabel)


def plot_table(subcommand: str, table: ResultTable, path) -> Path:
    """Render ``table`` to ``path`` (PNG). Single-row tables become bar charts."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    try:
        if subcommand in _LAYOUT:
            xc, ys, xs, xl, yl = _LAYOUT[subcommand]
            x = np.asarray(table.column(xc), dtype=float) * xs
            for col, scale, lab in ys:
                ax.plot(x, np.asarray(table.column(col), dtype=float) * scale, marker=".", label=lab)
            ax.set_xlabel(xl)
            ax.set_ylabel(yl)
            ax.grid(True, lw=0.3)
            if len(ys) > 1:
                ax.legend()
        elif subcommand == "table1":
            _bars(ax, table, "archetype", "min_pressure_Pa", "pressure to contact (Pa)")
        else:
            # one-row summaries: show the numeric cells as labelled bars
            cols = [c for c, v in zip(table.columns, table.rows[0]) if isinstance(v, float)]
            row = ResultTable(["name", "value"], [[c, abs(table.column(c)[0])] for c in cols])
            _bars(ax, row, "name", "value", "|value| (SI)")
        ax.set_title(subcommand)
        fig.tight_layout()
        try:
            fig.savefig(path, dpi=120)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}", path=str(path)) from exc
    finally:
        plt.close(fig)
    return path
