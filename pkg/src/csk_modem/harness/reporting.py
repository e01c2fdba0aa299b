"""Results CSV and SVG chart rendering.

The CSV is the canonical sweep output and must be byte-identical across
reruns with the same config and seeds, so floats use shortest-roundtrip
formatting and the wall_ms column is written as 0 (measured wall times stay
on the in-memory TrialResult objects).
"""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ..errors import EmptyResults

CSV_HEADER = (
    "trial_id,decoder,order,baud,distance_m,lux,n_cells,n_anchors,seed,ber,sync_ok,wall_ms"
)

# Log-scale BER floor for zero-error points.
BER_PLOT_FLOOR = 1e-5


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def result_row(trial_id: int, r) -> list:
    c = r.config
    return [
        trial_id, r.decoder, c["order"], c["baud"], c["distance_m"], c["lux"],
        c["n_cells"], c["n_anchors"], r.seed, r.ber, r.sync_ok, 0,
    ]


def write_results_csv(results, path):
    if not results:
        raise EmptyResults("no trial results to write")
    with open(path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for i, r in enumerate(results):
            f.write(",".join(_fmt(v) for v in result_row(i, r)) + "\n")


def load_results_csv(path) -> list:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = []
        for row in reader:
            for k in ("order", "n_cells", "n_anchors", "seed", "trial_id"):
                row[k] = int(row[k])
            for k in ("baud", "distance_m", "lux", "ber", "wall_ms"):
                row[k] = float(row[k])
            row["sync_ok"] = bool(int(row["sync_ok"]))
            rows.append(row)
        return rows


def aggregate(rows, x_key: str):
    """{decoder: (xs, mean BER, std BER)} from CSV rows or result dicts."""
    by = {}
    for row in rows:
        by.setdefault(row["decoder"], {}).setdefault(row[x_key], []).append(row["ber"])
    out = {}
    for decoder, groups in sorted(by.items()):
        xs = sorted(groups)
        means = np.array([np.mean(groups[x]) for x in xs])
        stds = np.array([np.std(groups[x], ddof=1) if len(groups[x]) > 1 else 0.0 for x in xs])
        out[decoder] = (np.array(xs), means, stds)
    return out


def plot_ber(rows, x_key: str, out_path, x_label: str | None = None, title: str = ""):
    """Log-scale BER chart with +-1 std error bars; zeros clamp to the floor."""
    if not rows:
        raise EmptyResults("no rows to plot")
    agg = aggregate(rows, x_key)
    fig, ax = plt.subplots(figsize=(6, 4))
    clamped = False
    for decoder, (xs, means, stds) in agg.items():
        clamped |= bool(np.any(means < BER_PLOT_FLOOR))
        y = np.maximum(means, BER_PLOT_FLOOR)
        lo = np.maximum(means - stds, BER_PLOT_FLOOR)
        hi = np.maximum(means + stds, BER_PLOT_FLOOR)
        ax.errorbar(xs, y, yerr=[y - lo, hi - y], marker="o", capsize=3, label=decoder)
    ax.set_yscale("log")
    ax.set_ylim(bottom=BER_PLOT_FLOOR / 2)
    ax.set_xlabel(x_label or x_key)
    ax.set_ylabel("BER")
    if title:
        ax.set_title(title)
    if clamped:
        ax.annotate(
            f"zero-BER points clamped to {BER_PLOT_FLOOR:g}",
            xy=(0.02, 0.02), xycoords="axes fraction", fontsize=8, color="gray",
        )
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
