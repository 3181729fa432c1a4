"""Render sweep figures from the experiment runner's CSV output.

This package deliberately knows nothing about the solver library: it
consumes the published CSV schema and nothing else, so the solver side
stays buildable and testable without any plotting dependency.
"""
import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = (
    "seed",
    "K",
    "gamma_db",
    "fronthaul_cap",
    "algorithm",
    "feasible",
    "power_w",
    "objective_f",
    "active_rrhs",
    "socp_solves",
    "wall_time_ms",
)

FIGURES = (
    "power_vs_sinr",
    "power_vs_fronthaul",
    "active_vs_sinr",
    "active_vs_fronthaul",
)

_AXIS_LABELS = {
    "sinr": "target SINR (dB)",
    "fronthaul": "fronthaul links per RRH",
    "power": "network power (W)",
    "active": "active RRHs",
}

# fixed salt + scrubbed date metadata keep the SVG byte-stable across runs
_RC = {
    "svg.hashsalt": "cranfigs",
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.framealpha": 0.9,
}


class SchemaError(ValueError):
    """The CSV does not match the experiment runner's schema."""


def load_rows(csv_path):
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or ()
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise SchemaError(f"missing column: {column}")
        return list(reader)


def _cap_value(label: str) -> float:
    # non-uniform budgets are serialized "1;3"; plot their per-RRH mean
    parts = [float(p) for p in label.split(";")]
    return sum(parts) / len(parts)


def figure_series(rows, figure: str):
    """Aggregate rows into {(algorithm, K): (x, mean, stderr)} arrays.

    Only feasible rows enter the averages; an x point with no feasible
    rows for a group is dropped from that group's line.
    """
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    y_kind, x_kind = figure.split("_vs_")
    y_field = "power_w" if y_kind == "power" else "active_rrhs"

    buckets: dict[tuple[str, int], dict[float, list[float]]] = {}
    for row in rows:
        if row["feasible"] != "1":
            continue
        if x_kind == "sinr":
            x = float(row["gamma_db"])
        else:
            x = _cap_value(row["fronthaul_cap"])
        key = (row["algorithm"], int(row["K"]))
        buckets.setdefault(key, {}).setdefault(x, []).append(float(row[y_field]))

    series = {}
    for key, by_x in buckets.items():
        xs = sorted(by_x)
        means = np.array([np.mean(by_x[x]) for x in xs])
        ses = np.array(
            [
                np.std(by_x[x], ddof=1) / np.sqrt(len(by_x[x])) if len(by_x[x]) > 1 else 0.0
                for x in xs
            ]
        )
        series[key] = (np.array(xs), means, ses)
    return series


def build_figure(series, figure: str):
    y_kind, x_kind = figure.split("_vs_")
    markers = ("o", "s", "^", "D", "v", "p")
    fig, ax = plt.subplots()
    for i, key in enumerate(sorted(series)):
        algorithm, k_users = key
        xs, means, ses = series[key]
        label = f"{algorithm} (K={k_users})"
        marker = markers[i % len(markers)]
        if len(xs) == 1:
            ax.errorbar(xs, means, yerr=ses, marker=marker, linestyle="none", label=label)
        else:
            ax.plot(xs, means, marker=marker, label=label)
            ax.fill_between(xs, means - ses, means + ses, alpha=0.25, linewidth=0)
    ax.set_xlabel(_AXIS_LABELS[x_kind])
    ax.set_ylabel(_AXIS_LABELS[y_kind])
    if series:
        ax.legend()
    fig.tight_layout()
    return fig


def render(csv_path, figure: str, out_path):
    """Aggregate the CSV and write a vector image; returns out_path."""
    rows = load_rows(csv_path)
    with plt.rc_context(_RC):
        fig = build_figure(figure_series(rows, figure), figure)
        try:
            fig.savefig(out_path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render a sweep figure from experiment CSV output."
    )
    parser.add_argument("--csv", required=True, help="sweep CSV path")
    parser.add_argument("--figure", required=True, choices=FIGURES)
    parser.add_argument("--out", required=True, help="output image path (SVG)")
    args = parser.parse_args(argv)
    try:
        render(args.csv, args.figure, args.out)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
