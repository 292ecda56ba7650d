#!/usr/bin/env python3
"""Render the tracking-benchmark CSV as two figures.

``<prefix>_rmse_runtime.png`` charts position error and per-run runtime
against the glint probability, one series per filter configuration.
``<prefix>_splits.png`` charts the average split count per adaptation
phase against the glint probability, one series per reduction threshold.
Rows with reduction 0 mark budget-free filters and are left out of the
splits chart.
"""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from csv_schema import SchemaError, read_rows

TRACK_COLUMNS = (
    "filter", "beta", "reduction", "rmse", "runtime_s", "avg_splits",
    "diverged_runs",
)


def series_label(filter_name: str, reduction: int) -> str:
    return filter_name if reduction == 0 else f"{filter_name} {reduction}"


def collect_series(
    rows: list[dict], value_column: str, skip_budget_free: bool = False
) -> dict[str, tuple[list[float], list[float]]]:
    """Group one value column into (beta, value) series per configuration."""
    points: dict[tuple[str, int], list[tuple[float, float]]] = {}
    for row in rows:
        try:
            reduction = int(row["reduction"])
            beta = float(row["beta"])
            value = float(row[value_column])
        except ValueError:
            raise SchemaError(
                f"non-numeric cell in column 'reduction', 'beta' or "
                f"{value_column!r}: {row!r}"
            ) from None
        if skip_budget_free and reduction == 0:
            continue
        points.setdefault((row["filter"], reduction), []).append((beta, value))
    series = {}
    for (name, reduction), pairs in sorted(points.items()):
        pairs.sort()
        series[series_label(name, reduction)] = (
            [b for b, _ in pairs], [v for _, v in pairs],
        )
    return series


def plot_rmse_runtime(rows: list[dict], out: str) -> None:
    rmse = collect_series(rows, "rmse")
    runtime = collect_series(rows, "runtime_s")
    fig, (ax_err, ax_time) = plt.subplots(
        2, 1, figsize=(6.4, 6.4), sharex=True
    )
    for label, (betas, values) in rmse.items():
        ax_err.plot(betas, values, marker="o", label=label)
    for label, (betas, values) in runtime.items():
        ax_time.plot(betas, values, marker="o", label=label)
    ax_err.set_ylabel("position rmse")
    ax_err.legend(fontsize="small")
    ax_time.set_ylabel("runtime per run [s]")
    ax_time.set_yscale("log")
    ax_time.set_xlabel("glint probability")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def plot_splits(rows: list[dict], out: str) -> None:
    series = collect_series(rows, "avg_splits", skip_budget_free=True)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (betas, values) in series.items():
        ax.plot(betas, values, marker="o", label=label)
    ax.set_xlabel("glint probability")
    ax.set_ylabel("splits per adaptation phase")
    if series:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Plot tracking-benchmark results produced by the CLI."
    )
    parser.add_argument("csv", help="tracking results table")
    parser.add_argument(
        "--out-prefix", required=True,
        help="prefix for the two output PNGs",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _, rows = read_rows(args.csv, TRACK_COLUMNS)
        plot_rmse_runtime(rows, f"{args.out_prefix}_rmse_runtime.png")
        plot_splits(rows, f"{args.out_prefix}_splits.png")
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
