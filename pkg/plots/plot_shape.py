#!/usr/bin/env python3
"""Render the shape-study CSV as a figure.

Without a density dump the figure is a single chart of divergence against
component count, one series per scheme. With ``--density`` it becomes one
panel per component count, showing every scheme's approximated density of
y for that count with the true density overlaid. Dashed black is reserved
for the truth curve.
"""

from __future__ import annotations

import argparse
import math
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from csv_schema import SchemaError, column_floats, read_rows

KLD_COLUMNS = ("scheme", "components", "kld_x10")


def load_kld(path: str) -> dict[tuple[str, int], float]:
    """Map (scheme, components) to the reported divergence."""
    _, rows = read_rows(path, KLD_COLUMNS)
    scores = {}
    for row in rows:
        try:
            count = int(row["components"])
        except ValueError:
            raise SchemaError(
                f"{path}: column 'components' has non-integer "
                f"value {row['components']!r}"
            ) from None
        scores[(row["scheme"], count)] = float(row["kld_x10"])
    return scores


def split_density_columns(header: list[str], path: str) -> dict[int, list[str]]:
    """Group approximation columns of a density dump by component count.

    Columns are named ``<scheme>_<count>``; anything else (besides the
    ``y`` and ``truth`` axes) is rejected by name.
    """
    by_count: dict[int, list[str]] = {}
    for column in header:
        if column in ("y", "truth"):
            continue
        name, _, suffix = column.rpartition("_")
        if not name or not suffix.isdigit():
            raise SchemaError(
                f"{path}: unrecognized density column {column!r}; "
                "expected '<scheme>_<count>'"
            )
        by_count.setdefault(int(suffix), []).append(column)
    return by_count


def plot_kld_chart(scores: dict[tuple[str, int], float], out: str) -> None:
    schemes = sorted({scheme for scheme, _ in scores})
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for scheme in schemes:
        counts = sorted(c for s, c in scores if s == scheme)
        ax.plot(counts, [scores[(scheme, c)] for c in counts],
                marker="o", label=scheme)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("components")
    ax.set_ylabel("divergence from truth (x10)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def plot_density_panels(
    dump_path: str, scores: dict[tuple[str, int], float], out: str
) -> None:
    header, rows = read_rows(dump_path, ("y", "truth"))
    y = column_floats(rows, "y", dump_path)
    truth = column_floats(rows, "truth", dump_path)
    by_count = split_density_columns(header, dump_path)
    counts = sorted(by_count) or [None]

    # Trim the x-range to where the truth carries visible mass.
    peak = max(truth)
    support = [yi for yi, ti in zip(y, truth) if ti > 1e-4 * peak]
    lo, hi = (min(support), max(support)) if support else (min(y), max(y))

    ncols = min(len(counts), 4)
    nrows = math.ceil(len(counts) / ncols)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.4 * ncols, 2.8 * nrows),
        sharex=True, sharey=True, squeeze=False,
    )
    for ax in axes.flat[len(counts):]:
        ax.set_visible(False)
    for ax, count in zip(axes.flat, counts):
        if count is not None:
            for column in sorted(by_count[count]):
                scheme = column.rpartition("_")[0]
                kld = scores.get((scheme, count))
                label = scheme if kld is None else f"{scheme} ({kld:.3g})"
                ax.plot(y, column_floats(rows, column, dump_path), label=label)
            ax.set_title(f"{count} component{'s' if count != 1 else ''}")
        ax.plot(y, truth, color="black", linestyle="--", label="truth")
        ax.set_xlim(lo, hi)
        ax.legend(fontsize="x-small")
    for ax in axes[-1]:
        ax.set_xlabel("y")
    for row_axes in axes:
        row_axes[0].set_ylabel("density")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Plot shape-study results produced by the benchmark CLI."
    )
    parser.add_argument("csv", help="divergence table (scheme,components,kld_x10)")
    parser.add_argument("--density", help="optional density dump to draw panels from")
    parser.add_argument("--out", required=True, help="output PNG path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scores = load_kld(args.csv)
        if args.density:
            plot_density_panels(args.density, scores, args.out)
        else:
            plot_kld_chart(scores, args.out)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
