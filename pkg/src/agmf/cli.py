"""Command line front end writing benchmark results as CSV plus a JSON sidecar.

Two subcommands: ``shape`` scores the split variants on the growth benchmark
and ``track`` runs the Monte-Carlo radar study. Both write UTF-8, LF-ended
CSV files whose bytes depend only on the flags and the seed, plus a
``<out>.meta.json`` sidecar recording the effective configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone

from .agmf import FilterConfig
from .errors import InvalidInputError
from .scenarios import (
    ShapeScenario,
    TrackScenario,
    run_shape,
    run_tracking,
)
from .statlin import SchemeConfig, SchemeKind

SCHEME_NAMES = {
    "ut": SchemeKind.UNSCENTED_TRANSFORM,
    "ge2": SchemeKind.GAUSSIAN_ESTIMATOR_N2,
    "ge4": SchemeKind.GAUSSIAN_ESTIMATOR_N4,
}

SHAPE_HEADER = ("scheme", "components", "kld_x10")
TRACK_HEADER = (
    "filter",
    "beta",
    "reduction",
    "rmse",
    "runtime_s",
    "avg_splits",
    "diverged_runs",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("agmf")
    except Exception:
        return "unknown"


def _write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_meta(out_path: str, config: dict, seed):
    meta = {
        "config": config,
        "seed": seed,
        "version": _package_version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(f"{out_path}.meta.json", "w", encoding="utf-8", newline="") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _scheme_config(args) -> SchemeConfig:
    return SchemeConfig(kind=SCHEME_NAMES[args.scheme], kappa=args.kappa)


def cmd_shape(args) -> int:
    scenario = ShapeScenario(gamma=args.gamma, scheme=_scheme_config(args))
    result = run_shape(scenario, tabulate_densities=args.density_dump is not None)
    _write_csv(args.out, SHAPE_HEADER, result.rows())
    if args.density_dump is not None:
        names = sorted(v.name for v in result.variants)
        by_name = {v.name: v for v in result.variants}
        header = ["y", "truth"] + [
            f"{name}_{count}" for name in names for count in scenario.schedule
        ]
        columns = [result.grid, result.truth] + [
            by_name[name].densities[count]
            for name in names
            for count in scenario.schedule
        ]
        _write_csv(args.density_dump, header, zip(*columns))
    _write_meta(
        args.out,
        {
            "command": "shape",
            "gamma": args.gamma,
            "scheme": args.scheme,
            "kappa": args.kappa,
            "schedule": list(scenario.schedule),
            "density_dump": args.density_dump,
        },
        None,
    )
    return 0


def cmd_track(args) -> int:
    filters = [name.strip() for name in args.filters.split(",") if name.strip()]
    if not filters:
        raise InvalidInputError("--filters must name at least one filter")
    scheme = _scheme_config(args)
    mixture_filters = [f for f in filters if f in ("agmf", "mwe")]
    shared_filters = [f for f in filters if f not in ("agmf", "mwe")]

    rows = []
    for beta in args.beta:
        scenario = TrackScenario(
            beta=beta,
            runs=args.runs,
            steps=args.steps,
            seed=args.seed,
            pf_particles=args.pf_particles,
        )
        for reduction in args.reduction:
            if not mixture_filters:
                break
            config = FilterConfig(
                gamma=args.gamma,
                eps_max=args.eps_max,
                l_max=args.l_max,
                d_max=args.d_max,
                reduce_pred=reduction,
                reduce_filt=reduction,
                scheme=scheme,
            )
            for stats in run_tracking(scenario, mixture_filters, config):
                rows.append(
                    (
                        stats.name,
                        beta,
                        reduction,
                        stats.rmse,
                        stats.runtime_s,
                        stats.avg_splits,
                        stats.diverged_runs,
                    )
                )
        if shared_filters:
            # Component budgets do not apply to ukf or pf; reduction 0
            # marks the rows as budget-free.
            config = FilterConfig(
                gamma=args.gamma,
                eps_max=args.eps_max,
                l_max=args.l_max,
                d_max=args.d_max,
                scheme=scheme,
            )
            for stats in run_tracking(scenario, shared_filters, config):
                rows.append(
                    (
                        stats.name,
                        beta,
                        0,
                        stats.rmse,
                        stats.runtime_s,
                        stats.avg_splits,
                        stats.diverged_runs,
                    )
                )
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    _write_csv(args.out, TRACK_HEADER, rows)
    _write_meta(
        args.out,
        {
            "command": "track",
            "beta": list(args.beta),
            "runs": args.runs,
            "steps": args.steps,
            "filters": filters,
            "reduction": list(args.reduction),
            "eps_max": args.eps_max,
            "d_max": args.d_max,
            "l_max": args.l_max,
            "gamma": args.gamma,
            "scheme": args.scheme,
            "kappa": args.kappa,
            "pf_particles": args.pf_particles,
        },
        args.seed,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agmf",
        description="Adaptive Gaussian mixture filter benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    shape = sub.add_parser(
        "shape",
        help="score split variants on the growth benchmark",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    shape.add_argument("--out", required=True, help="output CSV path")
    shape.add_argument(
        "--density-dump",
        default=None,
        help="also tabulate every approximated density to this CSV",
    )
    shape.add_argument("--gamma", type=float, default=0.5, help="selection exponent")
    shape.add_argument(
        "--scheme", choices=sorted(SCHEME_NAMES), default="ge4",
        help="regression point scheme",
    )
    shape.add_argument("--kappa", type=float, default=0.5, help="ut spread parameter")
    shape.set_defaults(run=cmd_shape)

    track = sub.add_parser(
        "track",
        help="run the Monte-Carlo radar tracking study",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    track.add_argument("--out", required=True, help="output CSV path")
    track.add_argument(
        "--beta", type=float, nargs="+", default=[0.4],
        help="glint weight(s); one CSV row group per value",
    )
    track.add_argument("--runs", type=int, default=50, help="Monte-Carlo runs")
    track.add_argument("--steps", type=int, default=100, help="time steps per run")
    track.add_argument("--seed", type=int, default=0, help="scenario seed")
    track.add_argument(
        "--filters", default="agmf,mwe,ukf,pf",
        help="comma-separated subset of agmf,mwe,ukf,pf",
    )
    track.add_argument(
        "--reduction", type=int, nargs="+", choices=(2, 8, 32), default=[8],
        help="component budget(s) after each phase, applied to agmf and mwe",
    )
    track.add_argument("--eps-max", type=float, default=0.05, help="error threshold")
    track.add_argument("--d-max", type=float, default=1.0, help="deviation threshold")
    track.add_argument("--l-max", type=int, default=128, help="component cap")
    track.add_argument("--gamma", type=float, default=0.5, help="selection exponent")
    track.add_argument(
        "--scheme", choices=sorted(SCHEME_NAMES), default="ut",
        help="regression point scheme",
    )
    track.add_argument("--kappa", type=float, default=0.5, help="ut spread parameter")
    track.add_argument(
        "--pf-particles", type=int, default=10_000, help="particle count for pf",
    )
    track.set_defaults(run=cmd_track)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except InvalidInputError as exc:
        print(f"agmf: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"agmf: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
