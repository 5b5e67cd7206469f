"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 search failure.

Sample counts in files and on the command line are raw counts. ``--unit``
sets the unit the law is evaluated in (e.g. ``--unit 1M``); the shared
normaliser depends on it, so use the same unit when fitting and predicting.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .core import DomainError, EpochSchedule, UtilityParams, eval_loss
from .curation import BucketLadder, predict_report
from .fitting import ParamGrid, PoolObservations, SearchError, fit_joint, sweep_k_exponent
from .io import (
    InputError,
    atomic_write,
    parse_budget,
    parse_budgets,
    parse_floats,
    read_fit_result,
    read_manifest,
    read_observation_log,
    report_text,
    write_fit_result,
    write_observation_log,
    write_series,
)
from .mixture import (
    MixtureSpec,
    Pool,
    eval_loss_f3,
    eval_mixture_loss,
    mixture_floor,
)
from .simulate import SimConfig, generate_mixture_observations, generate_observations

DEFAULT_RECOMMEND_BUDGETS = "geom:32M:640M:25"
DEFAULT_K_GRID = "0:2:0.25"


def _unit(args) -> float:
    return parse_budget(args.unit)


def _split_ids(text: str) -> list[str]:
    ids = [t.strip() for t in text.split(",") if t.strip()]
    if not ids:
        raise InputError("empty pool id list")
    return ids


def _sizes(manifest_path) -> dict[str, float]:
    return {e.pool_id: e.size for e in read_manifest(manifest_path)}


def _mixture(fit, sizes, ids, unit, tau_exponent=1.0) -> MixtureSpec:
    pools = []
    for pid in ids:
        if pid not in fit.per_pool:
            raise InputError(f"pool {pid!r} is not in the fit result")
        if pid not in sizes:
            raise InputError(f"pool {pid!r} is not in the manifest")
        pools.append(Pool(pid, fit.params(pid), sizes[pid] / unit))
    return MixtureSpec(tuple(pools), tau_exponent=tau_exponent)


def _grid(args) -> ParamGrid:
    d_values = parse_floats(args.d_values)
    return ParamGrid.build((args.a_min, args.a_max), args.a_points,
                           (args.b_min, args.b_max), args.b_points,
                           (args.tau_min, args.tau_max), d_values)


# --- subcommands ------------------------------------------------------------


def cmd_fit(args) -> int:
    unit = _unit(args)
    sizes = _sizes(args.manifest)
    logs = read_observation_log(args.observations, accuracy=args.accuracy)
    unknown = sorted(set(logs) - set(sizes))
    if unknown:
        raise InputError(f"pools missing from manifest: {', '.join(unknown)}")
    obs = [PoolObservations.from_points(pid, sizes[pid] / unit,
                                        [(n / unit, e) for n, e in pts])
           for pid, pts in logs.items()]
    grid = _grid(args)
    fit = fit_joint(obs, grid, shared_tau=args.shared_tau, n_jobs=args.jobs)
    write_fit_result(args.out, fit)
    print(f"a = {fit.a:.9g}")
    for pid, p in fit.per_pool.items():
        print(f"{pid}: b = {p.b:.9g}  tau = {p.tau:.9g}  d = {p.d:.9g}  l2 = {p.l2_loss:.9g}")
    print(f"total l2 loss = {fit.total_l2_loss:.9g}")
    return 0


def cmd_extrapolate(args) -> int:
    unit = _unit(args)
    fit = read_fit_result(args.fit)
    if args.pool_id not in fit.per_pool:
        raise InputError(f"pool {args.pool_id!r} is not in the fit result")
    if args.pool_size is not None:
        size = parse_budget(args.pool_size)
    elif args.manifest is not None:
        sizes = _sizes(args.manifest)
        if args.pool_id not in sizes:
            raise InputError(f"pool {args.pool_id!r} is not in the manifest")
        size = sizes[args.pool_id]
    else:
        raise InputError("extrapolate needs --manifest or --pool-size")
    budgets = parse_budgets(args.budgets)
    params = fit.params(args.pool_id)
    rows = [(n, eval_loss(params, EpochSchedule(size / unit, n / unit))) for n in budgets]
    write_series(args.out, ("samples_seen", "predicted_error"), rows)
    print(f"wrote {len(rows)} predictions for {args.pool_id} to {args.out}")
    return 0


def cmd_mix(args) -> int:
    unit = _unit(args)
    fit = read_fit_result(args.fit)
    spec = _mixture(fit, _sizes(args.manifest), _split_ids(args.pools), unit)
    budgets = parse_budgets(args.budgets)
    evaluate = eval_mixture_loss if args.formulation == "utility" else eval_loss_f3
    d = mixture_floor(spec)
    rows = [(n, evaluate(spec, fit.a, d, n / unit)) for n in budgets]
    write_series(args.out, ("samples_seen", "predicted_error"), rows)
    print(f"wrote {len(rows)} {args.formulation} predictions for "
          f"{'+'.join(q.pool_id for q in spec.pools)} to {args.out}")
    return 0


def cmd_recommend(args) -> int:
    unit = _unit(args)
    fit = read_fit_result(args.fit)
    entries = read_manifest(args.manifest)
    missing = [e.pool_id for e in entries if e.pool_id not in fit.per_pool]
    if missing:
        raise InputError(f"manifest pools missing from fit result: {', '.join(missing)}")
    ladder = BucketLadder(tuple(Pool(e.pool_id, fit.params(e.pool_id), e.size / unit)
                                for e in entries), args.metric_name)
    budgets = parse_budgets(args.budgets)
    report = predict_report(ladder, [n / unit for n in budgets], a=fit.a)
    atomic_write(args.out, report_text(report, args.metric_name, samples_scale=unit))
    out = Path(args.out)
    series_out = args.series_out or out.with_name(out.stem + ".series.csv")
    rows = [(name, n, err) for name, errs in zip(report.strategies, report.per_strategy_error)
            for n, err in zip(budgets, errs)]
    write_series(series_out, ("strategy", "samples_seen", "predicted_error"), rows)
    for n, best in zip(budgets, report.best_strategy_per_budget):
        print(f"{n:.9g}: {best}")
    for c in report.crossovers:
        lo, hi = (v * unit for v in c.budget_interval)
        print(f"crossover {c.from_strategy} -> {c.to_strategy} in ({lo:.9g}, {hi:.9g}]")
    if not report.crossovers:
        print("no crossovers")
    return 0


def cmd_simulate(args) -> int:
    unit = _unit(args)
    budgets = parse_budgets(args.budgets)
    lib_budgets = [n / unit for n in budgets]
    if args.noise < 0:
        raise InputError("--noise must be nonnegative")
    inline = [args.a, args.b, args.tau, args.d]
    observations = []
    if args.fit is None:
        if any(v is None for v in inline) or args.pool_size is None:
            raise InputError("inline simulation needs --a --b --tau --d and --pool-size")
        try:
            params = UtilityParams(args.a, args.b, args.d, args.tau)
        except DomainError as exc:
            raise InputError(str(exc)) from None
        size = parse_budget(args.pool_size) / unit
        cfg = SimConfig(args.step_fraction, args.noise, args.seed)
        observations.append(generate_observations(params, size, lib_budgets, cfg,
                                                  pool_id=args.pool_id or "pool"))
    else:
        if any(v is not None for v in inline):
            raise InputError("give either inline parameters or --fit, not both")
        if args.manifest is None:
            raise InputError("--fit needs --manifest for pool sizes")
        fit = read_fit_result(args.fit)
        sizes = _sizes(args.manifest)
        if args.mix:
            spec = _mixture(fit, sizes, _split_ids(args.mix), unit, args.tau_exponent)
            cfg = SimConfig(args.step_fraction, args.noise, args.seed)
            merged_id = args.pool_id or "+".join(q.pool_id for q in spec.pools)
            observations.append(generate_mixture_observations(
                spec, fit.a, mixture_floor(spec), lib_budgets, cfg, pool_id=merged_id))
        else:
            ids = _split_ids(args.pool_id) if args.pool_id else list(fit.per_pool)
            for i, pid in enumerate(ids):
                spec = _mixture(fit, sizes, [pid], unit)
                cfg = SimConfig(args.step_fraction, args.noise, args.seed + i)
                q = spec.pools[0]
                observations.append(generate_observations(q.params, q.size, lib_budgets, cfg,
                                                          pool_id=pid))
    write_observation_log(args.out, observations, samples_scale=unit)
    print(f"wrote {sum(len(o) for o in observations)} observations to {args.out}")
    return 0


def cmd_sweep_k(args) -> int:
    unit = _unit(args)
    fit = read_fit_result(args.fit)
    sizes = _sizes(args.manifest)
    ids = _split_ids(args.pools) if args.pools else list(fit.per_pool)
    spec = _mixture(fit, sizes, ids, unit)
    logs = read_observation_log(args.merged, accuracy=args.accuracy)
    if len(logs) != 1:
        raise InputError(f"merged log must hold exactly one pool, found {sorted(logs)}")
    (pid, pts), = logs.items()
    merged = PoolObservations.from_points(pid, spec.combined_size,
                                          [(n / unit, e) for n, e in pts])
    k_grid = parse_floats(args.k_grid)
    if not k_grid or any(k < 0 for k in k_grid):
        raise InputError("k grid must be a non-empty list of nonnegative values")
    if spec.p == 1:
        print("warning: single-pool mixture; the loss does not depend on k", file=sys.stderr)
    rows = sweep_k_exponent(merged, spec, k_grid, a=fit.a)
    write_series(args.out, ("k", "loss"), rows)
    best_k, best_loss = min(rows, key=lambda r: (r[1], r[0]))
    print(f"argmin k = {best_k:g} (loss {best_loss:.9g})")
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="filterscale",
        description="Fit and extrapolate data-filtering scaling laws under repetition.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--unit", default="1",
                       help="sample unit the law is evaluated in, e.g. 1M (default 1)")

    p = sub.add_parser("fit", help="grid-search scaling constants from an observation log")
    p.add_argument("observations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--accuracy", action="store_true",
                   help="third column is accuracy; converted to error")
    p.add_argument("--shared-tau", action="store_true", help="one half-life for all pools")
    p.add_argument("--a-min", type=float, default=0.001)
    p.add_argument("--a-max", type=float, default=1.0)
    p.add_argument("--a-points", type=int, default=100)
    p.add_argument("--b-min", type=float, default=0.005, help="smallest |b|")
    p.add_argument("--b-max", type=float, default=0.5, help="largest |b|")
    p.add_argument("--b-points", type=int, default=100)
    p.add_argument("--tau-min", type=int, default=1)
    p.add_argument("--tau-max", type=int, default=50)
    p.add_argument("--d-values", default="0.01,0.02,0.05,0.10,0.2")
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("extrapolate", help="predict one pool's error at given budgets")
    p.add_argument("fit")
    p.add_argument("--pool-id", required=True)
    p.add_argument("--budgets", required=True, help="e.g. 32M,64M or geom:32M:640M:25")
    p.add_argument("--manifest")
    p.add_argument("--pool-size")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_extrapolate)

    p = sub.add_parser("mix", help="predict a mixture of fitted pools")
    p.add_argument("fit")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pools", required=True, help="comma-separated pool ids")
    p.add_argument("--budgets", required=True)
    p.add_argument("--formulation", choices=("utility", "effective-data"), default="utility",
                   help="decaying utility (default) or decaying utility and effective data")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("recommend", help="best prefix-union filtering strategy per budget")
    p.add_argument("fit")
    p.add_argument("--manifest", required=True)
    p.add_argument("--budgets", default=DEFAULT_RECOMMEND_BUDGETS)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--series-out", help="plot series CSV (default: <out stem>.series.csv)")
    p.add_argument("--metric-name", default="error")
    common(p)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("simulate", help="write a synthetic observation log")
    p.add_argument("--out", required=True)
    p.add_argument("--budgets", required=True)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--pool-size")
    p.add_argument("--pool-id")
    p.add_argument("--fit")
    p.add_argument("--manifest")
    p.add_argument("--mix", help="comma-separated pool ids: simulate their merged pool")
    p.add_argument("--tau-exponent", type=float, default=1.0,
                   help="half-life scaling exponent for --mix (0 disables rescaling)")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step-fraction", type=float, default=1e-3)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-k", help="loss of merged-pool predictions vs half-life exponent")
    p.add_argument("merged")
    p.add_argument("--fit", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pools", help="constituent pool ids (default: all in fit)")
    p.add_argument("--k-grid", default=DEFAULT_K_GRID, help="list or LO:HI:STEP")
    p.add_argument("--out", required=True)
    p.add_argument("--accuracy", action="store_true")
    common(p)
    p.set_defaults(func=cmd_sweep_k)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except SearchError as exc:
        print(f"error: search failed: {exc}", file=sys.stderr)
        return 3
    except (InputError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
