"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 numerical failure (rank or
conditioning), 64 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from .dynamics import (SimulationGrid, futures_paths, optimal_strategy_grid, simulate_factors,
                       simulate_wealth)
from .files import csv_text, json_text, load_params, parse_contracts, write_atomic, write_manifest
from .model import InvalidParameters, assemble_matrices
from .strategy import (InvalidPortfolio, NumericalError, PortfolioSpec, certainty_equivalent,
                       strategy_point)
from .term_structure import FactorState, curve

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, *, portfolio=False, sim=False):
    p.add_argument("--params", default="table1",
                   help="parameter JSON file or built-in name (default: table1)")
    p.add_argument("--out", type=Path, help="output directory; a manifest is written beside outputs")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if portfolio:
        p.add_argument("--contracts", default="T1,T2,T3",
                       help="comma list of T1/T2/T3 or maturities in years")
        p.add_argument("--gamma", type=float, default=1.0)
        p.add_argument("--horizon", type=float, help="trading horizon in years (default: earliest maturity)")
        p.add_argument("--w0", type=float, default=0.0)
    if sim:
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--paths", type=int, default=1)
        p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mctou", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _common(sub.add_parser("validate", help="check a parameter file"))

    p = sub.add_parser("price", help="futures prices at a factor state")
    _common(p)
    p.add_argument("--contracts", default="T1,T2,T3")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--x", help="factor state x1,x2,x3 (default: x0 from params)")

    p = sub.add_parser("curve", help="loading vectors, intercepts and prices on a daily grid")
    _common(p)
    p.add_argument("--contracts", default="T1,T2,T3")
    p.add_argument("--horizon", type=float, help="grid end in years (default: latest maturity)")
    p.add_argument("--x", help="factor state x1,x2,x3 (default: x0 from params)")

    _common(sub.add_parser("strategy", help="optimal positions on a daily grid"), portfolio=True)
    _common(sub.add_parser("ce", help="certainty equivalent"), portfolio=True)
    _common(sub.add_parser("ce-table", help="certainty-equivalent grid against published values"))

    p = sub.add_parser("simulate", help="factor, futures, strategy and wealth paths")
    _common(p, portfolio=True, sim=True)
    p.add_argument("--measure", choices=("P", "Q"), default="P")

    p = sub.add_parser("verify-mc", help="Monte Carlo check of the closed-form value function")
    _common(p, portfolio=True, sim=True)
    p.set_defaults(paths=50_000)

    p = sub.add_parser("figures", help="plot-ready datasets for figures 1-4")
    _common(p, sim=True)
    p.add_argument("--which", default="fig1,fig2,fig3,fig4")
    return parser


def _portfolio(args) -> PortfolioSpec:
    contracts = parse_contracts(args.contracts)
    horizon = args.horizon if args.horizon is not None else min(c.maturity for c in contracts)
    return PortfolioSpec(contracts, args.gamma, horizon, args.w0)


def _state(args, params) -> FactorState:
    if args.x is None:
        x = params.x0
    else:
        x = tuple(float(v) for v in args.x.split(","))
    return FactorState(tuple(x), getattr(args, "t", 0.0))


def _emit(args, outputs: dict[str, str], params, config: dict, argv) -> None:
    """Write outputs to ``--out`` (plus manifest) or print them."""
    if args.out is None:
        for text in outputs.values():
            sys.stdout.write(text)
        return
    for name, text in outputs.items():
        write_atomic(args.out / name, text)
    write_manifest(args.out, command=args.command, argv=argv, config=config,
                   params=params, outputs=outputs)
    for name in outputs:
        print(args.out / name)


def _table(args, name: str, rows) -> dict[str, str]:
    if args.format == "json":
        header, body = rows[0], rows[1:]
        return {f"{name}.json": json_text([dict(zip(header, r)) for r in body])}
    return {f"{name}.csv": csv_text(rows)}


def _num(v: float) -> str:
    return repr(float(v))


def run(args, argv) -> int:
    params = load_params(args.params)
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    cmd = args.command

    if cmd == "validate":
        print(f"valid: {args.params}")
        if args.out is not None:
            _emit(args, {"params.json": json_text(params.to_dict())}, params, config, argv)
        return EXIT_OK

    m = assemble_matrices(params)

    if cmd == "price":
        state = _state(args, params)
        pts = curve(m, state, parse_contracts(args.contracts))
        rows = [["contract", "maturity", "t", "price"]]
        rows += [[p.label, _num(p.maturity), _num(p.t), _num(p.price)] for p in pts]
        _emit(args, _table(args, "price", rows), params, config, argv)

    elif cmd == "curve":
        contracts = parse_contracts(args.contracts)
        end = args.horizon if args.horizon is not None else max(c.maturity for c in contracts)
        times = SimulationGrid.daily(end).times
        x = _state(args, params).x
        rows = [["t", "maturity", "a1", "a2", "a3", "beta", "price"]]
        for t in times:
            live = [c for c in contracts if c.maturity >= t]
            if not live:
                continue
            for p in curve(m, FactorState(x, float(t)), live):
                rows.append([_num(p.t), _num(p.maturity), *map(_num, p.a), _num(p.beta), _num(p.price)])
        _emit(args, _table(args, "curve", rows), params, config, argv)

    elif cmd == "strategy":
        spec = _portfolio(args)
        M = len(spec.contracts)
        rows = [["t"] + [f"pi_{k + 1}" for k in range(M)] + ["lambda_sq", "cond_number"]]
        for t in SimulationGrid.daily(spec.horizon).times:
            sp = strategy_point(m, spec, float(t))
            rows.append([_num(t), *map(_num, sp.pi), _num(sp.lambda_sq), _num(sp.cond_number)])
        _emit(args, _table(args, "strategy", rows), params, config, argv)

    elif cmd == "ce":
        spec = _portfolio(args)
        ce = certainty_equivalent(m, spec, 0.0, spec.w0)
        scaled = (ce - spec.w0) / ex.CE_SCALE
        if args.format == "json":
            text = json_text({"certainty_equivalent": ce, "excess_x1e-4": scaled,
                              "w0": spec.w0, "gamma": spec.gamma, "horizon": spec.horizon})
        else:
            text = (f"certainty_equivalent={_num(ce)}\n"
                    f"excess_x1e-4={scaled:.3g}\n")
        _emit(args, {f"ce.{args.format if args.format == 'json' else 'txt'}": text},
              params, config, argv)

    elif cmd == "ce-table":
        grid = ex.run_ce_grid(params)
        outputs = {"ce_table.csv": csv_text(grid.csv_rows()),
                   "ce_table_diff.csv": csv_text(grid.diff_rows())}
        if args.out is None:
            sys.stdout.write(outputs["ce_table_diff.csv"])
        else:
            _emit(args, outputs, params, config, argv)
        n_fail = sum(1 for *_, ok in grid.reference_diff() if ok is False)
        print(f"cells outside tolerance: {n_fail}", file=sys.stderr)

    elif cmd == "simulate":
        spec = _portfolio(args)
        grid = SimulationGrid.daily(spec.horizon, measure=args.measure, seed=args.seed)
        bundle = simulate_factors(m, params.x0, grid, args.paths, workers=args.workers)
        bundle = futures_paths(m, bundle, spec.contracts)
        pi = optimal_strategy_grid(m, spec, grid.times)
        bundle = simulate_wealth(m, bundle, pi[:-1], spec.w0)
        M = len(spec.contracts)
        rows = [["path_id", "t", "x1", "x2", "x3"] + [f"F{k + 1}" for k in range(M)]
                + [f"pi{k + 1}" for k in range(M)] + ["wealth"]]
        for p in range(bundle.n_paths):
            for i, t in enumerate(grid.times):
                rows.append([str(p), _num(t), *map(_num, bundle.factors[p, i]),
                             *map(_num, bundle.futures[p, i]), *map(_num, pi[i]),
                             _num(bundle.wealth[p, i])])
        sidecar = json_text({"seed": args.seed, "measure": args.measure, "paths": args.paths,
                             "grid": {"t0": grid.t0, "t_end": grid.t_end, "n_steps": grid.n_steps}})
        outputs = {"simulate.csv": csv_text(rows)}
        if args.out is not None:
            outputs["simulate.json"] = sidecar
        _emit(args, outputs, params, config, argv)

    elif cmd == "verify-mc":
        spec = _portfolio(args)
        report = ex.verify_mc_utility(params, spec, args.paths, args.seed, workers=args.workers)
        _emit(args, {"verify_mc.json": json_text(report.to_dict())}, params, config, argv)
        if not (report.passed and report.perturbed_worse):
            print("Monte Carlo verification did not pass", file=sys.stderr)

    elif cmd == "figures":
        which = [w.strip() for w in args.which.split(",") if w.strip()]
        unknown = [w for w in which if w not in ex.FIGURES]
        if unknown:
            raise UsageError(f"unknown figure(s) {unknown}; choose from {list(ex.FIGURES)}")
        outputs = {}
        for w in which:
            data = ex.run_figure_data(params, w, seed=args.seed, n_paths=args.paths)
            outputs.update(_table(args, w, data.csv_rows()))
        _emit(args, outputs, params, config, argv)

    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return run(args, argv)
    except UsageError as exc:
        print(f"mctou: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"mctou: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidParameters, InvalidPortfolio, ValueError) as exc:
        print(f"mctou: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

