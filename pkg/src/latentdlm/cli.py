"""Command-line interface: ``simulate``, ``fit``, ``diagnose`` and ``lag-response``.

Exit codes are 0 on success, 2 for invalid input or configuration and 3 when a
chain fails numerically.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import RngStream
from .runner import (
    PRESETS,
    NumericalFailure,
    RunConfig,
    ValidationError,
    _coerce,
    bases_from_manifest,
    diagnose_chains,
    fit_chains,
    lag_response_rows,
    parse_config_text,
    prepare_data,
    read_chain_csv,
    read_table,
    write_fit_outputs,
)
from .simulation import SimConfig, simulate_dataset, write_dataset

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("latentdlm")


def _parse_effects(text):
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        name, _, val = item.partition("=")
        if not _:
            raise ValidationError(f"expected name=value in --dynamic-effects, got {item!r}")
        out[name.strip()] = float(val)
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentdlm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic dataset and its truth record")
    sim.add_argument("--kind", choices=("count", "binary"), default="count")
    sim.add_argument("--n", type=int, default=5114, help="number of response rows")
    sim.add_argument("--tau", type=int, default=40)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--xi", type=float, default=50.0)
    sim.add_argument("--q", type=float, default=0.9)
    sim.add_argument("--intercept", type=float, default=None)
    sim.add_argument("--static-effects", default="-0.5,0.01", help="comma-separated static effects")
    sim.add_argument("--dynamic-effects", default="rhum=0.5,pm10=0.01,o3=-0.5",
                     help="comma-separated name=effect pairs")
    sim.add_argument("--ar-coef", type=float, default=0.8)
    sim.add_argument("--dynamic-csv", default=None, help="take dynamic series from this CSV instead of AR(1)")
    sim.add_argument("--out", default="dataset.csv", help="dataset CSV path")
    sim.add_argument("--truth", default=None, help="truth JSON path (default: <out>.truth.json)")

    fit = sub.add_parser("fit", help="run the Gibbs sampler on a dataset CSV")
    fit.add_argument("dataset")
    fit.add_argument("--out", default="fit", help="output directory")
    fit.add_argument("--config", default=None, help="key=value configuration file")
    fit.add_argument("--preset", choices=sorted(PRESETS), default=None)
    for f in fields(RunConfig):
        fit.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="VALUE")

    diag = sub.add_parser("diagnose", help="mixing diagnostics for chain draw files")
    diag.add_argument("chains", nargs="+")
    diag.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    diag.add_argument("--threshold", type=float, default=0.9, help="flag pairs with |correlation| at least this")

    lag = sub.add_parser("lag-response", help="lag-response curve summaries from a fit directory")
    lag.add_argument("fit_dir")
    lag.add_argument("--prob", type=float, default=0.95)
    lag.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return parser


def resolve_config(args) -> RunConfig:
    """Preset, then config file, then explicit flags."""
    values = {}
    if args.preset:
        values.update(PRESETS[args.preset])
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read config file: {exc}") from None
        values.update(parse_config_text(text))
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            try:
                values[f.name] = _coerce(f, raw)
            except ValueError as exc:
                raise ValidationError(f"--{f.name.replace('_', '-')}: {exc}") from None
    if "iterations" in values and "burn_in" not in values:
        values["burn_in"] = None
    return RunConfig(**values)


def cmd_simulate(args) -> int:
    try:
        statics = tuple(float(s) for s in args.static_effects.split(",") if s.strip())
    except ValueError:
        raise ValidationError(f"bad --static-effects {args.static_effects!r}") from None
    config = SimConfig(kind=args.kind, N=args.n, tau=args.tau, static_effects=statics,
                       dynamic_effects=_parse_effects(args.dynamic_effects), intercept=args.intercept,
                       xi=args.xi, q=args.q, seed=args.seed, ar_coef=args.ar_coef, dynamic_csv=args.dynamic_csv)
    ds = simulate_dataset(config, RngStream(args.seed, 0).generator())
    csv_path, json_path = write_dataset(ds, args.out, args.truth)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = resolve_config(args)
    table = read_table(args.dataset)
    prepared = prepare_data(table, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = fit_chains(prepared, config, dump_dir=out)
    write_fit_outputs(results, prepared, config, out)
    print(f"wrote {len(results)} chains and summaries to {out}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    report = diagnose_chains(args.chains, corr_threshold=args.threshold)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_lag_response(args) -> int:
    fit_dir = Path(args.fit_dir)
    try:
        manifest = json.loads((fit_dir / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read fit manifest: {exc}") from None
    bases = bases_from_manifest(manifest)
    files = sorted(fit_dir.glob("chain_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise ValidationError(f"no chain files in {fit_dir}")
    betas, labels = [], None
    for path in files:
        draws, plabels, _, glabels = read_chain_csv(path)
        cols = [plabels.index(g) for g in glabels]
        betas.append(draws[:, cols])
        labels = glabels
    rows = lag_response_rows(np.vstack(betas), labels, bases, args.prob)
    lines = ["covariate,lag,mean,lower,upper", *(",".join(r) for r in rows)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "diagnose": cmd_diagnose, "lag-response": cmd_lag_response}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericalFailure as exc:
        msg = f"numerical failure: {exc}"
        if exc.dump_path is not None:
            msg += f" (state written to {exc.dump_path})"
        print(msg, file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
