"""``bislab`` command line.

Exit codes: 0 success, 1 usage or validation error, 2 I/O error,
3 infeasible codec configuration, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from bislab import codec, ratefuncs, region, verify
from bislab.gaussmodel import AuxiliaryParams, ChannelParams, UnscaledParams, to_scaled
from bislab.mcverify import trend_test
from bislab.units import from_nats, parse_number

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INFEASIBLE, EXIT_VERIFY = range(5)

TABLE_HEADER = ["example", "case", "rho1_sq", "rho2_sq", "secrecy", "leakage", "base"]
SWEEP_HEADER = ["alpha", "r_j", "value", "base"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number(text: str) -> Fraction:
    try:
        return parse_number(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fmt_frac(v) -> str:
    return str(v) if isinstance(v, Fraction) else repr(float(v))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("source model (one of)")
    g.add_argument("--rho1-sq", type=_number)
    g.add_argument("--rho2-sq", type=_number)
    g.add_argument("--sigma-x-sq", type=_number)
    g.add_argument("--sigma1-sq", type=_number)
    g.add_argument("--sigma2-sq", type=_number)
    g.add_argument("--example", type=int, choices=(1, 2, 3), help="built-in example set")
    g.add_argument("--case", choices=ratefuncs.CASE_LABELS, default="a")


def _params(args):
    """``(ChannelParams or UnscaledParams, dict for the JSON payload)``."""
    scaled = args.rho1_sq is not None or args.rho2_sq is not None
    unscaled = any(v is not None for v in (args.sigma_x_sq, args.sigma1_sq, args.sigma2_sq))
    if sum([scaled, unscaled, args.example is not None]) != 1:
        raise UsageError("give exactly one of --rho1-sq/--rho2-sq, --sigma-*-sq or --example")
    if args.example is not None:
        p = ratefuncs.EXAMPLES[args.example - 1].cases[ratefuncs.CASE_LABELS.index(args.case)]
    elif scaled:
        if args.rho1_sq is None or args.rho2_sq is None:
            raise UsageError("both --rho1-sq and --rho2-sq are required")
        p = ChannelParams(args.rho1_sq, args.rho2_sq)
    else:
        if None in (args.sigma_x_sq, args.sigma1_sq, args.sigma2_sq):
            raise UsageError("all of --sigma-x-sq, --sigma1-sq, --sigma2-sq are required")
        p = UnscaledParams(args.sigma_x_sq, args.sigma1_sq, args.sigma2_sq)
    return p, {k: _fmt_frac(v) for k, v in vars(p).items()}


def _scaled(p) -> ChannelParams:
    return to_scaled(p) if isinstance(p, UnscaledParams) else p


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_tables(args) -> int:
    limits, slopes = ratefuncs.make_tables(base=args.base)
    out = Path(args.out_dir)
    for name, matrix in (("table1.csv", limits), ("table2.csv", slopes)):
        rows = []
        for ex, row in zip(ratefuncs.EXAMPLES, matrix):
            for k, (label, p) in enumerate(zip(ratefuncs.CASE_LABELS, ex.cases)):
                rows.append([ex.label, label, _fmt_frac(p.rho1_sq), _fmt_frac(p.rho2_sq),
                             f"{row[k]:.2f}", f"{row[k + 3]:.2f}", args.base])
        _write_text(out / name, _csv_text(TABLE_HEADER, rows))
    print(f"wrote {out / 'table1.csv'} and {out / 'table2.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    p, _ = _params(args)
    q = region.RegionQuery(args.model, p)
    trace = region.boundary_trace(q, float(args.r_i), args.plane, args.grid, args.alpha_min, args.base)
    pts = trace.points(args.base)
    if not region.is_monotone(pts[:, 0], pts[:, 1]):
        raise UsageError("traced curve is not monotone")
    rows = [[_fmt(al), _fmt(rj), _fmt(v), args.base] for al, (rj, v) in zip(trace.alpha, pts)]
    text = _csv_text(SWEEP_HEADER, rows)
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_region(args) -> int:
    p, pdict = _params(args)
    t = region.RateTuple.from_base(args.r_i, args.r_s, args.r_j, args.r_l, args.base)
    q = region.RegionQuery(args.model, p, args.tolerance)
    with warnings.catch_warnings():
        # reported through the payload's "boundary" field instead
        warnings.simplefilter("ignore", region.BoundaryWarning)
        m = region.is_achievable(t, q)
    payload = {"command": "region", "params": pdict, "base": args.base, "model": q.model.value,
               "achievable": m.achievable, "boundary": m.boundary, "alpha": m.alpha}
    if m.achievable:
        ps, a = q.channel, AuxiliaryParams(m.alpha)
        r_i = from_nats(t.r_i, args.base)
        payload["bounds"] = {
            "sum_rate": region.sum_rate_bound(ps, a, args.base),
            "storage": region.storage_bound(q.model, ps, a, r_i, args.base),
            "leakage": region.leakage_bound(ps, a, r_i, args.base),
        }
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("achievable" if m.achievable else "not achievable")
        if m.achievable:
            print(f"alpha = {_fmt(m.alpha)}" + (" (boundary)" if m.boundary else ""))
            for k, v in payload["bounds"].items():
                print(f"{k} = {_fmt(v)} {args.base}")
    return EXIT_OK


def _simulate_one(args, p: ChannelParams, pdict: dict, n: int) -> tuple[dict, list]:
    cfg = codec.CodecConfig(n=n, alpha=float(args.alpha), delta=float(args.delta), r_i=float(args.r_i),
                            eps=1.0, base=args.base, users=args.users, m_s=args.m_s)
    codec.plan(p, cfg)
    if args.eps == "auto":
        eps = codec.calibrate_eps(p, cfg, trials=args.calibration_trials, seed=args.calibration_seed)
    else:
        eps = float(parse_number(args.eps))
    cfg = codec.CodecConfig(**{**vars(cfg), "eps": eps})
    start = time.perf_counter()
    st = codec.run_experiment(p, cfg, args.mode, trials=args.trials, seed=args.seed,
                              fresh_codebook=not args.reuse_codebook)
    wall = time.perf_counter() - start
    payload = {
        "command": "simulate",
        "params": {**pdict, "alpha": _fmt_frac(args.alpha), "n": n, "delta": _fmt_frac(args.delta),
                   "r_i": _fmt_frac(args.r_i), "users": args.users, "m_s": args.m_s, "eps": eps,
                   "eps_source": "calibrated" if args.eps == "auto" else "given",
                   "calibration_seed": args.calibration_seed if args.eps == "auto" else None, "mode": args.mode,
                   "trials": args.trials, "fresh_codebook": not args.reuse_codebook},
        "base": args.base,
        "seed": args.seed,
        "results": st.results(),
        "wall_time_s": None if args.no_wall_time else wall,
    }
    return payload, st.records


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def cmd_simulate(args) -> int:
    p, pdict = _params(args)
    p = _scaled(p)
    if args.n_sweep:
        ns = [int(v) for v in args.n_sweep.split(",")]
        if not args.out_dir:
            raise UsageError("--n-sweep needs --out-dir")
        out = Path(args.out_dir)
        errs = []
        for n in ns:
            payload, _ = _simulate_one(args, p, pdict, n)
            errs.append(payload["results"]["error_probability"])
            _write_text(out / f"stats_n{n}.json", _dump_json(payload))
        trend = {"command": "simulate", "params": {**pdict, "n_sweep": ns}, "base": args.base, "seed": args.seed,
                 "results": {"error_probability": errs, "direction": "decreasing",
                             "p_value": trend_test(errs) if len(ns) >= 4 else None},
                 "wall_time_s": None}
        _write_text(out / "trend.json", _dump_json(trend))
        print(f"wrote {len(ns)} stats files and {out / 'trend.json'}")
        return EXIT_OK

    if args.n is None:
        raise UsageError("give --n or --n-sweep")
    payload, records = _simulate_one(args, p, pdict, args.n)
    text = _dump_json(payload)
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if args.trials_csv:
        rows = [[r.flat()[k] for k in codec.TRIAL_FIELDS] for r in records]
        _write_text(Path(args.trials_csv), _csv_text(codec.TRIAL_FIELDS, rows))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_all(quick=args.quick, fault=args.inject_fault)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed suites: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--base", choices=("bits", "nats"), default="bits", help="rate unit (default bits)")

    parser = _Parser(prog="bislab", description="Capacity regions and simulations for Gaussian "
                                                "biometric identification systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tables", parents=[common], help="write table1.csv and table2.csv")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("sweep", parents=[common], help="trace a region boundary as CSV")
    _add_params(p)
    p.add_argument("--r-i", type=_number, default=Fraction(0))
    p.add_argument("--plane", choices=[e.value for e in region.Plane], default="rj_rs")
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--model", choices=[e.value for e in region.Model], default="generated")
    p.add_argument("--alpha-min", type=float, default=region.ALPHA_MIN)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("region", parents=[common], help="test membership of a rate tuple")
    _add_params(p)
    for name in ("--r-i", "--r-s", "--r-j", "--r-l"):
        p.add_argument(name, type=_number, required=True)
    p.add_argument("--model", choices=[e.value for e in region.Model], default="generated")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("simulate", parents=[common], help="run the random-codebook scheme")
    _add_params(p)
    p.add_argument("--alpha", type=_number, default=Fraction(1, 2))
    p.add_argument("--n", type=int)
    p.add_argument("--n-sweep", help="comma-separated block lengths")
    p.add_argument("--delta", type=_number, default=Fraction(1, 20))
    p.add_argument("--r-i", type=_number, default=Fraction(1, 10))
    p.add_argument("--users", type=int)
    p.add_argument("--m-s", type=int, help="override the number of keys")
    p.add_argument("--eps", default="auto", help="typicality slack in nats, or 'auto' to calibrate")
    p.add_argument("--calibration-trials", type=int, default=500)
    p.add_argument("--calibration-seed", type=int, default=12345)
    p.add_argument("--mode", choices=[e.value for e in codec.Mode], default="generated")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reuse-codebook", action="store_true")
    p.add_argument("--out")
    p.add_argument("--out-dir")
    p.add_argument("--trials-csv")
    p.add_argument("--no-wall-time", action="store_true", help="write wall_time_s as null")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="run the self-check suites")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--inject-fault", action="store_true", help="negative control: corrupt one code path")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except codec.ConfigInfeasible as exc:
        print(f"config infeasible: {exc}", file=sys.stderr)
        if exc.required is not None:
            print(f"required elements: {exc.required}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
