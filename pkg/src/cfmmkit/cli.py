"""Command-line front end.

Every command writes its outputs plus a ``manifest_<command>.json`` into
``--output-dir``. Exit status: 0 on success, 2 for bad input, 3 for a
numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curves import FAMILIES, CEVNeutral, discretize, family_from_dict
from .data import (
    DEFAULT_GAP_THRESHOLD,
    build_proxy,
    clean_quotes,
    dump_json,
    fetch_deribit,
    load_snapshot,
    snapshot_to_dict,
    synthesize_missing,
)
from .dynamics import CEV, GBM, PathConfig, fit_slope, lvr_statistics
from .errors import CFMMError, InputError, NumericError, SchemaError, UnboundedSupport
from .implied import MODEL_NAMES, bins_to_csv, fine_structure, invert_global, parse_resolutions
from .lastpassage import ExitParams, exponential_profile, optimal_exit, pnl_curve
from .models import MarketConventions
from .payoff import il
from .pricing import market_il_price, model_il_price
from .profiles import LiquidityProfile, ladder_from_dict, profile_from_ticks, reserves
from .quadrature import adaptive_integrate

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
FAMILY_GRID = 4000  # steps used when a family must become a step profile


@dataclass
class RunManifest:
    command: str
    input_files: list = field(default_factory=list)
    parameters: dict = field(default_factory=dict)
    tool_version: str = __version__


# file helpers -------------------------------------------------------------------
def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def _read_json(path):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{p}: invalid JSON ({exc})") from exc


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def rows_to_json(header, rows):
    return dump_json([{h: (None if v is None else (float(v) if isinstance(v, np.floating) else v)) for h, v in zip(header, r)} for r in rows])


def emit_table(args, stem, header, rows):
    """Write a table as ``stem.csv`` or ``stem.json`` depending on ``--format``."""
    if args.format == "json":
        return write_atomic(Path(args.output_dir) / f"{stem}.json", rows_to_json(header, rows))
    return write_atomic(Path(args.output_dir) / f"{stem}.csv", rows_to_csv(header, rows))


def load_liquidity(path):
    """Profile or family from JSON: a tick ladder, ``{"steps": ...}`` or ``{"family": ...}``."""
    d = _read_json(path)
    if not isinstance(d, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    if "ticks" in d:
        return profile_from_ticks(ladder_from_dict(d))
    if "family" in d:
        return family_from_dict(d)
    if "steps" in d:
        try:
            return LiquidityProfile.from_steps(d["steps"], d.get("atoms", ()))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise SchemaError(f"{path}: bad steps document ({exc})") from exc
    raise SchemaError(f"{path}: need one of 'ticks', 'steps' or 'family'")


def _family_from_args(args):
    params = {}
    for item in args.param or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise InputError(f"--param expects key=value, got {item!r}")
        params[key.strip()] = float(val)
    return family_from_dict({"family": args.family, **params})


def _liquidity(args):
    if getattr(args, "profile", None):
        return load_liquidity(args.profile)
    if getattr(args, "family", None):
        return _family_from_args(args)
    raise InputError("give --profile FILE or --family NAME")


def as_profile(liq, n=FAMILY_GRID):
    """Step profile; bounded families are discretized geometrically."""
    if isinstance(liq, LiquidityProfile):
        return liq
    lo, hi = liq.support()
    if not (lo > 0 and math.isfinite(hi)):
        raise UnboundedSupport(f"{type(liq).__name__} has support [{lo}, {hi}]; pass a bounded step profile")
    return discretize(liq, np.geomspace(lo, hi, n + 1))


def _inputs(args):
    files = []
    for name in ("profile", "snapshot", "ladder"):
        v = getattr(args, name, None)
        if v:
            files += [str(p) for p in (v if isinstance(v, list) else [v])]
    return files


def _conv(args, snapshot=None):
    if snapshot is not None:
        return snapshot.conv
    if args.F is None or args.T is None:
        raise InputError("need --snapshot or both --F and --T")
    return MarketConventions(F=args.F, T=args.T, P0=args.P0 if args.P0 is not None else args.F, r=args.r, delta=args.delta)


def market_proxy(snapshot, gap_threshold):
    cleaned, report = clean_quotes(snapshot)
    augmented = synthesize_missing(cleaned, gap_threshold, report)
    return build_proxy(augmented), report


# commands -------------------------------------------------------------------------
def cmd_reserves(args):
    liq = _liquidity(args)
    if isinstance(liq, LiquidityProfile):
        x, y = reserves(liq, args.p)
    else:
        x, y = liq.reserves(args.p)
    x, y = float(x), float(y)
    print(f"x={x:.12g} y={y:.12g}")
    emit_table(args, "reserves", ("p", "x", "y"), [(float(args.p), x, y)])


def _family_il(fam, p0, pt):
    a, b = sorted((p0, pt))
    lo, hi = fam.support()
    a, b = max(a, lo), min(b, hi)
    if a >= b:
        return 0.0
    return adaptive_integrate(lambda q: np.abs(pt - q) * fam.density(q), a, b, tol=1e-12)


def cmd_il(args):
    liq = _liquidity(args)
    rows = []
    for pt in args.pt:
        if isinstance(liq, LiquidityProfile):
            b = il(liq, args.p0, pt)
            rows.append((pt, b.total, b.put_leg, b.call_leg))
        else:
            v = _family_il(liq, args.p0, pt)
            rows.append((pt, v, v if pt < args.p0 else 0.0, v if pt > args.p0 else 0.0))
    emit_table(args, "il", ("pt", "il", "put_leg", "call_leg"), rows)
    for r in rows:
        print(f"pt={r[0]:.12g} il={r[1]:.12g}")


def cmd_price_il(args):
    profile = as_profile(_liquidity(args))
    snap = load_snapshot(args.snapshot) if args.snapshot else None
    conv = _conv(args, snap)
    if args.sigma is not None:
        res = model_il_price(profile, args.sigma, conv, args.model)
    elif snap is not None:
        proxy, _ = market_proxy(snap, args.gap_threshold)
        res = market_il_price(profile, proxy, conv)
    else:
        raise InputError("need --sigma (model price) or --snapshot (market price)")
    rows = [(lo, hi, v) for (lo, hi), v in res.per_cell]
    emit_table(args, "price_il_cells", ("lo", "hi", "value"), rows)
    summary = {"total": res.total, "put_leg": res.put_leg, "call_leg": res.call_leg}
    write_atomic(Path(args.output_dir) / "price_il.json", dump_json(summary))
    print(dump_json(summary), end="")


def _implied_one(job):
    ladder_path, snap_path, args = job
    profile = as_profile(load_liquidity(ladder_path))
    snap = load_snapshot(snap_path)
    proxy, _ = market_proxy(snap, args.gap_threshold)
    models = MODEL_NAMES if args.model == "both" else (args.model,)
    rows = fine_structure(profile, proxy, snap.conv, parse_resolutions(args.resolutions), models)
    label = snap.expiry_label or Path(snap_path).stem
    stem = f"iv_{Path(ladder_path).stem}_{label}"
    glob = {}
    for m in models:
        try:
            glob[m] = invert_global(profile, proxy, snap.conv, m)
        except NumericError as exc:
            glob[m] = f"{type(exc).__name__}: {exc}"
    return stem, bins_to_csv(rows, snap.conv.F), glob


def cmd_implied_vol(args):
    for p in list(args.ladder) + list(args.snapshot):
        if not Path(p).is_file():
            raise InputError(f"file not found: {p}")
    jobs = [(lad, snap, args) for lad in args.ladder for snap in args.snapshot]
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(_implied_one, jobs))
    summary = {}
    for stem, text, glob in results:
        write_atomic(Path(args.output_dir) / f"{stem}.csv", text)
        summary[stem] = glob
    write_atomic(Path(args.output_dir) / "iv_global.json", dump_json(summary))
    print(dump_json(summary), end="")


def cmd_optimal_exit(args):
    liq = load_liquidity(args.profile) if args.profile else exponential_profile(p0=args.p0)
    profile = as_profile(liq)
    params = ExitParams(args.mu, args.sigma, args.r, args.phi, args.p0)
    res = optimal_exit(params, profile)
    out = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in res.to_dict().items()}
    write_atomic(Path(args.output_dir) / "optimal_exit.json", dump_json(out))
    eps, v = pnl_curve(params, profile, args.eps_max, args.points)
    emit_table(args, "optimal_exit_curve", ("epsilon", "v"), zip(eps.tolist(), v.tolist()))
    print(dump_json(out), end="")


def cmd_lvr_sim(args):
    liq = _liquidity(args)
    model = GBM(args.mu, args.sigma) if args.model == "gbm" else CEV(args.nu, args.beta)
    config = PathConfig(args.T, args.steps, args.paths, args.seed)
    keep = None
    if isinstance(liq, CEVNeutral):
        lo, hi = liq.support()

        def keep(paths):
            return np.all((paths >= lo) & (paths <= hi), axis=1)

    mean, se, used, n_abs, n_exit = lvr_statistics(model, liq, config, args.p0, keep)
    t = config.times
    slope = fit_slope(t, mean)
    idx = np.unique(np.linspace(0, config.steps, min(args.buckets, config.steps) + 1).round().astype(int))
    rows = [(float(t[i]), float(mean[i]), float(se[i]), slope) for i in idx]
    emit_table(args, "lvr_sim", ("t", "mean_lvr", "stderr", "slope"), rows)
    print(f"slope={slope:.12g} paths_used={used} absorbed={n_abs} support_exit={n_exit}")


def cmd_clean(args):
    snap = load_snapshot(args.snapshot)
    cleaned, report = clean_quotes(snap)
    if not args.no_synthesize:
        cleaned = synthesize_missing(cleaned, args.gap_threshold, report)
    stem = Path(args.snapshot).stem
    write_atomic(Path(args.output_dir) / f"{stem}_clean.json", dump_json(snapshot_to_dict(cleaned)))
    write_atomic(Path(args.output_dir) / f"{stem}_report.json", dump_json(report.to_dict()))
    print(f"dropped={len(report.dropped)} synthesized={len(report.synthesized)} kept={report.kept}")


def cmd_fetch_deribit(args):
    paths = fetch_deribit(args.currency, args.expiry, args.output_dir, P0=args.P0)
    for p in paths:
        print(p)


# parser ---------------------------------------------------------------------------
def _add_liquidity(p, required=False):
    g = p.add_argument_group("liquidity")
    g.add_argument("--profile", help="JSON: tick ladder, {'steps': [[lo, hi, ell], ...]} or {'family': ...}")
    g.add_argument("--family", choices=sorted(FAMILIES), help="closed-form family instead of --profile")
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="family parameter, repeatable")


def _add_conventions(p):
    p.add_argument("--F", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--P0", type=float)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.0)


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def build_parser():
    ap = argparse.ArgumentParser(prog="cfmmkit", description=__doc__.splitlines()[0])
    ap.add_argument("--output-dir", default=".", help="directory for outputs and the run manifest")
    ap.add_argument("--format", choices=("csv", "json"), default="csv", help="format of tabular outputs")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("implied-vol", help="global and per-bin implied volatilities")
    p.add_argument("--snapshot", nargs="+", required=True)
    p.add_argument("--ladder", nargs="+", required=True, help="pool liquidity files")
    p.add_argument("--resolutions", default="1,3,6,12,finest")
    p.add_argument("--model", choices=("bs", "bachelier", "both"), default="both")
    p.add_argument("--gap-threshold", type=float, default=DEFAULT_GAP_THRESHOLD)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_implied_vol)

    p = sub.add_parser("price-il", help="market or model price of the IL strip")
    _add_liquidity(p)
    p.add_argument("--snapshot")
    p.add_argument("--sigma", type=float, help="model volatility (Bachelier: absolute sigma_n)")
    p.add_argument("--model", choices=("bs", "bachelier"), default="bs")
    p.add_argument("--gap-threshold", type=float, default=DEFAULT_GAP_THRESHOLD)
    _add_conventions(p)
    p.set_defaults(func=cmd_price_il)

    p = sub.add_parser("reserves", help="token reserves at a price")
    _add_liquidity(p)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_reserves)

    p = sub.add_parser("il", help="realized impermanent loss")
    _add_liquidity(p)
    p.add_argument("--p0", type=float, required=True)
    p.add_argument("--pt", type=_floats, required=True, help="comma-separated marks")
    p.set_defaults(func=cmd_il)

    p = sub.add_parser("optimal-exit", help="last-passage exit level")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--p0", type=float, default=1.0)
    p.add_argument("--profile", help="liquidity file; default is exp(-|q - p0|/10) on (0.01, 60)")
    p.add_argument("--eps-max", type=float, default=3.0)
    p.add_argument("--points", type=int, default=301)
    p.set_defaults(func=cmd_optimal_exit)

    p = sub.add_parser("lvr-sim", help="Monte Carlo cumulative LVR")
    _add_liquidity(p)
    p.add_argument("--model", choices=("gbm", "cev"), default="gbm")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--p0", type=float, default=1.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--buckets", type=int, default=20)
    p.set_defaults(func=cmd_lvr_sim)

    p = sub.add_parser("clean-options", help="no-arbitrage cleaning and parity synthesis")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--gap-threshold", type=float, default=DEFAULT_GAP_THRESHOLD)
    p.add_argument("--no-synthesize", action="store_true")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("fetch-deribit", help="download option snapshots")
    p.add_argument("--currency", default="ETH")
    p.add_argument("--expiry", nargs="+", required=True, help="e.g. 27MAR26")
    p.add_argument("--P0", type=float)
    p.set_defaults(func=cmd_fetch_deribit)
    return ap


def _manifest(args):
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output_dir")}
    return RunManifest(args.command, _inputs(args), params)


COMMANDS = {
    "implied-vol": cmd_implied_vol,
    "price-il": cmd_price_il,
    "reserves": cmd_reserves,
    "il": cmd_il,
    "optimal-exit": cmd_optimal_exit,
    "lvr-sim": cmd_lvr_sim,
    "clean-options": cmd_clean,
    "fetch-deribit": cmd_fetch_deribit,
}


def replay(manifest, output_dir):
    """Rerun a manifest's command with its recorded parameters into ``output_dir``."""
    if isinstance(manifest, (str, Path)):
        manifest = _read_json(manifest)
    args = argparse.Namespace(**manifest["parameters"], output_dir=str(output_dir))
    return _run(args, COMMANDS[manifest["command"]])


def _run(args, func):
    try:
        func(args)
        m = _manifest(args)
        write_atomic(Path(args.output_dir) / f"manifest_{args.command}.json", dump_json(asdict(m)))
    except NumericError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CFMMError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    return _run(args, args.func)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
