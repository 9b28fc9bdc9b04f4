"""Option-snapshot ingestion, no-arbitrage cleaning and the market proxy.

Pipeline: ``clean_quotes`` -> ``synthesize_missing`` -> ``build_proxy``.
The proxy is piecewise linear in strike between quote knots and refuses to
extrapolate beyond them.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    CoverageGap,
    InputError,
    InvariantViolation,
    NegativeSynthetic,
    NetworkError,
    SchemaError,
    TooFewQuotes,
)
from .models import MarketConventions, parity_synthesize

KINDS = ("call", "put")
DEFAULT_GAP_THRESHOLD = 500.0
_SHAPE_TOL = 1e-9  # relative, for monotonicity/convexity checks


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    kind: str
    bid: float | None
    ask: float | None
    mid: float
    synthetic: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"kind must be call or put, got {self.kind!r}")
        if not self.strike > 0:
            raise InputError("strike must be > 0")


def make_quote(strike, kind, bid=None, ask=None, mid=None, synthetic=False):
    """Quote with ``mid`` filled from bid/ask when not given."""
    if mid is None:
        if bid is None or ask is None:
            raise InputError(f"quote at {strike} needs mid or both bid and ask")
        mid = 0.5 * (bid + ask)
    return OptionQuote(float(strike), kind, bid, ask, float(mid), synthetic)


def _sort_key(q):
    return (KINDS.index(q.kind), q.strike)


@dataclass(frozen=True)
class OptionSnapshot:
    quotes: tuple
    conv: MarketConventions
    expiry_label: str = ""
    timestamp: str = ""

    def __post_init__(self):
        object.__setattr__(self, "quotes", tuple(sorted(self.quotes, key=_sort_key)))

    def side(self, kind):
        return [q for q in self.quotes if q.kind == kind]


@dataclass
class CleaningReport:
    dropped: list = field(default_factory=list)  # (quote, reason)
    synthesized: list = field(default_factory=list)  # (kind, strike)
    skipped_synthetic: list = field(default_factory=list)  # (kind, strike, reason)
    kept: int = 0
    rules: dict = field(
        default_factory=lambda: {
            "order": ["nonpositive", "monotonicity", "convexity"],
            "monotonicity": "drop the later-in-strike violator",
            "convexity": "drop the middle quote of a violating triple, rescan",
        }
    )

    def to_dict(self):
        return {
            "dropped": [{"quote": asdict(q), "reason": r} for q, r in self.dropped],
            "synthesized": [{"kind": k, "strike": s} for k, s in self.synthesized],
            "skipped_synthetic": [{"kind": k, "strike": s, "reason": r} for k, s, r in self.skipped_synthetic],
            "kept": self.kept,
            "rules": self.rules,
        }


# cleaning -------------------------------------------------------------------
def _monotone_pass(quotes, kind, report):
    out = []
    for q in quotes:
        if out:
            prev = out[-1].mid
            tol = _SHAPE_TOL * max(abs(prev), 1.0)
            bad = q.mid > prev + tol if kind == "call" else q.mid < prev - tol
            if bad:
                report.dropped.append((q, "monotonicity"))
                continue
        out.append(q)
    return out


def _convex_violation(k, v, i):
    """Slope change at knot i (nonuniform second difference) is negative."""
    s_left = (v[i] - v[i - 1]) / (k[i] - k[i - 1])
    s_right = (v[i + 1] - v[i]) / (k[i + 1] - k[i])
    return s_right - s_left < -_SHAPE_TOL * max(abs(s_left), abs(s_right), 1e-12)


def _convex_pass(quotes, report, may_drop=lambda q: True):
    qs = list(quotes)
    i = 1
    while i < len(qs) - 1:
        k = [q.strike for q in qs]
        v = [q.mid for q in qs]
        if _convex_violation(k, v, i):
            # drop the middle, or the nearest droppable member of the triple
            for j in (i, i + 1, i - 1):
                if may_drop(qs[j]):
                    report.dropped.append((qs[j], "convexity"))
                    del qs[j]
                    break
            else:
                raise InvariantViolation(f"convexity violated at strike {qs[i].strike} by protected quotes")
            i = max(1, i - 1)
        else:
            i += 1
    return qs


def clean_quotes(snapshot):
    """Positivity, monotonicity and convexity filters, per side, in that order."""
    report = CleaningReport()
    kept = []
    for kind in KINDS:
        side = []
        for q in snapshot.side(kind):
            if q.mid <= 0:
                report.dropped.append((q, "nonpositive"))
            else:
                side.append(q)
        side = _monotone_pass(side, kind, report)
        side = _convex_pass(side, report)
        if len(side) < 2:
            raise TooFewQuotes(f"fewer than 2 {kind} quotes survive cleaning")
        kept += side
    report.kept = len(kept)
    return replace(snapshot, quotes=tuple(kept)), report


def synthesize_missing(cleaned, gap_threshold=DEFAULT_GAP_THRESHOLD, report=None):
    """Fill sparse coverage on one side from the other side via parity.

    A gap is a pair of adjacent strikes on one side at least
    ``gap_threshold`` apart; strikes of the other side beyond the first or
    last strike of this side count as lying in an unbounded gap. Real quotes
    are never modified; synthetic ones that would break monotonicity or
    convexity are dropped again and reported.
    """
    if report is None:
        report = CleaningReport()
    conv = cleaned.conv
    out = list(cleaned.quotes)
    for kind in KINDS:
        other = "put" if kind == "call" else "call"
        mine = sorted(q.strike for q in cleaned.side(kind))
        edges = [-math.inf] + mine + [math.inf]
        gaps = [(a, b) for a, b in zip(edges, edges[1:]) if b - a >= gap_threshold]
        added = []
        for q in cleaned.side(other):
            if q.synthetic or not any(a < q.strike < b for a, b in gaps):
                continue
            try:
                mid = parity_synthesize(q.mid, other, conv.F, q.strike, conv.r, conv.T)
            except NegativeSynthetic as exc:
                report.skipped_synthetic.append((kind, q.strike, f"negative synthetic {exc.value:.6g}"))
                continue
            shift = mid - q.mid

            def moved(v):
                return None if v is None else v + shift

            bid, ask = moved(q.bid), moved(q.ask)
            if bid is not None and bid < 0:
                bid = None
            added.append(OptionQuote(q.strike, kind, bid, ask, mid, synthetic=True))
        if not added:
            continue
        side = sorted(cleaned.side(kind) + added, key=lambda q: q.strike)
        scratch = CleaningReport()
        side = _monotone_synthetic(side, kind, scratch)
        side = _convex_pass(side, scratch, may_drop=lambda q: q.synthetic)
        for q, reason in scratch.dropped:
            report.skipped_synthetic.append((kind, q.strike, reason))
        for q in side:
            if q.synthetic:
                report.synthesized.append((kind, q.strike))
        out = [q for q in out if q.kind != kind] + side
    return replace(cleaned, quotes=tuple(out))


def _monotone_synthetic(quotes, kind, report):
    out = []
    for q in quotes:
        if out:
            prev = out[-1]
            tol = _SHAPE_TOL * max(abs(prev.mid), 1.0)
            bad = q.mid > prev.mid + tol if kind == "call" else q.mid < prev.mid - tol
            if bad:
                victim = q if q.synthetic else (prev if prev.synthetic else None)
                if victim is None:
                    raise InvariantViolation(f"monotonicity violated between real quotes at {q.strike}")
                report.dropped.append((victim, "monotonicity"))
                if victim is prev:
                    out[-1] = q
                continue
        out.append(q)
    return out


# market proxy ---------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.ascontiguousarray(self.knots, dtype=float)
        v = np.ascontiguousarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size < 2:
            raise InputError("need >= 2 knots with matching values")
        if np.any(np.diff(k) <= 0):
            raise InputError("knots must be strictly increasing")
        k.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    @property
    def coverage(self):
        return float(self.knots[0]), float(self.knots[-1])

    def __call__(self, K):
        K = np.asarray(K, dtype=float)
        lo, hi = self.coverage
        if np.any(K < lo) or np.any(K > hi):
            raise CoverageGap(float(np.min(K)), float(np.max(K)))
        out = np.interp(K, self.knots, self.values)
        return float(out) if out.ndim == 0 else out

    def cell_coefficients(self, a, b):
        """Affine coefficients ``(c0, c1)`` valid on each cell ``[a, b]``.

        Cells must not straddle a knot.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mid = 0.5 * (a + b)
        j = np.clip(np.searchsorted(self.knots, mid, side="right") - 1, 0, self.knots.size - 2)
        k0, k1 = self.knots[j], self.knots[j + 1]
        v0, v1 = self.values[j], self.values[j + 1]
        slope = (v1 - v0) / (k1 - k0)
        return v0 - slope * k0, slope


@dataclass(frozen=True, eq=False)
class MarketProxy:
    call_curve: PiecewiseLinear
    put_curve: PiecewiseLinear
    F: float | None = None

    @property
    def coverage(self):
        c, p = self.call_curve.coverage, self.put_curve.coverage
        return max(c[0], p[0]), min(c[1], p[1])

    def curve(self, kind):
        return self.call_curve if kind == "call" else self.put_curve

    def knots(self):
        return np.union1d(self.call_curve.knots, self.put_curve.knots)


def _check_shape(curve, kind):
    k, v = curve.knots, curve.values
    d = np.diff(v)
    tol = _SHAPE_TOL * np.maximum(np.abs(v[:-1]), 1.0)
    bad = np.nonzero(d > tol)[0] if kind == "call" else np.nonzero(d < -tol)[0]
    if bad.size:
        i = int(bad[0])
        raise InvariantViolation(f"{kind} curve not monotone between strikes {k[i]} and {k[i + 1]}")
    for i in range(1, k.size - 1):
        if _convex_violation(k, v, i):
            raise InvariantViolation(f"{kind} curve not convex on triple ({k[i - 1]}, {k[i]}, {k[i + 1]})")


def build_proxy(augmented, parity_tol=1e-8):
    """Piecewise-linear call and put curves; verifies shape and parity invariants."""
    curves = {}
    for kind in KINDS:
        side = augmented.side(kind)
        if len(side) < 2:
            raise TooFewQuotes(f"need >= 2 {kind} quotes to build a proxy")
        curve = PiecewiseLinear(np.array([q.strike for q in side]), np.array([q.mid for q in side]))
        _check_shape(curve, kind)
        curves[kind] = curve
    conv = augmented.conv
    calls = {q.strike: q for q in augmented.side("call")}
    D = conv.discount
    for p in augmented.side("put"):
        c = calls.get(p.strike)
        if c is None or not (c.synthetic or p.synthetic):
            continue
        resid = c.mid - p.mid - D * (conv.F - p.strike)
        if abs(resid) > parity_tol * max(conv.F, 1.0):
            raise InvariantViolation(f"parity residual {resid:.3g} at synthetic strike {p.strike}")
    return MarketProxy(curves["call"], curves["put"], conv.F)


def proxy_from_prices(strikes, call_prices, put_prices, F=None):
    """Proxy straight from price arrays (no cleaning); handy for synthetic surfaces."""
    k = np.asarray(strikes, dtype=float)
    return MarketProxy(PiecewiseLinear(k, call_prices), PiecewiseLinear(k, put_prices), F)


# snapshot files ---------------------------------------------------------------
def snapshot_from_dict(d):
    try:
        conv = MarketConventions(
            F=float(d["F"]),
            T=float(d["T"]),
            P0=float(d.get("P0", d["F"])),
            r=float(d.get("r", 0.0)),
            delta=float(d.get("delta", 0.0)),
        )
        quotes = [
            make_quote(q["strike"], q["kind"], q.get("bid"), q.get("ask"), q.get("mid"), bool(q.get("synthetic", False)))
            for q in d["quotes"]
        ]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad snapshot document: {exc}") from exc
    return OptionSnapshot(tuple(quotes), conv, str(d.get("expiry", "")), str(d.get("timestamp", "")))


def snapshot_to_dict(s):
    c = s.conv
    return {
        "expiry": s.expiry_label,
        "timestamp": s.timestamp,
        "T": c.T,
        "F": c.F,
        "P0": c.P0,
        "r": c.r,
        "delta": c.delta,
        "quotes": [
            {"strike": q.strike, "kind": q.kind, "bid": q.bid, "ask": q.ask, "mid": q.mid, "synthetic": q.synthetic}
            for q in s.quotes
        ],
    }


def load_snapshot(path):
    with open(Path(path)) as fh:
        return snapshot_from_dict(json.load(fh))


def dump_json(obj):
    """Canonical JSON text (sorted keys, fixed separators) for byte-stable output."""
    return json.dumps(obj, sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


# Deribit ----------------------------------------------------------------------
DERIBIT_ENDPOINT = "https://www.deribit.com/api/v2/public/get_book_summary_by_currency"
_INSTRUMENT = re.compile(r"^(?P<cur>[A-Z]+)-(?P<exp>\d{1,2}[A-Z]{3}\d{2})-(?P<strike>\d+(?:d\d+)?)-(?P<cp>[CP])$")
_SETTLE_HOUR = 8  # Deribit expiries settle at 08:00 UTC


def _expiry_datetime(label):
    return datetime.strptime(label, "%d%b%y").replace(hour=_SETTLE_HOUR, tzinfo=timezone.utc)


def parse_deribit_book(payload, expiry, P0=None):
    """Snapshot for one expiry (e.g. ``"27MAR26"``) from a book-summary response.

    Premiums quoted in the base coin are converted to USD with the
    instrument's ``underlying_price``.
    """
    rows = payload.get("result") if isinstance(payload, dict) else None
    if not rows:
        raise SchemaError("book summary has no instruments")
    quotes, F, ts = [], None, None
    for row in rows:
        m = _INSTRUMENT.match(str(row.get("instrument_name", "")))
        if not m or m["exp"] != expiry:
            continue
        if "underlying_price" not in row:
            raise SchemaError(f"{row.get('instrument_name')}: missing underlying_price")
        u = float(row["underlying_price"])
        F = u if F is None else F
        ts = row.get("creation_timestamp", ts)

        def usd(v):
            return None if v is None else float(v) * u

        bid, ask = usd(row.get("bid_price")), usd(row.get("ask_price"))
        mid = usd(row.get("mid_price"))
        if mid is None:
            if bid is None or ask is None:
                continue
            mid = 0.5 * (bid + ask)
        strike = float(m["strike"].replace("d", "."))
        quotes.append(OptionQuote(strike, "call" if m["cp"] == "C" else "put", bid, ask, mid))
    if not quotes:
        raise SchemaError(f"no instruments for expiry {expiry}")
    if ts is None:
        raise SchemaError("missing creation_timestamp")
    now = datetime.fromtimestamp(float(ts) / 1000.0, tz=timezone.utc)
    T = (_expiry_datetime(expiry) - now).total_seconds() / (365.0 * 86400.0)
    conv = MarketConventions(F=F, T=T, P0=F if P0 is None else P0)
    return OptionSnapshot(tuple(quotes), conv, _expiry_datetime(expiry).date().isoformat(), now.isoformat())


def fetch_deribit(currency, expiries, out_dir, endpoint=DERIBIT_ENDPOINT, P0=None, timeout=30):
    """Download one book summary and write one snapshot JSON per expiry."""
    import urllib.error
    import urllib.request

    url = f"{endpoint}?currency={currency}&kind=option"
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            payload = json.loads(resp.read().decode())
    except (urllib.error.URLError, OSError) as exc:
        raise NetworkError(f"cannot reach {endpoint}: {exc}") from exc
    paths = []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for exp in expiries:
        snap = parse_deribit_book(payload, exp, P0)
        path = out_dir / f"{currency.lower()}_{exp}.json"
        path.write_text(dump_json(snapshot_to_dict(snap)))
        paths.append(path)
    return paths
