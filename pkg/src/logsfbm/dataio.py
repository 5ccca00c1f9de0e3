"""Market data ingestion: OHLC bars and intraday returns to volatility proxies.

Daily integrated-variance proxies come from the Garman-Klass range estimator
on OHLC bars, or from realized variance / bipower variation on intraday
returns.  Cleaning of non-positive proxy values (possible for Garman-Klass
when the close-to-open move dominates the range) is explicit: drop the day
or floor it at a small epsilon.  Calendar gaps are ignored; the series index
is the trading-day ordinal.

CSV schemas are fixed, not sniffed:
    OHLC:        date,open,high,low,close
    intraday:    date,return            (one row per return)
    precomputed: date,rv,bv
    series out:  index,value            (+ JSON provenance sidecar)
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .simulate import SimConfig, VolSeries, build_price_and_rv, sample_omega, sample_omega_mrm

__all__ = [
    "OhlcBar",
    "IntradayReturns",
    "garman_klass",
    "realized_variance",
    "bipower_variation",
    "to_vol_series",
    "read_ohlc_csv",
    "read_intraday_csv",
    "read_precomputed_csv",
    "read_vol_series_csv",
    "write_vol_series_csv",
    "make_synthetic_ohlc",
]

_GK_COEF = 2.0 * math.log(2.0) - 1.0


@dataclass(frozen=True)
class OhlcBar:
    """One day of open/high/low/close prices."""

    date: _dt.date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(p > 0.0 and math.isfinite(p) for p in prices):
            raise DataError(f"{self.date}: prices must be positive and finite, got {prices}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise DataError(
                f"{self.date}: need low <= min(open, close) <= max(open, close) <= high"
            )


@dataclass(frozen=True)
class IntradayReturns:
    """One day of intraday log returns."""

    date: _dt.date
    returns: tuple

    def __post_init__(self):
        object.__setattr__(self, "returns", tuple(float(r) for r in self.returns))
        if any(not math.isfinite(r) for r in self.returns):
            raise DataError(f"{self.date}: returns must be finite")


def garman_klass(bar: OhlcBar) -> float:
    """Range-based daily variance proxy.

    0.5 ln(high/low)^2 - (2 ln 2 - 1) ln(close/open)^2.  Can go negative
    when the open-to-close move is large relative to the range; that is left
    to the cleaning policy downstream.
    """
    hl = math.log(bar.high / bar.low)
    co = math.log(bar.close / bar.open)
    return 0.5 * hl * hl - _GK_COEF * co * co


def realized_variance(day: IntradayReturns) -> float:
    """Sum of squared intraday returns."""
    if len(day.returns) < 1:
        raise DataError(f"{day.date}: realized variance needs at least one return")
    return float(sum(r * r for r in day.returns))


def bipower_variation(day: IntradayReturns) -> float:
    """Jump-robust variance proxy (pi/2) sum |r_i| |r_{i+1}|."""
    if len(day.returns) < 2:
        raise DataError(f"{day.date}: bipower variation needs at least two returns")
    r = np.abs(np.asarray(day.returns))
    return float(math.pi / 2.0 * np.dot(r[:-1], r[1:]))


def to_vol_series(daily_variances, cleaning: str = "drop", eps: float = 1e-12,
                  provenance: dict | None = None) -> VolSeries:
    """Daily variance proxies (date-ordered) to a strictly positive VolSeries.

    cleaning "drop" removes non-positive or missing values and records their
    indices; "floor" replaces them by eps.  More than 20% dropped raises a
    warning flag in the provenance, an empty result is an error.
    """
    if cleaning not in ("drop", "floor"):
        raise DataError(f"unknown cleaning policy {cleaning!r}")
    if not eps > 0.0:
        raise DataError(f"floor epsilon must be positive, got {eps}")
    raw = np.asarray(list(daily_variances), dtype=float)
    bad = ~(np.isfinite(raw) & (raw > 0.0))
    dropped = []
    if cleaning == "floor":
        values = np.where(bad, eps, raw)
    else:
        dropped = np.flatnonzero(bad).tolist()
        values = raw[~bad]
    if values.size < 2:
        raise DataError(f"cleaning left {values.size} values; need at least 2")
    meta = dict(provenance or {})
    meta.update(
        cleaning=cleaning,
        eps=eps if cleaning == "floor" else None,
        input_count=int(raw.size),
        bad_count=int(bad.sum()),
        dropped_indices=dropped,
        high_drop_warning=bool(bad.sum() > 0.2 * raw.size),
    )
    return VolSeries(delta=1.0, values=values, meta=meta)


def _open_csv(path, expected_fields: tuple):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or tuple(reader.fieldnames) != expected_fields:
        fh.close()
        raise DataError(
            f"{path}: expected header {','.join(expected_fields)}, "
            f"got {','.join(reader.fieldnames or ['<empty>'])}"
        )
    return fh, reader


def read_ohlc_csv(path) -> tuple:
    """Read an OHLC file; returns (bars, rejects) with per-row reject reasons."""
    fh, reader = _open_csv(path, ("date", "open", "high", "low", "close"))
    bars = []
    rejects = []
    with fh:
        for lineno, row in enumerate(reader, start=2):
            try:
                bar = OhlcBar(
                    date=_dt.date.fromisoformat(row["date"]),
                    open=float(row["open"]),
                    high=float(row["high"]),
                    low=float(row["low"]),
                    close=float(row["close"]),
                )
            except (DataError, ValueError, TypeError) as exc:
                rejects.append((lineno, str(exc)))
                continue
            bars.append(bar)
    if not bars:
        raise DataError(f"{path}: no valid OHLC rows")
    return bars, rejects


def read_intraday_csv(path) -> list:
    """Read date,return rows grouped by date into IntradayReturns, file order."""
    fh, reader = _open_csv(path, ("date", "return"))
    grouped: dict = {}
    with fh:
        for lineno, row in enumerate(reader, start=2):
            try:
                date = _dt.date.fromisoformat(row["date"])
                value = float(row["return"])
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            grouped.setdefault(date, []).append(value)
    if not grouped:
        raise DataError(f"{path}: no intraday rows")
    return [IntradayReturns(date=d, returns=tuple(rs)) for d, rs in grouped.items()]


def read_precomputed_csv(path) -> tuple:
    """Read date,rv,bv rows; returns (dates, rv_array, bv_array) in file order."""
    fh, reader = _open_csv(path, ("date", "rv", "bv"))
    dates, rvs, bvs = [], [], []
    with fh:
        for lineno, row in enumerate(reader, start=2):
            try:
                dates.append(_dt.date.fromisoformat(row["date"]))
                rvs.append(float(row["rv"]))
                bvs.append(float(row["bv"]))
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not dates:
        raise DataError(f"{path}: no precomputed rows")
    return dates, np.asarray(rvs), np.asarray(bvs)


def write_vol_series_csv(series: VolSeries, path) -> str:
    """Write index,value rows plus a JSON provenance sidecar; returns sidecar path."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(series.values):
            writer.writerow([i, repr(float(v))])
    sidecar = str(path) + ".json"
    with open(sidecar, "w") as fh:
        json.dump({"delta": series.delta, "count": len(series), "meta": _json_safe(series.meta)},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def read_vol_series_csv(path) -> VolSeries:
    """Read an index,value file back into a VolSeries (delta from sidecar if present)."""
    fh, reader = _open_csv(path, ("index", "value"))
    values = []
    with fh:
        for lineno, row in enumerate(reader, start=2):
            try:
                values.append(float(row["value"]))
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    delta = 1.0
    meta = {"source": str(path)}
    try:
        with open(str(path) + ".json") as sidecar:
            info = json.load(sidecar)
        delta = float(info.get("delta", 1.0))
        meta.update(info.get("meta", {}))
    except FileNotFoundError:
        pass
    try:
        return VolSeries(delta=delta, values=np.asarray(values), meta=meta)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def make_synthetic_ohlc(cfg: SimConfig, s0: float = 100.0) -> list:
    """Synthetic daily OHLC bars from a simulated price path.

    One bar per coarse cell of cfg (delta = one day); high/low scan the fine
    grid including both cell endpoints, so the bar invariants hold exactly.
    Weekday calendars are not modeled; dates are sequential from 2000-01-03.
    """
    if not cfg.emit_price:
        raise ValueError("make_synthetic_ohlc requires emit_price=True")
    if cfg.params.is_mrm:
        ell = cfg.ell if cfg.ell is not None else cfg.fine_dt
        omega = sample_omega_mrm(
            cfg.params.lambda2, cfg.params.T, ell, (cfg.n_fine, cfg.fine_dt),
            seed=cfg.seed, sigma2=cfg.params.sigma2,
        )
    else:
        omega = sample_omega(cfg)
    price_path, _ = build_price_and_rv(omega, cfg)
    log_price = np.concatenate([[0.0], np.cumsum(price_path.log_returns)])
    prices = s0 * np.exp(log_price)
    start = _dt.date(2000, 1, 3)
    bars = []
    for day in range(cfg.n_cells):
        chunk = prices[day * cfg.subdivisions : (day + 1) * cfg.subdivisions + 1]
        bars.append(
            OhlcBar(
                date=start + _dt.timedelta(days=day),
                open=float(chunk[0]),
                high=float(chunk.max()),
                low=float(chunk.min()),
                close=float(chunk[-1]),
            )
        )
    return bars
