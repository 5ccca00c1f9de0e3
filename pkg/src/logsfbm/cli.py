"""Command-line surface: simulate, theory curves, estimation, Monte Carlo, ingestion.

Every command writes CSV/JSON outputs plus a manifest holding the exact
flags, seed, and code version needed to reproduce the data files
byte-for-byte.  Exit codes: 0 success, 2 usage error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import DataError, NumericalError
from . import kernels
from .kernels import ModelParams, scaling_bias
from .simulate import SimConfig, generate
from .estimators import scaling_estimate_H
from .gmm import GMM_LNM, GMM_M, GmmSpec, fit
from . import dataio

THREADS_ENV = "LOGSFBM_THREADS"
_BYTES_PER_CIRCLE_POINT = 56  # normals + complex spectrum + FFT output + cache


def _utcnow() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _write_manifest(base: str, command: str, args: argparse.Namespace,
                    outputs: list, started: str) -> str:
    path = base + ".manifest.json"
    params = {k: v for k, v in vars(args).items() if k != "func" and not k.startswith("_")}
    payload = {
        "command": command,
        "params": dataio._json_safe(params),
        "seed": params.get("seed"),
        "version": __version__,
        "started_utc": started,
        "finished_utc": _utcnow(),
        "outputs": [str(p) for p in outputs],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_xy_csv(path: str, xs, ys, header=("x", "y")):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for x, y in zip(xs, ys):
            writer.writerow([repr(float(x)), repr(float(y))])


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return 1


def _params_from_args(args) -> ModelParams:
    return ModelParams(H=args.H, lambda2=args.lambda2, T=args.T, sigma2=args.sigma2)


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> None:
    started = _utcnow()
    cfg = SimConfig(
        params=_params_from_args(args),
        L=args.L,
        delta=args.delta,
        subdivisions=args.subdivisions,
        seed=args.seed,
        emit_price=args.emit_price,
    )
    result = generate(cfg)
    outputs = []
    measure_path = args.out + ".csv"
    outputs.append(dataio.write_vol_series_csv(result.measure, measure_path))
    outputs.insert(0, measure_path)
    if args.emit_price:
        price_path = args.out + "_price.csv"
        with open(price_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "log_return"])
            for i, r in enumerate(result.price.log_returns):
                writer.writerow([i, repr(float(r))])
        outputs.append(price_path)
        rv_path = args.out + "_rv.csv"
        outputs.append(dataio.write_vol_series_csv(result.rv_proxy, rv_path))
        outputs.insert(-1, rv_path)
    _write_manifest(args.out, "simulate", args, outputs, started)


# ------------------------------------------------------------------ theory

def _tau_grid(args) -> np.ndarray:
    if args.tau_points < 2:
        raise ValueError("need at least 2 grid points")
    if not 0.0 < args.tau_min < args.tau_max:
        raise ValueError("need 0 < tau-min < tau-max")
    if args.linear_grid:
        return np.linspace(args.tau_min, args.tau_max, args.tau_points)
    return np.geomspace(args.tau_min, args.tau_max, args.tau_points)


def _theory_params(args) -> ModelParams:
    lambda2 = args.lambda2
    if lambda2 is None and args.nu2 is not None:
        lambda2 = args.H * (1.0 - 2.0 * args.H) * args.nu2
        if lambda2 <= 0.0:
            raise ValueError("nu2 parameterization needs H > 0")
    if lambda2 is None:
        raise ValueError("this curve needs --lambda2 (or --nu2 with H > 0)")
    return ModelParams(H=args.H, lambda2=lambda2, T=args.T, sigma2=args.sigma2)


def _nu2_from_args(args) -> float:
    if args.nu2 is not None:
        return args.nu2
    if args.lambda2 is not None:
        if args.H <= 0.0:
            raise ValueError("deriving nu2 from lambda2 needs H > 0")
        return args.lambda2 / (args.H * (1.0 - 2.0 * args.H))
    raise ValueError("this curve needs --nu2 or --lambda2")


def cmd_theory(args) -> None:
    started = _utcnow()
    outputs = []
    csv_path = args.out + ".csv"
    if args.curve == "gh":
        if args.z is not None:
            zs = np.asarray([args.z], dtype=float)
        else:
            zs = _tau_grid(args)
        ys = [kernels.g_H(args.H, float(z)) for z in zs]
        _write_xy_csv(csv_path, zs, ys, header=("z", "g_H"))
    elif args.curve == "bias":
        # every integer multiple of delta in [tau-min, tau-max], mirroring the
        # lag grid of the empirical scaling regression
        taus = np.arange(args.tau_min, args.tau_max + 0.5 * args.delta, args.delta)
        if taus.size < 2:
            raise ValueError("bias curve needs at least 2 lags in [tau-min, tau-max]")
        slope, intercept = scaling_bias(args.H, args.delta, taus)
        ys = [kernels.g_H(args.H, args.delta / float(t)) for t in taus]
        _write_xy_csv(csv_path, taus, ys, header=("tau", "g_H"))
        side = args.out + ".json"
        with open(side, "w") as fh:
            json.dump(
                {"B": slope, "intercept": intercept, "H_implied": args.H + 0.5 * slope},
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
        outputs.append(side)
    elif args.curve == "cm":
        p = _theory_params(args)
        taus = _tau_grid(args)
        ys = [kernels.corr_M(p, args.delta, float(t)) for t in taus]
        _write_xy_csv(csv_path, taus, ys, header=("tau", "corr_M"))
    elif args.curve == "clnm":
        p = _theory_params(args)
        taus = _tau_grid(args)
        ys = [kernels.cov_lnM(p, args.delta, float(t)) for t in taus]
        _write_xy_csv(csv_path, taus, ys, header=("tau", "cov_lnM"))
    elif args.curve == "mq":
        p = _theory_params(args)
        taus = _tau_grid(args)
        ys = [kernels.m_q(p, args.q, float(t), args.delta) for t in taus]
        _write_xy_csv(csv_path, taus, ys, header=("tau", "m_q"))
    elif args.curve == "dtilde":
        nu2 = _nu2_from_args(args)
        if args.H <= 0.0:
            raise ValueError("dtilde needs H > 0")
        p = ModelParams(H=args.H, lambda2=args.H * (1.0 - 2.0 * args.H) * nu2, T=args.T)
        ns = np.arange(1, args.max_lag + 1)
        ys = [kernels.dtilde_lnM(p, int(n)) for n in ns]
        _write_xy_csv(csv_path, ns, ys, header=("n", "dtilde"))
    elif args.curve == "rtilde":
        p = _theory_params(args)
        ns = np.arange(0, args.max_lag + 1)
        ys = [kernels.rtilde_M(p, int(n)) for n in ns]
        _write_xy_csv(csv_path, ns, ys, header=("n", "rtilde"))
    else:
        raise ValueError(f"unknown curve {args.curve!r}")
    outputs.insert(0, csv_path)
    _write_manifest(args.out, "theory", args, outputs, started)


# ---------------------------------------------------------------- estimate

def _parse_lags(text):
    if text is None:
        return None
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"bad lag list {text!r}; expected comma-separated integers")


def cmd_estimate(args) -> None:
    started = _utcnow()
    series = dataio.read_vol_series_csv(args.input)
    if args.method in ("gmm-lnm", "gmm-m"):
        method = GMM_LNM if args.method == "gmm-lnm" else GMM_M
        spec = GmmSpec(method=method, lags=_parse_lags(args.lags), hac_lag=args.hac_lag)
        result = fit(series, spec).to_json_dict()
    else:
        n = len(series)
        k_max = min(args.tau_max, (n - 2))
        ks = sorted({int(round(v)) for v in np.geomspace(args.tau_min, k_max, args.tau_points)})
        taus = [series.delta * k for k in ks if k >= 1]
        sfit = scaling_estimate_H(series, args.q, taus)
        result = {
            "method": "scaling",
            "H": sfit.H_hat,
            "q": sfit.q,
            "r2": sfit.r2,
            "intercept": sfit.intercept,
            "taus": list(map(float, sfit.taus)),
            "m_hat": list(map(float, sfit.m_hat)),
        }
    result["input"] = str(args.input)
    out_path = args.out + ".json"
    with open(out_path, "w") as fh:
        json.dump(dataio._json_safe(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(args.out, "estimate", args, [out_path], started)


# -------------------------------------------------------------- montecarlo

def _rep_seed(base_seed: int, cell: int, rep: int) -> int:
    return int(np.random.SeedSequence([base_seed, cell, rep]).generate_state(1)[0])


def _mc_one(params: ModelParams, args, seed: int):
    cfg = SimConfig(
        params=params,
        L=args.L,
        delta=args.delta,
        subdivisions=args.subdivisions,
        seed=seed,
        emit_price=(args.proxy == "rv"),
    )
    result = generate(cfg)
    series = result.rv_proxy if args.proxy == "rv" else result.measure
    method = GMM_LNM if args.method == "gmm-lnm" else GMM_M
    spec = GmmSpec(method=method, hac_lag=args.hac_lag)
    return fit(series, spec)


def _projected_bytes(args, threads: int) -> int:
    n_fine = int(round(args.L / args.delta)) * args.subdivisions
    dt = args.delta / args.subdivisions
    half = max(n_fine, int(math.ceil(args.T / dt)))
    circle = 2 * (1 << max(int(half - 1).bit_length(), 1))
    return circle * _BYTES_PER_CIRCLE_POINT * threads


def cmd_montecarlo(args) -> None:
    started = _utcnow()
    threads = args.threads if args.threads is not None else _default_threads()
    projected = _projected_bytes(args, threads)
    cap = int(args.memory_cap_gb * 2**30)
    if projected > cap:
        raise ValueError(
            f"projected working set {projected / 2**30:.1f} GiB exceeds the "
            f"{args.memory_cap_gb} GiB cap; lower --threads, the grid size, or raise --memory-cap-gb"
        )
    h_values = [float(v) for v in args.H_grid.split(",")]
    l2_values = [float(v) for v in args.lambda2_grid.split(",")]
    cells = [(h, l2) for h in h_values for l2 in l2_values]
    rows = []
    for idx, (h, l2) in enumerate(cells):
        t0 = time.monotonic()
        params = ModelParams(H=h, lambda2=l2, T=args.T, sigma2=args.sigma2)
        seeds = [_rep_seed(args.seed, idx, r) for r in range(args.reps)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                fits = list(pool.map(lambda s: _mc_one(params, args, s), seeds))
        else:
            fits = [_mc_one(params, args, s) for s in seeds]
        h_hats = np.array([f.H_hat for f in fits])
        l2_hats = np.array([f.lambda2_hat for f in fits])
        nu2_hats = np.array([f.nu2_hat for f in fits])
        rms = float(np.sqrt(np.mean((h_hats - h) ** 2)))
        sd = (lambda a: repr(float(np.std(a, ddof=1))) if args.reps > 1 else "")
        rows.append([
            repr(h), repr(l2), args.reps,
            repr(float(h_hats.mean())), sd(h_hats),
            repr(float(l2_hats.mean())), sd(l2_hats),
            repr(float(nu2_hats.mean())), sd(nu2_hats),
            repr(rms),
        ])
        if args.progress:
            print(
                f"cell {idx + 1}/{len(cells)} H={h} lambda2={l2}: "
                f"{time.monotonic() - t0:.1f}s",
                file=sys.stderr,
            )
    out_path = args.out + ".csv"
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "H", "lambda2", "reps",
            "mean_H_hat", "sd_H_hat",
            "mean_lambda2_hat", "sd_lambda2_hat",
            "mean_nu2_hat", "sd_nu2_hat",
            "rms_H_error",
        ])
        writer.writerows(rows)
    _write_manifest(args.out, "montecarlo", args, [out_path], started)


# ------------------------------------------------------------------ ingest

def cmd_ingest(args) -> None:
    started = _utcnow()
    provenance = {"estimator": args.estimator}
    rejects = []
    if args.ohlc:
        if args.estimator != "gk":
            raise ValueError("OHLC input supports only the gk estimator")
        bars, rejects = dataio.read_ohlc_csv(args.ohlc)
        variances = [dataio.garman_klass(b) for b in bars]
        provenance["source"] = str(args.ohlc)
    else:
        if args.estimator == "gk":
            raise ValueError("intraday input supports rv or bv, not gk")
        try:
            with open(args.intraday, newline="") as fh:
                header = fh.readline().strip()
        except OSError as exc:
            raise DataError(f"{args.intraday}: {exc}") from exc
        if header == "date,rv,bv":
            _, rv, bv = dataio.read_precomputed_csv(args.intraday)
            variances = list(rv if args.estimator == "rv" else bv)
        else:
            days = dataio.read_intraday_csv(args.intraday)
            func = dataio.realized_variance if args.estimator == "rv" else dataio.bipower_variation
            variances = [func(d) for d in days]
        provenance["source"] = str(args.intraday)
    if rejects:
        provenance["rejected_rows"] = [[line, reason] for line, reason in rejects]
        print(f"rejected {len(rejects)} rows (details in sidecar)", file=sys.stderr)
    series = dataio.to_vol_series(
        variances, cleaning=args.cleaning, eps=args.eps, provenance=provenance
    )
    out_path = args.out + ".csv"
    sidecar = dataio.write_vol_series_csv(series, out_path)
    _write_manifest(args.out, "ingest", args, [out_path, sidecar], started)


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logsfbm",
        description="Log S-fBM volatility: simulation, theory curves, and estimation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample one path and write its series")
    sim.add_argument("--H", type=float, required=True, help="roughness exponent in [0, 1/2)")
    sim.add_argument("--lambda2", type=float, required=True, help="intermittency coefficient")
    sim.add_argument("--T", type=float, required=True, help="decorrelation scale of the log volatility")
    sim.add_argument("--L", type=float, required=True, help="observation length in time units")
    sim.add_argument("--delta", type=float, default=1.0, help="coarse cell size (default 1)")
    sim.add_argument("--subdivisions", type=int, default=32,
                     help="fine sub-steps per cell (default 32)")
    sim.add_argument("--sigma2", type=float, default=1.0, help="mean variance rate (default 1)")
    sim.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    sim.add_argument("--emit-price", action="store_true",
                     help="also write the price increments and realized-variance proxy")
    sim.add_argument("--out", required=True, help="output base path; .csv and sidecars appended")
    sim.set_defaults(func=cmd_simulate)

    theo = sub.add_parser("theory", help="evaluate analytic curves to CSV")
    theo.add_argument("--curve", required=True,
                      choices=["gh", "bias", "cm", "clnm", "dtilde", "rtilde", "mq"],
                      help="which analytic curve to evaluate")
    theo.add_argument("--H", type=float, required=True, help="roughness exponent in [0, 1/2)")
    theo.add_argument("--lambda2", type=float, help="intermittency coefficient")
    theo.add_argument("--nu2", type=float, help="log-volatility variance rate (alternative to --lambda2)")
    theo.add_argument("--T", type=float, default=1e6, help="decorrelation scale (default 1e6)")
    theo.add_argument("--sigma2", type=float, default=1.0, help="mean variance rate (default 1)")
    theo.add_argument("--delta", type=float, default=1.0, help="cell size (default 1)")
    theo.add_argument("--q", type=float, default=2.0, help="moment order for mq (default 2)")
    theo.add_argument("--z", type=float, help="single evaluation point for gh")
    theo.add_argument("--tau-min", type=float, default=1.0, help="smallest lag (default 1)")
    theo.add_argument("--tau-max", type=float, default=100.0, help="largest lag (default 100)")
    theo.add_argument("--tau-points", type=int, default=50, help="grid size (default 50)")
    theo.add_argument("--linear-grid", action="store_true",
                      help="linear instead of geometric lag spacing")
    theo.add_argument("--max-lag", type=int, default=64,
                      help="largest integer lag for dtilde/rtilde (default 64)")
    theo.add_argument("--out", required=True, help="output base path; .csv and sidecars appended")
    theo.set_defaults(func=cmd_theory)

    est = sub.add_parser("estimate", help="fit a series from CSV")
    est.add_argument("--input", required=True, help="series CSV with an index,value header")
    est.add_argument("--method", required=True, choices=["gmm-lnm", "gmm-m", "scaling"],
                     help="moment fit on log cells, raw cells, or the scaling regression")
    est.add_argument("--lags", help="comma-separated integer lags")
    est.add_argument("--hac-lag", type=int, help="Newey-West lag (default N^(1/3))")
    est.add_argument("--q", type=float, default=2.0, help="scaling moment order (default 2)")
    est.add_argument("--tau-min", type=float, default=1.0, help="scaling: smallest lag (default 1)")
    est.add_argument("--tau-max", type=int, default=200, help="scaling: largest lag (default 200)")
    est.add_argument("--tau-points", type=int, default=20, help="scaling: grid size (default 20)")
    est.add_argument("--out", required=True, help="output base path; .json and manifest appended")
    est.set_defaults(func=cmd_estimate)

    mc = sub.add_parser("montecarlo", help="grid of replications, summary CSV")
    mc.add_argument("--H-grid", required=True, help="comma-separated H values")
    mc.add_argument("--lambda2-grid", required=True, help="comma-separated lambda2 values")
    mc.add_argument("--reps", type=int, required=True, help="replications per grid cell")
    mc.add_argument("--L", type=float, required=True, help="observation length per replication")
    mc.add_argument("--T", type=float, required=True, help="decorrelation scale")
    mc.add_argument("--delta", type=float, default=1.0, help="coarse cell size (default 1)")
    mc.add_argument("--subdivisions", type=int, default=32,
                    help="fine sub-steps per cell (default 32)")
    mc.add_argument("--sigma2", type=float, default=1.0, help="mean variance rate (default 1)")
    mc.add_argument("--method", default="gmm-lnm", choices=["gmm-lnm", "gmm-m"],
                    help="moment fit variant (default gmm-lnm)")
    mc.add_argument("--proxy", default="rv", choices=["rv", "direct"],
                    help="fit the realized-variance proxy or the exact cell masses")
    mc.add_argument("--hac-lag", type=int, help="Newey-West lag (default N^(1/3))")
    mc.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    mc.add_argument("--threads", type=int,
                    help=f"worker threads (default ${THREADS_ENV} or 1)")
    mc.add_argument("--memory-cap-gb", type=float, default=6.0,
                    help="refuse runs projected to exceed this working set (default 6)")
    mc.add_argument("--progress", action="store_true", help="per-cell timing on stderr")
    mc.add_argument("--out", required=True, help="output base path; .csv and manifest appended")
    mc.set_defaults(func=cmd_montecarlo)

    ing = sub.add_parser("ingest", help="build a volatility series from market data")
    src = ing.add_mutually_exclusive_group(required=True)
    src.add_argument("--ohlc", help="CSV with date,open,high,low,close rows")
    src.add_argument("--intraday", help="CSV with date,return rows or precomputed date,rv,bv")
    ing.add_argument("--estimator", required=True, choices=["gk", "rv", "bv"],
                     help="daily variance proxy to construct")
    ing.add_argument("--cleaning", default="drop", choices=["drop", "floor"],
                     help="what to do with non-positive estimates (default drop)")
    ing.add_argument("--eps", type=float, default=1e-12,
                     help="floor value when --cleaning floor (default 1e-12)")
    ing.add_argument("--out", required=True, help="output base path; .csv and sidecars appended")
    ing.set_defaults(func=cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
        return 0
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
