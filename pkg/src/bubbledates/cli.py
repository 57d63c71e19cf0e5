"""Command-line interface: ``bubbledates simulate | estimate | mc``.

Exit codes: 0 success, 2 usage or data error, 3 estimation finished with
at least one unavailable date (the result is still written).
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .adaptive import KernelSpec, adaptive_estimate
from .estimators import BreakEstimates
from .experiments import TARGETS, McConfig, histogram_rows, run_experiment
from .model import (
    Constant,
    DgpParams,
    OneBreak,
    Piecewise,
    generate_shocks,
    local_to_unity,
    simulate,
    volatility_path,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNAVAILABLE = 3

MIN_OBS = 40


class DataError(ValueError):
    """Input data cannot be used as given."""


class UsageError(ValueError):
    pass


# -- parsing helpers ---------------------------------------------------------

def parse_floats(text: str, n: Optional[int] = None) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} comma-separated values, got {text!r}")
    return vals


def parse_volatility(text: str):
    """``constant:S``, ``onebreak:S0,S1,TAU`` or ``piecewise:F:S,F:S,...``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "constant":
            return Constant(float(rest))
        if kind == "onebreak":
            s0, s1, tau = parse_floats(rest, 3)
            return OneBreak(s0, s1, tau)
        if kind == "piecewise":
            knots = []
            for item in rest.split(","):
                f, s = item.split(":")
                knots.append((float(f), float(s)))
            return Piecewise(tuple(knots))
    except ValueError as exc:
        raise UsageError(f"bad volatility {text!r}: {exc}") from None
    raise UsageError(f"unknown volatility kind {kind!r} in {text!r}")


def parse_kernel(kind: str, bandwidth: str) -> KernelSpec:
    bw = bandwidth
    if bw not in ("fixed_power", "cv"):
        try:
            bw = float(bw)
        except ValueError:
            raise UsageError(f"bandwidth must be a number, 'fixed_power' or 'cv', got {bandwidth!r}") from None
    try:
        return KernelSpec(kind=kind, bandwidth=bw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _fmt(x: float) -> str:
    return repr(float(x))


# -- price tables --------------------------------------------------------------

@dataclass
class PriceTable:
    """Dated observations with strictly increasing dates."""

    dates: list
    values: np.ndarray

    def __post_init__(self):
        for a, b in zip(self.dates, self.dates[1:]):
            if not b > a:
                raise DataError(f"dates not strictly increasing at {b.isoformat()}")


def slice_year(table: PriceTable, year: int) -> np.ndarray:
    """Values dated January 1 to December 31 of ``year``.

    Leap years give 366 values and a warning; missing days raise
    :class:`DataError` naming them.
    """
    first, last = dt.date(year, 1, 1), dt.date(year, 12, 31)
    by_date = {d: v for d, v in zip(table.dates, table.values)}
    ndays = (last - first).days + 1
    wanted = [first + dt.timedelta(days=i) for i in range(ndays)]
    missing = [d for d in wanted if d not in by_date]
    if missing:
        shown = ", ".join(d.isoformat() for d in missing[:10])
        more = f" and {len(missing) - 10} more" if len(missing) > 10 else ""
        raise DataError(f"{len(missing)} missing date(s) in {year}: {shown}{more}")
    if ndays == 366:
        warnings.warn(f"{year} is a leap year; using 366 observations", stacklevel=2)
    return np.array([by_date[d] for d in wanted], dtype=float)


def read_input_csv(path) -> tuple[Optional[PriceTable], np.ndarray, list]:
    """Read ``date,value`` or ``t,value`` (``y`` accepted for ``value``).

    Returns ``(table_or_None, values, labels)``.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
            fields = rows[0].keys() if rows else []
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    vcol = "value" if "value" in fields else "y" if "y" in fields else None
    if vcol is None:
        raise DataError(f"{path}: need a 'value' column, got {list(fields)}")
    try:
        values = np.array([float(r[vcol]) for r in rows])
    except (TypeError, ValueError):
        raise DataError(f"{path}: non-numeric entry in column {vcol!r}") from None
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite values")
    if "date" in fields:
        try:
            dates = [dt.date.fromisoformat(r["date"].strip()) for r in rows]
        except (AttributeError, ValueError):
            raise DataError(f"{path}: dates must be ISO-8601 (YYYY-MM-DD)") from None
        table = PriceTable(dates, values)
        return table, values, [d.isoformat() for d in dates]
    if "t" in fields:
        try:
            labels = [int(r["t"]) for r in rows]
        except (TypeError, ValueError):
            raise DataError(f"{path}: column 't' must hold integers") from None
        return None, values, labels
    raise DataError(f"{path}: need a 'date' or 't' column, got {list(fields)}")


# -- commands ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.T is None:
        raise UsageError("--T is required")
    T = args.T
    if (args.phi_a is None) != (args.phi_b is None):
        raise UsageError("give both --phi-a and --phi-b, or use --ca/--cb")
    if args.phi_a is not None:
        phi_a, phi_b = args.phi_a, args.phi_b
    else:
        try:
            phi_a, phi_b = local_to_unity(args.ca, args.cb, T)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    profile = parse_volatility(args.vol)
    try:
        if args.breaks:
            k_e, k_c, k_r = (int(v) for v in parse_floats(args.breaks, 3))
            params = DgpParams(
                T=T, k_e=k_e, k_c=k_c, k_r=k_r, phi_a=phi_a, phi_b=phi_b,
                c0=args.drift0 * T, c1=args.drift1 * T, y0=args.y0,
            )
        else:
            params = DgpParams.from_fractions(
                T, parse_floats(args.frac, 3), phi_a, phi_b,
                drift0=args.drift0, drift1=args.drift1, y0=args.y0,
            )
        y = simulate(params, generate_shocks(profile, T, args.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sigma = volatility_path(profile, T)
    out = Path(args.output)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y", "sigma"])
        w.writerow([0, _fmt(y[0]), ""])
        for t in range(1, T + 1):
            w.writerow([t, _fmt(y[t]), _fmt(sigma[t - 1])])
    print(f"wrote {T + 1} rows to {out}", file=sys.stderr)
    return EXIT_OK


def _result_dict(est: BreakEstimates, labels, common: dict) -> dict:
    d = {
        "method": est.method,
        "k_e": est.k_e,
        "k_c": est.k_c,
        "k_r": est.k_r,
        "tau_e": est.tau_e,
        "tau_c": est.tau_c,
        "tau_r": est.tau_r,
        "available": est.available,
    }
    if labels is not None:
        for name, k in zip(("e", "c", "r"), est.dates()):
            d[f"date_{name}"] = None if k is None else labels[k]
    d.update(common)
    return d


def cmd_estimate(args) -> int:
    kernel = parse_kernel(args.kernel, args.bandwidth)
    if not 0 < args.trim < 0.5:
        raise UsageError(f"--trim must lie in (0, 0.5), got {args.trim}")
    table, values, labels = read_input_csv(args.input)
    if args.year is not None:
        if table is None:
            raise UsageError("--year needs a dated (date,value) input")
        values = slice_year(table, args.year)
        first = dt.date(args.year, 1, 1)
        labels = [(first + dt.timedelta(days=i)).isoformat() for i in range(len(values))]
    if len(values) < MIN_OBS:
        raise DataError(f"window has {len(values)} observations; need at least {MIN_OBS}")
    transform = "log" if args.log else "raw"
    if args.log:
        if np.any(values <= 0):
            raise DataError("--log needs strictly positive values")
        values = np.log(values)

    res = adaptive_estimate(values, trim=args.trim, kernel=kernel)
    bandwidth = res.variance.bandwidth if res.variance is not None else None
    common = {
        "bandwidth": bandwidth,
        "kernel": kernel.kind,
        "trim": args.trim,
        "transform": transform,
        "seed": args.seed,
    }
    date_labels = labels if table is not None else None
    doc = {
        "input": str(args.input),
        "n_obs": int(len(values)),
        "T": int(len(values) - 1),
        "year": args.year,
        "results": [
            _result_dict(res.ols, date_labels, common),
            _result_dict(res.wls, date_labels, common),
        ],
        "variance": None,
        "failure": res.failure,
    }
    if res.variance is not None:
        s2 = res.variance.sigma2
        doc["variance"] = {
            "min": float(s2.min()),
            "max": float(s2.max()),
            "mean": float(s2.mean()),
            "median": float(np.median(s2)),
            "floor_applied": res.variance.floor_applied,
        }
    text = json.dumps(doc, indent=2)
    print(text)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    if res.failure:
        print(f"volatility correction failed: {res.failure}", file=sys.stderr)
    if not (res.ols.complete and res.wls.complete):
        return EXIT_UNAVAILABLE
    return EXIT_OK


# keys accepted in mc config files; values use the same syntax as the flags
MC_KEYS = {
    "T": int, "reps": int, "ca": float, "cb": float, "frac": str, "y0": float,
    "drift0": float, "drift1": float, "vol": str, "seed": int, "trim": float,
    "kernel": str, "bandwidth": str, "window": int, "bin_width": float,
    "workers": int,
}
MC_DEFAULTS = {
    "T": 400, "reps": 5000, "ca": 4.0, "cb": 6.0, "frac": "0.4,0.6,0.7",
    "y0": 0.0, "drift0": 1 / 800, "drift1": 1 / 800, "vol": "constant:1",
    "seed": 0, "trim": 0.05, "kernel": "gaussian", "bandwidth": "fixed_power",
    "window": 0, "bin_width": 0.01, "workers": 1,
}


def read_mc_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in MC_KEYS:
            raise UsageError(f"{path}:{n}: expected 'key = value' with key in {sorted(MC_KEYS)}")
        try:
            out[key] = MC_KEYS[key](value.strip())
        except ValueError:
            raise UsageError(f"{path}:{n}: bad value for {key}: {value.strip()!r}") from None
    return out


def build_mc_config(args) -> tuple[McConfig, int]:
    settings = dict(MC_DEFAULTS)
    if args.config:
        settings.update(read_mc_config(args.config))
    for key in MC_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    try:
        cfg = McConfig(
            T=settings["T"],
            reps=settings["reps"],
            c_a=settings["ca"],
            c_b=settings["cb"],
            fractions=parse_floats(settings["frac"], 3),
            y0=settings["y0"],
            drift0=settings["drift0"],
            drift1=settings["drift1"],
            volatility=parse_volatility(settings["vol"]),
            base_seed=settings["seed"],
            trim=settings["trim"],
            kernel=parse_kernel(settings["kernel"], str(settings["bandwidth"])),
            detection_window=settings["window"],
            bin_width=settings["bin_width"],
        )
    except ValueError as exc:
        raise UsageError(f"invalid experiment config: {exc}") from None
    return cfg, settings["workers"]


def cmd_mc(args) -> int:
    cfg, workers = build_mc_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def report(done):
        if args.verbose:
            print(f"{done}/{cfg.reps} replications", file=sys.stderr)

    result = run_experiment(cfg, workers=workers, progress=report)
    for target in TARGETS:
        with open(out_dir / f"hist_{target}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lower", "bin_upper", "count_ols", "count_wls"])
            for lo, hi, c_ols, c_wls in histogram_rows(result, target):
                w.writerow([f"{lo:.6f}", f"{hi:.6f}", c_ols, c_wls])
    summary = {
        "config": {
            "T": cfg.T, "reps": cfg.reps, "c_a": cfg.c_a, "c_b": cfg.c_b,
            "fractions": list(cfg.fractions), "y0": cfg.y0,
            "drift0": cfg.drift0, "drift1": cfg.drift1,
            "volatility": _describe_volatility(cfg), "base_seed": cfg.base_seed,
            "trim": cfg.trim, "kernel": cfg.kernel.kind,
            "bandwidth": cfg.kernel.bandwidth,
            "detection_window": cfg.detection_window, "bin_width": cfg.bin_width,
        },
        "true_dates": cfg.true_dates,
        "ols": result.summary_dict()["OLS"],
        "wls": result.summary_dict()["WLS"],
        "runtime_seconds": result.runtime,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    s = summary
    print(
        f"k_c correct detection: OLS {s['ols']['k_c']['correct_freq']:.4f}  "
        f"WLS {s['wls']['k_c']['correct_freq']:.4f}  ({cfg.reps} reps, "
        f"{result.runtime:.1f}s)"
    )
    return EXIT_OK


def _describe_volatility(cfg: McConfig) -> str:
    v = cfg.volatility
    if isinstance(v, Constant):
        return f"constant:{v.sigma}"
    if isinstance(v, OneBreak):
        return f"onebreak:{v.sigma0},{v.sigma1},{v.tau}"
    return "piecewise:" + ",".join(f"{f}:{s}" for f, s in v.knots)


# -- entry point ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bubbledates", description="Date explosive bubbles with OLS and volatility-corrected WLS.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a four-regime bubble path to CSV (t,y,sigma)")
    s.add_argument("--T", type=int, help="sample size (required)")
    s.add_argument("--ca", type=float, default=4.0, help="explosive root is 1 + ca/T (default 4)")
    s.add_argument("--cb", type=float, default=6.0, help="collapse root is 1 - cb/T (default 6)")
    s.add_argument("--phi-a", type=float, help="explosive root, overrides --ca")
    s.add_argument("--phi-b", type=float, help="collapse root, overrides --cb")
    s.add_argument("--frac", default="0.4,0.6,0.7", help="break fractions e,c,r (default 0.4,0.6,0.7)")
    s.add_argument("--breaks", help="break dates k_e,k_c,k_r; overrides --frac")
    s.add_argument("--vol", default="constant:1",
                   help="constant:S | onebreak:S0,S1,TAU | piecewise:F:S,F:S,... (default constant:1)")
    s.add_argument("--y0", type=float, default=0.0, help="initial value (default 0)")
    s.add_argument("--drift0", type=float, default=1 / 800, help="drift before emergence (default 1/800)")
    s.add_argument("--drift1", type=float, default=1 / 800, help="drift after recovery (default 1/800)")
    s.add_argument("--seed", type=int, default=0, help="64-bit shock seed (default 0)")
    s.add_argument("-o", "--output", required=True, help="output CSV path")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate bubble dates from a CSV (date,value or t,value)")
    e.add_argument("input", help="input CSV")
    e.add_argument("-o", "--output", help="also write the JSON result here")
    e.add_argument("--year", type=int, help="use January 1 to December 31 of this year only")
    e.add_argument("--log", action="store_true", help="estimate on log values")
    e.add_argument("--trim", type=float, default=0.05, help="edge trimming fraction (default 0.05)")
    e.add_argument("--kernel", default="gaussian", choices=["gaussian", "epanechnikov"])
    e.add_argument("--bandwidth", default="fixed_power",
                   help="number b, 'fixed_power' (T^-1/5, default) or 'cv'")
    e.add_argument("--seed", type=int, help="seed of a synthetic input, recorded in the output")
    e.set_defaults(func=cmd_estimate)

    m = sub.add_parser("mc", help="run the Monte Carlo comparison of OLS and WLS dating")
    m.add_argument("--config", help="key = value file; flags override it")
    m.add_argument("--out-dir", required=True, help="directory for hist_*.csv and summary.json")
    m.add_argument("--T", type=int)
    m.add_argument("--reps", type=int, help="replications (default 5000; 50000 for full scale)")
    m.add_argument("--ca", type=float)
    m.add_argument("--cb", type=float)
    m.add_argument("--frac")
    m.add_argument("--y0", type=float, help="initial value (default 0)")
    m.add_argument("--drift0", type=float)
    m.add_argument("--drift1", type=float)
    m.add_argument("--vol", help="volatility profile, as for simulate")
    m.add_argument("--seed", type=int, help="base seed")
    m.add_argument("--trim", type=float)
    m.add_argument("--kernel", choices=["gaussian", "epanechnikov"])
    m.add_argument("--bandwidth")
    m.add_argument("--window", type=int, help="correct-detection tolerance in dates (default 0)")
    m.add_argument("--bin-width", dest="bin_width", type=float)
    m.add_argument("--workers", type=int, help="worker processes (default 1)")
    m.add_argument("-v", "--verbose", action="store_true")
    m.set_defaults(func=cmd_mc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DataError) as exc:
        print(f"bubbledates {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
