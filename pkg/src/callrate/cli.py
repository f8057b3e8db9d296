"""``callrate`` command-line interface.

Subcommands: describe, fit, forecast, simulate, price, implied. Every output
starts with a ``#`` provenance row (package version, config hash, seed); JSON
output carries the same information under a ``"provenance"`` key instead.

Exit codes: 0 success, 1 data/units/estimation error, 2 usage error,
3 numerical nonexistence (e.g. no implied LTV).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from callrate import __version__, presets
from callrate.arbitrage import CallLoanTerms, bank_payoff, implied_ltv, implied_term
from callrate.autoregress import (
    fit_ar1,
    fit_ar2,
    forecast_ar1,
    forecast_ar2,
    impulse_response,
)
from callrate.descriptive import KdeSpec, acf, histogram, kde, pacf
from callrate.errors import CallRateError, NonexistenceError
from callrate.margin import (
    MarketIndexParams,
    cosimulate,
    derive_leverage_sde,
    derive_margin_sde,
    kelly_bet,
    monopoly_margin_rate,
    nash_margin_rate,
    simulate_leverage,
)
from callrate.ou import calibrate_from_ar1, ou_forecast, simulate_ou
from callrate.series import Units, load_csv, summarize, to_continuous

DEFAULT_SEED = 42


# ---------------------------------------------------------------- flag types

def _number(kind: str, ok, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value) or not ok(value):
        raise argparse.ArgumentTypeError(f"must be {kind}, got {text}")
    return value


def finite(text):
    return _number("finite", lambda v: True, text)


def positive(text):
    return _number("positive", lambda v: v > 0, text)


def nonneg(text):
    return _number("non-negative", lambda v: v >= 0, text)


def open_unit(text):
    return _number("in (0, 1)", lambda v: 0 < v < 1, text)


def rate(text):
    return _number("a unit-interval rate with |x| <= 1 (e.g. 0.0425, not 4.25)", lambda v: abs(v) <= 1, text)


def pos_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def nonneg_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


# ---------------------------------------------------------------- output

def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(v: Any) -> Any:
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


class Output:
    """Collects named sections and renders them in one format."""

    def __init__(self, fmt: str, provenance: str):
        self.fmt = fmt
        self.provenance = provenance
        self.sections: list[tuple[str, str, Any]] = []

    def record(self, name: str, data: dict) -> None:
        self.sections.append((name, "record", data))

    def table(self, name: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        self.sections.append((name, "table", (list(columns), [list(r) for r in rows])))

    def render_section(self, name: str, kind: str, data: Any) -> str:
        buf = io.StringIO()
        if self.fmt == "json":
            if kind == "record":
                body = _jsonable(data)
            else:
                cols, rows = data
                body = [_jsonable(dict(zip(cols, r))) for r in rows]
            json.dump({"provenance": self.provenance, name: body}, buf, indent=2, sort_keys=False)
            buf.write("\n")
            return buf.getvalue()
        buf.write(f"# {self.provenance}\n")
        if self.fmt == "csv":
            w = csv.writer(buf, lineterminator="\n")
            if kind == "record":
                w.writerow(["key", "value"])
                for k, v in data.items():
                    w.writerow([k, _fmt(v)])
            else:
                cols, rows = data
                w.writerow(cols)
                for r in rows:
                    w.writerow([_fmt(v) for v in r])
        else:
            buf.write(f"# {name}\n")
            if kind == "record":
                width = max((len(k) for k in data), default=0)
                for k, v in data.items():
                    txt = f"{v:.6g}" if isinstance(v, (float, np.floating)) else _fmt(v)
                    buf.write(f"{k:<{width}}  {txt}\n")
            else:
                cols, rows = data
                cells = [cols] + [
                    [f"{v:.6g}" if isinstance(v, (float, np.floating)) else _fmt(v) for v in r] for r in rows
                ]
                widths = [max(len(c[i]) for c in cells) for i in range(len(cols))]
                for c in cells:
                    buf.write("  ".join(s.rjust(wd) for s, wd in zip(c, widths)).rstrip() + "\n")
        return buf.getvalue()

    def render(self) -> str:
        if self.fmt == "json" and len(self.sections) > 1:
            merged: dict[str, Any] = {"provenance": self.provenance}
            for name, kind, data in self.sections:
                merged.update({k: v for k, v in json.loads(self.render_section(name, kind, data)).items()
                               if k != "provenance"})
            return json.dumps(merged, indent=2) + "\n"
        return "".join(self.render_section(*s) for s in self.sections)

    def write(self, path: str | None, outdir: str | None = None) -> None:
        if outdir is not None:
            Path(outdir).mkdir(parents=True, exist_ok=True)
            ext = {"csv": "csv", "json": "json", "text": "txt"}[self.fmt]
            for name, kind, data in self.sections:
                Path(outdir, f"{name}.{ext}").write_text(self.render_section(name, kind, data))
            return
        text = self.render()
        if path is None or path == "-":
            sys.stdout.write(text)
        else:
            Path(path).write_text(text)


def _config_hash(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in {"output", "outdir", "func"}}
    data = getattr(args, "data", None)
    if data:
        cfg["data_sha256"] = hashlib.sha256(Path(data).read_bytes()).hexdigest()
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _provenance(args: argparse.Namespace) -> str:
    seed = getattr(args, "seed", None)
    return f"callrate {__version__} config={_config_hash(args)} seed={seed if seed is not None else 'none'}"


# ---------------------------------------------------------------- helpers

def _series(args):
    units = Units.NOMINAL_PERCENT if args.units == "nominal" else Units.CONTINUOUS_PERCENT
    s = load_csv(args.data, units)
    return to_continuous(s) if units is Units.NOMINAL_PERCENT else s


def _ar1(args):
    return fit_ar1(_series(args)) if getattr(args, "data", None) else presets.CALL_RATE_AR1


def _ar2(args):
    return fit_ar2(_series(args)) if getattr(args, "data", None) else presets.CALL_RATE_AR2


def _market(args) -> MarketIndexParams:
    return MarketIndexParams(nu_s=args.nu_s, sigma_s=args.sigma_s)


def _to_cc(args, value: float) -> float:
    return math.log1p(value) if args.units == "nominal" else value


# ---------------------------------------------------------------- commands

def cmd_describe(args, out: Output) -> None:
    series = _series(args)
    out.record("summary", summarize(series).to_dict())
    h = histogram(series, args.bin_width, args.max_value)
    out.table("histogram", ["lower_edge", "count"], h.bins + [("overflow", h.overflow)])
    grid = np.round(np.arange(args.kde_min, args.kde_max + args.kde_step / 2, args.kde_step), 10)
    dens = kde(series, KdeSpec(args.bandwidth, grid))
    out.table("kde", ["y", "density"], dens.tolist())
    a = acf(series, args.acf_lags)
    p = pacf(series, args.pacf_lags)
    n = max(args.acf_lags, args.pacf_lags)
    rows = []
    for j in range(n + 1):
        rows.append([
            j,
            a.values[j] if j <= args.acf_lags else "",
            p.values[j] if j <= args.pacf_lags else "",
            a.band,
        ])
    out.table("acf", ["lag", "acf", "pacf", "band"], rows)


def cmd_fit(args, out: Output) -> None:
    if args.model == "ar1":
        fit = _ar1(args)
        rec = fit.to_dict()
        for name in ("alpha", "rho"):
            lo, hi = fit.conf_int(name)
            rec[f"{name}_ci_low"], rec[f"{name}_ci_high"] = lo, hi
        out.record("ar1", rec)
    elif args.model == "ar2":
        fit = _ar2(args)
        rec = fit.to_dict()
        for name in ("c", "phi1", "phi2"):
            lo, hi = fit.conf_int(name)
            rec[f"{name}_ci_low"], rec[f"{name}_ci_high"] = lo, hi
        out.record("ar2", rec)
    else:
        ou = calibrate_from_ar1(_ar1(args))
        out.record("ou", ou.per_year() if args.per_year else ou.to_dict())


def cmd_forecast(args, out: Output) -> None:
    if args.model == "ar1":
        rows = [(f.horizon, f.point, f.rmse) for f in forecast_ar1(_ar1(args), args.y0, args.horizon)]
    elif args.model == "ar2":
        if args.y1 is None:
            raise argparse.ArgumentTypeError("--y1 is required for --model ar2")
        rows = [(f.horizon, f.point, f.rmse) for f in forecast_ar2(_ar2(args), args.y0, args.y1, args.horizon)]
    else:
        ou = calibrate_from_ar1(_ar1(args))
        rows = [(t, *ou_forecast(ou, args.y0, t)) for t in range(1, args.horizon + 1)]
    out.table("forecast", ["t", "point", "rmse"], rows)
    if args.impulse:
        fit = _ar1(args) if args.model != "ar2" else _ar2(args)
        out.table("impulse", ["t", "response_bp"], impulse_response(fit, args.horizon))


def cmd_simulate(args, out: Output) -> None:
    ou = calibrate_from_ar1(_ar1(args))
    scale = 1.0 / 12.0 if args.per_year else 1.0
    rows = []
    for i in range(args.paths):
        seed = args.seed + i
        if args.process == "ou":
            path = simulate_ou(ou, args.y0, args.step, args.n_steps, seed, args.scheme)
            rows += [(i, seed, t * scale, v) for t, v in zip(path.times, path.values)]
        elif args.process == "leverage":
            sde = derive_leverage_sde(ou, _market(args))
            path = simulate_leverage(sde, args.b0, args.step, args.n_steps, seed, args.clamp)
            rows += [(i, seed, t * scale, v) for t, v in zip(path.times, path.values)]
        else:
            co = cosimulate(ou, _market(args), args.y0, args.step, args.n_steps, seed)
            rows += [
                (i, seed, t * scale, c, m, b)
                for t, c, m, b in zip(co["t"], co["call_rate"], co["margin_rate"], co["leverage"])
            ]
    t_col = "t_years" if args.per_year else "t_months"
    if args.process == "joint":
        out.table("paths", ["path", "seed", t_col, "call_rate", "margin_rate", "leverage"], rows)
    else:
        out.table("paths", ["path", "seed", t_col, "value"], rows)


def cmd_price(args, out: Output) -> None:
    if args.what == "margin":
        market = _market(args)
        call = args.call
        r_l = nash_margin_rate(call, market) if args.nash else monopoly_margin_rate(call, market)
        b, q = kelly_bet(r_l, market)
        rec = {
            "call_rate": call,
            "pricing": "nash" if args.nash else "monopoly",
            "margin_rate": r_l,
            "kelly_bet": b,
            "loans_per_equity": q,
            "pricing_constant": market.pricing_constant,
        }
        if args.sde:
            ou = calibrate_from_ar1(_ar1(args))
            m = derive_margin_sde(ou, market)
            lev = derive_leverage_sde(ou, market)
            rec.update({
                "sde_theta_per_month": m.theta,
                "margin_sde_mean": m.long_run_mean,
                "margin_sde_diffusion": m.diffusion,
                "leverage_sde_mean": lev.long_run_mean,
                "leverage_sde_diffusion": lev.diffusion,
                "leverage_stationary_std": lev.stationary_std,
            })
        out.record("margin", rec)
    else:
        terms = CallLoanTerms(
            r=_to_cc(args, args.r), call_rate=_to_cc(args, args.call), term=args.term, sigma=args.sigma,
            s0=args.s0, call_loan=args.d, margin_loan=args.D, margin_rate=_to_cc(args, args.margin_rate),
        )
        pi, event = bank_payoff(terms, args.s_t)
        out.record("bank_payoff", {"s_t": args.s_t, "strike": terms.strike, "profit": pi, "event": event.value})


def cmd_implied(args, out: Output) -> None:
    rho = _to_cc(args, args.call) - _to_cc(args, args.r)
    if not rho > 0:
        raise NonexistenceError(f"call rate must exceed the risk-free rate (premium {rho:g} <= 0)")
    if args.what == "ltv":
        sol = implied_ltv(rho, args.term, args.sigma)
        rec = {"risk_premium": rho, "term": args.term, "sigma": args.sigma, "ltv": sol.value}
    else:
        sol = implied_term(rho, args.ltv, args.sigma)
        rec = {"risk_premium": rho, "ltv": args.ltv, "sigma": args.sigma, "term": sol.value}
    d = sol.to_dict()
    d.pop("value")
    rec.update(d)
    out.record(f"implied_{args.what}", rec)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["csv", "json", "text"], default="csv")
    common.add_argument("-o", "--output", help="output file (default stdout)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="monthly CSV (date,value); omit to use the published estimates")
    data.add_argument("--units", choices=["nominal", "continuous"], default="nominal",
                      help="units of the CSV values (nominal rates are log-converted)")

    market = argparse.ArgumentParser(add_help=False)
    market.add_argument("--nu-s", type=rate, default=presets.STYLIZED_MARKET.nu_s)
    market.add_argument("--sigma-s", type=rate, default=presets.STYLIZED_MARKET.sigma_s)

    p = argparse.ArgumentParser(prog="callrate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"callrate {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("describe", parents=[common], help="summary, histogram, KDE, ACF/PACF")
    d.add_argument("data")
    d.add_argument("--units", choices=["nominal", "continuous"], default="nominal")
    d.add_argument("--bin-width", type=positive, default=0.25)
    d.add_argument("--max-value", type=finite, default=10.0)
    d.add_argument("--bandwidth", type=positive, default=0.502)
    d.add_argument("--kde-min", type=finite, default=0.0)
    d.add_argument("--kde-max", type=finite, default=12.0)
    d.add_argument("--kde-step", type=positive, default=0.01)
    d.add_argument("--acf-lags", type=nonneg_int, default=12)
    d.add_argument("--pacf-lags", type=nonneg_int, default=24)
    d.add_argument("--outdir", help="write one file per table into this directory")
    d.set_defaults(func=cmd_describe)

    f = sub.add_parser("fit", parents=[common, data], help="AR(1)/AR(2) OLS or OU calibration")
    f.add_argument("--model", choices=["ar1", "ar2", "ou"], default="ar1")
    f.add_argument("--per-year", action="store_true", help="report OU rates per year (display only)")
    f.set_defaults(func=cmd_fit)

    fc = sub.add_parser("forecast", parents=[common, data], help="conditional mean and RMSE by horizon")
    fc.add_argument("--model", choices=["ar1", "ar2", "ou"], default="ar1")
    fc.add_argument("--y0", type=finite, required=True, help="latest value (ar1/ou) or second-latest (ar2)")
    fc.add_argument("--y1", type=finite, help="latest value (ar2)")
    fc.add_argument("--horizon", type=pos_int, default=12)
    fc.add_argument("--impulse", action="store_true", help="also emit the 100bp impulse response")
    fc.set_defaults(func=cmd_forecast)

    s = sub.add_parser("simulate", parents=[common, data, market], help="exact-transition path simulation")
    s.add_argument("process", choices=["ou", "leverage", "joint"], nargs="?", default="ou")
    s.add_argument("--y0", type=finite, default=4.25, help="initial call rate, percent")
    s.add_argument("--b0", type=finite, default=2.0, help="initial leverage")
    s.add_argument("--step", type=positive, default=1 / 30, help="step in months")
    s.add_argument("--n-steps", type=pos_int, default=30)
    s.add_argument("--paths", type=pos_int, default=1)
    s.add_argument("--seed", type=nonneg_int, default=DEFAULT_SEED, help="path i uses seed + i")
    s.add_argument("--scheme", choices=["exact", "euler"], default="exact")
    s.add_argument("--clamp", action="store_true", help="clamp leverage at 0 (display)")
    s.add_argument("--per-year", action="store_true", help="report time in years")
    s.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("price", help="margin-rate pricing or bank payoff")
    psub = pr.add_subparsers(dest="what", required=True)
    pm = psub.add_parser("margin", parents=[common, data, market])
    pm.add_argument("--call", type=rate, required=True)
    pm.add_argument("--nash", action="store_true")
    pm.add_argument("--sde", action="store_true", help="also report the margin and leverage SDEs")
    pm.set_defaults(func=cmd_price)
    pb = psub.add_parser("bank-payoff", parents=[common])
    pb.add_argument("--s-t", type=nonneg, required=True)
    pb.add_argument("--s0", type=positive, required=True)
    pb.add_argument("--d", type=positive, required=True)
    pb.add_argument("--D", type=positive, required=True)
    pb.add_argument("--r", type=rate, required=True)
    pb.add_argument("--call", type=rate, required=True)
    pb.add_argument("--margin-rate", type=rate, required=True)
    pb.add_argument("--term", type=positive, required=True)
    pb.add_argument("--sigma", type=positive, default=presets.COLLATERAL_VOL)
    pb.add_argument("--units", choices=["nominal", "continuous"], default="continuous")
    pb.set_defaults(func=cmd_price)

    im = sub.add_parser("implied", help="implied loan-to-value or loan term")
    isub = im.add_subparsers(dest="what", required=True)
    for name in ("ltv", "term"):
        q = isub.add_parser(name, parents=[common])
        q.add_argument("--r", type=rate, default=presets.RISK_FREE_RATE)
        q.add_argument("--call", type=rate, default=presets.QUOTED_CALL_RATE)
        q.add_argument("--sigma", type=positive, default=presets.COLLATERAL_VOL)
        q.add_argument("--units", choices=["nominal", "continuous"], default="continuous",
                       help="compounding of --r/--call (nominal is log-converted)")
        if name == "ltv":
            q.add_argument("--term", type=positive, default=presets.CALL_LOAN_TERM)
        else:
            q.add_argument("--ltv", type=open_unit, default=0.5)
        q.set_defaults(func=cmd_implied)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = Output(args.format, _provenance(args))
        args.func(args, out)
        out.write(args.output, getattr(args, "outdir", None))
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except NonexistenceError as exc:
        print(f"callrate: {exc}", file=sys.stderr)
        return 3
    except (CallRateError, OSError, ValueError) as exc:
        print(f"callrate: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
