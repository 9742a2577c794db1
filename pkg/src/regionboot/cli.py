"""Command-line interface.

Four subcommands: pvalue (methods at one observation), curve (a scaling
curve with its extrapolation), table (rejection probabilities along the
boundary), oracle (asymptotic expansion values at one observation).  Each
writes delimited output plus a figure and a metadata sidecar when --out is
given; argument errors exit 2 and engine failures exit 3.
"""
from __future__ import annotations

import argparse
import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._quad import TAYLOR_GRID
from .errors import RegionBootError
from .figures import curve_figure, pvalue_figure, rejection_figure
from .multiscale import DEFAULT_GRID, bp_curve, dbp_curve, fit_poly
from .oracle import (au_expansion, bp_expansion, dbp_expansion, pv_expansion,
                     reject_dbp, reject_nbp)
from .regions import region_from_descriptor, tangent_jet
from .rejection_lab import (METHODS, pvalue_report, rejection_probability,
                            table1)
from .surface_jets import beta_summary, gamma_summary

_F = "{:.12g}".format

# shorthand region names accepted wherever a descriptor is expected
NAMED_REGIONS = {
    "cone": {"kind": "cone"},
    "efron": {"kind": "efron", "h0": 0.1},
    "flat": {"kind": "poly", "c2": 0.0, "c3": 0.0, "c4": 0.0},
}


def _percent(p: float) -> str:
    return f"{100.0 * p:.4g}"


def _parse_scales(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"scales must look like a:b:n, got {text!r}")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1 or a <= 0.0 or b < a:
        raise argparse.ArgumentTypeError(f"bad scale range {text!r}")
    return tuple(round(s, 12) for s in np.linspace(a, b, n))


def _parse_y(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"y must look like u,v, got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _parse_region(text: str) -> dict:
    if text in NAMED_REGIONS:
        return dict(NAMED_REGIONS[text])
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        names = ", ".join(sorted(NAMED_REGIONS))
        raise argparse.ArgumentTypeError(
            f"region must be one of {names} or a JSON descriptor: {exc}") from None
    if not isinstance(value, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return value


# every data method; the expansion benchmark pv_oracle needs fourth-order
# jets at the projection foot, so "all" leaves it out (kinked feet break it)
ALL_METHODS = ("lr", "signed_lr", "confset", "mcb",
               "bp", "au2", "au3", "dbp", "dau")


def _resolve_methods(selected, default: list) -> list:
    """Expand the method selection, honoring the 'all' shorthand."""
    if selected is None:
        return list(default)
    selected = list(selected)
    if not selected:
        raise argparse.ArgumentTypeError("at least one method is required")
    if "all" in selected:
        return list(ALL_METHODS)
    for m in selected:
        if m not in METHODS:
            raise argparse.ArgumentTypeError(
                f"unknown method {m!r}; choose from {METHODS}")
    return selected


def _git_revision() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=10)
    except OSError:
        return None
    return out.stdout.strip() if out.returncode == 0 else None


def _load_config(args: argparse.Namespace) -> dict:
    """Config file values, overridden by any flag given on the command line."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise argparse.ArgumentTypeError("config file must hold a JSON object")
    merged = {
        "region": None,
        "y": None,
        "methods": None,
        "scales": None,
        "reps": 100_000,
        "seed": 0,
        "backend": "quad",
        "alpha": 0.05,
        "out_dir": None,
        "model": None,
    }
    merged.update({k: v for k, v in cfg.items() if k in merged})
    if isinstance(merged["scales"], str):
        merged["scales"] = _parse_scales(merged["scales"])
    elif merged["scales"] is not None:
        merged["scales"] = tuple(float(s) for s in merged["scales"])
    if merged["y"] is not None and not isinstance(merged["y"], tuple):
        merged["y"] = (float(merged["y"][0]), float(merged["y"][1]))
    override_names = ["region", "y", "methods", "scales", "reps", "seed",
                      "backend", "alpha", "out_dir", "model"]
    for name in override_names:
        val = getattr(args, name, None)
        if val is not None:
            merged[name] = val
    return merged


def _write_meta(out_dir: Path, stem: str, payload: dict) -> None:
    payload = dict(payload)
    payload["version"] = __version__
    payload["revision"] = _git_revision()
    text = json.dumps(payload, sort_keys=True, indent=2, default=str)
    (out_dir / f"{stem}.meta.json").write_text(text + "\n", encoding="utf-8")


def _write_csv(out_dir: Path, name: str, header: list, rows: list) -> Path:
    path = out_dir / name
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def cmd_pvalue(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg["y"] is None:
        raise argparse.ArgumentTypeError("an observation --y is required")
    cfg["region"] = cfg["region"] or dict(NAMED_REGIONS["efron"])
    region = region_from_descriptor(cfg["region"])
    methods = _resolve_methods(cfg["methods"], ["bp", "au2", "au3", "dbp", "dau"])
    reports = [pvalue_report(region, cfg["y"], m, backend=cfg["backend"],
                             scales=cfg["scales"], reps=cfg["reps"],
                             seed=cfg["seed"], model=cfg["model"])
               for m in methods]
    for r in reports:
        print(f"{r.method:>10}  {_percent(r.pvalue):>8}")
    if cfg["out_dir"]:
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        rows = [[r.method, _F(r.pvalue), _percent(r.pvalue), r.backend,
                 r.replicates, "" if r.seed is None else r.seed,
                 r.model or ""] for r in reports]
        _write_csv(out, "pvalues.csv",
                   ["method", "pvalue", "percent", "backend", "replicates",
                    "seed", "model"], rows)
        pvalue_figure(reports, str(out / "pvalues.png"))
        _write_meta(out, "pvalues", {"command": "pvalue", **cfg})
        print(f"wrote {out / 'pvalues.csv'}")
    return 0


def cmd_curve(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg["y"] is None:
        raise argparse.ArgumentTypeError("an observation --y is required")
    cfg["region"] = cfg["region"] or dict(NAMED_REGIONS["efron"])
    region = region_from_descriptor(cfg["region"])
    kind = args.kind
    scales = cfg["scales"]
    if scales is None:
        scales = TAYLOR_GRID if cfg["backend"] == "quad" else DEFAULT_GRID
    if kind == "bp":
        curve = bp_curve(region, cfg["y"], scales=scales, backend=cfg["backend"],
                         reps=cfg["reps"], seed=cfg["seed"])
    else:
        curve = dbp_curve(region, cfg["y"], scales=scales, tau2=1.0,
                          backend=cfg["backend"], reps_outer=cfg["reps"],
                          seed=cfg["seed"])
    degree = args.degree
    fit = fit_poly(curve, degree)
    zext, se = fit.at(-1.0)
    from scipy.special import ndtr
    print(f"extrapolated z = {_F(zext)}  (p = {_percent(float(ndtr(-zext)))})")
    if cfg["out_dir"]:
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        if curve.meta.get("backend") == "quad":
            err = np.zeros(len(curve.scales))
        else:
            err = 1.0 / np.sqrt(np.maximum(np.asarray(curve.weights), 1e-300))
        rows = [[_F(s), _F(z), _F(e), curve.kind]
                for s, z, e in zip(curve.scales, curve.z, err)]
        _write_csv(out, "curve.csv", ["sigma2", "z", "se", "kind"], rows)
        curve_figure(curve, fit, str(out / "curve.png"))
        fit_info = {"degree": degree, "coefficients": [float(c) for c in fit.coeffs],
                    "extrapolated_z": float(zext), "extrapolated_se": float(se)}
        _write_meta(out, "curve", {"command": "curve", "curve_kind": kind,
                                   "fit": fit_info, **cfg})
        print(f"wrote {out / 'curve.csv'}")
    return 0


def cmd_table(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if args.which == 1:
        return _emit_table1(args, cfg)
    cfg["region"] = cfg["region"] or dict(NAMED_REGIONS["cone"])
    region = region_from_descriptor(cfg["region"])
    methods = _resolve_methods(cfg["methods"],
                               ["bp", "au2", "au3", "dbp", "dau", "mcb"])
    u_values = [float(u) for u in (args.u or [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])]
    scheme = args.scheme
    rows = []
    for m in methods:
        for uu in u_values:
            mu = np.array([uu, -float(region.h(np.array([uu]))[0])])
            rows.append(rejection_probability(m, region, mu, alpha=cfg["alpha"],
                                              scheme=scheme, reps=cfg["reps"],
                                              seed=cfg["seed"]))
    header = "method".rjust(10) + "".join(f"{u:>9.2f}" for u in u_values)
    print(header)
    for m in methods:
        vals = [r for r in rows if r.method == m]
        print(m.rjust(10) + "".join(f"{_percent(r.prob):>9}" for r in vals))
    if cfg["out_dir"]:
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        csv_rows = [[r.method, _F(r.u), _F(r.alpha), _F(r.prob), r.scheme]
                    for r in rows]
        _write_csv(out, "rejection.csv",
                   ["method", "u", "alpha", "prob", "scheme"], csv_rows)
        rejection_figure(rows, cfg["alpha"], str(out / "rejection.png"))
        _write_meta(out, "rejection", {"command": "table", "which": 2,
                                       "u": u_values, "scheme": scheme, **cfg})
        print(f"wrote {out / 'rejection.csv'}")
    return 0


def _emit_table1(args: argparse.Namespace, cfg: dict) -> int:
    """P-values of every method at the two worked observations."""
    methods = _resolve_methods(cfg["methods"],
                               ["lr", "signed_lr", "confset", "mcb",
                                "bp", "au2", "au3", "dbp", "dau"])
    reports = table1(methods=tuple(methods), backend=cfg["backend"],
                     reps=cfg["reps"], seed=cfg["seed"])
    for r in reports:
        h0 = r.region.get("h0", 0.0)
        print(f"{r.method:>10}  h0={h0:<4g} y=({r.y[0]:.4f},{r.y[1]:.4f})"
              f"  {_percent(r.pvalue):>8}")
    if cfg["out_dir"]:
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        rows = [[r.method, _F(r.region.get("h0", 0.0)), _F(r.y[0]), _F(r.y[1]),
                 _F(r.pvalue), _percent(r.pvalue), r.backend, r.replicates,
                 "" if r.seed is None else r.seed, r.model or ""]
                for r in reports]
        _write_csv(out, "table1.csv",
                   ["method", "h0", "y_u", "y_v", "pvalue", "percent",
                    "backend", "replicates", "seed", "model"], rows)
        pvalue_figure(reports, str(out / "table1.png"))
        _write_meta(out, "table1", {"command": "table", "which": 1, **cfg})
        print(f"wrote {out / 'table1.csv'}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg["y"] is None:
        raise argparse.ArgumentTypeError("an observation --y is required")
    cfg["region"] = cfg["region"] or dict(NAMED_REGIONS["efron"])
    region = region_from_descriptor(cfg["region"])
    y = np.asarray(cfg["y"], dtype=float)
    proj = region.project(y)
    jet = tangent_jet(region, proj.u_hat)
    g = beta_summary(gamma_summary(jet), proj.lambda_hat)
    quantities = [
        ("lambda_hat", proj.lambda_hat),
        ("u_hat", proj.u_hat),
        ("gamma1", g.gamma1), ("gamma2", g.gamma2),
        ("gamma3", g.gamma3), ("gamma4", g.gamma4),
        ("beta0", g.beta0), ("beta1", g.beta1),
        ("beta2", g.beta2), ("beta3", g.beta3),
        ("bp_expansion", bp_expansion(g, 1.0)),
        ("au_expansion", au_expansion(g)),
        ("pv_expansion", pv_expansion(g)),
        ("dbp_expansion", dbp_expansion(g, 1.0, 1.0)),
        ("reject_nbp", reject_nbp(g.gammas, cfg["alpha"], 1.0)),
        ("reject_dbp", reject_dbp(g.beta3, cfg["alpha"], 1.0)),
    ]
    for name, val in quantities:
        print(f"{name:>14}  {_F(float(val))}")
    if cfg["out_dir"]:
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        rows = [[name, _F(float(val))] for name, val in quantities]
        _write_csv(out, "oracle.csv", ["quantity", "value"], rows)
        _write_meta(out, "oracle", {"command": "oracle", **cfg})
        print(f"wrote {out / 'oracle.csv'}")
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--region", type=_parse_region, default=None,
                     help='region name (cone, efron, flat) or descriptor JSON, '
                          'e.g. {"kind":"efron","h0":0.1}')
    sub.add_argument("--y", type=_parse_y, default=None, help="observation u,v")
    sub.add_argument("--methods", "--method", nargs="+",
                     choices=METHODS + ("all",), default=None)
    sub.add_argument("--scales", type=_parse_scales, default=None,
                     help="squared-scale grid a:b:n")
    sub.add_argument("--reps", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--backend", choices=("quad", "mc"), default=None)
    sub.add_argument("--alpha", type=float, default=None)
    sub.add_argument("--model", choices=("taylor", "fit"), default=None,
                     help="extrapolation model (default: taylor on quad, fit on mc)")
    sub.add_argument("--out", dest="out_dir", default=None,
                     help="directory for csv, figure, and metadata output")
    sub.add_argument("--config", default=None, help="JSON config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regionboot",
        description="Approximately unbiased tests of region membership")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("pvalue", help="p-values of selected methods at y")
    _add_common(p)
    p.set_defaults(func=cmd_pvalue)

    p = subs.add_parser("curve", help="scaling curve and its extrapolation")
    p.add_argument("--kind", choices=("bp", "dbp"), default="bp")
    p.add_argument("--degree", type=int, default=1,
                   help="polynomial degree of the extrapolation fit")
    _add_common(p)
    p.set_defaults(func=cmd_curve)

    p = subs.add_parser("table", help="reproduce a published table")
    p.add_argument("which", type=int, choices=(1, 2), nargs="?", default=2,
                   help="1: p-values at the worked observations; "
                        "2: rejection probabilities along the boundary")
    p.add_argument("--u", nargs="+", type=float, default=None,
                   help="boundary offsets (default 0 .. 3 step 0.5)")
    p.add_argument("--scheme", choices=("quad", "mc"), default="quad")
    _add_common(p)
    p.set_defaults(func=cmd_table)

    p = subs.add_parser("oracle", help="asymptotic expansion values at y")
    _add_common(p)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (argparse.ArgumentTypeError, ValueError) as exc:
        parser.error(str(exc))
    except RegionBootError as exc:
        print(f"regionboot {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError) as exc:
        print(f"regionboot {args.command}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
