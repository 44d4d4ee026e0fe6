"""Command-line front end: ``python -m edes_lifespan <subcommand> ...``.

Exit codes: 0 success, 1 invalid input (flags, config, output directory),
2 numerical failure or a failed check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import fields, replace
from fractions import Fraction
from pathlib import Path

from . import exponents as ex
from . import iteration as it
from . import kernels as kn
from . import pde_sim as ps
from . import special
from . import verification as vf
from .special import ConvergenceError, DomainError, OverflowSignal
from .svg import line_plot

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2
# k typed as 0.6667 or 0.667 means 2/3; snapping lets the k = 2/3 forms apply
SNAP_TOL = 5e-4


class ValidationError(Exception):
    pass


class CheckFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


# ---------------------------------------------------------------------------
# formatting


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    """JSON with every float at 17 significant digits; keys keep their order."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if hasattr(obj, "item") and not hasattr(obj, "__len__"):  # numpy scalar
        return to_json(obj.item(), indent)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if hasattr(obj, "tolist"):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(to_json(v, indent + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    cols = list(rows[0])
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return fmt_float(v)
    if hasattr(v, "item"):
        return _cell(v.item())
    return str(v)


class Output:
    """Writes named artifacts into ``--out`` or, without it, the primary one
    to stdout."""

    def __init__(self, out_dir: str | None, stdout=None):
        self.dir = Path(out_dir) if out_dir else None
        self.stdout = stdout or sys.stdout
        self.written: list[str] = []
        if self.dir is not None:
            try:
                self.dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ValidationError(f"cannot create output directory {self.dir}: {exc}")
            if not os.access(self.dir, os.W_OK):
                raise ValidationError(f"output directory {self.dir} is not writable")

    def emit(self, name: str, text: str, primary: bool = True) -> None:
        if self.dir is None:
            if primary:
                self.stdout.write(text)
            return
        path = self.dir / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise ValidationError(f"cannot write {path}: {exc}")
        self.written.append(str(path))


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}")


def _snap_k(k: float) -> float:
    return 2.0 / 3.0 if abs(k - 2.0 / 3.0) < SNAP_TOL else k


def _dims(values: list[float], real_n: bool) -> list[float]:
    out = []
    for n in values:
        if n < 1:
            raise ValidationError(f"n must be >= 1, got {n:g}")
        if not real_n:
            if n != int(n):
                raise ValidationError(f"n={n:g} is not an integer (pass --real-n to allow)")
            n = int(n)
        out.append(n)
    return out


def _ks(values: list[float]) -> list[float]:
    out = []
    for k in values:
        if not 0 <= k < 1:
            raise ValidationError(f"k must lie in [0, 1), got {k:g}")
        out.append(_snap_k(k))
    return out


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}")


def _common(p: argparse.ArgumentParser, *, fmt=("json", "csv", "svg"), default_fmt="json"):
    p.add_argument("--n", help="spatial dimension(s), comma separated")
    p.add_argument("--k", help="metric exponent(s) in [0, 1), comma separated")
    p.add_argument("--p", help="power(s) of the nonlinearity, comma separated")
    p.add_argument("--eps", help="data size(s), comma separated")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", help="output directory (default: primary artifact on stdout)")
    p.add_argument("--format", choices=fmt, default=default_fmt)
    p.add_argument("--real-n", action="store_true", help="accept non-integer n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="python -m edes_lifespan",
                     description="Blow-up and lifespan toolkit for u_tt - t^{-2k} Lap u = "
                                 "t^{1-p}|u|^p.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exponents", help="critical exponents, thresholds and regimes")
    _common(p)

    p = sub.add_parser("kernels", help="kernel evaluation and identity checks")
    _common(p, fmt=("csv", "json"), default_fmt="csv")
    p.add_argument("--check", action="store_true", help="run the identity suites")
    p.add_argument("--grid", choices=("default", "quick", "dense"), default="default")

    p = sub.add_parser("iterate", help="slicing iteration traces and thresholds")
    _common(p, fmt=("json",))
    p.add_argument("--case", choices=("crit_p0", "crit_p1"))
    p.add_argument("--j-max", type=int, default=30)
    for name in ("C", "M", "K", "R"):
        p.add_argument(f"--{name}", type=float, default=1.0, dest=f"const_{name}")

    p = sub.add_parser("simulate", help="one radial simulation")
    _common(p)
    p.add_argument("--dr", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--no-refine", action="store_true")

    p = sub.add_parser("sweep", help="eps sweep with a fitted lifespan exponent")
    _common(p)
    p.add_argument("--dr", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--tolerance", type=float, default=0.30)

    p = sub.add_parser("verify-all", help="run every invariant check")
    p.add_argument("--profile", choices=vf.PROFILES, default="quick")
    p.add_argument("--out", help="output directory (default: report on stdout)")
    p.add_argument("--inject-fault", choices=("sign-flip",),
                   help="corrupt the Bessel series to confirm the checks catch it")
    return parser


# ---------------------------------------------------------------------------
# subcommands


def cmd_exponents(args, out: Output) -> int:
    cfg = _load_json(args.config) if args.config else {}
    ns = _dims(_floats(args.n) if args.n else [float(v) for v in cfg.get("n", [])], args.real_n)
    ks = _ks(_floats(args.k) if args.k else [float(v) for v in cfg.get("k", [])])
    ps = _floats(args.p) if args.p else [float(v) for v in cfg.get("p", [])] or [None]
    if not ns or not ks:
        raise ValidationError("exponents needs --n and --k (or a config with n, k lists)")
    rows = []
    for k in ks:
        for n in ns:
            for p in ps:
                if p is not None and not p > 1:
                    raise ValidationError(f"p must exceed 1, got {p:g}")
                row = ex.exponent_report(n, k, p).as_dict()
                row["N_k_as_printed"] = ex.threshold_N_as_printed(k)
                rows.append(row)
    if args.format == "json":
        out.emit("exponents.json", to_json(rows) + "\n")
    elif args.format == "csv":
        out.emit("exponents.csv", to_csv(rows))
    else:
        series = []
        for k in ks:
            grid = [1.0 + 0.05 * i for i in range(221)]
            series.append((f"p0, k={k:.4g}", grid, [ex.critical_exponent_p0(n, k) for n in grid]))
            series.append((f"p1, k={k:.4g}", grid, [ex.critical_exponent_p1(n, k) for n in grid]))
        out.emit("exponents.svg", line_plot(series, title="critical exponents", xlabel="n",
                                            ylabel="p", logy=True))
    return EXIT_OK


def _kernel_points(grid: str, k: float) -> list[tuple[float, float, float]]:
    count = {"quick": 50, "default": 200, "dense": 1000}[grid]
    return [(t, s, lam) for t, s, lam, _ in vf.identity_grid(count, k=k)]


def cmd_kernels(args, out: Output) -> int:
    k = _ks(_floats(args.k))[0] if args.k else 2.0 / 3.0
    n = _dims(_floats(args.n), False)[0] if args.n else 3
    params = kn.SpacetimeParams(k, n)
    points = {"quick": 50, "default": 200, "dense": 1000}[args.grid]
    if not args.check:
        rows = kn.kernel_sweep(params, _kernel_points(args.grid, k))
        rows = [{c: r[c] for c in kn.CSV_COLUMNS} for r in rows]
        if args.format == "csv":
            out.emit("kernels.csv", to_csv(rows))
        else:
            out.emit("kernels.json", to_json(rows) + "\n")
        return EXIT_OK

    rows = vf.kernel_identity_rows(points, k=k, n=n)
    results = vf.check_kernel_identities("full", k=k, points=points)
    results += [vf.check_bessel_wronskian("quick")]
    if params.is_two_thirds:
        results += [vf.check_triple_representation("quick"), *vf.check_appendix_wronskian("quick")]
    summary = [{"check": r.name, "identity": r.identity, "worst": r.worst,
                "bound": r.tolerance, "sense": r.sense, "passed": r.passed} for r in results]
    if args.format == "csv":
        out.emit("kernel_residuals.csv", to_csv(rows))
        out.emit("kernel_checks.csv", to_csv(summary), primary=False)
    else:
        out.emit("kernel_checks.json", to_json({"k": k, "n": n, "grid": args.grid,
                                                "checks": summary, "residuals": rows}) + "\n")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.worst:.3e}", file=sys.stderr)
    if not all(r.passed for r in results):
        raise CheckFailed("kernel identity checks failed")
    return EXIT_OK


def cmd_iterate(args, out: Output) -> int:
    cfg = _load_json(args.config) if args.config else {}
    p_list = _floats(args.p) if args.p else [float(v) for v in cfg.get("p", [])]
    if not p_list:
        raise ValidationError("iterate needs --p")
    p = p_list[0]
    k = _ks(_floats(args.k))[0] if args.k else float(cfg.get("k", 2.0 / 3.0))
    case = args.case or cfg.get("case")
    if case is None and args.n:
        n = _dims(_floats(args.n), args.real_n)[0]
        regime = ex.classify_lifespan(n, k, p).regime
        if regime not in ("crit_p0", "crit_p1"):
            raise ValidationError(f"(n, k, p) is in regime {regime}; pass --case explicitly")
        case = regime
    if case is None:
        raise ValidationError("iterate needs --case or --n/--k/--p on a critical curve")
    if not 0 <= args.j_max <= 60:
        raise ValidationError("--j-max must lie in [0, 60]")
    eps_list = _floats(args.eps) if args.eps else [float(e) for e in cfg.get("eps", [0.1])]
    if any(e <= 0 for e in eps_list):
        raise ValidationError("eps must be positive")
    gamma_k = kn.SpacetimeParams(k).gamma_k
    tr = it.slicing_sequences(case, p, args.j_max, eps=eps_list[0], C=args.const_C,
                              gamma_k=gamma_k, M=args.const_M, K=args.const_K, R=args.const_R)
    seq = {"crit_p0": ("alpha_j", "beta_j", "logC_j"), "crit_p1": ("sigma_j", None, "logK_j")}[case]
    steps = []
    for j in range(tr.j_reached + 1):
        row = {"j": j, "ell_j": tr.ell[j]}
        if case == "crit_p0":
            row[seq[0]], row[seq[1]] = tr.alpha[j], tr.beta[j]
        else:
            row[seq[0]] = tr.sigma[j]
        row[seq[2]] = tr.log_amp[j]
        steps.append(row)
    thresholds = []
    for e in eps_list:
        T, logT = tr.threshold(e)
        thresholds.append({"eps": e, "T": T, "log_T": logT})
    doc = {"case": case, "p": p, "k": k, "j_star": tr.j_star,
           "amplitude_constant": tr.amplitude_constant, "constants": tr.constants,
           "t0": it.t0_of_k(k), "closed_form_ok": tr.closed_form_ok,
           "log_amp_floor_ok": tr.log_amp_floor_ok, "trace": steps, "thresholds": thresholds}
    out.emit("iterate.json", to_json(doc) + "\n")
    if not tr.closed_form_ok:
        raise CheckFailed("recursion and closed form disagree")
    return EXIT_OK


_SIM_FIELDS = {f.name for f in fields(ps.SimConfig)}


def _sim_config(args, base: dict):
    unknown = set(base) - _SIM_FIELDS
    if unknown:
        raise ValidationError(f"unknown config fields: {sorted(unknown)}")
    cfg = dict(base)
    if args.n:
        cfg["n"] = _dims(_floats(args.n), False)[0]
    if args.k:
        cfg["k"] = _ks(_floats(args.k))[0]
    if args.p:
        cfg["p"] = _floats(args.p)[0]
    if getattr(args, "dr", None):
        cfg["dr"] = args.dr
    if getattr(args, "t_max", None):
        cfg["t_max"] = args.t_max
    if getattr(args, "no_refine", False):
        cfg["refine"] = False
    cfg.setdefault("eps", 0.1)
    missing = {"k", "n", "p"} - set(cfg)
    if missing:
        raise ValidationError(f"missing simulation parameters: {sorted(missing)}")
    if "k" in base:
        cfg["k"] = _snap_k(float(cfg["k"]))
    try:
        return ps.SimConfig(**cfg)
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc))


def _run_summary(res) -> dict:
    doc = res.summary()
    doc["fitted_constants"] = ps.fitted_constants(res).as_dict()
    if res.curly_U.size and res.config.eps > 0:
        doc["curlyU_floor"] = ps.fitted_floor_curlyU(res)
        doc["differential_c"] = ps.fitted_differential_constant(res)
    doc["weak_residual_one_on_cone"] = ps.weak_residual(res, "one_on_cone")
    return doc


def cmd_simulate(args, out: Output) -> int:
    base = _load_json(args.config) if args.config else {}
    if args.eps:
        base["eps"] = _floats(args.eps)[0]
    cfg = _sim_config(args, base)
    res = ps.run(cfg)
    doc = _run_summary(res)
    out.emit("summary.json", to_json(doc) + "\n", primary=args.format == "json")
    out.emit("run.csv", _run_csv(res), primary=args.format == "csv")
    if args.format == "svg":
        svg = line_plot([("max |u|", res.t.tolist(), res.max_u.tolist()),
                         ("U(t)", res.t.tolist(), res.U.tolist())],
                        title=f"k={cfg.k:.4g}, n={cfg.n}, p={cfg.p:.4g}, eps={cfg.eps:g}",
                        xlabel="t", ylabel="amplitude", logx=True, logy=True)
        out.emit("run.svg", svg)
    if not res.cone_ok:
        raise CheckFailed(f"support left the light cone by {res.cone_excess:g}")
    return EXIT_OK


def _run_csv(res) -> str:
    buf = io.StringIO()
    ps.write_run_csv(res, buf)
    return buf.getvalue()


def cmd_sweep(args, out: Output) -> int:
    doc = _load_json(args.config) if args.config else {}
    base = dict(doc.get("base", {}))
    eps = _floats(args.eps) if args.eps else [float(e) for e in doc.get("eps", [])]
    tol = float(doc.get("tolerance", args.tolerance))
    if len(eps) < 4:
        raise ValidationError("a sweep needs at least 4 eps values")
    if max(eps) / min(eps) < 10 * (1 - 1e-9):
        raise ValidationError("eps values must span at least one decade")
    cfg = _sim_config(args, base)
    configs = [replace(cfg, eps=e) for e in eps]
    report = ps.sweep_and_fit(configs, tolerance=tol)
    results = report.pop("results")
    if args.format == "csv":
        out.emit("sweep.csv", to_csv(report["runs"]))
        out.emit("sweep.json", to_json(report) + "\n", primary=False)
    elif args.format == "svg":
        used = [r for r in report["runs"] if r["blew_up"]]
        xs = [1.0 / r["eps"] for r in used]
        ys = [r["T_num"] for r in used]
        slope, icpt = report["fitted_slope"], report["intercept"]
        fit_y = [math.exp(icpt) * x ** slope for x in xs] if report["fit_kind"] == "power" else \
            [math.exp(math.exp(icpt) * x ** slope) for x in xs]
        out.emit("sweep.svg", line_plot([("T_num", xs, ys), (f"fit, slope {slope:.3f}", xs, fit_y)],
                                        title=f"predicted {report['predicted_exponent']:.4g}",
                                        xlabel="1/eps", ylabel="T", logx=True, logy=True,
                                        markers=True))
        out.emit("sweep.json", to_json(report) + "\n", primary=False)
    else:
        out.emit("sweep.json", to_json(report) + "\n")
    for r in results:
        if out.dir is not None:
            out.emit(f"run_eps_{r.config.eps:.6g}.csv", _run_csv(r), primary=False)
    if report["verdict"] != "consistent within tolerance" or not report["monotone_in_eps"]:
        raise CheckFailed(f"fitted slope {report['fitted_slope']:.4g} vs predicted "
                          f"{report['predicted_exponent']:.4g}")
    return EXIT_OK


def cmd_verify_all(args, out: Output) -> int:
    saved = special._series_sign
    if args.inject_fault == "sign-flip":
        special._series_sign = -1.0
    try:
        results = vf.run_all(args.profile)
    finally:
        special._series_sign = saved
    report = vf.markdown_report(results, args.profile)
    out.emit("verify_report.md", report)
    for r in results:
        if r.table:
            out.emit(f"{r.name}.csv", to_csv(r.table), primary=False)
    if not all(r.passed for r in results):
        failed = ", ".join(r.name for r in results if not r.passed)
        raise CheckFailed(f"failed checks: {failed}")
    return EXIT_OK


COMMANDS = {"exponents": cmd_exponents, "kernels": cmd_kernels, "iterate": cmd_iterate,
            "simulate": cmd_simulate, "sweep": cmd_sweep, "verify-all": cmd_verify_all}


def dispatch(argv: list[str] | None = None, stdout=None) -> int:
    """Parse ``argv`` and run the subcommand; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        out = Output(getattr(args, "out", None), stdout)
        return COMMANDS[args.command](args, out)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CheckFailed, ConvergenceError, OverflowSignal, ps.ConeViolation,
            ps.InstabilityError, ps.InsufficientData, FloatingPointError) as exc:
        print(f"failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(dispatch())
