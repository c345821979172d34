"""Command-line front end.

Reads a JSON system file (schema_version "1": matrices A, C, W, V as
row-major nested arrays, optional label), runs the verification pipeline,
and emits a report as aligned text or byte-stable JSON.

Exit codes: 0 pass, 1 input/model error, 2 identity-verification
failure, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import jensen as jn
from . import spectral as sp
from .errors import (
    PoleAtFrequencyError,
    RiccatiSpectraError,
    SimulationBlowUpError,
)
from .model import SystemModel, build_model
from .riccati import CareSolution, solve_care
from .simulate import SimulationConfig, run_monte_carlo, whiteness_check

EXIT_PASS = 0
EXIT_INPUT = 1
EXIT_IDENTITY = 2
EXIT_SIMULATION = 3

SCHEMA_VERSION = "1"
DEFAULT_TOL = 1e-6
GAP_TOL = 0.05          # statistical tolerance on simulation gaps

# acceptance tolerance per special-case reduction
SPECIAL_CASE_TOL = {
    "scalar_output": 1e-6,
    "yovits_jackson": 1e-6,
    "identity_noise": 1e-6,
    "zero_process_noise": 1e-10,
    "scalar_system": 1e-6,
}


class InputError(Exception):
    """Malformed system file or arguments (exit code 1)."""


def _reject_constant(token):
    raise InputError(f"non-finite literal {token!r} not accepted in system files")


def load_system_file(path: str):
    """Parse and validate a SystemFile; returns (SystemModel, label)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, "
                         f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InputError(f"{path}: schema_version must be \"{SCHEMA_VERSION}\", "
                         f"got {version!r}")
    matrices = {}
    for name in ("A", "C", "W", "V"):
        if name not in data:
            raise InputError(f"{path}: missing field {name!r}")
        try:
            matrices[name] = np.array(data[name], dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: field {name!r} is not a rectangular "
                             f"numeric array: {exc}") from exc
        if matrices[name].ndim != 2:
            raise InputError(f"{path}: field {name!r} must be a 2-D array")
    label = data.get("label", "")
    if not isinstance(label, str):
        raise InputError(f"{path}: label must be a string")
    model = build_model(matrices["A"], matrices["C"], matrices["W"],
                        matrices["V"])
    return model, label


# ---------------------------------------------------------------------------
# report assembly

def _matrix(M) -> list:
    return [[float(x) for x in row] for row in np.atleast_2d(M)]


def _model_block(model: SystemModel, label: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "label": label,
        "states": model.m,
        "outputs": model.l,
    }


def _care_block(care: CareSolution) -> dict:
    return {
        "P": _matrix(care.P),
        "K": _matrix(care.K),
        "residual": float(care.residual),
    }


def _frequency_samples(model: SystemModel, n: int = 25) -> list:
    ev = sp.PopovEvaluator(model)
    rows = []
    for omega in np.logspace(-2, 2, n):
        try:
            rows.append([float(omega), sp.logdet_ratio(ev, float(omega))])
        except PoleAtFrequencyError:
            continue
    return rows


def _spectral_block(report: sp.SpectralReport, model: SystemModel) -> dict:
    block = {
        "trace_from_care": report.trace_from_care,
        "integral_term": report.integral_term,
        "unstable_sum": report.unstable_sum,
        "trace_from_integral": report.trace_from_integral,
    }
    if report.trace_from_zeros_poles is not None:
        block["zeros_term"] = report.zeros_term
        block["poles_term"] = report.poles_term
        block["trace_from_zeros_poles"] = report.trace_from_zeros_poles
        block["axis_zero_flag"] = report.axis_zero_flag
    if report.bode_integral is not None:
        block["bode_integral"] = report.bode_integral
        block["bode_closed_form"] = report.bode_closed_form
    block["residuals"] = {k: float(v) for k, v in sorted(report.residuals.items())}
    block["frequency_samples"] = _frequency_samples(model)
    return block


def _bounds_block(bounds: sp.TraceBounds) -> dict:
    return {
        "lower": float(bounds.lower),
        "upper": float(bounds.upper),
        "lambda_min": float(bounds.lambda_min),
        "lambda_max": float(bounds.lambda_max),
    }


def _special_cases_block(cases) -> list:
    rows = []
    for case in cases:
        row = {"name": case.name, "applicable": case.applicable}
        if case.applicable:
            row["residual"] = float(case.residual)
            row["tolerance"] = SPECIAL_CASE_TOL[case.name]
        row["detail"] = case.detail
        rows.append(row)
    return rows


def _verdict_block(identities: list, tol: float) -> dict:
    for item in identities:
        item["pass"] = bool(item["residual"] <= item["tolerance"])
    return {
        "pass": all(item["pass"] for item in identities),
        "tolerance": tol,
        "identities": identities,
    }


# ---------------------------------------------------------------------------
# output formatting

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _render_text(report: dict) -> str:
    lines = []
    for section, content in report.items():
        lines.append(f"[{section}]")
        _render_section(content, lines, indent="  ")
        lines.append("")
    return "\n".join(lines)


def _render_section(content, lines, indent):
    if isinstance(content, dict):
        width = max((len(k) for k in content), default=0)
        for key, value in content.items():
            if isinstance(value, dict):
                lines.append(f"{indent}{key}:")
                _render_section(value, lines, indent + "  ")
            elif isinstance(value, list) and value \
                    and isinstance(value[0], (list, dict)):
                lines.append(f"{indent}{key}:")
                _render_section(value, lines, indent + "  ")
            else:
                lines.append(f"{indent}{key.ljust(width)} : {_fmt(value)}")
    elif isinstance(content, list):
        for item in content:
            if isinstance(item, dict):
                _render_section(item, lines, indent)
                lines.append("")
            elif isinstance(item, list):
                lines.append(indent + "[" + ", ".join(_fmt(v) for v in item) + "]")
            else:
                lines.append(indent + _fmt(item))
    else:
        lines.append(indent + _fmt(content))


def _emit(report: dict, fmt: str, output: str | None) -> None:
    if fmt == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        text = _render_text(report)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_analyze(args) -> int:
    model, label = load_system_file(args.path)
    care = solve_care(model)
    qtol = max(min(args.tol / 100.0, 1e-3), 1e-12)
    report = sp.verify_trace_identity(model, care, qtol)
    bounds = sp.trace_bounds(model, report)
    identities = [{
        "name": "trace_identity",
        "residual": float(report.residuals["trace_identity"]),
        "tolerance": max(args.tol, args.tol * report.trace_from_care),
    }]
    out = {
        "model": _model_block(model, label),
        "care": _care_block(care),
        "spectral": _spectral_block(report, model),
        "bounds": _bounds_block(bounds),
        "verdict": _verdict_block(identities, args.tol),
    }
    _emit(out, args.format, args.output)
    return EXIT_PASS if out["verdict"]["pass"] else EXIT_IDENTITY


def cmd_verify(args) -> int:
    model, label = load_system_file(args.path)
    care = solve_care(model)
    qtol = max(min(args.tol / 100.0, 1e-3), 1e-12)
    report = sp.full_spectral_report(model, care, qtol,
                                     with_zeros_poles=args.with_theorem2,
                                     with_bode=args.with_bode)
    bounds = sp.trace_bounds(model, report)
    identities = [{
        "name": "trace_identity",
        "residual": float(report.residuals["trace_identity"]),
        "tolerance": max(args.tol, args.tol * report.trace_from_care),
    }]
    if args.with_theorem2:
        identities.append({
            "name": "zeros_poles_identity",
            "residual": float(report.residuals["zeros_poles_identity"]),
            "tolerance": args.tol * (1.0 + report.trace_from_care),
        })
    if args.with_bode:
        identities.append({
            "name": "bode_identity",
            "residual": float(report.residuals["bode_identity"]),
            "tolerance": args.tol,
        })
    out = {
        "model": _model_block(model, label),
        "care": _care_block(care),
        "spectral": _spectral_block(report, model),
        "bounds": _bounds_block(bounds),
    }
    if args.with_special_cases:
        cases = sp.special_case_checks(model, care, report, tol=qtol)
        out["special_cases"] = _special_cases_block(cases)
        for case in cases:
            if case.applicable:
                identities.append({
                    "name": f"special_case:{case.name}",
                    "residual": float(case.residual),
                    "tolerance": SPECIAL_CASE_TOL[case.name],
                })
    out["verdict"] = _verdict_block(identities, args.tol)
    _emit(out, args.format, args.output)
    return EXIT_PASS if out["verdict"]["pass"] else EXIT_IDENTITY


def cmd_jensen(args) -> int:
    f = jn.rational_function(args.num, args.den)
    qtol = max(min(args.tol / 10.0, 1e-3), 1e-12)
    result = jn.verify_jensen(f, args.mode, qtol)
    out = {
        "rational_function": {
            "numerator": [float(c) for c in f.numerator_coeffs],
            "denominator": [float(c) for c in f.denominator_coeffs],
            "zeros": [[z.real, z.imag] for z in f.zeros],
            "poles": [[p.real, p.imag] for p in f.poles],
            "mode": args.mode,
        },
        "result": {
            "integral_numeric": result.integral_numeric,
            "limit_term": result.limit_term,
            "zeros_term": result.zeros_term,
            "poles_term": result.poles_term,
            "closed_form": result.closed_form,
            "residual": result.residual,
        },
        "verdict": {
            "pass": bool(result.residual <= args.tol),
            "tolerance": args.tol,
        },
    }
    _emit(out, args.format, args.output)
    return EXIT_PASS if out["verdict"]["pass"] else EXIT_IDENTITY


def cmd_simulate(args) -> int:
    model, label = load_system_file(args.path)
    care = solve_care(model)
    cfg = SimulationConfig(dt=args.dt, t_end=args.t_end, trials=args.trials,
                           seed=args.seed, gain_mode=args.gain_mode)
    summary = run_monte_carlo(model, care, cfg)
    passed, diag = whiteness_check(summary, summary.trials, summary.steps)
    gaps_ok = (summary.relative_gap_output <= GAP_TOL
               and summary.relative_gap_state <= GAP_TOL)
    out = {
        "model": _model_block(model, label),
        "simulation": {
            "dt": summary.dt,
            "t_end": summary.t_end,
            "burn_in": summary.burn_in,
            "trials": summary.trials,
            "seed": summary.seed,
            "gain_mode": summary.gain_mode,
            "steps": summary.steps,
            "relative_gap_output": summary.relative_gap_output,
            "relative_gap_state": summary.relative_gap_state,
            "gap_tolerance": GAP_TOL,
            "empirical_output_error_cov": _matrix(
                summary.empirical_output_error_cov),
            "empirical_state_error_cov": _matrix(
                summary.empirical_state_error_cov),
            "whiteness": {
                "pass": bool(passed),
                "threshold": diag["threshold"],
                "worst_value": diag["worst_value"],
                "worst_lag": diag["worst_lag"],
                "worst_entry": list(diag["worst_entry"]),
            },
        },
        "verdict": {
            "pass": bool(passed and gaps_ok),
            "gap_tolerance": GAP_TOL,
        },
    }
    _emit(out, args.format, args.output)
    return EXIT_PASS if out["verdict"]["pass"] else EXIT_IDENTITY


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(sub):
    sub.add_argument("--tol", type=float, default=DEFAULT_TOL,
                     help="identity tolerance for the verdict (default 1e-6)")
    sub.add_argument("--format", choices=("text", "json"), default="text",
                     help="report format")
    sub.add_argument("--output", default=None, metavar="PATH",
                     help="write the report to PATH instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riccati-spectra",
        description="Steady-state filtering error by Riccati and "
                    "frequency-domain routes, cross-verified.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("analyze", help="Riccati solve + integral identity")
    p.add_argument("path", help="system file (JSON)")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = subs.add_parser("verify",
                        help="all identity checks (zeros/poles, Bode, "
                             "special cases)")
    p.add_argument("path", help="system file (JSON)")
    _add_common(p)
    p.add_argument("--with-theorem2", action=argparse.BooleanOptionalAction,
                   default=True, help="include the zeros/poles route")
    p.add_argument("--with-bode", action=argparse.BooleanOptionalAction,
                   default=True, help="include the Bode sensitivity integral")
    p.add_argument("--with-special-cases",
                   action=argparse.BooleanOptionalAction, default=True,
                   help="include the classical reductions")
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("jensen",
                        help="half-plane Jensen formula for a rational "
                             "function")
    p.add_argument("--num", type=float, nargs="+", required=True,
                   metavar="COEFF",
                   help="numerator coefficients, ascending powers")
    p.add_argument("--den", type=float, nargs="+", required=True,
                   metavar="COEFF",
                   help="denominator coefficients, ascending powers")
    p.add_argument("--mode", choices=(jn.MODE_STABLE, jn.MODE_GENERAL),
                   default=jn.MODE_STABLE,
                   help="prop1: all poles stable; prop2: general")
    _add_common(p)
    p.set_defaults(func=cmd_jensen)

    p = subs.add_parser("simulate", help="Monte Carlo oracle")
    p.add_argument("path", help="system file (JSON)")
    _add_common(p)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=200.0)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gain-mode", choices=("steady", "transient"),
                   default="steady")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SimulationBlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except RiccatiSpectraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
