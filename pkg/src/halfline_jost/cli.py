"""Command line interface: ``halfline-jost <command> --config run.json``.

Exit status 0 on success, 2 on invalid input, 3 when a numerical budget or
residual threshold is not met.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import bc as bcmod
from . import series, solve, spectrum, trace
from .errors import HalflineJostError, InvalidInput, NumericalBudgetError
from .potential import PotentialModel

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

_matrix = {"type": "array", "items": {"type": "array"}}
_pos = {"type": "number", "exclusiveMinimum": 0}
_pos_or_null = {"anyOf": [_pos, {"type": "null"}]}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["boundary"],
    "additionalProperties": False,
    "properties": {
        "potential": {
            "type": "object",
            "required": ["n"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "rho": {"type": "number", "exclusiveMinimum": 1, "maximum": 2},
                "terms": {"type": "array", "items": {
                    "type": "object", "required": ["H", "profile"],
                    "properties": {"H": _matrix, "profile": {
                        "type": "object", "required": ["kind"],
                        "properties": {"kind": {"enum": ["exp", "power", "gauss", "well"]},
                                       "c": {"type": "number"}, "alpha": _pos, "p": _pos, "width": _pos},
                        "additionalProperties": False}}}},
            },
        },
        "boundary": {
            "oneOf": [
                {"type": "object", "required": ["preset"],
                 "properties": {"preset": {"enum": ["dirichlet", "neumann", "delta-prime", "robin"]},
                                "n": {"type": "integer", "minimum": 1}, "a": {"type": "number"},
                                "theta": {"type": "array", "items": {"type": "number"}}},
                 "additionalProperties": False},
                {"type": "object", "required": ["A", "B"],
                 "properties": {"A": _matrix, "B": _matrix}, "additionalProperties": False},
            ]
        },
        "tolerances": {"type": "object", "additionalProperties": False,
                       "properties": {"ode": _pos, "quad": _pos, "nullity": _pos, "branch": _pos,
                                      "residual": _pos, "tail": _pos}},
        "ranges": {"type": "object", "additionalProperties": False,
                   "properties": {"kappa_max": _pos_or_null, "k_min": _pos, "k_max": _pos_or_null,
                                  "x_max": _pos_or_null, "plot_points": {"type": "integer", "minimum": 1}}},
        "orders": {"type": "object", "additionalProperties": False,
                   "properties": {"N_series": {"type": "integer", "minimum": 1},
                                  "q_max": {"type": "integer", "minimum": 1}}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"format": {"enum": ["json", "csv"]}, "path": {"type": ["string", "null"]}}},
    },
}

DEFAULTS = {
    "tolerances": {"ode": 1e-12, "quad": 1e-11, "nullity": 1e-6, "branch": 1e-12, "residual": 1e-6,
                   "tail": 1e-8},
    "ranges": {"kappa_max": None, "k_min": 1e-6, "k_max": None, "x_max": None, "plot_points": 201},
    "orders": {"N_series": 8, "q_max": 4},
    "output": {"format": "json", "path": None},
}


class RunConfig:
    """Schema-validated run configuration with defaults filled in."""

    def __init__(self, raw: dict):
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise InvalidInput(f"config: {exc.message} at {'/'.join(map(str, exc.absolute_path))}") from None
        self.raw = raw
        for section, values in DEFAULTS.items():
            setattr(self, section, {**values, **raw.get(section, {})})
        r = self.ranges
        if r["k_max"] is not None and r["k_min"] >= r["k_max"]:
            raise InvalidInput(f"empty k-range: k_min={r['k_min']} >= k_max={r['k_max']}")
        self.boundary = bcmod.from_config(raw["boundary"])
        pot = raw.get("potential", {"n": self.boundary.n})
        self.potential = PotentialModel.from_config(pot)
        if self.potential.n != self.boundary.n:
            raise InvalidInput(f"potential has n={self.potential.n}, boundary has n={self.boundary.n}")

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from None
        return cls(raw)

    def solver(self, rtol: float | None = None) -> solve.SolverConfig:
        tol = self.tolerances["ode"] if rtol is None else rtol
        return solve.SolverConfig(rtol=tol, atol=tol, tail_tol=min(tol, 1e-10), x_max=self.ranges["x_max"])


# deterministic serialization -------------------------------------------------------

def _fmt(obj) -> str:
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj) + 0.0  # folds -0.0 into 0.0
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g") if x != int(x) or abs(x) >= 1e17 else f"{x:.1f}"
    if isinstance(obj, (complex, np.complexfloating)):
        return _fmt([obj.real, obj.imag])
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with fixed field order and 17 significant digits for floats."""
    return _fmt(obj) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# commands --------------------------------------------------------------------------

def cmd_validate_bc(cfg: RunConfig, args) -> int:
    diag = bcmod.reduce_to_diagonal(cfg.boundary)
    _emit(dumps({"valid": True, **diag.summary()}), args.out)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, args) -> int:
    res = spectrum.compute_spectrum(cfg.potential, cfg.boundary, kappa_max=cfg.ranges["kappa_max"],
                                    config=cfg.solver(min(cfg.tolerances["ode"], 1e-10)),
                                    nullity_rtol=cfg.tolerances["nullity"])
    _emit(dumps(res.to_report()), args.out)
    return EXIT_OK


def _order(cfg: RunConfig, args) -> int:
    return args.order if args.order is not None else cfg.orders["N_series"]


def _q_max(cfg: RunConfig, args) -> int:
    return args.q_max if args.q_max is not None else cfg.orders["q_max"]


def cmd_coeffs(cfg: RunConfig, args) -> int:
    tables = series.coefficient_tables(cfg.potential, cfg.boundary, N=_order(cfg, args))
    rep = tables.to_report()
    rep["dual_path_difference"] = float(np.max(np.abs(tables.e - tables.e_log))) if len(tables.e) else 0.0
    _emit(dumps(rep), args.out)
    return EXIT_OK


def cmd_trace_check(cfg: RunConfig, args) -> int:
    q_max = _q_max(cfg, args)
    N = max(_order(cfg, args), q_max)
    report = trace.full_report(cfg.potential, cfg.boundary, q_max=q_max, N=N, k_min=cfg.ranges["k_min"],
                               k_max=cfg.ranges["k_max"], kappa_max=cfg.ranges["kappa_max"],
                               tol=cfg.tolerances["quad"], tail_tol=cfg.tolerances["tail"],
                               nullity_rtol=cfg.tolerances["nullity"], branch_floor=cfg.tolerances["branch"],
                               config=cfg.solver())
    _emit(dumps(report.to_report()), args.out)
    threshold = cfg.tolerances["residual"]
    failed = [r.q for r in report.rows if r.rel_residual > threshold]
    if failed:
        print(f"residual above {threshold:g} at orders {failed}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(v), ".17g") for v in row])


def cmd_plot_data(cfg: RunConfig, args) -> int:
    r = cfg.ranges
    k_min = r["k_min"] if "k_min" in cfg.raw.get("ranges", {}) else 1e-2
    k_max = r["k_max"] if r["k_max"] is not None else 1e2
    if not (0 < k_min < k_max) or r["plot_points"] < 1:
        raise InvalidInput(f"empty k-range [{k_min}, {k_max}]")
    out = Path(args.out or cfg.output["path"] or "lnh-profile.csv")
    # rounding to 12 digits puts decades such as k = 1 exactly on the grid
    ks = np.array([float(f"{v:.12g}") for v in np.geomspace(k_min, k_max, r["plot_points"])])
    q_max = _q_max(cfg, args)
    tables = series.coefficient_tables(cfg.potential, cfg.boundary, N=max(_order(cfg, args), q_max))
    config = cfg.solver()
    prof = trace.log_h_on_grid(cfg.potential, cfg.boundary, tables, ks, config)
    kappa_max = r["kappa_max"] or spectrum.kappa_max_default(cfg.potential, cfg.boundary)
    kap = np.linspace(kappa_max / r["plot_points"], kappa_max, r["plot_points"])
    _, dets = spectrum.det_on_imaginary_axis(cfg.potential, cfg.boundary, kap, config)
    integrands = [trace.integrand(tables, q, prof.k_grid, prof.lnh_plus, prof.lnh_minus).real
                  for q in range(1, q_max + 1)]

    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["k", "re_lnh", "im_lnh", "ln_e", "minus_i_ln_o"], prof.to_rows())
    stem = out.with_suffix("")
    _write_csv(Path(f"{stem}-detJ.csv"), ["kappa", "re_det", "im_det"],
               zip(kap, dets.real, dets.imag))
    _write_csv(Path(f"{stem}-integrands.csv"), ["k"] + [f"q{q}" for q in range(1, q_max + 1)],
               zip(prof.k_grid, *integrands))
    return EXIT_OK


COMMANDS = {
    "validate-bc": cmd_validate_bc,
    "spectrum": cmd_spectrum,
    "coeffs": cmd_coeffs,
    "trace-check": cmd_trace_check,
    "plot-data": cmd_plot_data,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halfline-jost", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="run configuration (JSON)")
    ap.add_argument("--out", help="output path; stdout when omitted (plot-data: CSV path)")
    ap.add_argument("--q-max", type=int, dest="q_max", help="highest trace identity order")
    ap.add_argument("--order", type=int, help="series truncation order N")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.q_max is not None and args.q_max < 1 or args.order is not None and args.order < 1:
            raise InvalidInput("--q-max and --order must be positive")
        cfg = RunConfig.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except InvalidInput as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), end="", file=sys.stderr)
        return EXIT_INVALID
    except NumericalBudgetError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "diagnostics", None):
            payload["diagnostics"] = {str(k): v for k, v in exc.diagnostics.items()}
        try:
            text = dumps(payload)
        except TypeError:
            payload.pop("diagnostics", None)
            text = dumps(payload)
        print(text, end="", file=sys.stderr)
        return EXIT_NUMERICAL
    except HalflineJostError as exc:  # pragma: no cover - every error derives from one of the above
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), end="", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
