"""Command-line front end.

Examples::

    geogates phases --omega 1 --omega1 0.5 --omega2 0.5
    geogates controlled-u --omega 1 --J 16/27 --omega0 '4*sqrt(11)/27'
    geogates sweep --omega 1 --axis omega1 --values 0.1,0.3,0.5 --circle

Parameters accept decimals and the exact forms ``a/b``, ``a*sqrt(b)``,
``a*sqrt(b)/c``, ``sqrt(b)`` and ``sqrt(b)/c``.  Hard errors print a JSON
object with a machine-readable ``error`` code to stderr and exit non-zero.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Optional

import numpy as np

from . import gatesynth, invariant, propagate, qops
from .errors import ConfigParseError, GeoGateError, OutOfDomain

SCHEMA_VERSION = "1.0"
COMMANDS = ("verify", "phases", "gate", "solve", "controlled-u", "sweep")
SWEEP_AXES = ("omega", "omega1", "omega2")
DEFAULT_SUBSTEPS = 25

_UNSIGNED = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_NUMBER_RE = re.compile(
    rf"""^\s*(?P<neg>-)?\s*
    (?:(?P<a>{_UNSIGNED})(?:\s*\*\s*sqrt\(\s*(?P<b>{_UNSIGNED})\s*\))?
      |sqrt\(\s*(?P<b2>{_UNSIGNED})\s*\))
    (?:\s*/\s*(?P<c>{_UNSIGNED}))?\s*$""",
    re.VERBOSE,
)


def parse_number(text: str, field_name: Optional[str] = None, line: Optional[int] = None) -> float:
    """Evaluate the restricted numeric grammar, keeping rational parts exact until the end."""
    match = _NUMBER_RE.match(str(text))
    if not match:
        raise ConfigParseError(f"cannot parse {text!r} as a number", field=field_name, line=line)
    a = Fraction(match["a"]) if match["a"] else Fraction(1)
    c = Fraction(match["c"]) if match["c"] else Fraction(1)
    if c == 0:
        raise ConfigParseError(f"division by zero in {text!r}", field=field_name, line=line)
    rational = a / c
    radicand = match["b"] or match["b2"]
    value = float(rational) * math.sqrt(float(Fraction(radicand))) if radicand else float(rational)
    return -value if match["neg"] else value


@dataclass
class RunConfig:
    command: str
    omega: float = 1.0
    omega1: Optional[float] = None
    omega2: Optional[float] = None
    coupling: Optional[float] = None
    omega0: Optional[float] = None
    gamma: Optional[float] = None
    grid_points: int = invariant.DEFAULT_GRID_POINTS
    steps: Optional[int] = None
    cycles: int = 1
    max_m: int = gatesynth.DEFAULT_MAX_M
    K: int = 0
    output_format: str = "json"
    output_path: Optional[str] = None
    timestamp: bool = True
    axis: Optional[str] = None
    values: list = field(default_factory=list)
    circle: bool = False
    jobs: int = 1
    expressions: dict = field(default_factory=dict)

    @property
    def two_qubit(self) -> bool:
        return self.coupling is not None or self.omega0 is not None

    @property
    def substeps(self) -> int:
        return self.steps // self.grid_points

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigParseError(f"unknown command {self.command!r}", field="command")
        if not self.omega > 0:
            raise ConfigParseError("omega must be positive", field="omega")
        for name in ("omega1", "omega2", "omega0"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ConfigParseError(f"{name} must be non-negative", field=name)
        if self.grid_points < invariant.MIN_GRID_POINTS or self.grid_points % 2:
            raise ConfigParseError("grid-points must be even and >= 64", field="grid_points")
        if self.steps is None:
            self.steps = DEFAULT_SUBSTEPS * self.grid_points
        if self.steps < 1000 or self.steps % self.grid_points:
            raise ConfigParseError("steps must be >= 1000 and a multiple of grid-points", field="steps")
        if self.cycles < 1:
            raise ConfigParseError("cycles must be >= 1", field="cycles")
        if self.max_m < 1:
            raise ConfigParseError("max-m must be >= 1", field="max_m")
        if self.output_format not in ("json", "csv"):
            raise ConfigParseError("format must be json or csv", field="format")
        if self.output_format == "csv" and self.command not in ("phases", "sweep"):
            raise ConfigParseError(f"csv output is only available for phases and sweep", field="format")
        if self.jobs < 1:
            raise ConfigParseError("jobs must be >= 1", field="jobs")
        self._validate_drive()
        return self

    def _validate_drive(self):
        cmd = self.command
        if cmd == "controlled-u" or (cmd in ("verify", "phases", "gate") and self.two_qubit):
            for name in ("coupling", "omega0"):
                if getattr(self, name) is None:
                    raise ConfigParseError(f"{cmd} with two qubits needs --{'J' if name == 'coupling' else name}", field=name)
        elif cmd in ("verify", "phases", "gate"):
            for name in ("omega1", "omega2"):
                if getattr(self, name) is None:
                    raise ConfigParseError(f"{cmd} needs --{name}", field=name)
        elif cmd == "solve":
            if self.gamma is None and self.omega1 is None:
                raise ConfigParseError("solve needs --omega1 (seed) or --gamma (target phase)", field="omega1")
        elif cmd == "sweep":
            if self.axis not in SWEEP_AXES:
                raise ConfigParseError(f"axis must be one of {', '.join(SWEEP_AXES)}", field="axis")

    def drive(self):
        if self.two_qubit:
            return invariant.TwoQubitDrive(self.omega, self.coupling, self.omega0)
        return invariant.SingleQubitDrive(self.omega, self.omega1, self.omega2)

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("output_path")
        d.pop("timestamp")
        d.pop("jobs")
        return d


@dataclass
class Report:
    schema_version: str
    command: str
    config: dict
    results: dict
    diagnostics: dict
    timestamp: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls(**json.loads(text))


# -- serialisation helpers -------------------------------------------------------

def _f(x) -> float:
    return float(x)


def _matrix(M) -> dict:
    M = np.asarray(M)
    return {"re": [[_f(v) for v in row] for row in M.real], "im": [[_f(v) for v in row] for row in M.imag]}


def _phase_levels(report: invariant.PhaseReport, scale: int = 1) -> list:
    out = []
    for n in range(len(report.eigenvalues)):
        total, dyn, geo = (scale * report.total[n], scale * report.dynamic[n], scale * report.geometric[n])
        out.append(
            {
                "eigenvalue": _f(report.eigenvalues[n]),
                "total": _f(total),
                "total_mod": _f(qops.wrap_phase(total)),
                "dynamic": _f(dyn),
                "dynamic_mod": _f(qops.wrap_phase(dyn)),
                "geometric": _f(geo),
                "geometric_mod": _f(qops.wrap_phase(geo)),
            }
        )
    return out


def _closed_form_levels(drive) -> list:
    """Closed-form phases aligned with the frame's descending eigenvalue order."""
    if isinstance(drive, invariant.SingleQubitDrive):
        blocks = [((drive.lam / 2, -drive.lam / 2), invariant.closed_form_phases(drive.omega, drive.omega1, drive.omega2))]
    else:
        blocks = [
            ((lam / 2, -lam / 2), invariant.closed_form_phases(*params))
            for lam, params in zip((drive.lam1, drive.lam2), drive.blocks)
        ]
    levels = []
    for eigs, cf in blocks:
        for i, e in enumerate(eigs):
            levels.append((e, cf.total[i], cf.dynamic[i], cf.geometric[i]))
    levels.sort(key=lambda x: -x[0])
    return levels


def _phase_analysis(cfg: RunConfig, drive):
    frame = invariant.drive_frame(drive, cfg.grid_points)
    prop = propagate.simulate(drive, steps_per_cycle=cfg.steps, record_every=cfg.substeps)
    report = invariant.phase_decomposition(drive, frame, prop)
    return frame, prop, report


def _closed_form_deviation(report: invariant.PhaseReport, drive) -> float:
    closed = _closed_form_levels(drive)
    worst = 0.0
    for n, (_, tot, dyn, geo) in enumerate(closed):
        for got, want in ((report.total[n], tot), (report.dynamic[n], dyn), (report.geometric[n], geo)):
            worst = max(worst, float(qops.phase_distance(got, want)))
    return worst


# -- commands --------------------------------------------------------------------

def cmd_phases(cfg: RunConfig):
    drive = cfg.drive()
    frame, prop, report = _phase_analysis(cfg, drive)
    closed = [
        {"eigenvalue": _f(e), "total": _f(cfg.cycles * t), "dynamic": _f(cfg.cycles * d), "geometric": _f(cfg.cycles * g)}
        for e, t, d, g in _closed_form_levels(drive)
    ]
    results = {
        "levels": _phase_levels(report, cfg.cycles),
        "closed_form": closed,
        "angles": {k: _f(v) for k, v in drive.angles._asdict().items() if not math.isnan(v)},
    }
    diagnostics = {
        "split_defect": report.split_defect(),
        "closed_form_deviation": _closed_form_deviation(report, drive),
        "periodicity_error": frame.periodicity_error(),
        "eigenvalue_drift": frame.eigenvalue_drift(),
        "unitarity_defect": prop.unitarity_defect(),
        "max_transition_amplitude": invariant.max_transition_amplitude(frame, prop),
    }
    return results, diagnostics


def cmd_gate(cfg: RunConfig):
    drive = cfg.drive()
    frame = invariant.drive_frame(drive, cfg.grid_points)
    prop = propagate.simulate(drive, steps_per_cycle=cfg.steps, record_every=cfg.substeps)
    gate = propagate.cyclic_gate(drive, frame, cfg.cycles, prop)
    results = {
        "cycles": cfg.cycles,
        "computational_basis": _matrix(gate.listing_order),
        "invariant_basis": _matrix(gate.invariant_basis),
        "eigenphases_mod": [_f(x) for x in gate.eigenphases],
        "basis_order": "uu,du,ud,dd" if cfg.two_qubit else "up,down",
    }
    diagnostics = {k: _f(v) for k, v in gate.diagnostics.items()}
    if not cfg.two_qubit:
        formula = propagate.gate_formula(drive.angles.chi, cfg.cycles * math.pi * (1 - drive.lam / drive.omega))
        diagnostics["formula_fidelity"] = qops.gate_fidelity(gate.computational_basis, formula)
    return results, diagnostics


def _solution_dict(sol: gatesynth.EliminationSolution) -> dict:
    d = sol.drive
    out = {
        "omega": _f(d.omega),
        "omega1": _f(d.omega1),
        "omega2": _f(d.omega2),
        "K": sol.K,
        "m": sol.m,
        "residual": _f(sol.residual),
    }
    if sol.dynamic is not None:
        out["dynamic"] = [_f(x) for x in sol.dynamic]
        out["geometric"] = [_f(x) for x in sol.geometric]
        out["geometric_mod"] = [_f(qops.wrap_phase(x)) for x in sol.geometric]
    return out


def cmd_solve(cfg: RunConfig):
    if cfg.gamma is not None:
        sol = gatesynth.synthesize_single_qubit_phase(cfg.omega, cfg.gamma, grid_points=cfg.grid_points)
        results = {"target_gamma": _f(cfg.gamma), "solution": _solution_dict(sol)}
    else:
        sol = gatesynth.solve_elimination_single(cfg.omega, cfg.K, cfg.omega1, grid_points=cfg.grid_points)
        results = {"solution": _solution_dict(sol)}
    return results, {"abs_residual": abs(_f(sol.residual))}


def cmd_controlled_u(cfg: RunConfig):
    spec = gatesynth.build_controlled_u(
        cfg.omega, cfg.coupling, cfg.omega0, cfg.max_m, cfg.K, cfg.grid_points, cfg.substeps
    )
    c = spec.cycles
    results = {
        "m": c.m,
        "N": c.N,
        "lambda1_over_omega": f"{c.ratio.numerator}/{c.ratio.denominator}",
        "cycle_error": _f(c.approximation_error),
        "constraint_residual": _f(spec.constraint_residual),
        "geometric": [_f(x) for x in spec.geometric],
        "geometric_mod": [_f(x) for x in spec.geometric_mod],
        "target_geometric": [_f(x) for x in spec.target_geometric],
        "lower_eigenphases_mod": [_f(x) for x in spec.lower_eigenphases],
        "gate": _matrix(spec.gate.listing_order),
        "basis_order": "uu,du,ud,dd",
    }
    diagnostics = {
        "upper_fidelity": spec.upper_fidelity,
        "upper_deviation": spec.upper_deviation,
        "formula_fidelity": spec.formula_fidelity,
        **{k: _f(v) for k, v in spec.gate.diagnostics.items()},
    }
    return results, diagnostics


def _check(name, value, tol):
    return {"name": name, "value": _f(value), "tolerance": _f(tol), "passed": bool(value <= tol)}


def cmd_verify(cfg: RunConfig):
    drive = cfg.drive()
    frame, prop, report = _phase_analysis(cfg, drive)
    if cfg.two_qubit:
        lam = max(drive.lam1, drive.lam2)
    else:
        lam = drive.lam
    tau = drive.period
    h = 1e-5 * tau
    residual = max(
        invariant.invariance_residual(
            lambda s: invariant.hamiltonian(drive, s), lambda s: invariant.invariant(drive, s), t, h
        )
        for t in np.linspace(0, tau, 17)
    )
    analytic = propagate.sample_analytic(drive, prop.times)
    gate = propagate.cyclic_gate(drive, frame, 1, prop)
    checks = [
        _check("invariance_residual_scaled", residual / (drive.omega * lam), 1e-7),
        _check("oracle_max_error", propagate.max_propagator_error(prop, analytic), 1e-8),
        _check("unitarity_defect", prop.unitarity_defect(), 1e-10),
        _check("invariant_basis_offdiagonal", gate.diagnostics["offdiagonal_leakage"], 1e-8),
        _check("max_transition_amplitude", invariant.max_transition_amplitude(frame, prop), 1e-8),
        _check("closed_form_phase_deviation", _closed_form_deviation(report, drive), 1e-6),
        _check("phase_split_defect", report.split_defect(), 1e-8),
        _check("frame_periodicity", frame.periodicity_error(), 1e-10),
        _check("eigenvalue_drift_scaled", frame.eigenvalue_drift() / lam, 1e-10),
    ]
    if cfg.two_qubit:
        leak = qops.cross_block_leakage(prop.unitaries)
        checks.append(_check("block_leakage", leak, 1e-8))
    passed = all(c["passed"] for c in checks)
    return {"checks": checks, "passed": passed}, {"failed": [c["name"] for c in checks if not c["passed"]]}


SWEEP_COLUMNS = (
    "omega", "omega1", "omega2", "lambda", "chi", "theta",
    "gamma_d_plus", "gamma_d_minus", "gamma_g_plus", "gamma_g_minus",
    "constraint_residual", "error",
)


def _sweep_row(cfg: RunConfig, value: float) -> dict:
    params = {"omega": cfg.omega, "omega1": cfg.omega1, "omega2": cfg.omega2}
    params[cfg.axis] = value
    if cfg.circle and cfg.axis == "omega1":
        w, w1 = params["omega"], params["omega1"]
        params["omega2"] = math.sqrt(w * w1 - w1 * w1) if w * w1 >= w1 * w1 else float("nan")
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update({k: v for k, v in params.items() if v is not None and math.isfinite(v)})
    try:
        if any(v is None or not math.isfinite(v) for v in params.values()):
            raise OutOfDomain(f"no valid drive at {cfg.axis}={value!r}")
        drive = invariant.SingleQubitDrive(**params)
        frame = invariant.drive_frame(drive, cfg.grid_points)
        report = invariant.phase_decomposition(drive, frame, propagate.sample_analytic(drive, frame.times))
        angles = drive.angles
        row.update(
            {
                "lambda": drive.lam,
                "chi": angles.chi,
                "theta": angles.theta,
                "gamma_d_plus": report.dynamic[0],
                "gamma_d_minus": report.dynamic[1],
                "gamma_g_plus": report.geometric[0],
                "gamma_g_minus": report.geometric[1],
                "constraint_residual": gatesynth.constraint_lhs(drive.omega, drive.omega1, drive.omega2) - cfg.K * drive.omega / 2,
            }
        )
    except GeoGateError as exc:
        row["error"] = exc.code
    return row


def sweep(cfg: RunConfig, axis: Optional[str] = None, values=None) -> str:
    """CSV table with one row per value; failing points carry an error code."""
    if axis is not None:
        cfg.axis = axis
    if values is not None:
        cfg.values = list(values)
    if cfg.axis not in SWEEP_AXES:
        raise ConfigParseError(f"axis must be one of {', '.join(SWEEP_AXES)}", field="axis")
    for v in cfg.values:
        if not math.isfinite(v):
            raise ConfigParseError("sweep values must be finite", field="values")
    rows = _sweep_rows(cfg)
    return _rows_to_csv(rows, SWEEP_COLUMNS)


def _sweep_rows(cfg: RunConfig) -> list:
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(lambda v: _sweep_row(cfg, v), cfg.values))
    return [_sweep_row(cfg, v) for v in cfg.values]


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row[c]) for c in columns])
    return buf.getvalue()


def cmd_sweep(cfg: RunConfig):
    rows = _sweep_rows(cfg)
    return {"axis": cfg.axis, "rows": rows}, {"failed_points": sum(1 for r in rows if r["error"])}


HANDLERS = {
    "verify": cmd_verify,
    "phases": cmd_phases,
    "gate": cmd_gate,
    "solve": cmd_solve,
    "controlled-u": cmd_controlled_u,
    "sweep": cmd_sweep,
}


def run(cfg: RunConfig) -> Report:
    cfg.validate()
    start = time.perf_counter()
    results, diagnostics = HANDLERS[cfg.command](cfg)
    stamp = None
    if cfg.timestamp:
        diagnostics["runtime_s"] = time.perf_counter() - start
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return Report(SCHEMA_VERSION, cfg.command, cfg.echo(), results, diagnostics, stamp)


def render(report: Report, cfg: RunConfig) -> str:
    if cfg.output_format == "json":
        return report.to_json()
    if report.command == "sweep":
        return _rows_to_csv(report.results["rows"], SWEEP_COLUMNS)
    columns = ("eigenvalue", "total", "total_mod", "dynamic", "dynamic_mod", "geometric", "geometric_mod")
    return _rows_to_csv(report.results["levels"], columns)


# -- argument handling ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigParseError(message)


NUMERIC_FIELDS = {"omega": "omega", "omega1": "omega1", "omega2": "omega2", "J": "coupling", "omega0": "omega0", "gamma": "gamma"}
INT_FIELDS = {"grid_points": "grid_points", "steps": "steps", "cycles": "cycles", "max_m": "max_m", "K": "K", "jobs": "jobs"}


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="file of 'key = value' lines; flags override it")
    for name in NUMERIC_FIELDS:
        common.add_argument(f"--{name}", dest=name)
    common.add_argument("--grid-points", dest="grid_points")
    common.add_argument("--steps")
    common.add_argument("--cycles")
    common.add_argument("--max-m", dest="max_m")
    common.add_argument("--K", dest="K")
    common.add_argument("--jobs")
    common.add_argument("--format", dest="format", choices=("json", "csv"))
    common.add_argument("--output")
    common.add_argument("--no-timestamp", action="store_true")
    common.add_argument("--axis")
    common.add_argument("--values", help="comma-separated list")
    common.add_argument("--circle", action="store_true", help="sweep omega1 along the K=0 circle")

    parser = _Parser(prog="geogates", description="Geometric gates from periodic invariant operators.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common])
    return parser


def _read_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config file: {exc}", field="config") from exc
    out = {}
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigParseError(f"expected 'key = value', got {raw!r}", line=lineno)
        key, value = (s.strip() for s in text.split("=", 1))
        key = key.replace("-", "_")
        out[key] = (value, lineno)
    return out


def _parse_int(text, name, line=None) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigParseError(f"{name} must be an integer, got {text!r}", field=name, line=line) from None


def build_config(argv) -> RunConfig:
    args = _build_parser().parse_args(argv)
    raw = {}
    if args.config:
        raw.update(_read_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None or value is False:
            continue
        raw[key] = (value, None)

    cfg = RunConfig(command=args.command)
    known = set(NUMERIC_FIELDS) | set(INT_FIELDS) | {"format", "output", "no_timestamp", "axis", "values", "circle"}
    for key, (value, line) in raw.items():
        if key not in known:
            raise ConfigParseError(f"unknown parameter {key!r}", field=key, line=line)
        if key in NUMERIC_FIELDS:
            setattr(cfg, NUMERIC_FIELDS[key], parse_number(value, key, line))
            cfg.expressions[key] = str(value).strip()
        elif key in INT_FIELDS:
            setattr(cfg, INT_FIELDS[key], _parse_int(value, key, line))
        elif key == "format":
            cfg.output_format = str(value)
        elif key == "output":
            cfg.output_path = str(value)
        elif key == "no_timestamp":
            cfg.timestamp = not (value is True or str(value).lower() in ("1", "true", "yes"))
        elif key == "circle":
            cfg.circle = value is True or str(value).lower() in ("1", "true", "yes")
        elif key == "axis":
            cfg.axis = str(value)
        elif key == "values":
            items = [s for s in str(value).split(",") if s.strip()]
            cfg.values = [parse_number(s, "values", line) for s in items]
    if cfg.command == "sweep" and "format" not in raw:
        cfg.output_format = "csv"
    return cfg.validate()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = build_config(argv)
        report = run(cfg)
    except GeoGateError as exc:
        payload = {"error": exc.code, "message": str(exc)}
        for attr in ("field", "line"):
            if getattr(exc, attr, None) is not None:
                payload[attr] = getattr(exc, attr)
        sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
        return exc.exit_status
    text = render(report, cfg)
    if cfg.output_path:
        with open(cfg.output_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.command == "verify" and not report.results["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
