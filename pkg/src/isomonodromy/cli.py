"""Command-line front end.

Usage::

    isomonodromy COMMAND --config job.json [--out DIR] [--tol X] [--seed K] [--checkpoints N]

Commands: ``validate``, ``stokes``, ``monodromy``, ``orbit``, ``schlesinger``,
``jmu``, ``check``.  Every run writes ``report.json`` to the output directory
(flows also write ``trajectory.csv``).  Exit codes: 0 success, 2 validation
failure, 3 numerical failure (tolerances unmet), 4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .connection_model import (
    MeromorphicConnection,
    complex_from_json,
    complex_to_json,
    connection_from_json,
    connection_to_json,
    dumps,
    validate,
)
from .errors import ConfigError, NumericalFailure, ValidationError
from .isomonodromy_flows import (
    DeformationPoint,
    FlowState,
    integrate_schlesinger,
    invariance_report,
    write_trajectory_csv,
)
from .monodromy_numeric import (
    LocalSolutions,
    MonodromyParams,
    default_tentacles,
    degree_by_quadrature,
    monodromy_data,
    trace_invariants,
)
from .orbit_geometry import ExtendedOrbitPoint, moments, self_check
from .stokes_data import anti_stokes, local_monodromy

COMMANDS = ("validate", "stokes", "monodromy", "orbit", "schlesinger", "jmu", "check")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3, 4

DEFAULT_LIMITS = {
    "relation": 1e-8,
    "degree": 1e-8,
    "loop": 1e-6,
    "monodromy_drift": 1e-6,
    "symplectic_drift": 1e-5,
    "exponent_drift": 1e-8,
    "orbit": 1e-9,
    "moment_map": 1e-6,
}


class Job:
    """A parsed configuration file with command-line overrides applied."""

    def __init__(self, raw: dict[str, Any], args: argparse.Namespace):
        if not isinstance(raw, dict):
            raise ConfigError("the configuration must be a JSON object")
        if "connection" not in raw:
            raise ConfigError("the configuration needs a 'connection' entry")
        self.raw = raw
        self.connection = connection_from_json(raw["connection"])
        params = dict(raw.get("params", {}))
        allowed = set(MonodromyParams.__dataclass_fields__)
        unknown = set(params) - allowed
        if unknown:
            raise ConfigError(f"unknown numeric parameters: {sorted(unknown)}")
        if args.tol is not None:
            params["tol"] = args.tol
        for key, value in params.items():
            if isinstance(value, (int, float)) and value <= 0 and key != "truncation_extra":
                raise ConfigError(f"parameter {key} must be positive")
        self.params = MonodromyParams(**params)
        self.seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
        flow = dict(raw.get("flow", {}))
        self.checkpoints = (args.checkpoints if args.checkpoints is not None
                            else int(flow.get("checkpoints", 4)))
        if self.checkpoints < 1:
            raise ConfigError("checkpoints must be at least 1")
        self.flow = flow
        self.flow_tol = float(flow.get("tol", args.tol if args.tol is not None else 1e-11))
        self.limits = {**DEFAULT_LIMITS, **raw.get("limits", {})}
        self.samples = int(raw.get("orbit", {}).get("samples", 8))

    def path(self, state: FlowState) -> list[DeformationPoint]:
        vertices_json = self.flow.get("path")
        if not vertices_json:
            raise ConfigError("this command needs flow.path")
        points = []
        for vertex in vertices_json:
            try:
                if isinstance(vertex, dict):
                    pos = complex_from_json(vertex["positions"])
                    irr = vertex.get("irregular")
                    if irr is not None:
                        irr = tuple(None if x is None else complex_from_json(x).reshape(-1, state.rank)
                                    for x in irr)
                    points.append(DeformationPoint(pos, irr))
                else:
                    points.append(DeformationPoint(complex_from_json(vertex)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"malformed path vertex: {exc}") from exc
            if len(points[-1].positions) != len(state.positions):
                raise ConfigError("path vertices must list one position per pole")
        if points[0].irregular is not None:
            current = state.irregular_types()
            points = [DeformationPoint(p.positions, tuple(
                current[i] if (p.irregular is None or p.irregular[i] is None) else p.irregular[i]
                for i in range(len(current)))) for p in points]
        return points

    def echo(self) -> dict[str, Any]:
        return {"params": self.params.to_json(), "seed": self.seed,
                "checkpoints": self.checkpoints, "flow_tol": self.flow_tol,
                "limits": self.limits, "connection": connection_to_json(self.connection)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return complex_to_json(obj)
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return complex_to_json(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_json"):
        return _jsonable(obj.to_json())
    return obj


class Failure(Exception):
    """A tolerance was not met; carries the exit code."""

    def __init__(self, message: str, code: int = EXIT_NUMERICAL):
        super().__init__(message)
        self.code = code


def _require(ok: bool, message: str, code: int = EXIT_NUMERICAL) -> None:
    if not ok:
        raise Failure(message, code)


# ---------------------------------------------------------------- commands


def cmd_validate(job: Job, out: Path) -> dict:
    report = validate(job.connection).to_json()
    _require(report["passed"], "validation failed: residue sum or genericity", EXIT_VALIDATION)
    return report


def cmd_stokes(job: Job, out: Path) -> dict:
    conn = job.connection
    tent = default_tentacles(conn, job.params)
    poles = []
    for i, part in enumerate(conn.parts):
        loc = LocalSolutions(conn, i, tent.base_angles[i], job.params)
        entry = {"index": i, "order": part.order, "anti_stokes": anti_stokes(loc.nf).to_json(),
                 "base_angle": tent.base_angles[i]}
        if part.order >= 2:
            sm = loc.stokes()
            loop = loc.loop_monodromy()
            dev = float(np.abs(loop - local_monodromy(sm)).max())
            entry.update(S=sm.S, P=sm.P.real.astype(int), Lambda=sm.exponent,
                         diagnostics=sm.diagnostics, loop_deviation=dev)
            _require(dev <= job.limits["loop"],
                     f"pole {i}: Stokes data disagree with loop monodromy ({dev:.2e})")
        poles.append(entry)
    return {"poles": poles}


def cmd_monodromy(job: Job, out: Path) -> dict:
    md = monodromy_data(job.connection, None, job.params)
    report = md.to_json()
    report["degree_quadrature"] = degree_by_quadrature(job.connection)
    report["trace_invariants"] = trace_invariants(md)
    _require(md.residual <= job.limits["relation"],
             f"relation residual {md.residual:.2e} exceeds {job.limits['relation']:.1e}")
    _require(abs(md.degree) <= job.limits["degree"], f"degree {md.degree} is not zero")
    return report


def cmd_orbit(job: Job, out: Path) -> dict:
    conn = job.connection
    rng = np.random.default_rng(job.seed)
    poles = []
    worst = 0.0
    for i, part in enumerate(conn.parts):
        pt = ExtendedOrbitPoint(conn.framing(i), part.coefficients)
        checks = self_check(pt, rng, job.samples)
        mu_g, mu_t = moments(pt)
        poles.append({"index": i, "order": part.order, "checks": checks,
                      "moment_G": mu_g, "moment_T": np.diag(mu_t)})
        worst = max(worst, checks["skew"], checks["lift_independence"],
                    checks["decouple_roundtrip"], checks["decoupled_form"])
        _require(checks["moment_map"] <= job.limits["moment_map"],
                 f"pole {i}: moment map identity defect {checks['moment_map']:.2e}")
    total = sum(p.residue for p in conn.parts)
    _require(worst <= job.limits["orbit"], f"orbit form identities defect {worst:.2e}")
    return {"poles": poles, "moment_sum": total}


def cmd_schlesinger(job: Job, out: Path) -> dict:
    conn = job.connection
    if any(k != 1 for k in conn.orders):
        raise ValidationError("the schlesinger command needs simple poles only")
    state = FlowState.from_connection(conn, gauge_slice=False)
    path = job.path(state)
    vertices = [np.asarray(p.positions) for p in path]
    # refine the polyline into checkpoints of equal length
    lengths = [np.linalg.norm(b - a) for a, b in zip(vertices[:-1], vertices[1:])]
    total = float(sum(lengths))
    marks = np.linspace(0.0, total, job.checkpoints + 1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])

    def at(s):
        j = min(int(np.searchsorted(cum, s, side="right") - 1), len(lengths) - 1)
        frac = 0.0 if lengths[j] == 0 else (s - cum[j]) / lengths[j]
        return vertices[j] + frac * (vertices[j + 1] - vertices[j])

    residues = np.array([p.coefficients[0] for p in conn.parts])
    tent0 = default_tentacles(conn, job.params)
    inv0 = trace_invariants(monodromy_data(conn, tent0, job.params))
    rows, drift, current = [], 0.0, vertices[0]
    for j, s in enumerate(marks):
        if j > 0:
            inner = [current] + [v for v, c in zip(vertices, cum) if marks[j - 1] < c < s] + [at(s)]
            residues = integrate_schlesinger(current, residues, inner, job.flow_tol)
            current = inner[-1]
        moved = MeromorphicConnection(current, tuple(r[None] for r in residues))
        tent = default_tentacles(moved, job.params, p0=tent0.p0)
        md = monodromy_data(moved, tent, job.params)
        inv = trace_invariants(md)
        d = float(np.max(np.abs(inv - inv0) / np.maximum(1.0, np.abs(inv0))))
        drift = max(drift, d)
        rows.append({"arclength": s, "positions": current, "monodromy_drift": d,
                     "relation_residual": md.residual,
                     "residue_sum": float(np.abs(residues.sum(axis=0)).max())})
    write_trajectory_csv(str(out / "trajectory.csv"), rows)
    _require(drift <= job.limits["monodromy_drift"], f"monodromy drift {drift:.2e}")
    return {"path_length": total, "monodromy_drift": drift, "rows": rows,
            "final_residues": residues}


def cmd_jmu(job: Job, out: Path) -> dict:
    state = FlowState.from_connection(job.connection)
    path = job.path(state)
    report = invariance_report(
        state, path, checkpoints=job.checkpoints, tol=job.flow_tol, seed=job.seed,
        monodromy_params=job.params, normalization=job.flow.get("normalization", "slice"),
        symplectic=bool(job.flow.get("symplectic", True)), fd_step=job.flow.get("fd_step"))
    write_trajectory_csv(str(out / "trajectory.csv"), report["rows"])
    final = report.pop("final_state")
    report["final_state"] = final.to_json()
    report["final_irregular_types"] = final.irregular_types()
    _require(report["monodromy_drift"] <= job.limits["monodromy_drift"],
             f"monodromy drift {report['monodromy_drift']:.2e}")
    _require(report["framed_drift"] <= job.limits["monodromy_drift"],
             f"framed monodromy drift {report['framed_drift']:.2e}")
    _require(report["exponent_drift"] <= job.limits["exponent_drift"],
             f"formal monodromy exponents drift by {report['exponent_drift']:.2e}")
    if "symplectic_drift" in report:
        _require(report["symplectic_drift"] <= job.limits["symplectic_drift"],
                 f"symplectic drift {report['symplectic_drift']:.2e}")
    return report


def cmd_check(job: Job, out: Path) -> dict:
    """Every property check that applies to the configuration; failures are
    collected and the worst exit code wins."""
    results, codes = {}, []
    steps = [("validate", cmd_validate), ("orbit", cmd_orbit), ("monodromy", cmd_monodromy)]
    if any(k >= 2 for k in job.connection.orders):
        steps.append(("stokes", cmd_stokes))
    if job.flow.get("path"):
        steps.append(("jmu", cmd_jmu))
    for name, fn in steps:
        try:
            results[name] = {"status": "ok", "result": fn(job, out)}
        except Failure as exc:
            results[name] = {"status": "failed", "message": str(exc)}
            codes.append(exc.code)
        except ValidationError as exc:
            results[name] = {"status": "failed", "message": f"{type(exc).__name__}: {exc}"}
            codes.append(EXIT_VALIDATION)
        except NumericalFailure as exc:
            results[name] = {"status": "failed", "message": f"{type(exc).__name__}: {exc}"}
            codes.append(EXIT_NUMERICAL)
        if name == "validate" and codes:
            break
    if codes:
        raise Failure("; ".join(f"{k}: {v['message']}" for k, v in results.items()
                                if v["status"] != "ok"), min(codes)) from None
    return results


HANDLERS = {
    "validate": cmd_validate,
    "stokes": cmd_stokes,
    "monodromy": cmd_monodromy,
    "orbit": cmd_orbit,
    "schlesinger": cmd_schlesinger,
    "jmu": cmd_jmu,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isomonodromy", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON job file")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--tol", type=float, default=None, help="integrator tolerance override")
    parser.add_argument("--seed", type=int, default=None, help="random seed for sampled checks")
    parser.add_argument("--checkpoints", type=int, default=None,
                        help="number of flow checkpoints")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report: dict[str, Any] = {"command": args.command, "version": __version__}
    code = EXIT_OK
    job = None
    try:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration: {exc}") from exc
        job = Job(raw, args)
        report["echo"] = job.echo()
        report["result"] = HANDLERS[args.command](job, out)
        report["status"] = "ok"
    except Failure as exc:
        code = exc.code
        report.update(status="failed", message=str(exc))
    except ConfigError as exc:
        code = EXIT_CONFIG
        report.update(status="config_error", message=str(exc))
    except ValidationError as exc:
        code = EXIT_VALIDATION
        report.update(status="validation_failure", message=f"{type(exc).__name__}: {exc}")
    except NumericalFailure as exc:
        code = EXIT_NUMERICAL
        report.update(status="numerical_failure", message=f"{type(exc).__name__}: {exc}")
    report["exit_code"] = code
    (out / "report.json").write_text(dumps(_jsonable(report)) + "\n")
    if code != EXIT_OK:
        print(f"{args.command}: {report.get('message', 'failed')}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
