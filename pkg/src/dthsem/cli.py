"""Command-line front end.

Example::

    python3 -m dthsem --system pendulum --q0 0 --p0 3 --steps 2000 --output run.csv

Settings may also come from a ``key=value`` file passed with ``--config``;
flags given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import diagnostics as diag
from .core import Trajectory
from .singularity import psi
from .stepper import CrossingMode, IntegrationError, SolverConfig, SolverError, integrate
from .systems import SYSTEMS, DomainError, lift

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

DIAGNOSTICS = ("symplectic", "reverse", "conservation")
_SOLVER_KEYS = {
    "inner_tol": float,
    "inner_max_iter": int,
    "outer_tol": float,
    "outer_max_iter": int,
    "bracket_expansion": float,
    "h0_offset": float,
    "lambda_seed": float,
}


class UsageError(ValueError):
    """Bad command line or config file; the message names the offending token."""


@dataclass
class RunSpec:
    system: str
    q0: tuple[float, ...]
    p0: tuple[float, ...]
    t0: float = 0.0
    prho0: float | None = None
    steps: int = 100
    mode: str = CrossingMode.AUTO.value
    psi_k: float = 0.0
    tolerances: dict[str, float] = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"
    diagnostics: tuple[str, ...] = ()
    fd_step: float = 1e-6

    def solver_config(self) -> SolverConfig:
        return SolverConfig(crossing_mode=self.mode, psi_k=self.psi_k, **self.tolerances)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dthsem", description="Integrate a Hamiltonian system with "
                                "energy-constrained midpoint steps and regularized psi = 0 crossings.")
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--system", help=f"one of {', '.join(sorted(SYSTEMS))}")
    p.add_argument("--q0", help="initial positions, comma separated")
    p.add_argument("--p0", help="initial momenta, comma separated")
    p.add_argument("--t0")
    p.add_argument("--prho0", help="explicit time momentum (default: h0_offset policy)")
    p.add_argument("--steps")
    p.add_argument("--mode", help="Auto, ForceGhost or ForceRegularized")
    p.add_argument("--psi-k", dest="psi_k")
    for key in _SOLVER_KEYS:
        p.add_argument("--" + key.replace("_", "-"), dest=key)
    p.add_argument("--output", help="output path (default: CSV on stdout)")
    p.add_argument("--format", help="csv or json (default: from the output suffix, else csv)")
    p.add_argument("--diagnostics", help=f"comma list of {', '.join(DIAGNOSTICS)}")
    p.add_argument("--fd-step", dest="fd_step")
    return p


_KEYS = ("system", "q0", "p0", "t0", "prho0", "steps", "mode", "psi_k", *_SOLVER_KEYS,
         "output", "format", "diagnostics", "fd_step")


def read_config(path) -> dict[str, str]:
    """Parse a ``key=value`` file; ``#`` starts a comment, dashes in keys are allowed."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _number(kind, key, token):
    try:
        value = kind(token)
    except ValueError:
        raise UsageError(f"{key}: not a valid {kind.__name__}: {token!r}") from None
    if kind is float and not math.isfinite(value):
        raise UsageError(f"{key}: must be finite: {token!r}")
    return value


def _vector(key, token) -> tuple[float, ...]:
    parts = [s for s in token.replace(",", " ").split() if s]
    if not parts:
        raise UsageError(f"{key}: empty vector")
    return tuple(_number(float, key, s) for s in parts)


def parse_run_spec(argv=None, config_file=None) -> RunSpec:
    """Build a :class:`RunSpec` from flags and an optional config file."""
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:  # --help
            raise
        raise UsageError("invalid command line") from exc
    values = {}
    path = config_file or ns.config
    if path:
        try:
            values.update(read_config(path))
        except OSError as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from None
    values.update({k: v for k, v in vars(ns).items() if k in _KEYS and v is not None})

    system = values.get("system")
    if system is None:
        raise UsageError("missing --system")
    if system not in SYSTEMS:
        raise UsageError(f"unknown system {system!r}")
    n = SYSTEMS[system]().n
    for key in ("q0", "p0"):
        if key not in values:
            raise UsageError(f"missing --{key}")
    q0, p0 = _vector("q0", values["q0"]), _vector("p0", values["p0"])
    for key, vec in (("q0", q0), ("p0", p0)):
        if len(vec) != n:
            raise UsageError(f"{key}: {system} needs {n} components, got {len(vec)}")

    modes = {m.value.lower(): m.value for m in CrossingMode}
    mode = values.get("mode", CrossingMode.AUTO.value)
    if mode.lower() not in modes:
        raise UsageError(f"unknown mode {mode!r}")

    diags = tuple(s.strip() for s in values.get("diagnostics", "").split(",") if s.strip())
    for d in diags:
        if d not in DIAGNOSTICS:
            raise UsageError(f"unknown diagnostic {d!r}")

    output = values.get("output")
    fmt = values.get("format") or ("json" if output and output.endswith(".json") else "csv")
    if fmt not in ("csv", "json"):
        raise UsageError(f"unknown format {fmt!r}")

    steps = _number(int, "steps", values.get("steps", "100"))
    if steps < 0:
        raise UsageError(f"steps: must be non-negative: {steps}")

    spec = RunSpec(
        system=system,
        q0=q0,
        p0=p0,
        t0=_number(float, "t0", values.get("t0", "0")),
        prho0=_number(float, "prho0", values["prho0"]) if "prho0" in values else None,
        steps=steps,
        mode=modes[mode.lower()],
        psi_k=_number(float, "psi_k", values.get("psi_k", "0")),
        tolerances={k: _number(kind, k, values[k]) for k, kind in _SOLVER_KEYS.items() if k in values},
        output=output,
        format=fmt,
        diagnostics=diags,
        fd_step=_number(float, "fd_step", values.get("fd_step", "1e-6")),
    )
    try:
        spec.solver_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec


# ------------------------------------------------------------------ output


def fmt_real(x: float) -> str:
    """Fixed 17-significant-digit rendering (round-trips every double)."""
    return format(float(x), ".17g")


def csv_header(n: int) -> list[str]:
    return (["k", "t_k"] + [f"q_{i + 1}" for i in range(n)] + [f"p_{i + 1}" for i in range(n)]
            + ["prho", "lambda", "mu", "branch", "H_mid", "psi_mid"])


def step_rows(traj: Trajectory, n: int) -> list[list[str]]:
    """One row per step: the start vertex ``z_k`` and the step's scalars."""
    rows = []
    for k, s in enumerate(traj.steps):
        z = s.z_start
        rows.append([str(k), fmt_real(z.t)] + [fmt_real(v) for v in z.q] + [fmt_real(v) for v in z.p]
                    + [fmt_real(z.prho), fmt_real(s.lam), fmt_real(s.mu), s.branch.value,
                       fmt_real(s.h_mid), fmt_real(s.psi_mid)])
    return rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _step_json(k, s) -> dict:
    z = s.z_start
    return {
        "k": k, "t_k": z.t, "q": z.q.tolist(), "p": z.p.tolist(), "prho": z.prho,
        "lambda": s.lam, "mu": s.mu, "branch": s.branch.value, "H_mid": s.h_mid, "psi_mid": s.psi_mid,
        "z_start": s.z_start.z.tolist(), "z_mid": s.z_mid.z.tolist(), "z_end": s.z_end.z.tolist(),
    }


def run_diagnostics(spec: RunSpec, sys_def, z0, traj: Trajectory, cfg: SolverConfig) -> dict[str, float]:
    out = {}
    if "conservation" in spec.diagnostics:
        obs = [diag.time_momentum()]
        if spec.system == "kepler":
            obs.insert(0, diag.angular_momentum_2d())
        rep = diag.conservation_report(sys_def, traj, obs)
        out["max_abs_H_mid"] = rep.max_abs_H_mid
        for name, value in rep.max_rel_drift.items():
            out[f"max_rel_drift_{name}"] = value
    if "symplectic" in spec.diagnostics:
        out["symplectic_defect"] = diag.symplecticity_check(sys_def, z0, spec.steps, cfg, spec.fd_step)
    if "reverse" in spec.diagnostics:
        out["reverse_mismatch"] = diag.reversibility_check(sys_def, z0, spec.steps, cfg)
    return out


def write_outputs(spec: RunSpec, traj: Trajectory, n: int, diagnostics: dict, stdout=None) -> None:
    stdout = stdout or sys.stdout
    events = [[str(k), kind.value] for k, kind in traj.events]
    if spec.format == "json":
        doc = {
            "config": asdict(spec),
            "steps": [_step_json(k, s) for k, s in enumerate(traj.steps)],
            "events": [{"k": k, "event": kind.value} for k, kind in traj.events],
            "diagnostics": diagnostics,
        }
        text = json.dumps(doc, indent=1) + "\n"
        if spec.output:
            Path(spec.output).write_text(text)
        else:
            stdout.write(text)
        return
    text = _csv_text(csv_header(n), step_rows(traj, n))
    if not spec.output:
        stdout.write(text)
        return
    Path(spec.output).write_text(text)
    Path(spec.output + ".events.csv").write_text(_csv_text(["k", "event"], events))
    if diagnostics:
        rows = [[name, fmt_real(v)] for name, v in diagnostics.items()]
        Path(spec.output + ".diagnostics.csv").write_text(_csv_text(["diagnostic", "value"], rows))


def _error_record(kind: str, message: str, **extra) -> str:
    return json.dumps({"error": kind, "message": message, **extra})


def run(spec: RunSpec, stdout=None, stderr=None) -> int:
    """Execute a run; returns the process exit code."""
    stderr = stderr or sys.stderr
    cfg = spec.solver_config()
    sys_def = SYSTEMS[spec.system]()
    try:
        z0 = lift(sys_def, spec.q0, spec.p0, spec.t0, prho=spec.prho0)
        if psi(sys_def, z0) == cfg.psi_k:
            raise UsageError("initial state lies on psi = psi_k")
    except (DomainError, UsageError) as exc:
        print(_error_record("UsageError", str(exc)), file=stderr)
        return EXIT_USAGE
    code = EXIT_OK
    try:
        traj = integrate(sys_def, z0, spec.steps, cfg)
        diagnostics = run_diagnostics(spec, sys_def, z0, traj, cfg)
    except IntegrationError as exc:
        traj, diagnostics = exc.trajectory, {}
        print(_error_record(type(exc.cause).__name__, str(exc), step=exc.step_index), file=stderr)
        code = EXIT_SOLVER
    except (SolverError, diag.DiagnosticError, DomainError) as exc:
        print(_error_record(type(exc).__name__, str(exc)), file=stderr)
        return EXIT_SOLVER
    try:
        write_outputs(spec, traj, sys_def.n, diagnostics, stdout)
    except OSError as exc:
        print(_error_record("IOError", str(exc)), file=stderr)
        return EXIT_IO
    return code


def main(argv=None) -> int:
    try:
        spec = parse_run_spec(argv)
    except UsageError as exc:
        print(_error_record("UsageError", str(exc)), file=sys.stderr)
        return EXIT_USAGE
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
