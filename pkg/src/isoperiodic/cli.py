"""Command-line front end: periods, invariant suites, flows, Boussinesq checks.

Exit status: 0 on success, 2 when a verification fails, 1 on any error.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import metadata
from typing import Any

import numpy as np

from . import bell, boussinesq, curve, flow
from .errors import ConfigError, IsoperiodicError
from .numerics import IVPSpec, QuadratureSpec

__all__ = ["RunConfig", "run", "main", "build_parser"]

COMMANDS = ("periods", "verify", "flow", "boussinesq", "rauch-check")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "0+unknown"


# ---------------------------------------------------------------------------
# configuration


def _cplx_to_json(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def _parse_complex(value: Any, path: str) -> complex:
    if isinstance(value, dict):
        if set(value) - {"re", "im"}:
            raise ConfigError("complex objects take only 're' and 'im'", path)
        try:
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        except (TypeError, ValueError):
            raise ConfigError("re/im must be numbers", path) from None
    if isinstance(value, bool):
        raise ConfigError("expected a number", path)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError:
            raise ConfigError(f"cannot parse {value!r} as a complex number", path) from None
    raise ConfigError("expected a number or {re, im}", path)


def _parse_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError("expected an integer", path)
    return int(value)


def _parse_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", path)
    return float(value)


@dataclass(frozen=True)
class CurveSection:
    x: complex = 0.5 + 0j
    x_end: complex | None = None


@dataclass(frozen=True)
class PoleSection:
    y0: complex = 2.0 + 0j
    sheet: int = 1


@dataclass(frozen=True)
class FlowSection:
    n: int = 0
    A: complex = 0j
    mode: str = "both"
    n_samples: int = 21


@dataclass(frozen=True)
class ToleranceSection:
    quad_rel: float = 1e-10
    quad_abs: float = 1e-12
    ivp_rel: float = 1e-10
    ivp_abs: float = 1e-12
    verify: float = 1e-7
    rauch_h: float = 1e-4


@dataclass(frozen=True)
class BoussinesqSection:
    nx: int = 64
    ny: int = 64
    z0: complex = 0j


@dataclass(frozen=True)
class OutputSection:
    format: str = "csv"
    path: str | None = None


_SECTIONS = {
    "curve": CurveSection,
    "pole": PoleSection,
    "flow": FlowSection,
    "tolerances": ToleranceSection,
    "boussinesq": BoussinesqSection,
    "output": OutputSection,
}
_COMPLEX_FIELDS = {("curve", "x"), ("curve", "x_end"), ("pole", "y0"), ("flow", "A"), ("boussinesq", "z0")}
_INT_FIELDS = {("pole", "sheet"), ("flow", "n"), ("flow", "n_samples"), ("boussinesq", "nx"), ("boussinesq", "ny")}
_STR_FIELDS = {("flow", "mode"), ("output", "format"), ("output", "path")}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration; every default is explicit."""

    command: str
    curve: CurveSection = field(default_factory=CurveSection)
    pole: PoleSection = field(default_factory=PoleSection)
    flow: FlowSection = field(default_factory=FlowSection)
    tolerances: ToleranceSection = field(default_factory=ToleranceSection)
    boussinesq: BoussinesqSection = field(default_factory=BoussinesqSection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - {"command", *_SECTIONS}
        if unknown:
            raise ConfigError("unknown key", sorted(unknown)[0])
        sections = {}
        for name, klass in _SECTIONS.items():
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError("section must be an object", name)
            names = {f.name for f in dataclasses.fields(klass)}
            extra = set(raw) - names
            if extra:
                raise ConfigError("unknown key", f"{name}.{sorted(extra)[0]}")
            kwargs = {}
            for key, value in raw.items():
                path = f"{name}.{key}"
                if value is None:
                    kwargs[key] = None
                elif (name, key) in _COMPLEX_FIELDS:
                    kwargs[key] = _parse_complex(value, path)
                elif (name, key) in _INT_FIELDS:
                    kwargs[key] = _parse_int(value, path)
                elif (name, key) in _STR_FIELDS:
                    if not isinstance(value, str):
                        raise ConfigError("expected a string", path)
                    kwargs[key] = value
                else:
                    kwargs[key] = _parse_float(value, path)
            sections[name] = klass(**kwargs)
        cfg = cls(command=data.get("command", ""), **sections)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"command": self.command}
        for name in _SECTIONS:
            sec = getattr(self, name)
            d = {}
            for f in dataclasses.fields(sec):
                v = getattr(sec, f.name)
                d[f.name] = _cplx_to_json(v) if isinstance(v, complex) else v
            out[name] = d
        return out

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"must be one of {COMMANDS}", "command")
        x = self.curve.x
        if min(abs(x), abs(x - 1)) < 1e-8:
            raise ConfigError("x must avoid 0 and 1", "curve.x")
        if self.command == "flow" and self.curve.x_end is None:
            raise ConfigError("flow needs an end point", "curve.x_end")
        if self.pole.sheet not in (1, -1):
            raise ConfigError("sheet must be +1 or -1", "pole.sheet")
        if not 0 <= self.flow.n <= flow.MAX_ORDER:
            raise ConfigError(f"n must lie in 0..{flow.MAX_ORDER}", "flow.n")
        if self.flow.mode not in flow.MODES:
            raise ConfigError(f"mode must be one of {flow.MODES}", "flow.mode")
        if self.flow.n_samples < 2:
            raise ConfigError("need at least 2 samples", "flow.n_samples")
        for f in dataclasses.fields(self.tolerances):
            if not getattr(self.tolerances, f.name) > 0:
                raise ConfigError("must be positive", f"tolerances.{f.name}")
        if self.boussinesq.nx < 8 or self.boussinesq.ny < 8:
            raise ConfigError("grid counts must be at least 8", "boussinesq.nx")
        if self.output.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json", "output.format")

    # derived specs
    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(self.tolerances.quad_rel, self.tolerances.quad_abs)

    @property
    def ivp(self) -> IVPSpec:
        return IVPSpec(self.tolerances.ivp_rel, self.tolerances.ivp_abs)

    @property
    def Q0(self) -> curve.SheetedPoint:
        return curve.SheetedPoint(self.pole.y0, self.pole.sheet)

    def region(self) -> curve.Region:
        if self.curve.x_end is not None:
            return curve.Region.around_segment(self.curve.x, self.curve.x_end)
        return curve.Region.around_point(self.curve.x)


# ---------------------------------------------------------------------------
# output


def _fmt(v: float) -> str:
    return repr(float(f"{v:.17g}")) if math.isfinite(v) else str(v)


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return float(v)


class _Table:
    def __init__(self, columns: list[str]):
        self.columns = columns
        self.rows: list[list[float]] = []

    def add(self, *values) -> None:
        self.rows.append([_cell(v) for v in values])

    def csv(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(v if isinstance(v, str) else _fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, (complex, np.complexfloating)):
        return _cplx_to_json(complex(obj))
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    return obj


def _provenance(cfg: RunConfig, cycles: curve.CycleBasis | None) -> dict:
    return {
        "config": cfg.to_dict(),
        "version": _version(),
        "loops": cycles.describe() if cycles is not None else None,
    }


def _emit(cfg: RunConfig, provenance: dict, payload: dict, table: _Table | None, out) -> None:
    if cfg.output.format == "csv" and table is not None:
        out.write("# " + json.dumps(_jsonable(provenance), sort_keys=True) + "\n")
        out.write(table.csv())
    else:
        body = {"provenance": provenance, **payload}
        if table is not None:
            body["columns"] = table.columns
            body["rows"] = table.rows
        out.write(json.dumps(_jsonable(body), indent=2, sort_keys=False) + "\n")


# ---------------------------------------------------------------------------
# pipelines


def _cmd_periods(cfg: RunConfig):
    cycles = curve.CycleBasis.for_region(cfg.region())
    x = cfg.curve.x
    per = curve.compute_periods(x, cycles, cfg.quad)
    ev = curve.eval_omega(x, per, cfg.Q0)
    W = curve.eval_W_Q0_Px(x, per, cfg.Q0, ev.omega_Q0)
    ram = curve.compute_ramification_constants(x, cycles, per, cfg.quad)
    values = {
        "I0": per.I0,
        "tau": per.tau,
        "Ix": per.Ix,
        "I0_ram": ram[0],
        "I1_ram": ram[1],
        "omega_P0": ev.omega_P0,
        "omega_P1": ev.omega_P1,
        "omega_Px": ev.omega_Px,
        "omega_Q0": ev.omega_Q0,
        "W_Q0_Px": W,
        "a_normalization": per.a_normalization,
    }
    table = _Table(["quantity", "re", "im"])
    for name, v in values.items():
        table.add(name, v.real, v.imag)
    return cycles, {"periods": values, "b_orientation": per.b_orientation}, table, 0


def invariant_suites(cfg: RunConfig, cycles: curve.CycleBasis) -> list[dict]:
    """Identity, normalization, Bell and Rauch suites at the configured point."""
    x, Q0, tol = cfg.curve.x, cfg.Q0, cfg.tolerances
    per = curve.compute_periods(x, cycles, cfg.quad)
    ev = curve.eval_omega(x, per, Q0)
    suites = []

    zero = abs(ev.omega_P0**2 + ev.omega_P1**2 + ev.omega_Px**2) / abs(ev.omega_P0) ** 2
    suites.append({"suite": "zero_identity", "residual": zero, "threshold": 1e-12})
    suites.append({"suite": "a_normalization", "residual": abs(per.a_normalization - 1), "threshold": 1e-9})

    I0r, I1r = curve.compute_ramification_constants(x, cycles, per, cfg.quad)
    p0, p1 = ev.omega_P0, ev.omega_P1
    rel = max(
        abs(I0r / p0 - per.Ix / ev.omega_Px + x * per.I0**2 / 4) / abs(per.I0) ** 2,
        abs(I1r / p1 - per.Ix / ev.omega_Px + (x - 1) * per.I0**2 / 4) / abs(per.I0) ** 2,
        abs(I0r / p0 - I1r / p1 + per.I0**2 / 4) / abs(per.I0) ** 2,
    )
    Ix_ref = curve.compute_Ix(x, cycles.refined(2), per, cfg.quad)
    suites.append({"suite": "Ix_relations", "residual": rel, "threshold": 1e-10})
    suites.append({"suite": "Ix_refinement", "residual": abs(Ix_ref - per.Ix) / abs(per.Ix), "threshold": 1e-10})

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        sig = bell.SigmaVector.from_values(rng.normal(size=8) + 1j * rng.normal(size=8))
        table = bell.bell_table_recursive(sig, 8)
        for l in range(9):
            ref = bell.bell_explicit(l, sig)
            worst = max(worst, abs(table[l] - ref) / max(abs(ref), 1e-300))
    suites.append({"suite": "bell_equivalence", "residual": worst, "threshold": 1e-12})

    report = curve.rauch_check(x, cycles, Q0, tol.rauch_h)
    for e in report.entries:
        suites.append(
            {
                "suite": f"rauch_{e.name}",
                "residual": e.relative,
                "threshold": 1e-6,
                "half_step_ratio": e.ratio,
                "ratio_ok": abs(e.ratio - 4) <= 0.5,
            }
        )
    for s in suites:
        s["passed"] = bool(s["residual"] <= s["threshold"] and s.get("ratio_ok", True))
    return suites


def _cmd_verify(cfg: RunConfig):
    cycles = curve.CycleBasis.for_region(cfg.region())
    suites = invariant_suites(cfg, cycles)
    ok = all(s["passed"] for s in suites)
    table = _Table(["suite", "residual", "threshold", "passed"])
    for s in suites:
        table.add(s["suite"], s["residual"], s["threshold"], s["passed"])
    payload = {"suites": suites, "passed": ok}
    return cycles, payload, table, 0 if ok else 2


def _cmd_flow(cfg: RunConfig):
    cycles = curve.CycleBasis.for_region(cfg.region())
    fc = flow.FlowConfig(
        n=cfg.flow.n,
        A=cfg.flow.A,
        x0=cfg.curve.x,
        x1=cfg.curve.x_end,
        Q0_init=cfg.Q0,
        ivp=cfg.ivp,
        mode=cfg.flow.mode,
        n_samples=cfg.flow.n_samples,
        quad=cfg.quad,
    )
    res = flow.integrate_flow(fc, cycles)
    report = flow.verify_isoperiodic(res, cfg.tolerances.verify)
    real_path = cfg.curve.x.imag == 0 and cfg.curve.x_end.imag == 0
    cols = ["x"] if real_path else ["Re(x)", "Im(x)"]
    table = _Table(cols + ["Re(y0)", "Im(y0)", "Re(y0p)", "Im(y0p)", "Re(B)", "Im(B)", "abs_B_drift"])
    for s, B in zip(res.samples, res.B_values):
        xs = [s.x.real] if real_path else [s.x.real, s.x.imag]
        table.add(*xs, s.y0.real, s.y0.imag, s.y0p.real, s.y0p.imag, B.real, B.imag, abs(B - res.B0))
    ok = report.passed and (res.discrepancy is None or res.discrepancy < 10 * cfg.tolerances.verify)
    payload = {
        "B0": res.B0,
        "max_B_drift": res.max_B_drift,
        "relative_drift": res.relative_drift,
        "discrepancy": res.discrepancy,
        "diagnostics": res.diagnostics,
        "verification": dataclasses.asdict(report),
        "passed": ok,
    }
    return cycles, payload, table, 0 if ok else 2


def _cmd_boussinesq(cfg: RunConfig):
    cycles = curve.CycleBasis.for_region(cfg.region())
    x = cfg.curve.x
    per = curve.compute_periods(x, cycles, cfg.quad)
    wave = boussinesq.compute_wave_data(x, cfg.Q0, per, cfg.boussinesq.z0)
    params = boussinesq.ThetaParams(per.tau)
    grid = boussinesq.GridSpec.one_period(wave, cfg.boussinesq.nx, cfg.boussinesq.ny)
    fit = boussinesq.solve_c(wave, params, grid)
    wave = wave.with_c(fit.c)
    max_res = boussinesq.boussinesq_residual(wave, params, grid)
    X, Y = grid.mesh()
    terms, u, uXX, _ = boussinesq.pde_terms(X, Y, wave, params)
    terms[2] = 6 * (u + wave.c) * uXX
    pointwise = np.abs(terms.sum(axis=0)) / np.max(np.abs(terms), axis=0)
    uu = u + wave.c
    table = _Table(["X", "Y", "Re(u)", "Im(u)", "residual"])
    for Xv, Yv, uv, rv in zip(X.ravel(), Y.ravel(), uu.ravel(), pointwise.ravel()):
        table.add(Xv, Yv, uv.real, uv.imag, rv)
    ok = max_res < 1e-8 and fit.spread <= 1e-8 * abs(fit.c)
    summary = {
        "U": wave.U,
        "V": wave.V,
        "c": wave.c,
        "tau": wave.tau,
        "c_spread": fit.spread,
        "max_residual": max_res,
        "effectivization": boussinesq.effectivization_diagnostic(wave, params),
        "passed": ok,
    }
    return cycles, summary, table, 0 if ok else 2


def _cmd_rauch(cfg: RunConfig):
    cycles = curve.CycleBasis.for_region(cfg.region())
    report = curve.rauch_check(cfg.curve.x, cycles, cfg.Q0, cfg.tolerances.rauch_h)
    entries = [
        {
            "name": e.name,
            "analytic": e.analytic,
            "residual_h": e.residual,
            "residual_h2": e.residual_fine,
            "relative": e.relative,
            "ratio": e.ratio,
        }
        for e in report.entries
    ]
    ok = all(e.relative < 1e-6 and abs(e.ratio - 4) <= 0.5 for e in report.entries)
    table = _Table(["entry", "relative", "residual_h", "residual_h2", "ratio"])
    for e in report.entries:
        table.add(e.name, e.relative, e.residual, e.residual_fine, e.ratio)
    return cycles, {"entries": entries, "passed": ok}, table, 0 if ok else 2


_PIPELINES = {
    "periods": _cmd_periods,
    "verify": _cmd_verify,
    "flow": _cmd_flow,
    "boussinesq": _cmd_boussinesq,
    "rauch-check": _cmd_rauch,
}


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute ``cfg`` and write its artifacts; returns the exit status."""
    stdout = stdout or sys.stdout
    cycles, payload, table, status = _PIPELINES[cfg.command](cfg)
    prov = _provenance(cfg, cycles)
    buf = io.StringIO()
    _emit(cfg, prov, payload, table, buf)
    if cfg.output.path:
        with open(cfg.output.path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        if cfg.output.format == "csv" and table is not None and payload:
            with open(cfg.output.path + ".summary.json", "w", encoding="utf-8") as fh:
                fh.write(json.dumps(_jsonable({"provenance": prov, **payload}), indent=2) + "\n")
    else:
        stdout.write(buf.getvalue())
    return status


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isoperiodic", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--x", help="modulus x (start of the flow segment)")
    p.add_argument("--x-end", dest="x_end", help="end of the flow segment")
    p.add_argument("--y0", help="pole position, e.g. 2 or 1.5+0.5j")
    p.add_argument("--sheet", type=int, choices=(1, -1))
    p.add_argument("--n", type=int, help="pole order parameter (pole of order n+2)")
    p.add_argument("--A-re", dest="A_re", type=float)
    p.add_argument("--A-im", dest="A_im", type=float)
    p.add_argument("--mode", choices=flow.MODES)
    p.add_argument("--tol", type=float, help="verification tolerance")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(str(exc), "--config") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "--config") from None
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object", "--config")
    data["command"] = args.command

    def put(section, key, value):
        if value is not None:
            data.setdefault(section, {})
            if not isinstance(data[section], dict):
                raise ConfigError("section must be an object", section)
            data[section][key] = value

    put("curve", "x", args.x)
    put("curve", "x_end", args.x_end)
    put("pole", "y0", args.y0)
    put("pole", "sheet", args.sheet)
    put("flow", "n", args.n)
    put("flow", "mode", args.mode)
    if args.A_re is not None or args.A_im is not None:
        old = _parse_complex(data.get("flow", {}).get("A", 0), "flow.A")
        re = args.A_re if args.A_re is not None else old.real
        im = args.A_im if args.A_im is not None else old.imag
        put("flow", "A", {"re": re, "im": im})
    put("tolerances", "verify", args.tol)
    put("output", "path", args.out)
    put("output", "format", args.format)
    return RunConfig.from_dict(data)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (IsoperiodicError, ArithmeticError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
