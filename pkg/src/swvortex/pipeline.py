"""Command drivers: run one stage from a RunConfig, write fields and a JSON report.

Report layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "command": "...",
      "status": "ok" | "error",
      "error": null | {"stage": ..., "type": ..., "message": ...},
      "exit_code": 0 | 2 | 3 | 4,
      "config": "<canonical config text>",
      "grid": {"n": ..., "extent": ..., "h": ...},
      "results": {...},                    # command specific
      "artifacts": ["psi1.vtx", ...],      # relative to the output directory
      "timing": {"timestamp": ..., "wall_clock_s": ...}
    }

Keys are sorted and non-finite floats are written as the strings "nan",
"inf", "-inf", so the file is strict JSON. Everything outside ``timing`` is
a deterministic function of the config.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import explicit, gauge, sinh_gordon, synthetic, vekua
from .config import RunConfig, config_to_text
from .errors import ConfigurationError, GeometryError, SolverError, VortexError
from .fieldio import read_field, write_field
from .grid import Field, GridSpec, VortexDivisor, build_mask, square_mask

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COMMANDS = ("generate", "solve", "refine", "verify", "vekua", "energy")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4


@dataclass
class PipelineOutcome:
    report: dict
    exit_code: int
    report_path: Path | None


def jsonable(obj):
    """Convert numbers, tuples, dataclass-like dicts and complex values to strict JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


class _Stages:
    """Tracks the current stage name and the artifacts written so far."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.name = "setup"
        self.artifacts: list[str] = []

    def __call__(self, name: str) -> "_Stages":
        self.name = name
        log.info("stage %s", name)
        return self

    def write(self, fname: str, f) -> None:
        write_field(f, self.out_dir / fname)
        self.artifacts.append(fname)


def _divisor_entries(d: VortexDivisor) -> list:
    return [{"point": p, "multiplicity": m} for p, m in d.entries]


# ------------------------------------------------------------ commands


def _generate(cfg: RunConfig, st: _Stages) -> dict:
    g = cfg.generate
    st("setup")
    grid = GridSpec(extent=cfg.grid.extent, n=cfg.grid.n)
    mask = square_mask(grid) if g.R is None else build_mask(grid, g.R)
    st("generate")
    if g.family == "plane_wave":
        s = explicit.generate_plane_wave(mask, g.c1, g.c2, g.sign)
    elif g.family == "divisor":
        params = explicit.FamilyParams(g.c1, g.c2, g.theta, VortexDivisor(g.vortex))
        s = explicit.generate_divisor_solution(mask, params)
    else:
        if abs(g.c2.imag) > 0:
            raise ConfigurationError("key 'c2' in [generate]: the higgs family needs real c2")
        s = explicit.generate_higgs_solution(mask, g.c1, g.c2.real, connection=g.connection)
    st("write")
    for name in ("psi1", "psi2", "A0", "A1"):
        st.write(f"{name}.vtx", getattr(s, name))
    if s.higgs is not None:
        st.write("higgs.vtx", s.higgs)
    st("verify")
    results = _solution_checks(s)
    results["family"] = g.family
    results["notes"] = list(s.notes)
    return results


def _solution_checks(s: explicit.SolutionFields) -> dict:
    res = gauge.residual_maineq(s)
    out = {
        "residual_maineq": res._asdict(),
        "residual_max": max(res),
        "connection_real": s.connection_real,
    }
    if s.higgs is not None:
        hr = gauge.residual_higgs(s)
        out["residual_higgs"] = hr._asdict()
        out["residual_max"] = max(out["residual_max"], max(hr))
    if s.connection_real:
        fl = gauge.flux(s.A0.real, s.A1.real)
        out["flux"] = fl._asdict()
    try:
        d = explicit.divisor_of(s)
        out["zero_count"] = d.degree
        out["divisor"] = _divisor_entries(d)
    except GeometryError as exc:
        out["zero_count"] = None
        out["divisor_error"] = str(exc)
    pc = explicit.check_pair_compat(s.psi1, s.psi2, tol=1.0)
    out["modulus_mismatch"] = pc.modulus_mismatch
    return out


def _problem(cfg: RunConfig) -> sinh_gordon.SinhGordonProblem:
    s = cfg.solve
    return sinh_gordon.SinhGordonProblem(
        divisor=VortexDivisor(s.vortex),
        M=s.M,
        Mprime=s.Mprime,
        R=s.R,
        eps=s.eps,
        grid=GridSpec(extent=cfg.grid.extent, n=cfg.grid.n),
        tol_newton=s.tol_newton,
        tol_linear=s.tol_linear,
        continuation_steps=s.continuation_steps,
        eps_floor=s.eps_floor,
    )


def _solve(cfg: RunConfig, st: _Stages) -> dict:
    st("setup")
    problem = _problem(cfg)
    st("solve")
    res = sinh_gordon.solve_bvp(problem, mode=cfg.solve.mode)
    st("write")
    st.write("v.vtx", res.v)
    st.write("u.vtx", res.u)
    st("diagnostics")
    out = {
        "residual_sup": res.residual_sup,
        "newton_iters": res.newton_iters,
        "mode": res.mode,
        "monotone_ok": res.monotone_ok,
        "farfield_residual": res.farfield_residual,
        "farfield_forcing": res.farfield_forcing,
        "barrier": res.barrier.to_dict(),
        "history": [list(h) if isinstance(h, (tuple, list)) else h for h in res.history],
        "charges": sinh_gordon.distributional_charge(res.u, problem.divisor, problem.eps),
        "divisor": _divisor_entries(problem.divisor),
    }
    if res.residual_sup > cfg.solve.residual_tol:
        raise SolverError(f"residual_sup {res.residual_sup:.3e} exceeds residual_tol {cfg.solve.residual_tol}")
    M1 = problem.M * math.exp(problem.Mprime)
    M2 = problem.M * math.exp(-problem.Mprime)
    if problem.M > 0 and M1 < 1 and M2 < 1:
        st("reconstruct")
        s = gauge.reconstruct_fields(res.u, gauge.ReconstructionParams(M1, M2))
        st.write("psi1.vtx", s.psi1)
        st.write("psi2.vtx", s.psi2)
        st.write("A0.vtx", s.A0)
        st.write("A1.vtx", s.A1)
        Z = problem.grid.Z
        window = np.abs(Z) < 0.9 * problem.R
        for pt in problem.divisor.points:
            window &= np.abs(Z - pt) > 2 * problem.eps
        rec = {
            "M1": M1,
            "M2": M2,
            "residual_maineq": gauge.residual_maineq(s)._asdict(),
            # away from the staircase boundary layers
            "residual_maineq_window": gauge.residual_maineq(s, where=window)._asdict(),
        }
        try:
            pe = gauge.property_E_fit(s.psi1, s.psi2)
            rec["property_E"] = {
                "verdict": pe.verdict, "M1": pe.M1, "M2": pe.M2, "rate1": pe.rate1,
                "rate2": pe.rate2, "reasons": list(pe.reasons),
            }
        except GeometryError as exc:
            rec["property_E"] = {"verdict": "not_evaluated", "reasons": [str(exc)]}
        out["reconstruction"] = rec
    else:
        out["reconstruction"] = {"skipped": "needs 0 < M exp(+-Mprime) < 1"}
    return out


def _refine(cfg: RunConfig, st: _Stages) -> dict:
    st("setup")
    problem = _problem(cfg)
    rf = cfg.refine
    window = sinh_gordon.Window(rf.window_outer, rf.window_inner)
    st("refine")
    rep = sinh_gordon.nested_refinement(problem, rf.eps_schedule, rf.R_schedule, window)
    out = {
        "schedule": [{"eps": e, "R": R, "n": n} for e, R, n in rep.schedule],
        "differences": rep.differences,
        "non_increasing": rep.non_increasing,
        "residuals": rep.residuals,
        "complete": rep.complete,
    }
    if not rep.complete:
        raise SolverError(rep.error or "refinement incomplete")
    return out


def _verify(cfg: RunConfig, st: _Stages) -> dict:
    v = cfg.verify
    st("read")
    src = Path(v.input)
    if not src.is_dir():
        raise ConfigurationError(f"key 'input' in [verify]: {src} is not a directory")
    parts = {}
    for name in ("A0", "A1", "psi1", "psi2", "higgs"):
        p = src / f"{name}.vtx"
        if p.exists():
            parts[name] = read_field(p)
        elif name != "higgs":
            raise ConfigurationError(f"key 'input' in [verify]: missing {p.name} in {src}")
    st("verify")
    real = not (parts["A0"].is_complex or parts["A1"].is_complex)
    s = explicit.SolutionFields(
        A0=parts["A0"], A1=parts["A1"], psi1=parts["psi1"], psi2=parts["psi2"],
        higgs=parts.get("higgs"), connection_real=real,
    )
    out = _solution_checks(s)
    out["threshold"] = v.threshold
    out["passed"] = out["residual_max"] <= v.threshold
    return out


def _vekua(cfg: RunConfig, st: _Stages) -> dict:
    vk = cfg.vekua
    st("setup")
    grid = GridSpec(extent=1.02, n=vk.n)
    disk = build_mask(grid, 1.0)
    rng = np.random.default_rng(cfg.seed)
    rad = np.sqrt(rng.uniform(0, 0.8 ** 2, vk.points))
    pts = rad * np.exp(2j * np.pi * rng.uniform(size=vk.points))
    st("t_operator")
    one = Field.constant(disk, 1.0 + 0j)
    T1 = vekua.t_operator(one, pts)
    t_err = np.abs(T1 - np.conj(pts))
    st("similarity")
    w = Field.sample(disk, lambda z: np.exp(np.conj(z)))
    zero = Field.constant(disk, 0j)
    fac = vekua.similarity_factor(w, vekua.VekuaCoeffs(one, zero))
    baseline = vekua.t_operator_baseline(disk)
    st("system")
    pw = explicit.generate_plane_wave(disk, 1.0, 1.0, 1)
    alpha = (pw.A0 - 1j * pw.A1) * 0.5
    f1, f2 = vekua.system_factor(pw.psi1, pw.psi2, alpha)
    st.write("similarity_phi.vtx", fac.phi)
    return {
        "sample_points": pts,
        "t_error": t_err,
        "t_error_max": float(t_err.max()),
        "similarity_cr_residual": fac.cr_residual,
        "baseline": baseline,
        "similarity_ratio": fac.cr_residual / baseline if baseline > 0 else "inf",
        "system_cr_residuals": [f1.cr_residual, f2.cr_residual],
        "min_exp_phi": fac.min_exp_phi,
    }


def _energy(cfg: RunConfig, st: _Stages) -> dict:
    en = cfg.energy
    st("setup")
    grid = GridSpec.periodic(en.period, en.n)
    rng = np.random.default_rng(cfg.seed)
    samples = []
    st("bogomolny")
    for _ in range(en.count):
        A0, A1, phi = synthetic.random_ymh_fields(grid, rng)
        rep = gauge.bogomolny_split(A0, A1, phi, stencil="spectral")
        samples.append({
            "ymh_direct": rep.ymh_direct,
            "ymh_bogomolny": rep.ymh_bogomolny,
            "defect": rep.defect,
            "relative_defect": rep.defect / max(1.0, rep.ymh_direct),
            "parts": rep.parts,
            "flux_over_2pi": rep.flux_over_2pi,
        })
    st("flux")
    fgrid = GridSpec(extent=8.0, n=cfg.grid.n)
    fmask = build_mask(fgrid, 7.5)
    A0, A1 = synthetic.unit_flux_connection(fmask)
    fl = gauge.flux(A0, A1)
    return {
        "samples": samples,
        "max_relative_defect": max(s["relative_defect"] for s in samples),
        "unit_flux": fl._asdict(),
    }


_DRIVERS = {
    "generate": _generate, "solve": _solve, "refine": _refine,
    "verify": _verify, "vekua": _vekua, "energy": _energy,
}


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (ConfigurationError, GeometryError)):
        return EXIT_CONFIG
    if isinstance(exc, (SolverError, VortexError)):
        return EXIT_SOLVER
    return EXIT_SOLVER


def run_pipeline(cfg: RunConfig, command: str, out_dir) -> PipelineOutcome:
    """Run ``command`` and write ``report.json`` plus field files into ``out_dir``.

    Stage errors do not propagate: the report records the failing stage and
    the artifacts already written, and the exit code classifies the failure.
    """
    if command not in _DRIVERS:
        raise ConfigurationError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    st = _Stages(out)
    t0 = time.perf_counter()
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config_to_text(cfg),
        "grid": {"n": cfg.grid.n, "extent": cfg.grid.extent, "h": cfg.grid.h},
        "seed": cfg.seed,
        "error": None,
    }
    try:
        results = _DRIVERS[command](cfg, st)
        code = EXIT_OK
        if command == "verify" and not results["passed"]:
            code = EXIT_VERIFY
        report["results"] = results
        report["status"] = "ok" if code == EXIT_OK else "threshold_exceeded"
    except (VortexError, ValueError, np.linalg.LinAlgError) as exc:
        code = _exit_code(exc)
        report["results"] = None
        report["status"] = "error"
        report["error"] = {"stage": st.name, "type": type(exc).__name__, "message": str(exc)}
        log.error("stage %s failed: %s", st.name, exc)
    report["exit_code"] = code
    report["artifacts"] = list(st.artifacts)
    report["timing"] = {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_s": time.perf_counter() - t0,
    }
    path = out / "report.json"
    path.write_text(dump_report(report))
    return PipelineOutcome(report, code, path)


def strip_timing(report_text: str) -> str:
    """Report JSON with the ``timing`` block removed, for determinism checks."""
    data = json.loads(report_text)
    data.pop("timing", None)
    return json.dumps(data, sort_keys=True)
