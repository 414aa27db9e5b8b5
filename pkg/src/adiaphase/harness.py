"""Configuration-driven sweep runner tying all modules together.

A sweep builds model -> trajectory -> timing table, evolves at every
requested time, and writes one CSV row per point with enough metadata to
re-run it.  Identical spec + seed produces byte-identical output apart
from the timestamp header line.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

import numpy as np

from . import analysis, timing
from .errors import UndefinedPhaseError, ValidationError
from .models import (
    HamiltonianModel,
    reduce_search_to_2level,
    search_hamiltonian,
    tabulated_model,
)
from .propagator import evolve
from .schedules import parse_schedule
from .spectral import build_trajectory, find_coupled_tracks, gap_integral

CSV_COLUMNS = (
    "model,schedule,m,nu,n,parity,T,err_norm,amp_abs,amp_pred,bound_eq1,"
    "delta_S,delta_G,delta_T,integrator_steps"
)

_DEFAULT_GRID_K = 1024


@dataclass
class SweepSpec:
    """One sweep definition; exactly one of n_range / T_list must be set."""

    model: str = "search:n=4"
    schedule: str = "linear"
    m: int = 0
    nu: int | None = None          # None: strongest coupled track
    n_range: tuple | None = None
    parity: str = "both"           # even | odd | both
    n_step: int = 1
    T_list: list | None = None
    tol: float = 1e-10
    grid_k: int = _DEFAULT_GRID_K
    output: str | None = None
    seed: int = 0
    jobs: int | None = None
    full_model: bool = False

    def validate(self):
        if (self.n_range is None) == (self.T_list is None):
            raise ValidationError(
                "exactly one of n_range and T_list must be provided"
            )
        if self.tol <= 0:
            raise ValidationError("tol must be positive")
        if self.grid_k < 16:
            raise ValidationError("grid_k must be at least 16")
        if self.parity not in ("even", "odd", "both"):
            raise ValidationError(f"bad parity filter {self.parity!r}")
        if self.m < 0 or self.n_step < 1:
            raise ValidationError("m must be >= 0 and n_step >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        spec = cls(**data)
        if spec.n_range is not None:
            spec.n_range = (int(spec.n_range[0]), int(spec.n_range[1]))
        return spec

    def canonical_json(self) -> str:
        data = asdict(self)
        if data.get("n_range") is not None:
            data["n_range"] = list(data["n_range"])
        return json.dumps(data, sort_keys=True)


def build_model(model_spec: str, schedule_spec: str, full_model=False) -> HamiltonianModel:
    """'search:n=<int>' (two-level reduction unless full_model) or a path to
    a tabulated-model JSON file."""
    text = model_spec.strip()
    if text.lower().startswith("search:"):
        arg = text.split(":", 1)[1].strip().lower()
        if not arg.startswith("n="):
            raise ValidationError(f"expected 'search:n=<int>', got {model_spec!r}")
        n_qubits = int(arg[2:])
        schedule = parse_schedule(schedule_spec)
        full = search_hamiltonian(n_qubits, schedule)
        return full if full_model else reduce_search_to_2level(full)
    return tabulated_model(text)


@dataclass
class SweepContext:
    """Everything derived from a SweepSpec before any evolution runs."""

    model: HamiltonianModel
    traj: object
    nu: int
    theta: float
    theta_flagged: bool
    gap: float
    gap_error: float
    delta_s: float
    bound_coefficient: float
    table: timing.TimingTable | None


def prepare_sweep(spec: SweepSpec) -> SweepContext:
    spec.validate()
    model = build_model(spec.model, spec.schedule, full_model=spec.full_model)
    traj = build_trajectory(model, spec.grid_k)
    nu = spec.nu
    if nu is None:
        coupled = find_coupled_tracks(model, traj)
        if not coupled:
            raise ValidationError("no excited track couples to the transferred one")
        nu = coupled[0]
    bq = timing.boundary_quantity(model, traj, nu, spec.m)
    theta_flagged = False
    try:
        theta = timing.estimate_theta(bq)
    except UndefinedPhaseError:
        theta = 0.0
        theta_flagged = True
    gi = gap_integral(traj, nu)
    delta_s = timing.symmetry_defect(bq, theta)
    bound = analysis.standard_bound(model, traj)
    table = None
    if spec.n_range is not None:
        n_values = timing.expand_n_values(spec.n_range, spec.parity, spec.n_step)
        if not n_values:
            raise ValidationError("n range and parity filter select no points")
        table = timing.optimal_times(gi.value, theta, n_values, nu=nu)
        if not table.rows:
            raise ValidationError("no usable times after filtering")
    return SweepContext(
        model=model, traj=traj, nu=nu, theta=theta, theta_flagged=theta_flagged,
        gap=gi.value, gap_error=gi.error_estimate, delta_s=delta_s,
        bound_coefficient=bound, table=table,
    )


@dataclass
class SweepResult:
    spec: SweepSpec
    context: SweepContext
    rows: list
    summary: dict
    path: str | None = None


def _row_points(spec: SweepSpec, ctx: SweepContext):
    if ctx.table is not None:
        return [(r.n, r.parity, r.T) for r in ctx.table.rows]
    pts = [(None, "", float(t)) for t in spec.T_list]
    if not pts:
        raise ValidationError("empty T list")
    return pts


def _jobs_count(spec: SweepSpec) -> int:
    if spec.jobs is not None:
        return max(1, int(spec.jobs))
    env = os.environ.get("ADIA_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Execute a sweep; returns rows plus fitted even/odd exponents and
    writes the CSV when spec.output is set."""
    ctx = prepare_sweep(spec)
    points = _row_points(spec, ctx)
    t_max = max(p[2] for p in points)

    # One sequential calibration run at the largest T pins a deterministic
    # starting step count for every point, so thread scheduling cannot
    # change any result.
    calib = evolve(ctx.model, t_max, tol=spec.tol, traj=ctx.traj)

    def start_steps(t):
        return max(256, int(calib.steps * (t / t_max) / 2))

    def run_point(point):
        n, parity, t = point
        res = evolve(ctx.model, t, tol=spec.tol, traj=ctx.traj,
                     start_steps=start_steps(t))
        amps = analysis.transition_amplitudes(res, ctx.traj)
        amp_abs = abs(amps.get(ctx.nu, 0.0))
        pred = analysis.predict_amplitude_general(
            ctx.model, ctx.traj, ctx.nu, t, spec.m, ctx.theta, ctx.gap, n=n,
        )
        return {
            "model": spec.model,
            "schedule": spec.schedule,
            "m": spec.m,
            "nu": ctx.nu,
            "n": "" if n is None else n,
            "parity": parity,
            "T": t,
            "err_norm": res.error_norm,
            "amp_abs": amp_abs,
            "amp_pred": pred.amplitude,
            "bound_eq1": ctx.bound_coefficient / t,
            "delta_S": ctx.delta_s,
            "delta_G": 0.0,
            "delta_T": 0.0,
            "integrator_steps": res.steps,
        }

    n_jobs = _jobs_count(spec)
    if n_jobs > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(run_point, points))
    else:
        rows = [run_point(p) for p in points]

    summary = summarize(spec, ctx, rows)
    result = SweepResult(spec=spec, context=ctx, rows=rows, summary=summary)
    if spec.output:
        write_sweep_csv(spec.output, rows, spec)
        result.path = spec.output
    return result


def summarize(spec: SweepSpec, ctx: SweepContext, rows: list) -> dict:
    """Fitted exponents per parity (above the 100*tol amplitude floor) plus
    the timing context."""
    floor = 100.0 * spec.tol
    summary = {
        "nu": ctx.nu,
        "theta": ctx.theta,
        "theta_flagged": ctx.theta_flagged,
        "gap_integral": ctx.gap,
        "gap_integral_error": ctx.gap_error,
        "delta_S": ctx.delta_s,
        "bound_coefficient": ctx.bound_coefficient,
        "asymptotic_window_start": 10.0 / ctx.gap,
        "points": len(rows),
    }
    for parity in ("even", "odd"):
        pts = [(r["T"], r["amp_abs"]) for r in rows
               if r["parity"] == parity and r["amp_abs"] >= floor]
        key = f"{parity}_exponent"
        if len(pts) >= 5:
            fit = analysis.fit_power_law(pts)
            summary[key] = fit.exponent
            summary[f"{parity}_residual_rms"] = fit.residual_rms
            summary[f"{parity}_points"] = fit.n_points
        else:
            summary[key] = None
    return summary


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_sweep_csv(path, rows, spec: SweepSpec | None = None,
                    extra_meta: dict | None = None) -> None:
    """CSV with `#` metadata header lines; only the generated_at line varies
    between identical runs."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# adiaphase-sweep-v1\n")
        fh.write(f"# generated_at: {datetime.now(timezone.utc).isoformat()}\n")
        if spec is not None:
            fh.write(f"# config: {spec.canonical_json()}\n")
        if extra_meta:
            fh.write(f"# meta: {json.dumps(extra_meta, sort_keys=True)}\n")
        fh.write(CSV_COLUMNS + "\n")
        cols = CSV_COLUMNS.split(",")
        for row in rows:
            fh.write(",".join(_format_cell(row[c]) for c in cols) + "\n")


def read_sweep_csv(path) -> list:
    """Rows of a sweep CSV as dicts with numeric fields parsed."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                missing = [c for c in CSV_COLUMNS.split(",") if c not in header]
                if missing:
                    raise ValidationError(f"CSV missing column(s): {missing}")
                continue
            cells = line.split(",")
            row = dict(zip(header, cells))
            for key in ("T", "err_norm", "amp_abs", "amp_pred", "bound_eq1",
                        "delta_S", "delta_G", "delta_T"):
                row[key] = float(row[key])
            row["m"] = int(row["m"])
            row["nu"] = int(row["nu"])
            row["n"] = int(row["n"]) if row["n"] else None
            row["integrator_steps"] = int(row["integrator_steps"])
            rows.append(row)
    if header is None:
        raise ValidationError(f"{path}: no header row found")
    return rows


def run_tolerance(spec: SweepSpec, perturbation: analysis.PerturbationSpec) -> dict:
    """Tolerance sweep driver: even-n rows of the sweep spec with one defect
    family injected; returns rows (sweep CSV schema) and the fitted verdict."""
    ctx = prepare_sweep(spec)
    if ctx.table is None:
        raise ValidationError("tolerance sweeps need an n_range")
    result = analysis.tolerance_sweep(
        ctx.model, ctx.traj, ctx.table, spec.m, perturbation, tol=spec.tol,
    )
    rows = []
    for r in result.rows:
        rows.append({
            "model": spec.model,
            "schedule": spec.schedule,
            "m": spec.m,
            "nu": ctx.nu,
            "n": r.n,
            "parity": "even",
            "T": r.T_actual,
            "err_norm": r.amplitude,
            "amp_abs": r.amplitude,
            "amp_pred": 0.0,
            "bound_eq1": ctx.bound_coefficient / r.T_actual,
            "delta_S": r.delta_s,
            "delta_G": r.delta_g,
            "delta_T": r.delta_t,
            "integrator_steps": r.steps,
        })
    meta = {
        "defect": perturbation.kind,
        "alpha": perturbation.alpha,
        "amplitude": perturbation.amplitude,
        "p": perturbation.p,
        "fitted_exponent": result.fit.exponent,
        "expected_exponent": result.expected_exponent,
        "preserved": result.preserved,
    }
    if spec.output:
        write_sweep_csv(spec.output, rows, spec, extra_meta=meta)
    return {"rows": rows, "meta": meta, "result": result}
