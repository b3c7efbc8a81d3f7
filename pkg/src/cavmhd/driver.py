"""Simulation loop, presets, continuation/refinement studies and artifacts."""
from __future__ import annotations

import json
import logging
import subprocess
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .basis import BoxCavity, SpectralResolution, build_bases
from .config import RunConfig
from .diagnostics import (EnergyReport, energy_report, invariant_report, relative_energy)
from .io import SeriesWriter, write_checkpoint, write_vtk
from .operators import solenoidal_project
from .solvers import NonFiniteError, SolverError, StepConfig, coupled_step, stable_dt
from .state import (FluidState, PhysParams, PositivityError, RegParams, RigidState,
                    SystemState, angular_momentum_M, enforce_linear_constraint, rest_state,
                    total_mass)

log = logging.getLogger("cavmhd")

MAX_HALVINGS = 10


class PositivityAbort(RuntimeError):
    pass


# ---------------------------------------------------------------- initial data
def build_state(cfg: RunConfig) -> SystemState:
    """Initial state for ``cfg.preset``; perturbations depend only on the seed, not on N."""
    basis = build_bases(BoxCavity(cfg.lengths), SpectralResolution(cfg.modes, cfg.dealias))
    phys = PhysParams(cfg.a, cfg.gamma, cfg.mu, cfg.lam)
    reg = RegParams(cfg.eps, cfg.delta, cfg.beta)
    reg.validate(cfg.gamma)
    state = rest_state(basis, cfg.rho_bar, phys, reg, m_B=cfg.m_B, I_c=cfg.inertia_matrix())
    if cfg.preset == "rest":
        return state
    if cfg.preset == "spin_up":
        om = np.asarray(cfg.omega0, float)
        if not np.any(om):
            om = np.array([0.0, 0.0, 1.0])
        return enforce_linear_constraint(state.replace(rigid=RigidState(om, np.zeros(3))))
    if cfg.preset == "manufactured_decay":
        return state.replace(fluid=FluidState(state.fluid.rho, state.fluid.v,
                                              decay_mode(basis, cfg.amplitude)))
    # small_data
    km = cfg.kmax
    if any(km > K for K in basis.cutoff):
        raise ValueError(f"ic.kmax = {km} exceeds the retained band {basis.cutoff}")
    rng = np.random.default_rng(cfg.seed)
    n = km + 1
    amp = cfg.amplitude
    drho = rng.uniform(-1, 1, (n, n, n))
    drho[0, 0, 0] = 0.0
    dv = rng.uniform(-1, 1, (3, n, n, n))
    db = rng.uniform(-1, 1, (3, n, n, n))
    rho = state.fluid.rho.copy()
    rho[:n, :n, :n] += amp * cfg.rho_bar * drho
    v = np.zeros((3,) + basis.shape)
    v[:, :n, :n, :n] = amp * dv
    v = np.where(basis.velocity_mask, v, 0.0)
    b = np.zeros((3,) + basis.shape)
    b[:, :n, :n, :n] = amp * db
    b = solenoidal_project(basis, b)
    st = state.replace(fluid=FluidState(rho, v, b),
                       rigid=RigidState(np.asarray(cfg.omega0, float), np.zeros(3)))
    return enforce_linear_constraint(st)


DECAY_K = (1, 1, 0)


def decay_mode(basis, amplitude: float, k=DECAY_K) -> np.ndarray:
    """Unit-normalised solenoidal magnetic mode at wavevector ``k`` times ``amplitude``."""
    b = np.zeros((3,) + basis.shape)
    for i in range(3):
        if k[i] >= 1:
            b[(i,) + tuple(k)] = (-1.0) ** i
    b = solenoidal_project(basis, b)
    return amplitude * b / np.linalg.norm(b)


def decay_reference(state0: SystemState, t: float, k=DECAY_K) -> SystemState:
    """Exact resistive decay of the manufactured mode: ``b(t) = exp(-|k|^2 t) b(0)``."""
    k2 = float(state0.basis.kappa2[tuple(k)])
    fl = state0.fluid
    return state0.replace(fluid=FluidState(fl.rho, fl.v, np.exp(-k2 * t) * fl.b), t=t)


# ---------------------------------------------------------------- stepping
def step_config(cfg: RunConfig, dt: float) -> StepConfig:
    return StepConfig(dt=dt, picard_max=cfg.picard_max, picard_tol=cfg.picard_tol,
                      imex=cfg.imex, rule=cfg.rule, order=tuple(cfg.order),
                      enforce_constraint=cfg.enforce_constraint)


def choose_dt(cfg: RunConfig, state: SystemState) -> float:
    """Fixed step: ``time.dt`` if set, else the CFL step of the initial state
    rounded down so that an integer number of steps reaches ``T``."""
    if cfg.dt is not None:
        return float(cfg.dt)
    dt = stable_dt(state, cfg.cfl)
    n = int(np.ceil(cfg.T / dt))
    return cfg.T / n


def advance(state: SystemState, scfg: StepConfig, depth: int = 0) -> SystemState:
    """One step; a positivity rejection is retried as two half steps, recursively."""
    try:
        return coupled_step(state, scfg)
    except PositivityError as exc:
        if depth >= MAX_HALVINGS:
            raise PositivityAbort(f"density positivity lost after {MAX_HALVINGS} step halvings "
                                  f"at t = {state.t:.6g} ({exc})") from exc
        half = replace(scfg, dt=0.5 * scfg.dt)
        log.info("step rejected at t=%.6g, halving dt to %.3e", state.t, half.dt)
        return advance(advance(state, half, depth + 1), half, depth + 1)


def build_id() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# ---------------------------------------------------------------- single run
@dataclass
class RunResult:
    status: int
    final: SystemState
    rows: List[Dict]
    snapshots: List[SystemState] = field(default_factory=list)
    message: str = ""
    out_dir: Optional[Path] = None
    dt: float = 0.0


def _row(state, rep: EnergyReport, m0, M0norm, rel=None) -> Dict:
    inv = invariant_report(state)
    Mn = float(np.linalg.norm(angular_momentum_M(state)))
    om = np.asarray(state.rigid.omega, float)
    xi = np.asarray(state.rigid.xi, float)
    return {
        "t": state.t, "F": rep.F, "kinetic": rep.kinetic, "magnetic": rep.magnetic,
        "internal": rep.internal, "dissipation": rep.dissipation,
        "balance_residual": rep.balance_residual,
        "mass_drift": abs(total_mass(state.basis, state.fluid.rho) - m0) / m0,
        "divb_max": inv.values["divb_nodal"], "P_norm": inv.values["P_norm"],
        "M_norm": Mn, "M_drift": abs(Mn - M0norm), "Q_orth_err": inv.values["Q_orth_err"],
        "xi_x": xi[0], "xi_y": xi[1], "xi_z": xi[2],
        "omega_x": om[0], "omega_y": om[1], "omega_z": om[2],
        "min_rho": inv.values["min_rho"], "rel_energy": rel,
    }


def run_simulation(cfg: RunConfig, out_dir=None, quiet: bool = True,
                   keep_snapshots: bool = False,
                   initial: Optional[SystemState] = None) -> RunResult:
    """Time loop with diagnostics every ``stride`` steps.

    With ``out_dir`` set, writes ``series.csv``, ``fields_*.vtk``,
    ``checkpoint.bin`` (the last good state, refreshed at each output row)
    and ``run.json``.  Status is 0 on success and 2 on an aborted run.
    """
    wall0 = time.perf_counter()
    state = build_state(cfg) if initial is None else initial
    state0 = state
    dt = choose_dt(cfg, state)
    scfg = step_config(cfg, dt)
    nsteps = int(np.floor(cfg.T / dt + 1e-9))
    reference: Optional[Callable[[float], SystemState]] = None
    if cfg.preset == "manufactured_decay" and initial is None:
        reference = lambda t: decay_reference(state0, t)  # noqa: E731

    out = Path(out_dir) if out_dir is not None else None
    writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        writer = SeriesWriter(out / "series.csv")
    m0 = total_mass(state.basis, state.fluid.rho)
    M0 = float(np.linalg.norm(angular_momentum_M(state)))
    rep = energy_report(state)
    rows: List[Dict] = []
    snaps: List[SystemState] = []
    status, message = 0, "ok"
    vtk_count = 0

    def emit(st, rep):
        nonlocal vtk_count
        rel = relative_energy(st, reference(st.t)).total if reference else None
        row = _row(st, rep, m0, M0, rel)
        rows.append(row)
        if keep_snapshots:
            snaps.append(st)
        if writer is not None:
            writer.write(row)
            write_checkpoint(out / "checkpoint.bin", st, {"build": build_id(), "seed": cfg.seed})
            if cfg.vtk_stride and (len(rows) - 1) % cfg.vtk_stride == 0:
                write_vtk(out / f"fields_{vtk_count:06d}.vtk", st)
                vtk_count += 1
        if not quiet:
            log.info("t=%.4f F=%.10e balance=%.3e", st.t, rep.F, rep.balance_residual)

    emit(state, rep)
    if out is not None and not cfg.vtk_stride:
        write_vtk(out / f"fields_{vtk_count:06d}.vtk", state)
        vtk_count += 1
    try:
        for n in range(1, nsteps + 1):
            state = advance(state, scfg)
            state = state.replace(t=n * dt)
            rep = energy_report(state, rep)
            if n % cfg.stride == 0:
                emit(state, rep)
    except (PositivityAbort, NonFiniteError, SolverError) as exc:
        status, message = 2, str(exc)
        log.error("run aborted: %s", exc)
    finally:
        if writer is not None:
            writer.close()
    if out is not None:
        if status == 0 and not cfg.vtk_stride:
            write_vtk(out / f"fields_{vtk_count:06d}.vtk", state)
        meta = {
            "config": cfg.as_dict(), "seed": cfg.seed, "build": build_id(), "dt": dt,
            "steps": nsteps, "status": status, "message": message,
            "wall_time_s": time.perf_counter() - wall0,
            "time_derivative_stencil": "centered differences of stored snapshots",
            "dissipation_excludes_rigid_terms": True,
        }
        (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return RunResult(status, state, rows, snaps, message, out, dt)


# ---------------------------------------------------------------- studies
@dataclass
class ContinuationTable:
    parameter: str
    rows: List[Dict]

    @property
    def successive(self) -> List[float]:
        return [r["rel_to_next"] for r in self.rows if r.get("rel_to_next") is not None]

    @property
    def decreasing(self) -> bool:
        s = self.successive
        return all(b < a for a, b in zip(s, s[1:]))


def continuation_run(cfg: RunConfig, parameter: str, levels: Sequence[float],
                     out_dir=None) -> ContinuationTable:
    """Run each level of ``eps`` or ``delta`` from the same initial data and
    compare successive terminal states by relative energy."""
    if parameter not in ("eps", "delta"):
        raise ValueError("parameter must be 'eps' or 'delta'")
    levels = list(levels)
    if any(b >= a for a, b in zip(levels, levels[1:])) or any(v <= 0 for v in levels):
        raise ValueError("levels must be a decreasing positive sequence")
    rows: List[Dict] = []
    finals: List[SystemState] = []
    for i, lev in enumerate(levels):
        c = cfg.with_(**{parameter: lev})
        sub = None if out_dir is None else Path(out_dir) / f"level_{i}"
        try:
            res = run_simulation(c, out_dir=sub)
        except Exception as exc:  # a failed level ends the table
            rows.append({"level": lev, "error": str(exc)})
            break
        if res.status != 0:
            rows.append({"level": lev, "error": res.message})
            break
        st = res.final
        rho = st.rho_nodal()
        dpart = float(st.basis.integrate(c.delta * rho ** c.beta / (c.beta - 1.0))) \
            if c.delta > 0 else 0.0
        rows.append({"level": lev, "F_T": res.rows[-1]["F"], "mass_drift": res.rows[-1]["mass_drift"],
                     "max_rho": float(rho.max()), "delta_internal": dpart, "rel_to_next": None})
        finals.append(st)
        if i > 0:
            rows[i - 1]["rel_to_next"] = relative_energy(finals[i - 1], st).total
    table = ContinuationTable(parameter, rows)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        _write_table(Path(out_dir) / "continuation.csv", rows)
    return table


def _write_table(path: Path, rows: List[Dict]):
    keys: List[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    lines = [",".join(keys)]
    for r in rows:
        lines.append(",".join("" if r.get(k) is None else str(r.get(k)) for k in keys))
    path.write_text("\n".join(lines) + "\n")


def weak_vs_strong_study(cfg: RunConfig, coarse_modes: Sequence[int] = (8, 12, 16),
                         fine_modes: Optional[int] = None, out_dir=None,
                         coarse_overrides: Optional[Dict] = None) -> Dict[int, List]:
    """Relative energy of coarse runs against a fine run from identical data.

    All runs share the step so output rows line up; returns, for each coarse
    resolution, the list of relative-energy reports at the output times.
    """
    fine_modes = fine_modes or cfg.reference_modes
    fine_cfg = cfg.with_(modes=(fine_modes,) * 3)
    if fine_cfg.dt is None:
        fine_cfg = fine_cfg.with_(dt=choose_dt(fine_cfg, build_state(fine_cfg)))
    ref = run_simulation(fine_cfg, keep_snapshots=True)
    if ref.status != 0:
        raise RuntimeError(f"reference run failed: {ref.message}")
    out: Dict[int, List] = {}
    for n in coarse_modes:
        c = fine_cfg.with_(modes=(n,) * 3, **(coarse_overrides or {}))
        res = run_simulation(c, keep_snapshots=True)
        if res.status != 0:
            raise RuntimeError(f"coarse run N={n} failed: {res.message}")
        out[n] = [relative_energy(a, b) for a, b in zip(res.snapshots, ref.snapshots)]
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        rows = []
        for n, reps in out.items():
            rows += [{"N": n, "t": r.t, "total": r.total, "velocity": r.velocity,
                      "pressure": r.pressure, "magnetic": r.magnetic} for r in reps]
        _write_table(Path(out_dir) / "weak_vs_strong.csv", rows)
    return out


def observed_orders(errors: Sequence[float], ratio: float = 2.0) -> List[float]:
    e = np.asarray(errors, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return list(np.log(e[:-1] / e[1:]) / np.log(ratio))


def refine_study(cfg: RunConfig, kind: str = "dt", out_dir=None) -> Dict:
    """Refinement in ``dt`` (divisors ``study.refine``) or in N (mode counts ``study.refine``).

    For ``dt`` the energy-balance slack ``max(0, max_t balance)`` and the
    terminal |M| drift are reported per level with observed orders; for ``N``
    the relative energy of each level against the finest one.
    """
    if kind == "dt":
        base = cfg.dt if cfg.dt is not None else choose_dt(cfg, build_state(cfg))
        rows = []
        for r in cfg.refine:
            res = run_simulation(cfg.with_(dt=base / r, stride=1))
            if res.status != 0:
                raise RuntimeError(f"level dt={base / r:g} failed: {res.message}")
            slack = max(0.0, max(row["balance_residual"] for row in res.rows))
            rows.append({"dt": base / r, "slack": slack, "M_drift": res.rows[-1]["M_drift"],
                         "P_norm": res.rows[-1]["P_norm"], "final": res.final})
        ratios = [cfg.refine[i + 1] / cfg.refine[i] for i in range(len(cfg.refine) - 1)]
        for key in ("slack", "M_drift"):
            vals = [r[key] for r in rows]
            for i in range(len(rows) - 1):
                rows[i + 1][key + "_order"] = float(np.log(vals[i] / vals[i + 1]) / np.log(ratios[i])) \
                    if vals[i + 1] > 0 and vals[i] > 0 else None
    elif kind == "N":
        ns = list(cfg.refine)
        finest = max(ns)
        fine_cfg = cfg.with_(modes=(finest,) * 3)
        if fine_cfg.dt is None:
            fine_cfg = fine_cfg.with_(dt=choose_dt(fine_cfg, build_state(fine_cfg)))
        ref = run_simulation(fine_cfg).final
        rows = []
        for n in ns:
            if n == finest:
                continue
            res = run_simulation(fine_cfg.with_(modes=(n,) * 3))
            rows.append({"N": n, "rel_energy": relative_energy(res.final, ref).total,
                         "final": res.final})
    else:
        raise ValueError("kind must be 'dt' or 'N'")
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        _write_table(Path(out_dir) / f"refine_{kind}.csv",
                     [{k: v for k, v in r.items() if k != "final"} for r in rows])
    return {"kind": kind, "rows": rows}
