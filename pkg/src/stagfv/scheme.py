"""Explicit staggered scheme: mass, internal energy, EOS, momentum.

One step maps ``(state_n, S^n)`` to ``(state_{n+1}, S^{n+1})``.  The
kinetic-energy remainder ``R^{n+1}`` of every face and velocity component
is folded into ``S^{n+1}``, which enters the internal-energy update of the
*next* step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NonFiniteError, PositivityError, StagError
from .fluxes import (
    FluxSet,
    InterpolantChoice,
    compute_fluxes,
    dual_density,
    dual_flux_sums,
    pressure_force,
)
from .mesh import StaggeredMesh
from .state import GasConfig, State

UNIFORM_SAFETY = 0.9


@dataclass(frozen=True, eq=False)
class CorrectiveSource:
    """``S`` per cell and the remainders ``R`` per (face, component) it came from."""

    S: np.ndarray
    R: np.ndarray
    step_index: int = 0

    @classmethod
    def zero(cls, mesh: StaggeredMesh) -> "CorrectiveSource":
        return cls(S=np.zeros(mesh.n_cells), R=np.zeros((mesh.n_faces, mesh.dim)), step_index=0)


@dataclass(frozen=True)
class StepConfig:
    cfl: float = 0.4
    interpolants: InterpolantChoice = field(default_factory=InterpolantChoice)
    t_end: float = 0.2
    max_steps: int = 1_000_000
    gas: GasConfig = field(default_factory=GasConfig)
    dt_mode: str = "uniform"
    dt: float | None = None

    def __post_init__(self):
        if not (self.cfl > 0.0 and np.isfinite(self.cfl)):
            raise ValueError(f"cfl must be > 0, got {self.cfl}")
        if self.dt_mode not in ("uniform", "adaptive", "fixed"):
            raise ValueError(f"dt_mode must be 'uniform', 'adaptive' or 'fixed', got {self.dt_mode!r}")
        if self.dt_mode == "fixed" and not (self.dt is not None and self.dt > 0.0):
            raise ValueError("dt_mode='fixed' needs a positive dt")


@dataclass(frozen=True, eq=False)
class StepRecord:
    """Intermediate quantities of one step, kept for the audits."""

    dt: float
    fluxes: FluxSet
    rho_dual_new: np.ndarray
    R: np.ndarray


def _unsigned(mesh):
    return np.ones_like(mesh.cell_sign)


def stability_bounds(mesh: StaggeredMesh, state: State, gas: GasConfig, choice=None):
    """Largest admissible step (before the CFL factor) for each constraint.

    ``acoustic``: |K| / (1/2 sum |sigma| (|u_sigma| + c_sigma)).
    ``primal``: outflow of mass and of compression work against the cell
    content, which keeps rho and e positive with upwinding.
    ``dual``: outflow of mass from each diamond cell against its content,
    which makes the upwind kinetic remainder non-negative.
    """
    choice = choice or InterpolantChoice()
    for arr in (state.rho, state.p, state.u):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("non-finite state passed to the time-step estimate")
    c = gas.sound_speed(state.rho, state.p)
    own, nbr = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    c_face = np.maximum(c[own], c[np.where(nbr >= 0, nbr, own)])
    speed = np.linalg.norm(state.u, axis=1) + c_face
    wave = kernels.cell_sum(mesh.cell_faces, _unsigned(mesh), kernels.as_c(mesh.face_area * speed))
    acoustic = mesh.cell_volume / (0.5 * wave)

    fl = compute_fluxes(mesh, state, choice)
    out_mass = np.maximum(fl.F_primal, 0.0).sum(axis=1)
    un = np.einsum("sd,sd->s", state.u, mesh.face_normal)
    vol = np.where(mesh.interior, mesh.face_area * un, 0.0)
    out_vol = np.maximum(mesh.cell_sign * vol[mesh.cell_faces], 0.0).sum(axis=1)
    demand = out_mass + (gas.gamma - 1.0) * state.rho * out_vol
    with np.errstate(divide="ignore"):
        primal = np.where(demand > 0.0, mesh.cell_volume * state.rho / demand, np.inf)

    fa = mesh.cell_faces[:, mesh.dual_pairs[:, 0]].ravel()
    fb = mesh.cell_faces[:, mesh.dual_pairs[:, 1]].ravel()
    f = fl.F_dual.ravel()
    dual_out = np.zeros(mesh.n_faces)
    np.add.at(dual_out, fa, np.maximum(f, 0.0))
    np.add.at(dual_out, fb, np.maximum(-f, 0.0))
    with np.errstate(divide="ignore"):
        dual = np.where(dual_out > 0.0, mesh.dual_volume * fl.rho_dualcell / dual_out, np.inf)
    return {"acoustic": float(acoustic.min()), "primal": float(primal.min()), "dual": float(dual.min())}


def compute_dt(mesh, state, cfl, gas=None, choice=None, t_end=None) -> float:
    """CFL-limited step ``cfl * min(bounds)``, capped so ``t`` does not pass ``t_end``."""
    gas = gas or GasConfig()
    bounds = stability_bounds(mesh, state, gas, choice)
    dt = cfl * min(bounds.values())
    if not math.isfinite(dt) or dt <= 0.0:
        raise NonFiniteError(f"invalid time step {dt}")
    if t_end is not None:
        dt = min(dt, t_end - state.t)
    return dt


def advance(mesh: StaggeredMesh, state: State, source: CorrectiveSource, gas: GasConfig,
            choice: InterpolantChoice, dt: float, t_new: float | None = None):
    """One step of the scheme; returns ``(state, source, record)``."""
    step_no = state.step_index + 1
    vol = mesh.cell_volume
    cf, sign = mesh.cell_faces, mesh.cell_sign

    # (1) primal mass fluxes and face interpolants at level n
    fl = compute_fluxes(mesh, state, choice)

    # (2) mass
    net_mass = kernels.cell_sum(cf, sign, kernels.as_c(fl.face_flux))
    rho_new = state.rho - dt / vol * net_mass

    # (3) internal energy, with the corrective source of the previous step
    net_energy = kernels.cell_sum(cf, sign, kernels.as_c(fl.face_flux * fl.e_face))
    un = np.einsum("sd,sd->s", state.u, mesh.face_normal)
    vol_flux = np.where(mesh.interior, mesh.face_area * un, 0.0)
    work = state.p * kernels.cell_sum(cf, sign, kernels.as_c(vol_flux))
    rhoe_new = state.rho * state.e - dt / vol * (net_energy + work - source.S)
    if np.any(~(rho_new > 0.0)):
        k = int(np.argmin(np.where(np.isnan(rho_new), -np.inf, rho_new)))
        raise PositivityError(f"density {rho_new[k]:.6g} <= 0 in cell {k} at step {step_no}", cell=k, step=step_no)
    e_new = rhoe_new / rho_new
    if np.any(~(e_new > 0.0)):
        k = int(np.argmin(np.where(np.isnan(e_new), -np.inf, e_new)))
        raise PositivityError(
            f"internal energy {e_new[k]:.6g} <= 0 in cell {k} at step {step_no}", cell=k, step=step_no
        )

    # (4) equation of state
    p_new = (gas.gamma - 1.0) * rho_new * e_new

    # (5) dual densities and (6) momentum with the pressure gradient at n+1
    rho_d = fl.rho_dualcell
    rho_d_new = dual_density(mesh, rho_new)
    _, conv, lin, quad = dual_flux_sums(mesh, fl.F_dual, fl.u_dualface, state.u)
    dvol = mesh.dual_volume[:, None]
    force = pressure_force(mesh, p_new)
    u_new = (dvol * rho_d[:, None] * state.u - dt * (conv + force)) / (dvol * rho_d_new[:, None])
    bnd = mesh.boundary
    u_new[bnd, mesh.face_axis[bnd]] = 0.0

    # (7) kinetic-energy remainder and the source for the next step
    du = u_new - state.u
    R = 0.5 * dvol / dt * rho_d_new[:, None] * du * du - 0.5 * quad + du * lin
    S_new = 0.5 * kernels.cell_sum(cf, _unsigned(mesh), kernels.as_c(R.sum(axis=1)))

    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(p_new))):
        raise NonFiniteError(f"non-finite values produced at step {step_no}")
    new_state = State(
        rho=rho_new,
        e=e_new,
        p=p_new,
        u=u_new,
        t=state.t + dt if t_new is None else t_new,
        step_index=step_no,
    )
    new_source = CorrectiveSource(S=S_new, R=R, step_index=source.step_index + 1)
    return new_state, new_source, StepRecord(dt=dt, fluxes=fl, rho_dual_new=rho_d_new, R=R)


def step(mesh, state, source, config: StepConfig, dt: float | None = None):
    """Advance one step; ``dt`` defaults to the CFL estimate."""
    if dt is None:
        dt = compute_dt(mesh, state, config.cfl, config.gas, config.interpolants, config.t_end)
    new_state, new_source, _ = advance(mesh, state, source, config.gas, config.interpolants, dt)
    return new_state, new_source


class StepObserver:
    """Hook for streaming diagnostics; ``begin`` is called again on a restart."""

    def begin(self, mesh, state0, source0):
        pass

    def after_step(self, prev, new, source_prev, source_new, record):
        pass


@dataclass
class RunResult:
    snapshots: list
    final_state: State
    final_source: CorrectiveSource
    dts: list
    restarts: int = 0
    error: Exception | None = None

    @property
    def ok(self):
        return self.error is None

    @property
    def steps(self):
        return len(self.dts)


def run(mesh, state0, config: StepConfig, output_times=(), observer: StepObserver | None = None,
        source0: CorrectiveSource | None = None) -> RunResult:
    """March to ``config.t_end``; snapshot at each requested output time.

    ``snapshots[0]`` is the initial state, followed by one snapshot per
    output time (in increasing order) that was reached.

    ``dt_mode='uniform'`` keeps one step size for the whole run (the
    shifted-in-time energy balance needs it); if the CFL bound ever drops
    below it, the run restarts from the initial state with a smaller step.
    ``dt_mode='adaptive'`` re-evaluates the CFL step each time.
    ``dt_mode='fixed'`` uses ``t_end / ceil(t_end / config.dt)`` without
    any CFL check (positivity is still enforced by the step).
    """
    source0 = source0 or CorrectiveSource.zero(mesh)
    targets = sorted(float(t) for t in output_times)
    t_end = config.t_end
    if t_end <= 0.0:
        return RunResult([state0] * (1 + sum(t <= state0.t for t in targets)), state0, source0, [])
    gas, choice = config.gas, config.interpolants
    restarts = 0
    n_uniform = None
    if config.dt_mode == "uniform":
        bound = compute_dt(mesh, state0, config.cfl, gas, choice)
        n_uniform = max(1, math.ceil(t_end / bound))
    elif config.dt_mode == "fixed":
        n_uniform = max(1, math.ceil(t_end / config.dt * (1.0 - 1e-12)))
    check_cfl = config.dt_mode == "uniform"

    while True:
        if observer is not None:
            observer.begin(mesh, state0, source0)
        snaps, pending = [state0], list(targets)
        while pending and pending[0] <= state0.t:
            pending.pop(0)
            snaps.append(state0)
        state, source, dts = state0, source0, []
        restart_with = None
        error = None
        dt_u = t_end / n_uniform if n_uniform else None
        while state.t < t_end and len(dts) < config.max_steps:
            try:
                if n_uniform:
                    bound = compute_dt(mesh, state, config.cfl, gas, choice) if check_cfl else math.inf
                    if dt_u > bound * (1.0 + 1e-12):
                        restart_with = max(n_uniform + 1, math.ceil(t_end / (UNIFORM_SAFETY * bound)))
                        break
                    k = len(dts) + 1
                    t_new = t_end if k == n_uniform else k * dt_u
                    dt = dt_u
                else:
                    dt = compute_dt(mesh, state, config.cfl, gas, choice, t_end)
                    t_new = t_end if dt == t_end - state.t else None
                new_state, new_source, rec = advance(mesh, state, source, gas, choice, dt, t_new)
            except StagError as exc:
                error = exc
                break
            if observer is not None:
                observer.after_step(state, new_state, source, new_source, rec)
            state, source = new_state, new_source
            dts.append(dt)
            while pending and state.t >= pending[0] - 1e-12 * t_end:
                pending.pop(0)
                snaps.append(state)
        if restart_with is not None:
            n_uniform = restart_with
            restarts += 1
            continue
        return RunResult(snaps, state, source, dts, restarts, error)
