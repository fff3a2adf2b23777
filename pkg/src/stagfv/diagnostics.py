"""Discrete identities, audits and consistency probes.

Everything here is recomputed with plain ``np.add.at`` loops from the
step records; none of it goes through the assembly kernels the scheme
uses, so an audit is an independent check of the stepper.

Relative residuals are ``|residual| / max(scale, ABS_FLOOR)`` where
``scale`` is the largest absolute summand of the identity at that
location.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AuditNotReady
from .mesh import StaggeredMesh
from .scheme import StepObserver
from .state import _cell_points

ABS_FLOOR = 1e-14


def relative(residual, scale):
    return np.abs(residual) / np.maximum(scale, ABS_FLOOR)


# --------------------------------------------------------------------------
# connectivity helpers


def face_local_index(mesh: StaggeredMesh):
    """``(nf, 2)`` local index of each face in its owner / neighbour (-1 if none)."""
    out = np.full((mesh.n_faces, 2), -1, dtype=np.intp)
    for l in range(mesh.zeta):
        s = mesh.cell_faces[:, l]
        side = np.where(mesh.face_cells[s, 0] == np.arange(mesh.n_cells), 0, 1)
        out[s, side] = l
    return out


def _pair_faces(mesh):
    return mesh.cell_faces[:, mesh.dual_pairs[:, 0]], mesh.cell_faces[:, mesh.dual_pairs[:, 1]]


def dual_density_of(mesh: StaggeredMesh, rho):
    """``rho_{D_sigma}`` from cell densities (own evaluation, for the audits)."""
    own, nbr = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    out = np.array(rho[own], dtype=float)
    inner = nbr >= 0
    hv = mesh.half_volume[inner]
    out[inner] = (hv[:, 0] * rho[own[inner]] + hv[:, 1] * rho[nbr[inner]]) / mesh.dual_volume[inner]
    return out


def _inner_sums(mesh, F_dual, z_eps):
    """``sum_{eps in K} F_{sigma,eps} z_eps`` per (cell, local face)."""
    inner = np.zeros((mesh.n_cells, mesh.zeta))
    fz = F_dual * z_eps
    for j, (a, b) in enumerate(mesh.dual_pairs):
        inner[:, a] += fz[:, j]
        inner[:, b] -= fz[:, j]
    return inner


def dual_face_sum(mesh: StaggeredMesh, F_dual, z_eps):
    """``sum_{eps in E(D_sigma)} F_{sigma,eps} z_eps`` per face."""
    fa, fb = _pair_faces(mesh)
    out = np.zeros(mesh.n_faces)
    fz = F_dual * z_eps
    np.add.at(out, fa.ravel(), fz.ravel())
    np.add.at(out, fb.ravel(), -fz.ravel())
    return out


def _dual_face_max(mesh, values):
    """max over the dual faces of D_sigma of ``|values|``, per face."""
    fa, fb = _pair_faces(mesh)
    out = np.zeros(mesh.n_faces)
    v = np.abs(values).ravel()
    np.maximum.at(out, fa.ravel(), v)
    np.maximum.at(out, fb.ravel(), v)
    return out


# --------------------------------------------------------------------------
# primal reconstruction


def reconstruct_cell_product(mesh: StaggeredMesh, rho_dualcell, z_face):
    """``(rho z)_K`` with ``|K| (rho z)_K = sum_{sigma in E(K)} |D_sigma|/2 rho_D z_sigma``."""
    w = 0.5 * mesh.dual_volume * rho_dualcell * z_face
    acc = np.zeros(mesh.n_cells)
    for l in range(mesh.zeta):
        acc += w[mesh.cell_faces[:, l]]
    return acc / mesh.cell_volume


def reconstruct_face_flux(mesh: StaggeredMesh, F_dual, z_dualface):
    """Primal fluxes ``G_{K,sigma}`` per (cell, local face).

    ``G_{K,sigma} = -1/2 sum_{eps in K} F z + 1/2 sum_{eps in L} F z``;
    the two halves are the same floating-point numbers seen from K and L,
    so ``G_{K,sigma} = -G_{L,sigma}`` holds bit for bit.
    """
    inner = _inner_sums(mesh, F_dual, z_dualface)
    loc = face_local_index(mesh)
    G = -0.5 * inner
    s = mesh.cell_faces
    nbr = mesh.face_cells[s, 1]
    own = mesh.face_cells[s, 0]
    k = np.arange(mesh.n_cells)[:, None]
    other = np.where(own == k, nbr, own)
    other_l = np.where(own == k, loc[s, 1], loc[s, 0])
    has = other >= 0
    G[has] = -0.5 * inner[has] + 0.5 * inner[other[has], other_l[has]]
    return G


def flux_antisymmetry(mesh: StaggeredMesh, G):
    """``max |G_{K,sigma} + G_{L,sigma}|`` over interior faces."""
    loc = face_local_index(mesh)
    inner = mesh.interior
    if not inner.any():
        return 0.0
    own, nbr = mesh.face_cells[inner, 0], mesh.face_cells[inner, 1]
    return float(np.max(np.abs(G[own, loc[inner, 0]] + G[nbr, loc[inner, 1]])))


def upwind_dual_values(mesh: StaggeredMesh, F_dual, z_face):
    """Upwind dual-face values of a face field (ties to the first face)."""
    fa, fb = _pair_faces(mesh)
    return np.where(F_dual >= 0.0, z_face[fa], z_face[fb])


@dataclass(frozen=True, eq=False)
class ConvectionCheck:
    form_a: np.ndarray
    form_b: np.ndarray
    residual: np.ndarray
    relative: np.ndarray


def primal_convection_forms(mesh, dt, rho_dual_n, rho_dual_np1, z_n, z_np1, F_dual, z_eps) -> ConvectionCheck:
    """The reconstructed operator ``C_K z`` evaluated two ways.

    (a) half the sum of the dual operators ``C_sigma z`` over the faces of K;
    (b) time difference of ``(rho z)_K`` plus ``sum_sigma G_{K,sigma}``.
    """
    dvol = mesh.dual_volume
    c_face = dvol / dt * (rho_dual_np1 * z_np1 - rho_dual_n * z_n) + dual_face_sum(mesh, F_dual, z_eps)
    form_a = np.zeros(mesh.n_cells)
    for l in range(mesh.zeta):
        form_a += 0.5 * c_face[mesh.cell_faces[:, l]]
    rz1 = reconstruct_cell_product(mesh, rho_dual_np1, z_np1)
    rz0 = reconstruct_cell_product(mesh, rho_dual_n, z_n)
    G = reconstruct_face_flux(mesh, F_dual, z_eps)
    form_b = mesh.cell_volume / dt * (rz1 - rz0) + G.sum(axis=1)

    t1 = np.abs(0.5 * dvol / dt * rho_dual_np1 * z_np1)
    t0 = np.abs(0.5 * dvol / dt * rho_dual_n * z_n)
    fz = _dual_face_max(mesh, F_dual * z_eps)
    scale = np.zeros(mesh.n_cells)
    for l in range(mesh.zeta):
        s = mesh.cell_faces[:, l]
        scale = np.maximum(scale, np.maximum(np.maximum(t1[s], t0[s]), fz[s]))
    res = form_a - form_b
    return ConvectionCheck(form_a, form_b, res, relative(res, scale))


def primal_convection_residual(mesh, state_n, state_np1, fluxes, z_n, z_np1, dt, z_eps=None) -> ConvectionCheck:
    """:func:`primal_convection_forms` from two states and the level-n flux set."""
    if z_eps is None:
        z_eps = upwind_dual_values(mesh, fluxes.F_dual, z_n)
    return primal_convection_forms(
        mesh,
        dt,
        dual_density_of(mesh, state_n.rho),
        dual_density_of(mesh, state_np1.rho),
        z_n,
        z_np1,
        fluxes.F_dual,
        z_eps,
    )


# --------------------------------------------------------------------------
# per-step identities


@dataclass(frozen=True, eq=False)
class IdentityCheck:
    residual: np.ndarray
    relative: np.ndarray

    @property
    def max(self):
        return float(self.relative.max()) if self.relative.size else 0.0

    @property
    def mean(self):
        return float(self.relative.mean()) if self.relative.size else 0.0


def dual_mass_residual(mesh: StaggeredMesh, rho_dual_n, rho_dual_np1, F_dual, dt) -> IdentityCheck:
    """Mass balance over every diamond cell, per face."""
    dvol = mesh.dual_volume
    res = dvol / dt * (rho_dual_np1 - rho_dual_n) + dual_face_sum(mesh, F_dual, np.ones_like(F_dual))
    scale = np.maximum(np.maximum(dvol / dt * rho_dual_np1, dvol / dt * rho_dual_n), _dual_face_max(mesh, F_dual))
    return IdentityCheck(res, relative(res, scale))


def _pressure_force(mesh, p):
    own, nbr = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    jump = np.zeros(mesh.n_faces)
    inner = nbr >= 0
    jump[inner] = p[nbr[inner]] - p[own[inner]]
    return (mesh.face_area * jump)[:, None] * mesh.face_normal


def kinetic_identity_residual(mesh: StaggeredMesh, prev, new, record) -> IdentityCheck:
    """Kinetic balance of one face and component plus its remainder ``R``.

    ``residual[s, i]`` is the left side of the discrete kinetic-energy
    balance plus ``R[s, i]``; it vanishes when the momentum update and the
    dual mass balance hold.
    """
    dt = record.dt
    fl = record.fluxes
    dvol = mesh.dual_volume[:, None]
    rd0 = dual_density_of(mesh, prev.rho)[:, None]
    rd1 = dual_density_of(mesh, new.rho)[:, None]
    u0, u1 = prev.u, new.u
    ue = fl.u_dualface
    force = _pressure_force(mesh, new.p)
    R = record.R
    du = u1 - u0
    dim = mesh.dim
    conv = np.empty((mesh.n_faces, dim))
    lin = np.empty_like(conv)
    scale_f = np.zeros_like(conv)
    for i in range(dim):
        conv[:, i] = dual_face_sum(mesh, fl.F_dual, ue[..., i] ** 2)
        lin[:, i], _, mx = _pair_moments(mesh, fl.F_dual, ue[..., i], u0[:, i])
        scale_f[:, i] = np.maximum(_dual_face_max(mesh, 0.5 * fl.F_dual * ue[..., i] ** 2), mx)
    t_new = 0.5 * dvol / dt * rd1 * u1 * u1
    t_old = 0.5 * dvol / dt * rd0 * u0 * u0
    work = force * u1
    res = t_new - t_old + 0.5 * conv + work + R
    r_terms = np.maximum(np.abs(0.5 * dvol / dt * rd1 * du * du), np.abs(du * lin))
    scale = np.maximum.reduce([np.abs(t_new), np.abs(t_old), np.abs(work), scale_f, r_terms, np.abs(R)])
    return IdentityCheck(res, relative(res, scale))


def _pair_moments(mesh, F_dual, ue, u):
    """Per face: ``sum F (ue - u)``, ``sum F (ue - u)^2`` and ``max |F (ue - u)^2| / 2``."""
    fa, fb = _pair_faces(mesh)
    da = ue - u[fa]
    db = ue - u[fb]
    lin = np.zeros(mesh.n_faces)
    quad = np.zeros(mesh.n_faces)
    mx = np.zeros(mesh.n_faces)
    np.add.at(lin, fa.ravel(), (F_dual * da).ravel())
    np.add.at(lin, fb.ravel(), (-F_dual * db).ravel())
    np.add.at(quad, fa.ravel(), (F_dual * da * da).ravel())
    np.add.at(quad, fb.ravel(), (-F_dual * db * db).ravel())
    np.maximum.at(mx, fa.ravel(), np.abs(0.5 * F_dual * da * da).ravel())
    np.maximum.at(mx, fb.ravel(), np.abs(0.5 * F_dual * db * db).ravel())
    return lin, quad, mx


def kinetic_content(mesh: StaggeredMesh, rho, u):
    """``|K| (rho E_kin)_K = 1/4 sum_{sigma in E(K)} |D_sigma| rho_D |u_sigma|^2``."""
    w = 0.25 * mesh.dual_volume * dual_density_of(mesh, rho) * np.einsum("sd,sd->s", u, u)
    acc = np.zeros(mesh.n_cells)
    for l in range(mesh.zeta):
        acc += w[mesh.cell_faces[:, l]]
    return acc


def kinetic_flux(mesh: StaggeredMesh, fluxes):
    """``G_kin`` per (cell, local face) with ``z_eps = |u_eps|^2 / 2``."""
    ue = fluxes.u_dualface
    return reconstruct_face_flux(mesh, fluxes.F_dual, 0.5 * np.einsum("kjd,kjd->kj", ue, ue))


@dataclass(frozen=True, eq=False)
class EnergyCheck:
    residual: np.ndarray
    relative: np.ndarray
    G_antisym: float
    boundary_flux: float

    @property
    def max(self):
        return float(self.relative.max())

    @property
    def mean(self):
        return float(self.relative.mean())


def total_energy_audit(mesh: StaggeredMesh, levels, records) -> EnergyCheck:
    """Local total-energy balance over three consecutive levels.

    ``levels = (state_n, state_n1, state_n2)`` and ``records`` are the step
    records of n -> n+1 and n+1 -> n+2.  The balance combines the kinetic
    identity of step n (summed over the faces of K, halved) with the
    internal-energy update of step n+1, so it has the internal-energy flux
    of level n+1, the kinetic flux of level n and the pressure work
    ``|sigma| (p_K + p_L)/2 u . n`` of level n+1.
    """
    if len(levels) < 3 or len(records) < 2:
        raise AuditNotReady("the total-energy balance needs three consecutive levels")
    s0, s1, s2 = levels[-3:]
    r0, r1 = records[-2:]
    vol = mesh.cell_volume
    ie1, ie2 = vol * s1.rho * s1.e, vol * s2.rho * s2.e
    k0, k1 = kinetic_content(mesh, s0.rho, s0.u), kinetic_content(mesh, s1.rho, s1.u)
    d_int = (ie2 - ie1) / r1.dt
    d_kin = (k1 - k0) / r0.dt

    cf = mesh.cell_faces
    int_flux = r1.fluxes.F_primal * r1.fluxes.e_face[cf]
    G = kinetic_flux(mesh, r0.fluxes)
    own, nbr = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    p_other = np.where(nbr >= 0, s1.p[np.where(nbr >= 0, nbr, own)], s1.p[own])
    p_mean = 0.5 * (s1.p[own] + p_other)
    un = np.einsum("sd,sd->s", s1.u, mesh.face_normal)
    work = mesh.cell_sign * (mesh.face_area * p_mean * un)[cf]

    res = d_int + d_kin + int_flux.sum(axis=1) + G.sum(axis=1) + work.sum(axis=1)
    scale = np.maximum.reduce(
        [
            np.abs(ie2) / r1.dt,
            np.abs(ie1) / r1.dt,
            np.abs(k1) / r0.dt,
            np.abs(k0) / r0.dt,
            np.abs(int_flux).max(axis=1),
            np.abs(G).max(axis=1),
            np.abs(work).max(axis=1),
        ]
    )
    bnd_local = mesh.face_cells[cf, 1] < 0
    return EnergyCheck(
        residual=res,
        relative=relative(res, scale),
        G_antisym=flux_antisymmetry(mesh, G),
        boundary_flux=float(G[bnd_local].sum()),
    )


def total_mass(mesh: StaggeredMesh, state):
    return float(np.sum(mesh.cell_volume * state.rho))


def shifted_energy(mesh: StaggeredMesh, state_n, state_n1):
    """``sum_K |K| (rho e)^{n+1}_K + |K| (rho E_kin)^n_K``."""
    return float(np.sum(mesh.cell_volume * state_n1.rho * state_n1.e) + np.sum(kinetic_content(mesh, state_n.rho, state_n.u)))


# --------------------------------------------------------------------------
# streaming audit


AUDIT_COLUMNS = (
    "step",
    "t",
    "dt",
    "dual_mass_max",
    "dual_mass_mean",
    "kinetic_max",
    "kinetic_mean",
    "energy_max",
    "energy_mean",
    "G_antisym_max",
    "mass_drift",
    "energy_drift",
    "energy_drift_bc",
    "min_rho",
    "min_e",
    "min_R",
    "positive",
)


@dataclass
class AuditReport:
    """One row per step; energy columns are NaN on the first step (needs three levels)."""

    rows: list = field(default_factory=list)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def worst(self, name):
        col = self.column(name)
        col = col[~np.isnan(col)]
        return float(col.max()) if col.size else 0.0

    def lowest(self, name):
        col = self.column(name)
        return float(col.min()) if col.size else math.inf

    @property
    def positive(self):
        return all(r["positive"] for r in self.rows)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AUDIT_COLUMNS)
            for r in self.rows:
                w.writerow([r[c] if c in ("step", "positive") else repr(float(r[c])) for c in AUDIT_COLUMNS])

    def summary(self):
        if not self.rows:
            return "audit: no steps"
        lines = [
            f"audit over {len(self.rows)} steps (t = {self.rows[-1]['t']:.6g})",
            f"  dual mass balance      max rel {self.worst('dual_mass_max'):.3e}",
            f"  kinetic identity       max rel {self.worst('kinetic_max'):.3e}",
            f"  total energy balance   max rel {self.worst('energy_max'):.3e}",
            f"  flux antisymmetry      max abs {self.worst('G_antisym_max'):.3e}",
            f"  global mass drift      {self.worst('mass_drift'):.3e}",
            f"  shifted energy drift   {self.worst('energy_drift'):.3e} (boundary-corrected {self.worst('energy_drift_bc'):.3e})",
            f"  min rho {self.lowest('min_rho'):.6g}  min e {self.lowest('min_e'):.6g}  min R {self.lowest('min_R'):.3e}",
            f"  positivity {'ok' if self.positive else 'VIOLATED'}",
        ]
        return "\n".join(lines)


def read_audit_csv(path):
    with open(path, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


class Auditor(StepObserver):
    """Streams every identity check over a run into an :class:`AuditReport`."""

    def __init__(self, keep_fields=False):
        self.keep_fields = keep_fields

    def begin(self, mesh, state0, source0):
        self.mesh = mesh
        self.report = AuditReport()
        self.levels = [state0]
        self.records = []
        self.mass0 = total_mass(mesh, state0)
        self.energy0 = None
        self.boundary_work = 0.0
        self.fields = []

    def after_step(self, prev, new, source_prev, source_new, record):
        mesh = self.mesh
        fl = record.fluxes
        dm = dual_mass_residual(mesh, dual_density_of(mesh, prev.rho), dual_density_of(mesh, new.rho), fl.F_dual, record.dt)
        kin = kinetic_identity_residual(mesh, prev, new, record)
        self.levels = (self.levels + [new])[-3:]
        self.records = (self.records + [record])[-2:]
        G_anti = flux_antisymmetry(mesh, kinetic_flux(mesh, fl))
        if len(self.levels) == 3:
            en = total_energy_audit(mesh, self.levels, self.records)
            e_max, e_mean = en.max, en.mean
            G_anti = max(G_anti, en.G_antisym)
        else:
            e_max = e_mean = math.nan
        shifted = shifted_energy(mesh, prev, new)
        if self.energy0 is None:
            self.energy0 = shifted
        drift = abs(shifted - self.energy0) / max(abs(self.energy0), ABS_FLOOR)
        drift_bc = abs(shifted + self.boundary_work - self.energy0) / max(abs(self.energy0), ABS_FLOOR)
        # boundary kinetic flux of this step enters the next shifted level
        G = kinetic_flux(mesh, fl)
        self.boundary_work += record.dt * float(G[mesh.face_cells[mesh.cell_faces, 1] < 0].sum())
        min_R = float(record.R.min())
        positive = bool(new.rho.min() > 0.0 and new.e.min() > 0.0)
        self.report.rows.append(
            {
                "step": new.step_index,
                "t": new.t,
                "dt": record.dt,
                "dual_mass_max": dm.max,
                "dual_mass_mean": dm.mean,
                "kinetic_max": kin.max,
                "kinetic_mean": kin.mean,
                "energy_max": e_max,
                "energy_mean": e_mean,
                "G_antisym_max": G_anti,
                "mass_drift": abs(total_mass(mesh, new) - self.mass0) / max(abs(self.mass0), ABS_FLOOR),
                "energy_drift": drift,
                "energy_drift_bc": drift_bc,
                "min_rho": float(new.rho.min()),
                "min_e": float(new.e.min()),
                "min_R": min_R,
                "positive": int(positive),
            }
        )
        if self.keep_fields:
            self.fields.append((dm, kin))


# --------------------------------------------------------------------------
# consistency probes


def translate_differences(mesh: StaggeredMesh, rho_levels, z_levels, dts):
    """Sums of the translate differences of a primal and a dual field.

    Returns ``(sum_n dt sum_{sigma=K|L} |D_sigma| |rho_K - rho_L|,
    sum_n dt sum_K |K| sum_{sigma, sigma' in E(K)} |z_sigma - z_sigma'|)``
    over the levels ``n = 0 .. N-1`` (ordered face pairs).
    """
    inner = mesh.interior
    own, nbr = mesh.face_cells[inner, 0], mesh.face_cells[inner, 1]
    dvol = mesh.dual_volume[inner]
    primal = dual = 0.0
    for rho, z, dt in zip(rho_levels, z_levels, dts):
        rho = np.asarray(rho)
        z = np.asarray(z)
        primal += dt * float(np.sum(dvol * np.abs(rho[own] - rho[nbr])))
        zc = z[mesh.cell_faces]
        diff = np.abs(zc[:, :, None] - zc[:, None, :]).sum(axis=(1, 2))
        dual += dt * float(np.sum(mesh.cell_volume * diff))
    return primal, dual


def _bump(r):
    out = np.zeros_like(r)
    d = np.zeros_like(r)
    m = np.abs(r) < 1.0
    q = 1.0 - r[m] ** 2
    out[m] = np.exp(1.0 - 1.0 / q)
    d[m] = out[m] * (-2.0 * r[m] / q**2)
    return out, d


@dataclass(frozen=True)
class TestFunction:
    """Smooth ``phi(x, t)`` supported in ``[lower, upper] x [0, T)``.

    ``phi = prod_i b((x_i - c_i)/w_i) * b(t/T)`` with the smooth bump
    ``b(r) = exp(1 - 1/(1 - r^2))`` on ``|r| < 1``; ``scale = 0`` gives the
    zero function.
    """

    __test__ = False  # not a pytest class

    center: tuple
    halfwidth: tuple
    T: float
    scale: float = 1.0

    @classmethod
    def bump(cls, center, halfwidth, T, scale=1.0):
        center = tuple(float(c) for c in np.atleast_1d(center))
        halfwidth = tuple(float(w) for w in np.broadcast_to(halfwidth, (len(center),)))
        return cls(center, halfwidth, float(T), float(scale))

    @property
    def dim(self):
        return len(self.center)

    @property
    def lower(self):
        return np.array(self.center) - np.array(self.halfwidth)

    @property
    def upper(self):
        return np.array(self.center) + np.array(self.halfwidth)

    def _parts(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals, ders = [], []
        for i in range(self.dim):
            v, d = _bump((x[:, i] - self.center[i]) / self.halfwidth[i])
            vals.append(v)
            ders.append(d / self.halfwidth[i])
        tv, td = _bump(np.array([t / self.T]))
        return vals, ders, float(tv[0]), float(td[0]) / self.T

    def value(self, x, t):
        vals, _, tv, _ = self._parts(x, t)
        return self.scale * np.prod(vals, axis=0) * tv

    def time_derivative(self, x, t):
        vals, _, _, td = self._parts(x, t)
        return self.scale * np.prod(vals, axis=0) * td

    def gradient(self, x, t):
        vals, ders, tv, _ = self._parts(x, t)
        out = np.empty((len(vals[0]), self.dim))
        for i in range(self.dim):
            others = [v for j, v in enumerate(vals) if j != i]
            out[:, i] = ders[i] * (np.prod(others, axis=0) if others else 1.0)
        return self.scale * out * tv


def discrete_gradient(mesh: StaggeredMesh, phi_cell):
    """Face gradient ``|sigma|/|D_sigma| (phi_L - phi_K) n_{K,sigma}``; zero on the boundary."""
    own, nbr = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    inner = nbr >= 0
    jump = np.zeros(mesh.n_faces)
    jump[inner] = phi_cell[nbr[inner]] - phi_cell[own[inner]]
    return (mesh.face_area / mesh.dual_volume * jump)[:, None] * mesh.face_normal


class WeakFormRecorder(StepObserver):
    """Keeps what the weak-form and translate probes need, for one velocity component."""

    def __init__(self, component=0):
        self.component = component

    def begin(self, mesh, state0, source0):
        self.mesh = mesh
        self.times = [state0.t]
        self.dts = []
        self.rho = [np.array(state0.rho)]
        self.z = [np.array(state0.u[:, self.component])]
        self.F_dual = []
        self.z_eps = []

    def after_step(self, prev, new, source_prev, source_new, record):
        self.times.append(new.t)
        self.dts.append(record.dt)
        self.rho.append(np.array(new.rho))
        self.z.append(np.array(new.u[:, self.component]))
        self.F_dual.append(record.fluxes.F_dual)
        self.z_eps.append(record.fluxes.u_dualface[..., self.component])

    def translate_differences(self):
        n = len(self.dts)
        return translate_differences(self.mesh, self.rho[:n], self.z[:n], self.dts)


@dataclass(frozen=True, eq=False)
class WeakFormProbe:
    phi: TestFunction
    T_dt: float
    T_div: float
    ref_dt: float = math.nan
    ref_div: float = math.nan
    grad_max: float = 0.0
    h: float = math.nan

    @property
    def residual_dt(self):
        return abs(self.T_dt - self.ref_dt)

    @property
    def residual_div(self):
        return abs(self.T_div - self.ref_div)

    @property
    def residual(self):
        return self.residual_dt + self.residual_div


def _check_support(mesh, phi, times):
    lo = np.array([ax[0] for ax in mesh.nodes])
    hi = np.array([ax[-1] for ax in mesh.nodes])
    if phi.scale != 0.0 and (np.any(phi.lower <= lo) or np.any(phi.upper >= hi)):
        raise ValueError("test function support touches the domain boundary")
    edge_cells = np.unique(mesh.face_cells[mesh.boundary, 0])
    pts, _ = _cell_points(mesh, 4)
    flat = pts[edge_cells].reshape(-1, mesh.dim)
    for t in times:
        if np.any(phi.value(flat, t) != 0.0):
            raise ValueError("test function does not vanish on boundary-adjacent cells; refine the mesh")


def weak_form_terms(mesh: StaggeredMesh, recorder: WeakFormRecorder, phi: TestFunction, limit=None, quad=4):
    """Discrete ``T_dt``, ``T_div`` and (optionally) their continuous limits.

    ``limit(x, t) -> (rho, z, u)`` gives the limit fields at points
    ``x (n, dim)``; the reference integrals are
    ``-int int rho z d_t phi - int rho_0 z_0 phi(., 0)`` and
    ``-int int rho z u . grad phi``, by Gauss-Legendre in space
    (``quad`` points per axis per cell) and the trapezoid rule on the
    step grid in time.
    """
    times = recorder.times
    n_steps = len(recorder.dts)
    _check_support(mesh, phi, times)
    xk = mesh.cell_centroid
    T_dt = T_div = 0.0
    grad_max = 0.0
    rz_prev = reconstruct_cell_product(mesh, dual_density_of(mesh, recorder.rho[0]), recorder.z[0])
    for n in range(n_steps):
        phi_n = phi.value(xk, times[n])
        rz_next = reconstruct_cell_product(mesh, dual_density_of(mesh, recorder.rho[n + 1]), recorder.z[n + 1])
        T_dt += float(np.sum(mesh.cell_volume * (rz_next - rz_prev) * phi_n))
        G = reconstruct_face_flux(mesh, recorder.F_dual[n], recorder.z_eps[n])
        T_div += recorder.dts[n] * float(np.sum(phi_n * G.sum(axis=1)))
        grad_max = max(grad_max, float(np.abs(discrete_gradient(mesh, phi_n)).max()))
        rz_prev = rz_next
    probe = dict(phi=phi, T_dt=T_dt, T_div=T_div, grad_max=grad_max, h=float(mesh.cell_diameter.max()))
    if limit is None:
        return WeakFormProbe(**probe)

    pts, w = _cell_points(mesh, quad)
    flat = pts.reshape(-1, mesh.dim)
    wq = (mesh.cell_volume[:, None] * w[None, :] / w.sum()).ravel()
    a_dt, a_div = [], []
    for t in times:
        rho, z, u = limit(flat, t)
        rz = np.asarray(rho) * np.asarray(z)
        u = np.asarray(u).reshape(-1, mesh.dim)
        a_dt.append(float(np.sum(wq * rz * phi.time_derivative(flat, t))))
        a_div.append(float(np.sum(wq * rz * np.einsum("qd,qd->q", u, phi.gradient(flat, t)))))
    dts = np.diff(np.asarray(times))
    trap = lambda f: float(np.sum(0.5 * dts * (np.asarray(f[1:]) + np.asarray(f[:-1]))))
    rho0, z0, _ = limit(flat, times[0])
    init = float(np.sum(wq * np.asarray(rho0) * np.asarray(z0) * phi.value(flat, times[0])))
    probe["ref_dt"] = -trap(a_dt) - init
    probe["ref_div"] = -trap(a_div)
    return WeakFormProbe(**probe)


def observed_orders(hs, errors):
    """``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` for consecutive levels."""
    hs, errors = np.asarray(hs, dtype=float), np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
