"""Per-step flux quantities on the primal and dual meshes.

Sign conventions: ``face_flux[s]`` is the mass flux through face ``s`` along
``mesh.face_normal[s]`` (out of the owner cell); ``F_{K,sigma}`` is stored
per (cell, local face) as ``cell_sign * face_flux``.  The dual flux
``F_dual[k, j]`` leaves ``D_a`` towards ``D_b`` for the pair
``(a, b) = mesh.dual_pairs[j]`` of cell ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import StaggeredMesh

SCHEMES = ("upwind", "centered", "muscl")


@dataclass(frozen=True)
class InterpolantChoice:
    """Face/dual-face interpolation per convected quantity.

    ``centered`` carries no positivity guarantee and is meant for
    experiments only.
    """

    density: str = "upwind"
    energy: str = "upwind"
    velocity: str = "upwind"

    def __post_init__(self):
        for name in ("density", "energy", "velocity"):
            v = getattr(self, name)
            if v not in SCHEMES:
                raise ValueError(f"unknown interpolant {v!r} for {name}; choose from {SCHEMES}")

    @classmethod
    def uniform(cls, scheme):
        return cls(scheme, scheme, scheme)


@dataclass(frozen=True, eq=False)
class FluxSet:
    """Everything one step needs (and the audits re-use) at time level n."""

    face_flux: np.ndarray
    F_primal: np.ndarray
    rho_face: np.ndarray
    e_face: np.ndarray
    F_dual: np.ndarray
    u_dualface: np.ndarray
    rho_dualcell: np.ndarray


def minmod(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _limited(up, down, upup, has_upup):
    slope = np.where(has_upup, minmod(up - upup, down - up), 0.0)
    val = up + 0.5 * slope
    return np.clip(val, np.minimum(up, down), np.maximum(up, down))


def face_value(mesh: StaggeredMesh, cell_vals, face_flux, scheme="upwind"):
    """Face interpolant of a cell field, a convex combination of its neighbours.

    Upwinding follows the sign of ``face_flux`` (ties go to the owner).
    Boundary faces take the owner value.
    """
    own, nbr = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    inner = nbr >= 0
    nb = np.where(inner, nbr, own)
    v0, v1 = cell_vals[own], cell_vals[nb]
    if scheme == "centered":
        out = 0.5 * (v0 + v1)
    else:
        fwd = face_flux >= 0.0
        up = np.where(fwd, v0, v1)
        if scheme == "upwind":
            out = up
        elif scheme == "muscl":
            down = np.where(fwd, v1, v0)
            uu = np.where(fwd, mesh.cell_upstream[:, 0], mesh.cell_upstream[:, 1])
            out = _limited(up, down, cell_vals[np.maximum(uu, 0)], uu >= 0)
        else:
            raise ValueError(f"unknown interpolant {scheme!r}")
    return np.where(inner, out, v0)


def normal_velocity(mesh: StaggeredMesh, u):
    """``u_sigma . n_sigma`` along the stored face normal."""
    return np.einsum("sd,sd->s", u, mesh.face_normal)


def face_mass_flux(mesh: StaggeredMesh, rho, u, scheme="upwind"):
    """Oriented face mass flux and face density; zero on the boundary."""
    un = normal_velocity(mesh, u)
    rho_face = face_value(mesh, rho, un, scheme)
    flux = np.where(mesh.interior, mesh.face_area * rho_face * un, 0.0)
    return flux, rho_face


def per_cell(mesh: StaggeredMesh, face_vals):
    """Spread an oriented face quantity onto (cell, local face) with outward sign."""
    return mesh.cell_sign * face_vals[mesh.cell_faces]


def primal_mass_flux(mesh: StaggeredMesh, state, choice: InterpolantChoice | None = None):
    """``F_{K,sigma} = |sigma| rho_sigma u_sigma . n_{K,sigma}``, shape (nc, zeta)."""
    choice = choice or InterpolantChoice()
    flux, _ = face_mass_flux(mesh, state.rho, state.u, choice.density)
    return per_cell(mesh, flux)


def face_divergence(mesh: StaggeredMesh, u):
    """Discrete divergence per cell; boundary faces contribute nothing."""
    if hasattr(u, "u"):
        u = u.u
    vol_flux = np.where(mesh.interior, mesh.face_area * normal_velocity(mesh, u), 0.0)
    return kernels.cell_sum(mesh.cell_faces, mesh.cell_sign, kernels.as_c(vol_flux)) / mesh.cell_volume


def pressure_force(mesh: StaggeredMesh, p):
    """``|D_sigma| (grad p)_sigma = |sigma| (p_L - p_K) n_{K,sigma}``; zero on the boundary."""
    if hasattr(p, "p"):
        p = p.p
    own, nbr = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    inner = nbr >= 0
    jump = np.where(inner, p[np.where(inner, nbr, own)] - p[own], 0.0)
    return (mesh.face_area * jump)[:, None] * mesh.face_normal


def pressure_gradient(mesh: StaggeredMesh, p):
    """Transpose of :func:`face_divergence`, per face, shape (nf, dim)."""
    return pressure_force(mesh, p) / mesh.dual_volume[:, None]


def dual_density(mesh: StaggeredMesh, rho):
    """Volume-weighted density of each diamond cell."""
    if hasattr(rho, "rho"):
        rho = rho.rho
    own, nbr = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    inner = nbr >= 0
    hv = mesh.half_volume
    mixed = (hv[:, 0] * rho[own] + hv[:, 1] * rho[np.where(inner, nbr, own)]) / mesh.dual_volume
    return np.where(inner, mixed, rho[own])


def dual_mass_flux(mesh: StaggeredMesh, F_primal):
    """Dual fluxes ``sum_sigma' xi_{eps,sigma'} F_{K,sigma'}``, shape (nc, n_dual)."""
    return kernels.dual_fluxes(mesh.xi, kernels.as_c(F_primal))


def dual_face_velocity(mesh: StaggeredMesh, u, F_dual, scheme="upwind"):
    """Convected velocity on each dual face, shape (nc, n_dual, dim).

    Upwinding follows ``F_dual``; a zero flux takes the first face of the pair.
    """
    if hasattr(u, "u"):
        u = u.u
    u = kernels.as_c(u)
    if scheme == "upwind":
        return kernels.dual_upwind(mesh.cell_faces, mesh.dual_pairs, kernels.as_c(F_dual), u)
    fa = mesh.cell_faces[:, mesh.dual_pairs[:, 0]]
    fb = mesh.cell_faces[:, mesh.dual_pairs[:, 1]]
    ua, ub = u[fa], u[fb]
    if scheme == "centered":
        return 0.5 * (ua + ub)
    if scheme != "muscl":
        raise ValueError(f"unknown interpolant {scheme!r}")
    fwd = (F_dual >= 0.0)[..., None]
    up = np.where(fwd, ua, ub)
    down = np.where(fwd, ub, ua)
    uu = np.where(F_dual >= 0.0, mesh.dual_upstream[..., 0], mesh.dual_upstream[..., 1])
    return _limited(up, down, u[np.maximum(uu, 0)], (uu >= 0)[..., None])


def dual_flux_sums(mesh: StaggeredMesh, F_dual, u_eps, u):
    """Per-face sums over the dual faces of each diamond (see ``dual_assembly``)."""
    return kernels.dual_assembly(
        mesh.cell_faces,
        mesh.dual_pairs,
        kernels.as_c(F_dual),
        kernels.as_c(u_eps),
        kernels.as_c(u),
        mesh.n_faces,
    )


def half_diamond_balance(mesh: StaggeredMesh, F_primal, F_dual):
    """Residual of the half-diamond mass balance, shape (nc, zeta).

    For each cell K and local face sigma: flux out of D_{K,sigma} through
    sigma plus through its dual faces inside K, minus the share
    ``(1/zeta) sum_sigma' F_{K,sigma'}`` of the cell's outflow.
    """
    z = mesh.zeta
    out = np.array(F_primal, dtype=float, copy=True)
    for j, (a, b) in enumerate(mesh.dual_pairs):
        out[:, a] += F_dual[:, j]
        out[:, b] -= F_dual[:, j]
    return out - F_primal.sum(axis=1, keepdims=True) / z


def compute_fluxes(mesh: StaggeredMesh, state, choice: InterpolantChoice) -> FluxSet:
    """Assemble the :class:`FluxSet` of ``state``."""
    face_flux, rho_face = face_mass_flux(mesh, state.rho, state.u, choice.density)
    e_face = face_value(mesh, state.e, face_flux, choice.energy)
    F = per_cell(mesh, face_flux)
    F_dual = dual_mass_flux(mesh, F)
    u_eps = dual_face_velocity(mesh, state.u, F_dual, choice.velocity)
    return FluxSet(
        face_flux=face_flux,
        F_primal=F,
        rho_face=rho_face,
        e_face=e_face,
        F_dual=F_dual,
        u_dualface=u_eps,
        rho_dualcell=dual_density(mesh, state.rho),
    )
