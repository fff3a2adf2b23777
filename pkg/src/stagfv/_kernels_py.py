"""Pure NumPy reference kernels.

The compiled twin in ``_kernels_cy.pyx`` accumulates in the same order
(cell-major, first face of a pair before the second), so both backends
return identical bits.
"""
import numpy as np

NAME = "python"


def cell_sum(cell_faces, cell_sign, face_vals):
    """``sum_l sign[k, l] * face_vals[cell_faces[k, l]]`` for every cell."""
    acc = np.zeros(cell_faces.shape[0])
    for l in range(cell_faces.shape[1]):
        acc = acc + cell_sign[:, l] * face_vals[cell_faces[:, l]]
    return acc


def dual_fluxes(xi, flux_cell):
    """Dual face fluxes ``(nc, n_dual)`` from primal ``F_{K,sigma}`` ``(nc, zeta)``."""
    nc = flux_cell.shape[0]
    out = np.zeros((nc, xi.shape[0]))
    for j in range(xi.shape[0]):
        col = np.zeros(nc)
        for l in range(xi.shape[1]):
            col = col + xi[j, l] * flux_cell[:, l]
        out[:, j] = col
    return out


def dual_upwind(cell_faces, pairs, fdual, u):
    """Upwind value of ``u`` on every dual face; ties go to the first face."""
    fa = cell_faces[:, pairs[:, 0]]
    fb = cell_faces[:, pairs[:, 1]]
    pick = np.where((fdual >= 0.0)[..., None], u[fa], u[fb])
    return pick


def _scatter_index(cell_faces, pairs):
    fa = cell_faces[:, pairs[:, 0]].ravel()
    fb = cell_faces[:, pairs[:, 1]].ravel()
    return np.stack([fa, fb], axis=1).ravel()


def dual_assembly(cell_faces, pairs, fdual, ueps, u, n_faces):
    """Per-face sums over dual faces of the diamond cell.

    Returns ``(mass, conv, lin, quad)`` with, for every face ``s`` and
    component ``i``::

        mass[s]      = sum_eps F_{s,eps}
        conv[s, i]   = sum_eps F_{s,eps} u_eps,i
        lin[s, i]    = sum_eps F_{s,eps} (u_eps,i - u_s,i)
        quad[s, i]   = sum_eps F_{s,eps} (u_eps,i - u_s,i)^2
    """
    idx = _scatter_index(cell_faces, pairs)
    f = fdual.ravel()
    w = np.stack([f, -f], axis=1).ravel()
    dim = u.shape[1]
    ue = np.repeat(ueps.reshape(-1, dim), 2, axis=0)
    mass = np.bincount(idx, weights=w, minlength=n_faces)
    conv = np.empty((n_faces, dim))
    lin = np.empty((n_faces, dim))
    quad = np.empty((n_faces, dim))
    for i in range(dim):
        d = ue[:, i] - u[idx, i]
        conv[:, i] = np.bincount(idx, weights=w * ue[:, i], minlength=n_faces)
        lin[:, i] = np.bincount(idx, weights=w * d, minlength=n_faces)
        quad[:, i] = np.bincount(idx, weights=w * d * d, minlength=n_faces)
    return mass, conv, lin, quad
