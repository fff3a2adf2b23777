# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same signatures and summation order as ``_kernels_py``."""
import numpy as np

NAME = "cython"


def cell_sum(const long[:, ::1] cell_faces, const double[:, ::1] cell_sign,
             const double[::1] face_vals):
    cdef Py_ssize_t nc = cell_faces.shape[0], z = cell_faces.shape[1]
    cdef Py_ssize_t k, l
    cdef double acc
    out = np.empty(nc)
    cdef double[::1] o = out
    for k in range(nc):
        acc = 0.0
        for l in range(z):
            acc = acc + cell_sign[k, l] * face_vals[cell_faces[k, l]]
        o[k] = acc
    return out


def dual_fluxes(const double[:, ::1] xi, const double[:, ::1] flux_cell):
    cdef Py_ssize_t nc = flux_cell.shape[0], nd = xi.shape[0], z = xi.shape[1]
    cdef Py_ssize_t k, j, l
    cdef double acc
    out = np.empty((nc, nd))
    cdef double[:, ::1] o = out
    for k in range(nc):
        for j in range(nd):
            acc = 0.0
            for l in range(z):
                acc = acc + xi[j, l] * flux_cell[k, l]
            o[k, j] = acc
    return out


def dual_upwind(const long[:, ::1] cell_faces, const long[:, ::1] pairs,
                const double[:, ::1] fdual, const double[:, ::1] u):
    cdef Py_ssize_t nc = fdual.shape[0], nd = fdual.shape[1], dim = u.shape[1]
    cdef Py_ssize_t k, j, i, s
    out = np.empty((nc, nd, dim))
    cdef double[:, :, ::1] o = out
    for k in range(nc):
        for j in range(nd):
            if fdual[k, j] >= 0.0:
                s = cell_faces[k, pairs[j, 0]]
            else:
                s = cell_faces[k, pairs[j, 1]]
            for i in range(dim):
                o[k, j, i] = u[s, i]
    return out


def dual_assembly(const long[:, ::1] cell_faces, const long[:, ::1] pairs,
                  const double[:, ::1] fdual, const double[:, :, ::1] ueps,
                  const double[:, ::1] u, Py_ssize_t n_faces):
    cdef Py_ssize_t nc = fdual.shape[0], nd = fdual.shape[1], dim = u.shape[1]
    cdef Py_ssize_t k, j, i, side, s
    cdef double f, w, ue, d
    mass_a = np.zeros(n_faces)
    conv_a = np.zeros((n_faces, dim))
    lin_a = np.zeros((n_faces, dim))
    quad_a = np.zeros((n_faces, dim))
    cdef double[::1] mass = mass_a
    cdef double[:, ::1] conv = conv_a
    cdef double[:, ::1] lin = lin_a
    cdef double[:, ::1] quad = quad_a
    for k in range(nc):
        for j in range(nd):
            f = fdual[k, j]
            for side in range(2):
                s = cell_faces[k, pairs[j, side]]
                w = f if side == 0 else -f
                mass[s] = mass[s] + w
                for i in range(dim):
                    ue = ueps[k, j, i]
                    d = ue - u[s, i]
                    conv[s, i] = conv[s, i] + w * ue
                    lin[s, i] = lin[s, i] + w * d
                    quad[s, i] = quad[s, i] + w * d * d
    return mass_a, conv_a, lin_a, quad_a
