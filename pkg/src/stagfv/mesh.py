"""Primal and dual (diamond) meshes for 1D intervals and 2D rectangles.

Cells carry the scalar unknowns, faces carry the velocity.  Every face owns
a diamond cell made of one half-diamond per adjacent cell, each of volume
``|K| / zeta``.  Inside a cell, dual faces separate half-diamonds of
neighbouring faces; they are listed per cell as local face pairs
(``DUAL_PAIRS``) and the mass flux through each one is a fixed linear
combination of the cell's primal fluxes (``XI_TABLE``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MeshError

# Local face order: 1D (left, right); 2D (west, south, east, north).  In 2D
# consecutive entries are perpendicular so the dual faces form a 4-cycle.
DUAL_PAIRS = {
    2: np.array([[0, 1]], dtype=np.int64),
    4: np.array([[0, 1], [1, 2], [2, 3], [3, 0]], dtype=np.int64),
}

# Minimum-norm solution of the half-diamond balance; row j gives the flux
# leaving D_{sigma_a} towards D_{sigma_b} for pair j = (a, b).
XI_TABLE = {
    2: np.array([[-0.5, 0.5]]),
    4: np.array(
        [
            [-3.0, 3.0, 1.0, -1.0],
            [-1.0, -3.0, 3.0, 1.0],
            [1.0, -1.0, -3.0, 3.0],
            [3.0, 1.0, -1.0, -3.0],
        ]
    )
    / 8.0,
}


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StaggeredMesh:
    """Immutable staggered mesh.

    Faces are oriented: ``face_cells[s, 0]`` is the owner cell and
    ``face_normal[s]`` points out of it.  ``face_cells[s, 1]`` is ``-1`` on
    the boundary.  ``cell_sign[k, l]`` is +1 when cell ``k`` owns its local
    face ``l`` so that ``n_{K,sigma} = cell_sign * face_normal``.
    """

    dim: int
    nodes: tuple
    cell_volume: np.ndarray
    cell_centroid: np.ndarray
    cell_diameter: np.ndarray
    cell_faces: np.ndarray
    cell_sign: np.ndarray
    face_area: np.ndarray
    face_centroid: np.ndarray
    face_normal: np.ndarray
    face_axis: np.ndarray
    face_cells: np.ndarray
    half_volume: np.ndarray
    dual_volume: np.ndarray
    dual_pairs: np.ndarray
    xi: np.ndarray
    cell_upstream: np.ndarray
    dual_upstream: np.ndarray

    @property
    def zeta(self) -> int:
        return self.cell_faces.shape[1]

    @property
    def n_cells(self) -> int:
        return self.cell_volume.shape[0]

    @property
    def n_faces(self) -> int:
        return self.face_area.shape[0]

    @property
    def n_dual(self) -> int:
        return self.dual_pairs.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return self.face_cells[:, 1] >= 0

    @property
    def boundary(self) -> np.ndarray:
        return self.face_cells[:, 1] < 0

    @property
    def volume(self) -> float:
        return float(self.cell_volume.sum())

    def outward_normals(self) -> np.ndarray:
        """``n_{K,sigma}`` for every (cell, local face), shape (nc, zeta, dim)."""
        return self.cell_sign[:, :, None] * self.face_normal[self.cell_faces]

    def face_distance(self) -> np.ndarray:
        """``d_sigma = |x_K - x_L|`` on interior faces, 0 on the boundary."""
        d = np.zeros(self.n_faces)
        inner = self.interior
        k, l = self.face_cells[inner, 0], self.face_cells[inner, 1]
        d[inner] = np.linalg.norm(self.cell_centroid[k] - self.cell_centroid[l], axis=1)
        return d

    def dual_face_cells(self) -> np.ndarray:
        """Cell containing each dual face, flattened (nc * n_dual,)."""
        return np.repeat(np.arange(self.n_cells), self.n_dual)

    def summary(self) -> str:
        reg = regularity(self)
        lines = [
            f"dim            {self.dim}",
            f"cells          {self.n_cells}",
            f"faces          {self.n_faces} ({int(self.interior.sum())} interior)",
            f"dual faces     {self.n_cells * self.n_dual}",
            f"theta1         {reg.theta1:.6g}",
            f"theta2         {reg.theta2:.6g}",
            f"h              {reg.h:.6g}",
        ]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MeshRegularity:
    theta1: float
    theta2: float
    h: float


def solve_xi_coefficients(zeta: int) -> np.ndarray:
    """Least-squares (minimum-norm) dual flux coefficients for ``zeta`` faces.

    Unknowns are the fluxes through the dual faces of one cell, each oriented
    from the first to the second face of its pair.  The half-diamond of face
    ``j`` must export ``(1/zeta) sum_k F_k - F_j`` through its dual faces;
    the resulting linear map from primal fluxes to dual fluxes is returned
    as an (n_dual, zeta) array.
    """
    if zeta not in DUAL_PAIRS:
        raise MeshError(f"unsupported face count zeta={zeta}; expected 2 or 4")
    pairs = DUAL_PAIRS[zeta]
    incidence = np.zeros((zeta, len(pairs)))
    for j, (a, b) in enumerate(pairs):
        incidence[a, j] = 1.0
        incidence[b, j] = -1.0
    target = np.full((zeta, zeta), 1.0 / zeta) - np.eye(zeta)
    return np.linalg.pinv(incidence) @ target


def build_mesh(dim: int, extents: Sequence, counts: Sequence[int] | int) -> StaggeredMesh:
    """Uniform mesh of an interval (``dim=1``) or a rectangle (``dim=2``).

    ``extents`` is ``(a, b)`` in 1D and ``((a, b), (c, d))`` or the flat
    ``(a, b, c, d)`` in 2D.
    """
    if dim not in (1, 2):
        raise MeshError(f"dim must be 1 or 2, got {dim}")
    ext = np.asarray(extents, dtype=float).reshape(-1)
    if ext.size != 2 * dim:
        raise MeshError(f"expected {2 * dim} extent values, got {ext.size}")
    counts = np.atleast_1d(np.asarray(counts)).astype(np.int64)
    if counts.size != dim:
        raise MeshError(f"expected {dim} cell counts, got {counts.size}")
    axes = []
    for d in range(dim):
        lo, hi = ext[2 * d], ext[2 * d + 1]
        n = int(counts[d])
        if n < 1:
            raise MeshError(f"cell count along axis {d} must be >= 1, got {n}")
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise MeshError(f"degenerate extent along axis {d}: [{lo}, {hi}]")
        axes.append(np.linspace(lo, hi, n + 1))
    return mesh_from_nodes(*axes)


def mesh_from_nodes(*axes) -> StaggeredMesh:
    """Tensor-product mesh from strictly increasing node coordinates per axis."""
    dim = len(axes)
    if dim not in (1, 2):
        raise MeshError(f"need 1 or 2 node arrays, got {dim}")
    nodes = []
    for d, a in enumerate(axes):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise MeshError(f"axis {d} needs at least two nodes")
        if not np.all(np.isfinite(a)) or np.any(np.diff(a) <= 0):
            raise MeshError(f"axis {d} nodes must be finite and strictly increasing")
        nodes.append(_frozen(a.copy()))
    if dim == 1:
        parts = _topology_1d(nodes[0])
    else:
        parts = _topology_2d(nodes[0], nodes[1])
    zeta = 2 * dim
    cell_volume = parts["cell_volume"]
    cell_faces = parts["cell_faces"]
    face_cells = parts["face_cells"]
    nf = face_cells.shape[0]

    cell_sign = np.where(face_cells[cell_faces, 0] == np.arange(len(cell_volume))[:, None], 1.0, -1.0)
    half = np.zeros((nf, 2))
    half[:, 0] = cell_volume[face_cells[:, 0]] / zeta
    inner = face_cells[:, 1] >= 0
    half[inner, 1] = cell_volume[face_cells[inner, 1]] / zeta

    keys_c, keys_f, lookup_c, lookup_f = parts["keys"]
    cell_up = np.full((nf, 2), -1, dtype=np.int64)
    k, l = face_cells[inner, 0], face_cells[inner, 1]
    cell_up[inner, 0] = _lookup(lookup_c, 2 * keys_c[k] - keys_c[l])
    cell_up[inner, 1] = _lookup(lookup_c, 2 * keys_c[l] - keys_c[k])

    pairs = DUAL_PAIRS[zeta]
    fa = cell_faces[:, pairs[:, 0]]
    fb = cell_faces[:, pairs[:, 1]]
    dual_up = np.empty(fa.shape + (2,), dtype=np.int64)
    dual_up[..., 0] = _lookup(lookup_f, 2 * keys_f[fa] - keys_f[fb])
    dual_up[..., 1] = _lookup(lookup_f, 2 * keys_f[fb] - keys_f[fa])

    return StaggeredMesh(
        dim=dim,
        nodes=tuple(nodes),
        cell_volume=_frozen(cell_volume),
        cell_centroid=_frozen(parts["cell_centroid"]),
        cell_diameter=_frozen(parts["cell_diameter"]),
        cell_faces=_frozen(cell_faces),
        cell_sign=_frozen(cell_sign),
        face_area=_frozen(parts["face_area"]),
        face_centroid=_frozen(parts["face_centroid"]),
        face_normal=_frozen(parts["face_normal"]),
        face_axis=_frozen(parts["face_axis"]),
        face_cells=_frozen(face_cells),
        half_volume=_frozen(half),
        dual_volume=_frozen(half.sum(axis=1)),
        dual_pairs=_frozen(pairs),
        xi=_frozen(XI_TABLE[zeta]),
        cell_upstream=_frozen(cell_up),
        dual_upstream=_frozen(dual_up),
    )


def _lookup(table, keys):
    # keys (..., dim) in half-cell lattice units; -1 outside the grid
    keys = np.asarray(keys)
    shape = np.array(table.shape)
    ok = np.all((keys >= 0) & (keys < shape), axis=-1)
    safe = np.where(ok[..., None], keys, 0)
    out = table[tuple(safe[..., d] for d in range(keys.shape[-1]))]
    return np.where(ok, out, -1)


def _topology_1d(x):
    n = x.size - 1
    dx = np.diff(x)
    face_cells = np.empty((n + 1, 2), dtype=np.int64)
    face_cells[:, 0] = np.arange(-1, n)
    face_cells[:, 1] = np.arange(0, n + 1)
    face_cells[0] = (0, -1)
    face_cells[n] = (n - 1, -1)
    normal = np.ones((n + 1, 1))
    normal[0, 0] = -1.0
    cell_faces = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1).astype(np.int64)

    lookup_c = np.full(2 * n + 1, -1, dtype=np.int64)
    lookup_c[1::2] = np.arange(n)
    lookup_f = np.full(2 * n + 1, -1, dtype=np.int64)
    lookup_f[0::2] = np.arange(n + 1)
    keys_c = (2 * np.arange(n) + 1)[:, None]
    keys_f = (2 * np.arange(n + 1))[:, None]
    return dict(
        cell_volume=dx.copy(),
        cell_centroid=(0.5 * (x[:-1] + x[1:]))[:, None],
        cell_diameter=dx.copy(),
        cell_faces=cell_faces,
        face_cells=face_cells,
        face_area=np.ones(n + 1),
        face_centroid=x[:, None].copy(),
        face_normal=normal,
        face_axis=np.zeros(n + 1, dtype=np.int64),
        keys=(keys_c, keys_f, lookup_c, lookup_f),
    )


def _topology_2d(x, y):
    nx, ny = x.size - 1, y.size - 1
    dx, dy = np.diff(x), np.diff(y)
    xc, yc = 0.5 * (x[:-1] + x[1:]), 0.5 * (y[:-1] + y[1:])
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()  # cell k = i + nx * j
    nc = nx * ny
    cell_volume = dx[ii] * dy[jj]
    cell_centroid = np.stack([xc[ii], yc[jj]], axis=1)
    cell_diameter = np.hypot(dx[ii], dy[jj])

    # vertical faces (normal along x): id = i + (nx + 1) * j
    nv = (nx + 1) * ny
    vi, vj = np.meshgrid(np.arange(nx + 1), np.arange(ny), indexing="xy")
    vi, vj = vi.ravel(), vj.ravel()
    # horizontal faces (normal along y): id = nv + i + nx * j
    nh = nx * (ny + 1)
    hi, hj = np.meshgrid(np.arange(nx), np.arange(ny + 1), indexing="xy")
    hi, hj = hi.ravel(), hj.ravel()
    nf = nv + nh

    face_cells = np.full((nf, 2), -1, dtype=np.int64)
    normal = np.zeros((nf, 2))
    left = vi - 1 + nx * vj
    right = vi + nx * vj
    face_cells[:nv, 0] = np.where(vi > 0, left, right)
    face_cells[:nv, 1] = np.where((vi > 0) & (vi < nx), right, -1)
    normal[:nv, 0] = np.where(vi > 0, 1.0, -1.0)
    below = hi + nx * (hj - 1)
    above = hi + nx * hj
    face_cells[nv:, 0] = np.where(hj > 0, below, above)
    face_cells[nv:, 1] = np.where((hj > 0) & (hj < ny), above, -1)
    normal[nv:, 1] = np.where(hj > 0, 1.0, -1.0)

    face_area = np.concatenate([dy[vj], dx[hi]])
    face_centroid = np.concatenate(
        [np.stack([x[vi], yc[vj]], axis=1), np.stack([xc[hi], y[hj]], axis=1)]
    )
    face_axis = np.concatenate([np.zeros(nv, dtype=np.int64), np.ones(nh, dtype=np.int64)])

    west = ii + (nx + 1) * jj
    east = west + 1
    south = nv + ii + nx * jj
    north = south + nx
    cell_faces = np.stack([west, south, east, north], axis=1).astype(np.int64)

    lookup_c = np.full((2 * nx + 1, 2 * ny + 1), -1, dtype=np.int64)
    lookup_c[2 * ii + 1, 2 * jj + 1] = np.arange(nc)
    lookup_f = np.full((2 * nx + 1, 2 * ny + 1), -1, dtype=np.int64)
    lookup_f[2 * vi, 2 * vj + 1] = np.arange(nv)
    lookup_f[2 * hi + 1, 2 * hj] = nv + np.arange(nh)
    keys_c = np.stack([2 * ii + 1, 2 * jj + 1], axis=1)
    keys_f = np.concatenate(
        [np.stack([2 * vi, 2 * vj + 1], axis=1), np.stack([2 * hi + 1, 2 * hj], axis=1)]
    )
    return dict(
        cell_volume=cell_volume,
        cell_centroid=cell_centroid,
        cell_diameter=cell_diameter,
        cell_faces=cell_faces,
        face_cells=face_cells,
        face_area=face_area,
        face_centroid=face_centroid,
        face_normal=normal,
        face_axis=face_axis,
        keys=(keys_c, keys_f, lookup_c, lookup_f),
    )


def regularity(mesh: StaggeredMesh) -> MeshRegularity:
    """Mesh regularity measures and size.

    ``theta1`` is the largest volume ratio across an interior face.
    ``theta2`` is ``max_K (sum |sigma'| / |K|) * max_{sigma=K|L} (h_K + h_L)``;
    a cell without interior faces uses ``2 h_K`` for the second factor.
    """
    inner = mesh.interior
    k, l = mesh.face_cells[inner, 0], mesh.face_cells[inner, 1]
    vk, vl = mesh.cell_volume[k], mesh.cell_volume[l]
    theta1 = float(np.max(np.maximum(vk / vl, vl / vk))) if inner.any() else 1.0

    h = mesh.cell_diameter
    pair = np.full(mesh.n_faces, -np.inf)
    pair[inner] = h[k] + h[l]
    per_cell = pair[mesh.cell_faces].max(axis=1)
    per_cell = np.where(np.isfinite(per_cell), per_cell, 2.0 * h)
    perimeter = mesh.face_area[mesh.cell_faces].sum(axis=1)
    theta2 = float(np.max(perimeter / mesh.cell_volume * per_cell))
    return MeshRegularity(theta1=theta1, theta2=theta2, h=float(h.max()))
