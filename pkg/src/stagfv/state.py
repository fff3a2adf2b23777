"""Discrete unknowns, ideal-gas closure and initial averaging."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonFiniteError, PositivityError
from .mesh import StaggeredMesh

QUAD_POINTS = 3


@dataclass(frozen=True)
class GasConfig:
    gamma: float = 1.4

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 1.0):
            raise ConfigError(f"gamma must be > 1, got {self.gamma}", key="gamma")

    def sound_speed(self, rho, p):
        return np.sqrt(self.gamma * np.maximum(p, 0.0) / rho)


def _ro(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class State:
    """Snapshot of the unknowns at one time level.

    ``rho``, ``e`` and ``p`` live on cells; ``u`` has shape (n_faces, dim).
    Arrays are read-only; use :meth:`replace` to derive a new snapshot.
    """

    rho: np.ndarray
    e: np.ndarray
    p: np.ndarray
    u: np.ndarray
    t: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        for name in ("rho", "e", "p", "u"):
            object.__setattr__(self, name, _ro(getattr(self, name)))

    def replace(self, **changes) -> "State":
        return dataclasses.replace(self, **changes)

    def check(self, step=None):
        """Raise if any value is non-finite or rho, e are not positive."""
        for name in ("rho", "e", "p", "u"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr.reshape(arr.shape[0], -1)).any(axis=1))[0])
                raise NonFiniteError(f"non-finite {name} at index {bad} (step {step})")
        for name in ("rho", "e"):
            arr = getattr(self, name)
            if np.any(arr <= 0.0):
                k = int(np.argmin(arr))
                raise PositivityError(
                    f"{name} = {arr[k]:.6g} <= 0 in cell {k} (step {step})", cell=k, step=step
                )


def apply_eos(state: State, gas: GasConfig) -> State:
    """Return ``state`` with ``p = (gamma - 1) rho e``."""
    for name in ("rho", "e"):
        arr = getattr(state, name)
        if np.any(~(arr > 0.0)):
            k = int(np.flatnonzero(~(arr > 0.0))[0])
            raise PositivityError(f"{name} = {arr[k]!r} is not positive in cell {k}", cell=k)
    return state.replace(p=(gas.gamma - 1.0) * state.rho * state.e)


# --------------------------------------------------------------------------
# initial averaging


def _gauss(n=QUAD_POINTS):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _cell_points(mesh, n=QUAD_POINTS):
    """Quadrature nodes (nc, nq, dim) and weights (nq,) on every cell."""
    s, w = _gauss(n)
    if mesh.dim == 1:
        x = mesh.nodes[0]
        pts = x[:-1, None] + np.diff(x)[:, None] * s[None, :]
        return pts[..., None], w
    x, y = mesh.nodes
    nx = x.size - 1
    k = np.arange(mesh.n_cells)
    i, j = k % nx, k // nx
    sx, sy = np.meshgrid(s, s, indexing="ij")
    wx = np.outer(w, w).ravel()
    px = x[i, None] + np.diff(x)[i, None] * sx.ravel()[None, :]
    py = y[j, None] + np.diff(y)[j, None] * sy.ravel()[None, :]
    return np.stack([px, py], axis=-1), wx


def _half_diamond_points(mesh, side):
    """Quadrature nodes on D_{K,sigma} for K = face_cells[:, side]."""
    s, w = _gauss()
    cells = mesh.face_cells[:, side]
    ok = cells >= 0
    c = mesh.cell_centroid[np.where(ok, cells, 0)]
    if mesh.dim == 1:
        xf = mesh.face_centroid
        pts = xf[:, None, :] + (c - xf)[:, None, :] * s[None, :, None]
        return pts, w, ok
    # triangle (centroid, face endpoints) through the collapsed square
    half = np.zeros_like(mesh.face_centroid)
    half[np.arange(mesh.n_faces), 1 - mesh.face_axis] = 0.5 * mesh.face_area
    p1 = mesh.face_centroid - half
    p2 = mesh.face_centroid + half
    a, b = np.meshgrid(s, s, indexing="ij")
    a, b = a.ravel(), b.ravel()
    wt = np.outer(w, w).ravel() * a
    edge = (1.0 - b)[None, :, None] * (p1 - c)[:, None, :] + b[None, :, None] * (p2 - c)[:, None, :]
    pts = c[:, None, :] + a[None, :, None] * edge
    return pts, wt / wt.sum(), ok


def _evaluate(field, pts, ncomp, name):
    flat = pts.reshape(-1, pts.shape[-1])
    try:
        vals = np.asarray(field(flat), dtype=float)
    except Exception as exc:  # descriptor failed somewhere in the domain
        raise ConfigError(f"initial field could not be evaluated: {exc}", key=name) from exc
    vals = vals.reshape(pts.shape[:-1] + ((ncomp,) if ncomp > 1 else ()))
    if not np.all(np.isfinite(vals)):
        raise ConfigError("initial field is undefined (non-finite) somewhere in the domain", key=name)
    return vals


def _average(vals, w):
    # region-constant samples are returned exactly
    avg = vals @ w / w.sum()
    same = np.all(vals == vals[:, :1], axis=1)
    return np.where(same, vals[:, 0], avg)


def cell_average(mesh: StaggeredMesh, field, name="field") -> np.ndarray:
    if not callable(field):
        return np.full(mesh.n_cells, float(field))
    pts, w = _cell_points(mesh)
    return _average(_evaluate(field, pts, 1, name), w)


def dual_average(mesh: StaggeredMesh, field, ncomp: int, name="field") -> np.ndarray:
    """Average of ``field`` over every diamond cell, shape (nf, ncomp)."""
    if not callable(field):
        return np.broadcast_to(np.asarray(field, dtype=float), (mesh.n_faces, ncomp)).copy()
    vals, weights = [], []
    for side in (0, 1):
        pts, w, ok = _half_diamond_points(mesh, side)
        v = _evaluate(field, pts, ncomp, name)
        if ncomp == 1:
            v = v[..., None]
        vals.append(v)
        weights.append(w)
    out = np.empty((mesh.n_faces, ncomp))
    for comp in range(ncomp):
        halves = [_average(v[..., comp], w) for v, w in zip(vals, weights)]
        hv = mesh.half_volume
        mixed = (hv[:, 0] * halves[0] + hv[:, 1] * halves[1]) / mesh.dual_volume
        inner = mesh.interior
        same = inner & np.all(vals[0][..., comp] == vals[0][:, :1, comp], axis=1) & np.all(
            vals[1][..., comp] == vals[0][:, :1, comp], axis=1
        )
        col = np.where(inner, mixed, halves[0])
        out[:, comp] = np.where(same, vals[0][:, 0, comp], col)
    return out


def initialize(mesh: StaggeredMesh, rho0, e0, u0=0.0, gas: GasConfig | None = None) -> State:
    """Average initial data onto cells (rho, e) and diamond cells (u).

    Each descriptor is a number or a callable mapping points of shape
    (n, dim) to values (n,), or to (n, dim) for the velocity.  The normal
    velocity on boundary faces is set to zero.
    """
    gas = gas or GasConfig()
    rho = cell_average(mesh, rho0, "rho0")
    e = cell_average(mesh, e0, "e0")
    if np.any(rho <= 0.0):
        raise ConfigError("initial density must be positive", key="rho0")
    if np.any(e <= 0.0):
        raise ConfigError("initial internal energy must be positive", key="e0")
    u = dual_average(mesh, u0, mesh.dim, "u0")
    bnd = mesh.boundary
    u[bnd, mesh.face_axis[bnd]] = 0.0
    return apply_eos(State(rho=rho, e=e, p=np.zeros_like(rho), u=u), gas)


def enforce_wall(mesh: StaggeredMesh, u: np.ndarray) -> np.ndarray:
    bnd = mesh.boundary
    u[bnd, mesh.face_axis[bnd]] = 0.0
    return u


# --------------------------------------------------------------------------
# CSV field dump


def _fmt(v):
    return repr(float(v))


def write_fields_csv(path, mesh: StaggeredMesh, state: State):
    """One row per cell then one row per face; ``kind`` tells them apart."""
    coords = ["x", "y"][: mesh.dim]
    ucols = [f"u{i + 1}" for i in range(mesh.dim)]
    header = ["kind", *coords, "rho", "e", "p", *ucols]
    lines = [f"# t={_fmt(state.t)} step={state.step_index}", ",".join(header)]
    blank_u = [""] * mesh.dim
    for k in range(mesh.n_cells):
        xs = [_fmt(c) for c in mesh.cell_centroid[k]]
        lines.append(",".join(["cell", *xs, _fmt(state.rho[k]), _fmt(state.e[k]), _fmt(state.p[k]), *blank_u]))
    for s in range(mesh.n_faces):
        xs = [_fmt(c) for c in mesh.face_centroid[s]]
        lines.append(",".join(["face", *xs, "", "", "", *[_fmt(v) for v in state.u[s]]]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_fields_csv(path):
    """Parse a field dump back into (t, step, cells, faces) dict-of-arrays."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().lstrip("# ").split()
        meta = dict(item.split("=") for item in first)
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    cells = [r for r in rows if r[0] == "cell"]
    faces = [r for r in rows if r[0] == "face"]

    def table(rs):
        out = {}
        for j, name in enumerate(header[1:], start=1):
            col = [r[j] for r in rs]
            if all(c != "" for c in col):
                out[name] = np.array([float(c) for c in col])
        return out

    return float(meta["t"]), int(meta["step"]), table(cells), table(faces)
