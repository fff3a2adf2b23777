import numpy as np
import pytest
from conftest import random_state

from stagfv import StepConfig, build_mesh, kernels, run
from stagfv import _kernels_py as ref
from stagfv.config import from_mapping
from stagfv.scheme import CorrectiveSource, step

cy = pytest.importorskip("stagfv._kernels_cy")


@pytest.fixture
def backend():
    yield
    kernels.use_backend("auto")


def _inputs(mesh, rng):
    c = kernels.as_c
    F = c(rng.normal(size=(mesh.n_cells, mesh.zeta)))
    fdual = c(rng.normal(size=(mesh.n_cells, mesh.n_dual)))
    ueps = c(rng.normal(size=(mesh.n_cells, mesh.n_dual, mesh.dim)))
    u = c(rng.normal(size=(mesh.n_faces, mesh.dim)))
    face_vals = c(rng.normal(size=mesh.n_faces))
    return F, fdual, ueps, u, face_vals


@pytest.mark.parametrize("dim, n", [(1, 1), (1, 37), (2, (1, 1)), (2, (7, 5))])
def test_backends_bit_identical(dim, n, rng):
    m = build_mesh(dim, [0, 1] * dim, n)
    F, fdual, ueps, u, fv = _inputs(m, rng)
    np.testing.assert_array_equal(cy.cell_sum(m.cell_faces, m.cell_sign, fv), ref.cell_sum(m.cell_faces, m.cell_sign, fv))
    np.testing.assert_array_equal(cy.dual_fluxes(m.xi, F), ref.dual_fluxes(m.xi, F))
    np.testing.assert_array_equal(
        cy.dual_upwind(m.cell_faces, m.dual_pairs, fdual, u), ref.dual_upwind(m.cell_faces, m.dual_pairs, fdual, u)
    )
    a = cy.dual_assembly(m.cell_faces, m.dual_pairs, fdual, ueps, u, m.n_faces)
    b = ref.dual_assembly(m.cell_faces, m.dual_pairs, fdual, ueps, u, m.n_faces)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_dual_assembly_against_loops(rng):
    m = build_mesh(2, (0, 1, 0, 1), (3, 2))
    _, fdual, ueps, u, _ = _inputs(m, rng)
    mass = np.zeros(m.n_faces)
    lin = np.zeros((m.n_faces, 2))
    for k in range(m.n_cells):
        for j, (a, b) in enumerate(m.dual_pairs):
            sa, sb = m.cell_faces[k, a], m.cell_faces[k, b]
            mass[sa] += fdual[k, j]
            mass[sb] -= fdual[k, j]
            lin[sa] += fdual[k, j] * (ueps[k, j] - u[sa])
            lin[sb] -= fdual[k, j] * (ueps[k, j] - u[sb])
    for mod in (ref, cy):
        out = mod.dual_assembly(m.cell_faces, m.dual_pairs, fdual, ueps, u, m.n_faces)
        np.testing.assert_allclose(out[0], mass, atol=1e-14)
        np.testing.assert_allclose(out[2], lin, atol=1e-14)


def test_use_backend(backend):
    assert set(kernels.available()) == {"python", "cython"}
    assert kernels.use_backend("python") == "python" and kernels.dual_fluxes is ref.dual_fluxes
    assert kernels.use_backend("auto") == "cython"
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


@pytest.mark.parametrize("dim", [1, 2])
def test_runs_identical_across_backends(dim, backend):
    raw = {"dim": str(dim), "counts": "40" if dim == 1 else "8", "preset": "sod" if dim == 1 else "smooth", "t_end": "0.05"}
    cfg = from_mapping(raw)
    mesh = cfg.build_mesh()
    out = []
    for name in ("python", "cython"):
        kernels.use_backend(name)
        res = run(mesh, cfg.initial_state(mesh), cfg.step_config())
        out.append(res.final_state)
    for field in ("rho", "e", "p", "u"):
        np.testing.assert_array_equal(getattr(out[0], field), getattr(out[1], field))


def test_random_state_step_identical(rng, backend):
    m = build_mesh(2, (0, 1, 0, 1), (5, 5))
    s = random_state(m, rng)
    src = CorrectiveSource.zero(m)
    outs = []
    for name in ("python", "cython"):
        kernels.use_backend(name)
        outs.append(step(m, s, src, StepConfig(), dt=1e-3))
    np.testing.assert_array_equal(outs[0][0].u, outs[1][0].u)
    np.testing.assert_array_equal(outs[0][1].S, outs[1][1].S)
