import math

import numpy as np
import pytest
from conftest import random_state
from hypothesis import given
from hypothesis import strategies as st

from stagfv import CorrectiveSource, GasConfig, InterpolantChoice, State, apply_eos, build_mesh, run
from stagfv.config import from_mapping
from stagfv.diagnostics import (
    AuditReport,
    Auditor,
    TestFunction,
    WeakFormRecorder,
    _check_support,
    discrete_gradient,
    dual_density_of,
    flux_antisymmetry,
    kinetic_content,
    kinetic_identity_residual,
    observed_orders,
    primal_convection_forms,
    read_audit_csv,
    reconstruct_cell_product,
    reconstruct_face_flux,
    total_energy_audit,
    translate_differences,
    upwind_dual_values,
    weak_form_terms,
)
from stagfv.errors import AuditNotReady
from stagfv.mesh import mesh_from_nodes
from stagfv.scheme import advance

GAS = GasConfig(1.4)


def test_cell_product_uniform():
    m = build_mesh(1, (0, 1), 4)
    out = reconstruct_cell_product(m, np.ones(m.n_faces), np.full(m.n_faces, 2.0))
    # boundary diamonds are half as large, so edge cells see 3/4 of the value
    np.testing.assert_allclose(out, [1.5, 2.0, 2.0, 1.5], rtol=1e-15)


def test_cell_product_by_hand():
    m = mesh_from_nodes([0.0, 1.0, 3.0, 4.0])
    rd = np.array([1.0, 2.0, 3.0, 4.0])
    z = np.array([0.5, -1.0, 2.0, 1.0])
    dvol = np.array([0.5, 1.5, 1.5, 0.5])
    vol = np.array([1.0, 2.0, 1.0])
    expected = [0.5 * (dvol[k] * rd[k] * z[k] + dvol[k + 1] * rd[k + 1] * z[k + 1]) / vol[k] for k in range(3)]
    np.testing.assert_allclose(reconstruct_cell_product(m, rd, z), expected, rtol=1e-15)


def test_cell_product_zero(small_mesh):
    m = small_mesh
    assert np.all(reconstruct_cell_product(m, np.ones(m.n_faces), np.zeros(m.n_faces)) == 0.0)


def test_face_flux_zero(small_mesh):
    m = small_mesh
    G = reconstruct_face_flux(m, np.zeros((m.n_cells, m.n_dual)), np.ones((m.n_cells, m.n_dual)))
    assert np.all(G == 0.0)


def test_face_flux_1d_by_hand():
    m = build_mesh(1, (0, 1), 3)
    F = np.array([[0.3], [-1.2], [0.7]])
    z = np.array([[2.0], [0.5], [-1.0]])
    G = reconstruct_face_flux(m, F, z)
    # sigma between K and L: G = (F_K z_K + F_L z_L) / 2 seen from K
    assert G[0, 1] == pytest.approx(0.5 * (0.3 * 2.0 - 1.2 * 0.5))
    assert G[1, 1] == pytest.approx(0.5 * (-1.2 * 0.5 + 0.7 * -1.0))
    assert G[0, 0] == pytest.approx(-0.5 * 0.3 * 2.0)
    assert flux_antisymmetry(m, G) == 0.0


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]))
def test_face_flux_antisymmetric_bitwise(seed, dim):
    rng = np.random.default_rng(seed)
    m = build_mesh(dim, [0, 1] * dim, [4] * dim)
    F = rng.normal(size=(m.n_cells, m.n_dual))
    z = rng.normal(size=(m.n_cells, m.n_dual))
    assert flux_antisymmetry(m, reconstruct_face_flux(m, F, z)) == 0.0


def test_upwind_dual_values():
    m = build_mesh(1, (0, 1), 2)
    z = np.array([1.0, 2.0, 3.0])
    out = upwind_dual_values(m, np.array([[1.0], [-1.0]]), z)
    np.testing.assert_array_equal(out[:, 0], [1.0, 3.0])


def test_forms_vanish_at_rest(small_mesh):
    m = small_mesh
    rd = np.ones(m.n_faces)
    z = np.zeros(m.n_faces)
    F = np.zeros((m.n_cells, m.n_dual))
    chk = primal_convection_forms(m, 0.1, rd, rd, z, z, F, F)
    assert np.all(chk.form_a == 0.0) and np.all(chk.form_b == 0.0)


def test_forms_constant_in_time(small_mesh):
    m = small_mesh
    rd = np.full(m.n_faces, 1.3)
    z = np.full(m.n_faces, -0.4)
    F = np.zeros((m.n_cells, m.n_dual))
    chk = primal_convection_forms(m, 0.1, rd, rd, z, z, F, F)
    np.testing.assert_allclose(chk.form_a, 0.0, atol=1e-15)
    np.testing.assert_allclose(chk.form_b, 0.0, atol=1e-15)


def test_kinetic_content_sums_over_faces(small_mesh, rng):
    m = small_mesh
    s = random_state(m, rng)
    u = np.where(m.boundary[:, None], 0.0, s.u)
    rd = dual_density_of(m, s.rho)
    total = 0.5 * np.sum(m.dual_volume * rd * np.einsum("sd,sd->s", u, u))
    assert kinetic_content(m, s.rho, u).sum() == pytest.approx(total, rel=1e-13)


def test_energy_audit_needs_three_levels():
    m = build_mesh(1, (0, 1), 3)
    s = apply_eos(State(rho=np.ones(3), e=np.ones(3), p=np.ones(3), u=np.zeros((4, 1))), GAS)
    with pytest.raises(AuditNotReady):
        total_energy_audit(m, [s, s], [None])


def test_energy_audit_uniform_state():
    m = build_mesh(2, (0, 1, 0, 1), (4, 4))
    s = apply_eos(State(rho=np.ones(16), e=np.full(16, 2.0), p=np.ones(16), u=np.zeros((m.n_faces, 2))), GAS)
    levels, recs = [s], []
    src = CorrectiveSource.zero(m)
    for _ in range(2):
        new, src, rec = advance(m, levels[-1], src, GAS, InterpolantChoice(), 0.01)
        levels.append(new)
        recs.append(rec)
    chk = total_energy_audit(m, levels, recs)
    assert np.all(chk.residual == 0.0) and chk.G_antisym == 0.0 and chk.boundary_flux == 0.0


def test_kinetic_remainder_two_cells():
    # one interior face carrying v > 0; every other velocity is zero
    m = build_mesh(1, (0, 1), 2)
    v, dt = 0.8, 0.01
    rho = np.array([1.0, 0.5])
    s = apply_eos(State(rho=rho, e=np.array([2.5, 2.0]), p=np.zeros(2), u=np.array([[0.0], [v], [0.0]])), GAS)
    new, src, rec = advance(m, s, CorrectiveSource.zero(m), GAS, InterpolantChoice(), dt)
    rho_f, dvol = rho[0], 0.5
    rd = 0.5 * (rho[0] + rho[1])
    # the two half dual fluxes cancel, so the diamond density is unchanged
    assert rec.rho_dual_new[1] == pytest.approx(rd, rel=1e-15)
    dp = new.p[1] - new.p[0]
    u1 = (rd * v - dt / dvol * (0.5 * rho_f * v * v + dp)) / rd
    assert new.u[1, 0] == pytest.approx(u1, rel=1e-13)
    R = -(0.5 * dvol / dt * rd * (u1 * u1 - v * v) + 0.25 * rho_f * v**3 + dp * u1)
    assert src.R[1, 0] == pytest.approx(R, rel=1e-10)
    # the wall diamond receives upwinded momentum but keeps u = 0
    R_wall = 0.25 * rho_f * v**3
    assert src.R[2, 0] == pytest.approx(R_wall, rel=1e-13) and src.R[0, 0] == 0.0
    np.testing.assert_allclose(src.S, [0.5 * R, 0.5 * (R + R_wall)], rtol=1e-10)
    assert kinetic_identity_residual(m, s, new, rec).max <= 1e-13


def test_translate_constant():
    m = build_mesh(2, (0, 1, 0, 1), (3, 3))
    assert translate_differences(m, [np.ones(9)] * 3, [np.ones(m.n_faces)] * 3, [0.1] * 3) == (0.0, 0.0)


def test_translate_linear():
    n, a, T = 8, 3.0, 0.3
    m = build_mesh(1, (0, 2), n)
    h = 2.0 / n
    rho = a * m.cell_centroid[:, 0]
    z = a * m.face_centroid[:, 0]
    primal, dual = translate_differences(m, [rho] * 3, [z] * 3, [0.1] * 3)
    assert primal == pytest.approx(T * (n - 1) * h * h * a, rel=1e-13)
    assert dual == pytest.approx(T * 2.0 * a * h * 2.0, rel=1e-13)


def test_test_function_shape():
    phi = TestFunction.bump((0.5, 0.5), 0.2, 1.0, scale=2.0)
    assert phi.value(np.array([[0.5, 0.5]]), 0.0)[0] == pytest.approx(2.0)
    assert phi.value(np.array([[0.75, 0.5]]), 0.0)[0] == 0.0
    assert phi.value(np.array([[0.5, 0.5]]), 1.0)[0] == 0.0
    zero = TestFunction.bump(0.5, 0.2, 1.0, scale=0.0)
    assert zero.value(np.array([[0.5]]), 0.3)[0] == 0.0


@given(st.floats(0.35, 0.65), st.floats(0.35, 0.65), st.floats(0.05, 0.9))
def test_test_function_derivatives(x, y, t):
    phi = TestFunction.bump((0.5, 0.5), 0.2, 1.0)
    p = np.array([[x, y]])
    h = 1e-6
    fd = [(phi.value(p + h * e, t) - phi.value(p - h * e, t))[0] / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(phi.gradient(p, t)[0], fd, atol=1e-5)
    dt = (phi.value(p, t + h) - phi.value(p, t - h))[0] / (2 * h)
    assert phi.time_derivative(p, t)[0] == pytest.approx(dt, abs=1e-5)


def test_discrete_gradient_linear():
    m = build_mesh(2, (0, 1, 0, 1), (4, 4))
    g = discrete_gradient(m, 2.0 * m.cell_centroid[:, 0] - m.cell_centroid[:, 1])
    inner = m.interior
    # on diamonds |D| = |sigma| d / dim, so the gradient is dim times the slope
    expected = 2.0 * np.where(m.face_axis[inner] == 0, 2.0, -1.0)
    np.testing.assert_allclose(g[inner, m.face_axis[inner]], expected, rtol=1e-13)
    assert np.all(g[m.boundary] == 0.0)


def test_support_check():
    m = build_mesh(1, (0, 1), 20)
    with pytest.raises(ValueError):
        _check_support(m, TestFunction.bump(0.1, 0.2, 1.0), [0.0])
    with pytest.raises(ValueError):
        _check_support(build_mesh(1, (0, 1), 4), TestFunction.bump(0.5, 0.45, 1.0), [0.0])
    _check_support(m, TestFunction.bump(0.5, 0.3, 1.0), [0.0, 0.5])


def _synthetic_recorder(m, times):
    rec = WeakFormRecorder()
    rec.mesh = m
    rec.times = list(times)
    rec.dts = list(np.diff(times))
    rec.rho = [np.ones(m.n_cells) for _ in times]
    rec.z = [np.full(m.n_faces, t) for t in times]
    rec.F_dual = [np.zeros((m.n_cells, m.n_dual)) for _ in times[1:]]
    rec.z_eps = [np.zeros((m.n_cells, m.n_dual)) for _ in times[1:]]
    return rec


def _limit(x, t):
    return np.ones(len(x)), np.full(len(x), t), np.zeros((len(x), 1))


def test_weak_form_synthetic():
    # rho = 1, z = t, no flux: the time term tends to int int phi
    phi = TestFunction.bump(0.5, 0.3, 1.0)
    errors = []
    for n in (100, 200, 400):
        m = build_mesh(1, (0, 1), n)
        times = np.linspace(0.0, 1.0, 2 * n + 1)
        rec = _synthetic_recorder(m, times)
        probe = weak_form_terms(m, rec, phi, limit=_limit)
        oracle = sum(dt * np.sum(m.cell_volume * phi.value(m.cell_centroid, t)) for t, dt in zip(times, rec.dts))
        assert probe.T_dt == pytest.approx(oracle, rel=1e-12)
        assert probe.T_div == 0.0 and probe.ref_div == 0.0
        errors.append(probe.residual_dt)
    # left-endpoint sampling of phi in time is first order
    np.testing.assert_allclose(observed_orders([1, 0.5, 0.25], errors), 1.0, atol=0.05)


def test_weak_form_without_limit():
    m = build_mesh(1, (0, 1), 50)
    rec = _synthetic_recorder(m, np.linspace(0.0, 1.0, 11))
    probe = weak_form_terms(m, rec, TestFunction.bump(0.5, 0.3, 1.0))
    assert math.isnan(probe.ref_dt) and probe.h == pytest.approx(0.02)


def test_observed_orders():
    np.testing.assert_allclose(observed_orders([0.1, 0.05, 0.025], [4.0, 1.0, 0.25]), [2.0, 2.0])


def test_auditor_on_sod(tmp_path):
    cfg = from_mapping({"preset": "sod", "counts": "100", "t_end": "0.05"})
    m = cfg.build_mesh()
    aud = Auditor()
    res = run(m, cfg.initial_state(m), cfg.step_config(), observer=aud)
    rep = aud.report
    assert res.ok and len(rep.rows) == res.steps
    assert math.isnan(rep.rows[0]["energy_max"]) and not math.isnan(rep.rows[1]["energy_max"])
    assert rep.worst("kinetic_max") <= 1e-12 and rep.worst("energy_max") <= 1e-11
    assert rep.positive and rep.lowest("min_R") >= -1e-14
    path = tmp_path / "audit.csv"
    rep.to_csv(path)
    back = read_audit_csv(path)
    assert [int(r["step"]) for r in back] == list(range(1, res.steps + 1))
    assert float(back[-1]["dual_mass_max"]) == rep.rows[-1]["dual_mass_max"]
    assert "positivity ok" in rep.summary()


def test_empty_report():
    assert AuditReport().summary() == "audit: no steps"
    assert AuditReport().worst("kinetic_max") == 0.0


def test_random_step_identity_2d(rng):
    m = build_mesh(2, (0, 1, 0, 1), (5, 4))
    s = random_state(m, rng)
    new, _, rec = advance(m, s, CorrectiveSource.zero(m), GAS, InterpolantChoice.uniform("centered"), 1e-3)
    assert kinetic_identity_residual(m, s, new, rec).max <= 1e-12
