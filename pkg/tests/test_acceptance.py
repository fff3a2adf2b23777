"""Acceptance criteria 1-11, one PASS/FAIL line each."""
import filecmp
import time
from dataclasses import replace

import numpy as np
import pytest

from stagfv import build_mesh, run
from stagfv.cli import main
from stagfv.config import from_mapping
from stagfv.diagnostics import (
    Auditor,
    dual_density_of,
    flux_antisymmetry,
    observed_orders,
    primal_convection_forms,
    reconstruct_face_flux,
    upwind_dual_values,
)
from stagfv.fluxes import dual_mass_flux, per_cell
from stagfv.mesh import DUAL_PAIRS, solve_xi_coefficients
from stagfv.studies import run_study

SOD = {"preset": "sod", "counts": "200", "cfl": "0.4", "t_end": "0.2"}


def audited(raw, **step):
    cfg = from_mapping(raw)
    mesh = cfg.build_mesh()
    sc = cfg.step_config()
    if step:
        sc = replace(sc, **step)
    aud = Auditor()
    t0 = time.perf_counter()
    res = run(mesh, cfg.initial_state(mesh), sc, observer=aud)
    elapsed = time.perf_counter() - t0
    assert res.ok, res.error
    return aud.report, res, elapsed


@pytest.fixture(scope="module")
def sod_audit():
    return audited(SOD)


@pytest.fixture(scope="module")
def box_audit():
    raw = {"dim": "2", "counts": "32", "preset": "smooth", "t_end": "1.0"}
    return audited(raw, max_steps=50)


def test_criterion_01_conservativity(sod_audit, verdict):
    report, res, elapsed = sod_audit
    emax = report.worst("energy_max")
    drift = report.worst("energy_drift")
    ok = emax <= 1e-11 and drift <= 1e-12 and elapsed < 10.0
    verdict(1, ok, f"Sod 200: local energy {emax:.2e} <= 1e-11, shifted drift {drift:.2e} <= 1e-12, {res.steps} steps in {elapsed:.2f} s")


def test_criterion_02_kinetic_identity(sod_audit, verdict):
    report, _, _ = sod_audit
    kmax = report.worst("kinetic_max")
    verdict(2, kmax <= 1e-12, f"kinetic identity max rel {kmax:.2e} <= 1e-12")


def test_criterion_03_dual_mass(sod_audit, box_audit, verdict):
    d1 = sod_audit[0].worst("dual_mass_max")
    d2 = box_audit[0].worst("dual_mass_max")
    steps2 = len(box_audit[0].rows)
    ok = d1 <= 1e-12 and d2 <= 1e-12 and steps2 == 50
    verdict(3, ok, f"dual mass 1D {d1:.2e}, 2D 32x32 ({steps2} steps) {d2:.2e} <= 1e-12")


def _random_forms(mesh, rng):
    """Admissible random data: positive densities linked by the mass update."""
    nc = mesh.n_cells
    rho_n = rng.uniform(0.5, 2.0, nc)
    face_flux = np.where(mesh.interior, rng.uniform(-1.0, 1.0, mesh.n_faces), 0.0)
    F = per_cell(mesh, face_flux)
    out = np.clip(F, 0.0, None).sum(axis=1)
    dt = 0.5 * float(np.min(mesh.cell_volume * rho_n / np.maximum(out, 1e-300)))
    rho_np1 = rho_n - dt / mesh.cell_volume * F.sum(axis=1)
    F_dual = dual_mass_flux(mesh, F)
    z_n = rng.normal(size=mesh.n_faces)
    z_np1 = rng.normal(size=mesh.n_faces)
    z_eps = upwind_dual_values(mesh, F_dual, z_n)
    chk = primal_convection_forms(
        mesh, dt, dual_density_of(mesh, rho_n), dual_density_of(mesh, rho_np1), z_n, z_np1, F_dual, z_eps
    )
    G = reconstruct_face_flux(mesh, F_dual, z_eps)
    return chk, flux_antisymmetry(mesh, G)


def test_criterion_04_reconstruction_forms(rng, verdict):
    worst = {}
    for name, mesh in (("1Dx8", build_mesh(1, (0, 1), 8)), ("2D 4x4", build_mesh(2, (0, 1, 0, 1), (4, 4)))):
        worst[name] = max(_random_forms(mesh, rng)[0].relative.max() for _ in range(100))
    ok = all(v <= 1e-12 for v in worst.values())
    verdict(4, ok, "forms (a)=(b) over 100 random sets: " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def test_criterion_05_flux_antisymmetry(sod_audit, box_audit, rng, verdict):
    a1 = sod_audit[0].worst("G_antisym_max")
    a2 = box_audit[0].worst("G_antisym_max")
    meshes = (build_mesh(1, (0, 1), 8), build_mesh(2, (0, 1, 0, 1), (4, 4)))
    a3 = max(_random_forms(m, rng)[1] for m in meshes for _ in range(20))
    verdict(5, a1 == 0.0 and a2 == 0.0 and a3 == 0.0, f"max |G_K + G_L| Sod {a1!r}, 2D box {a2!r}, random {a3!r}")


@pytest.mark.parametrize("cfl", [0.1, 0.25, 0.4, 0.5])
def test_criterion_06_positivity(cfl, verdict):
    report, res, _ = audited({**SOD, "cfl": str(cfl)})
    rho, e, R = report.lowest("min_rho"), report.lowest("min_e"), report.lowest("min_R")
    ok = report.positive and rho > 0.0 and e > 0.0 and R >= -1e-14
    verdict(6, ok, f"cfl={cfl}: min rho {rho:.4g}, min e {e:.4g}, min R {R:.2e} >= -1e-14 over {res.steps} steps")


def test_criterion_07_shock_convergence(verdict):
    t0 = time.perf_counter()
    rows = run_study(from_mapping({"preset": "sod", "counts": "100"}), 4)
    elapsed = time.perf_counter() - t0
    l1 = [r.l1 for r in rows]
    dec = all(a > b for a, b in zip(l1, l1[1:]))
    fine = rows[-1]
    rel = fine.shock_rel_error
    ok = dec and rel <= 0.01 and elapsed <= 60.0 and [r.counts[0] for r in rows] == [100, 200, 400, 800]
    verdict(
        7,
        ok,
        "L1 " + " > ".join(f"{v:.4g}" for v in l1)
        + f"; shock at 800 cells {fine.shock:.5f} vs {fine.shock_exact:.5f} (rel {rel:.1e}); {elapsed:.1f} s",
    )


@pytest.fixture(scope="module")
def smooth_study():
    cfg = from_mapping({"preset": "smooth", "counts": "32", "t_end": "0.1"})
    return run_study(cfg, 4)


def test_criterion_08_weak_consistency(smooth_study, verdict):
    rows = smooth_study
    hs = [r.h for r in rows]
    parts = []
    ok = [r.counts[0] for r in rows] == [32, 64, 128, 256]
    for name in ("res_dt", "res_div"):
        err = [getattr(r, name) for r in rows]
        orders = observed_orders(hs, err)
        ok &= all(a > b for a, b in zip(err, err[1:])) and bool(np.all(orders >= 0.8))
        parts.append(f"{name} orders " + ", ".join(f"{o:.2f}" for o in orders))
    verdict(8, ok, "; ".join(parts) + " (>= 0.8, 32..256 cells)")


def test_criterion_09_translate_differences(smooth_study, verdict):
    tp = [r.trans_primal for r in smooth_study]
    td = [r.trans_dual for r in smooth_study]
    ok = all(a > b for a, b in zip(tp, tp[1:])) and all(a > b for a, b in zip(td, td[1:]))
    verdict(
        9,
        ok,
        "primal " + " > ".join(f"{v:.3g}" for v in tp) + "; dual " + " > ".join(f"{v:.3g}" for v in td),
    )


def _half_diamond_residual(xi, pairs, F):
    # independent evaluation: outflow of each half-diamond minus its share
    zeta = F.shape[1]
    Fd = F @ xi.T
    out = F.copy()
    for j, (a, b) in enumerate(pairs):
        out[:, a] += Fd[:, j]
        out[:, b] -= Fd[:, j]
    res = out - F.sum(axis=1, keepdims=True) / zeta
    return np.abs(res) / np.abs(F).max(axis=1, keepdims=True)


def test_criterion_10_xi_admissibility(rng, verdict):
    worst = {}
    for zeta in (2, 4):
        F = rng.normal(size=(1000, zeta)) * rng.uniform(1e-3, 1e3, size=(1000, 1))
        worst[zeta] = float(_half_diamond_residual(solve_xi_coefficients(zeta), DUAL_PAIRS[zeta], F).max())
    verdict(10, all(v <= 1e-13 for v in worst.values()), ", ".join(f"zeta={z}: {v:.2e}" for z, v in worst.items()) + " <= 1e-13")


def test_criterion_11_reproducibility(tmp_path, verdict):
    dirs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        cfg = tmp_path / f"case{i}.cfg"
        cfg.write_text(f"preset = sod\ncounts = 64\nt_end = 0.1\noutput_times = 0.05, 0.1\naudit = true\noutput_dir = {out}\n")
        assert main(["run", "--config", str(cfg)]) == 0
        dirs.append(out)
    names = sorted(p.name for p in dirs[0].glob("*.csv"))
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    ok = len(names) == 3 and match == names and not mismatch and not errors
    verdict(11, ok, f"{len(match)}/{len(names)} CSVs bit-identical across two runs ({', '.join(names)})")
