import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stagfv import State, apply_eos, build_mesh
from stagfv.state import GasConfig

settings.register_profile(
    "stagfv", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("stagfv")

# (criterion, PASS/FAIL, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line, then assert it."""

    def _verdict(n, ok, detail):
        ok = bool(ok)
        ACCEPTANCE_LINES.append((n, ok, detail))
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {n}: {detail}"

    return _verdict


def random_state(mesh, rng, gas=None, rho=(0.5, 2.0), e=(0.5, 3.0), u=1.0):
    """Positive random state with zero normal velocity on the boundary."""
    gas = gas or GasConfig()
    vel = rng.uniform(-u, u, size=(mesh.n_faces, mesh.dim))
    bnd = mesh.boundary
    vel[bnd, mesh.face_axis[bnd]] = 0.0
    st = State(
        rho=rng.uniform(*rho, size=mesh.n_cells),
        e=rng.uniform(*e, size=mesh.n_cells),
        p=np.zeros(mesh.n_cells),
        u=vel,
    )
    return apply_eos(st, gas)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[(1, (0.0, 1.0), 8), (2, (0.0, 1.0, 0.0, 1.0), (4, 4))], ids=["1d", "2d"])
def small_mesh(request):
    dim, ext, counts = request.param
    return build_mesh(dim, ext, counts)
