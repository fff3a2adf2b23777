"""Compare the compiled and NumPy assembly kernels.

    python3 benchmarks/bench_kernels.py [--sizes 200,2000 --repeat 20]

Times each kernel on a 1D and a 2D mesh, checks both backends return the
same bits, and times a full Sod step loop per backend.
"""
import argparse
import time

import numpy as np

from stagfv import GasConfig, StepConfig, build_mesh, initialize, kernels, run
from stagfv.fluxes import InterpolantChoice, compute_fluxes


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _same(a, b):
    a, b = (a if isinstance(a, tuple) else (a,)), (b if isinstance(b, tuple) else (b,))
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def _state(mesh, rng):
    n = mesh.n_cells
    rho = 1.0 + rng.random(n)
    e = 1.0 + rng.random(n)
    u = rng.standard_normal((mesh.n_faces, mesh.dim))
    return initialize(mesh, 1.0, 1.0).replace(rho=rho, e=e, p=0.4 * rho * e, u=u)


def bench_mesh(mesh, repeat, rng):
    state = _state(mesh, rng)
    fl = compute_fluxes(mesh, state, InterpolantChoice())
    cf, sg = mesh.cell_faces, mesh.cell_sign
    args = {
        "cell_sum": (cf, sg, kernels.as_c(fl.face_flux)),
        "dual_fluxes": (mesh.xi, kernels.as_c(fl.F_primal)),
        "dual_upwind": (cf, mesh.dual_pairs, kernels.as_c(fl.F_dual), kernels.as_c(state.u)),
        "dual_assembly": (cf, mesh.dual_pairs, kernels.as_c(fl.F_dual), kernels.as_c(fl.u_dualface),
                          kernels.as_c(state.u), mesh.n_faces),
    }
    rows = []
    for name, a in args.items():
        times, outs = {}, {}
        for be in kernels.available():
            kernels.use_backend(be)
            fn = getattr(kernels, name)
            outs[be] = fn(*a)
            times[be] = _time(lambda: fn(*a), repeat)
        same = all(_same(outs["python"], o) for o in outs.values())
        rows.append((name, times, same))
    kernels.use_backend("auto")
    return rows


def bench_run(n, backend):
    kernels.use_backend(backend)
    mesh = build_mesh(1, [(0.0, 1.0)], [n])
    rho0 = lambda x: np.where(x[:, 0] < 0.5, 1.0, 0.125)
    e0 = lambda x: np.where(x[:, 0] < 0.5, 1.0, 0.1) / (0.4 * rho0(x))
    s0 = initialize(mesh, rho0, e0, 0.0, GasConfig())
    t0 = time.perf_counter()
    res = run(mesh, s0, StepConfig(cfl=0.4, t_end=0.2))
    dt = time.perf_counter() - t0
    kernels.use_backend("auto")
    return dt, res.steps, res.final_state


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="2000,100000", help="1D cell counts")
    ap.add_argument("--grid", default="64,256", help="2D cells per axis")
    ap.add_argument("--repeat", type=int, default=10)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"backends: {', '.join(kernels.available())}")
    meshes = [build_mesh(1, [(0.0, 1.0)], [int(n)]) for n in args.sizes.split(",")]
    meshes += [build_mesh(2, [(0.0, 1.0), (0.0, 1.0)], [int(n), int(n)]) for n in args.grid.split(",")]
    print(f"{'mesh':>14s} {'kernel':>14s} " + " ".join(f"{b:>11s}" for b in kernels.available()) + "  speedup  same-bits")
    for mesh in meshes:
        label = f"{mesh.dim}D/{mesh.n_cells}"
        for name, times, same in bench_mesh(mesh, args.repeat, rng):
            cols = " ".join(f"{times[b] * 1e3:9.3f}ms" for b in kernels.available())
            sp = times["python"] / times.get("cython", times["python"])
            print(f"{label:>14s} {name:>14s} {cols}  {sp:6.2f}x  {same}")
    for n in (400, 1600):
        res = {b: bench_run(n, b) for b in kernels.available()}
        line = ", ".join(f"{b} {t:.3f}s" for b, (t, _, _) in res.items())
        finals = [r[2] for r in res.values()]
        same = all(np.array_equal(finals[0].rho, f.rho) and np.array_equal(finals[0].u, f.u) for f in finals)
        steps = next(iter(res.values()))[1]
        print(f"Sod run {n} cells, {steps} steps: {line}; identical fields: {same}")


if __name__ == "__main__":
    main()
