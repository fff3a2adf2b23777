"""Refinement studies: Riemann presets against the exact solver, smooth presets
through the weak-form probes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .diagnostics import WeakFormRecorder, observed_orders, weak_form_terms
from .errors import ConfigError
from .riemann import cell_average_density, exact_shock_position, shock_position, shock_side, solve_star_state
from .scheme import run


@dataclass(frozen=True)
class StudyLevel:
    counts: tuple
    h: float
    steps: int
    l1: float = math.nan
    shock: float = math.nan
    shock_exact: float = math.nan
    speed: float = math.nan
    speed_exact: float = math.nan
    res_dt: float = math.nan
    res_div: float = math.nan
    trans_primal: float = math.nan
    trans_dual: float = math.nan

    @property
    def shock_rel_error(self):
        return abs(self.shock - self.shock_exact) / abs(self.shock_exact)


def spacing(cfg: RunConfig):
    return min((b - a) / n for (a, b), n in zip(cfg.extents, cfg.counts))


def level_configs(cfg: RunConfig, levels: int):
    if levels < 3:
        raise ConfigError(f"a study needs at least 3 levels, got {levels}", key="levels")
    return [cfg.refined(2**i) for i in range(levels)]


def riemann_level(cfg: RunConfig) -> StudyLevel:
    """One Riemann-preset run compared with the exact solution at ``t_end``."""
    prob = cfg.riemann_problem()
    star = solve_star_state(prob)
    mesh = cfg.build_mesh()
    res = run(mesh, cfg.initial_state(mesh), cfg.step_config())
    if res.error is not None:
        raise res.error
    rho = res.final_state.rho
    xn = mesh.nodes[0]
    nx = len(xn) - 1
    exact = cell_average_density(prob, xn, cfg.t_end)[np.arange(mesh.n_cells) % nx]
    l1 = float(np.sum(mesh.cell_volume * np.abs(rho - exact)))
    kw = dict(counts=cfg.counts, h=spacing(cfg), steps=res.steps, l1=l1)
    if shock_side(prob, star) is not None and cfg.t_end > 0.0:
        row = rho[:nx]
        xs = shock_position(prob, mesh.cell_centroid[:nx, 0], row, star)
        xe = exact_shock_position(prob, cfg.t_end, star)
        kw.update(
            shock=xs,
            shock_exact=xe,
            speed=(xs - prob.x0) / cfg.t_end,
            speed_exact=(xe - prob.x0) / cfg.t_end,
        )
    return StudyLevel(**kw)


def smooth_level(cfg: RunConfig) -> StudyLevel:
    """One smooth-preset run with ``dt = dt_factor * h``, probed in weak form."""
    mesh = cfg.build_mesh()
    h = spacing(cfg)
    rec = WeakFormRecorder(component=0)
    res = run(mesh, cfg.initial_state(mesh), cfg.step_config(dt=cfg.dt_factor * h, dt_mode="fixed"), observer=rec)
    if res.error is not None:
        raise res.error
    probe = weak_form_terms(mesh, rec, cfg.test_function(), cfg.smooth_limit)
    tp, td = rec.translate_differences()
    return StudyLevel(
        counts=cfg.counts,
        h=h,
        steps=res.steps,
        res_dt=probe.residual_dt,
        res_div=probe.residual_div,
        trans_primal=tp,
        trans_dual=td,
    )


def run_study(cfg: RunConfig, levels: int):
    cfgs = level_configs(cfg, levels)
    if cfg.is_riemann:
        return [riemann_level(c) for c in cfgs]
    if cfg.preset == "smooth":
        return [smooth_level(c) for c in cfgs]
    raise ConfigError("a study needs a Riemann-type or smooth preset", key="preset")


STUDY_COLUMNS = {
    "riemann": ("l1", "shock", "speed"),
    "smooth": ("res_dt", "res_div", "trans_primal", "trans_dual"),
}


def rates_table(rows, kind):
    """Text table of each error column and its observed order per level pair."""
    hs = [r.h for r in rows]
    cols = STUDY_COLUMNS[kind]
    errs = {}
    for c in cols:
        vals = [getattr(r, c) for r in rows]
        if c in ("shock", "speed"):
            exact = [getattr(r, f"{c}_exact") for r in rows]
            vals = [abs(v - e) for v, e in zip(vals, exact)]
            c = f"{c}_err"
        errs[c] = vals
    head = ["cells", "h"] + [f"{c:>12s} {'rate':>6s}" for c in errs]
    lines = [" ".join(f"{h:>10s}" if i < 2 else h for i, h in enumerate(head))]
    orders = {c: observed_orders(hs, v) for c, v in errs.items()}
    for i, r in enumerate(rows):
        cells = "x".join(str(c) for c in r.counts)
        parts = [f"{cells:>10s}", f"{r.h:>10.4g}"]
        for c, v in errs.items():
            rate = "" if i == 0 else f"{orders[c][i - 1]:6.2f}"
            parts.append(f"{v[i]:12.4e} {rate:>6s}")
        lines.append(" ".join(parts))
    return "\n".join(lines)


def study_kind(cfg: RunConfig):
    return "riemann" if cfg.is_riemann else "smooth"
