"""Flat ``key = value`` run configuration and initial-condition presets.

Lines are ``key = value``; ``#`` starts a comment; arrays are
comma-separated.  Everything is validated before a mesh is built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fluxes import SCHEMES, InterpolantChoice
from .mesh import build_mesh
from .riemann import Primitive, RiemannProblem
from .scheme import StepConfig
from .state import GasConfig, initialize

PRESETS = ("uniform", "sod", "piecewise", "smooth")
RIEMANN_PRESETS = ("sod", "piecewise")

_DEFAULTS = {
    "dim": "1",
    "extents": None,
    "counts": "100",
    "gamma": "1.4",
    "preset": "sod",
    "cfl": "0.4",
    "t_end": "0.2",
    "output_times": None,
    "output_dir": "output",
    "audit": "false",
    "levels": "3",
    "interpolant": "upwind",
    "interpolant_density": None,
    "interpolant_energy": None,
    "interpolant_velocity": None,
    "dt_mode": "uniform",
    "dt": None,
    "dt_factor": "0.1",
    "max_steps": "1000000",
    # preset parameters
    "left": "1.0, 0.0, 1.0",
    "right": "0.125, 0.0, 0.1",
    "x0": "0.5",
    "rho": "1.0",
    "p": "1.0",
    "u": None,
    "amplitude": "0.5",
    "width": "0.25",
    "center": "0.5",
    "velocity": "1.0",
    "phi_center": "0.55",
    "phi_halfwidth": "0.3",
}


def parse_text(text: str) -> dict:
    """Raw ``{key: value}`` strings; duplicate or malformed lines are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key", key=key)
        out[key] = value
    return out


def _floats(raw, key, n=None):
    try:
        vals = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {raw!r}", key=key) from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} values, got {len(vals)}", key=key)
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError("values must be finite", key=key)
    return vals


def _float(raw, key):
    return _floats(raw, key, 1)[0]


def _int(raw, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", key=key) from None


def _bool(raw, key):
    v = raw.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}", key=key)


@dataclass(frozen=True)
class RunConfig:
    dim: int = 1
    extents: tuple = ((0.0, 1.0),)
    counts: tuple = (100,)
    gamma: float = 1.4
    preset: str = "sod"
    params: dict = field(default_factory=dict)
    interpolants: InterpolantChoice = field(default_factory=InterpolantChoice)
    cfl: float = 0.4
    t_end: float = 0.2
    output_times: tuple = ()
    output_dir: str = "output"
    audit: bool = False
    levels: int = 3
    dt_mode: str = "uniform"
    dt: float | None = None
    dt_factor: float = 0.1
    max_steps: int = 1_000_000

    @property
    def gas(self):
        return GasConfig(self.gamma)

    def step_config(self, dt=None, dt_mode=None):
        return StepConfig(
            cfl=self.cfl,
            interpolants=self.interpolants,
            t_end=self.t_end,
            max_steps=self.max_steps,
            gas=self.gas,
            dt_mode=dt_mode or self.dt_mode,
            dt=self.dt if dt is None else dt,
        )

    def refined(self, factor):
        return replace(self, counts=tuple(c * factor for c in self.counts))

    def build_mesh(self):
        return build_mesh(self.dim, self.extents, self.counts)

    @property
    def is_riemann(self):
        return self.preset in RIEMANN_PRESETS

    def riemann_problem(self):
        if not self.is_riemann:
            raise ConfigError("not a Riemann-type preset", key="preset")
        lf, rt = self.params["left"], self.params["right"]
        return RiemannProblem(Primitive(*lf), Primitive(*rt), self.gamma, self.params["x0"])

    def initial_data(self):
        """``(rho0, e0, u0)`` descriptors for :func:`initialize`."""
        g, P = self.gamma, self.params
        dim = self.dim
        if self.preset == "uniform":
            u = np.zeros(dim) if P["u"] is None else np.asarray(P["u"])
            return P["rho"], P["p"] / ((g - 1.0) * P["rho"]), u
        if self.is_riemann:
            lf, rt, x0 = P["left"], P["right"], P["x0"]

            def pick(i):
                return lambda x: np.where(x[:, 0] < x0, lf[i], rt[i])

            def vel(x):
                out = np.zeros((len(x), dim))
                out[:, 0] = np.where(x[:, 0] < x0, lf[1], rt[1])
                return out

            return pick(0), (lambda x: pick(2)(x) / ((g - 1.0) * pick(0)(x))), vel
        rho = self.smooth_density
        return rho, (lambda x: P["p"] / ((g - 1.0) * rho(x))), self._smooth_velocity

    def smooth_density(self, x, t=0.0):
        """Advected bump ``1 + A b(|x - c - a t e_1| / w)`` (the exact solution while walls are far)."""
        P = self.params
        shift = np.array(P["center"], dtype=float).copy()
        shift[0] += P["velocity"] * t
        r = np.linalg.norm(np.atleast_2d(x) - shift, axis=1) / P["width"]
        b = np.zeros_like(r)
        m = r < 1.0
        b[m] = np.exp(1.0 - 1.0 / (1.0 - r[m] ** 2))
        return P["rho"] * (1.0 + P["amplitude"] * b)

    def _smooth_velocity(self, x):
        out = np.zeros((len(x), self.dim))
        out[:, 0] = self.params["velocity"]
        return out

    def smooth_limit(self, x, t):
        """Limit fields ``(rho, z = u_1, u)`` of the smooth preset."""
        a = self.params["velocity"]
        return self.smooth_density(x, t), np.full(len(x), a), self._smooth_velocity(x)

    def test_function(self):
        from .diagnostics import TestFunction

        P = self.params
        hw = P["phi_halfwidth"]
        return TestFunction.bump(P["phi_center"], [hw] * self.dim, self.t_end)

    def initial_state(self, mesh):
        rho0, e0, u0 = self.initial_data()
        return initialize(mesh, rho0, e0, u0, self.gas)


def from_mapping(raw: dict) -> RunConfig:
    """Validate raw strings into a :class:`RunConfig`; errors name the key."""
    unknown = sorted(set(raw) - set(_DEFAULTS))
    if unknown:
        raise ConfigError("unknown key", key=unknown[0])
    v = {k: raw.get(k, d) for k, d in _DEFAULTS.items()}

    dim = _int(v["dim"], "dim")
    if dim not in (1, 2):
        raise ConfigError(f"must be 1 or 2, got {dim}", key="dim")
    ext = _floats(v["extents"], "extents", 2 * dim) if v["extents"] else [0.0, 1.0] * dim
    extents = tuple((ext[2 * i], ext[2 * i + 1]) for i in range(dim))
    for i, (a, b) in enumerate(extents):
        if not b > a:
            raise ConfigError(f"axis {i} interval [{a}, {b}] is degenerate", key="extents")
    cnt = [_int(c.strip(), "counts") for c in v["counts"].split(",") if c.strip()]
    if len(cnt) == 1:
        cnt = cnt * dim
    if len(cnt) != dim:
        raise ConfigError(f"expected {dim} values", key="counts")
    if any(c < 1 for c in cnt):
        raise ConfigError("cell counts must be >= 1", key="counts")

    gamma = _float(v["gamma"], "gamma")
    if not gamma > 1.0:
        raise ConfigError(f"must be > 1, got {gamma}", key="gamma")
    preset = v["preset"]
    if preset not in PRESETS:
        raise ConfigError(f"must be one of {PRESETS}, got {preset!r}", key="preset")
    cfl = _float(v["cfl"], "cfl")
    if not 0.0 < cfl <= 1.0:
        raise ConfigError(f"must lie in (0, 1], got {cfl}", key="cfl")
    t_end = _float(v["t_end"], "t_end")
    if t_end < 0.0:
        raise ConfigError("must be >= 0", key="t_end")
    outs = tuple(_floats(v["output_times"], "output_times")) if v["output_times"] else (t_end,)
    if any(t < 0.0 or t > t_end * (1.0 + 1e-12) for t in outs):
        raise ConfigError("output times must lie in [0, t_end]", key="output_times")

    base = v["interpolant"]
    picks = {}
    for name in ("density", "energy", "velocity"):
        key = f"interpolant_{name}"
        picks[name] = v[key] or base
        if picks[name] not in SCHEMES:
            raise ConfigError(f"must be one of {SCHEMES}, got {picks[name]!r}", key=key if v[key] else "interpolant")

    dt_mode = v["dt_mode"]
    if dt_mode not in ("uniform", "adaptive", "fixed"):
        raise ConfigError(f"must be uniform, adaptive or fixed, got {dt_mode!r}", key="dt_mode")
    dt = _float(v["dt"], "dt") if v["dt"] else None
    if dt_mode == "fixed" and not (dt and dt > 0.0):
        raise ConfigError("dt_mode = fixed needs a positive dt", key="dt")
    levels = _int(v["levels"], "levels")
    dt_factor = _float(v["dt_factor"], "dt_factor")
    if not dt_factor > 0.0:
        raise ConfigError("must be > 0", key="dt_factor")
    max_steps = _int(v["max_steps"], "max_steps")
    if max_steps < 1:
        raise ConfigError("must be >= 1", key="max_steps")

    params = {
        "left": tuple(_floats(v["left"], "left", 3)),
        "right": tuple(_floats(v["right"], "right", 3)),
        "x0": _float(v["x0"], "x0"),
        "rho": _float(v["rho"], "rho"),
        "p": _float(v["p"], "p"),
        "u": tuple(_floats(v["u"], "u", dim)) if v["u"] else None,
        "amplitude": _float(v["amplitude"], "amplitude"),
        "width": _float(v["width"], "width"),
        "center": tuple(_floats(v["center"], "center", None)),
        "velocity": _float(v["velocity"], "velocity"),
        "phi_center": tuple(_floats(v["phi_center"], "phi_center", None)),
        "phi_halfwidth": _float(v["phi_halfwidth"], "phi_halfwidth"),
    }
    for key in ("center", "phi_center"):
        vals = params[key]
        if len(vals) == 1:
            params[key] = vals * dim
        elif len(vals) != dim:
            raise ConfigError(f"expected 1 or {dim} values", key=key)
    if preset == "sod":
        if "left" in raw or "right" in raw:
            raise ConfigError("the sod preset has fixed states; use preset = piecewise", key="left" if "left" in raw else "right")
        params["left"], params["right"] = (1.0, 0.0, 1.0), (0.125, 0.0, 0.1)
    if preset in RIEMANN_PRESETS:
        for side in ("left", "right"):
            rho, _, p = params[side]
            if not (rho > 0.0 and p > 0.0):
                raise ConfigError("density and pressure must be positive", key=side)
        _check_aligned(params["x0"], extents[0], cnt[0])
    else:
        if not (params["rho"] > 0.0 and params["p"] > 0.0):
            raise ConfigError("rho and p must be positive", key="rho" if params["rho"] <= 0.0 else "p")
        if preset == "smooth":
            if not params["width"] > 0.0:
                raise ConfigError("must be > 0", key="width")
            if params["amplitude"] <= -1.0:
                raise ConfigError("must be > -1 so the density stays positive", key="amplitude")

    return RunConfig(
        dim=dim,
        extents=extents,
        counts=tuple(cnt),
        gamma=gamma,
        preset=preset,
        params=params,
        interpolants=InterpolantChoice(**picks),
        cfl=cfl,
        t_end=t_end,
        output_times=outs,
        output_dir=v["output_dir"],
        audit=_bool(v["audit"], "audit"),
        levels=levels,
        dt_mode=dt_mode,
        dt=dt,
        dt_factor=dt_factor,
        max_steps=max_steps,
    )


def _check_aligned(x0, extent, n):
    a, b = extent
    if not a < x0 < b:
        raise ConfigError(f"discontinuity {x0} must lie inside ({a}, {b})", key="x0")
    k = (x0 - a) / (b - a) * n
    if abs(k - round(k)) > 1e-9 * max(1.0, n):
        raise ConfigError(f"discontinuity {x0} is not on a face of the {n}-cell mesh", key="x0")


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", key=str(path)) from None
    return from_mapping(parse_text(text))
