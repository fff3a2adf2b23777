"""Exact Riemann solver for the 1D ideal-gas Euler equations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import VacuumError

TOL = 1e-12


@dataclass(frozen=True)
class Primitive:
    rho: float
    u: float
    p: float

    def __post_init__(self):
        if not (self.rho > 0.0 and self.p > 0.0):
            raise ValueError(f"density and pressure must be positive, got rho={self.rho}, p={self.p}")


@dataclass(frozen=True)
class RiemannProblem:
    left: Primitive
    right: Primitive
    gamma: float = 1.4
    x0: float = 0.5

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")

    @classmethod
    def sod(cls, gamma=1.4, x0=0.5):
        return cls(Primitive(1.0, 0.0, 1.0), Primitive(0.125, 0.0, 0.1), gamma, x0)

    def mirrored(self):
        """Swap sides and negate velocities."""
        lf, rt = self.left, self.right
        return RiemannProblem(Primitive(rt.rho, -rt.u, rt.p), Primitive(lf.rho, -lf.u, lf.p), self.gamma, -self.x0)


@dataclass(frozen=True)
class StarState:
    p: float
    u: float
    rho_left: float
    rho_right: float
    left_wave: str
    right_wave: str
    residual: float


def _sound(s: Primitive, g):
    return math.sqrt(g * s.p / s.rho)


def wave_function(p, s: Primitive, g):
    """Velocity jump ``f_K(p)`` across the wave bounding side ``s`` and its derivative."""
    if p > s.p:
        a = 2.0 / ((g + 1.0) * s.rho)
        b = (g - 1.0) / (g + 1.0) * s.p
        q = math.sqrt(a / (p + b))
        return (p - s.p) * q, q * (1.0 - 0.5 * (p - s.p) / (p + b))
    c = _sound(s, g)
    r = (p / s.p) ** ((g - 1.0) / (2.0 * g))
    return 2.0 * c / (g - 1.0) * (r - 1.0), (p / s.p) ** (-(g + 1.0) / (2.0 * g)) / (s.rho * c)


def pressure_function(p, prob: RiemannProblem):
    fl, dl = wave_function(p, prob.left, prob.gamma)
    fr, dr = wave_function(p, prob.right, prob.gamma)
    return fl + fr + (prob.right.u - prob.left.u), dl + dr


def solve_star_state(prob: RiemannProblem, tol=TOL, max_iter=200) -> StarState:
    """Star-region pressure and velocity by safeguarded Newton iteration.

    Starts from the two-rarefaction estimate and falls back to bisection
    whenever a Newton step leaves the current bracket.
    """
    L, R, g = prob.left, prob.right, prob.gamma
    cl, cr = _sound(L, g), _sound(R, g)
    if 2.0 * (cl + cr) / (g - 1.0) <= R.u - L.u:
        raise VacuumError("initial data generate vacuum (pressure positivity condition fails)")
    z = (g - 1.0) / (2.0 * g)
    p_tr = ((cl + cr - 0.5 * (g - 1.0) * (R.u - L.u)) / (cl / L.p**z + cr / R.p**z)) ** (1.0 / z)

    lo, hi = 0.0, max(L.p, R.p, p_tr)
    while pressure_function(hi, prob)[0] < 0.0:
        hi *= 2.0
    p = min(max(p_tr, 1e-14 * hi), hi)
    for _ in range(max_iter):
        f, df = pressure_function(p, prob)
        if abs(f) <= tol or hi - lo <= 4e-16 * hi:
            break
        if f > 0.0:
            hi = p
        else:
            lo = p
        p_new = p - f / df if df > 0.0 else -1.0
        p = p_new if lo < p_new < hi else 0.5 * (lo + hi)
    f, _ = pressure_function(p, prob)
    fl, _ = wave_function(p, L, g)
    fr, _ = wave_function(p, R, g)
    u = 0.5 * (L.u + R.u) + 0.5 * (fr - fl)
    gm = (g - 1.0) / (g + 1.0)
    return StarState(
        p=p,
        u=u,
        rho_left=_star_density(p, L, gm, g),
        rho_right=_star_density(p, R, gm, g),
        left_wave=_label(p, L.p),
        right_wave=_label(p, R.p),
        residual=abs(f),
    )


def _label(p, ps):
    if math.isclose(p, ps, rel_tol=1e-13):
        return "none"
    return "shock" if p > ps else "rarefaction"


def _star_density(p, s, gm, g):
    r = p / s.p
    if p > s.p:
        return s.rho * (r + gm) / (gm * r + 1.0)
    return s.rho * r ** (1.0 / g)


def wave_speeds(prob: RiemannProblem, star: StarState | None = None):
    """Head/tail (rarefaction) or shock speeds on each side, as dicts."""
    star = star or solve_star_state(prob)
    g = prob.gamma
    out = {}
    for side, s, sgn, rho_star in (("left", prob.left, -1.0, star.rho_left), ("right", prob.right, 1.0, star.rho_right)):
        c = _sound(s, g)
        if star.p > s.p:
            sh = s.u + sgn * c * math.sqrt((g + 1.0) / (2.0 * g) * star.p / s.p + (g - 1.0) / (2.0 * g))
            out[side] = {"shock": sh}
        else:
            c_star = c * (star.p / s.p) ** ((g - 1.0) / (2.0 * g))
            out[side] = {"head": s.u + sgn * c, "tail": star.u + sgn * c_star}
    out["contact"] = star.u
    return out


def sample(prob: RiemannProblem, xi, star: StarState | None = None):
    """Self-similar solution ``(rho, u, p)`` at speeds ``xi = (x - x0) / t``."""
    star = star or solve_star_state(prob)
    g = prob.gamma
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rho, u, p = np.empty_like(xi), np.empty_like(xi), np.empty_like(xi)
    sp = wave_speeds(prob, star)
    for sgn, side, s, rho_star in ((-1.0, "left", prob.left, star.rho_left), (1.0, "right", prob.right, star.rho_right)):
        mask = xi > star.u if sgn > 0 else xi <= star.u
        x = xi[mask]
        c = _sound(s, g)
        r_, u_, p_ = np.full_like(x, rho_star), np.full_like(x, star.u), np.full_like(x, star.p)
        w = sp[side]
        if "shock" in w:
            outside = sgn * x > sgn * w["shock"]
        else:
            outside = sgn * x > sgn * w["head"]
            fan = ~outside & (sgn * x > sgn * w["tail"])
            uf = 2.0 / (g + 1.0) * (-sgn * c + 0.5 * (g - 1.0) * s.u + x[fan])
            cf = sgn * (x[fan] - uf)
            r_[fan] = s.rho * (cf / c) ** (2.0 / (g - 1.0))
            u_[fan] = uf
            p_[fan] = s.p * (cf / c) ** (2.0 * g / (g - 1.0))
        r_[outside], u_[outside], p_[outside] = s.rho, s.u, s.p
        rho[mask], u[mask], p[mask] = r_, u_, p_
    return rho, u, p


def profile(prob: RiemannProblem, x, t, star: StarState | None = None):
    """Exact solution at positions ``x`` and time ``t > 0``."""
    if t <= 0.0:
        x = np.asarray(x, dtype=float)
        left = x < prob.x0
        L, R = prob.left, prob.right
        return (np.where(left, L.rho, R.rho), np.where(left, L.u, R.u), np.where(left, L.p, R.p))
    return sample(prob, (np.asarray(x, dtype=float) - prob.x0) / t, star)


def cell_average_density(prob: RiemannProblem, nodes, t, points=64):
    """Cell averages of the exact density over cells with the given nodes."""
    nodes = np.asarray(nodes, dtype=float)
    xg, wg = np.polynomial.legendre.leggauss(points)
    a, b = nodes[:-1, None], nodes[1:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * xg
    rho, _, _ = profile(prob, x.ravel(), t)
    return (rho.reshape(x.shape) * wg).sum(axis=1) * 0.5


def euler_flux(rho, u, p, gamma):
    E = p / (gamma - 1.0) + 0.5 * rho * u * u
    return np.array([rho * u, rho * u * u + p, u * (E + p)])


def conserved(rho, u, p, gamma):
    return np.array([rho, rho * u, p / (gamma - 1.0) + 0.5 * rho * u * u])


def rankine_hugoniot_residual(prob: RiemannProblem, side="right", star: StarState | None = None):
    """``F(U_b) - F(U_a) - s (U_b - U_a)`` across the shock on ``side`` (zero vector if no shock)."""
    star = star or solve_star_state(prob)
    sp = wave_speeds(prob, star)[side]
    if "shock" not in sp:
        return np.zeros(3)
    s = prob.left if side == "left" else prob.right
    rho_star = star.rho_left if side == "left" else star.rho_right
    g = prob.gamma
    Ua, Ub = conserved(s.rho, s.u, s.p, g), conserved(rho_star, star.u, star.p, g)
    Fa, Fb = euler_flux(s.rho, s.u, s.p, g), euler_flux(rho_star, star.u, star.p, g)
    return Fb - Fa - sp["shock"] * (Ub - Ua)


def shock_side(prob: RiemannProblem, star: StarState | None = None):
    """``'right'`` or ``'left'`` for the side carrying a shock (right preferred), or None."""
    star = star or solve_star_state(prob)
    if star.right_wave == "shock":
        return "right"
    if star.left_wave == "shock":
        return "left"
    return None


def shock_position(prob: RiemannProblem, x, rho, star: StarState | None = None):
    """Measured shock location: where ``rho`` crosses halfway between its two sides.

    The crossing is searched from the undisturbed side inwards, so the
    first hit is the shock rather than the contact.  NaN if the profile
    has no crossing.
    """
    star = star or solve_star_state(prob)
    side = shock_side(prob, star)
    if side is None:
        raise ValueError("the Riemann problem has no shock")
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if side == "left":
        x, rho = -x[::-1], rho[::-1]
        ahead, behind = prob.left.rho, star.rho_left
    else:
        ahead, behind = prob.right.rho, star.rho_right
    mid = 0.5 * (ahead + behind)
    above = (rho - mid) * np.sign(behind - ahead) > 0.0
    for i in range(len(x) - 1, 0, -1):
        if above[i - 1] and not above[i]:
            xs = x[i - 1] + (mid - rho[i - 1]) / (rho[i] - rho[i - 1]) * (x[i] - x[i - 1])
            return -xs if side == "left" else xs
    return math.nan


def exact_shock_position(prob: RiemannProblem, t, star: StarState | None = None):
    star = star or solve_star_state(prob)
    side = shock_side(prob, star)
    return prob.x0 + t * wave_speeds(prob, star)[side]["shock"]
