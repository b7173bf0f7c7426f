"""Benchmark problems: initial data, exact solutions and sources.

Riemann problems (Sod, Shu-Osher) are posed on periodic domains large
enough that the periodic images do not reach the region of interest
before the final time.  Sod uses a mirrored copy on ``[0, 2]``, so the
solution on ``[0, 1]`` is the exact Riemann solution for
``t < 0.285``.  Shu-Osher extends the constant states on both sides
of ``[-5, 5]`` by ten length units.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gas import GasModel, conservative

__all__ = [
    "ProblemSpec",
    "RiemannSolution",
    "riemann_exact",
    "sod",
    "shu_osher",
    "vortex2d",
    "vortex3d",
    "mms_ns",
    "taylor_green",
    "PROBLEMS",
    "get_problem",
    "nearest_elements_map",
    "interval_map",
]


@dataclass
class ProblemSpec:
    """Everything needed to set up and judge a run.

    Attributes
    ----------
    initial : callable
        ``initial(x)`` with ``x`` of shape ``(..., d)`` returning
        conservative states.
    exact : callable or None
        ``exact(x, t)``.
    source : callable or None
        ``source(x, t)`` forcing term added to the residual.
    hybrid : callable or None
        ``hybrid(mesh, t)`` returning a per-element mode map
        (1 for Hadamard, 0 for entropy split).
    discontinuous : bool
        Initial data has jumps aligned with element interfaces; nodes are
        sampled slightly inside their element.
    physical : tuple of (lo, hi) or None
        Sub-domain where the exact solution is meaningful.
    """

    name: str
    d: int
    domain: list
    gas: GasModel
    initial: Callable
    t_final: float
    cfl: float
    warp: str = "none"
    exact: Callable | None = None
    source: Callable | None = None
    hybrid: Callable | None = None
    discontinuous: bool = False
    physical: list | None = None
    cells: tuple | None = None
    p: int = 2
    integrator: str = "rrk4"
    n_steps: int | None = None
    viscous: bool = False
    info: dict = field(default_factory=dict)


@dataclass
class RiemannSolution:
    """Star-region values and wave speeds of a one-dimensional Riemann problem."""

    p_star: float
    u_star: float
    rho_star_left: float
    rho_star_right: float
    left_wave: tuple
    right_wave: tuple
    left: tuple
    right: tuple
    gamma: float

    @property
    def contact_speed(self) -> float:
        return self.u_star

    @property
    def shock_speed(self) -> float:
        """Speed of the right-moving shock (raises if it is a rarefaction)."""
        kind, speeds = self.right_wave
        if kind != "shock":
            raise ValueError("right wave is a rarefaction")
        return speeds[0]

    def sample(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Density, velocity and pressure at similarity coordinates ``xi = (x - x0) / t``."""
        g = self.gamma
        xi = np.asarray(xi, dtype=float)
        rho = np.empty_like(xi)
        u = np.empty_like(xi)
        p = np.empty_like(xi)
        left = xi <= self.u_star
        for side, mask, state, rho_s, (kind, speeds) in (
            (-1, left, self.left, self.rho_star_left, self.left_wave),
            (1, ~left, self.right, self.rho_star_right, self.right_wave),
        ):
            r0, u0, p0 = state
            a0 = np.sqrt(g * p0 / r0)
            x = xi[mask]
            rr = np.full(x.shape, rho_s)
            uu = np.full(x.shape, self.u_star)
            pp = np.full(x.shape, self.p_star)
            if kind == "shock":
                outside = side * x > side * speeds[0]
                rr[outside], uu[outside], pp[outside] = r0, u0, p0
            else:
                head, tail = speeds
                outside = side * x > side * head
                rr[outside], uu[outside], pp[outside] = r0, u0, p0
                fan = (side * x <= side * head) & (side * x > side * tail)
                xf = x[fan]
                uf = 2.0 / (g + 1.0) * (-side * a0 + 0.5 * (g - 1.0) * u0 + xf)
                cf = 2.0 / (g + 1.0) * (a0 - side * 0.5 * (g - 1.0) * (u0 - xf))
                rr[fan] = r0 * (cf / a0) ** (2.0 / (g - 1.0))
                uu[fan] = uf
                pp[fan] = p0 * (cf / a0) ** (2.0 * g / (g - 1.0))
            rho[mask], u[mask], p[mask] = rr, uu, pp
        return rho, u, p


def _pressure_function(p, rho0, p0, a0, g):
    if p > p0:
        A = 2.0 / ((g + 1.0) * rho0)
        Bc = (g - 1.0) / (g + 1.0) * p0
        sq = np.sqrt(A / (p + Bc))
        return (p - p0) * sq, sq * (1.0 - 0.5 * (p - p0) / (Bc + p))
    ratio = p / p0
    f = 2.0 * a0 / (g - 1.0) * (ratio ** ((g - 1.0) / (2.0 * g)) - 1.0)
    df = 1.0 / (rho0 * a0) * ratio ** (-(g + 1.0) / (2.0 * g))
    return f, df


def riemann_exact(left, right, gamma: float = 1.4, tol: float = 1e-12, max_iter: int = 100) -> RiemannSolution:
    """Exact solution of the 1D Euler Riemann problem.

    Newton iteration on the star pressure from the primitive-variable
    guess, stopped when the relative pressure change falls below ``tol``.

    Parameters
    ----------
    left, right : tuple
        ``(rho, u, p)`` on each side.
    """
    g = gamma
    rl, ul, pl = map(float, left)
    rr, ur, pr = map(float, right)
    al, ar = np.sqrt(g * pl / rl), np.sqrt(g * pr / rr)
    if 2.0 * (al + ar) / (g - 1.0) <= ur - ul:
        raise ValueError("initial data generate vacuum")
    p = max(tol, 0.5 * (pl + pr) - 0.125 * (ur - ul) * (rl + rr) * (al + ar))
    for _ in range(max_iter):
        fl, dl = _pressure_function(p, rl, pl, al, g)
        fr, dr = _pressure_function(p, rr, pr, ar, g)
        p_new = p - (fl + fr + ur - ul) / (dl + dr)
        if p_new <= 0.0:
            p_new = 0.5 * p
        change = abs(p_new - p) / (0.5 * (p_new + p))
        p = p_new
        if change < tol:
            break
    else:
        raise RuntimeError("Riemann solver did not converge")
    fl, _ = _pressure_function(p, rl, pl, al, g)
    fr, _ = _pressure_function(p, rr, pr, ar, g)
    u = 0.5 * (ul + ur) + 0.5 * (fr - fl)
    gm1 = (g - 1.0) / (g + 1.0)

    def star_side(r0, u0, p0, a0, side):
        if p > p0:
            rho_s = r0 * (p / p0 + gm1) / (gm1 * p / p0 + 1.0)
            speed = u0 + side * a0 * np.sqrt((g + 1.0) / (2.0 * g) * p / p0 + (g - 1.0) / (2.0 * g))
            return rho_s, ("shock", (speed,))
        rho_s = r0 * (p / p0) ** (1.0 / g)
        a_s = a0 * (p / p0) ** ((g - 1.0) / (2.0 * g))
        return rho_s, ("rarefaction", (u0 + side * a0, u + side * a_s))

    rho_l, wl = star_side(rl, ul, pl, al, -1)
    rho_r, wr = star_side(rr, ur, pr, ar, 1)
    return RiemannSolution(p, u, rho_l, rho_r, wl, wr, (rl, ul, pl), (rr, ur, pr), g)


def nearest_elements_map(centroids: np.ndarray, positions, n_near: int = 3) -> np.ndarray:
    """Mode map marking the ``n_near`` elements closest to each position."""
    modes = np.zeros(centroids.shape[0], dtype=np.int8)
    for x in positions:
        dist = np.abs(centroids[:, 0] - x)
        modes[np.argsort(dist, kind="stable")[:n_near]] = 1
    return modes


def interval_map(centroids: np.ndarray, intervals) -> np.ndarray:
    """Mode map marking elements whose centroid ``x_1`` lies in any interval."""
    x = centroids[:, 0]
    modes = np.zeros(x.size, dtype=np.int8)
    for a, b in intervals:
        modes[(x >= a) & (x <= b)] = 1
    return modes


# ----------------------------------------------------------------------- Sod

SOD_LEFT = (1.0, 0.0, 1.0)
SOD_RIGHT = (0.125, 0.0, 0.1)


def sod(gas: GasModel | None = None) -> ProblemSpec:
    """Sod shock tube, mirrored onto the periodic domain ``[0, 2]``."""
    gas = gas or GasModel()
    sol = riemann_exact(SOD_LEFT, SOD_RIGHT, gas.gamma)
    x0 = 0.5

    def initial(x):
        x1 = x[..., 0]
        left = (x1 <= x0) | (x1 > 2.0 - x0)
        rho = np.where(left, SOD_LEFT[0], SOD_RIGHT[0])
        p = np.where(left, SOD_LEFT[2], SOD_RIGHT[2])
        return conservative(rho, np.zeros(x1.shape + (1,)), p, gas)

    def exact(x, t):
        x1 = x[..., 0]
        mirror = x1 > 1.0
        xs = np.where(mirror, 2.0 - x1, x1)
        if t <= 0.0:
            return initial(x)
        rho, u, p = sol.sample((xs - x0) / t)
        u = np.where(mirror, -u, u)
        return conservative(rho, u[..., None], p, gas)

    def hybrid(mesh, t):
        xc = x0 + sol.contact_speed * t
        xs = x0 + sol.shock_speed * t
        return nearest_elements_map(mesh.centroids(), [xc, xs, 2.0 - xc, 2.0 - xs], 3)

    return ProblemSpec(
        "sod", 1, [(0.0, 2.0)], gas, initial, 0.2, 0.3, exact=exact, hybrid=hybrid, discontinuous=True,
        physical=[(0.0, 1.0)], cells=(400,), p=2,
        info={"riemann": sol, "shock_position": x0 + sol.shock_speed * 0.2},
    )


# ----------------------------------------------------------------- Shu-Osher

SHU_LEFT = (3.857143, 2.629369, 10.33333)


def shu_osher(gas: GasModel | None = None) -> ProblemSpec:
    """Shock-entropy wave interaction on ``[-5, 5]`` embedded in ``[-15, 15]``."""
    gas = gas or GasModel()
    xd = -4.0

    def initial(x):
        x1 = x[..., 0]
        left = x1 <= xd
        rho = np.where(left, SHU_LEFT[0], 1.0 + 0.2 * np.sin(5.0 * x1))
        u = np.where(left, SHU_LEFT[1], 0.0)
        p = np.where(left, SHU_LEFT[2], 1.0)
        return conservative(rho, u[..., None], p, gas)

    def hybrid(mesh, t):
        # Hadamard between the leftmost and rightmost shock, which spread
        # from x = -4 to about [-2.8, 2.5] at the final time
        s = min(max(t / 1.8, 0.0), 1.0)
        lo = xd + s * (-2.8 - xd)
        hi = xd + s * (2.5 - xd)
        h = (mesh.hi[0] - mesh.lo[0]) / mesh.cells[0]
        return interval_map(mesh.centroids(), [(lo - h, hi + h)])

    return ProblemSpec(
        "shu_osher", 1, [(-15.0, 15.0)], gas, initial, 1.8, 0.1, hybrid=hybrid, discontinuous=True,
        physical=[(-5.0, 5.0)], cells=(600,), p=2,
    )


# ------------------------------------------------------------------ vortices

def _wrap(dx, length):
    return dx - length * np.round(dx / length)


def vortex2d(gas: GasModel | None = None, strength: float = 3.0, center=(5.0, 0.0)) -> ProblemSpec:
    """Isentropic vortex advected with unit speed along ``x_1``."""
    gas = gas or GasModel()
    g = gas.gamma
    a = strength

    def exact(x, t):
        dx = _wrap(x[..., 0] - center[0] - t, 20.0)
        dy = _wrap(x[..., 1] - center[1], 10.0)
        e = np.exp(1.0 - dx * dx - dy * dy)
        rho = (1.0 - a * a * (g - 1.0) / (16.0 * g * np.pi**2) * e * e) ** (1.0 / (g - 1.0))
        V = np.stack([1.0 - a / (2.0 * np.pi) * dy * e, a / (2.0 * np.pi) * dx * e], axis=-1)
        return conservative(rho, V, rho**g, gas)

    return ProblemSpec(
        "vortex2d", 2, [(0.0, 20.0), (-5.0, 5.0)], gas, lambda x: exact(x, 0.0), 2.0, 0.1,
        warp="vortex2d", exact=exact, cells=(20, 20), p=2,
    )


def vortex3d(gas: GasModel | None = None) -> ProblemSpec:
    """Isentropic vortex in 3D advected with unit speed along ``x_2``."""
    gas = gas or GasModel()
    g = gas.gamma

    def exact(x, t):
        x1 = x[..., 0]
        y = _wrap(x[..., 1] - t, 20.0)
        arg = 1.0 - y * y - x1 * x1
        rho = (1.0 - 2.0 / 25.0 * (g - 1.0) * np.exp(arg)) ** (1.0 / (g - 1.0))
        half = np.exp(0.5 * arg)
        V = np.stack([-0.4 * y * half, 1.0 + 0.4 * x1 * half, np.zeros_like(x1)], axis=-1)
        return conservative(rho, V, rho**g / g, gas)

    return ProblemSpec(
        "vortex3d", 3, [(-10.0, 10.0)] * 3, gas, lambda x: exact(x, 0.0), 1.0, 0.25,
        warp="vortex3d", exact=exact, cells=(4, 4, 4), p=4,
    )


# ----------------------------------------------------------------------- MMS

def mms_ns(d: int = 2, gas: GasModel | None = None) -> ProblemSpec:
    """Manufactured Navier-Stokes solution with a travelling density wave."""
    gas = gas or GasModel(mu=0.01, R=1.0, Pr=0.71)
    g, R = gas.gamma, gas.R

    def fields(x, t):
        phi = np.pi * (np.sum(x, axis=-1) - 0.6 * t)
        rho = 2.0 + 0.1 * np.sin(phi)
        return phi, rho

    def exact(x, t):
        _, rho = fields(x, t)
        V = np.ones(rho.shape + (d,))
        p = (g - 1.0) * (rho * rho - 0.5 * d * rho)
        return conservative(rho, V, p, gas)

    def source(x, t):
        phi, rho = fields(x, t)
        drho = 0.1 * np.pi * np.cos(phi)
        rho_t = -0.6 * drho
        dp = (g - 1.0) * (2.0 * rho - 0.5 * d) * drho
        mass = rho_t + d * drho
        mom = mass + dp
        energy = 2.0 * rho * rho_t + d * (2.0 * rho * drho + dp)
        if gas.include_heat_flux:
            energy = energy + gas.kappa * d * (g - 1.0) / R * 0.1 * np.pi**2 * np.sin(phi)
        out = np.empty(rho.shape + (d + 2,))
        out[..., 0] = mass
        out[..., 1:-1] = mom[..., None]
        out[..., -1] = energy
        return out

    return ProblemSpec(
        "mms", d, [(-1.0, 1.0)] * d, gas, lambda x: exact(x, 0.0), 0.001, 0.1, warp="mms", exact=exact,
        source=source, cells=(8,) * d, p=2, integrator="rk4", n_steps=1000, viscous=True,
    )


# ---------------------------------------------------------------- Taylor-Green

def taylor_green(Re: float = 100.0, mach: float = 0.1, Pr: float = 0.71) -> ProblemSpec:
    """Taylor-Green vortex on the periodic cube ``[-pi, pi]^3``."""
    gamma, R = 1.4, 1.0
    gas = GasModel(gamma=gamma, R=R, mu=1.0 / Re, Pr=Pr)
    rho0 = 1.0
    p0 = 1.0 / (gamma * mach**2)
    T0 = p0 / (R * rho0)

    def initial(x):
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        V = np.stack(
            [np.sin(X) * np.cos(Y) * np.cos(Z), -np.cos(X) * np.sin(Y) * np.cos(Z), np.zeros_like(X)], axis=-1
        )
        p = p0 + (np.cos(2 * X) + np.cos(2 * Y)) * (np.cos(2 * Z) + 2.0) / 16.0
        return conservative(p / (R * T0), V, p, gas)

    return ProblemSpec(
        "taylor_green", 3, [(-np.pi, np.pi)] * 3, gas, initial, 10.0, 0.5, cells=(5, 5, 5), p=2,
        integrator="rk4", viscous=True, info={"rho0": rho0, "volume": (2 * np.pi) ** 3, "uniform_steps": True},
    )


PROBLEMS = {
    "sod": sod,
    "shu_osher": shu_osher,
    "vortex2d": vortex2d,
    "vortex3d": vortex3d,
    "mms": mms_ns,
    "taylor_green": taylor_green,
}


def get_problem(name: str, **kwargs) -> ProblemSpec:
    if name not in PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}")
    return PROBLEMS[name](**kwargs)
