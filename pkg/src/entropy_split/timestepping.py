"""Explicit time integration: classical RK4 and its relaxation variant.

The relaxation variant scales the RK4 update by a factor ``gamma`` chosen
so that the discrete entropy change over a step equals the change implied
by the stage entropy rates.  For an entropy-conservative semi-discretization
this conserves the entropy functional to round-off; with dissipation the
entropy decreases monotonically.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from . import gas as gm
from .gas import GasModel
from .mesh import ElementOperators

__all__ = [
    "EntropyFunctional",
    "RelaxationError",
    "compute_dt",
    "rk4_step",
    "rrk4_step",
    "relaxation_gamma",
    "StepRecord",
    "integrate",
]

_RK4_A = (0.0, 0.5, 0.5, 1.0)
_RK4_B = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)


class RelaxationError(RuntimeError):
    """The relaxation root could not be bracketed."""


class EntropyLike(Protocol):
    def total(self, u: np.ndarray) -> float: ...

    def rate(self, u: np.ndarray, r: np.ndarray) -> float: ...


@dataclass
class EntropyFunctional:
    """Global entropy ``1^T H S(u)`` and its rate ``w^T H r`` on a mesh."""

    ops: ElementOperators
    gas: GasModel

    def total(self, u: np.ndarray) -> float:
        return float(np.sum(self.ops.H * gm.entropy(u, self.gas)))

    def rate(self, u: np.ndarray, r: np.ndarray) -> float:
        w = gm.entropy_variables(u, self.gas)
        return float(np.sum(self.ops.H[:, :, None] * w * r))


def compute_dt(u: np.ndarray, ops: ElementOperators, gas: GasModel, cfl: float) -> float:
    """CFL time step ``min_k cfl h_min,k / max_nodes(|V| + a)``.

    Examples
    --------
    A uniform state with sound speed one, ``h_min = 0.005`` and
    ``cfl = 0.3`` gives ``dt = 0.0015``.
    """
    rho, V, p = gm.primitive(u, gas)
    speed = np.sqrt(np.sum(V * V, axis=-1)) + np.sqrt(gas.gamma * p / rho)
    return float(np.min(cfl * ops.h_min / np.max(speed, axis=1)))


def _stages(u: np.ndarray, t: float, dt: float, residual_fn: Callable):
    stages, rates = [], []
    for a in _RK4_A:
        y = u if a == 0.0 else u + (a * dt) * rates[-1]
        stages.append(y)
        rates.append(residual_fn(y, t + a * dt))
    return stages, rates


def rk4_step(u: np.ndarray, t: float, dt: float, residual_fn: Callable) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of ``du/dt = residual_fn(u, t)``."""
    _, rates = _stages(u, t, dt, residual_fn)
    return u + dt * sum(b * r for b, r in zip(_RK4_B, rates))


def relaxation_gamma(
    u: np.ndarray,
    direction: np.ndarray,
    dt: float,
    target_rate: float,
    entropy: EntropyLike,
    tol: float = 1e-14,
    max_iter: int = 60,
) -> float:
    """Root of ``S(u + g dt d) - S(u) - g dt e`` near ``g = 1`` by bisection.

    The bracket starts at ``[0.5, 1.5]`` and is widened by doubling its
    half-width at most three times.
    """
    s0 = entropy.total(u)

    def res(g: float) -> float:
        return entropy.total(u + (g * dt) * direction) - s0 - g * dt * target_rate

    lo, hi = 0.5, 1.5
    f_lo, f_hi = res(lo), res(hi)
    widen = 0
    while f_lo * f_hi > 0.0:
        if widen == 3:
            raise RelaxationError(f"no sign change of the entropy residual in [{lo}, {hi}]")
        half = hi - 1.0
        lo, hi = max(1.0 - 2.0 * half, 1e-3), 1.0 + 2.0 * half
        f_lo, f_hi = res(lo), res(hi)
        widen += 1
    if f_lo == 0.0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = res(mid)
        if f_mid == 0.0 or hi - lo < tol:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rrk4_step(
    u: np.ndarray,
    t: float,
    dt: float,
    residual_fn: Callable,
    entropy: EntropyLike,
    mode: str = "conservative",
) -> tuple[np.ndarray, float, float]:
    """One relaxation RK4 step.

    Parameters
    ----------
    mode : {"conservative", "dissipative"}
        Both solve the same scalar equation; the mode only documents the
        expected sign of the entropy change.

    Returns
    -------
    u_new : ndarray
    gamma : float
        Relaxation factor; the physical time advances by ``gamma dt``.
    entropy_change : float
        ``gamma dt sum_i b_i w_i^T H r_i``.
    """
    if mode not in ("conservative", "dissipative"):
        raise ValueError("mode must be 'conservative' or 'dissipative'")
    stages, rates = _stages(u, t, dt, residual_fn)
    direction = sum(b * r for b, r in zip(_RK4_B, rates))
    e = sum(b * entropy.rate(y, r) for b, y, r in zip(_RK4_B, stages, rates))
    g = relaxation_gamma(u, direction, dt, e, entropy)
    return u + (g * dt) * direction, g, g * dt * e


@dataclass
class StepRecord:
    """Per-step information passed to callbacks."""

    step: int
    t: float
    dt: float
    gamma: float = 1.0
    entropy_change: float = 0.0


def integrate(
    u: np.ndarray,
    t0: float,
    t_final: float,
    residual_fn: Callable,
    dt_fn: Callable | None = None,
    method: str = "rk4",
    entropy: EntropyLike | None = None,
    mode: str = "conservative",
    n_steps: int | None = None,
    before_step: Callable | None = None,
    after_step: Callable | None = None,
    max_steps: int = 10_000_000,
) -> tuple[np.ndarray, float, int]:
    """March ``du/dt = residual_fn(u, t)`` from ``t0`` to ``t_final``.

    Either ``dt_fn(u, t)`` supplies the step, clamped so the last step
    lands on ``t_final``, or ``n_steps`` equal steps are taken.  With the
    relaxation method time advances by ``gamma dt``; the final step is
    clamped and then lands exactly on ``t_final``.

    Returns
    -------
    u, t, steps
    """
    if method not in ("rk4", "rrk4"):
        raise ValueError(f"unknown time integrator {method!r}")
    if method == "rrk4" and entropy is None:
        raise ValueError("relaxation needs an entropy functional")
    if dt_fn is None and n_steps is None:
        raise ValueError("give dt_fn or n_steps")
    t = t0
    step = 0
    fixed = None if n_steps is None else (t_final - t0) / n_steps
    while step < max_steps:
        remaining = t_final - t
        if remaining <= 1e-14 * max(1.0, abs(t_final)):
            break
        if fixed is not None and step >= n_steps:
            break
        if before_step is not None:
            before_step(u, t, step)
        dt = fixed if fixed is not None else dt_fn(u, t)
        last = dt >= remaining or (fixed is not None and step == n_steps - 1)
        if last:
            dt = remaining
        if method == "rk4":
            u = rk4_step(u, t, dt, residual_fn)
            rec = StepRecord(step, t + dt, dt)
            t = t_final if last else t + dt
        else:
            u, g, de = rrk4_step(u, t, dt, residual_fn, entropy, mode)
            t = t_final if last else t + g * dt
            rec = StepRecord(step, t, dt, g, de)
        step += 1
        if after_step is not None:
            after_step(u, t, rec)
    return u, t, step
