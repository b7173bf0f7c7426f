"""Error norms, conservation and entropy monitors, and kinetic-energy tools."""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import gas as gm
from .gas import GasModel
from .mesh import ElementOperators
from .operators import lagrange_diff_matrix, lagrange_interp_matrix

__all__ = [
    "conserved_totals",
    "conservation_error",
    "conservation_scale",
    "front_position",
    "entropy_total",
    "entropy_change",
    "l2_error",
    "convergence_rate",
    "convergence_rates",
    "kinetic_energy",
    "fd_derivative_matrix",
    "dissipation_rate",
]


def conserved_totals(u: np.ndarray, ops: ElementOperators) -> np.ndarray:
    """``sum_k 1^T H_k u_k`` for each conserved component."""
    return np.einsum("kn,knc->c", ops.H, u)


def conservation_error(totals_0: np.ndarray, totals_t: np.ndarray, scale: np.ndarray | None = None) -> np.ndarray:
    """Relative drift ``|total(t) - total(0)| / |total(0)|``.

    Components whose initial total vanishes are normalized by ``scale``
    (for example ``sum_k 1^T H_k |u_k|``) instead.
    """
    t0 = np.asarray(totals_0, dtype=float)
    denom = np.abs(t0)
    if scale is not None:
        denom = np.where(denom > 1e-14 * np.asarray(scale), denom, scale)
    return np.abs(np.asarray(totals_t) - t0) / denom


def conservation_scale(u: np.ndarray, ops: ElementOperators) -> np.ndarray:
    """Per-component normalization for drifts of totals that may vanish.

    Mass and energy use ``sum_k 1^T H_k |u_k|``.  Momentum components use
    the larger of that and ``sqrt(M E)`` (total mass times total energy),
    which has momentum units and stays positive for a fluid at rest.
    """
    scale = np.einsum("kn,knc->c", ops.H, np.abs(u))
    mom = np.sqrt(scale[0] * scale[-1])
    scale[1:-1] = np.maximum(scale[1:-1], mom)
    return scale


def entropy_total(u: np.ndarray, ops: ElementOperators, gas: GasModel) -> float:
    """Global entropy ``sum_k 1^T H_k S(u_k)``."""
    return float(np.sum(ops.H * gm.entropy(u, gas)))


def entropy_change(s_t: float, s_0: float) -> float:
    """Normalized change ``(s_t - s_0) / |s_0|``."""
    return (s_t - s_0) / abs(s_0)


def _gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _tensor(m1: np.ndarray, d: int) -> np.ndarray:
    out = np.ones((1, 1))
    for _ in range(d):
        out = np.kron(out, m1)
    return out


def l2_error(
    u: np.ndarray,
    exact_fn: Callable[[np.ndarray, float], np.ndarray],
    ops: ElementOperators,
    t: float,
    components: slice | list | None = None,
) -> float:
    """Discrete L2 error over all conserved components.

    The nodal solution and the element map are interpolated to a tensor
    Gauss rule exact for degree ``3p + 1`` on every element, and the
    exact solution is evaluated at the mapped quadrature points.
    """
    ref = ops.ref
    d, p = ref.d, ref.p
    n_g = (3 * p + 2 + 1) // 2
    xg, wg = _gauss_rule(n_g)
    I1 = lagrange_interp_matrix(ref.x1d, xg)
    D1 = I1 @ lagrange_diff_matrix(ref.x1d)
    I = _tensor(I1, d)
    W = np.prod(wg[np.indices((n_g,) * d).reshape(d, -1)[::-1].T], axis=1)
    x = np.einsum("gn,knd->kgd", I, ops.mesh.x)
    jac = np.empty(x.shape + (d,))
    for a in range(d):
        mats = [D1 if b == a else I1 for b in reversed(range(d))]
        Da = np.ones((1, 1))
        for m in mats:
            Da = np.kron(Da, m)
        jac[..., a] = np.einsum("gn,knd->kgd", Da, ops.mesh.x)
    J = np.linalg.det(jac) if d > 1 else jac[..., 0, 0]
    uh = np.einsum("gn,knc->kgc", I, u)
    err = uh - exact_fn(x, t)
    if components is not None:
        err = err[..., components]
    return float(np.sqrt(np.sum(W[None, :, None] * J[..., None] * err**2)))


def front_position(x: np.ndarray, q: np.ndarray, level: float, window: tuple[float, float]) -> float:
    """Rightmost crossing of ``q = level`` inside ``window`` for 1D data.

    Samples are sorted by coordinate and the crossing is located by
    linear interpolation between the bracketing samples.
    """
    # nodes shared by neighbouring elements are averaged into one sample
    x, inv = np.unique(np.ravel(x), return_inverse=True)
    q = np.bincount(inv, weights=np.ravel(q)) / np.bincount(inv)
    m = (x >= window[0]) & (x <= window[1])
    x, q = x[m], q[m] - level
    idx = np.nonzero(np.sign(q[:-1]) * np.sign(q[1:]) <= 0)[0]
    if idx.size == 0:
        raise ValueError("no crossing of the requested level in the window")
    i = idx[-1]
    if q[i + 1] == q[i]:
        return float(x[i])
    return float(x[i] - q[i] * (x[i + 1] - x[i]) / (q[i + 1] - q[i]))


def convergence_rate(e1: float, e2: float, h1: float, h2: float) -> float:
    """Observed order ``log(e2 / e1) / log(h2 / h1)``."""
    return float(np.log(e2 / e1) / np.log(h2 / h1))


def convergence_rates(errors, sizes) -> list[float]:
    """Rates between consecutive entries of a refinement sequence."""
    return [convergence_rate(errors[i], errors[i + 1], sizes[i], sizes[i + 1]) for i in range(len(errors) - 1)]


def kinetic_energy(u: np.ndarray, ops: ElementOperators, rho_ref: float = 1.0, volume: float | None = None) -> float:
    """Volume-averaged kinetic energy ``1/(rho_0 |Omega|) int rho V.V / 2``."""
    vol = ops.mesh.volume if volume is None else volume
    ke = 0.5 * np.sum(u[..., 1:-1] ** 2, axis=-1) / u[..., 0]
    return float(np.sum(ops.H * ke) / (rho_ref * vol))


def _fd_weights(offsets: np.ndarray) -> np.ndarray:
    # first-derivative weights on integer offsets, exact for degree len-1
    n = offsets.size
    A = np.vander(offsets.astype(float), n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(A, rhs)


def fd_derivative_matrix(n: int, h: float) -> np.ndarray:
    """Fifth-order first-derivative matrix on ``n`` uniform samples.

    Interior rows use the six-neighbour centred stencil (sixth order);
    rows within three samples of either end use six-point one-sided
    stencils (fifth order).
    """
    if n < 7:
        raise ValueError("need at least 7 samples")
    D = np.zeros((n, n))
    centred = _fd_weights(np.arange(-3, 4))
    for i in range(3, n - 3):
        D[i, i - 3 : i + 4] = centred
    for i in range(3):
        offs = np.arange(6) - i
        D[i, :6] = _fd_weights(offs)
        D[n - 1 - i, n - 6 :] = -_fd_weights(offs)[::-1]
    return D / h


def dissipation_rate(kinetic: np.ndarray, dt: float) -> np.ndarray:
    """``-dE_k/dt`` from a uniformly sampled kinetic-energy history."""
    kinetic = np.asarray(kinetic, dtype=float)
    return -fd_derivative_matrix(kinetic.size, dt) @ kinetic
