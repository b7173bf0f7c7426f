"""Calorically perfect gas: entropy functions, fluxes and diffusivity.

All functions act on arrays whose last axis holds the conservative state
``u = (rho, rho V_1, ..., rho V_d, e)`` so they vectorize over any number
of nodes.  Normal directions are given either as an integer axis or as an
array of vectors with the same leading shape as the states.

Two entropy families are supported:

``harten``
    ``S = beta rho (p rho^-gamma)^(1/(alpha+gamma))`` with
    ``alpha = -gamma - beta (gamma - 1)``.  This family underlies the
    entropy-split scheme and the Sjogreen-Yee two-point flux.
``generalized``
    ``S = -rho s / (gamma - 1)`` with ``s = ln(p rho^-gamma)``, used with
    the Ismail-Roe flux.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GasModel",
    "AdmissibilityError",
    "primitive",
    "conservative",
    "check_admissible",
    "entropy",
    "entropy_variables",
    "conservative_from_entropy",
    "potentials",
    "euler_flux",
    "dudw_apply",
    "dudw_matrix",
    "flux_jacobian_apply",
    "a_tilde_matrices",
    "exp_average",
    "log_mean",
    "sjogreen_yee_flux",
    "ismail_roe_flux",
    "viscous_flux",
    "diffusivity_tensor",
    "temperature_gradient_wrt_w",
    "k_sqrt",
    "dissipation_factors",
    "dissipation_apply",
    "sound_speed",
]


class AdmissibilityError(ArithmeticError):
    """Raised when a state has non-positive density or pressure."""

    def __init__(self, message: str, index=None, time: float | None = None):
        super().__init__(message)
        self.index = index
        self.time = time


@dataclass(frozen=True)
class GasModel:
    """Gas constants and entropy choice.

    Parameters
    ----------
    gamma : float
        Ratio of specific heats.
    R : float
        Gas constant.
    beta : float
        Free parameter of the Harten entropy family.  It must place
        ``alpha`` on an admissible branch (``alpha > 0`` or
        ``alpha < -gamma``).
    mu : float
        Dynamic viscosity; zero gives the Euler equations.
    Pr : float
        Prandtl number.
    include_heat_flux : bool
        Whether the viscous flux carries the Fourier heat flux.
    entropy_family : {"harten", "generalized"}
    """

    gamma: float = 1.4
    R: float = 1.0
    beta: float = 2.5
    mu: float = 0.0
    Pr: float = 0.71
    include_heat_flux: bool = True
    entropy_family: str = "harten"

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if self.entropy_family not in ("harten", "generalized"):
            raise ValueError(f"unknown entropy family {self.entropy_family!r}")
        a = self.alpha
        if self.entropy_family == "harten" and not (a > 0 or a < -self.gamma):
            raise ValueError(f"beta={self.beta} gives alpha={a}, which is not an admissible branch")
        if self.mu < 0 or self.Pr <= 0:
            raise ValueError("viscosity must be non-negative and Pr positive")

    @property
    def alpha(self) -> float:
        return -self.gamma - self.beta * (self.gamma - 1.0)

    @property
    def kappa(self) -> float:
        """Thermal conductivity ``gamma R mu / ((gamma - 1) Pr)``."""
        return self.gamma * self.R * self.mu / ((self.gamma - 1.0) * self.Pr)


def _dim(u: np.ndarray) -> int:
    return u.shape[-1] - 2


def _normal(n, d: int, shape) -> np.ndarray:
    if np.isscalar(n) or (isinstance(n, np.ndarray) and n.ndim == 0):
        out = np.zeros(tuple(shape) + (d,))
        out[..., int(n)] = 1.0
        return out
    return np.asarray(n, dtype=float)


def primitive(u: np.ndarray, gas: GasModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Density, velocity ``(..., d)`` and pressure."""
    rho = u[..., 0]
    V = u[..., 1:-1] / rho[..., None]
    p = (gas.gamma - 1.0) * (u[..., -1] - 0.5 * rho * np.sum(V * V, axis=-1))
    return rho, V, p


def conservative(rho, V, p, gas: GasModel) -> np.ndarray:
    """Conservative state from density, velocity and pressure."""
    rho = np.asarray(rho, dtype=float)
    V = np.asarray(V, dtype=float)
    p = np.asarray(p, dtype=float)
    e = p / (gas.gamma - 1.0) + 0.5 * rho * np.sum(V * V, axis=-1)
    return np.concatenate([rho[..., None], rho[..., None] * V, e[..., None]], axis=-1)


def check_admissible(u: np.ndarray, gas: GasModel, time: float | None = None) -> None:
    """Raise :class:`AdmissibilityError` at the first non-physical node."""
    rho, _, p = primitive(u, gas)
    bad = ~((rho > 0) & (p > 0) & np.isfinite(rho) & np.isfinite(p))
    if np.any(bad):
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        where = f" at t={time:.6g}" if time is not None else ""
        raise AdmissibilityError(
            f"non-admissible state (rho={rho[idx]:.4g}, p={p[idx]:.4g}) at index {idx}{where}", idx, time
        )


def sound_speed(u: np.ndarray, gas: GasModel) -> np.ndarray:
    rho, _, p = primitive(u, gas)
    return np.sqrt(gas.gamma * p / rho)


def _harten_c(rho, p, gas: GasModel):
    # c = (rho/p) (p rho^-gamma)^(1/(alpha+gamma)), the negated last entropy variable
    a = gas.alpha + gas.gamma
    return np.exp(np.log(rho) - np.log(p) + (np.log(p) - gas.gamma * np.log(rho)) / a)


def entropy(u: np.ndarray, gas: GasModel) -> np.ndarray:
    """Pointwise mathematical entropy of the chosen family."""
    rho, _, p = primitive(u, gas)
    if gas.entropy_family == "harten":
        a = gas.alpha + gas.gamma
        return gas.beta * rho * np.exp((np.log(p) - gas.gamma * np.log(rho)) / a)
    s = np.log(p) - gas.gamma * np.log(rho)
    return -rho * s / (gas.gamma - 1.0)


def entropy_variables(u: np.ndarray, gas: GasModel) -> np.ndarray:
    """Entropy variables ``w = dS/du``.

    Examples
    --------
    >>> entropy_variables(np.array([1.0, 0.0, 2.5]), GasModel())
    array([ 6.,  0., -1.])
    """
    rho, V, p = primitive(u, gas)
    g = gas.gamma
    vv = np.sum(V * V, axis=-1)
    if gas.entropy_family == "harten":
        c = _harten_c(rho, p, gas)
        w1 = c * (-gas.alpha / (g - 1.0) * p / rho - 0.5 * vv)
        return np.concatenate([w1[..., None], c[..., None] * V, -c[..., None]], axis=-1)
    b = rho / p
    s = np.log(p) - g * np.log(rho)
    w1 = (g - s) / (g - 1.0) - 0.5 * b * vv
    return np.concatenate([w1[..., None], b[..., None] * V, -b[..., None]], axis=-1)


def _state_from_w(w: np.ndarray, gas: GasModel):
    g = gas.gamma
    if gas.entropy_family == "harten":
        c = -w[..., -1]
        V = w[..., 1:-1] / c[..., None]
        theta = -(g - 1.0) / gas.alpha * (w[..., 0] / c + 0.5 * np.sum(V * V, axis=-1))
        a = gas.alpha + g
        rho = np.exp((a * np.log(c) + (a - 1.0) * np.log(theta)) / (1.0 - g))
        return rho, V, rho * theta
    b = -w[..., -1]
    V = w[..., 1:-1] / b[..., None]
    s = g - (g - 1.0) * (w[..., 0] + 0.5 * b * np.sum(V * V, axis=-1))
    rho = np.exp((s + np.log(b)) / (1.0 - g))
    return rho, V, rho / b


def conservative_from_entropy(w: np.ndarray, gas: GasModel) -> np.ndarray:
    """Inverse of :func:`entropy_variables`."""
    rho, V, p = _state_from_w(w, gas)
    return conservative(rho, V, p, gas)


def potentials(u: np.ndarray, gas: GasModel):
    """Entropy potential, potential flux, entropy flux and entropy.

    Returns
    -------
    phi : ndarray
        ``w^T u - S``.
    psi : ndarray, shape (..., d)
        ``w^T f_i - G_i``.
    G : ndarray, shape (..., d)
        Entropy flux ``V_i S``.
    S : ndarray
    """
    rho, V, p = primitive(u, gas)
    S = entropy(u, gas)
    G = V * S[..., None]
    if gas.entropy_family == "harten":
        phi = S / gas.beta
        psi = G / gas.beta
    else:
        phi = rho
        psi = rho[..., None] * V
    return phi, psi, G, S


def euler_flux(u: np.ndarray, n, gas: GasModel) -> np.ndarray:
    """Inviscid flux in direction ``n`` (axis index or vector)."""
    rho, V, p = primitive(u, gas)
    nv = _normal(n, _dim(u), rho.shape)
    vn = np.sum(V * nv, axis=-1)
    mass = rho * vn
    mom = mass[..., None] * V + p[..., None] * nv
    en = (u[..., -1] + p) * vn
    return np.concatenate([mass[..., None], mom, en[..., None]], axis=-1)


def dudw_apply(u: np.ndarray, dw: np.ndarray, gas: GasModel) -> np.ndarray:
    """Apply ``A0 = du/dw`` at state ``u`` to ``dw``.

    Obtained by differentiating the map from entropy to conservative
    variables.  ``dw`` may carry extra leading axes beyond those of ``u``
    as long as they broadcast.
    """
    g = gas.gamma
    rho, V, p = primitive(u, gas)
    vv = np.sum(V * V, axis=-1)
    d1, dm, dn = dw[..., 0], dw[..., 1:-1], dw[..., -1]
    if gas.entropy_family == "harten":
        w = entropy_variables(u, gas)
        c = -w[..., -1]
        theta = p / rho
        a = gas.alpha + g
        dc = -dn
        dV = (dm - V * dc[..., None]) / c[..., None]
        dtheta = -(g - 1.0) / gas.alpha * (d1 / c - w[..., 0] * dc / c**2 + np.sum(V * dV, axis=-1))
        drho = rho * (a / (1.0 - g) * dc / c + (a - 1.0) / (1.0 - g) * dtheta / theta)
        dp = drho * theta + rho * dtheta
    else:
        b = rho / p
        db = -dn
        dV = (dm - V * db[..., None]) / b[..., None]
        ds = -(g - 1.0) * (d1 + 0.5 * db * vv + b * np.sum(V * dV, axis=-1))
        drho = rho * (ds + db / b) / (1.0 - g)
        dp = drho / b - rho * db / b**2
    dmom = drho[..., None] * V + rho[..., None] * dV
    de = dp / (g - 1.0) + 0.5 * drho * vv + rho * np.sum(V * dV, axis=-1)
    return np.concatenate([drho[..., None], dmom, de[..., None]], axis=-1)


def dudw_matrix(u: np.ndarray, gas: GasModel) -> np.ndarray:
    """Symmetric positive definite ``A0 = du/dw`` with shape ``(..., nc, nc)``."""
    nc = u.shape[-1]
    eye = np.eye(nc)
    cols = dudw_apply(u[..., None, :], eye, gas)
    return np.swapaxes(cols, -1, -2)


def flux_jacobian_apply(u: np.ndarray, du: np.ndarray, n, gas: GasModel) -> np.ndarray:
    """Apply the flux Jacobian ``A_n = d(f . n)/du`` to ``du``."""
    g = gas.gamma
    rho, V, p = primitive(u, gas)
    nv = _normal(n, _dim(u), rho.shape)
    drho, dm, de = du[..., 0], du[..., 1:-1], du[..., -1]
    dV = (dm - V * drho[..., None]) / rho[..., None]
    dp = (g - 1.0) * (de - np.sum(V * dm, axis=-1) + 0.5 * np.sum(V * V, axis=-1) * drho)
    vn = np.sum(V * nv, axis=-1)
    dvn = np.sum(dV * nv, axis=-1)
    dmn = np.sum(dm * nv, axis=-1)
    dmom = dmn[..., None] * V + (rho * vn)[..., None] * dV + dp[..., None] * nv
    den = (de + dp) * vn + (u[..., -1] + p) * dvn
    return np.concatenate([dmn[..., None], dmom, den[..., None]], axis=-1)


def a_tilde_matrices(u: np.ndarray, gas: GasModel) -> tuple[np.ndarray, np.ndarray]:
    """``A0`` and ``A_i A0`` for every direction.

    Returns
    -------
    A0 : ndarray, shape (..., nc, nc)
    At : ndarray, shape (..., d, nc, nc)
    """
    d = _dim(u)
    A0 = dudw_matrix(u, gas)
    cols = np.swapaxes(A0, -1, -2)
    At = np.stack(
        [np.swapaxes(flux_jacobian_apply(u[..., None, :], cols, i, gas), -1, -2) for i in range(d)], axis=-3
    )
    return A0, At


def exp_average(a, b, r: float) -> np.ndarray:
    """Exponential average ``(a^r - b^r) / (r (a - b))``.

    The limit ``a^(r-1)`` is reached through a three-term Taylor series
    about the midpoint when ``|a - b| <= 1e-8 max(a, b)``.  Otherwise the
    quotient is formed with ``expm1``/``log1p`` to avoid cancellation.  The
    result is symmetric in ``(a, b)`` to the last bit.

    Examples
    --------
    >>> float(exp_average(2.0, 1.0, 2.0))
    1.5
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    diff = hi - lo
    near = diff <= 1e-8 * hi
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        m = 0.5 * (hi + lo)
        t = (0.5 * diff / m) ** 2
        taylor = m ** (r - 1.0) * (
            1.0 + (r - 1.0) * (r - 2.0) / 6.0 * t + (r - 1.0) * (r - 2.0) * (r - 3.0) * (r - 4.0) / 120.0 * t * t
        )
        x = diff / lo
        if r == 0.0:
            direct = np.log1p(x) / diff
        else:
            direct = lo**r * np.expm1(r * np.log1p(x)) / (r * diff)
    return np.where(near, taylor, direct)


def log_mean(a, b) -> np.ndarray:
    """Logarithmic mean ``(a - b) / (ln a - ln b)``, symmetric to the bit."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    s = hi + lo
    f = (hi - lo) / s
    u = f * f
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(u < 1e-4, 1.0 + u / 3.0 + u * u / 5.0 + u**3 / 7.0, np.arctanh(f) / f)
    return 0.5 * s / ratio


class SYNodeData:
    """Per-node quantities reused by every two-point evaluation."""

    __slots__ = ("c", "V", "p", "cV", "c_pow", "p_pow", "vv")

    def __init__(self, u: np.ndarray, gas: GasModel):
        rho, V, p = primitive(u, gas)
        g, al = gas.gamma, gas.alpha
        self.c = _harten_c(rho, p, gas)
        self.V = V
        self.p = p
        self.cV = self.c[..., None] * V
        self.c_pow = self.c ** (-g / al)
        self.p_pow = p ** (-(g - 1.0) / al)
        self.vv = np.sum(V * V, axis=-1)

    def map(self, fn):
        """New instance with ``fn`` applied to every stored array."""
        out = object.__new__(SYNodeData)
        for k in self.__slots__:
            setattr(out, k, fn(getattr(self, k)))
        return out


def sy_flux_from_data(L: SYNodeData, R: SYNodeData, nv: np.ndarray, gas: GasModel) -> np.ndarray:
    """Sjogreen-Yee flux contracted with ``nv`` from precomputed node data."""
    g, al = gas.gamma, gas.alpha
    avg_V = 0.5 * (L.V + R.V)
    avg_p = 0.5 * (L.p + R.p)
    mass_dir = 0.5 * (np.sum(L.cV * nv, axis=-1) + np.sum(R.cV * nv, axis=-1))
    denom = 0.5 * (L.c_pow + R.c_pow) * exp_average(L.p, R.p, (1.0 - g) / al)
    F1 = mass_dir / denom
    mom = F1[..., None] * avg_V + avg_p[..., None] * nv
    enth = (
        g / (g - 1.0) * 0.5 * (L.p_pow + R.p_pow) * exp_average(L.c, R.c, -g / al)
        + np.sum(avg_V * avg_V, axis=-1)
        - 0.25 * (L.vv + R.vv)
    )
    return np.concatenate([F1[..., None], mom, (F1 * enth)[..., None]], axis=-1)


def sjogreen_yee_flux(uL: np.ndarray, uR: np.ndarray, n, gas: GasModel) -> np.ndarray:
    """Entropy-conservative two-point flux for the Harten family.

    Symmetric, consistent with the Euler flux, and satisfies
    ``(w_R - w_L)^T F = psi_R - psi_L`` in every direction.
    """
    L, R = SYNodeData(uL, gas), SYNodeData(uR, gas)
    nv = _normal(n, _dim(uL), L.p.shape)
    return sy_flux_from_data(L, R, nv, gas)


class IRNodeData:
    """Per-node parameter vector of the Ismail-Roe flux."""

    __slots__ = ("z1", "zV", "z5")

    def __init__(self, u: np.ndarray, gas: GasModel):
        rho, V, p = primitive(u, gas)
        self.z1 = np.sqrt(rho / p)
        self.zV = self.z1[..., None] * V
        self.z5 = np.sqrt(rho * p)

    def map(self, fn):
        """New instance with ``fn`` applied to every stored array."""
        out = object.__new__(IRNodeData)
        for k in self.__slots__:
            setattr(out, k, fn(getattr(self, k)))
        return out


def ir_flux_from_data(L: IRNodeData, R: IRNodeData, nv: np.ndarray, gas: GasModel) -> np.ndarray:
    g = gas.gamma
    z1_avg = 0.5 * (L.z1 + R.z1)
    z5_avg = 0.5 * (L.z5 + R.z5)
    z1_ln = log_mean(L.z1, R.z1)
    z5_ln = log_mean(L.z5, R.z5)
    rho_hat = z1_avg * z5_ln
    V_hat = 0.5 * (L.zV + R.zV) / z1_avg[..., None]
    p1 = z5_avg / z1_avg
    p2 = (g + 1.0) / (2.0 * g) * z5_ln / z1_ln + (g - 1.0) / (2.0 * g) * p1
    H_hat = g * p2 / (rho_hat * (g - 1.0)) + 0.5 * np.sum(V_hat * V_hat, axis=-1)
    vn = np.sum(V_hat * nv, axis=-1)
    mass = rho_hat * vn
    mom = mass[..., None] * V_hat + p1[..., None] * nv
    return np.concatenate([mass[..., None], mom, (mass * H_hat)[..., None]], axis=-1)


def ismail_roe_flux(uL: np.ndarray, uR: np.ndarray, n, gas: GasModel) -> np.ndarray:
    """Ismail-Roe entropy-conservative flux for the generalized family."""
    L, R = IRNodeData(uL, gas), IRNodeData(uR, gas)
    nv = _normal(n, _dim(uL), L.z1.shape)
    return ir_flux_from_data(L, R, nv, gas)


def _viscous_from_grads(rho, V, p, du, gas: GasModel, heat: bool) -> np.ndarray:
    """Viscous fluxes ``(..., d, nc)`` from conservative gradients ``du (..., d, nc)``."""
    g = gas.gamma
    d = V.shape[-1]
    drho = du[..., 0]
    dm = du[..., 1:-1]
    de = du[..., -1]
    # velocity gradient gradV[..., j, i] = d V_i / d x_j
    gradV = (dm - V[..., None, :] * drho[..., None]) / rho[..., None, None]
    div = np.trace(gradV, axis1=-2, axis2=-1)
    tau = gas.mu * (gradV + np.swapaxes(gradV, -1, -2))
    idx = np.arange(d)
    tau[..., idx, idx] -= (2.0 / 3.0) * gas.mu * div[..., None]
    # tau[..., i, j] symmetric; flux in direction i
    energy = np.einsum("...ij,...j->...i", tau, V)
    if heat and gas.include_heat_flux:
        dp = (g - 1.0) * (
            de - np.einsum("...i,...ji->...j", V, dm) + 0.5 * np.sum(V * V, axis=-1)[..., None] * drho
        )
        dT = (dp - (p / rho)[..., None] * drho) / (rho[..., None] * gas.R)
        energy = energy + gas.kappa * dT
    zero = np.zeros(tau.shape[:-1] + (1,))
    return np.concatenate([zero, tau, energy[..., None]], axis=-1)


def viscous_flux(u: np.ndarray, grad_w: np.ndarray, gas: GasModel, heat: bool = True) -> np.ndarray:
    """Navier-Stokes viscous fluxes from entropy-variable gradients.

    Parameters
    ----------
    u : ndarray, shape (..., nc)
    grad_w : ndarray, shape (..., d, nc)
        ``dw/dx_j`` stacked along axis -2.

    Returns
    -------
    ndarray, shape (..., d, nc)
        ``F^V_i = sum_j K_ij dw/dx_j`` for each direction ``i``.
    """
    du = dudw_apply(u[..., None, :], grad_w, gas)
    rho, V, p = primitive(u, gas)
    return _viscous_from_grads(rho, V, p, du, gas, heat)


def diffusivity_tensor(u: np.ndarray, gas: GasModel, heat: bool = True) -> np.ndarray:
    """Blocks ``K_ij`` acting on entropy-variable gradients.

    Returns an array of shape ``(..., d, d, nc, nc)`` where block ``[i, j]``
    maps ``dw/dx_j`` to its contribution to the viscous flux in direction
    ``i``.  Without heat flux the assembled matrix is symmetric positive
    semi-definite.
    """
    nc = u.shape[-1]
    d = nc - 2
    lead = u.shape[:-1]
    K = np.empty(lead + (d, d, nc, nc))
    for j in range(d):
        for m in range(nc):
            g = np.zeros(lead + (d, nc))
            g[..., j, m] = 1.0
            K[..., :, j, :, m] = viscous_flux(u, g, gas, heat)
    return K


def temperature_gradient_wrt_w(u: np.ndarray, gas: GasModel) -> np.ndarray:
    """Row vector ``dT/dw = A0 dT/du`` (``A0`` is symmetric)."""
    g, R = gas.gamma, gas.R
    rho, V, p = primitive(u, gas)
    dT_du = np.concatenate(
        [
            (0.5 * (g - 1.0) * np.sum(V * V, axis=-1) - p / rho)[..., None],
            -(g - 1.0) * V,
            np.full(rho.shape + (1,), g - 1.0),
        ],
        axis=-1,
    ) / (rho * R)[..., None]
    return dudw_apply(u, dT_du, gas)


def k_sqrt(K: np.ndarray, clamp: float = 1e-11) -> np.ndarray:
    """Symmetric square root of assembled diffusivity matrices.

    ``K`` has shape ``(..., d, d, nc, nc)`` or ``(..., m, m)``.  Eigenvalues
    in ``[-clamp, 0)`` are set to zero; anything more negative raises.
    """
    blocked = K.ndim >= 4 and K.shape[-4] == K.shape[-3]
    if blocked:
        d, nc = K.shape[-3], K.shape[-1]
        M = np.swapaxes(K, -3, -2).reshape(K.shape[:-4] + (d * nc, d * nc))
    else:
        M = K
    asym = np.max(np.abs(M - np.swapaxes(M, -1, -2)), initial=0.0)
    if asym > 1e-10 * max(1.0, float(np.max(np.abs(M), initial=0.0))):
        raise ValueError("diffusivity matrix is not symmetric; square root undefined")
    lam, vec = np.linalg.eigh(0.5 * (M + np.swapaxes(M, -1, -2)))
    if np.any(lam < -clamp):
        raise ValueError(f"diffusivity matrix has eigenvalue {lam.min():.3e} below -{clamp:g}")
    lam = np.clip(lam, 0.0, None)
    out = np.einsum("...ik,...k,...jk->...ij", vec, np.sqrt(lam), vec)
    if blocked:
        out = np.swapaxes(out.reshape(K.shape[:-4] + (d, nc, d, nc)), -3, -2)
    return out


def _tangents(nv: np.ndarray) -> list[np.ndarray]:
    d = nv.shape[-1]
    if d == 1:
        return []
    if d == 2:
        return [np.stack([nv[..., 1], -nv[..., 0]], axis=-1)]
    # orthonormal pair built from the axis least aligned with n
    k = np.argmin(np.abs(nv), axis=-1)
    e = np.zeros_like(nv)
    np.put_along_axis(e, k[..., None], 1.0, axis=-1)
    t1 = np.cross(nv, e)
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(nv, t1)
    return [t1, t2]


def dissipation_factors(uL: np.ndarray, uR: np.ndarray, n, gas: GasModel):
    """Eigen-factors of the interface dissipation for the Harten family.

    Returns ``X``, ``S`` and ``Lam`` such that the dissipation term is
    ``X |Lam| S X^T (w_L - w_R)``.  ``S`` and ``Lam`` are returned as
    diagonals.  At coincident states ``X diag(S) X^T`` reproduces ``A0``.
    """
    if gas.entropy_family != "harten":
        raise ValueError("interface dissipation is defined for the Harten family")
    g, al = gas.gamma, gas.alpha
    L, R = SYNodeData(uL, gas), SYNodeData(uR, gas)
    d = _dim(uL)
    nv = _normal(n, d, L.p.shape)
    c_avg = 0.5 * (L.c + R.c)
    cpow_avg = 0.5 * (L.c_pow + R.c_pow)
    pe = exp_average(L.p, R.p, (1.0 - g) / al)
    ce = exp_average(L.c, R.c, -g / al)
    rho = c_avg / (cpow_avg * pe)
    V = 0.5 * (L.cV + R.cV) / c_avg[..., None]
    p = 0.5 * (L.p + R.p)
    theta = rho / (p * cpow_avg * pe)
    eta = 1.0 / (c_avg * ce * pe)
    a = np.sqrt(g * p / rho)
    vv = np.sum(V * V, axis=-1)
    H = a * a / (g - 1.0) + 0.5 * vv
    vn = np.sum(V * nv, axis=-1)
    tang = _tangents(nv)
    nc = d + 2
    shape = vn.shape
    X = np.zeros(shape + (nc, nc))
    X[..., 0, 0] = 1.0
    X[..., 0, 1] = 1.0
    X[..., 0, -1] = 1.0
    X[..., 1:-1, 0] = V - a[..., None] * nv
    X[..., 1:-1, 1] = V
    X[..., 1:-1, -1] = V + a[..., None] * nv
    X[..., -1, 0] = H - a * vn
    X[..., -1, 1] = 0.5 * vv
    X[..., -1, -1] = H + a * vn
    for k, t in enumerate(tang):
        X[..., 1:-1, 2 + k] = t
        X[..., -1, 2 + k] = np.sum(V * t, axis=-1)
    S = np.empty(shape + (nc,))
    S[..., 0] = theta / (2.0 * g)
    S[..., 1] = (g - 1.0) * (g + al) * theta / (g * al)
    S[..., 2:-1] = eta[..., None]
    S[..., -1] = theta / (2.0 * g)
    Lam = np.empty(shape + (nc,))
    Lam[..., 0] = vn - a
    Lam[..., 1:-1] = vn[..., None]
    Lam[..., -1] = vn + a
    return X, S, Lam


def dissipation_apply(uL: np.ndarray, uR: np.ndarray, n, gas: GasModel) -> np.ndarray:
    """``X |Lam| S X^T (w_L - w_R)`` for unit normals ``n``."""
    X, S, Lam = dissipation_factors(uL, uR, n, gas)
    dw = entropy_variables(uL, gas) - entropy_variables(uR, gas)
    y = np.einsum("...ji,...j->...i", X, dw)
    return np.einsum("...ij,...j->...i", X, np.abs(Lam) * S * y)
