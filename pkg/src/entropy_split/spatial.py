"""Semi-discrete residual of the entropy-split and Hadamard schemes.

Each element is discretized either in entropy-split form

    du/dt = H^-1 sum_i [Q_xi / (beta + 1) + Q_xi^T] f_i
            - 1 / (beta + 1) sum_i A_i A0 D_xi w,

or in Hadamard (flux-differencing) form

    du/dt = -H^-1 sum_i [S_xi o 2 F_i(u_m, u_n)] 1,

and all elements share the interface coupling ``-H^-1 R^T B F_n(u_k, u_v)``
built from the same two-point flux.  Optional terms are an entropy-stable
matrix dissipation at interfaces and the Navier-Stokes viscous terms with
either the BO or the BR2 interface treatment.

Fields are stored node-major as arrays of shape ``(K, n_p, n_c)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import gas as gm
from .gas import AdmissibilityError, GasModel
from .mesh import ElementOperators

__all__ = [
    "ENTROPY_SPLIT",
    "HADAMARD",
    "ConfigError",
    "SchemeConfig",
    "FieldState",
    "volume_entropy_split",
    "volume_hadamard",
    "inviscid_interface",
    "interface_dissipation",
    "viscous_volume",
    "viscous_interface",
    "viscous_sat_coefficients",
    "residual",
    "entropy_rate",
]

ENTROPY_SPLIT = 0
HADAMARD = 1

_MODE_NAMES = {"entropy_split": ENTROPY_SPLIT, "es": ENTROPY_SPLIT, "hadamard": HADAMARD}
_FLUX_NAMES = {"sjogreen_yee": "sjogreen_yee", "sy": "sjogreen_yee", "ismail_roe": "ismail_roe", "ir": "ismail_roe"}


class ConfigError(ValueError):
    """Inconsistent scheme configuration."""


@dataclass
class SchemeConfig:
    """Scheme switches.

    Parameters
    ----------
    gas : GasModel
    flux : {"sjogreen_yee", "ismail_roe"}
        Two-point flux for Hadamard volumes and all interfaces.
    mode_map : ndarray of int, optional
        Per-element mode, ``ENTROPY_SPLIT`` or ``HADAMARD``.  ``None``
        applies ``default_mode`` everywhere.
    default_mode : {"entropy_split", "hadamard"}
    dissipation : bool
        Add the entropy-stable interface matrix dissipation.
    viscous : bool
        Add the Navier-Stokes viscous terms (needs ``gas.mu > 0``).
    viscous_sat : {"BO", "BR2"}
    source : callable, optional
        ``source(x, t)`` returning an array shaped like the state.
    """

    gas: GasModel = field(default_factory=GasModel)
    flux: str = "sjogreen_yee"
    mode_map: np.ndarray | None = None
    default_mode: str = "entropy_split"
    dissipation: bool = False
    viscous: bool = False
    viscous_sat: str = "BO"
    source: Callable | None = None

    def __post_init__(self):
        self.validate()

    def modes(self, n_elements: int) -> np.ndarray:
        if self.mode_map is None:
            return np.full(n_elements, _MODE_NAMES[self.default_mode], dtype=np.int8)
        m = np.asarray(self.mode_map, dtype=np.int8)
        if m.shape != (n_elements,):
            raise ConfigError(f"mode map has {m.size} entries for {n_elements} elements")
        return m

    def validate(self) -> None:
        if self.flux not in _FLUX_NAMES:
            raise ConfigError(f"unknown flux {self.flux!r}")
        self.flux = _FLUX_NAMES[self.flux]
        if self.default_mode not in _MODE_NAMES:
            raise ConfigError(f"unknown mode {self.default_mode!r}")
        self.default_mode = "hadamard" if _MODE_NAMES[self.default_mode] == HADAMARD else "entropy_split"
        if self.viscous_sat not in ("BO", "BR2"):
            raise ConfigError("viscous_sat must be BO or BR2")
        modes = self.mode_map if self.mode_map is not None else [_MODE_NAMES[self.default_mode]]
        uses_split = bool(np.any(np.asarray(modes) == ENTROPY_SPLIT))
        fam = self.gas.entropy_family
        if self.flux == "ismail_roe":
            if uses_split:
                raise ConfigError(
                    "entropy-split elements are entropy conservative only with the Sjogreen-Yee flux "
                    "and the Harten family; the Ismail-Roe flux needs all-Hadamard elements"
                )
            if fam != "generalized":
                raise ConfigError("the Ismail-Roe flux requires the generalized entropy family")
        elif fam != "harten":
            raise ConfigError("the Sjogreen-Yee flux requires the Harten entropy family")
        if self.dissipation and fam != "harten":
            raise ConfigError("interface dissipation is defined for the Harten family")
        if self.viscous and self.gas.mu <= 0.0:
            raise ConfigError("viscous terms need mu > 0")
        if self.viscous and self.viscous_sat == "BR2" and fam == "harten" and self.gas.include_heat_flux:
            raise ConfigError("BR2 needs a symmetric diffusivity; disable the heat flux or use BO")


@dataclass
class FieldState:
    """Solution ``u`` of shape ``(K, n_p, n_c)`` at time ``t``."""

    u: np.ndarray
    t: float = 0.0

    def copy(self) -> "FieldState":
        return FieldState(self.u.copy(), self.t)


def _flux_kernels(cfg: SchemeConfig):
    if cfg.flux == "sjogreen_yee":
        return gm.SYNodeData, gm.sy_flux_from_data
    return gm.IRNodeData, gm.ir_flux_from_data


def _expand(a: np.ndarray, ndim: int) -> np.ndarray:
    return a.reshape(a.shape + (1,) * (ndim - a.ndim))


def volume_entropy_split(u: np.ndarray, ops: ElementOperators, gas: GasModel, w=None, grad_w=None,
                         form: str = "weak") -> np.ndarray:
    """Entropy-split volume contribution to ``du/dt``.

    The ``weak`` form is the one used in time stepping.  The ``strong``
    form ``-beta/(beta+1) D f - 1/(beta+1) A D w + H^-1 E f`` is
    algebraically identical and kept for verification.
    """
    d = ops.d
    K, n_p, nc = u.shape
    b = gas.beta
    if grad_w is None:
        w = gm.entropy_variables(u, gas) if w is None else w
        grad_w = ops.grad(w)
    eye = np.broadcast_to(np.eye(d), (K, n_p, d, d))
    dU = gm.dudw_apply(u[:, :, None, :], grad_w, gas)
    split = np.sum(gm.flux_jacobian_apply(u[:, :, None, :], dU, eye, gas), axis=2)
    F = gm.euler_flux(u[:, :, None, :], eye, gas)
    if form == "weak":
        D1 = ops.ref.D1d
        w1 = ops.ref.w1d
        Mhat = D1 / (b + 1.0) + (D1.T * w1[None, :]) / w1[:, None]
        acc = 0.0
        for a in range(d):
            contra = 0.0
            for i in range(d):
                lam = _expand(ops.lam[:, :, a, i], 3)
                contra = contra + lam * F[:, :, i]
                acc = acc + lam * ops.ref_apply(Mhat, F[:, :, i], a)
            acc = acc + ops.ref_apply(Mhat, contra, a)
        return 0.5 * acc / ops.J[:, :, None] - split / (b + 1.0)
    if form != "strong":
        raise ValueError("form must be 'weak' or 'strong'")
    out = -b / (b + 1.0) * ops.divergence(F) - split / (b + 1.0)
    for f in range(2 * d):
        idx = ops.face_nodes[f]
        Fn = np.einsum("kfi,kfic->kfc", ops.N[:, f], F[:, idx])
        out[:, idx] += (ops.B[:, f] / ops.H[:, idx])[..., None] * Fn
    return out


def volume_hadamard(u: np.ndarray, ops: ElementOperators, cfg: SchemeConfig) -> np.ndarray:
    """Flux-differencing volume contribution to ``du/dt``.

    Only pairs ``r < s`` along each tensor line are evaluated; the skew
    symmetry of ``S`` supplies the transposed contribution.
    """
    d, q = ops.d, ops.q
    K, n_p, nc = u.shape
    NodeData, kernel = _flux_kernels(cfg)
    shape = (K,) + (q,) * d
    data = NodeData(u, cfg.gas).map(lambda v: v.reshape(shape + v.shape[2:]))
    ref = ops.ref
    S1 = ref.w1d[:, None] * ref.D1d
    S1[0, 0] += 0.5
    S1[-1, -1] -= 0.5
    out = np.zeros(shape + (nc,))
    for a in range(d):
        ax = d - a
        lam = ops.lam[:, :, a, :].reshape(shape + (d,))
        acc = np.zeros(shape + (nc,))
        cut = [np.take(lam, r, axis=ax) for r in range(q)]
        dcut = [data.map(lambda v, r=r: np.take(v, r, axis=ax)) for r in range(q)]
        for r in range(q):
            sl_r = (slice(None),) * ax + (r,)
            for s in range(r + 1, q):
                G = kernel(dcut[r], dcut[s], cut[r] + cut[s], cfg.gas)
                acc[sl_r] += S1[r, s] * G
                acc[(slice(None),) * ax + (s,)] += S1[s, r] * G
        wshape = [1] * (d + 2)
        wshape[ax] = q
        out += acc / ref.w1d.reshape(wshape)
    return -(out.reshape(K, n_p, nc)) / ops.J[:, :, None]


def _face_pairs(ops: ElementOperators, a: int):
    """Owner/neighbour indices for all facets normal to direction ``a``."""
    fp, fm = ops.face_nodes[2 * a + 1], ops.face_nodes[2 * a]
    v = ops.neighbors[:, a, 1]
    return fp, fm, v


def inviscid_interface(u: np.ndarray, ops: ElementOperators, cfg: SchemeConfig, out: np.ndarray | None = None):
    """Add ``-H^-1 R^T B F_n`` on both sides of every facet, once per facet."""
    if out is None:
        out = np.zeros_like(u)
    NodeData, kernel = _flux_kernels(cfg)
    for a in range(ops.d):
        fp, fm, v = _face_pairs(ops, a)
        uL = u[:, fp]
        uR = u[v[:, None], fm[None, :]]
        Fn = kernel(NodeData(uL, cfg.gas), NodeData(uR, cfg.gas), ops.N[:, 2 * a + 1], cfg.gas)
        Bf = ops.B[:, 2 * a + 1]
        out[:, fp] -= (Bf / ops.H[:, fp])[..., None] * Fn
        out[v[:, None], fm[None, :]] += (Bf / ops.H[v[:, None], fm[None, :]])[..., None] * Fn
    return out


def interface_dissipation(u: np.ndarray, ops: ElementOperators, gas: GasModel, out: np.ndarray | None = None):
    """Add ``-1/2 H^-1 R^T B X|Lam|S X^T (w_k - w_v)`` on both sides of every facet."""
    if out is None:
        out = np.zeros_like(u)
    for a in range(ops.d):
        fp, fm, v = _face_pairs(ops, a)
        uL = u[:, fp]
        uR = u[v[:, None], fm[None, :]]
        diss = gm.dissipation_apply(uL, uR, ops.N[:, 2 * a + 1], gas)
        Bf = 0.5 * ops.B[:, 2 * a + 1]
        out[:, fp] -= (Bf / ops.H[:, fp])[..., None] * diss
        out[v[:, None], fm[None, :]] += (Bf / ops.H[v[:, None], fm[None, :]])[..., None] * diss
    return out


def viscous_volume(u: np.ndarray, ops: ElementOperators, gas: GasModel, grad_w: np.ndarray) -> np.ndarray:
    """``sum_ij D_xi K_ij D_xj w`` with ``grad_w`` of shape ``(K, n_p, d, nc)``."""
    return ops.divergence(gm.viscous_flux(u, grad_w, gas))


def viscous_sat_coefficients(kind: str, B: np.ndarray, NKN_k=None, NKN_v=None, H_k=None, H_v=None,
                             n_facets: int = 2):
    """Interface coefficient blocks ``(T1, T2, T3)`` seen from each side.

    Returns two dictionaries (owner side ``k`` and neighbour side ``v``)
    with entries ``T1`` (shape ``(..., nc, nc)`` or ``0``), ``T2`` and
    ``T3`` (scalars per facet node multiplying the identity).  BO uses
    ``T1 = 0`` and ``T2 = T3 = B/2``; BR2 uses the lifted penalty ``T1``
    and ``T2 = -T3 = -B/2``.  ``NKN`` is ``sum_il N_i K_il N_l`` at the
    facet nodes of each side.
    """
    half = 0.5 * B
    if kind == "BO":
        side = {"T1": 0.0, "T2": half, "T3": half}
        return dict(side), dict(side)
    if kind != "BR2":
        raise ConfigError(f"unknown viscous SAT {kind!r}")
    inv_alpha = float(n_facets)
    T1 = 0.25 * (B * B)[..., None, None] * inv_alpha * (
        NKN_k / H_k[..., None, None] + NKN_v / H_v[..., None, None]
    )
    side = {"T1": T1, "T2": -half, "T3": half}
    return dict(side), dict(side)


def _adjoint_lift(u_f: np.ndarray, N: np.ndarray, y: np.ndarray, gas: GasModel) -> np.ndarray:
    """``z_j = sum_i K_ij^T N_i y`` at facet nodes, shape ``(..., d, nc)``."""
    g = N[..., :, None] * y[..., None, :]
    if gas.include_heat_flux and gas.entropy_family == "harten":
        z = gm.viscous_flux(u_f, g, gas, heat=False)
        dT = gm.temperature_gradient_wrt_w(u_f, gas)
        z = z + gas.kappa * dT[..., None, :] * (N * y[..., -1:])[..., :, None]
        return z
    return gm.viscous_flux(u_f, g, gas)


def viscous_interface(u: np.ndarray, w: np.ndarray, ops: ElementOperators, cfg: SchemeConfig,
                      Fv: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Viscous interface terms for every facet, processed once per facet.

    ``Fv`` holds the nodal viscous fluxes ``(K, n_p, d, nc)``.
    """
    gas = cfg.gas
    if out is None:
        out = np.zeros_like(u)
    K, n_p, nc = u.shape
    d = ops.d
    Z = np.zeros((K, n_p, d, nc))
    for a in range(d):
        fp, fm, v = _face_pairs(ops, a)
        vi = v[:, None]
        fmi = fm[None, :]
        N = ops.N[:, 2 * a + 1]
        Bf = ops.B[:, 2 * a + 1]
        Hk = ops.H[:, fp]
        Hv = ops.H[vi, fmi]
        uk, uv = u[:, fp], u[vi, fmi]
        jump = w[:, fp] - w[vi, fmi]
        flux_k = np.einsum("kfi,kfic->kfc", N, Fv[:, fp])
        flux_v = np.einsum("kfi,kfic->kfc", N, Fv[vi, fmi])
        NKN_k = NKN_v = None
        if cfg.viscous_sat == "BR2":
            eye = np.eye(nc)
            gk = N[..., None, :, None] * eye[:, None, :]
            NKN_k = np.einsum("kfi,kfmic->kfcm", N, gm.viscous_flux(uk[:, :, None, :], gk, gas))
            NKN_v = np.einsum("kfi,kfmic->kfcm", N, gm.viscous_flux(uv[:, :, None, :], gk, gas))
        ck, cv = viscous_sat_coefficients(cfg.viscous_sat, Bf, NKN_k, NKN_v, Hk, Hv, 2 * d)
        dflux = flux_k - flux_v
        if np.ndim(ck["T1"]):
            t1k = np.einsum("kfcm,kfm->kfc", ck["T1"], jump)
        else:
            t1k = 0.0
        out[:, fp] -= (t1k + ck["T3"][..., None] * dflux) / Hk[..., None]
        out[vi, fmi] -= (-t1k + cv["T3"][..., None] * dflux) / Hv[..., None]
        # adjoint-consistency terms: D_gamma^T T2 (jump) on each side
        y = ck["T2"][..., None] * jump
        Z[:, fp] += _adjoint_lift(uk, N, y, gas)
        Z[vi, fmi] += _adjoint_lift(uv, N, y, gas)
    Zs = Z / ops.H[:, :, None, None]
    out -= ops.divergence_transpose(Zs) / ops.H[:, :, None]
    return out


def residual(u: np.ndarray, t: float, ops: ElementOperators, cfg: SchemeConfig) -> np.ndarray:
    """Full semi-discrete right-hand side ``du/dt``.

    Raises
    ------
    AdmissibilityError
        With element, node and time when a state is not physical.
    """
    gas = cfg.gas
    try:
        gm.check_admissible(u, gas, t)
    except AdmissibilityError as exc:
        k, m = exc.index[0], exc.index[1]
        raise AdmissibilityError(f"element {k}, node {m}: {exc}", exc.index, t) from None
    K = u.shape[0]
    modes = cfg.modes(K)
    need_w = cfg.viscous or np.any(modes == ENTROPY_SPLIT)
    w = gm.entropy_variables(u, gas) if (need_w or cfg.dissipation) else None
    grad_w = ops.grad(w) if need_w else None
    es = np.nonzero(modes == ENTROPY_SPLIT)[0]
    hd = np.nonzero(modes == HADAMARD)[0]
    r = np.empty_like(u)
    if es.size == K:
        r[:] = volume_entropy_split(u, ops, gas, grad_w=grad_w)
    elif hd.size == K:
        r[:] = volume_hadamard(u, ops, cfg)
    else:
        r[es] = volume_entropy_split(u[es], restrict(ops, es), gas, grad_w=grad_w[es])
        r[hd] = volume_hadamard(u[hd], restrict(ops, hd), cfg)
    inviscid_interface(u, ops, cfg, out=r)
    if cfg.dissipation:
        interface_dissipation(u, ops, gas, out=r)
    if cfg.viscous:
        Fv = gm.viscous_flux(u, grad_w, gas)
        r += ops.divergence(Fv)
        viscous_interface(u, w, ops, cfg, Fv, out=r)
    if cfg.source is not None:
        r += cfg.source(ops.mesh.x, t)
    return r


def restrict(ops: ElementOperators, elems: np.ndarray) -> ElementOperators:
    """Volume data of a subset of elements (facet data is not remapped)."""
    return replace(ops, J=ops.J[elems], H=ops.H[elems], lam=ops.lam[elems])


def entropy_rate(u: np.ndarray, r: np.ndarray, ops: ElementOperators, gas: GasModel) -> tuple[float, float]:
    """Global ``sum_k w_k^T H_k r_k`` and the matching magnitude scale."""
    w = gm.entropy_variables(u, gas)
    prod = ops.H[:, :, None] * w * r
    return float(np.sum(prod)), float(np.sum(np.abs(prod)))
