"""Periodic structured meshes of curved tensor-product elements.

Elements are the images of a uniform Cartesian grid under an optional
smooth warp.  The warp is sampled at LGL nodes of degree ``p_geom`` and
interpolated to the solution nodes, so each element map is a polynomial.
Metric terms are computed with the reference differentiation matrix,
which makes the discrete metric identities hold to round-off (cofactor
form in 2D, curl form in 3D).

Element operators are stored in batched form: arrays with a leading
element axis.  Physical derivative operators use the skew-symmetric
metric splitting

    Q_xi = 1/2 sum_a (Lambda_ai Q_a + Q_a Lambda_ai),

with ``Lambda_ai = J d xi_a / d x_i`` at the nodes, so that
``Q_xi + Q_xi^T = sum_gamma R^T B N_i R`` holds on every element.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import ReferenceOperators, build_reference_ops, lagrange_interp_matrix, lgl_nodes_weights

__all__ = [
    "MeshError",
    "Mesh",
    "ElementOperators",
    "WARPS",
    "warp_points",
    "max_geometry_degree",
    "build_mesh",
    "compute_element_ops",
    "geometry_residuals",
    "check_freestream",
]


class MeshError(ValueError):
    """Invalid mesh request or degenerate element map."""


def _warp_vortex2d(xh: np.ndarray) -> np.ndarray:
    x = xh.copy()
    x[..., 0] = xh[..., 0] + 0.125 * np.cos(np.pi / 20 * (xh[..., 0] - 10.0)) * np.cos(0.3 * np.pi * xh[..., 1])
    # the second coordinate uses the already displaced first coordinate
    x[..., 1] = xh[..., 1] + 0.125 * np.sin(np.pi / 5 * (x[..., 0] - 10.0)) * np.cos(np.pi / 10 * xh[..., 1])
    return x


def _warp_vortex3d(xh: np.ndarray) -> np.ndarray:
    return xh + 0.05 * np.sin(0.5 * np.pi * xh)


def _warp_mms(xh: np.ndarray) -> np.ndarray:
    d = xh.shape[-1]
    x = xh.copy()
    for i in range(d):
        prod = np.ones(xh.shape[:-1])
        for j in range(d):
            if j != i:
                prod = prod * np.sin(np.pi * xh[..., j])
        x[..., i] = xh[..., i] + 0.125 * np.cos(0.5 * np.pi * xh[..., i]) * prod
    return x


WARPS = {
    "none": lambda xh: xh.copy(),
    "vortex2d": _warp_vortex2d,
    "vortex3d": _warp_vortex3d,
    "mms": _warp_mms,
}


def warp_points(xh: np.ndarray, warp: str) -> np.ndarray:
    """Apply a named warp to points ``xh`` of shape ``(..., d)``.

    Examples
    --------
    >>> warp_points(np.array([10.0, 0.0]), "vortex2d")
    array([10.125,  0.   ])
    """
    if warp not in WARPS:
        raise MeshError(f"unknown warp {warp!r}; choose from {sorted(WARPS)}")
    if warp == "vortex2d" and xh.shape[-1] != 2:
        raise MeshError("vortex2d warp needs d = 2")
    return WARPS[warp](np.asarray(xh, dtype=float))


def max_geometry_degree(p: int, d: int) -> int:
    """Largest mapping degree for which the metric identities are exact."""
    if d == 3:
        return p // 2 + 1
    return p + 1


@dataclass
class Mesh:
    """Periodic structured mesh.

    Attributes
    ----------
    x : ndarray, shape (K, n_p, d)
        Physical node coordinates.
    neighbors : ndarray, shape (K, d, 2)
        Element across the ``-a`` and ``+a`` facet of each element.
    cell_index : ndarray, shape (K, d)
        Integer grid position of each element.
    """

    d: int
    p: int
    p_geom: int
    cells: tuple[int, ...]
    lo: np.ndarray
    hi: np.ndarray
    warp: str
    x: np.ndarray
    neighbors: np.ndarray
    cell_index: np.ndarray
    ref: ReferenceOperators = field(repr=False)

    @property
    def n_elements(self) -> int:
        return self.x.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def element_size(self) -> float:
        """Nominal size ``(|Omega| / K)^(1/d)``."""
        return (self.volume / self.n_elements) ** (1.0 / self.d)

    def centroids(self) -> np.ndarray:
        return self.x.mean(axis=1)


def build_mesh(
    p: int,
    d: int,
    cells_per_dim,
    domain,
    warp: str = "none",
    p_geom: int | None = None,
    metric_check: bool = True,
) -> Mesh:
    """Build a periodic mesh of ``prod(cells_per_dim)`` elements.

    Parameters
    ----------
    p : int
        Solution degree; fixes the node set.
    d : int
        Spatial dimension.
    cells_per_dim : int or sequence of int
    domain : sequence of (lo, hi) pairs
    warp : {"none", "vortex2d", "vortex3d", "mms"}
    p_geom : int, optional
        Degree of the element map.  Defaults to ``p`` in 1D/2D and to
        ``min(p, p // 2 + 1)`` in 3D.  Larger values than
        :func:`max_geometry_degree` are rejected unless ``metric_check``
        is false.
    """
    cells = (int(cells_per_dim),) * d if np.isscalar(cells_per_dim) else tuple(int(c) for c in cells_per_dim)
    if len(cells) != d or min(cells) < 1:
        raise MeshError(f"cells_per_dim {cells_per_dim} does not match d={d}")
    dom = np.asarray(domain, dtype=float).reshape(d, 2)
    lo, hi = dom[:, 0], dom[:, 1]
    if np.any(hi <= lo):
        raise MeshError("domain bounds must satisfy lo < hi")
    if warp not in WARPS:
        raise MeshError(f"unknown warp {warp!r}")
    if p_geom is None:
        p_geom = min(p, p // 2 + 1) if d == 3 else p
    if p_geom < 1:
        raise MeshError("p_geom must be at least 1")
    if metric_check and p_geom > max_geometry_degree(p, d):
        raise MeshError(
            f"p_geom={p_geom} exceeds {max_geometry_degree(p, d)} for p={p}, d={d}; metric identities would not hold"
        )
    ref = build_reference_ops(p, d)
    # geometry nodes of degree p_geom, interpolated to the solution nodes
    xg, _ = lgl_nodes_weights(p_geom)
    interp1 = lagrange_interp_matrix(xg, ref.x1d)
    interp = np.ones((1, 1))
    for _ in range(d):
        interp = np.kron(interp, interp1)
    gidx = np.indices((p_geom + 1,) * d).reshape(d, -1)[::-1].T
    ref_geom = xg[gidx]
    # element numbering with direction 1 fastest
    grid = np.indices(cells[::-1]).reshape(d, -1)[::-1].T
    width = (hi - lo) / np.asarray(cells)
    xh = lo + width * (grid[:, None, :] + 0.5 * (ref_geom[None, :, :] + 1.0))
    xg_phys = warp_points(xh, warp)
    x = np.einsum("mn,knd->kmd", interp, xg_phys)
    strides = np.cumprod((1,) + cells[:-1])
    K = grid.shape[0]
    nbr = np.empty((K, d, 2), dtype=np.int64)
    for a in range(d):
        for s, step in enumerate((-1, 1)):
            g2 = grid.copy()
            g2[:, a] = (g2[:, a] + step) % cells[a]
            nbr[:, a, s] = g2 @ strides
    assert np.array_equal(grid @ strides, np.arange(K))
    return Mesh(d, p, p_geom, cells, lo, hi, warp, x, nbr, grid, ref)


@dataclass
class ElementOperators:
    """Batched physical SBP operators for every element of a mesh.

    Attributes
    ----------
    J : ndarray, shape (K, n_p)
        Mapping Jacobian at the nodes.
    H : ndarray, shape (K, n_p)
        Diagonal norm ``J H_ref``.
    lam : ndarray, shape (K, n_p, d, d)
        Scaled metric terms ``lam[..., a, i] = J d xi_a / d x_i``.
    face_nodes : ndarray, shape (2 d, n_f)
        Volume indices of facet nodes, facets ordered ``-x1, +x1, ...``.
    B : ndarray, shape (K, 2 d, n_f)
        Physical facet weights.
    N : ndarray, shape (K, 2 d, n_f, d)
        Outward unit normals.
    h_min : ndarray, shape (K,)
        Smallest distance between two nodes of each element.
    """

    mesh: Mesh
    ref: ReferenceOperators
    J: np.ndarray
    H: np.ndarray
    lam: np.ndarray
    face_nodes: np.ndarray
    B: np.ndarray
    N: np.ndarray
    h_min: np.ndarray
    metric: str

    @property
    def d(self) -> int:
        return self.ref.d

    @property
    def q(self) -> int:
        return self.ref.p + 1

    @property
    def n_elements(self) -> int:
        return self.J.shape[0]

    @property
    def neighbors(self) -> np.ndarray:
        return self.mesh.neighbors

    def ref_apply(self, M: np.ndarray, v: np.ndarray, a: int) -> np.ndarray:
        """Apply a 1D matrix ``M`` along reference direction ``a`` of nodal data ``v``."""
        d, q = self.d, self.q
        K = v.shape[0]
        tail = v.shape[2:]
        vr = v.reshape((K,) + (q,) * d + tail)
        ax = d - a
        out = np.moveaxis(np.tensordot(M, vr, axes=([1], [ax])), 0, ax)
        return out.reshape(v.shape)

    def _lam_b(self, a: int, i: int, v: np.ndarray) -> np.ndarray:
        lam = self.lam[:, :, a, i]
        return lam.reshape(lam.shape + (1,) * (v.ndim - 2))

    def _inv_J(self, v: np.ndarray) -> np.ndarray:
        return (1.0 / self.J).reshape(self.J.shape + (1,) * (v.ndim - 2))

    def deriv(self, v: np.ndarray, i: int) -> np.ndarray:
        """Physical derivative ``D_xi v`` with ``v`` of shape ``(K, n_p, ...)``."""
        D1 = self.ref.D1d
        acc = 0.0
        for a in range(self.d):
            lam = self._lam_b(a, i, v)
            acc = acc + lam * self.ref_apply(D1, v, a) + self.ref_apply(D1, lam * v, a)
        return 0.5 * self._inv_J(v) * acc

    def grad(self, v: np.ndarray) -> np.ndarray:
        """All physical derivatives stacked on a new axis 2."""
        D1 = self.ref.D1d
        dv = [self.ref_apply(D1, v, a) for a in range(self.d)]
        out = []
        for i in range(self.d):
            acc = 0.0
            for a in range(self.d):
                lam = self._lam_b(a, i, v)
                acc = acc + lam * dv[a] + self.ref_apply(D1, lam * v, a)
            out.append(0.5 * self._inv_J(v) * acc)
        return np.stack(out, axis=2)

    def divergence(self, F: np.ndarray) -> np.ndarray:
        """``sum_i D_xi F_i`` for fluxes of shape ``(K, n_p, d, ...)``."""
        D1 = self.ref.D1d
        acc = 0.0
        for a in range(self.d):
            contra = 0.0
            for i in range(self.d):
                lam = self._lam_b(a, i, F[:, :, i])
                contra = contra + lam * F[:, :, i]
                acc = acc + lam * self.ref_apply(D1, F[:, :, i], a)
            acc = acc + self.ref_apply(D1, contra, a)
        return 0.5 * self._inv_J(F[:, :, 0]) * acc

    def divergence_transpose(self, F: np.ndarray) -> np.ndarray:
        """``sum_i Q_xi^T F_i`` (no norm scaling) for ``F`` of shape ``(K, n_p, d, ...)``."""
        QT = (self.ref.w1d[:, None] * self.ref.D1d).T
        acc = 0.0
        for a in range(self.d):
            contra = 0.0
            for i in range(self.d):
                lam = self._lam_b(a, i, F[:, :, i])
                contra = contra + lam * F[:, :, i]
                acc = acc + lam * self._ref_scaled(QT, F[:, :, i], a)
            acc = acc + self._ref_scaled(QT, contra, a)
        return 0.5 * acc

    def _ref_scaled(self, M1: np.ndarray, v: np.ndarray, a: int) -> np.ndarray:
        # apply the tensor matrix (weights of other directions) x M1 along direction a
        w_other = self.ref.H / self.ref.w1d[self._dir_index(a)]
        w_other = w_other.reshape((1, -1) + (1,) * (v.ndim - 2))
        return w_other * self.ref_apply(M1, v, a)

    def _dir_index(self, a: int) -> np.ndarray:
        idx = np.arange(self.ref.n_p)
        return (idx // self.q**a) % self.q

    # dense single-element operators, for verification and tests
    def dense_H(self, k: int) -> np.ndarray:
        return np.diag(self.H[k])

    def dense_Q(self, k: int, i: int) -> np.ndarray:
        out = np.zeros((self.ref.n_p, self.ref.n_p))
        for a in range(self.d):
            lam = self.lam[k, :, a, i]
            Qa = self.ref.Q[a]
            out += 0.5 * (lam[:, None] * Qa + Qa * lam[None, :])
        return out

    def dense_D(self, k: int, i: int) -> np.ndarray:
        return self.dense_Q(k, i) / self.H[k][:, None]

    def dense_E(self, k: int, i: int) -> np.ndarray:
        E = np.zeros((self.ref.n_p, self.ref.n_p))
        for f in range(2 * self.d):
            idx = self.face_nodes[f]
            E[idx, idx] += self.B[k, f] * self.N[k, f, :, i]
        return E


def _metrics(x: np.ndarray, ref: ReferenceOperators, form: str):
    d = ref.d
    K = x.shape[0]
    # dx[:, :, a, i] = d x_i / d xi_a
    tmp = ElementOperators.__new__(ElementOperators)
    tmp.ref = ref
    dx = np.stack([tmp.ref_apply(ref.D1d, x, a) for a in range(d)], axis=2)
    J = np.linalg.det(np.swapaxes(dx, -1, -2)) if d > 1 else dx[:, :, 0, 0]
    lam = np.empty((K, x.shape[1], d, d))
    if d == 1:
        lam[..., 0, 0] = 1.0
    elif d == 2:
        lam[..., 0, 0] = dx[..., 1, 1]
        lam[..., 0, 1] = -dx[..., 1, 0]
        lam[..., 1, 0] = -dx[..., 0, 1]
        lam[..., 1, 1] = dx[..., 0, 0]
    elif form == "cofactor":
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            lam[..., a, :] = np.cross(dx[..., b, :], dx[..., c, :])
    else:
        for n in range(3):
            m, l = (n + 1) % 3, (n + 2) % 3
            # G_b = X_l d_b X_m - X_m d_b X_l
            G = x[..., l, None] * dx[..., :, m] - x[..., m, None] * dx[..., :, l]
            for a in range(3):
                b, c = (a + 1) % 3, (a + 2) % 3
                curl = tmp.ref_apply(ref.D1d, G[..., c], b) - tmp.ref_apply(ref.D1d, G[..., b], c)
                lam[..., a, n] = -0.5 * curl
    return J, lam


def _min_node_distance(x: np.ndarray, chunk: int = 256) -> np.ndarray:
    K, n_p, _ = x.shape
    out = np.empty(K)
    iu = np.triu_indices(n_p, 1)
    for s in range(0, K, chunk):
        xs = x[s : s + chunk]
        diff = xs[:, :, None, :] - xs[:, None, :, :]
        dist = np.sqrt(np.sum(diff**2, axis=-1))
        out[s : s + chunk] = dist[:, iu[0], iu[1]].min(axis=1) if n_p > 1 else np.inf
    return out


def compute_element_ops(mesh: Mesh, metric: str = "auto") -> ElementOperators:
    """Physical operators for every element of ``mesh``.

    Parameters
    ----------
    metric : {"auto", "cofactor", "curl"}
        Metric-term formula in 3D.  ``auto`` selects the curl form, which
        satisfies the discrete metric identities for any map; the cofactor
        (cross-product) form is kept for comparison.

    Raises
    ------
    MeshError
        If the map is not invertible at some node.
    """
    ref = mesh.ref
    if metric not in ("auto", "cofactor", "curl"):
        raise MeshError(f"unknown metric form {metric!r}")
    form = "curl" if metric == "auto" else metric
    J, lam = _metrics(mesh.x, ref, form)
    if np.any(J <= 0.0):
        k = int(np.nonzero(np.any(J <= 0.0, axis=1))[0][0])
        raise MeshError(f"element {k} has a non-positive mapping Jacobian")
    H = J * ref.H[None, :]
    d = ref.d
    n_f = ref.facets[0].nodes.size
    face_nodes = np.stack([f.nodes for f in ref.facets])
    K = mesh.n_elements
    B = np.empty((K, 2 * d, n_f))
    N = np.empty((K, 2 * d, n_f, d))
    for f, fac in enumerate(ref.facets):
        a = abs(fac.label) - 1
        side = np.sign(fac.label)
        lam_a = lam[:, fac.nodes, a, :]
        nrm = np.sqrt(np.sum(lam_a**2, axis=-1))
        B[:, f] = fac.B[None, :] * nrm
        N[:, f] = side * lam_a / nrm[..., None]
    h_min = _min_node_distance(mesh.x)
    return ElementOperators(mesh, ref, J, H, lam, face_nodes, B, N, h_min, form)


def geometry_residuals(ops: ElementOperators) -> dict[str, float]:
    """Residuals of the element-operator invariants.

    ``metric identities`` is ``max |D_xi 1|``, ``unit normals`` the
    deviation of normal lengths from one, ``quadrature`` the relative
    error of ``sum_k 1^T H_k 1`` against the domain measure, ``paired
    normals`` the largest ``|N_k + N_v|`` over matched facet nodes, and
    ``sbp`` the largest ``|Q + Q^T - E|`` over the first elements.
    """
    d = ops.d
    ones = np.ones(ops.J.shape + (1,))
    res = {}
    res["metric identities"] = float(max(np.max(np.abs(ops.deriv(ones, i))) for i in range(d)))
    res["unit normals"] = float(np.max(np.abs(np.sqrt(np.sum(ops.N**2, axis=-1)) - 1.0)))
    res["quadrature"] = abs(float(ops.H.sum()) - ops.mesh.volume) / ops.mesh.volume
    pair = 0.0
    coord = 0.0
    period = ops.mesh.hi - ops.mesh.lo
    for a in range(d):
        nb = ops.neighbors[:, a, 1]
        Np = ops.N[:, 2 * a + 1]
        Nm = ops.N[nb, 2 * a]
        pair = max(pair, float(np.max(np.abs(Np + Nm))))
        xp = ops.mesh.x[:, ops.face_nodes[2 * a + 1]]
        xm = ops.mesh.x[nb][:, ops.face_nodes[2 * a]]
        diff = xp - xm
        diff = diff - period * np.round(diff / period)
        coord = max(coord, float(np.max(np.abs(diff))))
    res["paired normals"] = pair
    res["facet coordinates"] = coord
    sbp = 0.0
    for k in range(min(ops.n_elements, 4)):
        for i in range(d):
            Q = ops.dense_Q(k, i)
            sbp = max(sbp, float(np.max(np.abs(Q + Q.T - ops.dense_E(k, i)))))
    res["sbp"] = sbp
    return res


def check_freestream(ops: ElementOperators, scheme=None, state=None) -> float:
    """Max residual of a uniform flow on the mesh.

    Uses the entropy-split scheme with the default gas unless a
    :class:`~entropy_split.spatial.SchemeConfig` is supplied.
    """
    from .gas import GasModel, conservative
    from .spatial import SchemeConfig, residual

    cfg = scheme if scheme is not None else SchemeConfig(gas=GasModel())
    if state is None:
        d = ops.d
        V = np.array([0.7, -0.3, 0.45])[:d]
        state = conservative(np.array(1.1), V, np.array(0.9), cfg.gas)
    u = np.broadcast_to(state, ops.J.shape + (ops.d + 2,)).copy()
    r = residual(u, 0.0, ops, cfg)
    return float(np.max(np.abs(r)))
