"""Diagonal-norm summation-by-parts operators on tensor-product LGL nodes.

The one-dimensional building block collocates the Legendre-Gauss-Lobatto
(LGL) quadrature with a Lagrange differentiation matrix.  Operators in two
and three dimensions are Kronecker products with direction 1 varying
fastest.  Every operator carries its facet data (node map, quadrature
weights and outward normals) so that ``E = sum R^T B N R``.

A plain-text exchange format allows operators built elsewhere (for example
multidimensional simplex operators) to be imported and verified.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Facet",
    "ReferenceOperators",
    "VerificationReport",
    "OperatorFormatError",
    "lgl_nodes_weights",
    "lagrange_diff_matrix",
    "lagrange_interp_matrix",
    "build_lgl_1d",
    "build_reference_ops",
    "verify_operators",
    "export_operators",
    "import_operators",
]

VERIFY_TOL = 1e-12


class OperatorFormatError(ValueError):
    """Raised when an operator file cannot be parsed."""


def lgl_nodes_weights(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1].

    Newton iteration on ``(1 - x^2) P_p'(x)`` started from the
    Chebyshev-Gauss-Lobatto points.

    Parameters
    ----------
    p : int
        Polynomial degree; the rule has ``p + 1`` points.

    Returns
    -------
    x, w : ndarray
        Ascending nodes and the matching weights.
    """
    if p < 1:
        raise ValueError("LGL rule needs p >= 1")
    n = p + 1
    x = -np.cos(np.pi * np.arange(n) / p)
    vander = np.zeros((n, n))
    x_old = np.full(n, 2.0)
    for _ in range(100):
        if np.max(np.abs(x - x_old)) <= 1e-16:
            break
        x_old = x.copy()
        vander[:, 0] = 1.0
        vander[:, 1] = x
        for k in range(2, n):
            vander[:, k] = ((2 * k - 1) * x * vander[:, k - 1] - (k - 1) * vander[:, k - 2]) / k
        x = x_old - (x * vander[:, p] - vander[:, p - 1]) / (n * vander[:, p])
    # symmetrize to remove round-off bias
    x = 0.5 * (x - x[::-1])
    vander[:, 0] = 1.0
    vander[:, 1] = x
    for k in range(2, n):
        vander[:, k] = ((2 * k - 1) * x * vander[:, k - 1] - (k - 1) * vander[:, k - 2]) / k
    w = 2.0 / (p * n * vander[:, p] ** 2)
    w = 0.5 * (w + w[::-1])
    return x, w


def _barycentric_weights(x: np.ndarray) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_diff_matrix(x: np.ndarray) -> np.ndarray:
    """Differentiation matrix of the Lagrange interpolant through ``x``."""
    lam = _barycentric_weights(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (lam[None, :] / lam[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    # negative sum trick keeps D @ 1 = 0 to round-off
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def lagrange_interp_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix evaluating the interpolant through nodes ``x`` at points ``y``."""
    lam = _barycentric_weights(x)
    diff = y[:, None] - x[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0.0)
    diff[exact] = 1.0
    M = lam[None, :] / diff
    M /= M.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    M[rows] = exact[rows].astype(float)
    return M


def build_lgl_1d(p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-dimensional LGL SBP operator.

    Returns
    -------
    x : ndarray
        Nodes on [-1, 1].
    H : ndarray
        Diagonal of the norm matrix (the LGL weights).
    D : ndarray
        Differentiation matrix, exact for polynomials of degree ``p``.

    Examples
    --------
    >>> x, H, D = build_lgl_1d(1)
    >>> D
    array([[-0.5,  0.5],
           [-0.5,  0.5]])
    """
    if not 1 <= p <= 10:
        raise ValueError(f"degree p={p} outside supported range 1..10")
    x, w = lgl_nodes_weights(p)
    return x, w, lagrange_diff_matrix(x)


@dataclass
class Facet:
    """Facet data of a reference operator.

    Attributes
    ----------
    nodes : ndarray of int
        Volume indices of the facet nodes (the rows selected by ``R``).
    B : ndarray
        Facet quadrature weights.
    N : ndarray, shape (d, n_f)
        Outward unit normal components at each facet node.
    label : int
        Signed direction ``+-a`` for tensor faces; free tag otherwise.
    """

    nodes: np.ndarray
    B: np.ndarray
    N: np.ndarray
    label: int = 0


@dataclass
class ReferenceOperators:
    """SBP operator on a reference element.

    ``D`` has shape ``(d, n_p, n_p)`` and ``H`` stores the diagonal of the
    norm.  For tensor-product operators the one-dimensional pieces are
    kept in ``x1d``, ``w1d`` and ``D1d`` for fast sum-factorized kernels.
    """

    p: int
    d: int
    nodes: np.ndarray
    H: np.ndarray
    D: np.ndarray
    facets: list[Facet]
    x1d: np.ndarray | None = None
    w1d: np.ndarray | None = None
    D1d: np.ndarray | None = None
    _E: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_p(self) -> int:
        return self.H.size

    @property
    def q(self) -> int:
        """Nodes per direction for tensor operators."""
        return self.p + 1

    @property
    def is_tensor(self) -> bool:
        return self.D1d is not None

    @property
    def Q(self) -> np.ndarray:
        return self.H[None, :, None] * self.D

    @property
    def E(self) -> np.ndarray:
        """Boundary operators ``E_i = sum_gamma R^T B N_i R``."""
        if self._E is None:
            E = np.zeros((self.d, self.n_p, self.n_p))
            for f in self.facets:
                for i in range(self.d):
                    E[i, f.nodes, f.nodes] += f.B * f.N[i]
            self._E = E
        return self._E

    @property
    def S(self) -> np.ndarray:
        return self.Q - 0.5 * self.E


def _kron_list(mats: list[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def tensor_index(d: int, q: int) -> np.ndarray:
    """Multi-indices ``(i_1, ..., i_d)`` of tensor nodes, direction 1 fastest."""
    grids = np.indices((q,) * d).reshape(d, -1)[::-1]
    return grids.T


def build_reference_ops(p: int, d: int) -> ReferenceOperators:
    """Tensor-product LGL operator on ``[-1, 1]^d``.

    Facets are ordered ``(-x1, +x1, -x2, +x2, ...)``.
    """
    if d not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    x, w, D1 = build_lgl_1d(p)
    q = p + 1
    eye = np.eye(q)
    idx = tensor_index(d, q)
    nodes = x[idx]
    H = np.prod(w[idx], axis=1)
    D = np.empty((d, q**d, q**d))
    for a in range(d):
        # kron order is slowest direction first
        mats = [D1 if b == a else eye for b in reversed(range(d))]
        D[a] = _kron_list(mats)
    facets = []
    for a in range(d):
        others = [b for b in range(d) if b != a]
        for side, end in ((-1, 0), (1, q - 1)):
            sel = np.nonzero(idx[:, a] == end)[0]
            B = np.prod(w[idx[sel][:, others]], axis=1) if others else np.ones(1)
            N = np.zeros((d, sel.size))
            N[a] = side
            facets.append(Facet(sel, B, N, label=side * (a + 1)))
    return ReferenceOperators(p, d, nodes, H, D, facets, x, w, D1)


@dataclass
class VerificationReport:
    """Residuals of the SBP property checks; passes when all are small."""

    residuals: dict[str, float]
    tol: float = VERIFY_TOL
    messages: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.messages and all(v <= self.tol for v in self.residuals.values())

    def failures(self) -> list[str]:
        out = list(self.messages)
        out += [f"{k}: {v:.3e} > {self.tol:.0e}" for k, v in self.residuals.items() if v > self.tol]
        return out

    def __str__(self) -> str:
        lines = [f"{k:>24s}  {v:.3e}" for k, v in self.residuals.items()]
        lines += self.messages
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _monomials(d: int, degree: int):
    for exps in itertools.product(range(degree + 1), repeat=d):
        if sum(exps) <= degree:
            yield exps


def _eval_monomial(x: np.ndarray, exps) -> np.ndarray:
    return np.prod(x ** np.asarray(exps, dtype=float), axis=1)


def _diff_monomial(x: np.ndarray, exps, i: int) -> np.ndarray:
    e = list(exps)
    if e[i] == 0:
        return np.zeros(x.shape[0])
    c = e[i]
    e[i] -= 1
    return c * _eval_monomial(x, e)


def _facet_exact_degree(ops: ReferenceOperators) -> int:
    # LGL facet rules have p + 1 points per direction
    return 2 * ops.p - 1 if ops.is_tensor else 2 * ops.p


def verify_operators(ops: ReferenceOperators, tol: float = VERIFY_TOL) -> VerificationReport:
    """Check the SBP properties of ``ops`` numerically.

    Checks positivity of ``H``, polynomial exactness of ``D`` and ``H``,
    that ``Q + Q^T`` is diagonal and equals the facet decomposition of
    ``E``, and the facet quadrature accuracy.
    """
    res: dict[str, float] = {}
    msgs: list[str] = []
    if np.any(ops.H <= 0):
        msgs.append("H is not positive definite")
    scale = max(1.0, float(np.max(np.abs(ops.nodes))) if ops.nodes.size else 1.0)
    # polynomial exactness of D
    err = 0.0
    for exps in _monomials(ops.d, ops.p):
        v = _eval_monomial(ops.nodes, exps)
        for i in range(ops.d):
            err = max(err, float(np.max(np.abs(ops.D[i] @ v - _diff_monomial(ops.nodes, exps, i)))))
    res["D exactness"] = err / scale ** max(ops.p - 1, 0)
    # H quadrature on the reference cube, degree 2p - 1
    err = 0.0
    deg = 2 * ops.p - 1
    if ops.is_tensor:
        for exps in _monomials(ops.d, deg):
            exact = np.prod([0.0 if e % 2 else 2.0 / (e + 1) for e in exps])
            err = max(err, abs(float(ops.H @ _eval_monomial(ops.nodes, exps)) - exact))
        res["H quadrature"] = err
    QQt = ops.Q + np.transpose(ops.Q, (0, 2, 1))
    off = QQt.copy()
    for i in range(ops.d):
        np.fill_diagonal(off[i], 0.0)
    res["E diagonal"] = float(np.max(np.abs(off)))
    res["Q + Q^T - E"] = float(np.max(np.abs(QQt - ops.E)))
    res["D 1"] = float(np.max(np.abs(ops.D @ np.ones(ops.n_p))))
    # facet rules: sum of B N_i x^k against the boundary integral of x^k n_i
    if ops.is_tensor and ops.d > 1:
        err = 0.0
        fdeg = _facet_exact_degree(ops)
        for f in ops.facets:
            a = abs(f.label) - 1
            others = [b for b in range(ops.d) if b != a]
            for exps in _monomials(ops.d - 1, fdeg):
                full = np.zeros(ops.d, dtype=int)
                full[others] = exps
                v = _eval_monomial(ops.nodes[f.nodes], full)
                exact = np.prod([0.0 if e % 2 else 2.0 / (e + 1) for e in exps])
                err = max(err, abs(float(f.B @ v) - exact))
        res["facet quadrature"] = err
    for f in ops.facets:
        nrm = np.sqrt(np.sum(f.N**2, axis=0))
        if np.any(np.abs(nrm - 1.0) > 1e-12):
            msgs.append("facet normals are not unit vectors")
            break
    return VerificationReport(res, tol, msgs)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def export_operators(ops: ReferenceOperators, path: str | Path) -> None:
    """Write ``ops`` in the plain-text exchange format.

    Layout: header ``sbp p d n_p n_facets``, a ``nodes`` block, an ``H``
    block, one ``D i`` block per direction (row-major), then per facet a
    ``facet label n_f`` line followed by the node indices, the weights and
    one line of normal components per direction.  Floats use 17
    significant digits so a round trip is exact.
    """
    lines = [f"sbp {ops.p} {ops.d} {ops.n_p} {len(ops.facets)}", "nodes"]
    lines += [" ".join(_fmt(c) for c in row) for row in ops.nodes]
    lines += ["H", " ".join(_fmt(h) for h in ops.H)]
    for i in range(ops.d):
        lines.append(f"D {i + 1}")
        lines += [" ".join(_fmt(v) for v in row) for row in ops.D[i]]
    for f in ops.facets:
        lines.append(f"facet {f.label} {f.nodes.size}")
        lines.append(" ".join(str(int(j)) for j in f.nodes))
        lines.append(" ".join(_fmt(b) for b in f.B))
        lines += [" ".join(_fmt(v) for v in f.N[i]) for i in range(ops.d)]
    Path(path).write_text("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, text: str):
        self.lines = [ln.split("#")[0].strip() for ln in text.splitlines()]
        self.lines = [ln for ln in self.lines if ln]
        self.pos = 0

    def next(self, what: str) -> list[str]:
        if self.pos >= len(self.lines):
            raise OperatorFormatError(f"unexpected end of file while reading {what}")
        self.pos += 1
        return self.lines[self.pos - 1].split()

    def floats(self, what: str, n: int) -> np.ndarray:
        tok = self.next(what)
        if len(tok) != n:
            raise OperatorFormatError(f"line {self.pos}: expected {n} values for {what}, got {len(tok)}")
        try:
            return np.array([float(t) for t in tok])
        except ValueError as exc:
            raise OperatorFormatError(f"line {self.pos}: bad number in {what}") from exc

    def keyword(self, word: str) -> list[str]:
        tok = self.next(word)
        if tok[0] != word:
            raise OperatorFormatError(f"line {self.pos}: expected '{word}', found '{tok[0]}'")
        return tok[1:]


def import_operators(path: str | Path, verify: bool = True) -> ReferenceOperators:
    """Read an operator written by :func:`export_operators`.

    Raises
    ------
    OperatorFormatError
        On malformed input, or when ``verify`` is set and the operator
        fails :func:`verify_operators`.
    """
    rd = _Reader(Path(path).read_text())
    head = rd.keyword("sbp")
    try:
        p, d, n_p, n_fac = (int(t) for t in head)
    except ValueError as exc:
        raise OperatorFormatError("header must be 'sbp p d n_p n_facets'") from exc
    rd.keyword("nodes")
    nodes = np.array([rd.floats("nodes", d) for _ in range(n_p)])
    rd.keyword("H")
    H = rd.floats("H", n_p)
    D = np.empty((d, n_p, n_p))
    for i in range(d):
        rd.keyword("D")
        for r in range(n_p):
            D[i, r] = rd.floats(f"D {i + 1}", n_p)
    facets = []
    for _ in range(n_fac):
        tok = rd.keyword("facet")
        label, n_f = int(tok[0]), int(tok[1])
        idx = np.array([int(t) for t in rd.next("facet nodes")])
        if idx.size != n_f or np.any(idx < 0) or np.any(idx >= n_p):
            raise OperatorFormatError(f"line {rd.pos}: invalid facet node list")
        B = rd.floats("B", n_f)
        N = np.array([rd.floats("N", n_f) for _ in range(d)])
        facets.append(Facet(idx, B, N, label))
    ops = ReferenceOperators(p, d, nodes, H, D, facets)
    if verify:
        rep = verify_operators(ops)
        if not rep.passed:
            raise OperatorFormatError("operator failed verification: " + "; ".join(rep.failures()))
    return ops
