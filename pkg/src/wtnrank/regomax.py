"""Reduced Google matrix over a node subset, with direct/indirect decomposition.

For a partition of the nodes into a reduced set r and a scattering set s,
the reduced matrix G_R = G_rr + G_rs (I - G_ss)^-1 G_sr captures every
direct and indirect transition between reduced nodes. Deflating the leading
eigenmode of the scattering block splits the indirect part into a
rank-one projector term and a rapidly converging series of true multi-step
pathways.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, ValidationError
from .google_matrix import DIRECT, GoogleMatrix

SERIES_TOL = 1e-12
SERIES_MAX_TERMS = 10_000
EIGEN_TOL = 1e-13
EIGEN_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class ReducedGoogleMatrix:
    """Dense reduced matrix and its decomposition g_r = g_rr + g_pr + g_qr.

    ``lambda_c`` is the leading eigenvalue of the scattering block (None
    when the scattering set is empty). ``residuals`` records the linear
    solve, eigenvector, series tail, and closure defects of the build.
    """

    direction: str
    nodes: tuple[tuple[str, str], ...]
    labels: tuple[str, ...]
    g_r: np.ndarray
    g_rr: np.ndarray
    g_pr: np.ndarray
    g_qr: np.ndarray
    lambda_c: float | None
    series_terms: int
    residuals: dict[str, float]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def reduce(g: GoogleMatrix, selection) -> ReducedGoogleMatrix:
    """Reduce the Google matrix onto the selected (country, product) nodes.

    The reduced matrix is obtained from one LU factorization of
    (I - G_ss) and one solve per reduced node, which is exact up to solver
    precision; the series form enters only the pathway component g_qr,
    where the leading scattering eigenmode has been deflated.
    """
    nodes = [(c, p) for c, p in selection]
    if not nodes:
        raise ValidationError("empty node selection")
    idx = np.array([g.node_of(c, p) for c, p in nodes], dtype=np.int64)
    if len(set(idx.tolist())) != len(nodes):
        raise ValidationError("node selection contains duplicates")
    labels = tuple(g.node_label(i) for i in idx)

    full = g.effective_dense()
    n = full.shape[0]
    scatter = np.setdiff1d(np.arange(n), idx)
    g_rr = full[np.ix_(idx, idx)]

    if scatter.size == 0:
        zero = np.zeros_like(g_rr)
        return ReducedGoogleMatrix(
            g.direction, tuple(nodes), labels, g_rr.copy(), g_rr, zero,
            zero.copy(), None, 0,
            {"solve": 0.0, "eigen": 0.0, "series_tail": 0.0, "closure": 0.0},
        )

    g_rs = full[np.ix_(idx, scatter)]
    g_sr = full[np.ix_(scatter, idx)]
    g_ss = full[np.ix_(scatter, scatter)]

    system = np.eye(scatter.size) - g_ss
    lu, piv = linalg.lu_factor(system)
    paths = linalg.lu_solve((lu, piv), g_sr)
    if not np.all(np.isfinite(paths)):  # impossible at damping < 1, guarded anyway
        raise ConvergenceError("(I - G_ss) is singular")
    solve_residual = float(np.abs(system @ paths - g_sr).max())
    g_r = g_rr + g_rs @ paths

    lam, psi_r, psi_l, eigen_residual = _leading_eigenpair(g_ss)
    weight = float(psi_l @ psi_r)
    if weight <= 0.0:
        raise ConvergenceError("degenerate scattering eigenvectors")
    projector = np.outer(psi_r, psi_l) / weight
    g_pr = g_rs @ (projector @ g_sr) / (1.0 - lam)

    def deflate(m):
        return m - np.outer(psi_r, psi_l @ m) / weight

    term = deflate(g_sr)
    total = term.copy()
    series_terms = 1
    tail = float(np.abs(term).sum())
    while tail > SERIES_TOL and series_terms < SERIES_MAX_TERMS:
        term = deflate(g_ss @ term)
        total += term
        series_terms += 1
        tail = float(np.abs(term).sum())
    if tail > SERIES_TOL:
        raise ConvergenceError(
            f"pathway series above {SERIES_TOL} after {series_terms} terms",
            residual=tail, iterations=series_terms)
    g_qr = g_rs @ total

    closure = float(np.abs(g_rr + g_pr + g_qr - g_r).max())
    if g_r.min() < -1e-9:
        raise ConvergenceError(f"reduced matrix has negative entry {g_r.min():.3e}")
    return ReducedGoogleMatrix(
        g.direction, tuple(nodes), labels, g_r, g_rr, g_pr, g_qr,
        float(lam), series_terms,
        {"solve": solve_residual, "eigen": eigen_residual,
         "series_tail": tail, "closure": closure},
    )


def _leading_eigenpair(m: np.ndarray):
    """Perron eigenvalue and right/left eigenvectors by power iteration."""
    lam_r, psi_r, res_r = _power_iteration(m)
    _, psi_l, res_l = _power_iteration(m.T)
    return lam_r, psi_r, psi_l, max(res_r, res_l)


def _power_iteration(m: np.ndarray):
    n = m.shape[0]
    x = np.full(n, 1.0 / n)
    lam = 0.0
    for iteration in range(1, EIGEN_MAX_ITER + 1):
        y = m @ x
        lam = float(y.sum())  # L1 growth of a nonnegative iterate
        if lam <= 0.0:
            return 0.0, x, 0.0
        y /= lam
        delta = float(np.abs(y - x).sum())
        x = y
        if delta <= EIGEN_TOL:
            residual = float(np.abs(m @ x - lam * x).sum())
            return lam, x, residual
    raise ConvergenceError(
        f"scattering eigenvector not converged in {EIGEN_MAX_ITER} iterations",
        residual=delta, iterations=EIGEN_MAX_ITER)


def strongest_links(m, k: int) -> list[tuple[int, int, float]]:
    """Per node, its k strongest outgoing links (largest off-diagonal column
    entries), as (source, target, weight) triples.

    Ties break toward the smaller target index; nodes with fewer than k
    nonzero off-diagonal entries contribute what they have.
    """
    if k < 1:
        raise ValidationError(f"k must be at least 1, got {k}")
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("expected a square matrix")
    edges = []
    for j in range(a.shape[1]):
        column = [(i, float(a[i, j])) for i in range(a.shape[0])
                  if i != j and a[i, j] != 0.0]
        column.sort(key=lambda t: (-t[1], t[0]))
        edges.extend((j, i, w) for i, w in column[:k])
    return edges


def write_matrix_csv(matrix: np.ndarray, labels, dest) -> None:
    """Dense labeled matrix dump; entry (row, col) is the col -> row weight."""
    own = not hasattr(dest, "write")
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["node", *labels])
        for label, row in zip(labels, np.asarray(matrix)):
            writer.writerow([label, *[repr(float(x)) for x in row]])
    finally:
        if own:
            stream.close()


def write_dot(edges, labels, direction: str, dest, name: str = "trade") -> None:
    """Graphviz export of a strongest-links edge list.

    The header comment states the arrow semantics, which depend on the
    flow direction the reduced matrix was built from.
    """
    semantics = "B imports from A" if direction == DIRECT else "B exports to A"
    own = not hasattr(dest, "write")
    stream = open(dest, "w", encoding="utf-8") if own else dest
    try:
        stream.write(f"// strongest outgoing links of the reduced {direction} matrix\n")
        stream.write(f"// an arrow A -> B means: {semantics}\n")
        stream.write(f"digraph {name} {{\n")
        for node in labels:
            stream.write(f'  "{node}";\n')
        for src, dst, weight in edges:
            stream.write(f'  "{labels[src]}" -> "{labels[dst]}" [weight={weight!r}];\n')
        stream.write("}\n")
    finally:
        if own:
            stream.close()
