"""Construction of the direct and inverted Google matrices of a trade network.

Nodes are (country, product) pairs indexed product-major: node = p * n_c + c.
Transitions stay within a product (each product block is the column-normalized
money matrix); cross-product coupling enters only through the teleportation
vector, which weights products by their share of total traded volume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import EmptyDataError, ValidationError
from .trade_data import CountryRegistry, MoneyMatrixSet, ProductRegistry

DEFAULT_DAMPING = 0.5

DIRECT = "direct"
INVERTED = "inverted"


@dataclass(frozen=True, eq=False)
class GoogleMatrix:
    """Column-stochastic transition structure of one flow direction.

    ``stochastic`` already has dangling columns replaced by the
    teleportation vector, so the effective matrix is
    ``damping * stochastic + (1 - damping) * v @ ones.T``.
    """

    stochastic: sparse.csc_matrix
    damping: float
    personalization: np.ndarray
    direction: str
    countries: CountryRegistry
    products: ProductRegistry

    @property
    def n_nodes(self) -> int:
        return self.stochastic.shape[0]

    def node_of(self, country: str, product: str) -> int:
        p = self.products.index_of(product)
        c = self.countries.index_of(country)
        return p * len(self.countries) + c

    def node_pair(self, node: int) -> tuple[str, str]:
        n_c = len(self.countries)
        return self.countries.ids[node % n_c], self.products.codes[node // n_c]

    def node_label(self, node: int) -> str:
        """Compact label: two-letter actor code plus product digit (e.g. US7).

        Falls back to the full country id when two ids share a short code.
        """
        country, product = self.node_pair(node)
        return f"{self.countries.display_code(country)}{product}"

    def apply(self, x: np.ndarray) -> np.ndarray:
        """One multiplication by the effective matrix (x treated as a column)."""
        return self.damping * (self.stochastic @ x) \
            + (1.0 - self.damping) * self.personalization * x.sum()

    def effective_dense(self) -> np.ndarray:
        """Dense effective matrix; intended for node counts up to a few thousand."""
        g = self.damping * self.stochastic.toarray()
        g += (1.0 - self.damping) * self.personalization[:, None]
        return g


def personalization_vector(mm: MoneyMatrixSet) -> np.ndarray:
    """Teleportation distribution weighting each product by traded volume.

    v[(c, p)] = W_p / (n_c * W) with W_p the total traded volume of product p
    and W the grand total, uniform over countries within a product.
    """
    total = mm.total_volume()
    if total <= 0.0:
        raise EmptyDataError("zero total trade volume")
    n_c = mm.n_countries
    weights = np.array([m.sum() for m in mm.matrices], dtype=float)
    v = np.repeat(weights / (n_c * total), n_c)
    return v


def build_google(mm: MoneyMatrixSet, direction: str = DIRECT,
                 damping: float = DEFAULT_DAMPING) -> GoogleMatrix:
    """Build the Google matrix of the direct or inverted trade flow.

    Each product block is the money matrix (transposed for the inverted
    flow) with every column of outgoing links normalized to unity. Columns
    with no outgoing flow are replaced by the personalization vector.
    """
    if not 0.0 < damping <= 1.0:
        raise ValidationError(f"damping must be in (0, 1], got {damping}")
    if direction not in (DIRECT, INVERTED):
        raise ValidationError(f"direction must be {DIRECT!r} or {INVERTED!r}")
    if mm.n_countries == 0 or mm.n_products == 0 or mm.total_volume() <= 0.0:
        raise EmptyDataError("empty money matrix set")

    v = personalization_vector(mm)
    blocks = []
    for m in mm.matrices:
        flow = (m.T if direction == INVERTED else m).tocsc()
        colsum = np.asarray(flow.sum(axis=0)).ravel()
        scale = np.divide(1.0, colsum, out=np.zeros_like(colsum), where=colsum > 0)
        blocks.append(flow @ sparse.diags(scale))
    s = sparse.block_diag(blocks, format="csc")

    colsum = np.asarray(s.sum(axis=0)).ravel()
    dangling = np.flatnonzero(colsum == 0.0)
    if dangling.size:
        n = s.shape[0]
        rows = np.tile(np.flatnonzero(v), dangling.size)
        cols = np.repeat(dangling, np.count_nonzero(v))
        data = np.tile(v[v != 0], dangling.size)
        patch = sparse.coo_matrix((data, (rows, cols)), shape=s.shape)
        s = (s + patch.tocsc()).tocsc()
    s.sort_indices()
    return GoogleMatrix(s, float(damping), v, direction, mm.countries, mm.products)


def write_matrix_dump(g: GoogleMatrix, coord_path, sidecar_path) -> None:
    """Dump the stochastic part as `row col value` triples plus a JSON sidecar.

    Triples are zero-based and sorted row-major; the sidecar carries the
    node index (country, product per node), damping, and teleportation
    vector needed to rebuild the effective matrix.
    """
    coo = g.stochastic.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(coord_path, "w", encoding="utf-8") as fh:
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}\n")
    sidecar = {
        "direction": g.direction,
        "damping": g.damping,
        "node_index": [list(g.node_pair(i)) for i in range(g.n_nodes)],
        "personalization": [float(x) for x in g.personalization],
    }
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
