"""Longitudinal buyer-seller networks.

A panel is a fixed firm universe observed over several years. Each year holds
two independently reported binary adjacency matrices:

* ``G`` (downstream): ``G[i, j] = 1`` when firm ``i`` reports that ``j`` buys
  from it.
* ``H`` (upstream): the analogous supplier report. ``H`` is *not* the
  transpose of ``G`` and nothing here assumes it is.

Matrices are stored as CSR with sorted column indices and unit float data.
Transposes are materialized alongside so both ``A @ x`` and ``A.T @ x`` are
row-major streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import PanelFormatError

__all__ = [
    "IngestReport",
    "LinkDiff",
    "NeighborGrowthStats",
    "PanelNetwork",
    "Snapshot",
    "SpectralBound",
    "adjacency",
    "link_diff",
    "matrix_spectral_bound",
    "neighbor_growth_stats",
    "spectral_bound",
    "spmv",
]


def adjacency(rows, cols, n: int) -> sp.csr_matrix:
    """Binary CSR matrix from edge endpoint arrays.

    Duplicates collapse to a single edge and self-loops are dropped.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    if rows.shape != cols.shape:
        raise ValueError("rows and cols differ in length")
    if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise ValueError(f"edge index outside [0, {n})")
    keep = rows != cols
    key = np.unique(rows[keep] * n + cols[keep])
    r, c = np.divmod(key, n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    np.cumsum(indptr, out=indptr)
    # np.unique sorts by (row, col), so indices come out row-major and sorted
    m = sp.csr_matrix((np.ones(key.size), c.astype(np.int32), indptr), shape=(n, n))
    m.has_sorted_indices = True
    return m


def _canonical(a, n: int) -> sp.csr_matrix:
    if sp.issparse(a):
        if a.shape != (n, n):
            raise ValueError(f"adjacency has shape {a.shape}, expected {(n, n)}")
        coo = a.tocoo()
        nz = coo.data != 0
        return adjacency(coo.row[nz], coo.col[nz], n)
    a = np.asarray(a)
    if a.ndim == 2 and a.shape == (n, n):
        r, c = np.nonzero(a)
        return adjacency(r, c, n)
    if a.ndim == 2 and a.shape[1] == 2:
        return adjacency(a[:, 0], a[:, 1], n)
    if a.size == 0:
        return adjacency([], [], n)
    raise ValueError("expected sparse matrix, dense n x n array or (k, 2) edge array")


def _check_binary(a: sp.csr_matrix, n: int, name: str) -> None:
    if a.shape != (n, n):
        raise PanelFormatError(f"{name} has shape {a.shape}, expected {(n, n)}")
    if a.nnz and not np.all(a.data == 1.0):
        raise PanelFormatError(f"{name} is not binary")
    if a.diagonal().any():
        raise PanelFormatError(f"{name} has self-loops")


@dataclass(frozen=True)
class Snapshot:
    """The pair (G, H) for one year, with materialized transposes."""

    G: sp.csr_matrix
    H: sp.csr_matrix
    GT: sp.csr_matrix = field(init=False, repr=False, compare=False)
    HT: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("G", "H"):
            a = getattr(self, name)
            if not a.has_sorted_indices:
                a = a.sorted_indices()
                object.__setattr__(self, name, a)
            t = a.T.tocsr()
            t.sort_indices()
            object.__setattr__(self, name + "T", t)

    @property
    def n(self) -> int:
        return self.G.shape[0]

    def edges(self, relation: str) -> np.ndarray:
        """Edge array of shape (k, 2), row-major sorted."""
        a = self.G if relation == "G" else self.H
        rows = np.repeat(np.arange(a.shape[0]), np.diff(a.indptr))
        return np.column_stack([rows, a.indices]).astype(np.int64)

    def union_undirected(self) -> sp.csr_matrix:
        u = (self.G + self.GT + self.H + self.HT).tocsr()
        u.data[:] = 1.0
        u.sort_indices()
        return u


@dataclass
class IngestReport:
    rows: int = 0
    duplicates: int = 0
    self_loops: int = 0


@dataclass
class PanelNetwork:
    """Yearly snapshots of (G, H) over a constant firm universe.

    Parameters
    ----------
    firm_ids : list of str
        External firm identifiers; position is the dense index.
    years : list of int
        Strictly increasing year labels.
    snapshots : dict
        ``year -> Snapshot``.
    """

    firm_ids: list
    years: list
    snapshots: dict
    ingest_report: IngestReport | None = field(default=None, compare=False)

    def __post_init__(self):
        self.firm_ids = [str(f) for f in self.firm_ids]
        self.years = [int(y) for y in self.years]
        n = len(self.firm_ids)
        if n < 1:
            raise PanelFormatError("firm universe is empty")
        if len(set(self.firm_ids)) != n:
            raise PanelFormatError("duplicate firm identifiers")
        if any(b <= a for a, b in zip(self.years, self.years[1:])):
            raise PanelFormatError("years must be strictly increasing")
        if set(self.snapshots) != set(self.years):
            raise PanelFormatError("snapshot years do not match the year list")
        for y in self.years:
            s = self.snapshots[y]
            _check_binary(s.G, n, f"G[{y}]")
            _check_binary(s.H, n, f"H[{y}]")

    @classmethod
    def from_edges(cls, n_or_ids, yearly: Mapping[int, tuple]) -> "PanelNetwork":
        """Build from ``{year: (G_like, H_like)}``.

        Each matrix may be a sparse matrix, a dense n x n array or a (k, 2)
        edge array.
        """
        ids = [str(i) for i in range(n_or_ids)] if isinstance(n_or_ids, (int, np.integer)) else list(n_or_ids)
        n = len(ids)
        years = sorted(int(y) for y in yearly)
        snaps = {y: Snapshot(_canonical(yearly[y][0], n), _canonical(yearly[y][1], n)) for y in years}
        return cls(ids, years, snaps)

    @property
    def firm_count(self) -> int:
        return len(self.firm_ids)

    @property
    def registry(self) -> dict:
        return {f: i for i, f in enumerate(self.firm_ids)}

    def snapshot(self, year: int) -> Snapshot:
        try:
            return self.snapshots[int(year)]
        except KeyError:
            raise KeyError(f"year {year} not in panel {self.years}") from None

    def G(self, year: int) -> sp.csr_matrix:
        return self.snapshot(year).G

    def H(self, year: int) -> sp.csr_matrix:
        return self.snapshot(year).H

    def previous_year(self, year: int) -> int:
        i = self.years.index(int(year)) if int(year) in self.years else -1
        if i < 0:
            raise KeyError(f"year {year} not in panel {self.years}")
        if i == 0:
            raise ValueError(f"year {year} is the first panel year and has no predecessor")
        return self.years[i - 1]

    def nnz(self, year: int) -> tuple:
        s = self.snapshot(year)
        return s.G.nnz, s.H.nnz

    def permuted(self, perm: Sequence[int]) -> "PanelNetwork":
        """Relabel firms: new index ``perm[i]`` holds old firm ``i``."""
        perm = np.asarray(perm)
        n = self.firm_count
        ids = [None] * n
        for old, new in enumerate(perm):
            ids[new] = self.firm_ids[old]
        yearly = {}
        for y in self.years:
            s = self.snapshot(y)
            yearly[y] = tuple(adjacency(perm[e[:, 0]], perm[e[:, 1]], n) for e in (s.edges("G"), s.edges("H")))
        return PanelNetwork.from_edges(ids, yearly)

    def identical(self, other: "PanelNetwork") -> bool:
        """Bit-level equality of registry, years and CSR arrays."""
        if self.firm_ids != other.firm_ids or self.years != other.years:
            return False
        for y in self.years:
            for a, b in ((self.G(y), other.G(y)), (self.H(y), other.H(y))):
                if not (
                    np.array_equal(a.indptr, b.indptr)
                    and np.array_equal(a.indices, b.indices)
                    and np.array_equal(a.data, b.data)
                ):
                    return False
        return True


# ---------------------------------------------------------------------------
# link renewal


@dataclass
class LinkDiff:
    """Edges formed and severed between ``year - 1`` and ``year``.

    Edge lists are int arrays of shape (k, 2) holding (row, col).
    """

    year: int
    formed_G: np.ndarray
    severed_G: np.ndarray
    formed_H: np.ndarray
    severed_H: np.ndarray
    persisting_G: int
    persisting_H: int

    @property
    def counts(self) -> dict:
        return {
            "formed_G": len(self.formed_G),
            "severed_G": len(self.severed_G),
            "formed_H": len(self.formed_H),
            "severed_H": len(self.severed_H),
        }

    def formed(self) -> np.ndarray:
        return np.vstack([self.formed_G, self.formed_H])

    def severed(self) -> np.ndarray:
        return np.vstack([self.severed_G, self.severed_H])


def _edge_keys(a: sp.csr_matrix) -> np.ndarray:
    n = a.shape[0]
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(a.indptr))
    return rows * n + a.indices


def _keys_to_edges(keys, n):
    r, c = np.divmod(keys, n)
    return np.column_stack([r, c]).astype(np.int64).reshape(-1, 2)


def link_diff(panel: PanelNetwork, year_t: int) -> LinkDiff:
    """Exact set difference of edge sets between consecutive panel years."""
    prev = panel.previous_year(year_t)
    n = panel.firm_count
    out = {}
    persisting = {}
    for rel in ("G", "H"):
        now = _edge_keys(getattr(panel.snapshot(year_t), rel))
        before = _edge_keys(getattr(panel.snapshot(prev), rel))
        out["formed_" + rel] = _keys_to_edges(np.setdiff1d(now, before, assume_unique=True), n)
        out["severed_" + rel] = _keys_to_edges(np.setdiff1d(before, now, assume_unique=True), n)
        persisting[rel] = int(np.intersect1d(now, before, assume_unique=True).size)
    return LinkDiff(int(year_t), persisting_G=persisting["G"], persisting_H=persisting["H"], **out)


# ---------------------------------------------------------------------------
# neighborhood growth around renewed links


@dataclass
class NeighborGrowthStats:
    """Sign composition of growth around formed or severed links.

    ``proportion_positive[k - 1]`` is the share of order-k nodes with strictly
    positive growth; ``node_count[k - 1]`` the pooled number of order-k nodes.
    Orders with no nodes report NaN.
    """

    year: int
    type: str
    proportion_positive: tuple
    proportion_negative: tuple
    node_count: tuple
    link_count: int


def _layers(nbrs, sources, depth):
    seen = set(sources)
    frontier = list(seen)
    layers = [frontier]
    for _ in range(depth - 1):
        nxt = []
        for u in frontier:
            for v in nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        layers.append(nxt)
        frontier = nxt
    return layers


def neighbor_growth_stats(panel: PanelNetwork, growth_panel, year_t: int, max_order: int = 3) -> list:
    """Growth-sign proportions at orders 1..max_order around renewed links.

    Order-1 nodes are the two endpoints of a formed or severed link; order-k
    nodes sit at undirected distance k-1 from that endpoint pair on the union
    of G, H and their transposes at ``year_t``. Nodes are pooled over all
    links (G and H together) of the given type. Zero growth counts as neither
    sign.

    Returns two records, ``type='severed'`` then ``type='formed'``.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    diff = link_diff(panel, year_t)
    g = np.asarray(growth_panel.at(year_t), dtype=float)
    if g.shape != (panel.firm_count,):
        raise ValueError("growth vector length differs from firm count")
    u = panel.snapshot(year_t).union_undirected()
    nbrs = [u.indices[u.indptr[i]:u.indptr[i + 1]].tolist() for i in range(u.shape[0])]
    pos_flag = g > 0
    neg_flag = g < 0
    records = []
    for kind, links in (("severed", diff.severed()), ("formed", diff.formed())):
        total = np.zeros(max_order, dtype=np.int64)
        pos = np.zeros(max_order, dtype=np.int64)
        neg = np.zeros(max_order, dtype=np.int64)
        for i, j in links.tolist():
            for k, layer in enumerate(_layers(nbrs, (i, j), max_order)):
                if layer:
                    idx = np.fromiter(layer, dtype=np.int64, count=len(layer))
                    total[k] += idx.size
                    pos[k] += np.count_nonzero(pos_flag[idx])
                    neg[k] += np.count_nonzero(neg_flag[idx])
        with np.errstate(invalid="ignore", divide="ignore"):
            pp = np.where(total > 0, pos / np.maximum(total, 1), np.nan)
            pn = np.where(total > 0, neg / np.maximum(total, 1), np.nan)
        records.append(
            NeighborGrowthStats(
                year=int(year_t),
                type=kind,
                proportion_positive=tuple(float(x) for x in pp),
                proportion_negative=tuple(float(x) for x in pn),
                node_count=tuple(int(x) for x in total),
                link_count=len(links),
            )
        )
    return records


# ---------------------------------------------------------------------------
# kernels


def spmv(adjacency, coefficient: float, vector, out=None) -> np.ndarray:
    """``out += coefficient * adjacency @ vector``.

    With ``out=None`` a zero vector is used. The product is the sequential CSR
    row loop, so accumulation order is fixed and results are reproducible.
    """
    x = np.asarray(vector, dtype=float)
    if adjacency.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {adjacency.shape} @ {x.shape}")
    if out is None:
        out = np.zeros((adjacency.shape[0],) + x.shape[1:])
    elif out.shape != (adjacency.shape[0],) + x.shape[1:]:
        raise ValueError(f"output shape {out.shape} does not match product")
    if coefficient != 0 and adjacency.nnz:
        out += coefficient * (adjacency @ x)
    return out


@dataclass(frozen=True)
class SpectralBound:
    """Spectral radius diagnostics for M = beta_G G + beta_H H.

    ``estimate`` is a power-iteration estimate, ``row_sum_bound`` the max
    absolute row sum (an upper bound on the radius). ``converges`` is the
    Neumann guard, ``estimate < 1``.
    """

    estimate: float
    row_sum_bound: float
    converges: bool
    iterations: int


def matrix_spectral_bound(G, H, beta_G: float, beta_H: float, maxiter: int = 500, tol: float = 1e-10) -> SpectralBound:
    """Power iteration on |M| started from the all-ones vector.

    Negative coefficients are replaced by their absolute values; since
    rho(M) <= rho(|M|) the guard stays conservative. Each step uses a
    two-step ratio, which settles on bipartite (period-2) structures such as a
    single reciprocal pair.
    """
    for b in (beta_G, beta_H):
        if not np.isfinite(b):
            raise ValueError("coefficients must be finite")
    a, b = abs(float(beta_G)), abs(float(beta_H))
    n = G.shape[0]
    rows = a * np.asarray(G.sum(axis=1)).ravel() + b * np.asarray(H.sum(axis=1)).ravel()
    upper = float(rows.max()) if n else 0.0
    if upper == 0.0:
        return SpectralBound(0.0, 0.0, True, 0)

    def apply(v):
        return a * (G @ v) + b * (H @ v)

    x = np.ones(n)
    est = upper
    it = 0
    for it in range(1, maxiter + 1):
        x2 = apply(apply(x))
        top = np.abs(x2).max()
        if top == 0.0:
            est = 0.0
            break
        new = float(np.sqrt(top / np.abs(x).max()))
        x = x2 / top
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    est = min(est, upper)
    return SpectralBound(est, upper, est < 1.0, it)


def spectral_bound(panel: PanelNetwork, year: int, beta_G: float, beta_H: float, **kwargs) -> SpectralBound:
    """Spectral guard for ``beta_G * G_year + beta_H * H_year``."""
    s = panel.snapshot(year)
    return matrix_spectral_bound(s.G, s.H, beta_G, beta_H, **kwargs)

