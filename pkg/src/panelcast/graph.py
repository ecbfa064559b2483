"""Queen-contiguity weights structure: edge ingestion, island removal,
row standardization, and the cached eigenvalue spectrum.

The row-standardized weights matrix W = D^-1 B shares its eigenvalues with
the symmetric similarity matrix S = D^-1/2 B D^-1/2. Computing the full
spectrum of S once at construction reduces every later evaluation of
log|I - rho W| to an O(N) sum, which is what makes the profile-likelihood
estimation in the spatial module cheap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConvergenceFailureError,
    EmptyGraphError,
    SelfLoopError,
    UnknownUnitError,
)
from .panel import Panel

EIGEN_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class SpatialGraph:
    """Symmetric, irreflexive contiguity graph with no isolated units.

    Adjacency is stored CSR-style (indptr/indices, neighbor indices sorted
    within each row). The eigenvalues of the symmetric similarity matrix are
    computed once here and cached for the log-determinant device.
    """

    unit_ids: tuple[str, ...]
    indptr: np.ndarray       # (N+1,)
    indices: np.ndarray      # (nnz,)
    degrees: np.ndarray      # (N,)
    eigenvalues: np.ndarray  # (N,) ascending
    n_components: int

    def __post_init__(self):
        for name in ("indptr", "indices", "degrees", "eigenvalues"):
            a = np.asarray(getattr(self, name))
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.n == 0:
            raise EmptyGraphError("graph has no units")
        if self.degrees.min() < 1:
            raise ValueError("graph contains isolated units; run remove_islands first")
        lam = self.eigenvalues
        if abs(lam[-1] - 1.0) > 1e-8:
            raise ConvergenceFailureError(f"max eigenvalue {lam[-1]!r} != 1")
        if lam[0] < -1 - 1e-8 or lam[-1] > 1 + 1e-8:
            raise ConvergenceFailureError("eigenvalues outside [-1, 1]")

    @property
    def n(self) -> int:
        return len(self.unit_ids)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[np.ndarray]:
        return [self.neighbors(i) for i in range(self.n)]

    @property
    def mean_degree(self) -> float:
        return float(self.degrees.mean())

    def weights_sparse(self) -> sp.csr_matrix:
        """Row-standardized W = D^-1 B."""
        data = np.repeat(1.0 / self.degrees, np.diff(self.indptr))
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()),
                             shape=(self.n, self.n))

    def similarity_sparse(self) -> sp.csr_matrix:
        """Symmetric S = D^-1/2 B D^-1/2 (same spectrum as W)."""
        dis = 1.0 / np.sqrt(self.degrees)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        data = dis[rows] * dis[self.indices]
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()),
                             shape=(self.n, self.n))


def ingest_edges(source: TextIO | str, unit_ids: Sequence[str]) -> dict[str, set[str]]:
    """Read an edge-list CSV into a symmetric adjacency mapping.

    Every unit in `unit_ids` appears as a key (isolated units map to empty
    sets). Edges listed in both directions collapse to one; unknown ids and
    self-loops are hard errors.
    """
    known = set(unit_ids)
    if len(known) != len(unit_ids):
        raise ValueError("unit_ids are not unique")
    adj: dict[str, set[str]] = {u: set() for u in unit_ids}
    close = False
    if isinstance(source, str):
        source = open(source, "r", encoding="utf-8", newline="")
        close = True
    try:
        reader = csv.reader(source)
        header = next(reader, None)
        if header is None:
            raise ValueError("empty edge CSV")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"line {lineno}: expected two columns, got {row!r}")
            a, b = row[0], row[1]
            if a not in known:
                raise UnknownUnitError(f"line {lineno}: unknown unit {a!r}")
            if b not in known:
                raise UnknownUnitError(f"line {lineno}: unknown unit {b!r}")
            if a == b:
                raise SelfLoopError(f"line {lineno}: self-loop on unit {a!r}")
            adj[a].add(b)
            adj[b].add(a)
    finally:
        if close:
            source.close()
    return adj


def restrict_adjacency(adjacency: Mapping[str, Iterable[str]],
                       unit_ids: Sequence[str]) -> dict[str, set[str]]:
    """Keep only the given units as keys; neighbor references may dangle.

    Dangling references are resolved by remove_islands, where they can
    cascade (a unit whose only neighbors were dropped becomes an island).
    """
    keep = [u for u in unit_ids if u in adjacency]
    return {u: set(adjacency[u]) for u in keep}


def remove_islands(adjacency: Mapping[str, Iterable[str]]
                   ) -> tuple[SpatialGraph, list[str]]:
    """Iteratively delete units with empty neighbour sets until none remain.

    Neighbor references outside the key set are ignored; dropping a unit can
    therefore empty another unit's neighbour set, so removal runs to a fixed
    point. Returns the graph over the kept units (original key order) and
    the removed ids in deletion order.
    """
    order = list(adjacency.keys())
    alive = {u: {v for v in adjacency[u] if v in adjacency} for u in order}
    removed: list[str] = []
    while True:
        empty = [u for u in order if u in alive and not alive[u]]
        if not empty:
            break
        for u in empty:
            del alive[u]
            removed.append(u)
        for u in alive:
            alive[u].difference_update(empty)
    if not alive:
        raise EmptyGraphError("island removal deleted every unit")
    kept = [u for u in order if u in alive]
    return build_graph(kept, alive), removed


def build_graph(unit_ids: Sequence[str],
                adjacency: Mapping[str, Iterable[str]]) -> SpatialGraph:
    """Assemble the CSR structure and compute the eigenvalue spectrum."""
    pos = {u: i for i, u in enumerate(unit_ids)}
    rows: list[np.ndarray] = []
    for u in unit_ids:
        nbrs = sorted(pos[v] for v in adjacency[u])
        if pos[u] in nbrs:
            raise SelfLoopError(f"unit {u!r} adjacent to itself")
        rows.append(np.asarray(nbrs, dtype=np.int64))
    degrees = np.array([len(r) for r in rows], dtype=np.int64)
    if (degrees < 1).any():
        bad = [unit_ids[i] for i in np.flatnonzero(degrees < 1)]
        raise ValueError(f"isolated units present (run remove_islands): {bad[:5]}")
    indptr = np.zeros(len(unit_ids) + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    indices = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)

    b = sp.csr_matrix((np.ones(len(indices)), indices, indptr),
                      shape=(len(unit_ids), len(unit_ids)))
    if (b != b.T).nnz:
        raise ValueError("adjacency is not symmetric")
    n_comp = int(connected_components(b, directed=False, return_labels=False))

    lam = _eigen_spectrum_csr(b, degrees)
    return SpatialGraph(tuple(unit_ids), indptr, indices, degrees, lam, n_comp)


def _eigen_spectrum_csr(b: sp.csr_matrix, degrees: np.ndarray) -> np.ndarray:
    """Full spectrum of S = D^-1/2 B D^-1/2, verified pair by pair."""
    dis = 1.0 / np.sqrt(degrees.astype(np.float64))
    s = sp.diags(dis) @ b @ sp.diags(dis)
    s = s.tocsr()
    lam, vec = scipy.linalg.eigh(s.toarray())
    # residual check against the sparse operator; dense eigh residuals are
    # ~1e-15*N, so failures here indicate a genuinely broken input
    resid = np.abs(s @ vec - vec * lam[None, :]).max(axis=0)
    worst = float(resid.max())
    if worst > EIGEN_RESIDUAL_TOL:
        raise ConvergenceFailureError(
            f"eigenpair residual {worst:.3e} exceeds {EIGEN_RESIDUAL_TOL:.0e} "
            f"(n={b.shape[0]}, worst index {int(resid.argmax())})"
        )
    # d^1/2 is an exact eigenvector of S with eigenvalue 1 (rows of W sum to
    # one), and the whole spectrum lies in [-1, 1]; snap away solver noise so
    # the admissible interval's upper end is exactly 1
    if abs(lam[-1] - 1.0) > 1e-8:
        raise ConvergenceFailureError(f"max eigenvalue {lam[-1]!r} != 1")
    lam = np.clip(lam, -1.0, 1.0)
    lam[-1] = 1.0
    return lam


def eigen_spectrum(graph: SpatialGraph) -> np.ndarray:
    """All N eigenvalues of the symmetric similarity matrix, ascending."""
    return graph.eigenvalues


def admissible_interval(graph: SpatialGraph) -> tuple[float, float]:
    """Open interval (1/lambda_min, 1/lambda_max) on which I - rho*W is
    invertible with positive determinant; the upper end is 1 for any graph
    without isolated units."""
    lam = graph.eigenvalues
    return (1.0 / lam[0], 1.0 / lam[-1])


def log_det(graph: SpatialGraph, rho: float) -> float:
    """log|I - rho W| = sum_j log(1 - rho lambda_j), O(N) per call."""
    lo, hi = admissible_interval(graph)
    if not (lo < rho < hi):
        from .errors import RhoOutOfBoundsError

        raise RhoOutOfBoundsError(f"rho={rho!r} outside open interval ({lo!r}, {hi!r})")
    return float(np.log1p(-rho * graph.eigenvalues).sum())


def spatial_lag(graph: SpatialGraph, x):
    """Neighbour average Wx.

    Accepts a length-N vector, an (N, k) array (applied columnwise), or a
    Panel aligned with the graph; returns the same shape/type.
    """
    w = graph.weights_sparse()
    if isinstance(x, Panel):
        if x.unit_ids != graph.unit_ids:
            from .errors import UnitMismatchError

            raise UnitMismatchError("panel units do not match graph units")
        return x.with_values(w @ x.values)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != graph.n:
        raise ValueError(f"expected leading dimension {graph.n}, got {x.shape}")
    return w @ x


def write_islands_report(path: str, removed: Sequence[str]) -> None:
    from ._util import atomic_write

    with atomic_write(path) as fh:
        for u in removed:
            fh.write(u + "\n")
