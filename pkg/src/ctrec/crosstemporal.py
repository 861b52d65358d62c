"""Combined cross-sectional and temporal constraint systems.

Combining a hierarchy over ``n`` series with a temporal hierarchy of cycle
length ``m`` yields, for ``h`` forecast cycles, a constraint system on the
``s = n h (k*+m)`` stacked values.  The natural stacking of the two
constraint families is redundant; the full-row-rank kernel keeps the
cross-sectional constraints at the highest frequency only, plus all
temporal constraints, for rank ``h (n_a m + n k*)``.

The coherent subspace also has a structural description: every node is a
fixed linear combination of the highest-frequency bottom values, through
the summing matrix of the reordered vector (uppers and aggregated bottoms
first, raw bottoms last) and a permutation back to series-major order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DimensionMismatch, InvalidInput, SingularSystem
from .hierarchy import CrossSectionalStructure
from .tableau import ForecastTableau
from .temporal import TemporalStructure, build_full_temporal_kernel, full_summing

__all__ = [
    "CrossTemporalStructure",
    "commutation_matrix",
    "commutation_indices",
    "build_cross_temporal",
    "bottom_up",
    "coherence_report",
    "numerical_rank",
    "validate_raw_kernel",
]

# Rank verification by dense pivoted QR is skipped above this vector size.
_RANK_CHECK_LIMIT = 3000


def commutation_indices(r: int, c: int) -> np.ndarray:
    """Permutation ``perm`` with ``vec(X')[i] = vec(X)[perm[i]]`` for X (r x c)."""
    if r < 1 or c < 1:
        raise InvalidInput("matrix dimensions must be positive")
    # vec(X)[i + j*r] = X[i, j]; vec(X')[j + i*c] = X[i, j]
    i, j = np.meshgrid(np.arange(r), np.arange(c), indexing="ij")
    perm = np.empty(r * c, dtype=np.intp)
    perm[(j + i * c).ravel()] = (i + j * r).ravel()
    return perm


def _perm_matrix(perm: np.ndarray) -> sp.csr_matrix:
    """Sparse P with ``(P v)[i] = v[perm[i]]``."""
    n = perm.size
    return sp.csr_matrix(
        (np.ones(n), (np.arange(n), perm)), shape=(n, n)
    )


def commutation_matrix(r: int, c: int) -> sp.csr_matrix:
    """Permutation matrix mapping ``vec(X)`` to ``vec(X')`` for X (r x c).

    Orthogonal; its transpose is the commutation matrix for (c, r).
    """
    return _perm_matrix(commutation_indices(r, c))


def numerical_rank(A, rtol: float = 1e-9) -> int:
    """Rank via pivoted QR, counting pivots above ``rtol`` relative size."""
    A = np.asarray(A.todense() if sp.issparse(A) else A, dtype=float)
    if A.size == 0:
        return 0
    R = scipy.linalg.qr(A, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.count_nonzero(d > rtol * d[0]))


@dataclass(frozen=True)
class CrossTemporalStructure:
    """Constraint system for ``n`` series over ``h`` forecast cycles.

    Attributes
    ----------
    cs, ts : component structures.
    h : int
        Forecast cycles covered by one tableau.
    kernel_redundant : sparse matrix
        Stacked cross-sectional and temporal constraints (redundant rows).
    kernel : sparse matrix
        Full-row-rank kernel: highest-frequency cross-sectional rows plus
        all temporal rows.
    commutation : sparse permutation
        Maps the time-major vectorization to the series-major one.
    struct_perm : sparse permutation
        Maps the structural ordering (uppers and aggregated bottoms first)
        to series-major order.
    struct_summing : sparse matrix
        Summing matrix of the structural ordering, shape
        ``(n h (k*+m), n_b m h)``.
    struct_agg : sparse matrix
        Top block of ``struct_summing`` above the bottom identity.
    """

    cs: CrossSectionalStructure
    ts: TemporalStructure
    h: int
    kernel_redundant: sp.csr_matrix
    kernel: sp.csr_matrix
    commutation: sp.csr_matrix
    struct_perm: sp.csr_matrix
    struct_summing: sp.csr_matrix
    struct_agg: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.cs.n

    @property
    def width(self) -> int:
        """Tableau columns: ``h (k*+m)``."""
        return self.h * self.ts.cycle_len

    @property
    def size(self) -> int:
        """Stacked problem size ``n h (k*+m)``."""
        return self.n * self.width

    @property
    def rank(self) -> int:
        """Row count (= rank) of the full-row-rank kernel."""
        return self.h * (self.cs.n_a * self.ts.m + self.n * self.ts.k_star)

    @cached_property
    def temporal_kernel(self) -> sp.csr_matrix:
        """Per-series temporal kernel over ``h`` cycles."""
        return build_full_temporal_kernel(self.ts, self.h)

    @cached_property
    def temporal_summing(self) -> sp.csr_matrix:
        """Per-series temporal summing matrix over ``h`` cycles."""
        return full_summing(self.ts, self.h)

    def tableau(self, values, provenance: str = "base") -> ForecastTableau:
        return ForecastTableau(np.asarray(values, dtype=float), self, provenance)


def _hf_cross_sectional_rows(
    cs: CrossSectionalStructure, ts: TemporalStructure, h: int
) -> sp.csr_matrix:
    """Cross-sectional constraints at the ``h*m`` highest-frequency points.

    Rows are ordered time point first, then upper series, matching the
    elimination recipe applied to the time-major vectorization.
    """
    n, n_a = cs.n, cs.n_a
    q = h * ts.cycle_len
    hf_offset = h * ts.k_star
    U = cs.kernel
    rows, cols, vals = [], [], []
    for t in range(h * ts.m):
        for j in range(n_a):
            r = t * n_a + j
            for s in np.flatnonzero(U[j]):
                rows.append(r)
                cols.append(s * q + hf_offset + t)
                vals.append(U[j, s])
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(h * ts.m * n_a, n * q)
    )


def _struct_perm(cs: CrossSectionalStructure, ts: TemporalStructure, h: int):
    """Permutation taking the structural ordering to series-major order."""
    n_a, n_b = cs.n_a, cs.n_b
    q = h * ts.cycle_len
    lf = h * ts.k_star
    hf = h * ts.m
    perm = np.empty(cs.n * q, dtype=np.intp)
    for i in range(n_a):
        perm[i * q : (i + 1) * q] = np.arange(i * q, (i + 1) * q)
    base = n_a * q
    for ib in range(n_b):
        dst = (n_a + ib) * q
        perm[dst : dst + lf] = base + ib * lf + np.arange(lf)
        perm[dst + lf : dst + q] = base + n_b * lf + ib * hf + np.arange(hf)
    return _perm_matrix(perm)


def build_cross_temporal(
    cs: CrossSectionalStructure, ts: TemporalStructure, h: int = 1
) -> CrossTemporalStructure:
    """Assemble the full cross-temporal constraint system.

    ``h`` forecast cycles are handled exactly like ``h`` observation
    cycles: every per-cycle matrix is block-extended, so the single-cycle
    formulas hold verbatim for ``h = 1``.
    """
    if h < 1:
        raise InvalidInput(f"forecast cycles must be >= 1, got {h}")
    n = cs.n
    q = h * ts.cycle_len
    Z = build_full_temporal_kernel(ts, h)
    temporal_rows = sp.kron(sp.identity(n), Z, format="csr")

    kernel_redundant = sp.vstack(
        [sp.kron(cs.kernel, sp.identity(q), format="csr"), temporal_rows],
        format="csr",
    )
    kernel = sp.vstack(
        [_hf_cross_sectional_rows(cs, ts, h), temporal_rows], format="csr"
    )

    P = _perm_matrix(commutation_indices(n, q))
    Q = _struct_perm(cs, ts, h)
    summing = sp.csr_matrix(
        Q.T @ sp.kron(cs.summing_matrix, full_summing(ts, h), format="csr")
    )
    n_a_star = cs.n_a * q + cs.n_b * h * ts.k_star
    struct_agg = sp.csr_matrix(summing[:n_a_star])

    structure = CrossTemporalStructure(
        cs=cs,
        ts=ts,
        h=h,
        kernel_redundant=kernel_redundant,
        kernel=kernel,
        commutation=P,
        struct_perm=Q,
        struct_summing=summing,
        struct_agg=struct_agg,
    )
    if structure.size <= _RANK_CHECK_LIMIT:
        r = numerical_rank(kernel)
        if r != structure.rank:
            raise SingularSystem(
                f"kernel rank {r} differs from expected {structure.rank}"
            )
    return structure


def validate_raw_kernel(kernel, size: int | None = None) -> sp.csr_matrix:
    """Validate a user-supplied constraint kernel and return it as sparse.

    The kernel must have full row rank; use this for constraint sets that
    cannot be written through an aggregation matrix (series sharing a
    total from different sides, for example).  Structural operations
    (bottom-up, the structural solver) are unavailable for raw kernels.
    """
    K = sp.csr_matrix(np.atleast_2d(kernel) if not sp.issparse(kernel) else kernel)
    if size is not None and K.shape[1] != size:
        raise DimensionMismatch(
            f"kernel has {K.shape[1]} columns, expected {size}"
        )
    if K.shape[0] >= K.shape[1]:
        raise DimensionMismatch("kernel must have fewer rows than columns")
    if numerical_rank(K) != K.shape[0]:
        raise SingularSystem("kernel rows are linearly dependent")
    return K


def bottom_up(B_hat_hf, structure: CrossTemporalStructure) -> ForecastTableau:
    """Coherent tableau built from highest-frequency bottom forecasts only.

    Aggregates the ``n_b x h*m`` bottom block cross-sectionally and
    temporally; the result satisfies every constraint by construction.
    """
    B = np.atleast_2d(np.asarray(B_hat_hf, dtype=float))
    cs, ts, h = structure.cs, structure.ts, structure.h
    if B.shape != (cs.n_b, h * ts.m):
        raise DimensionMismatch(
            f"bottom forecasts have shape {B.shape}, expected "
            f"({cs.n_b}, {h * ts.m})"
        )
    bottom_full = B @ structure.temporal_summing.T
    values = np.vstack([cs.agg_matrix @ bottom_full, bottom_full])
    return ForecastTableau(values, structure, provenance="bottom-up")


def coherence_report(Y, structure: CrossTemporalStructure) -> tuple[float, float]:
    """Gross discrepancies ``(d_cs, d_te)`` of a tableau.

    Entrywise L1 norms of the cross-sectional constraint residual and of
    the temporal constraint residual.
    """
    vals = Y.values if isinstance(Y, ForecastTableau) else np.atleast_2d(np.asarray(Y, dtype=float))
    if vals.shape != (structure.n, structure.width):
        raise DimensionMismatch(
            f"tableau shape {vals.shape} does not match structure "
            f"({structure.n}, {structure.width})"
        )
    d_cs = float(np.abs(structure.cs.kernel @ vals).sum())
    d_te = float(np.abs(structure.temporal_kernel @ vals.T).sum())
    return d_cs, d_te
