"""Covariance approximations for reconciliation solves.

Every estimator produces a :class:`CovarianceModel`: a named, symmetric,
positive-definite matrix in one of four structural forms (identity,
diagonal, block-diagonal, full).  Residual-based estimators work on
uncentered mean-square-error moments throughout; no mean is subtracted.

Three menus are provided, one per reconciliation dimension:

* cross-sectional (``cs-``): per time point, ``n x n``;
* temporal (``t-``): per series, ``h(k*+m)`` square;
* cross-temporal (``oct-``): global, ``n h(k*+m)`` square, parameterized
  for the series-major vectorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .crosstemporal import CrossTemporalStructure, commutation_indices
from .errors import (
    DegenerateSample,
    DimensionMismatch,
    InvalidEntry,
    InvalidInput,
    OrderingMismatch,
    SingularCovariance,
)
from .hierarchy import CrossSectionalStructure
from .temporal import TemporalStructure, cycle_interleave_permutation

__all__ = [
    "ResidualTableau",
    "CovarianceModel",
    "sample_mse",
    "shrink",
    "cross_sectional_cov",
    "temporal_cov",
    "cross_temporal_cov",
    "CS_KINDS",
    "T_KINDS",
    "OCT_KINDS",
]

CS_KINDS = ("cs-ols", "cs-struc", "cs-wls", "cs-shr", "cs-sam")
T_KINDS = (
    "t-ols",
    "t-struc",
    "t-wlsh",
    "t-wlsv",
    "t-shr",
    "t-sam",
    "t-acov",
    "t-strar1",
    "t-sar1",
    "t-har1",
)
OCT_KINDS = (
    "oct-ols",
    "oct-struc",
    "oct-wlsh",
    "oct-wlsv",
    "oct-bdshr",
    "oct-bdsam",
    "oct-acov",
    "oct-shr",
    "oct-sam",
    "oct-bdsam-l",
)

# Relative ridge used to lift borderline sample matrices to the PD cone.
_RIDGE = 1e-8


# ---------------------------------------------------------------------------
# Residual bookkeeping


@dataclass(frozen=True)
class ResidualTableau:
    """In-sample residuals for all nodes of a cross-temporal hierarchy.

    ``values`` has one row per node, series-major, each series block in
    the within-cycle level-blocked order, and one column per observation
    cycle.  The single-series case (``n = 1``) is the per-series residual
    layout used by the temporal estimators.
    """

    values: np.ndarray
    n: int
    ts: TemporalStructure

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        expected = self.n * self.ts.cycle_len
        if vals.ndim != 2 or vals.shape[0] != expected:
            raise DimensionMismatch(
                f"residual tableau has {vals.shape} rows, expected {expected}"
            )
        if vals.shape[1] < 1:
            raise InvalidInput("residual tableau needs at least one cycle")
        if not np.all(np.isfinite(vals)):
            raise InvalidEntry("residual tableau contains non-finite entries")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n_cycles(self) -> int:
        return self.values.shape[1]

    def series_block(self, i: int) -> np.ndarray:
        """Rows of series ``i``: ``(k*+m) x N``."""
        cl = self.ts.cycle_len
        return self.values[i * cl : (i + 1) * cl]

    def level_matrix(self, k: int) -> np.ndarray:
        """All series at level ``k``: ``n x (N M_k)``, columns in time order."""
        cl = self.ts.cycle_len
        slc = self.ts.level_slice(k)
        blocks = [
            self.values[i * cl + slc.start : i * cl + slc.stop].T.ravel()
            for i in range(self.n)
        ]
        return np.array(blocks)

    def level_slice_matrix(self, k: int, l: int) -> np.ndarray:
        """All series at level ``k``, within-cycle position ``l``: ``n x N``."""
        cl = self.ts.cycle_len
        off = self.ts.level_slice(k).start
        idx = [i * cl + off + l for i in range(self.n)]
        return self.values[idx]

    def series_level(self, i: int, k: int) -> np.ndarray:
        """Level ``k`` residuals of series ``i``: ``N x M_k`` (cycle by row)."""
        slc = self.ts.level_slice(k)
        return self.series_block(i)[slc].T


# ---------------------------------------------------------------------------
# Covariance model


@dataclass(frozen=True)
class CovarianceModel:
    """A named covariance approximation with explicit structure.

    ``structure`` is one of ``identity``, ``diagonal``, ``block-diagonal``
    or ``full``; the payload lives in ``diag_values`` (diagonal forms) or
    ``matrix`` (dense for full, sparse for block-diagonal).
    """

    kind: str
    structure: str
    size: int
    diag_values: np.ndarray | None = None
    matrix: object = None
    lam: float | None = None
    rho: dict | None = field(default=None)

    def __post_init__(self):
        if self.diag_values is not None:
            d = np.ascontiguousarray(self.diag_values, dtype=float)
            d.flags.writeable = False
            object.__setattr__(self, "diag_values", d)
        if isinstance(self.matrix, np.ndarray):
            m = np.ascontiguousarray(self.matrix, dtype=float)
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)

    def apply(self, M):
        """Return ``W @ M`` without densifying structured payloads."""
        if self.structure == "identity":
            return M
        if self.structure == "diagonal":
            if sp.issparse(M):
                return sp.diags(self.diag_values) @ M
            M = np.asarray(M)
            return self.diag_values[:, None] * M if M.ndim == 2 else self.diag_values * M
        return self.matrix @ M

    def solve(self, M):
        """Return ``W^{-1} @ M``."""
        if self.structure == "identity":
            return M
        if self.structure == "diagonal":
            M = np.asarray(M, dtype=float)
            return M / (self.diag_values[:, None] if M.ndim == 2 else self.diag_values)
        M = np.asarray(M.todense() if sp.issparse(M) else M, dtype=float)
        return self._solver(M)

    @cached_property
    def _solver(self):
        if sp.issparse(self.matrix):
            lu = spla.splu(sp.csc_matrix(self.matrix))
            return lu.solve
        try:
            cho = scipy.linalg.cho_factor(self.matrix, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise SingularCovariance(
                f"{self.kind}: matrix is not positive definite"
            ) from exc
        return lambda b: scipy.linalg.cho_solve(cho, b)

    def dense(self) -> np.ndarray:
        if self.structure == "identity":
            return np.eye(self.size)
        if self.structure == "diagonal":
            return np.diag(self.diag_values)
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return np.array(self.matrix)

    def diagonal(self) -> np.ndarray:
        if self.structure == "identity":
            return np.ones(self.size)
        if self.structure == "diagonal":
            return np.array(self.diag_values)
        if sp.issparse(self.matrix):
            return np.asarray(self.matrix.diagonal())
        return np.diag(self.matrix).copy()

    def require_spd(self):
        """Raise :class:`SingularCovariance` unless positive definite."""
        if self.structure == "identity":
            return
        if self.structure == "diagonal":
            if np.any(self.diag_values <= 0):
                raise SingularCovariance(
                    f"{self.kind}: diagonal has non-positive entries"
                )
            return
        A = self.dense()
        try:
            scipy.linalg.cholesky(A, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise SingularCovariance(
                f"{self.kind}: matrix is not positive definite"
            ) from exc


def _identity(kind: str, size: int) -> CovarianceModel:
    return CovarianceModel(kind=kind, structure="identity", size=size)


def _diagonal(kind: str, d: np.ndarray, **kw) -> CovarianceModel:
    d = np.asarray(d, dtype=float)
    model = CovarianceModel(
        kind=kind, structure="diagonal", size=d.size, diag_values=d, **kw
    )
    model.require_spd()
    return model


def _full(kind: str, A: np.ndarray, **kw) -> CovarianceModel:
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    model = CovarianceModel(kind=kind, structure="full", size=A.shape[0], matrix=A, **kw)
    model.require_spd()
    return model


def _block_diagonal(kind: str, A, **kw) -> CovarianceModel:
    A = sp.csr_matrix(A)
    return CovarianceModel(
        kind=kind, structure="block-diagonal", size=A.shape[0], matrix=A, **kw
    )


# ---------------------------------------------------------------------------
# Moment estimators


def sample_mse(E: np.ndarray) -> np.ndarray:
    """Uncentered second-moment matrix ``E E' / N`` of residual rows."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    return (E @ E.T) / E.shape[1]


def _chol_check(A: np.ndarray, label: str) -> np.ndarray:
    """Dense Cholesky gate for a within-cycle matrix (small by design)."""
    try:
        scipy.linalg.cholesky(A, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularCovariance(
            f"{label}: matrix is not positive definite"
        ) from exc
    return A


def _lift_to_pd(A: np.ndarray, label: str) -> np.ndarray:
    """Ridge-lift borderline sample matrices; reject truly indefinite ones.

    A smallest eigenvalue within ``-_RIDGE * trace`` of zero is treated as
    small-sample noise and lifted; anything below that aborts.  The
    eigenvalue is only computed when a Cholesky attempt fails.
    """
    A = 0.5 * (A + A.T)
    try:
        scipy.linalg.cholesky(A, lower=True)
        return A
    except scipy.linalg.LinAlgError:
        pass
    tr = float(np.trace(A))
    if tr <= 0:
        raise SingularCovariance(f"{label}: sample matrix has non-positive trace")
    emin = float(scipy.linalg.eigvalsh(A, subset_by_index=[0, 0])[0])
    if emin <= -_RIDGE * tr:
        raise SingularCovariance(
            f"{label}: sample matrix is indefinite (min eigenvalue {emin:.3e})"
        )
    return _chol_check(A + _RIDGE * tr * np.eye(A.shape[0]), label)


def shrink(
    sample: np.ndarray,
    target: np.ndarray | None = None,
    residuals: np.ndarray | None = None,
    lam: float | None = None,
) -> tuple[np.ndarray, float]:
    """Shrink a sample moment matrix toward its diagonal.

    Returns ``lam * target + (1 - lam) * sample`` together with the
    intensity used.  When ``lam`` is not supplied it is estimated from the
    per-observation products of the standardized residuals:
    ``lam = sum var(r_ij) / sum r_ij^2`` over off-diagonal cells, where
    ``var(r_ij)`` is the unbiased variance of the products divided by the
    number of observations, clamped to [0, 1].
    """
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    d = np.diag(sample)
    if np.any(d == 0):
        raise DegenerateSample("sample matrix has a zero diagonal entry")
    diagonal_target = target is None
    if diagonal_target:
        target = np.diag(d)
    if lam is None:
        if residuals is None:
            raise InvalidInput("shrink needs residuals unless lam is given")
        E = np.atleast_2d(np.asarray(residuals, dtype=float))
        p, N = E.shape
        if p != sample.shape[0]:
            raise DimensionMismatch("residual rows do not match the sample matrix")
        if N < 2 or p < 2:
            lam = 1.0
        else:
            scale = np.sqrt(d)
            Z = E / scale[:, None]
            # mean of the standardized products, without a second Gram matrix
            R = (sample / scale[:, None]) / scale[None, :]
            sum_r2 = float(np.sum(R * R) - np.sum(np.diag(R) ** 2))
            Z2 = Z * Z
            s2 = Z2.sum(axis=0)
            s4 = (Z2 * Z2).sum(axis=0)
            sum_w2 = float(np.sum(s2 * s2 - s4))
            if sum_r2 <= 0:
                lam = 1.0
            else:
                var_sum = (sum_w2 - N * sum_r2) / (N * (N - 1))
                lam = var_sum / sum_r2
    lam = float(min(1.0, max(0.0, lam)))
    combined = lam * target + (1.0 - lam) * sample
    if diagonal_target:
        np.fill_diagonal(combined, d)  # keep the diagonal bit-exact
    return combined, lam


# ---------------------------------------------------------------------------
# Cross-sectional menu


def _require(cond: bool, kind: str, condition: str, detail: str):
    if not cond:
        raise SingularCovariance(f"{kind} requires {condition} ({detail})")


def cross_sectional_cov(
    kind: str, cs: CrossSectionalStructure, residuals: np.ndarray | None = None
) -> CovarianceModel:
    """Materialize one entry of the cross-sectional covariance menu.

    ``residuals`` is an ``n x N`` matrix of in-sample errors of the level
    being reconciled (the highest-frequency level, unless the caller
    slices per level).
    """
    if kind not in CS_KINDS:
        raise InvalidInput(f"unknown cross-sectional covariance kind {kind!r}")
    n = cs.n
    if kind == "cs-ols":
        return _identity(kind, n)
    if kind == "cs-struc":
        return _diagonal(kind, cs.summing_matrix @ np.ones(cs.n_b))

    if residuals is None:
        raise InvalidInput(f"{kind} needs residuals")
    E = np.atleast_2d(np.asarray(residuals, dtype=float))
    if E.shape[0] != n:
        raise DimensionMismatch(
            f"residuals have {E.shape[0]} rows, structure has {n} series"
        )
    N = E.shape[1]
    _require(N > 1, kind, "N > 1", f"got N={N}")
    if kind == "cs-wls":
        return _diagonal(kind, np.mean(E * E, axis=1))
    if kind == "cs-shr":
        W, lam = shrink(sample_mse(E), residuals=E)
        return _full(kind, W, lam=lam)
    # cs-sam
    _require(N > n, kind, "N > n", f"got N={N}, n={n}")
    return _full(kind, _lift_to_pd(sample_mse(E), kind))


# ---------------------------------------------------------------------------
# Temporal menu


def _level_repeat(ts: TemporalStructure, h: int, per_level: dict) -> np.ndarray:
    """Diagonal from one value per level, level-blocked for ``h`` cycles."""
    return np.concatenate(
        [np.full(h * ts.M_k[k], per_level[k]) for k in ts.factors]
    )


def _level_tile(ts: TemporalStructure, h: int, per_cycle: np.ndarray) -> np.ndarray:
    """Diagonal from per-cycle node values, tiled per level for ``h`` cycles."""
    parts = []
    for k in ts.factors:
        slc = ts.level_slice(k)
        parts.append(np.tile(per_cycle[slc], h))
    return np.concatenate(parts)


def _scatter_cycles(A: np.ndarray, perm: np.ndarray, h: int) -> sp.csr_matrix:
    """Place ``h`` copies of the per-cycle matrix ``A`` along the positions
    given by the cycle-to-global index map ``perm``."""
    size = perm.size
    cl = size // h
    out = np.zeros((size, size))
    for c in range(h):
        idx = perm[c * cl : (c + 1) * cl]
        out[np.ix_(idx, idx)] = A
    return sp.csr_matrix(out)


def _extend_cycle_matrix(A: np.ndarray, ts: TemporalStructure, h: int):
    """Block-extend a within-cycle matrix to ``h`` independent cycles.

    Returns the level-blocked reordering of ``I_h (x) A``; for ``h = 1``
    this is ``A`` itself.
    """
    if h == 1:
        return A
    return _scatter_cycles(A, cycle_interleave_permutation(ts, h), h)


def _level_blockdiag(ts: TemporalStructure, h: int, blocks: dict) -> sp.csr_matrix:
    """Block-diagonal from per-level within-cycle blocks, ``h`` cycles."""
    parts = []
    for k in ts.factors:
        B = np.atleast_2d(blocks[k])
        parts.append(sp.kron(sp.identity(h), B) if h > 1 else sp.csr_matrix(B))
    return sp.block_diag(parts, format="csr")


def _lag1_autocorr(x: np.ndarray) -> float:
    """Uncentered lag-1 autocorrelation, kept inside the open unit interval."""
    x = np.asarray(x, dtype=float).ravel()
    denom = float(np.dot(x, x))
    if denom == 0 or x.size < 2:
        return 0.0
    rho = float(np.dot(x[:-1], x[1:]) / denom)
    cap = 1.0 - 1e-8
    return min(cap, max(-cap, rho))


def _ar1_toeplitz(rho: float, size: int) -> np.ndarray:
    idx = np.arange(size)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def temporal_cov(
    kind: str,
    ts: TemporalStructure,
    residuals: np.ndarray | None = None,
    h: int = 1,
) -> CovarianceModel:
    """Materialize one entry of the temporal covariance menu for one series.

    ``residuals`` is the series' ``(k*+m) x N`` block (level-blocked rows,
    one column per cycle).  The returned model covers ``h`` forecast
    cycles; matrices estimated within one cycle are block-extended across
    cycles.
    """
    if kind not in T_KINDS:
        raise InvalidInput(f"unknown temporal covariance kind {kind!r}")
    cl = ts.cycle_len
    size = h * cl
    if kind == "t-ols":
        return _identity(kind, size)
    if kind == "t-struc":
        return _diagonal(kind, _level_repeat(ts, h, {k: float(k) for k in ts.factors}))

    if residuals is None:
        raise InvalidInput(f"{kind} needs residuals")
    E = np.atleast_2d(np.asarray(residuals, dtype=float))
    if E.shape[0] != cl:
        raise DimensionMismatch(
            f"residuals have {E.shape[0]} rows, expected {cl}"
        )
    N = E.shape[1]
    _require(N > 1, kind, "N > 1", f"got N={N}")
    node_var = np.mean(E * E, axis=1)
    level_var = {
        k: float(np.mean(E[ts.level_slice(k)] ** 2)) for k in ts.factors
    }

    if kind == "t-wlsh":
        return _diagonal(kind, _level_tile(ts, h, node_var))
    if kind == "t-wlsv":
        return _diagonal(kind, _level_repeat(ts, h, level_var))
    if kind in ("t-shr", "t-sam"):
        if kind == "t-sam":
            _require(N > cl, kind, "N > k*+m", f"got N={N}, k*+m={cl}")
            A = _lift_to_pd(sample_mse(E), kind)
            lam = None
        else:
            A, lam = shrink(sample_mse(E), residuals=E)
            _chol_check(A, kind)
        # Copies of one PD cycle block stay PD after extension.
        ext = _extend_cycle_matrix(A, ts, h)
        if sp.issparse(ext):
            return _block_diagonal(kind, ext, lam=lam)
        return _full(kind, ext, lam=lam)
    if kind == "t-acov":
        _require(N > ts.m, kind, "N > m", f"got N={N}, m={ts.m}")
        blocks = {}
        for k in ts.factors:
            Ek = E[ts.level_slice(k)]  # M_k x N
            blocks[k] = _lift_to_pd(sample_mse(Ek), kind)
        return _block_diagonal(kind, _level_blockdiag(ts, h, blocks))

    # Markov family: scaled AR(1) correlation blocks per level.
    rho = {
        k: _lag1_autocorr(E[ts.level_slice(k)].T.ravel())
        for k in ts.factors[1:]
    }
    if kind == "t-strar1":
        d = _level_repeat(ts, h, {k: float(k) for k in ts.factors})
    elif kind == "t-sar1":
        d = _level_repeat(ts, h, level_var)
    else:  # t-har1
        d = _level_tile(ts, h, node_var)
    if np.any(d <= 0):
        raise SingularCovariance(f"{kind}: zero variance on a node")
    blocks = {ts.m: np.ones((1, 1))}
    for k in ts.factors[1:]:
        blocks[k] = _ar1_toeplitz(rho[k], ts.M_k[k])
    # AR(1) correlation blocks with |rho| < 1 are PD; the diagonal scaling
    # preserves that.
    gamma = _level_blockdiag(ts, h, blocks)
    root = sp.diags(np.sqrt(d))
    return _block_diagonal(kind, root @ gamma @ root, rho=rho)


# ---------------------------------------------------------------------------
# Cross-temporal menu


def _check_residual_tableau(
    residuals: ResidualTableau, xts: CrossTemporalStructure
) -> ResidualTableau:
    if not isinstance(residuals, ResidualTableau):
        residuals = ResidualTableau(np.asarray(residuals), xts.n, xts.ts)
    if residuals.n != xts.n or residuals.ts.factors != xts.ts.factors:
        raise OrderingMismatch(
            "residual rows do not follow the structure's series/level layout"
        )
    return residuals


def _series_major_diag(
    xts: CrossTemporalStructure, per_cycle_diag: np.ndarray
) -> np.ndarray:
    """Tile a per-cycle node diagonal over ``h`` cycles, series-major."""
    ts, h, n = xts.ts, xts.h, xts.n
    cl = ts.cycle_len
    parts = []
    for i in range(n):
        parts.append(_level_tile(ts, h, per_cycle_diag[i * cl : (i + 1) * cl]))
    return np.concatenate(parts)


def _extend_global_cycle_matrix(A, xts: CrossTemporalStructure):
    """Extend a per-cycle global matrix (series-major within the cycle) to
    ``h`` cycles of the series-major level-blocked layout."""
    ts, h, n = xts.ts, xts.h, xts.n
    if h == 1:
        return A
    cl = ts.cycle_len
    inner = cycle_interleave_permutation(ts, h)  # per-series map
    q = h * cl
    perm = np.empty(h * n * cl, dtype=np.intp)
    # cycle-blocked global index (c, i, u) -> level-blocked index (i, pos)
    for c in range(h):
        for i in range(n):
            dst = c * (n * cl) + i * cl
            perm[dst : dst + cl] = i * q + inner[c * cl : (c + 1) * cl]
    return _scatter_cycles(np.asarray(A), perm, h)


def _by_time_to_series_major(A, xts: CrossTemporalStructure):
    """Re-parameterize a time-major covariance to series-major order."""
    n, q = xts.n, xts.width
    perm = commutation_indices(n, q)  # series-major[r] = time-major[perm[r]]
    P = sp.csr_matrix(
        (np.ones(perm.size), (np.arange(perm.size), perm)),
        shape=(perm.size, perm.size),
    )
    return sp.csr_matrix(P @ sp.csr_matrix(A) @ P.T)


def cross_temporal_cov(
    kind: str,
    xts: CrossTemporalStructure,
    residuals: ResidualTableau | np.ndarray | None = None,
) -> CovarianceModel:
    """Materialize one entry of the cross-temporal covariance menu.

    The model is parameterized for the series-major vectorization of the
    tableau (the one the global solver consumes); the time-major form is
    its conjugate by the commutation permutation.
    """
    if kind not in OCT_KINDS:
        raise InvalidInput(f"unknown cross-temporal covariance kind {kind!r}")
    ts, cs, h, n = xts.ts, xts.cs, xts.h, xts.n
    cl = ts.cycle_len
    size = xts.size
    if kind == "oct-ols":
        return _identity(kind, size)
    if kind == "oct-struc":
        d_series = cs.summing_matrix @ np.ones(cs.n_b)
        d_time = _level_repeat(ts, h, {k: float(k) for k in ts.factors})
        return _diagonal(kind, np.kron(d_series, d_time))

    if residuals is None:
        raise InvalidInput(f"{kind} needs residuals")
    res = _check_residual_tableau(residuals, xts)
    E = res.values  # n(k*+m) x N, series-major
    N = res.n_cycles
    _require(N > 1, kind, "N > 1", f"got N={N}")

    if kind == "oct-wlsh":
        return _diagonal(kind, _series_major_diag(xts, np.mean(E * E, axis=1)))
    if kind == "oct-wlsv":
        per_cycle = np.empty(n * cl)
        for i in range(n):
            block = res.series_block(i)
            for k in ts.factors:
                slc = ts.level_slice(k)
                per_cycle[i * cl + slc.start : i * cl + slc.stop] = np.mean(
                    block[slc] ** 2
                )
        return _diagonal(kind, _series_major_diag(xts, per_cycle))

    if kind in ("oct-shr", "oct-sam"):
        if kind == "oct-sam":
            _require(
                N > n * cl, kind, "N > n(k*+m)", f"got N={N}, n(k*+m)={n * cl}"
            )
            A = _lift_to_pd(sample_mse(E), kind)
            lam = None
        else:
            A, lam = shrink(sample_mse(E), residuals=E)
            _chol_check(A, kind)
        ext = _extend_global_cycle_matrix(A, xts)
        if sp.issparse(ext):
            return _block_diagonal(kind, ext, lam=lam)
        return _full(kind, ext, lam=lam)

    if kind in ("oct-bdsam", "oct-bdshr", "oct-bdsam-l"):
        _require(N > n, kind, "N > n", f"got N={N}, n={n}")
        lam_by_level = {}

        def level_block(k, l=None):
            if l is None:
                Ek = res.level_matrix(k)
            else:
                Ek = res.level_slice_matrix(k, l)
            W = sample_mse(Ek)
            if kind == "oct-bdshr":
                W, lam_by_level[k] = shrink(W, residuals=Ek)
                return _chol_check(W, kind)
            return _lift_to_pd(W, kind)

        parts = []
        for k in ts.factors:
            if kind == "oct-bdsam-l":
                per_l = [np.atleast_2d(level_block(k, l)) for l in range(ts.M_k[k])]
                cycle = sp.block_diag(per_l)
                parts.append(sp.kron(sp.identity(h), cycle) if h > 1 else cycle)
            else:
                B = np.atleast_2d(level_block(k))
                parts.append(sp.kron(sp.identity(h * ts.M_k[k]), B))
        W_time = sp.block_diag(parts, format="csr")
        lam = float(np.mean(list(lam_by_level.values()))) if lam_by_level else None
        return _block_diagonal(
            kind, _by_time_to_series_major(W_time, xts), lam=lam
        )

    # oct-acov: per-series level-wise autocovariance blocks.
    _require(N > ts.m, kind, "N > m", f"got N={N}, m={ts.m}")
    series_parts = []
    for i in range(n):
        blocks = {}
        Ei = res.series_block(i)
        for k in ts.factors:
            blocks[k] = _lift_to_pd(sample_mse(Ei[ts.level_slice(k)]), kind)
        series_parts.append(_level_blockdiag(ts, h, blocks))
    return _block_diagonal(kind, sp.block_diag(series_parts, format="csr"))
