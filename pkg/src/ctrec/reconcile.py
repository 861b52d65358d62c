"""Least-squares point-forecast reconciliation.

The core operation is the oblique projection of a forecast vector onto
the null space of a constraint kernel ``K``::

    y_tilde = y_hat - W K' (K W K')^{-1} K y_hat

computed through a symmetric positive-definite factorization of
``K W K'``; ``W`` is never inverted and structured forms (diagonal,
block-diagonal) are used without densification.  The equivalent
structural form solves the generalized least-squares problem on the
bottom coordinates and re-aggregates.

Wrappers apply the projection per time point (cross-sectional), per
series (temporal) or once globally (cross-temporal).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .covariance import (
    CovarianceModel,
    ResidualTableau,
    cross_sectional_cov,
    cross_temporal_cov,
    temporal_cov,
)
from .crosstemporal import CrossTemporalStructure, commutation_indices
from .errors import DimensionMismatch, InvalidInput, SingularSystem
from .hierarchy import CrossSectionalStructure
from .tableau import ForecastTableau

__all__ = [
    "ReconciliationResult",
    "project",
    "project_structural",
    "projector",
    "reconcile_cross_sectional",
    "reconcile_cross_sectional_tableau",
    "reconcile_temporal",
    "reconcile_cross_temporal",
]

# Condition estimates beyond this trigger a diagnostics warning, not an error.
_COND_WARN = 1e12


@dataclass(frozen=True)
class ReconciliationResult:
    """Outcome of one reconciliation solve.

    ``coherency_errors_before`` is the negated constraint residual of the
    input; ``diagnostics`` records the factorization used, a condition
    estimate of the normal-equations matrix, and the post-solve maximum
    constraint violation.
    """

    y_tilde: np.ndarray
    adjustment: np.ndarray
    coherency_errors_before: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    tableau: ForecastTableau | None = None

    @property
    def reconciled(self):
        return self.tableau if self.tableau is not None else self.y_tilde


def _as_dense(A) -> np.ndarray:
    return np.asarray(A.todense() if sp.issparse(A) else A, dtype=float)


def _weighted_kernel_t(W: CovarianceModel, kernel):
    """``W @ kernel.T`` respecting both sparsity patterns."""
    Kt = kernel.T
    if W.structure == "identity":
        return Kt
    if W.structure == "diagonal":
        if sp.issparse(Kt):
            return sp.diags(W.diag_values) @ Kt
        return W.diag_values[:, None] * Kt
    if sp.issparse(W.matrix):
        return W.matrix @ Kt
    return W.matrix @ _as_dense(Kt)


def _spd_solve(G: np.ndarray, rhs: np.ndarray, context: str):
    """Cholesky solve with a cheap condition estimate from the factor."""
    try:
        cho = scipy.linalg.cho_factor(G, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystem(
            f"{context}: normal-equations matrix could not be factorized"
        ) from exc
    d = np.abs(np.diag(cho[0]))
    cond_est = float((d.max() / d.min()) ** 2) if d.size else 1.0
    return scipy.linalg.cho_solve(cho, rhs), cond_est


def project(y_hat, W: CovarianceModel, kernel) -> ReconciliationResult:
    """Adjust ``y_hat`` onto the null space of ``kernel``.

    ``kernel`` is an ``r x s`` full-row-rank constraint matrix (dense or
    sparse); ``W`` must be positive definite.
    """
    y = np.asarray(y_hat, dtype=float).ravel()
    K = kernel
    if K.shape[1] != y.size:
        raise DimensionMismatch(
            f"kernel has {K.shape[1]} columns, forecast vector has {y.size}"
        )
    d0 = np.asarray(K @ y).ravel()
    WKt = _weighted_kernel_t(W, K)
    G = _as_dense(K @ WKt)
    G = 0.5 * (G + G.T)
    mult, cond_est = _spd_solve(G, d0, "project")
    adjustment = np.asarray(WKt @ mult).ravel()
    y_tilde = y - adjustment
    resid_after = float(np.max(np.abs(np.asarray(K @ y_tilde)), initial=0.0))
    diagnostics = {
        "factorization": "cholesky",
        "condition_estimate": cond_est,
        "constraint_residual": resid_after,
    }
    if cond_est > _COND_WARN:
        diagnostics["warning"] = (
            f"ill-conditioned system (condition estimate {cond_est:.3e})"
        )
    if W.structure == "full":
        # Reconciliation-error covariance is only cheap with a dense W.
        diagnostics["error_covariance"] = W.matrix - np.asarray(
            WKt @ scipy.linalg.solve(G, _as_dense(WKt.T), assume_a="pos")
        )
    return ReconciliationResult(
        y_tilde=y_tilde,
        adjustment=adjustment,
        coherency_errors_before=-d0,
        diagnostics=diagnostics,
    )


def project_structural(y_hat, W: CovarianceModel, summing) -> ReconciliationResult:
    """Generalized least-squares fit of the bottom coordinates.

    Solves for ``beta`` minimizing the W-weighted distance of
    ``summing @ beta`` to ``y_hat`` and returns the re-aggregated vector;
    equivalent to :func:`project` with the matching kernel.
    """
    y = np.asarray(y_hat, dtype=float).ravel()
    S = _as_dense(summing)
    if S.shape[0] != y.size:
        raise DimensionMismatch(
            f"summing matrix has {S.shape[0]} rows, forecast vector has {y.size}"
        )
    WinvS = W.solve(S)
    A = S.T @ WinvS
    A = 0.5 * (A + A.T)
    beta, cond_est = _spd_solve(A, WinvS.T @ y, "project_structural")
    y_tilde = S @ beta
    diagnostics = {
        "factorization": "cholesky",
        "condition_estimate": cond_est,
        "beta": beta,
    }
    if cond_est > _COND_WARN:
        diagnostics["warning"] = (
            f"ill-conditioned system (condition estimate {cond_est:.3e})"
        )
    return ReconciliationResult(
        y_tilde=y_tilde,
        adjustment=y - y_tilde,
        coherency_errors_before=np.zeros(0),
        diagnostics=diagnostics,
    )


def projector(kernel, W: CovarianceModel) -> np.ndarray:
    """Materialize the dense projection matrix fixing the kernel's null space."""
    K = kernel
    s = K.shape[1]
    WKt = _weighted_kernel_t(W, K)
    G = _as_dense(K @ WKt)
    G = 0.5 * (G + G.T)
    try:
        cho = scipy.linalg.cho_factor(G, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystem(
            "projector: normal-equations matrix could not be factorized"
        ) from exc
    return np.eye(s) - _as_dense(WKt) @ scipy.linalg.cho_solve(cho, _as_dense(K))


# ---------------------------------------------------------------------------
# Dimension-specific wrappers


def reconcile_cross_sectional(
    Y_hat,
    cs: CrossSectionalStructure,
    kind: str = "cs-ols",
    residuals: np.ndarray | None = None,
) -> np.ndarray:
    """Reconcile an ``n x H`` matrix column by column (time by time)."""
    Y = np.atleast_2d(np.asarray(Y_hat, dtype=float))
    if Y.shape[0] != cs.n:
        raise DimensionMismatch(
            f"forecast matrix has {Y.shape[0]} rows, structure has {cs.n} series"
        )
    W = cross_sectional_cov(kind, cs, residuals)
    M = projector(cs.kernel, W)
    return M @ Y


def _per_level_projectors(
    xts: CrossTemporalStructure,
    kind: str,
    residuals: ResidualTableau | None,
) -> dict:
    out = {}
    for k in xts.ts.factors:
        E = residuals.level_matrix(k) if residuals is not None else None
        W = cross_sectional_cov(kind, xts.cs, E)
        out[k] = projector(xts.cs.kernel, W)
    return out


def reconcile_cross_sectional_tableau(
    tableau: ForecastTableau,
    kind: str = "cs-ols",
    residuals: ResidualTableau | None = None,
) -> ForecastTableau:
    """Apply per-level cross-sectional projections to a whole tableau.

    Each aggregation level gets its own covariance, estimated from that
    level's residual columns when the kind is residual based.
    """
    xts = tableau.structure
    projs = _per_level_projectors(xts, kind, residuals)
    vals = np.array(tableau.values)
    for k in xts.ts.factors:
        slc = xts.ts.level_slice(k, xts.h)
        vals[:, slc] = projs[k] @ vals[:, slc]
    return tableau.with_values(vals, provenance=f"reconciled:{kind}")


def _per_series_temporal_projectors(
    xts: CrossTemporalStructure,
    kind: str,
    residuals: ResidualTableau | None,
) -> list:
    Z = xts.temporal_kernel
    if kind in ("t-ols", "t-struc"):
        M = projector(Z, temporal_cov(kind, xts.ts, h=xts.h))
        return [M] * xts.n
    if residuals is None:
        raise InvalidInput(f"{kind} needs residuals")
    out = []
    for i in range(xts.n):
        W = temporal_cov(kind, xts.ts, residuals.series_block(i), h=xts.h)
        out.append(projector(Z, W))
    return out


def reconcile_temporal(
    tableau: ForecastTableau,
    kind: str = "t-ols",
    residuals: ResidualTableau | None = None,
) -> ForecastTableau:
    """Reconcile every series against its temporal hierarchy (row by row)."""
    xts = tableau.structure
    projs = _per_series_temporal_projectors(xts, kind, residuals)
    vals = np.array(tableau.values)
    for i in range(xts.n):
        vals[i] = projs[i] @ vals[i]
    return tableau.with_values(vals, provenance=f"reconciled:{kind}")


def reconcile_cross_temporal(
    Y_hat,
    xts: CrossTemporalStructure,
    kind: str = "oct-ols",
    residuals: ResidualTableau | None = None,
    W: CovarianceModel | None = None,
    parameterization: str = "by_variable",
) -> ReconciliationResult:
    """One global projection of the whole tableau onto the coherent subspace.

    The solve runs on the series-major vectorization by default; the
    time-major parameterization is available as a cross-check and must
    agree with the default up to solver tolerance.
    """
    tableau = (
        Y_hat
        if isinstance(Y_hat, ForecastTableau)
        else xts.tableau(Y_hat)
    )
    if W is None:
        W = cross_temporal_cov(kind, xts, residuals)
    label = f"reconciled:{W.kind}"
    if parameterization == "by_variable":
        res = project(tableau.vec_by_variable, W, xts.kernel)
        out_vals = res.y_tilde.reshape(xts.n, xts.width)
    elif parameterization == "by_time":
        perm = commutation_indices(xts.n, xts.width)
        P = sp.csr_matrix(
            (np.ones(perm.size), (np.arange(perm.size), perm)),
            shape=(perm.size, perm.size),
        )
        K_time = sp.csr_matrix(xts.kernel @ P)
        if W.structure == "identity":
            W_time = W
        elif W.structure == "diagonal":
            d_time = np.empty_like(W.diag_values)
            d_time[perm] = W.diag_values
            W_time = CovarianceModel(
                kind=W.kind, structure="diagonal", size=W.size, diag_values=d_time
            )
        else:
            A = P.T @ sp.csr_matrix(W.matrix) @ P
            W_time = CovarianceModel(
                kind=W.kind,
                structure=W.structure,
                size=W.size,
                matrix=A if W.structure == "block-diagonal" else A.toarray(),
            )
        res = project(tableau.vec_by_time, W_time, K_time)
        out_vals = res.y_tilde.reshape(xts.width, xts.n).T
    else:
        raise InvalidInput(f"unknown parameterization {parameterization!r}")
    out = tableau.with_values(out_vals, provenance=label)
    return ReconciliationResult(
        y_tilde=out.vec_by_variable,
        adjustment=tableau.vec_by_variable - out.vec_by_variable,
        coherency_errors_before=res.coherency_errors_before,
        diagnostics=res.diagnostics,
        tableau=out,
    )
