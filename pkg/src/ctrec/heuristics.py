"""Two-step and iterative cross-temporal reconciliation heuristics.

The two-step procedure first reconciles each series through its temporal
hierarchy, then restores cross-sectional coherence by applying a single
averaged cross-sectional projector to every column; averaging over the
per-level projectors keeps the result inside both constraint sets because
every cross-sectional projector annihilates the summation kernel.  The
order of the two dimensions can be reversed, which generally changes the
result.  The iterative procedure alternates the two single-dimension
reconciliations until the leftover discrepancy falls below a tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import CS_KINDS, T_KINDS, ResidualTableau
from .crosstemporal import CrossTemporalStructure, coherence_report
from .errors import InvalidInput, NonConvergence
from .reconcile import (
    ReconciliationResult,
    _per_level_projectors,
    _per_series_temporal_projectors,
)
from .tableau import ForecastTableau

__all__ = ["HeuristicConfig", "ka_two_step", "iterative"]


@dataclass(frozen=True)
class HeuristicConfig:
    """Settings for the heuristic procedures.

    ``order`` selects which dimension is reconciled first: ``tcs``
    (temporal, then cross-sectional) or ``cst``.  ``average`` picks the
    plain or the frequency-weighted mean of the per-level projectors in
    the final step of the two-step procedure.  ``tolerance`` is the
    dimensionless convergence threshold of the iterative procedure,
    scaled internally by ``1 + max |Y_hat|``.
    """

    temporal_kind: str = "t-wlsv"
    cross_sectional_kind: str = "cs-shr"
    order: str = "tcs"
    average: str = "plain"
    tolerance: float = 1e-6
    max_iterations: int = 100

    def __post_init__(self):
        if self.temporal_kind not in T_KINDS:
            raise InvalidInput(f"unknown temporal kind {self.temporal_kind!r}")
        if self.cross_sectional_kind not in CS_KINDS:
            raise InvalidInput(
                f"unknown cross-sectional kind {self.cross_sectional_kind!r}"
            )
        if self.order not in ("tcs", "cst"):
            raise InvalidInput(f"order must be 'tcs' or 'cst', got {self.order!r}")
        if self.average not in ("plain", "weighted"):
            raise InvalidInput(
                f"average must be 'plain' or 'weighted', got {self.average!r}"
            )
        if not (isinstance(self.tolerance, (int, float)) and math.isfinite(self.tolerance) and self.tolerance > 0):
            raise InvalidInput("tolerance must be a finite positive number")
        if self.max_iterations < 1:
            raise InvalidInput("max_iterations must be at least 1")


def _as_tableau(Y_hat, xts: CrossTemporalStructure) -> ForecastTableau:
    if isinstance(Y_hat, ForecastTableau):
        return Y_hat
    return xts.tableau(Y_hat)


def _apply_temporal(vals: np.ndarray, projs: list) -> np.ndarray:
    out = np.empty_like(vals)
    for i, M in enumerate(projs):
        out[i] = M @ vals[i]
    return out


def _apply_cross_sectional(
    vals: np.ndarray, projs: dict, xts: CrossTemporalStructure
) -> np.ndarray:
    out = np.empty_like(vals)
    for k in xts.ts.factors:
        slc = xts.ts.level_slice(k, xts.h)
        out[:, slc] = projs[k] @ vals[:, slc]
    return out


def _averaged_cs_projector(
    projs: dict, xts: CrossTemporalStructure, average: str
) -> np.ndarray:
    ts = xts.ts
    if average == "weighted":
        # Each level's projector acts on M_k columns per cycle; weight by that.
        total = sum(ts.M_k[k] for k in ts.factors)
        return sum(ts.M_k[k] * projs[k] for k in ts.factors) / total
    return sum(projs[k] for k in ts.factors) / ts.p


def ka_two_step(
    Y_hat,
    xts: CrossTemporalStructure,
    config: HeuristicConfig | None = None,
    residuals: ResidualTableau | None = None,
) -> ReconciliationResult:
    """Two-step heuristic: one dimension exactly, the other by averaging.

    Temporal-first: reconcile each series through its temporal hierarchy,
    then apply the average of the per-level cross-sectional projectors to
    every column.  Cross-sectional-first mirrors the steps, averaging the
    per-series temporal projectors instead.  Either way the output
    satisfies both constraint sets.
    """
    config = config or HeuristicConfig()
    tableau = _as_tableau(Y_hat, xts)
    t_projs = _per_series_temporal_projectors(xts, config.temporal_kind, residuals)
    cs_projs = _per_level_projectors(xts, config.cross_sectional_kind, residuals)

    if config.order == "tcs":
        step1 = _apply_temporal(tableau.values, t_projs)
        M_bar = _averaged_cs_projector(cs_projs, xts, config.average)
        final = M_bar @ step1
    else:
        step1 = _apply_cross_sectional(tableau.values, cs_projs, xts)
        # Every series' projector is used exactly once, so the weighted
        # average coincides with the plain one in this order.
        M_bar = sum(t_projs) / xts.n
        final = step1 @ M_bar.T

    out = tableau.with_values(final, provenance=f"reconciled:ka-{config.order}")
    d0 = np.asarray(xts.kernel @ tableau.vec_by_variable).ravel()
    return ReconciliationResult(
        y_tilde=out.vec_by_variable,
        adjustment=tableau.vec_by_variable - out.vec_by_variable,
        coherency_errors_before=-d0,
        diagnostics={"order": config.order, "average": config.average},
        tableau=out,
    )


def iterative(
    Y_hat,
    xts: CrossTemporalStructure,
    config: HeuristicConfig | None = None,
    residuals: ResidualTableau | None = None,
) -> tuple[ReconciliationResult, list]:
    """Alternate single-dimension reconciliations until discrepancies vanish.

    Each iteration applies a full temporal pass and a full cross-sectional
    pass (order per config), recording the raw L1 gross discrepancies
    after each half-step.  The procedure stops once the discrepancy of the
    dimension not enforced last drops below ``tolerance * (1 + max|Y_hat|)``
    and returns the final tableau together with the per-iteration
    ``(d_cs, d_te)`` trace.

    Raises
    ------
    NonConvergence
        If the iteration cap is reached; the trace rides on the exception.
    """
    config = config or HeuristicConfig()
    tableau = _as_tableau(Y_hat, xts)
    t_projs = _per_series_temporal_projectors(xts, config.temporal_kind, residuals)
    cs_projs = _per_level_projectors(xts, config.cross_sectional_kind, residuals)

    scale = 1.0 + float(np.max(np.abs(tableau.values), initial=0.0))
    threshold = config.tolerance * scale
    vals = np.array(tableau.values)
    trace: list[tuple[float, float]] = []
    converged = False
    for _ in range(config.max_iterations):
        if config.order == "tcs":
            vals = _apply_temporal(vals, t_projs)
            d_cs = coherence_report(vals, xts)[0]
            vals = _apply_cross_sectional(vals, cs_projs, xts)
            d_te = coherence_report(vals, xts)[1]
            trace.append((d_cs, d_te))
            if d_te < threshold:
                converged = True
                break
        else:
            vals = _apply_cross_sectional(vals, cs_projs, xts)
            d_te = coherence_report(vals, xts)[1]
            vals = _apply_temporal(vals, t_projs)
            d_cs = coherence_report(vals, xts)[0]
            trace.append((d_cs, d_te))
            if d_cs < threshold:
                converged = True
                break
    if not converged:
        raise NonConvergence(
            f"no convergence after {config.max_iterations} iterations "
            f"(threshold {threshold:.3e})",
            trace=trace,
        )
    out = tableau.with_values(vals, provenance=f"reconciled:ite-{config.order}")
    d0 = np.asarray(xts.kernel @ tableau.vec_by_variable).ravel()
    result = ReconciliationResult(
        y_tilde=out.vec_by_variable,
        adjustment=tableau.vec_by_variable - out.vec_by_variable,
        coherency_errors_before=-d0,
        diagnostics={
            "order": config.order,
            "iterations": len(trace),
            "threshold": threshold,
        },
        tableau=out,
    )
    return result, trace
