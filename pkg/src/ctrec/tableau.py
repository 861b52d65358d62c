"""Forecast tableau: all series at all temporal aggregation levels.

A tableau is an ``n x h(k*+m)`` matrix whose rows follow the hierarchy's
label order (uppers first) and whose columns are blocked by descending
aggregation order, each block holding that level's ``h * M_k`` values in
time order.  Two vectorizations are used throughout: ``vec_by_variable``
stacks the rows (series-major) and ``vec_by_time`` stacks the columns;
the commutation matrix of the structure maps one onto the other.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .errors import DimensionMismatch

if TYPE_CHECKING:  # pragma: no cover
    from .crosstemporal import CrossTemporalStructure

__all__ = ["ForecastTableau"]


@dataclass(frozen=True)
class ForecastTableau:
    """Immutable forecast tableau bound to a cross-temporal structure."""

    values: np.ndarray
    structure: "CrossTemporalStructure"
    provenance: str = "base"

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        st = self.structure
        if vals.shape != (st.n, st.width):
            raise DimensionMismatch(
                f"tableau shape {vals.shape} does not match structure "
                f"({st.n}, {st.width})"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def vec_by_variable(self) -> np.ndarray:
        """Row-stacked vector (series-major)."""
        return self.values.ravel()

    @property
    def vec_by_time(self) -> np.ndarray:
        """Column-stacked vector (time-major)."""
        return self.values.ravel(order="F")

    @classmethod
    def from_vec_by_variable(
        cls, vec, structure: "CrossTemporalStructure", provenance: str = "base"
    ) -> "ForecastTableau":
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != structure.size:
            raise DimensionMismatch(
                f"vector length {vec.size} does not match structure size "
                f"{structure.size}"
            )
        return cls(vec.reshape(structure.n, structure.width), structure, provenance)

    def level_block(self, k: int) -> np.ndarray:
        """Columns of aggregation level ``k`` (a read-only view)."""
        return self.values[:, self.structure.ts.level_slice(k, self.structure.h)]

    def with_values(self, values, provenance: str | None = None) -> "ForecastTableau":
        return replace(
            self,
            values=values,
            provenance=self.provenance if provenance is None else provenance,
        )
