"""Temporal hierarchy of one series observed ``m`` times per cycle.

For every factor ``k`` of ``m`` the series can be aggregated by
non-overlapping sums of ``k`` consecutive values.  Stacking all aggregated
levels (descending ``k``) above the raw data gives a within-cycle vector of
length ``k* + m`` whose coherence is encoded by the kernel
``[I | -K1]``.  The same construction extends to ``N`` cycles with the
level-blocked layout (all values of one level, in time order, before the
next level).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput, NotAFactor, RaggedEdge

__all__ = [
    "TemporalStructure",
    "build_temporal",
    "aggregate_series",
    "build_full_temporal_kernel",
    "build_full_temporal_agg",
    "cycle_interleave_permutation",
]


def _divisors_desc(m: int) -> list[int]:
    return [k for k in range(m, 0, -1) if m % k == 0]


@dataclass(frozen=True)
class TemporalStructure:
    """Immutable description of one temporal hierarchy.

    Attributes
    ----------
    m : int
        Highest sampling frequency per cycle.
    factors : tuple of int
        Aggregation orders in strictly descending order; always starts
        with ``m`` and ends with 1.
    k_star : int
        Sum of all factors except the first; number of aggregated values
        per cycle.
    M_k : mapping int -> int
        Number of level-``k`` observations per cycle, ``m // k``.
    agg_matrix : ndarray, shape (k_star, m)
        Within-cycle aggregation matrix (one block of windowed ones per
        non-unit factor, descending order).
    summing_matrix : ndarray, shape (k_star + m, m)
        Aggregation matrix stacked over the identity.
    kernel : ndarray, shape (k_star, k_star + m)
        Within-cycle zero-constraints matrix ``[I | -agg_matrix]``.
    """

    m: int
    factors: tuple
    k_star: int
    M_k: Mapping[int, int]
    agg_matrix: np.ndarray
    summing_matrix: np.ndarray
    kernel: np.ndarray

    @property
    def p(self) -> int:
        """Number of aggregation levels (including the raw level)."""
        return len(self.factors)

    @property
    def cycle_len(self) -> int:
        """Values per cycle across all levels, ``k_star + m``."""
        return self.k_star + self.m

    def level_slice(self, k: int, cycles: int = 1) -> slice:
        """Column range of level ``k`` in the level-blocked layout."""
        if k not in self.M_k:
            raise NotAFactor(f"{k} is not an aggregation order of this structure")
        off = 0
        for kk in self.factors:
            width = cycles * self.M_k[kk]
            if kk == k:
                return slice(off, off + width)
            off += width
        raise NotAFactor(f"{k} is not an aggregation order of this structure")


def build_temporal(m: int, factors: Sequence[int] | None = None) -> TemporalStructure:
    """Build the temporal structure for cycle length ``m``.

    Parameters
    ----------
    m : int
        Observations per cycle at the highest frequency; must be >= 1.
    factors : sequence of int, optional
        Whitelist of aggregation orders to keep.  Must contain ``m`` and 1
        and every member must divide ``m``.  By default all divisors of
        ``m`` are used.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidInput(f"cycle length must be a positive integer, got {m!r}")
    m = int(m)
    all_factors = _divisors_desc(m)
    if factors is None:
        kept = all_factors
    else:
        kept = sorted({int(k) for k in factors}, reverse=True)
        for k in kept:
            if m % k != 0:
                raise NotAFactor(f"{k} does not divide the cycle length {m}")
        if m not in kept or 1 not in kept:
            raise InvalidInput("factor whitelist must contain the cycle length and 1")

    M_k = {k: m // k for k in kept}
    # Aggregated values per cycle; equals the sum of the non-top factors
    # whenever the factor set is all divisors of m.
    k_star = sum(M_k[k] for k in kept[:-1])

    blocks = []
    for k in kept[:-1]:
        blocks.append(np.kron(np.eye(M_k[k]), np.ones((1, k))))
    agg = np.vstack(blocks) if blocks else np.zeros((0, m))
    summing = np.vstack([agg, np.eye(m)])
    kernel = np.hstack([np.eye(k_star), -agg])
    for a in (agg, summing, kernel):
        a.flags.writeable = False
    return TemporalStructure(
        m=m,
        factors=tuple(kept),
        k_star=k_star,
        M_k=M_k,
        agg_matrix=agg,
        summing_matrix=summing,
        kernel=kernel,
    )


def aggregate_series(ts: TemporalStructure, x: np.ndarray, k: int) -> np.ndarray:
    """Non-overlapping sums of ``k`` consecutive values of ``x``.

    ``len(x)`` must be a whole number of cycles and ``k`` must be one of
    the structure's aggregation orders.  Element ``l`` of the result is
    the sum of ``x`` over positions ``(l-1)k+1 .. lk``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size % ts.m != 0:
        raise RaggedEdge(
            f"series length {x.size} is not a multiple of the cycle length {ts.m}"
        )
    if k not in ts.M_k:
        raise NotAFactor(f"{k} is not an aggregation order of this structure")
    return x.reshape(-1, k).sum(axis=1)


def build_full_temporal_agg(ts: TemporalStructure, N: int) -> sp.csr_matrix:
    """Aggregation matrix over ``N`` cycles, shape ``(N k*, N m)``.

    Stacks one ``I_{N M_k} (x) ones(1, k)`` block per non-unit factor,
    descending order, matching the level-blocked vector layout.
    """
    if N < 1:
        raise InvalidInput(f"cycle count must be >= 1, got {N}")
    blocks = [
        sp.kron(sp.identity(N * ts.M_k[k]), np.ones((1, k)), format="csr")
        for k in ts.factors[:-1]
    ]
    if not blocks:
        return sp.csr_matrix((0, N * ts.m))
    return sp.vstack(blocks, format="csr")


def build_full_temporal_kernel(ts: TemporalStructure, N: int) -> sp.csr_matrix:
    """Zero-constraints kernel over ``N`` cycles, shape ``(N k*, N(k*+m))``.

    Valid for the level-blocked stacking of all temporal aggregates over
    ``N`` cycles (every level's values in time order, descending level
    order, raw data last).
    """
    K = build_full_temporal_agg(ts, N)
    return sp.hstack([sp.identity(N * ts.k_star, format="csr"), -K], format="csr")


def full_summing(ts: TemporalStructure, N: int) -> sp.csr_matrix:
    """Summing matrix over ``N`` cycles, shape ``(N(k*+m), N m)``."""
    K = build_full_temporal_agg(ts, N)
    return sp.vstack([K, sp.identity(N * ts.m, format="csr")], format="csr")


def full_vector(ts: TemporalStructure, x: np.ndarray) -> np.ndarray:
    """Stack all temporal aggregates of ``x`` in the level-blocked layout."""
    return np.concatenate([aggregate_series(ts, x, k) for k in ts.factors])


def cycle_interleave_permutation(ts: TemporalStructure, N: int) -> np.ndarray:
    """Index map from level-blocked to cycle-blocked ordering.

    Returns ``perm`` of length ``N (k*+m)`` such that a level-blocked
    vector ``v`` satisfies ``v[perm[c*(k*+m) + u]]`` = value ``u`` of
    cycle ``c`` in the within-cycle layout.  Used to extend per-cycle
    covariance matrices to ``N`` cycles.
    """
    q = ts.cycle_len
    perm = np.empty(N * q, dtype=np.intp)
    off = 0  # running offset of the current level block
    u = 0  # within-cycle position
    for k in ts.factors:
        Mk = ts.M_k[k]
        for c in range(N):
            for l in range(Mk):
                perm[c * q + u + l] = off + c * Mk + l
        off += N * Mk
        u += Mk
    return perm
