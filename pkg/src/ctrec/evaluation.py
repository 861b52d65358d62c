"""Rolling-origin error bookkeeping and relative accuracy indices.

Errors are collected in a cube indexed by series, procedure, forecast
origin, temporal aggregation level and horizon within the level.  All
comparisons run through relative indices against a benchmark procedure
and their geometric means over arbitrary selections of cells; a geometric
mean over one cell is the relative index itself, and partitions compose
by count-weighted geometric averaging.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .crosstemporal import CrossTemporalStructure
from .errors import BenchmarkZero, DimensionMismatch, EmptySelection, InvalidInput

__all__ = [
    "ErrorCube",
    "accuracy_index",
    "relative_index",
    "avg_rel_index",
    "rolling_harness",
    "avgrel_table",
]

MEASURES = ("mse", "mae", "rmse")


@dataclass(frozen=True)
class ErrorCube:
    """Forecast errors of several procedures over a rolling experiment.

    ``errors[proc][k]`` is an array of shape ``(n_series, n_origins, h_k)``
    where ``h_k = M_k * h`` horizons are available at level ``k``.  The
    benchmark procedure is listed first.
    """

    procedures: tuple
    series_labels: tuple
    n_a: int
    factors: tuple
    horizons: dict
    errors: dict

    def __post_init__(self):
        if not self.procedures:
            raise InvalidInput("cube needs at least the benchmark procedure")
        if self.benchmark not in self.errors:
            raise InvalidInput("benchmark procedure has no recorded errors")
        for proc, by_level in self.errors.items():
            for k in self.factors:
                shape = by_level[k].shape
                expected = (len(self.series_labels), self.n_origins, self.horizons[k])
                if shape != expected:
                    raise DimensionMismatch(
                        f"{proc} level {k}: error block has shape {shape}, "
                        f"expected {expected}"
                    )

    @property
    def benchmark(self) -> str:
        return self.procedures[0]

    @property
    def n_origins(self) -> int:
        first = self.errors[self.procedures[0]][self.factors[0]]
        return first.shape[1]

    def series_index(self, i) -> int:
        if isinstance(i, (int, np.integer)):
            return int(i)
        return self.series_labels.index(i)

    def series_group(self, group: str) -> list:
        if group == "all":
            return list(range(len(self.series_labels)))
        if group == "uts":
            return list(range(self.n_a))
        if group == "bts":
            return list(range(self.n_a, len(self.series_labels)))
        raise InvalidInput(f"unknown series group {group!r}")


def accuracy_index(
    cube: ErrorCube, measure: str, i, j: str, k: int, h: int
) -> float:
    """Mean error index over origins for one (series, level, horizon) cell."""
    if measure not in MEASURES:
        raise InvalidInput(f"unknown measure {measure!r}")
    e = cube.errors[j][k][cube.series_index(i), :, h - 1]
    if measure == "mae":
        return float(np.mean(np.abs(e)))
    mse = float(np.mean(e * e))
    return math.sqrt(mse) if measure == "rmse" else mse


def relative_index(
    cube: ErrorCube, measure: str, i, j: str, k: int, h: int
) -> float:
    """Accuracy of procedure ``j`` relative to the benchmark for one cell.

    A zero benchmark with a nonzero candidate is an error; two zeros
    carry no information and count as 1 (with a warning).
    """
    a_j = accuracy_index(cube, measure, i, j, k, h)
    a_0 = accuracy_index(cube, measure, i, cube.benchmark, k, h)
    if a_0 == 0.0:
        if a_j == 0.0:
            warnings.warn(
                f"benchmark and candidate are both exact for series {i}, "
                f"level {k}, horizon {h}; counting the cell as 1",
                stacklevel=2,
            )
            return 1.0
        raise BenchmarkZero(
            f"benchmark index is zero for series {i}, level {k}, horizon {h}"
        )
    return a_j / a_0


def _selection_cells(cube: ErrorCube, series, levels, horizons):
    if series is None or series == "all":
        series_idx = cube.series_group("all")
    elif isinstance(series, str):
        series_idx = cube.series_group(series)
    else:
        series_idx = [cube.series_index(i) for i in series]
    levels = list(cube.factors) if levels is None else [int(k) for k in levels]
    for k in levels:
        if k not in cube.factors:
            raise InvalidInput(f"level {k} is not in the cube")
    cells = []
    for k in levels:
        if horizons is None:
            hs = range(1, cube.horizons[k] + 1)
        elif isinstance(horizons, dict):
            lo, hi = horizons.get(k, (1, cube.horizons[k]))
            hs = range(lo, min(hi, cube.horizons[k]) + 1)
        else:
            lo, hi = horizons
            hs = range(max(1, lo), min(hi, cube.horizons[k]) + 1)
        for i in series_idx:
            for h in hs:
                cells.append((i, k, h))
    return cells


def avg_rel_index(
    cube: ErrorCube,
    measure: str,
    j: str,
    series=None,
    levels=None,
    horizons=None,
) -> float:
    """Geometric mean of relative indices over a selection of cells.

    ``series`` may be ``"all"``, ``"uts"``, ``"bts"`` or an iterable of
    labels/indices; ``levels`` an iterable of aggregation orders;
    ``horizons`` a ``(lo, hi)`` range (clipped per level) or a per-level
    dict of ranges.
    """
    cells = _selection_cells(cube, series, levels, horizons)
    if not cells:
        raise EmptySelection("the selection matched no cells")
    log_sum = 0.0
    for i, k, h in cells:
        r = relative_index(cube, measure, i, j, k, h)
        if r == 0.0:
            return 0.0
        log_sum += math.log(r)
    return math.exp(log_sum / len(cells))


# ---------------------------------------------------------------------------
# Rolling-origin harness


def rolling_harness(
    actuals: np.ndarray,
    base_forecasts,
    procedures: dict,
    xts: CrossTemporalStructure,
    start_cycle: int,
    measure: str = "mse",
) -> tuple:
    """Run procedures over every origin; returns ``(cube, report)``.

    Parameters
    ----------
    actuals : ndarray
        ``n x N_total(k*+m)`` level-blocked matrix of observed values over
        all cycles.
    base_forecasts : sequence
        One ``(Y_hat, residuals)`` pair per origin; origin ``t`` (0-based)
        forecasts cycles ``start_cycle + t .. start_cycle + t + h - 1``
        (0-based cycles).
    procedures : mapping
        Name to ``f(Y_hat, residuals, xts) -> reconciled matrix``.  The
        benchmark (raw base forecasts) is recorded as ``"base"``.
    start_cycle : int
        0-based index of the first forecasted cycle of the first origin.
    """
    ts, h, n = xts.ts, xts.h, xts.n
    actuals = np.atleast_2d(np.asarray(actuals, dtype=float))
    if actuals.shape[0] != n or actuals.shape[1] % ts.cycle_len:
        raise DimensionMismatch(
            "actuals must be n series by a whole number of cycles"
        )
    n_total = actuals.shape[1] // ts.cycle_len
    q = len(base_forecasts)
    if start_cycle < 0 or start_cycle + q - 1 + h > n_total:
        raise InvalidInput(
            f"{q} origins of {h} cycles starting at cycle {start_cycle} do not "
            f"fit into {n_total} observed cycles"
        )

    names = ["base"] + [p for p in procedures if p != "base"]
    horizons = {k: h * ts.M_k[k] for k in ts.factors}
    cube_errors = {
        name: {k: np.zeros((n, q, horizons[k])) for k in ts.factors}
        for name in names
    }
    for t, (Y_hat, residuals) in enumerate(base_forecasts):
        Y_hat = np.atleast_2d(np.asarray(Y_hat, dtype=float))
        target = np.empty((n, xts.width))
        for k in ts.factors:
            src = ts.level_slice(k, n_total)
            lo = src.start + (start_cycle + t) * ts.M_k[k]
            target[:, ts.level_slice(k, h)] = actuals[:, lo : lo + horizons[k]]
        outputs = {"base": Y_hat}
        for name, proc in procedures.items():
            if name == "base":
                continue
            outputs[name] = np.asarray(proc(Y_hat, residuals, xts), dtype=float)
        for name, Y in outputs.items():
            err = target - Y
            for k in ts.factors:
                cube_errors[name][k][:, t, :] = err[:, ts.level_slice(k, h)]
    cube = ErrorCube(
        procedures=tuple(names),
        series_labels=tuple(xts.cs.labels),
        n_a=xts.cs.n_a,
        factors=tuple(ts.factors),
        horizons=horizons,
        errors=cube_errors,
    )
    return cube, format_report(*avgrel_table(cube, measure))


def avgrel_table(cube: ErrorCube, measure: str = "mse") -> tuple[list, list]:
    """Tabulate average relative indices per group, level and horizon.

    Returns ``(header, rows)`` where each row covers one (group,
    procedure) pair with per-horizon columns for every level, a per-level
    aggregate column, and a grand column over everything.
    """
    levels = sorted(cube.factors)  # finest frequency first, totals last
    header = ["group", "procedure"]
    for k in levels:
        header += [f"k{k}_h{h}" for h in range(1, cube.horizons[k] + 1)]
        header += [f"k{k}_all"]
    header += ["all"]
    rows = []
    groups = ["all", "uts", "bts"] if cube.n_a and cube.n_a < len(
        cube.series_labels
    ) else ["all"]
    for group in groups:
        for proc in cube.procedures:
            row = [group, proc]
            for k in levels:
                for h in range(1, cube.horizons[k] + 1):
                    row.append(
                        avg_rel_index(
                            cube, measure, proc, series=group, levels=[k],
                            horizons=(h, h),
                        )
                    )
                row.append(
                    avg_rel_index(cube, measure, proc, series=group, levels=[k])
                )
            row.append(avg_rel_index(cube, measure, proc, series=group))
            rows.append(row)
    return header, rows


def format_report(header: list, rows: list) -> str:
    """Human-readable table; indices above 1 are flagged with ``*``."""
    lines = ["  ".join(f"{h:>12}" for h in header)]
    for row in rows:
        cells = [f"{row[0]:>12}", f"{row[1]:>12}"]
        for v in row[2:]:
            flag = "*" if v > 1.0 else " "
            cells.append(f"{v:>11.4f}{flag}")
        lines.append("  ".join(cells))
    lines.append("(* marks indices above 1: worse than the benchmark)")
    lines.append("grand percentage improvement over the benchmark, all series:")
    for row in rows:
        if row[0] != "all":
            continue
        lines.append(f"  {row[1]}: {(1.0 - row[-1]) * 100.0:+.2f}%")
    return "\n".join(lines)
