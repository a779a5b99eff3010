"""Finite population of potential outcomes for a 2x2 factorial layout.

Every unit carries four potential outcomes, one per treatment cell
(z_a, z_b) with levels coded -1/+1.  This module holds the population
table and computes all population-level effect and dispersion summaries
that the sampling theory is expressed in.  Everything here is a pure
function of the table; nothing is random.

Cell order convention
---------------------
All length-4 vectors and 4x4 matrices in this package index cells in the
fixed canonical order::

    (-1, -1), (+1, -1), (-1, +1), (+1, +1)

i.e. factor A varies fastest.  CSV columns follow the same order under
the names ``y_mm, y_pm, y_mp, y_pp`` ("m" = -1, "p" = +1, A before B).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

#: Canonical cell order: (z_a, z_b) pairs, factor A varying fastest.
CELLS: tuple[tuple[int, int], ...] = ((-1, -1), (+1, -1), (-1, +1), (+1, +1))

#: Factor levels, in index order used by all per-level pairs (minus first).
LEVELS: tuple[int, int] = (-1, +1)

TABLE_CSV_HEADER = ("y_mm", "y_pm", "y_mp", "y_pp")

_CELL_INDEX = {cell: j for j, cell in enumerate(CELLS)}


def cell_index(z_a: int, z_b: int) -> int:
    """Column index of cell (z_a, z_b) in canonical order."""
    return _CELL_INDEX[(z_a, z_b)]


def level_index(z: int) -> int:
    """Index of a factor level in per-level pairs: -1 -> 0, +1 -> 1."""
    if z == -1:
        return 0
    if z == +1:
        return 1
    raise ValueError(f"factor level must be -1 or +1, got {z}")


@dataclass(frozen=True)
class PotentialOutcomesTable:
    """N x 4 matrix of potential outcomes, columns in canonical cell order."""

    outcomes: np.ndarray

    @property
    def n_units(self) -> int:
        return self.outcomes.shape[0]

    def column(self, z_a: int, z_b: int) -> np.ndarray:
        """Potential outcomes of all units under cell (z_a, z_b)."""
        return self.outcomes[:, cell_index(z_a, z_b)]


@dataclass(frozen=True)
class EstimandSummary:
    """Population causal effects of the table.

    ``theta_a_given_b`` and ``theta_b_given_a`` are level pairs indexed by
    :func:`level_index` of the conditioning level.
    """

    cell_means: np.ndarray
    theta_a: float
    theta_ab: float
    theta_a_given_b: np.ndarray
    theta_b_given_a: np.ndarray


@dataclass(frozen=True)
class DispersionSummary:
    """Population variances/covariances of outcomes and unit-level effects.

    All centered quantities use the N-1 divisor.  ``sum_sq_theta_b_given_a``
    is the *uncentered* sum of squared unit-level conditional B effects,
    one entry per conditioning A level; the sampling-variance formula
    consumes it raw, so it is deliberately not a variance.
    """

    s2_cell: np.ndarray
    s_cross: np.ndarray
    s2_a: float
    s2_a_given_b: np.ndarray
    s_cond_cross: float
    sum_sq_theta_b_given_a: np.ndarray


def build_table(matrix: np.ndarray) -> PotentialOutcomesTable:
    """Validate an N x 4 array of potential outcomes and wrap it.

    Requires N >= 2 and all entries finite.  The returned table owns an
    immutable copy of the data.
    """
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected an N x 4 matrix, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("population too small: need at least 2 units")
    if not np.all(np.isfinite(arr)):
        raise ValueError("potential outcomes must all be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return PotentialOutcomesTable(outcomes=arr)


def estimands(table: PotentialOutcomesTable) -> EstimandSummary:
    """All population-level causal effects of the table."""
    cell_means = table.outcomes.mean(axis=0)

    def mean(z_a: int, z_b: int) -> float:
        return float(cell_means[cell_index(z_a, z_b)])

    theta_a_given_b = np.array(
        [mean(+1, z_b) - mean(-1, z_b) for z_b in LEVELS]
    )
    theta_b_given_a = np.array(
        [mean(z_a, +1) - mean(z_a, -1) for z_a in LEVELS]
    )
    theta_a = float(theta_a_given_b.mean())
    theta_ab = float((theta_a_given_b[1] - theta_a_given_b[0]) / 2.0)
    return EstimandSummary(
        cell_means=cell_means,
        theta_a=theta_a,
        theta_ab=theta_ab,
        theta_a_given_b=theta_a_given_b,
        theta_b_given_a=theta_b_given_a,
    )


def unit_effects_a_given_b(table: PotentialOutcomesTable, z_b: int) -> np.ndarray:
    """Unit-level A contrasts holding B fixed at ``z_b``."""
    return table.column(+1, z_b) - table.column(-1, z_b)


def unit_effects_b_given_a(table: PotentialOutcomesTable, z_a: int) -> np.ndarray:
    """Unit-level B contrasts holding A fixed at ``z_a``."""
    return table.column(z_a, +1) - table.column(z_a, -1)


def dispersions(table: PotentialOutcomesTable) -> DispersionSummary:
    """All population dispersion quantities (divisor N-1 throughout)."""
    y = table.outcomes
    n = table.n_units
    centered = y - y.mean(axis=0)
    s_cross = centered.T @ centered / (n - 1)
    s2_cell = np.diag(s_cross).copy()

    eff_minus = unit_effects_a_given_b(table, -1)
    eff_plus = unit_effects_a_given_b(table, +1)
    dev_minus = eff_minus - eff_minus.mean()
    dev_plus = eff_plus - eff_plus.mean()
    s2_a_given_b = np.array(
        [float(dev_minus @ dev_minus), float(dev_plus @ dev_plus)]
    ) / (n - 1)
    s_cond_cross = float(dev_plus @ dev_minus) / (n - 1)

    eff_a = (eff_plus + eff_minus) / 2.0
    dev_a = eff_a - eff_a.mean()
    s2_a = float(dev_a @ dev_a) / (n - 1)

    sum_sq = np.array(
        [float(np.sum(unit_effects_b_given_a(table, z_a) ** 2)) for z_a in LEVELS]
    )
    return DispersionSummary(
        s2_cell=s2_cell,
        s_cross=s_cross,
        s2_a=s2_a,
        s2_a_given_b=s2_a_given_b,
        s_cond_cross=s_cond_cross,
        sum_sq_theta_b_given_a=sum_sq,
    )


def weighted_effect_dispersion(table: PotentialOutcomesTable, pi_b: float) -> float:
    """Dispersion of the pi_b-weighted mix of conditional unit A effects.

    Quadratic form in the conditional-effect variances and covariance:

        pi^2 * S2[A|+1_B] + (1-pi)^2 * S2[A|-1_B] + 2 pi (1-pi) * S[+,-]

    Equals :func:`weighted_effect_dispersion_direct`; the two are computed
    along independent routes and cross-checked in the tests.
    """
    _check_probability(pi_b)
    d = dispersions(table)
    return float(
        pi_b**2 * d.s2_a_given_b[1]
        + (1.0 - pi_b) ** 2 * d.s2_a_given_b[0]
        + 2.0 * pi_b * (1.0 - pi_b) * d.s_cond_cross
    )


def weighted_effect_dispersion_direct(
    table: PotentialOutcomesTable, pi_b: float
) -> float:
    """Same quantity as :func:`weighted_effect_dispersion`, via the direct sum

        (N-1)^-1 sum_i ( sum_{z_b} w(z_b) (theta_{i,A|z_b} - theta_{A|z_b}) )^2

    with w(+1) = pi_b and w(-1) = 1 - pi_b.
    """
    _check_probability(pi_b)
    n = table.n_units
    mix = np.zeros(n)
    for z_b, weight in ((-1, 1.0 - pi_b), (+1, pi_b)):
        eff = unit_effects_a_given_b(table, z_b)
        mix += weight * (eff - eff.mean())
    return float(mix @ mix) / (n - 1)


def is_strictly_additive(table: PotentialOutcomesTable, atol: float = 1e-9) -> bool:
    """True when every between-cell contrast is constant across units."""
    y = table.outcomes
    rel = y - y[:, :1]
    return bool(np.all(np.abs(rel - rel[:1, :]) <= atol))


def write_table_csv(table: PotentialOutcomesTable, path) -> None:
    """Write the table with header ``y_mm,y_pm,y_mp,y_pp``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_CSV_HEADER)
        for row in table.outcomes:
            writer.writerow([repr(float(v)) for v in row])


def read_table_csv(path) -> PotentialOutcomesTable:
    """Read a table written by :func:`write_table_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TABLE_CSV_HEADER:
            raise ValueError(
                f"bad table header {header!r}, expected {','.join(TABLE_CSV_HEADER)}"
            )
        rows = [[float(v) for v in row] for row in reader if row]
    return build_table(np.array(rows, dtype=float))


def _check_probability(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly in (0, 1), got {p}")
