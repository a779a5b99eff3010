"""Closed-form sampling moments of the estimators for a known population.

Everything here is exact arithmetic over the potential-outcomes table
and the design, with no simulation: the expectation and sampling
variance of the arm-contrast estimator, the conservative bias of its
variance estimator, and the conditional sampling variance of the
cell-contrast estimator.  Simulations overlay these values as
noise-free references, and the exhaustive-enumeration oracle validates
every formula at small N.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from dataclasses import fields as dataclass_fields

import numpy as np

from .assignment import (
    Design,
    joint_indicator_covariance,
    level_probability_b,
    truncated_inverse_mean,
)
from .population import (
    CELLS,
    LEVELS,
    PotentialOutcomesTable,
    cell_index,
    dispersions,
    estimands,
    is_strictly_additive,
    level_index,
    unit_effects_b_given_a,
    weighted_effect_dispersion,
    weighted_effect_dispersion_direct,
)

MODE_HALF_PI = "half_pi"
MODE_STRICT_ADDITIVE = "strict_additive"


@dataclass(frozen=True)
class TheoreticalMoments:
    """Exact moments of both estimators under one design."""

    e_theta1: float
    bias_theta1: float
    var_theta1: float
    varest_bias_theta1: float
    e_theta2: float
    var_theta2: float


def expectation_theta1(table: PotentialOutcomesTable, pi_b: float) -> float:
    """E of the arm contrast: the pi_b-weighted mix of conditional A effects."""
    if not 0.0 < pi_b < 1.0:
        raise ValueError(f"pi_b must lie strictly in (0, 1), got {pi_b}")
    est = estimands(table)
    return float(
        pi_b * est.theta_a_given_b[1] + (1.0 - pi_b) * est.theta_a_given_b[0]
    )


def bias_theta1(table: PotentialOutcomesTable, pi_b: float) -> float:
    """Bias of the arm contrast; zero when pi_b = 1/2 or the interaction is zero."""
    return expectation_theta1(table, pi_b) - estimands(table).theta_a


def variance_theta1(table: PotentialOutcomesTable, design: Design) -> float:
    """Exact sampling variance of the arm-contrast estimator.

    Per arm: the Bernoulli-mixing penalty
    pi(1-pi) [ mean of squared unit-level B effects + 2 Cov(cells) ],
    plus the squared-weight combination of cell variances; minus the
    usual finite-population correction, here with the weighted
    conditional-effect dispersion in place of the plain effect variance.
    """
    _check_design_table(table, design)
    pi = design.pi_b
    n = design.n_units
    disp = dispersions(table)
    total = 0.0
    for z_a in LEVELS:
        n_arm = design.arm_size(z_a)
        cross = disp.s_cross[cell_index(z_a, +1), cell_index(z_a, -1)]
        mean_sq_b = disp.sum_sq_theta_b_given_a[level_index(z_a)] / n
        total += pi * (1.0 - pi) / n_arm * (mean_sq_b + 2.0 * cross)
        for z_b in LEVELS:
            p = level_probability_b(design, z_b)
            total += p**2 * disp.s2_cell[cell_index(z_a, z_b)] / n_arm
    return float(total - weighted_effect_dispersion(table, pi) / n)


def variance_theta1_special(
    table: PotentialOutcomesTable,
    design: Design,
    mode: str,
    verbatim: bool = False,
) -> float:
    """Special-case variance formulas for the arm-contrast estimator.

    ``half_pi`` requires pi_b = 1/2 and evaluates the simplified display
    for that case.  ``strict_additive`` requires a strictly additive
    table; its default evaluates the reduction implied by the general
    formula, while ``verbatim=True`` keeps the extra 1/N factor that the
    printed reduction carries on its first term (retained only so the
    discrepancy can be demonstrated; enumeration sides with the default).
    """
    _check_design_table(table, design)
    n = design.n_units
    disp = dispersions(table)

    if mode == MODE_HALF_PI:
        if design.pi_b != 0.5:
            raise ValueError("half_pi mode requires pi_b = 1/2")
        if verbatim:
            raise ValueError("verbatim applies only to strict_additive mode")
        total = 0.0
        for z_a in LEVELS:
            n_arm = design.arm_size(z_a)
            cross = disp.s_cross[cell_index(z_a, +1), cell_index(z_a, -1)]
            mean_sq_b = disp.sum_sq_theta_b_given_a[level_index(z_a)] / n
            total += (mean_sq_b / 2.0 + cross) / (2.0 * n_arm)
            for z_b in LEVELS:
                total += disp.s2_cell[cell_index(z_a, z_b)] / (4.0 * n_arm)
        return float(total - disp.s2_a / n)

    if mode == MODE_STRICT_ADDITIVE:
        if not is_strictly_additive(table):
            raise ValueError("strict_additive mode requires a strictly additive table")
        pi = design.pi_b
        est = estimands(table)
        s2_common = float(disp.s2_cell.mean())
        total = 0.0
        for z_a in LEVELS:
            n_arm = design.arm_size(z_a)
            theta_b = est.theta_b_given_a[level_index(z_a)]
            first = pi * (1.0 - pi) * theta_b**2 / n_arm
            if verbatim:
                first /= n
            total += first + s2_common / n_arm
        return float(total)

    raise ValueError(f"unknown mode {mode!r}")


def variance_theta1_altform(table: PotentialOutcomesTable, design: Design) -> float:
    """Arm-contrast variance assembled from raw joint-indicator moments.

    Independent route used to cross-check :func:`variance_theta1`: each
    cell pair contributes the covariance-weighted outcome products

        sum_i Cov(W_i(z), W_i(z*)) Y_i(z) Y_i(z*)
        + sum_{i != i'} Cov(W_i(z), W_i'(z*)) Y_i(z) Y_i'(z*)

    combined with arm-size weights (positive on the diagonal, negative
    within an arm, positive across arms over N+ N-).
    """
    _check_design_table(table, design)

    def cov_weighted_products(z: tuple[int, int], z_star: tuple[int, int]) -> float:
        y = table.column(*z)
        y_star = table.column(*z_star)
        cov_same = joint_indicator_covariance(design, 0, 0, z, z_star)
        cov_diff = joint_indicator_covariance(design, 0, 1, z, z_star)
        same = float(y @ y_star)
        return cov_same * same + cov_diff * (float(y.sum()) * float(y_star.sum()) - same)

    n_plus, n_minus = design.n_plus_a, design.n_minus_a
    total = 0.0
    for z in CELLS:
        for z_star in CELLS:
            block = cov_weighted_products(z, z_star)
            if z == z_star:
                total += block / design.arm_size(z[0]) ** 2
            elif z[0] == z_star[0]:
                # cross-cell blocks enter negated relative to the diagonal;
                # within-arm pairs therefore add, cross-arm pairs subtract
                total += block / design.arm_size(z[0]) ** 2
            else:
                total -= block / (n_plus * n_minus)
    return total


def varest_bias_theta1(table: PotentialOutcomesTable, design: Design) -> float:
    """Exact (nonnegative) bias of the pooled Neyman variance estimator.

    Equals the weighted conditional-effect dispersion divided by N, so
    it vanishes exactly when every unit shares the population's
    conditional A effects.
    """
    _check_design_table(table, design)
    return weighted_effect_dispersion_direct(table, design.pi_b) / design.n_units


def variance_theta2(table: PotentialOutcomesTable, design: Design) -> float:
    """Exact conditional sampling variance of the cell-contrast estimator.

    Conditions on every cell being occupied; the inverse cell-count
    moments come from the truncated binomial in closed form, never from
    simulation.  Under strict additivity the correction term is zero and
    all four cell variances coincide, so the value reduces to the common
    variance times the summed inverse-count moments over 4.
    """
    _check_design_table(table, design)
    if min(design.n_plus_a, design.n_minus_a) < 2:
        raise ValueError("each arm needs at least 2 units to occupy both cells")
    disp = dispersions(table)
    total = 0.0
    for z_a in LEVELS:
        n_arm = design.arm_size(z_a)
        for z_b in LEVELS:
            inv_mean = truncated_inverse_mean(n_arm, design.pi_b, z_b)
            total += inv_mean * disp.s2_cell[cell_index(z_a, z_b)] / 4.0
    return float(total - disp.s2_a / design.n_units)


def theoretical_moments(table: PotentialOutcomesTable, design: Design) -> TheoreticalMoments:
    """Bundle of all closed-form moments for one table and design."""
    theta_a = estimands(table).theta_a
    e1 = expectation_theta1(table, design.pi_b)
    return TheoreticalMoments(
        e_theta1=e1,
        bias_theta1=e1 - theta_a,
        var_theta1=variance_theta1(table, design),
        varest_bias_theta1=varest_bias_theta1(table, design),
        e_theta2=theta_a,
        var_theta2=variance_theta2(table, design),
    )


def moments_csv_header() -> tuple[str, ...]:
    return tuple("exact_" + f.name for f in dataclass_fields(TheoreticalMoments))


def write_moments_csv(moments: TheoreticalMoments, path) -> None:
    """Single-row CSV with ``exact_``-prefixed columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(moments_csv_header())
        writer.writerow(
            [repr(getattr(moments, f.name)) for f in dataclass_fields(TheoreticalMoments)]
        )


def _check_design_table(table: PotentialOutcomesTable, design: Design) -> None:
    if table.n_units != design.n_units:
        raise ValueError(
            f"table has {table.n_units} units but design expects {design.n_units}"
        )
