"""Exact randomization-distribution moments by exhaustive enumeration.

For small N the assignment space is walked completely: every subset of
units assigned +1 on A (uniform weight) crossed with every B pattern
(Bernoulli product weight).  Means, variances, variance-estimator
expectations, and interval coverage computed here are exact up to
floating-point roundoff, which makes this module the validator of
record for every closed-form result in :mod:`hiddenfactor.theory` and
for the estimator implementations themselves.

Within a subset, the B patterns are processed as one vectorized block;
subsets are accumulated in their combinatorial order, so results are
deterministic and independent of any partitioning.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .assignment import Design, truncated_inverse_mean
from .estimators import normal_quantile_two_sided
from .population import PotentialOutcomesTable, estimands

ENUMERATION_LIMIT = 100_000_000

ESTIMATOR_THETA1 = "theta_a_1"
ESTIMATOR_THETA2 = "theta_a_2"


class EnumerationSizeError(ValueError):
    """Assignment space too large for exhaustive enumeration."""


@dataclass(frozen=True)
class ExactMoments:
    """Exact moments over the (possibly conditioned) assignment space.

    ``mean_varhat_plugin`` is NaN except for the cell-contrast estimator
    enumerated with min_cell >= 2, where the plug-in variance estimator
    is defined everywhere on the support.
    """

    mean: float
    variance: float
    mean_varhat: float
    conditional_event: str
    event_probability: float
    mean_varhat_plugin: float = float("nan")


def _check_size(design: Design) -> None:
    count = math.comb(design.n_units, design.n_plus_a) * 2**design.n_units
    if count > ENUMERATION_LIMIT:
        raise EnumerationSizeError(
            f"{count} assignments exceed the enumeration limit of {ENUMERATION_LIMIT}"
        )


def _b_patterns(design: Design) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All 2^N B patterns, their +1 counts, and their Bernoulli weights."""
    n = design.n_units
    patterns = ((np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    k = patterns.sum(axis=1)
    weights = design.pi_b**k * (1.0 - design.pi_b) ** (n - k)
    return patterns, k, weights


def _a_subsets(design: Design):
    """Indicator vectors of every +1-on-A subset, in combinatorial order."""
    n = design.n_units
    for combo in itertools.combinations(range(n), design.n_plus_a):
        a = np.zeros(n)
        a[list(combo)] = 1.0
        yield a


def enumerate_theta1(
    table: PotentialOutcomesTable,
    design: Design,
    divisor_mode: str = "arm_size_minus_1",
) -> ExactMoments:
    """Exact moments of the arm-contrast estimator and its variance estimator."""
    _check_table(table, design)
    _check_size(design)
    patterns, _, weights = _b_patterns(design)
    y = table.outcomes
    # Observed outcome of unit i in each arm depends only on its B draw.
    plus_arm = patterns * y[:, 3] + (1.0 - patterns) * y[:, 1]
    minus_arm = patterns * y[:, 2] + (1.0 - patterns) * y[:, 0]
    plus_sq = plus_arm**2
    minus_sq = minus_arm**2

    n = design.n_units
    n_plus, n_minus = design.n_plus_a, design.n_minus_a
    varhat_defined = min(n_plus, n_minus) >= 2
    if divisor_mode == "arm_size_minus_1":
        div_plus, div_minus = n_plus - 1, n_minus - 1
    elif divisor_mode == "n_minus_1":
        div_plus = div_minus = n - 1
    else:
        raise ValueError(f"unknown divisor mode {divisor_mode!r}")

    center = estimands(table).theta_a
    n_subsets = math.comb(n, n_plus)
    acc_theta = acc_theta_sq = acc_varhat = acc_weight = 0.0
    for a in _a_subsets(design):
        a_minus = 1.0 - a
        sum_p = plus_arm @ a
        sum_m = minus_arm @ a_minus
        theta = sum_p / n_plus - sum_m / n_minus - center
        acc_theta += float(weights @ theta)
        acc_theta_sq += float(weights @ theta**2)
        acc_weight += float(weights.sum())
        if varhat_defined:
            s2_p = (plus_sq @ a - sum_p**2 / n_plus) / div_plus
            s2_m = (minus_sq @ a_minus - sum_m**2 / n_minus) / div_minus
            acc_varhat += float(weights @ (s2_p / n_plus + s2_m / n_minus))

    mean_centered = acc_theta / n_subsets
    variance = acc_theta_sq / n_subsets - mean_centered**2
    return ExactMoments(
        mean=mean_centered + center,
        variance=variance,
        mean_varhat=acc_varhat / n_subsets if varhat_defined else float("nan"),
        conditional_event="none",
        event_probability=acc_weight / n_subsets,
    )


def enumerate_theta2(
    table: PotentialOutcomesTable, design: Design, min_cell: int = 1
) -> ExactMoments:
    """Exact conditional moments of the cell-contrast estimator.

    The enumeration is restricted to assignments whose four cell counts
    all reach ``min_cell`` and renormalized by the event probability.
    The variance estimators require occupied pairs, so their means are
    reported only when min_cell >= 2.
    """
    if min_cell < 1:
        raise ValueError("min_cell must be at least 1")
    _check_table(table, design)
    _check_size(design)
    if 2 * min_cell > min(design.n_plus_a, design.n_minus_a):
        raise ValueError(
            f"conditioning event empty: min_cell={min_cell} with arms "
            f"{design.n_plus_a}/{design.n_minus_a}"
        )
    patterns, k_plus_b, weights = _b_patterns(design)
    y = table.outcomes
    n = design.n_units
    n_plus, n_minus = design.n_plus_a, design.n_minus_a
    varhats_defined = min_cell >= 2

    # Plug-in inverse-count moments depend only on the total +1-B count.
    inv_by_k = np.full((n + 1, 4), np.nan)
    if varhats_defined:
        for k in range(1, n):
            pi_hat = k / n
            inv_by_k[k] = [
                truncated_inverse_mean(n_minus, pi_hat, -1),
                truncated_inverse_mean(n_plus, pi_hat, -1),
                truncated_inverse_mean(n_minus, pi_hat, +1),
                truncated_inverse_mean(n_plus, pi_hat, +1),
            ]

    center = estimands(table).theta_a
    n_subsets = math.comb(n, n_plus)
    acc = dict(theta=0.0, theta_sq=0.0, varhat=0.0, plugin=0.0, event=0.0)
    for a in _a_subsets(design):
        a_minus = 1.0 - a
        n_pp = patterns @ a
        n_pm = n_plus - n_pp
        n_mp = k_plus_b - n_pp
        n_mm = n_minus - n_mp
        valid = (
            (n_pp >= min_cell) & (n_pm >= min_cell)
            & (n_mp >= min_cell) & (n_mm >= min_cell)
        )
        idx = np.nonzero(valid)[0]
        if idx.size == 0:
            continue
        w = weights[idx]
        pat = patterns[idx]
        acc["event"] += float(w.sum())

        def cell_stats(arm_indicator: np.ndarray, col: int, counts: np.ndarray):
            values = arm_indicator * y[:, col]
            values_sq = arm_indicator * y[:, col] ** 2
            sums = pat @ values
            sums_sq = pat @ values_sq
            if col in (0, 1):  # -1_B cells live on the complement pattern
                sums = values.sum() - sums
                sums_sq = float(values_sq.sum()) - sums_sq
            return sums, sums_sq, counts[idx]

        stats = {
            0: cell_stats(a_minus, 0, n_mm),
            1: cell_stats(a, 1, n_pm),
            2: cell_stats(a_minus, 2, n_mp),
            3: cell_stats(a, 3, n_pp),
        }
        means = {c: s[0] / s[2] for c, s in stats.items()}
        theta = 0.5 * (means[3] - means[2] + means[1] - means[0]) - center
        acc["theta"] += float(w @ theta)
        acc["theta_sq"] += float(w @ theta**2)
        if varhats_defined:
            varhat = np.zeros(idx.size)
            plugin = np.zeros(idx.size)
            for col, (sums, sums_sq, counts) in stats.items():
                s2 = (sums_sq - sums**2 / counts) / (counts - 1)
                varhat += s2 / (4.0 * counts)
                plugin += s2 * inv_by_k[k_plus_b[idx].astype(int), col] / 4.0
            acc["varhat"] += float(w @ varhat)
            acc["plugin"] += float(w @ plugin)

    if acc["event"] == 0.0:
        raise ValueError("conditioning event has zero probability")
    mean_centered = acc["theta"] / acc["event"]
    variance = acc["theta_sq"] / acc["event"] - mean_centered**2
    return ExactMoments(
        mean=mean_centered + center,
        variance=variance,
        mean_varhat=acc["varhat"] / acc["event"] if varhats_defined else float("nan"),
        conditional_event=f"all_cells_ge({min_cell})",
        event_probability=acc["event"] / n_subsets,
        mean_varhat_plugin=acc["plugin"] / acc["event"] if varhats_defined else float("nan"),
    )


def exact_coverage(
    table: PotentialOutcomesTable,
    design: Design,
    estimator_id: str,
    min_cell: int,
    alpha: float,
) -> float:
    """Exact probability that the normal interval covers the true effect.

    Sums assignment mass where |estimate - theta_A| <= z * sqrt(varhat),
    over the support conditioned on all cell counts >= ``min_cell``
    (``min_cell=0`` leaves the arm-contrast support unconditioned).
    """
    _check_table(table, design)
    _check_size(design)
    z_crit = normal_quantile_two_sided(alpha)
    theta_a = estimands(table).theta_a
    patterns, k_plus_b, weights = _b_patterns(design)
    y = table.outcomes
    n_plus, n_minus = design.n_plus_a, design.n_minus_a

    if estimator_id == ESTIMATOR_THETA1:
        if min(n_plus, n_minus) < 2:
            raise ValueError("arm variance estimator needs both arms >= 2")
    elif estimator_id == ESTIMATOR_THETA2:
        if min_cell < 2:
            raise ValueError("cell variance estimator needs min_cell >= 2")
    else:
        raise ValueError(f"unknown estimator {estimator_id!r}")

    plus_arm = patterns * y[:, 3] + (1.0 - patterns) * y[:, 1]
    minus_arm = patterns * y[:, 2] + (1.0 - patterns) * y[:, 0]

    covered_mass = 0.0
    support_mass = 0.0
    for a in _a_subsets(design):
        a_minus = 1.0 - a
        if estimator_id == ESTIMATOR_THETA1:
            n_pp = patterns @ a
            n_mp = k_plus_b - n_pp
            if min_cell > 0:
                valid = (
                    (n_pp >= min_cell) & (n_plus - n_pp >= min_cell)
                    & (n_mp >= min_cell) & (n_minus - n_mp >= min_cell)
                )
                idx = np.nonzero(valid)[0]
            else:
                idx = np.arange(patterns.shape[0])
            if idx.size == 0:
                continue
            w = weights[idx]
            arm_p, arm_m = plus_arm[idx], minus_arm[idx]
            sum_p = arm_p @ a
            sum_m = arm_m @ a_minus
            theta = sum_p / n_plus - sum_m / n_minus
            s2_p = (arm_p**2 @ a - sum_p**2 / n_plus) / (n_plus - 1)
            s2_m = (arm_m**2 @ a_minus - sum_m**2 / n_minus) / (n_minus - 1)
            varhat = s2_p / n_plus + s2_m / n_minus
        else:
            n_pp = patterns @ a
            n_pm = n_plus - n_pp
            n_mp = k_plus_b - n_pp
            n_mm = n_minus - n_mp
            valid = (
                (n_pp >= min_cell) & (n_pm >= min_cell)
                & (n_mp >= min_cell) & (n_mm >= min_cell)
            )
            idx = np.nonzero(valid)[0]
            if idx.size == 0:
                continue
            w = weights[idx]
            pat = patterns[idx]
            theta = np.zeros(idx.size)
            varhat = np.zeros(idx.size)
            cells = (
                (a_minus, 0, n_mm, -0.5), (a, 1, n_pm, +0.5),
                (a_minus, 2, n_mp, -0.5), (a, 3, n_pp, +0.5),
            )
            for arm_indicator, col, counts, sign in cells:
                values = arm_indicator * y[:, col]
                values_sq = arm_indicator * y[:, col] ** 2
                sums = pat @ values
                sums_sq = pat @ values_sq
                if col in (0, 1):
                    sums = values.sum() - sums
                    sums_sq = float(values_sq.sum()) - sums_sq
                counts = counts[idx]
                theta += sign * sums / counts
                s2 = (sums_sq - sums**2 / counts) / (counts - 1)
                varhat += s2 / (4.0 * counts)

        covered = np.abs(theta - theta_a) <= z_crit * np.sqrt(varhat)
        covered_mass += float(w @ covered)
        support_mass += float(w.sum())

    if support_mass == 0.0:
        raise ValueError("conditioning event has zero probability")
    return covered_mass / support_mass


def _check_table(table: PotentialOutcomesTable, design: Design) -> None:
    if table.n_units != design.n_units:
        raise ValueError(
            f"table has {table.n_units} units but design expects {design.n_units}"
        )
