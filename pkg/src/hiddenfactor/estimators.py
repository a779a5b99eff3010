"""Point and variance estimators computed from one realized assignment.

Two information regimes are supported.  When the factor-B labels are
hidden, only the arm-mean contrast ``theta_hat_1`` and its pooled Neyman
variance estimator are available.  When the labels are observed, the
cell-mean contrast ``theta_hat_2`` applies, with either the
conditional-on-counts variance estimator or the plug-in estimator that
models the cell counts as truncated binomials.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .assignment import Assignment, Design, truncated_inverse_mean
from .population import LEVELS, PotentialOutcomesTable, cell_index, level_index

#: Arm sample variances divided by (arm size - 1); unbiased given the B split.
DIVISOR_ARM = "arm_size_minus_1"
#: Verbatim alternative dividing by (N - 1).
DIVISOR_POPULATION = "n_minus_1"

REPORT_CSV_HEADER = ("estimator", "point", "var_method", "var", "ci_low", "ci_high", "alpha")


@dataclass(frozen=True)
class ObservedData:
    """Per-unit observed outcomes with assignment labels.

    ``w_b`` is None when the factor-B allocation is hidden; cell-level
    reads then raise instead of silently using unavailable labels.
    """

    y_obs: np.ndarray
    w_a: np.ndarray
    w_b: np.ndarray | None

    @property
    def n_units(self) -> int:
        return self.y_obs.shape[0]

    @property
    def b_observed(self) -> bool:
        return self.w_b is not None

    def arm_count(self, z_a: int) -> int:
        level_index(z_a)
        n_plus = int(self.w_a.sum())
        return n_plus if z_a == +1 else self.n_units - n_plus

    def arm_values(self, z_a: int) -> np.ndarray:
        """Observed outcomes of all units in arm ``z_a``."""
        level_index(z_a)
        mask = self.w_a == 1 if z_a == +1 else self.w_a == 0
        return self.y_obs[mask]

    def _require_b(self) -> np.ndarray:
        if self.w_b is None:
            raise ValueError("factor-B labels unavailable: allocation was hidden")
        return self.w_b

    def cell_values(self, z_a: int, z_b: int) -> np.ndarray:
        """Observed outcomes of all units in cell (z_a, z_b)."""
        w_b = self._require_b()
        mask_a = self.w_a == 1 if z_a == +1 else self.w_a == 0
        mask_b = w_b == 1 if z_b == +1 else w_b == 0
        return self.y_obs[mask_a & mask_b]

    def cell_counts(self) -> np.ndarray:
        """Cell counts in canonical order; requires observed B."""
        w_b = self._require_b()
        n_pp = int(np.sum((self.w_a == 1) & (w_b == 1)))
        n_pm = int(self.w_a.sum()) - n_pp
        n_mp = int(w_b.sum()) - n_pp
        return np.array([self.n_units - n_pp - n_pm - n_mp, n_pm, n_mp, n_pp])

    def pi_b_pooled(self) -> float:
        """Pooled estimate of pi_b: observed share of +1 B labels."""
        return float(self._require_b().sum()) / self.n_units


@dataclass(frozen=True)
class EstimateReport:
    """One estimate with its variance estimate and confidence interval."""

    estimator_id: str
    point: float
    variance_estimate: float
    variance_method: str
    ci_low: float
    ci_high: float
    alpha: float


def observe(
    table: PotentialOutcomesTable, assignment: Assignment, b_visible: bool = True
) -> ObservedData:
    """Reveal each unit's potential outcome under its assigned cell.

    With ``b_visible=False`` the B labels are withheld from the returned
    data even though they determined the observed outcomes.
    """
    if table.n_units != assignment.n_units:
        raise ValueError(
            f"table has {table.n_units} units but assignment has {assignment.n_units}"
        )
    cols = np.array(
        [cell_index(+1 if a else -1, +1 if b else -1)
         for a, b in zip(assignment.w_a, assignment.w_b)]
    )
    y_obs = table.outcomes[np.arange(table.n_units), cols].copy()
    y_obs.flags.writeable = False
    return ObservedData(
        y_obs=y_obs,
        w_a=assignment.w_a,
        w_b=assignment.w_b if b_visible else None,
    )


def theta_hat_1(data: ObservedData) -> float:
    """Arm-mean contrast: mean(+1 arm) - mean(-1 arm).  Ignores B labels."""
    for z_a in LEVELS:
        if data.arm_count(z_a) < 1:
            raise ValueError(f"arm {z_a:+d} is empty")
    return float(data.arm_values(+1).mean() - data.arm_values(-1).mean())


def var_hat_1(data: ObservedData, divisor_mode: str = DIVISOR_ARM) -> float:
    """Pooled Neyman variance estimator: sum over arms of s2(arm)/arm_size.

    ``divisor_mode`` selects the denominator of the arm sample variance:
    ``arm_size_minus_1`` (default) or the verbatim ``n_minus_1`` variant.
    Exact enumeration arbitrates between the two (see the acceptance
    suite); only the default satisfies the conservative-bias identity.
    """
    if divisor_mode not in (DIVISOR_ARM, DIVISOR_POPULATION):
        raise ValueError(f"unknown divisor mode {divisor_mode!r}")
    total = 0.0
    for z_a in LEVELS:
        values = data.arm_values(z_a)
        if values.size < 2:
            raise ValueError(f"arm {z_a:+d} needs at least 2 units, has {values.size}")
        divisor = values.size - 1 if divisor_mode == DIVISOR_ARM else data.n_units - 1
        dev = values - values.mean()
        total += float(dev @ dev) / divisor / values.size
    return total


def theta_hat_2(data: ObservedData) -> float:
    """Cell-mean contrast averaging the A effect over both observed B levels."""
    counts = data.cell_counts()
    if int(counts.min()) < 1:
        raise ValueError("every cell needs at least 1 unit")
    total = 0.0
    for z_b in LEVELS:
        total += float(data.cell_values(+1, z_b).mean() - data.cell_values(-1, z_b).mean())
    return total / 2.0


def var_hat_2(data: ObservedData) -> float:
    """Conditional variance estimator: sum of s2(cell) / (4 * cell count)."""
    counts = data.cell_counts()
    if int(counts.min()) < 2:
        raise ValueError("every cell needs at least 2 units for its sample variance")
    total = 0.0
    for z_a in LEVELS:
        for z_b in LEVELS:
            values = data.cell_values(z_a, z_b)
            dev = values - values.mean()
            s2 = float(dev @ dev) / (values.size - 1)
            total += s2 / (4.0 * values.size)
    return total


def var_hat_2_plugin(data: ObservedData, design: Design) -> float:
    """Plug-in variance estimator using estimated inverse-count moments.

    Pools the B labels into ``pi_b_hat`` and evaluates the truncated
    binomial mean of 1/N_cell at that estimate for every cell, instead
    of conditioning on the realized counts.
    """
    counts = data.cell_counts()
    if int(counts.min()) < 2:
        raise ValueError("every cell needs at least 2 units for its sample variance")
    pi_hat = data.pi_b_pooled()
    total = 0.0
    for z_a in LEVELS:
        n_arm = design.arm_size(z_a)
        for z_b in LEVELS:
            values = data.cell_values(z_a, z_b)
            dev = values - values.mean()
            s2 = float(dev @ dev) / (values.size - 1)
            total += truncated_inverse_mean(n_arm, pi_hat, z_b) * s2 / 4.0
    return total


def normal_quantile_two_sided(alpha: float) -> float:
    """z multiplier for a symmetric (1-alpha) normal interval.

    alpha = 0.05 returns exactly 1.96 so replication output matches the
    conventional figure; other levels use the exact normal quantile.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly in (0, 1), got {alpha}")
    if alpha == 0.05:
        return 1.96
    return float(ndtri(1.0 - alpha / 2.0))


def confidence_interval(
    point: float, variance_estimate: float, alpha: float
) -> tuple[float, float]:
    """Symmetric normal-approximation interval around the point estimate."""
    if variance_estimate < 0.0:
        raise ValueError("variance estimate must be nonnegative")
    half = normal_quantile_two_sided(alpha) * float(np.sqrt(variance_estimate))
    return point - half, point + half


def make_report(
    estimator_id: str,
    point: float,
    variance_estimate: float,
    variance_method: str,
    alpha: float,
) -> EstimateReport:
    low, high = confidence_interval(point, variance_estimate, alpha)
    return EstimateReport(
        estimator_id=estimator_id,
        point=point,
        variance_estimate=variance_estimate,
        variance_method=variance_method,
        ci_low=low,
        ci_high=high,
        alpha=alpha,
    )


def write_reports_csv(reports, path) -> None:
    """One ``estimator,point,var_method,var,ci_low,ci_high,alpha`` row per report."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_CSV_HEADER)
        for r in reports:
            writer.writerow(
                (
                    r.estimator_id,
                    repr(r.point),
                    r.variance_method,
                    repr(r.variance_estimate),
                    repr(r.ci_low),
                    repr(r.ci_high),
                    repr(r.alpha),
                )
            )
