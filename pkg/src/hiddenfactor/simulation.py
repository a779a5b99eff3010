"""Monte Carlo study: population models, replicate loop, metric sweep.

A sweep draws one finite population from a generative model, fixes its
true effect, then walks a grid of B-assignment probabilities.  At each
grid point it simulates many assignments per situation (B labels hidden
vs observed), computes interval coverage, width, MSE and relative
biases, and attaches the exact closed-form overlays from
:mod:`hiddenfactor.theory`.

Reproducibility: every replicate draws from its own generator derived
as ``substream(master_seed, grid_index, replicate_index, situation_index)``
and aggregation runs in replicate order, so results are byte-identical
for any thread count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .assignment import (
    DEFAULT_MAX_ATTEMPTS,
    Design,
    _rejection_sample,
    sample_assignment,
    substream,
)
from .estimators import (
    ObservedData,
    confidence_interval,
    observe,
    theta_hat_1,
    theta_hat_2,
    var_hat_1,
    var_hat_2,
)
from .population import PotentialOutcomesTable, build_table, estimands
from .theory import expectation_theta1, variance_theta1, variance_theta2

MODEL_STRICT_ADDITIVE = "strict_additive"
MODEL_CORRELATED_NORMAL = "correlated_normal"

SITUATION_I = "I"
SITUATION_II = "II"

SWEEP_CSV_HEADER = (
    "model", "situation", "pi_b", "coverage", "mean_width", "mse",
    "rel_bias", "varest_rel_bias", "exact_bias", "exact_var", "acceptance_rate",
)


@dataclass(frozen=True)
class PopulationModel:
    """Generative model for the potential-outcomes table.

    ``strict_additive`` shares one normal noise draw across a unit's four
    cells, so all between-cell contrasts are exactly constant across
    units.  ``correlated_normal`` draws the four cells jointly normal
    with equal pairwise correlation ``rho`` (positive definite for
    rho in (-1/3, 1)).
    """

    kind: str
    theta_a: float
    theta_b: float
    theta_ab: float
    sigma2: float
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in (MODEL_STRICT_ADDITIVE, MODEL_CORRELATED_NORMAL):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.sigma2 <= 0.0:
            raise ValueError("sigma2 must be positive")
        if self.kind == MODEL_CORRELATED_NORMAL and not -1.0 / 3.0 < self.rho < 1.0:
            raise ValueError(
                "rho must lie in (-1/3, 1) for a positive-definite equicorrelation"
            )

    def cell_offsets(self) -> np.ndarray:
        """Cell means in canonical order implied by the model parameters."""
        return np.array(
            [
                self.theta_ab,
                self.theta_a,
                self.theta_b,
                self.theta_a + self.theta_b + self.theta_ab,
            ]
        )


@dataclass(frozen=True)
class SweepConfig:
    """Full description of one Monte Carlo sweep."""

    n_units: int
    n_plus_a: int
    model: PopulationModel
    pi_grid: tuple[float, ...]
    replicates: int
    min_cell: int
    alpha: float
    master_seed: int
    situations: tuple[str, ...] = (SITUATION_I, SITUATION_II)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.pi_grid:
            raise ValueError("pi_grid must be nonempty")
        for pi in self.pi_grid:
            if not 0.0 < pi < 1.0:
                raise ValueError(f"grid value {pi} outside (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly in (0, 1)")
        for situation in self.situations:
            if situation not in (SITUATION_I, SITUATION_II):
                raise ValueError(f"unknown situation {situation!r}")
        if SITUATION_II in self.situations and self.min_cell < 2:
            raise ValueError("situation II requires min_cell >= 2")
        # Design() validates n_units / n_plus_a; build one to fail early.
        Design(self.n_units, self.n_plus_a, self.pi_grid[0])


@dataclass(frozen=True)
class ReplicateRecord:
    """Outcome of a single simulated assignment."""

    point: float
    varhat: float
    ci_low: float
    ci_high: float
    covered: bool
    width: float
    attempts: int


@dataclass(frozen=True)
class SweepRow:
    """Aggregated metrics for one (pi_b, situation) grid point."""

    model: str
    situation: str
    pi_b: float
    coverage: float
    mean_width: float
    mse: float
    rel_bias: float
    varest_rel_bias: float
    exact_bias: float
    exact_var: float
    acceptance_rate: float


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    theta_a: float
    rows: tuple[SweepRow, ...]


def generate_population(
    model: PopulationModel, n: int, rng: np.random.Generator
) -> PotentialOutcomesTable:
    """Draw one finite population of size ``n`` from the model."""
    offsets = model.cell_offsets()
    if model.kind == MODEL_STRICT_ADDITIVE:
        eps = rng.normal(0.0, np.sqrt(model.sigma2), size=n)
        matrix = eps[:, None] + offsets[None, :]
    else:
        cov = model.sigma2 * (
            (1.0 - model.rho) * np.eye(4) + model.rho * np.ones((4, 4))
        )
        chol = np.linalg.cholesky(cov)
        matrix = offsets[None, :] + rng.standard_normal((n, 4)) @ chol.T
    return build_table(matrix)


def run_replicate(
    table: PotentialOutcomesTable,
    design: Design,
    situation: str,
    min_cell: int,
    alpha: float,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> ReplicateRecord:
    """Simulate one assignment and evaluate the situation's estimator on it."""
    theta_a = estimands(table).theta_a
    if situation == SITUATION_I:
        assignment = sample_assignment(design, rng)
        attempts = 1
        data: ObservedData = observe(table, assignment, b_visible=False)
        point = theta_hat_1(data)
        varhat = var_hat_1(data)
    elif situation == SITUATION_II:
        assignment, attempts = _rejection_sample(design, min_cell, rng, max_attempts)
        data = observe(table, assignment, b_visible=True)
        point = theta_hat_2(data)
        varhat = var_hat_2(data)
    else:
        raise ValueError(f"unknown situation {situation!r}")
    ci_low, ci_high = confidence_interval(point, varhat, alpha)
    return ReplicateRecord(
        point=point,
        varhat=varhat,
        ci_low=ci_low,
        ci_high=ci_high,
        covered=bool(ci_low <= theta_a <= ci_high),
        width=ci_high - ci_low,
        attempts=attempts,
    )


def _grid_point_records(
    table: PotentialOutcomesTable,
    config: SweepConfig,
    grid_index: int,
    situation_index: int,
    threads: int,
) -> list[ReplicateRecord]:
    design = Design(config.n_units, config.n_plus_a, config.pi_grid[grid_index])
    situation = config.situations[situation_index]

    def one(replicate: int) -> ReplicateRecord:
        rng = substream(config.master_seed, grid_index, replicate, situation_index)
        return run_replicate(table, design, situation, config.min_cell, config.alpha, rng)

    indices = range(config.replicates)
    if threads <= 1:
        return [one(r) for r in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, indices))


def run_sweep(config: SweepConfig, threads: int = 1) -> SweepResult:
    """Run the full grid x situations study for one population draw."""
    table = generate_population(config.model, config.n_units, substream(config.master_seed))
    theta_a = estimands(table).theta_a

    rows = []
    for grid_index, pi_b in enumerate(config.pi_grid):
        design = Design(config.n_units, config.n_plus_a, pi_b)
        for situation_index, situation in enumerate(config.situations):
            records = _grid_point_records(
                table, config, grid_index, situation_index, threads
            )
            points = np.array([r.point for r in records])
            varhats = np.array([r.varhat for r in records])
            widths = np.array([r.width for r in records])
            covered = np.array([r.covered for r in records])
            if situation == SITUATION_I:
                exact_bias = expectation_theta1(table, pi_b) - theta_a
                exact_var = variance_theta1(table, design)
                acceptance_rate = 1.0
            else:
                exact_bias = 0.0
                exact_var = variance_theta2(table, design)
                acceptance_rate = config.replicates / sum(r.attempts for r in records)
            mean_point = float(points.mean())
            rows.append(
                SweepRow(
                    model=config.model.kind,
                    situation=situation,
                    pi_b=pi_b,
                    coverage=float(covered.mean()),
                    mean_width=float(widths.mean()),
                    mse=float(((points - theta_a) ** 2).mean()),
                    rel_bias=(mean_point - theta_a) / theta_a
                    if theta_a != 0.0 else float("nan"),
                    varest_rel_bias=(float(varhats.mean()) - exact_var) / exact_var
                    if exact_var != 0.0 else float("nan"),
                    exact_bias=exact_bias,
                    exact_var=exact_var,
                    acceptance_rate=acceptance_rate,
                )
            )
    return SweepResult(config=config, theta_a=theta_a, rows=tuple(rows))


def write_sweep_csv(result: SweepResult, path) -> None:
    """Write one row per (pi_b, situation) with round-trippable floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER)
        for row in result.rows:
            writer.writerow(
                (
                    row.model,
                    row.situation,
                    repr(row.pi_b),
                    repr(row.coverage),
                    repr(row.mean_width),
                    repr(row.mse),
                    repr(row.rel_bias),
                    repr(row.varest_rel_bias),
                    repr(row.exact_bias),
                    repr(row.exact_var),
                    repr(row.acceptance_rate),
                )
            )


def read_sweep_csv(path) -> list[SweepRow]:
    """Parse a sweep CSV back into rows; floats round-trip exactly."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SWEEP_CSV_HEADER:
            raise ValueError(f"bad sweep header {header!r}")
        rows = []
        for raw in reader:
            if not raw:
                continue
            model, situation, *numbers = raw
            rows.append(SweepRow(model, situation, *(float(v) for v in numbers)))
    return rows


def sweep_config_from_dict(payload: dict) -> SweepConfig:
    """Build a SweepConfig from parsed JSON; unknown keys are errors."""
    model_keys = {"kind", "theta_a", "theta_b", "theta_ab", "sigma2", "rho"}
    config_keys = {
        "n_units", "n_plus_a", "model", "pi_grid", "replicates",
        "min_cell", "alpha", "master_seed", "situations",
    }
    unknown = set(payload) - config_keys
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    missing = config_keys - set(payload) - {"situations"}
    if missing:
        raise ValueError(f"missing config keys: {sorted(missing)}")
    model_payload = payload["model"]
    if not isinstance(model_payload, dict):
        raise ValueError("model must be an object")
    unknown_model = set(model_payload) - model_keys
    if unknown_model:
        raise ValueError(f"unknown model keys: {sorted(unknown_model)}")
    model = PopulationModel(
        kind=model_payload["kind"],
        theta_a=float(model_payload["theta_a"]),
        theta_b=float(model_payload["theta_b"]),
        theta_ab=float(model_payload["theta_ab"]),
        sigma2=float(model_payload["sigma2"]),
        rho=float(model_payload.get("rho", 0.0)),
    )
    return SweepConfig(
        n_units=int(payload["n_units"]),
        n_plus_a=int(payload["n_plus_a"]),
        model=model,
        pi_grid=tuple(float(v) for v in payload["pi_grid"]),
        replicates=int(payload["replicates"]),
        min_cell=int(payload["min_cell"]),
        alpha=float(payload["alpha"]),
        master_seed=int(payload["master_seed"]),
        situations=tuple(payload.get("situations", (SITUATION_I, SITUATION_II))),
    )
