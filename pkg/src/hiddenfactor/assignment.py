"""Joint assignment mechanism: complete randomization of A, Bernoulli B.

Factor A is completely randomized: a fixed number ``n_plus_a`` of the N
units get level +1, the subset chosen uniformly at random.  Factor B is
an independent per-unit coin flip with success probability ``pi_b``.
This module samples that joint law (optionally conditioned on minimum
cell counts, by rejection), and evaluates its closed-form indicator
moments, which the exact sampling-variance formulas are built from.

Randomness is always injected as a ``numpy.random.Generator``; use
:func:`substream` to derive independent, reproducible generators from a
single 64-bit master seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .population import LEVELS, level_index

DEFAULT_MAX_ATTEMPTS = 100_000


class AcceptanceFailureError(RuntimeError):
    """Rejection sampler exhausted its attempt budget."""

    def __init__(self, design: "Design", min_cell: int, attempts: int):
        self.design = design
        self.min_cell = min_cell
        self.attempts = attempts
        super().__init__(
            f"acceptance failure: no assignment with all cell counts >= "
            f"{min_cell} in {attempts} attempts at pi_b={design.pi_b}"
        )


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator derived from a master seed and an index path.

    Identical (seed, path) pairs always yield identical streams, and
    distinct paths yield statistically independent streams, so parallel
    work can be partitioned any way without changing results.
    """
    if not 0 <= master_seed < 2**64:
        raise ValueError("master seed must be an unsigned 64-bit integer")
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class Design:
    """Experiment design: N units, ``n_plus_a`` assigned +1 on A, Bernoulli(pi_b) B."""

    n_units: int
    n_plus_a: int
    pi_b: float

    def __post_init__(self):
        if self.n_units < 2:
            raise ValueError("design needs at least 2 units")
        if not 1 <= self.n_plus_a <= self.n_units - 1:
            raise ValueError(
                f"n_plus_a must lie in [1, N-1], got {self.n_plus_a} with N={self.n_units}"
            )
        if not 0.0 < self.pi_b < 1.0:
            raise ValueError(f"pi_b must lie strictly in (0, 1), got {self.pi_b}")

    @property
    def n_minus_a(self) -> int:
        return self.n_units - self.n_plus_a

    def arm_size(self, z_a: int) -> int:
        return self.n_plus_a if z_a == +1 else self.n_minus_a


@dataclass(frozen=True)
class Assignment:
    """Realized assignment: indicator vectors and the four cell counts.

    ``w_a[i]`` / ``w_b[i]`` are 1 when unit i has level +1 on the factor.
    ``cell_counts`` follows the canonical cell order.
    """

    w_a: np.ndarray
    w_b: np.ndarray
    cell_counts: np.ndarray

    @property
    def n_units(self) -> int:
        return self.w_a.shape[0]


def assignment_from_vectors(w_a, w_b) -> Assignment:
    """Build an Assignment from 0/1 vectors, deriving the cell counts."""
    a = np.asarray(w_a, dtype=np.int8)
    b = np.asarray(w_b, dtype=np.int8)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("w_a and w_b must be 1-d vectors of equal length")
    if not (np.isin(a, (0, 1)).all() and np.isin(b, (0, 1)).all()):
        raise ValueError("assignment indicators must be 0/1")
    n_pp = int(np.sum(a & b))
    n_pm = int(a.sum()) - n_pp
    n_mp = int(b.sum()) - n_pp
    n_mm = a.shape[0] - n_pp - n_pm - n_mp
    counts = np.array([n_mm, n_pm, n_mp, n_pp], dtype=np.int64)
    a = a.copy()
    b = b.copy()
    a.flags.writeable = False
    b.flags.writeable = False
    counts.flags.writeable = False
    return Assignment(w_a=a, w_b=b, cell_counts=counts)


def sample_assignment(design: Design, rng: np.random.Generator) -> Assignment:
    """Draw one assignment from the unconditional joint law."""
    n = design.n_units
    w_a = np.zeros(n, dtype=np.int8)
    w_a[rng.permutation(n)[: design.n_plus_a]] = 1
    w_b = (rng.random(n) < design.pi_b).astype(np.int8)
    return assignment_from_vectors(w_a, w_b)


def _rejection_sample(
    design: Design,
    min_cell: int,
    rng: np.random.Generator,
    max_attempts: int,
) -> tuple[Assignment, int]:
    """Rejection-sample until all cell counts reach ``min_cell``.

    Returns (assignment, attempts).  Rejection preserves the exact
    conditional law; the attempt cap turns a pathological pi_b into a
    clean error instead of a hang.
    """
    if min_cell < 1:
        raise ValueError("min_cell must be at least 1")
    if 2 * min_cell > min(design.n_plus_a, design.n_minus_a):
        raise ValueError(
            f"min_cell={min_cell} impossible: smallest arm has "
            f"{min(design.n_plus_a, design.n_minus_a)} units"
        )
    if max_attempts < 1:
        raise ValueError("max_attempts must be positive")
    for attempt in range(1, max_attempts + 1):
        assignment = sample_assignment(design, rng)
        if int(assignment.cell_counts.min()) >= min_cell:
            return assignment, attempt
    raise AcceptanceFailureError(design, min_cell, max_attempts)


def sample_conditional_assignment(
    design: Design,
    min_cell: int,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> Assignment:
    """Draw one assignment conditioned on every cell count being >= ``min_cell``."""
    assignment, _ = _rejection_sample(design, min_cell, rng, max_attempts)
    return assignment


def indicator_covariance_a(
    design: Design, i: int, i_prime: int, z_a1: int, z_a2: int
) -> float:
    """Cov(W_{i,A}(z_a1), W_{i',A}(z_a2)) under complete randomization.

    Closed form: (N+ N- / N^2) * (-1)^[z_a1 != z_a2] * (-1/(N-1))^[i != i'].
    """
    _check_unit_index(design, i)
    _check_unit_index(design, i_prime)
    level_index(z_a1)
    level_index(z_a2)
    n = design.n_units
    base = design.n_plus_a * design.n_minus_a / n**2
    if z_a1 != z_a2:
        base = -base
    if i != i_prime:
        base *= -1.0 / (n - 1)
    return float(base)


def level_probability_b(design: Design, z_b: int) -> float:
    """E[W_{i,B}(z_b)]: pi_b for +1, 1 - pi_b for -1."""
    level_index(z_b)
    return design.pi_b if z_b == +1 else 1.0 - design.pi_b


def joint_indicator_covariance(
    design: Design,
    i: int,
    i_prime: int,
    z: tuple[int, int],
    z_star: tuple[int, int],
) -> float:
    """Cov(W_i(z), W_{i'}(z*)) for the joint cell indicators.

    Four cases.  With p = E[W_B(z_b)], p* = E[W_B(z_b*)]:

    * i == i', z == z*:   p N_{z_a.} (N - p N_{z_a.}) / N^2   (Bernoulli variance)
    * i == i', z != z*:  -p p* N_{z_a.} N_{z_a*.} / N^2        (exclusive indicators)
    * i != i', same z_a: -p p* N+ N- / (N^2 (N-1))
    * i != i', diff z_a: +p p* N+ N- / (N^2 (N-1))
    """
    _check_unit_index(design, i)
    _check_unit_index(design, i_prime)
    (z_a1, z_b1), (z_a2, z_b2) = z, z_star
    p1 = level_probability_b(design, z_b1)
    p2 = level_probability_b(design, z_b2)
    n = design.n_units
    if i == i_prime:
        if z == z_star:
            arm = design.arm_size(z_a1)
            return float(p1 * arm * (n - p1 * arm) / n**2)
        return float(-p1 * p2 * design.arm_size(z_a1) * design.arm_size(z_a2) / n**2)
    scale = p1 * p2 * design.n_plus_a * design.n_minus_a / (n**2 * (n - 1))
    return float(scale if z_a1 != z_a2 else -scale)


def truncated_inverse_mean(n_arm: int, pi_b: float, z_b: int) -> float:
    """E[1/N_cell | both cells of the arm nonempty] for a Bernoulli-split arm.

    The cell count is Binomial(n_arm, p) truncated to {1, ..., n_arm-1},
    with p = pi_b for z_b = +1 and 1 - pi_b for z_b = -1:

        sum_{k=1}^{n_arm-1} (1/k) C(n_arm, k) p^k (1-p)^(n_arm-k)
        -----------------------------------------------------------
                  1 - pi_b^n_arm - (1 - pi_b)^n_arm

    Binomial coefficients are evaluated in log space so extreme p or
    large arms do not overflow or lose the small terms.
    """
    if n_arm < 2:
        raise ValueError("n_arm must be at least 2 for the truncation to bite")
    if not 0.0 < pi_b < 1.0:
        raise ValueError(f"pi_b must lie strictly in (0, 1), got {pi_b}")
    p = pi_b if z_b == +1 else 1.0 - pi_b if z_b == -1 else None
    if p is None:
        raise ValueError(f"factor level must be -1 or +1, got {z_b}")
    k = np.arange(1, n_arm)
    log_terms = (
        gammaln(n_arm + 1)
        - gammaln(k + 1)
        - gammaln(n_arm - k + 1)
        + k * np.log(p)
        + (n_arm - k) * np.log1p(-p)
    )
    numerator = float(np.sum(np.exp(log_terms) / k))
    denominator = 1.0 - pi_b**n_arm - (1.0 - pi_b) ** n_arm
    return numerator / denominator


def write_assignment_csv(assignment: Assignment, path) -> None:
    """Write ``unit,w_a,w_b`` rows with 0/1 entries."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("unit", "w_a", "w_b"))
        for unit in range(assignment.n_units):
            writer.writerow((unit, int(assignment.w_a[unit]), int(assignment.w_b[unit])))


def read_assignment_csv(path) -> Assignment:
    """Read an assignment written by :func:`write_assignment_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != ("unit", "w_a", "w_b"):
            raise ValueError(f"bad assignment header {header!r}")
        rows = sorted((int(u), int(a), int(b)) for u, a, b in reader)
    if [u for u, _, _ in rows] != list(range(len(rows))):
        raise ValueError("assignment rows must cover units 0..N-1 exactly once")
    return assignment_from_vectors(
        np.array([a for _, a, _ in rows]), np.array([b for _, _, b in rows])
    )


def _check_unit_index(design: Design, i: int) -> None:
    if not 0 <= i < design.n_units:
        raise ValueError(f"unit index {i} out of range for N={design.n_units}")


# Level pairs in index order, re-exported for loops over arms and B levels.
ARM_LEVELS = LEVELS
