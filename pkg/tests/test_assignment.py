import itertools
import math

import numpy as np
import pytest
from scipy import stats

from hiddenfactor.assignment import (
    AcceptanceFailureError,
    Design,
    _rejection_sample,
    assignment_from_vectors,
    indicator_covariance_a,
    joint_indicator_covariance,
    level_probability_b,
    read_assignment_csv,
    sample_assignment,
    sample_conditional_assignment,
    substream,
    truncated_inverse_mean,
    write_assignment_csv,
)
from hiddenfactor.population import CELLS


def test_design_validation():
    Design(8, 4, 0.5)
    with pytest.raises(ValueError):
        Design(8, 0, 0.5)
    with pytest.raises(ValueError):
        Design(8, 8, 0.5)
    with pytest.raises(ValueError):
        Design(8, 4, 0.0)
    with pytest.raises(ValueError):
        Design(8, 4, 1.0)
    with pytest.raises(ValueError):
        Design(1, 1, 0.5)
    d = Design(10, 3, 0.2)
    assert d.n_minus_a == 7
    assert d.arm_size(+1) == 3 and d.arm_size(-1) == 7
    assert level_probability_b(d, +1) == 0.2
    assert level_probability_b(d, -1) == 0.8


def test_sampled_arm_size_is_fixed():
    design = Design(8, 4, 0.5)
    rng = substream(1, 0)
    for _ in range(200):
        assignment = sample_assignment(design, rng)
        assert int(assignment.w_a.sum()) == 4


def test_cell_count_identities_hold():
    design = Design(12, 5, 0.3)
    rng = substream(2, 0)
    for _ in range(300):
        a = sample_assignment(design, rng)
        counts = a.cell_counts
        assert counts.sum() == 12
        # counts are [mm, pm, mp, pp]; +A arm holds pm + pp, -A arm mm + mp
        assert counts[1] + counts[3] == 5
        assert counts[0] + counts[2] == 7
        for j, (z_a, z_b) in enumerate(CELLS):
            members = ((a.w_a == (z_a == +1)) & (a.w_b == (z_b == +1))).sum()
            assert counts[j] == members


def test_a_subsets_uniform_chi_square():
    # All C(4,2)=6 subsets should be equally likely.
    design = Design(4, 2, 0.5)
    rng = substream(3, 0)
    draws = 200_000
    seen = {}
    for _ in range(draws):
        key = tuple(sample_assignment(design, rng).w_a)
        seen[key] = seen.get(key, 0) + 1
    assert len(seen) == 6
    result = stats.chisquare(list(seen.values()))
    assert result.pvalue > 1e-9


def test_b_counts_match_binomial_moment():
    design = Design(100, 50, 0.9)
    rng = substream(4, 0)
    draws = 100_000
    total = 0
    for _ in range(draws):
        total += int(sample_assignment(design, rng).w_b.sum())
    mean = total / draws
    se = math.sqrt(100 * 0.9 * 0.1 / draws)
    assert abs(mean - 90.0) <= 3 * se


def _brute_force_indicator_moments(design):
    """First and second indicator moments by full enumeration.

    Returns (e_wa, e_joint, e_products) where e_products[key] holds
    E[W_i(z) W_i'(z*)] for units 0 and 1 and all cell pairs, plus the
    A-factor products.
    """
    n = design.n_units
    pi = design.pi_b
    e_wa = np.zeros((2, 2))          # unit (0/1) x level index of z_a
    e_w = np.zeros((2, 4))           # unit x cell
    e_aa = {}
    e_ww = {}
    n_subsets = 0
    for combo in itertools.combinations(range(n), design.n_plus_a):
        n_subsets += 1
        w_a = [1 if i in combo else 0 for i in range(n)]
        for mask in range(2**n):
            w_b = [(mask >> i) & 1 for i in range(n)]
            weight = pi ** sum(w_b) * (1 - pi) ** (n - sum(w_b))

            def ind_a(i, z_a):
                return w_a[i] if z_a == +1 else 1 - w_a[i]

            def ind(i, z):
                return ind_a(i, z[0]) * (w_b[i] if z[1] == +1 else 1 - w_b[i])

            for i in (0, 1):
                for la, z_a in enumerate((-1, +1)):
                    e_wa[i, la] += weight * ind_a(i, z_a)
                for j, z in enumerate(CELLS):
                    e_w[i, j] += weight * ind(i, z)
            for i, i_prime in ((0, 0), (0, 1)):
                for z_a1 in (-1, +1):
                    for z_a2 in (-1, +1):
                        key = (i, i_prime, z_a1, z_a2)
                        e_aa[key] = e_aa.get(key, 0.0) + weight * ind_a(i, z_a1) * ind_a(
                            i_prime, z_a2
                        )
                for z in CELLS:
                    for z_star in CELLS:
                        key = (i, i_prime, z, z_star)
                        e_ww[key] = e_ww.get(key, 0.0) + weight * ind(i, z) * ind(
                            i_prime, z_star
                        )
    for store in (e_aa, e_ww):
        for key in store:
            store[key] /= n_subsets
    return e_wa / n_subsets, e_w / n_subsets, e_aa, e_ww


@pytest.mark.parametrize("n,n_plus", [(4, 2), (5, 2)])
def test_covariance_closed_forms_match_enumeration(n, n_plus):
    # The unbalanced case (5, 2) exercises the same-unit cross-cell branch
    # where the two arm sizes differ.
    design = Design(n, n_plus, 0.3)
    e_wa, e_w, e_aa, e_ww = _brute_force_indicator_moments(design)
    for (i, i_prime, z_a1, z_a2), moment in e_aa.items():
        exact = moment - e_wa[i, (z_a1 + 1) // 2] * e_wa[i_prime, (z_a2 + 1) // 2]
        closed = indicator_covariance_a(design, i, i_prime, z_a1, z_a2)
        assert abs(exact - closed) <= 1e-12
    cell_num = {z: j for j, z in enumerate(CELLS)}
    for (i, i_prime, z, z_star), moment in e_ww.items():
        exact = moment - e_w[i, cell_num[z]] * e_w[i_prime, cell_num[z_star]]
        closed = joint_indicator_covariance(design, i, i_prime, z, z_star)
        assert abs(exact - closed) <= 1e-12


def test_covariance_spot_values():
    design = Design(4, 2, 0.5)
    assert indicator_covariance_a(design, 0, 0, +1, +1) == pytest.approx(0.25)
    assert indicator_covariance_a(design, 0, 1, +1, +1) == pytest.approx(-0.25 / 3)
    assert indicator_covariance_a(design, 0, 0, +1, -1) == pytest.approx(-0.25)
    # Same-unit variance of the joint indicator.
    var = joint_indicator_covariance(design, 0, 0, (+1, +1), (+1, +1))
    assert var == pytest.approx(0.5 * 2 * (4 - 0.5 * 2) / 16)
    # Cross-unit, different arms, then the same-arm sign flip.
    cross = joint_indicator_covariance(design, 0, 1, (+1, +1), (-1, +1))
    assert cross == pytest.approx(1.0 / 48.0)
    same_arm = joint_indicator_covariance(design, 0, 1, (+1, +1), (+1, -1))
    assert same_arm == pytest.approx(-1.0 / 48.0)


def test_empirical_covariance_matches_closed_form():
    design = Design(4, 2, 0.35)
    rng = substream(5, 0)
    draws = 250_000
    pairs = [
        ((0, 0), ((+1, +1), (+1, -1))),
        ((0, 1), ((+1, +1), (-1, +1))),
        ((0, 1), ((+1, -1), (+1, +1))),
    ]
    samples = np.zeros((draws, len(pairs), 2))
    for d in range(draws):
        a = sample_assignment(design, rng)

        def ind(i, z):
            in_arm = a.w_a[i] == (z[0] == +1)
            in_b = a.w_b[i] == (z[1] == +1)
            return 1.0 if (in_arm and in_b) else 0.0

        for p, ((i, j), (z, z_star)) in enumerate(pairs):
            samples[d, p, 0] = ind(i, z)
            samples[d, p, 1] = ind(j, z_star)
    for p, ((i, j), (z, z_star)) in enumerate(pairs):
        x, y = samples[:, p, 0], samples[:, p, 1]
        emp = float(np.mean(x * y) - x.mean() * y.mean())
        closed = joint_indicator_covariance(design, i, j, z, z_star)
        # MC standard error of the product moment dominates.
        se = float(np.std(x * y - closed) / math.sqrt(draws)) + 1e-9
        assert abs(emp - closed) <= 4 * max(se, 1.0 / draws**0.5 * 0.01)


def test_conditional_sampler_respects_min_cell():
    design = Design(100, 50, 0.5)
    rng = substream(6, 0)
    total_attempts = 0
    for _ in range(2000):
        assignment, attempts = _rejection_sample(design, 2, rng, 10_000)
        total_attempts += attempts
        assert int(assignment.cell_counts.min()) >= 2
    assert 2000 / total_attempts > 0.999  # acceptance is essentially certain


def test_conditional_sampler_forced_equal_cells():
    design = Design(8, 4, 0.5)
    rng = substream(7, 0)
    for _ in range(200):
        assignment = sample_conditional_assignment(design, 2, rng)
        assert np.all(assignment.cell_counts == 2)


def test_conditional_sampler_acceptance_failure_names_pi():
    design = Design(100, 50, 1e-6)
    rng = substream(8, 0)
    with pytest.raises(AcceptanceFailureError, match="pi_b=1e-06"):
        sample_conditional_assignment(design, 2, rng, max_attempts=500)


def test_conditional_sampler_rejects_bad_min_cell():
    design = Design(8, 4, 0.5)
    rng = substream(9, 0)
    with pytest.raises(ValueError):
        sample_conditional_assignment(design, 0, rng)
    with pytest.raises(ValueError, match="impossible"):
        sample_conditional_assignment(design, 3, rng)


def _truncated_mean_by_pmf(n_arm: int, p: float) -> float:
    ks = np.arange(1, n_arm)
    pmf = np.array([math.comb(n_arm, k) * p**k * (1 - p) ** (n_arm - k) for k in ks])
    return float(np.sum(pmf / ks) / np.sum(pmf))


def test_truncated_inverse_mean_spot_values():
    assert truncated_inverse_mean(2, 0.5, +1) == pytest.approx(1.0, abs=1e-14)
    assert truncated_inverse_mean(3, 0.5, +1) == pytest.approx(0.75, abs=1e-14)
    # Complementary level swaps the success probability.
    assert truncated_inverse_mean(5, 0.2, -1) == pytest.approx(
        truncated_inverse_mean(5, 0.8, +1), abs=1e-14
    )


def test_truncated_inverse_mean_matches_pmf_summation():
    for n_arm in (2, 3, 7, 20, 50):
        for pi in (0.05, 0.3, 0.5, 0.77, 0.95):
            for z_b in (-1, +1):
                p = pi if z_b == +1 else 1 - pi
                assert truncated_inverse_mean(n_arm, pi, z_b) == pytest.approx(
                    _truncated_mean_by_pmf(n_arm, p), abs=1e-12
                )


def test_truncated_inverse_mean_decreasing_in_arm_size():
    values = [truncated_inverse_mean(n, 0.5, +1) for n in range(2, 61)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_truncated_inverse_mean_rejects_bad_inputs():
    with pytest.raises(ValueError):
        truncated_inverse_mean(1, 0.5, +1)
    with pytest.raises(ValueError):
        truncated_inverse_mean(5, 0.0, +1)
    with pytest.raises(ValueError):
        truncated_inverse_mean(5, 0.5, 0)


def test_substream_reproducible_and_distinct():
    a = substream(123, 4, 5).random(8)
    b = substream(123, 4, 5).random(8)
    c = substream(123, 4, 6).random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        substream(-1)
    with pytest.raises(ValueError):
        substream(2**64)


def test_assignment_from_vectors_validation():
    with pytest.raises(ValueError):
        assignment_from_vectors([1, 0], [1, 2])
    with pytest.raises(ValueError):
        assignment_from_vectors([1, 0, 1], [1, 0])


def test_assignment_csv_roundtrip(tmp_path):
    design = Design(10, 4, 0.4)
    assignment = sample_assignment(design, substream(10, 0))
    path = tmp_path / "assignment.csv"
    write_assignment_csv(assignment, path)
    assert path.read_text().splitlines()[0] == "unit,w_a,w_b"
    again = read_assignment_csv(path)
    assert np.array_equal(again.w_a, assignment.w_a)
    assert np.array_equal(again.w_b, assignment.w_b)
    assert np.array_equal(again.cell_counts, assignment.cell_counts)


def test_read_assignment_csv_rejects_bad_content(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("unit,w_a,w_b\n0,1,0\n2,0,1\n")
    with pytest.raises(ValueError, match="cover units"):
        read_assignment_csv(path)
