import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodic_bandits.env import make_demo_instance
from periodic_bandits.spectral import (
    a_sup,
    amplitude_condition_coefficients,
    candidate_frequencies,
    compute_periodogram,
    default_H,
    default_t_max,
    dft_at,
    estimate_periods,
    failure_probability_bound,
    frequency_grid,
    identify_frequencies,
    lcm_of_denominators,
    noise_bound,
    threshold,
    threshold_constants,
    u_constants,
)

H50 = default_H(50)

# Reference constants: (n, g) -> U1, U2, sigma coeff, amplitude coeff,
# misidentification bound at K=5. All to four significant figures.
CONSTANTS_TABLE = {
    (50, 8): (0.05047, 0.02054, 3.337, 0.2450),
    (100, 10): (0.04077, 0.02438, 2.663, 0.2259),
    (200, 15): (0.03175, 0.01970, 2.080, 0.1748),
    (500, 23): (0.02439, 0.01591, 1.489, 0.1347),
}


def brute_dft(samples, epochs, v):
    acc = 0j
    for y, t in zip(samples, epochs):
        acc += y * complex(math.cos(-2 * math.pi * v * t), math.sin(-2 * math.pi * v * t))
    return acc / len(samples)


# ---------------------------------------------------------------------------
# side-lobe suprema
# ---------------------------------------------------------------------------

def test_a_sup_anchor_values():
    # frozen from a 2e6-point scan refined by bisection on the derivative
    assert a_sup(1) == pytest.approx(0.21723363, abs=1e-7)
    assert a_sup(8) == pytest.approx(0.03747452, abs=1e-7)


def test_a_sup_envelope_and_monotonicity():
    prev = math.inf
    for j in range(1, 41):
        aj = a_sup(j)
        assert 1 / (math.pi * (j + 0.5)) <= aj <= 1 / (math.pi * j)
        assert aj < prev
        prev = aj


def test_a_sup_matches_dense_grid_oracle():
    for j in (1, 3, 17):
        grid = np.linspace(j, j + 1, 2_000_001)
        oracle = np.max(np.abs(np.sin(np.pi * grid)) / (np.pi * grid))
        assert a_sup(j) == pytest.approx(oracle, abs=1e-10)


def test_a_sup_rejects_nonpositive():
    with pytest.raises(ValueError):
        a_sup(0)


# ---------------------------------------------------------------------------
# threshold constants
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("ng,expected", CONSTANTS_TABLE.items())
def test_u_constants_reference_rows(ng, expected):
    u1, u2 = u_constants(*ng)
    assert u1 == pytest.approx(expected[0], rel=5e-4)
    assert u2 == pytest.approx(expected[1], rel=5e-4)


def test_u1_dominates_u2():
    # every term of U2 is dominated by a distinct term of U1
    for n, g in [(50, 8), (64, 8), (100, 10), (121, 11), (200, 15), (500, 23), (900, 30)]:
        u1, u2 = u_constants(n, g)
        assert u1 >= u2


def test_threshold_constants_a_table():
    consts = threshold_constants(50, 8, sigma=0.2)
    table = dict(consts.a_table)
    assert set(table) == {8, 15, 24}  # U1 uses A_8, A_24; U2 uses A_15
    assert consts.u1 == pytest.approx(table[8] + table[24])
    assert consts.u2 == pytest.approx(table[15])


def test_u_constants_invalid_g():
    with pytest.raises(ValueError):
        u_constants(50, 5)  # 5 < sqrt(50)


def test_noise_bound_value():
    assert noise_bound(50, 0.2, H50) == pytest.approx(0.28532, abs=5e-6)


def test_noise_bound_homogeneous_in_sigma():
    assert noise_bound(50, 0.0, H50) == 0.0
    assert noise_bound(50, 0.8, H50) == pytest.approx(2 * noise_bound(50, 0.4, H50))


@pytest.mark.parametrize("ng,expected", CONSTANTS_TABLE.items())
def test_amplitude_condition_rows(ng, expected):
    sig_c, b_c = amplitude_condition_coefficients(*ng, sigma=1.0)
    assert sig_c == pytest.approx(expected[2], rel=5e-4)
    assert b_c == pytest.approx(expected[3], rel=5e-4)


def test_threshold_affine_in_sup():
    consts = threshold_constants(50, 8, sigma=0.2)
    ratio = consts.leakage_ratio
    t0 = threshold(consts, 1.0)
    t1 = threshold(consts, 2.0)
    assert t1 - t0 == pytest.approx(ratio)
    with pytest.raises(ValueError):
        threshold(consts, -1.0)


def test_threshold_zero_noise_zero_sup():
    consts = threshold_constants(50, 8, sigma=0.0)
    assert threshold(consts, 0.0) == 0.0


def test_threshold_degenerate_constants():
    from periodic_bandits.spectral import ThresholdConstants

    bad = ThresholdConstants(n=50, g=8, H=1.0, sigma=1.0, u1=0.1, u2=1.0, eps_bar=0.1)
    with pytest.raises(ValueError):
        threshold(bad, 1.0)


def test_failure_probability_reference():
    # rows n = 100, 200, 500 of the reference table (K = 5)
    assert failure_probability_bound(100, 5, default_H(100)) == pytest.approx(1.679e-3, rel=5e-4)
    assert failure_probability_bound(200, 5, default_H(200)) == pytest.approx(1.756e-5, rel=5e-4)
    assert failure_probability_bound(500, 5, default_H(500)) == pytest.approx(1.533e-8, rel=5e-4)


def test_failure_probability_single_arm_demo():
    # n=50, K=1: bound ~ 0.0167, i.e. success probability at least 0.983
    p = failure_probability_bound(50, 1, H50)
    assert p == pytest.approx(0.0167, abs=5e-4)
    assert 1 - p >= 0.983


def test_failure_probability_linear_in_k():
    assert failure_probability_bound(50, 5, H50) == pytest.approx(
        5 * failure_probability_bound(50, 1, H50)
    )


# ---------------------------------------------------------------------------
# DFT / periodogram
# ---------------------------------------------------------------------------

def test_dft_constant_at_zero():
    assert dft_at([2.5] * 10, range(1, 11), 0.0) == pytest.approx(2.5)


def test_dft_empty_errors():
    with pytest.raises(ValueError):
        dft_at([], [], 0.1)


def test_dft_pure_tone_orthogonality():
    # tone b exp(2 pi i j t / T) sampled over full periods has |DFT| = |b| at j/T
    b, T, j, n = 1.7, 5, 2, 40
    t = np.arange(1, n + 1)
    tone = np.real(b * np.exp(2j * np.pi * j * t / T))  # real part: b/2 at j/T and (T-j)/T
    val = dft_at(tone, t, j / T)
    assert abs(val) == pytest.approx(b / 2, abs=1e-9)
    assert abs(dft_at(tone, t, 1 / T)) == pytest.approx(0.0, abs=1e-9)
    # cross-check against the explicit sum
    assert val == pytest.approx(brute_dft(tone, t, j / T), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    v=st.floats(0.0, 0.5),
)
def test_dft_conjugate_symmetry(seed, v):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=16)
    t = np.arange(1, 17)
    assert abs(dft_at(y, t, v)) == pytest.approx(abs(dft_at(y, t, 1 - v)), abs=1e-12)


def test_dft_shift_changes_phase_only():
    rng = np.random.default_rng(0)
    y = rng.normal(size=30)
    t = np.arange(1, 31)
    grid = frequency_grid(30)
    base = compute_periodogram(y, t, grid)
    shifted = compute_periodogram(y, t + 137, grid)
    assert np.allclose(base.magnitudes, shifted.magnitudes, atol=1e-12)


def test_frequency_grid_layout():
    cands = candidate_frequencies(4)
    grid = frequency_grid(10, cands)
    mesh = (2 * np.arange(1, 121) - 1) / 480
    assert np.all(np.isin(mesh, grid))
    for c in cands:
        if c <= Fraction(1, 2):
            assert float(c) in grid
    assert grid[0] > 0 and grid[-1] <= 0.5
    assert np.all(np.diff(grid) > 0)


# ---------------------------------------------------------------------------
# candidates & LCM
# ---------------------------------------------------------------------------

def test_candidate_frequencies_reduced_and_unique():
    cands = candidate_frequencies(6)
    assert len(cands) == len(set(cands))
    assert all(1 <= c.numerator < c.denominator <= 6 for c in cands)
    assert Fraction(1, 2) in cands and Fraction(5, 6) in cands
    assert sorted(cands) == cands


def test_candidate_frequencies_tmax_too_small():
    with pytest.raises(ValueError):
        candidate_frequencies(1)


def test_default_t_max():
    assert default_t_max(50, 8) == 3
    assert default_t_max(64, 8) == 3  # integral n/(2g) -> strictly below


def test_lcm_of_denominators():
    assert lcm_of_denominators([Fraction(1, 2), Fraction(1, 4)]) == 4
    assert lcm_of_denominators([]) == 1
    assert lcm_of_denominators([Fraction(2, 5), Fraction(1, 2)]) == 10


# ---------------------------------------------------------------------------
# identification
# ---------------------------------------------------------------------------

def demo_noise_free_estimate(t_max=10):
    inst = make_demo_instance(50, 0.2)
    samples = [inst.mean_at(0, t) for t in range(1, 51)]
    periods, ests = estimate_periods([(samples, range(1, 51))], 50, 8, H50, 0.2, t_max=t_max)
    return periods, ests[0]


def test_demo_noise_free_identification():
    periods, est = demo_noise_free_estimate()
    assert periods == (4,)
    assert est.identified == [Fraction(1, 4), Fraction(1, 2)]
    assert est.threshold == pytest.approx(0.851925, abs=1e-5)


def test_constant_signal_identifies_nothing():
    consts = threshold_constants(50, 8, sigma=0.5)
    grid = frequency_grid(50, candidate_frequencies(3))
    pg = compute_periodogram([1.0] * 50, range(1, 51), grid)
    est = identify_frequencies(pg, consts, t_max=3)
    assert est.identified == []
    assert est.period_estimate == 1


def test_two_tone_arms_noise_free():
    t3 = np.arange(1, 401)
    arm_a = 0.5 + 0.4 * np.cos(2 * np.pi * t3 / 3)
    arm_b = 0.5 + 0.4 * np.cos(2 * np.pi * t3 / 5)
    periods, _ = estimate_periods(
        [(arm_a, t3), (arm_b, t3 + 400)], 400, 20, default_H(400), 0.0
    )
    assert periods == (3, 5)


def test_all_zero_signals():
    periods, _ = estimate_periods(
        [([0.0] * 100, range(1, 101)), ([0.0] * 100, range(101, 201))],
        100, 10, default_H(100), 0.3,
    )
    assert periods == (1, 1)


def test_block_length_mismatch():
    with pytest.raises(ValueError):
        estimate_periods([([0.0] * 9, range(1, 10))], 10, 4, 2.0, 0.1)


def test_identified_frequencies_in_half_open_interval():
    _, est = demo_noise_free_estimate()
    for f in est.identified:
        assert Fraction(0) < f <= Fraction(1, 2)


def test_trace_exclusions_separate_identified():
    # later identified frequencies never fall in an earlier excluded interval
    _, est = demo_noise_free_estimate()
    g_over_n = 8 / 50
    seen = []
    for entry in est.trace:
        v = float(entry["matched"])
        for lo, hi in seen:
            assert not (lo < v < hi)
        seen.append(entry["excluded"])
    vals = [float(f) for f in est.identified]
    for i, a in enumerate(vals):
        for b in vals[i + 1:]:
            assert abs(a - b) >= g_over_n - 1e-12


def test_noisy_demo_success_rate_small():
    # 100 replications at sigma = 0.2: period 4 recovered essentially always
    from periodic_bandits.env import sample_reward

    inst = make_demo_instance(50, 0.2)
    hits = 0
    for rep in range(100):
        stream = inst.noise_stream(rep, horizon=50)
        samples = [sample_reward(inst, 0, t, stream) for t in range(1, 51)]
        periods, _ = estimate_periods([(samples, range(1, 51))], 50, 8, H50, 0.2, t_max=10)
        hits += periods[0] == 4
    assert hits >= 98


# ---------------------------------------------------------------------------
# randomized invariants
# ---------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), mult=st.integers(2, 8))
def test_noise_free_orthogonality(seed, mult):
    # full-period sampling: |DFT| equals the coefficient magnitude at every
    # harmonic and vanishes at absent multiples of 1/T (except v = 0)
    rng = np.random.default_rng(seed)
    T = int(rng.integers(2, 8))
    vals = rng.uniform(0, 1, T)
    n = T * mult
    t = np.arange(1, n + 1)
    samples = vals[(t - 1) % T]
    coeffs = np.exp(-2j * np.pi * np.outer(np.arange(T), np.arange(1, T + 1)) / T) @ vals / T
    for j in range(1, T // 2 + 1):
        got = abs(dft_at(samples, t, j / T))
        assert got == pytest.approx(abs(coeffs[j]), abs=1e-9)


def test_tiny_sample_size_degrades_to_stationary():
    # n too small for any representable period: empty candidate set, period 1
    periods, ests = estimate_periods(
        [([0.9, 0.1] * 9, range(1, 19))], 18, 5, default_H(18), 0.1
    )
    assert periods == (1,)
    assert ests[0].identified == []
