"""Periodogram-based period estimation for noisy periodic sequences.

Pipeline per arm: evaluate the normalized DFT of an n-sample block on a dense
frequency grid over [0, 1/2], form a data-driven threshold from deterministic
leakage/noise constants, then repeatedly pick the global maximum above the
threshold, snap it to the nearest candidate rational frequency, and excise a
g/n-neighborhood around the match. The period estimate is the LCM of the
denominators of the matched frequencies.

All constants are deterministic functions of (n, g, H, sigma); "log" is the
natural logarithm throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_DFT_CHUNK = 2048


# ---------------------------------------------------------------------------
# Deterministic constants
# ---------------------------------------------------------------------------

def _side_lobe(v: float) -> float:
    return abs(math.sin(math.pi * v)) / (math.pi * v)


@lru_cache(maxsize=None)
def a_sup(j: int) -> float:
    """Supremum of |sin(pi v)| / (pi v) over [j, j+1].

    Located by a 10^4-point scan followed by golden-section refinement; the
    result always lies in [1/(pi (j + 1/2)), 1/(pi j)].
    """
    if j < 1:
        raise ValueError("j must be a positive integer")
    grid = np.linspace(j, j + 1, 10_001)
    vals = np.abs(np.sin(np.pi * grid)) / (np.pi * grid)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    # golden-section on the bracketing subinterval (single interior hump)
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = _side_lobe(c), _side_lobe(d)
    while b - a > 1e-10:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _side_lobe(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _side_lobe(d)
    return max(fc, fd, vals[i])


def u_constants(n: int, g: int) -> tuple[float, float]:
    """Leakage sums U1 = sum A_{(2j+1)g} and U2 = sum A_{2jg-1}.

    The first runs j = 0 .. floor((n - 2g - 1) / (4g)), the second
    j = 1 .. floor((n - 1) / (4g)). Requires g >= max(2, sqrt(n)).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if g < 2 or g * g < n:
        raise ValueError(f"g={g} violates g >= max(2, sqrt(n)) for n={n}")
    u1 = sum((a_sup((2 * j + 1) * g) for j in range(0, (n - 2 * g - 1) // (4 * g) + 1)), 0.0)
    u2 = sum((a_sup(2 * j * g - 1) for j in range(1, (n - 1) // (4 * g) + 1)), 0.0)
    return u1, u2


def noise_bound(n: int, sigma: float, H: float) -> float:
    """High-probability envelope for the noise DFT: 2 sigma H / (1 - pi/24) * sqrt(log(n)/n)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if sigma < 0 or H <= 0:
        raise ValueError("sigma must be >= 0 and H > 0")
    return 2.0 * sigma * H / (1.0 - math.pi / 24.0) * math.sqrt(math.log(n) / n)


def default_H(n: int) -> float:
    return math.sqrt(1.0 + math.log(n))


@dataclass(frozen=True)
class ThresholdConstants:
    """Everything deterministic in (n, g, H, sigma) that the threshold needs.

    ``a_table`` keeps the side-lobe suprema A_j at exactly the indices the two
    leakage sums touch.
    """

    n: int
    g: int
    H: float
    sigma: float
    u1: float
    u2: float
    eps_bar: float
    a_table: tuple[tuple[int, float], ...] = ()

    @property
    def leakage_ratio(self) -> float:
        """pi U1 / (1 - pi U2), the slope of the threshold in the observed sup."""
        denom = 1.0 - math.pi * self.u2
        if denom <= 0:
            raise ValueError("degenerate constants: 1 - pi U2 <= 0")
        return math.pi * self.u1 / denom


def threshold_constants(n: int, g: int, sigma: float, H: float | None = None) -> ThresholdConstants:
    if H is None:
        H = default_H(n)
    u1, u2 = u_constants(n, g)
    indices = sorted(
        {(2 * j + 1) * g for j in range(0, (n - 2 * g - 1) // (4 * g) + 1)}
        | {2 * j * g - 1 for j in range(1, (n - 1) // (4 * g) + 1)}
    )
    return ThresholdConstants(
        n=n, g=g, H=H, sigma=sigma, u1=u1, u2=u2,
        eps_bar=noise_bound(n, sigma, H),
        a_table=tuple((j, a_sup(j)) for j in indices),
    )


def threshold(constants: ThresholdConstants, sup_mag: float) -> float:
    """Data-driven cutoff: eps_bar + ratio * (eps_bar + sup_mag).

    ``sup_mag`` must be the periodogram supremum over the full grid on
    [0, 1/2], including the near-zero region.
    """
    if sup_mag < 0:
        raise ValueError("sup_mag must be nonnegative")
    ratio = constants.leakage_ratio  # raises on degenerate constants
    return constants.eps_bar + ratio * (constants.eps_bar + sup_mag)


def failure_probability_bound(n: int, K: int, H: float) -> float:
    """Upper bound on the probability that any arm's period is misestimated.

    Three-term sum 48K/n^(H^2-1) + 200K/n^(0.867 H^2-1) + 200K/n^(0.694 H^2-1);
    meaningful (and decreasing in n) only for H > 1.
    """
    if n < 2 or K < 1 or H <= 0:
        raise ValueError("need n >= 2, K >= 1, H > 0")
    h2 = H * H
    return (
        48.0 * K / n ** (h2 - 1.0)
        + 200.0 * K / n ** (0.867 * h2 - 1.0)
        + 200.0 * K / n ** (0.694 * h2 - 1.0)
    )


def amplitude_condition_coefficients(n: int, g: int, sigma: float, H: float | None = None) -> tuple[float, float]:
    """(c_sigma, c_B) such that detection is reliable when the weakest present
    coefficient satisfies b >= c_sigma * sigma + c_B * B (B the strongest).

    c_sigma multiplies sigma via the noise envelope, so it does not depend on
    sigma itself; c_B collects the worst of the two leakage routes.
    """
    if H is None:
        H = default_H(n)
    u1, u2 = u_constants(n, g)
    denom = 1.0 - math.pi * u2
    if denom <= 0:
        raise ValueError("degenerate constants: 1 - pi U2 <= 0")
    eps_over_sigma = 2.0 * H / (1.0 - math.pi / 24.0) * math.sqrt(math.log(n) / n)
    sigma_coeff = (2.0 * math.pi * u1 / denom + 2.0) * eps_over_sigma
    b_coeff = max(
        (8.0 * math.pi / 3.0) * u2,
        (math.pi * u1 / denom) * max(math.pi * u1, math.pi * u2 + 1.0) + math.pi * u2,
    )
    return sigma_coeff, b_coeff


# ---------------------------------------------------------------------------
# DFT and periodogram
# ---------------------------------------------------------------------------

def dft_at(samples: Sequence[float], epochs: Sequence[int], v: float) -> complex:
    """Normalized DFT (1/n) sum_t Y_t exp(-2 pi i v t) over absolute epochs."""
    y = np.asarray(samples, dtype=float)
    t = np.asarray(epochs, dtype=float)
    if y.size == 0:
        raise ValueError("empty sample block")
    if y.shape != t.shape:
        raise ValueError("samples and epochs must align")
    return complex(np.sum(y * np.exp(-2j * np.pi * v * t)) / y.size)


def candidate_frequencies(t_max: int) -> list[Fraction]:
    """Reduced, deduplicated rationals j1/j2 with 1 <= j1 < j2 <= t_max."""
    if t_max < 2:
        raise ValueError("t_max must be at least 2")
    return sorted({Fraction(j1, j2) for j2 in range(2, t_max + 1) for j1 in range(1, j2)})


def default_t_max(n: int, g: int) -> int:
    """Largest candidate denominator: ceil(n / (2g)) - 1 (periods must satisfy T < n/(2g))."""
    return math.ceil(n / (2 * g)) - 1


def frequency_grid(n: int, candidates: Sequence[Fraction] = ()) -> np.ndarray:
    """Evaluation grid over [0, 1/2]: 12n interval midpoints of step 1/(24n),
    i.e. (2l - 1)/(48n) for l = 1..12n, plus every candidate rational <= 1/2.

    Midpoints sample each width-2/n main lobe at ~48 points; candidates are
    evaluated exactly.
    """
    mesh = (2.0 * np.arange(1, 12 * n + 1) - 1.0) / (48.0 * n)
    extra = [float(c) for c in candidates if 0 < c <= Fraction(1, 2)]
    return np.unique(np.concatenate([mesh, np.asarray(extra, dtype=float)]))


@dataclass
class Periodogram:
    """DFT values and magnitudes of one sample block on a frequency grid."""

    n: int
    epochs: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    magnitudes: np.ndarray


def compute_periodogram(samples: Sequence[float], epochs: Sequence[int], grid: np.ndarray) -> Periodogram:
    y = np.asarray(samples, dtype=float)
    t = np.asarray(epochs, dtype=float)
    if y.size == 0:
        raise ValueError("empty sample block")
    if y.shape != t.shape:
        raise ValueError("samples and epochs must align")
    vals = np.empty(grid.size, dtype=complex)
    for lo in range(0, grid.size, _DFT_CHUNK):
        chunk = grid[lo : lo + _DFT_CHUNK]
        vals[lo : lo + chunk.size] = np.exp(-2j * np.pi * np.outer(chunk, t)) @ y / y.size
    return Periodogram(n=y.size, epochs=np.asarray(epochs, dtype=int), grid=grid, values=vals, magnitudes=np.abs(vals))


# ---------------------------------------------------------------------------
# Frequency identification
# ---------------------------------------------------------------------------

@dataclass
class FrequencyEstimate:
    """Outcome of thresholded identification for one arm."""

    identified: list[Fraction]
    period_estimate: int
    threshold: float
    trace: list[dict]


def lcm_of_denominators(rationals: Sequence[Fraction]) -> int:
    """LCM of the reduced denominators; 1 for an empty collection.

    For frequencies with unit numerator this is the usual LCM of reciprocals;
    otherwise it is the smallest integer period containing every harmonic.
    """
    dens = [Fraction(r).denominator for r in rationals]
    return math.lcm(*dens) if dens else 1


def identify_frequencies(
    periodogram: Periodogram,
    constants: ThresholdConstants,
    t_max: int | None = None,
) -> FrequencyEstimate:
    """Threshold-and-excise search over the periodogram.

    Grid points below g/n are excluded from the search (the constant term's
    main lobe lives there) but still count toward the supremum that sets the
    threshold. Ties at the global maximum resolve to the lowest frequency;
    candidate-matching ties resolve to the smaller denominator, then smaller
    numerator.

    A t_max below 2 leaves no representable period at this sample size; the
    candidate set is then empty and the estimate degrades to period 1.
    """
    if periodogram.grid.size == 0:
        raise ValueError("empty periodogram")
    n, g = constants.n, constants.g
    if t_max is None:
        t_max = default_t_max(n, g)
    tau = threshold(constants, float(periodogram.magnitudes.max()))
    if t_max < 2:
        return FrequencyEstimate(identified=[], period_estimate=1, threshold=tau, trace=[])
    cands = candidate_frequencies(t_max)
    cand_vals = np.array([float(c) for c in cands])
    grid = periodogram.grid
    mags = periodogram.magnitudes
    active = (grid >= g / n) & (mags > tau)

    identified: list[Fraction] = []
    trace: list[dict] = []
    width = g / n
    while active.any():
        idx = int(np.argmax(np.where(active, mags, -np.inf)))
        v_star = float(grid[idx])
        dists = np.abs(cand_vals - v_star)
        best = np.min(dists)
        tied = [cands[i] for i in np.flatnonzero(dists == best)]
        v_hat = min(tied, key=lambda c: (c.denominator, c.numerator))
        lo, hi = float(v_hat) - width, float(v_hat) + width
        active &= ~((grid > lo) & (grid < hi))
        active[idx] = False  # ensure progress even if the match is far away
        if v_hat not in identified:
            identified.append(v_hat)
        trace.append(
            {"v_star": v_star, "matched": v_hat, "excluded": (lo, hi), "magnitude": float(mags[idx])}
        )
    identified.sort()
    return FrequencyEstimate(
        identified=identified,
        period_estimate=lcm_of_denominators(identified),
        threshold=tau,
        trace=trace,
    )


def estimate_periods(
    blocks: Sequence[tuple[Sequence[float], Sequence[int]]],
    n: int,
    g: int,
    H: float,
    sigma: float,
    t_max: int | None = None,
) -> tuple[tuple[int, ...], list[FrequencyEstimate]]:
    """Run the full periodogram -> threshold -> identification pipeline per arm.

    ``blocks`` holds one (samples, absolute epochs) pair per arm, each of
    exactly n consecutive samples. Arms are processed independently.
    """
    consts = threshold_constants(n, g, sigma, H)
    if t_max is None:
        t_max = default_t_max(n, g)
    cands = candidate_frequencies(t_max) if t_max >= 2 else []
    grid = frequency_grid(n, cands)
    estimates = []
    for samples, epochs in blocks:
        if len(samples) != n:
            raise ValueError(f"each block must have exactly n={n} samples, got {len(samples)}")
        pg = compute_periodogram(samples, epochs, grid)
        estimates.append(identify_frequencies(pg, consts, t_max=t_max))
    return tuple(e.period_estimate for e in estimates), estimates
