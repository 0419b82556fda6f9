"""Periodic bandit environments: mean profiles, noise, sampling, pseudo-regret.

An instance holds K arms, each with a mean-reward profile that repeats with an
integer period, plus a zero-mean sub-Gaussian noise model. Noise draws are keyed
by (seed, epoch) only, never by the arm pulled, so two policies facing the same
instance and seed observe identical noise at every epoch regardless of which
arms they choose.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

IMAG_TOL = 1e-9   # max imaginary residue tolerated when evaluating Fourier profiles
COEF_TOL = 1e-12  # below this a Fourier coefficient counts as absent


def _check_minimal_period(values: Sequence[float]) -> None:
    period = len(values)
    for d in range(1, period):
        if period % d != 0:
            continue
        if all(values[p] == values[p % d] for p in range(period)):
            raise ValueError(
                f"profile of declared period {period} repeats with proper divisor {d}"
            )


@dataclass(frozen=True)
class MeanProfile:
    """One arm's periodic mean-reward sequence.

    ``values`` holds one full cycle; the mean at epoch t (1-based) is
    ``values[(t - 1) % period]``. The declared period must be minimal: no
    proper divisor of it may also tile the cycle.
    """

    period: int
    values: tuple[float, ...]
    source: str = "tabular"

    def __post_init__(self) -> None:
        if self.period < 1:
            raise ValueError("period must be a positive integer")
        if len(self.values) != self.period:
            raise ValueError("values must contain exactly `period` entries")
        _check_minimal_period(self.values)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "MeanProfile":
        vals = tuple(float(v) for v in values)
        return cls(period=len(vals), values=vals)

    @classmethod
    def from_fourier(cls, coefficients: Sequence[complex]) -> "MeanProfile":
        """Build a tabular profile from complex harmonic coefficients.

        ``coefficients[j]`` multiplies exp(2*pi*i*j*t/T). Coefficient 0 must be
        real and coefficient j must equal the conjugate of coefficient T-j, so
        the evaluated means are real; an imaginary residue above 1e-9 is an
        error.
        """
        coeffs = [complex(c) for c in coefficients]
        T = len(coeffs)
        if T < 1:
            raise ValueError("need at least one coefficient")
        if abs(coeffs[0].imag) > IMAG_TOL:
            raise ValueError("constant coefficient must be real")
        for j in range(1, T):
            if abs(coeffs[j] - coeffs[T - j].conjugate()) > IMAG_TOL:
                raise ValueError(
                    f"coefficients {j} and {T - j} are not complex conjugates"
                )
        vals = []
        for t in range(1, T + 1):
            z = sum(c * cmath.exp(2j * math.pi * j * t / T) for j, c in enumerate(coeffs))
            if abs(z.imag) > IMAG_TOL:
                raise ValueError(f"imaginary residue {z.imag:.3g} above tolerance at t={t}")
            vals.append(z.real)
        return cls(period=T, values=tuple(vals), source="fourier")

    def mean_at(self, epoch: int) -> float:
        if epoch < 1:
            raise ValueError("epochs are 1-based")
        return self.values[(epoch - 1) % self.period]

    def fourier_coefficients(self) -> np.ndarray:
        """Harmonic coefficients b_j with mean_at(t) = sum_j b_j exp(2*pi*i*j*t/T)."""
        T = self.period
        t = np.arange(1, T + 1)
        j = np.arange(T)
        basis = np.exp(-2j * np.pi * np.outer(j, t) / T)
        return basis @ np.asarray(self.values) / T

    def present_frequencies(self, tol: float = COEF_TOL) -> list[Fraction]:
        """Reduced frequencies j/T in (0, 1/2] carrying a nonzero coefficient."""
        mags = np.abs(self.fourier_coefficients())
        out = []
        for j in range(1, self.period // 2 + 1):
            if mags[j] > tol:
                out.append(Fraction(j, self.period))
        return sorted(set(out))

    def amplitude_range(self, tol: float = COEF_TOL) -> tuple[float, float]:
        """(weakest, strongest) nonzero coefficient magnitudes, 0s if flat."""
        mags = np.abs(self.fourier_coefficients())
        nonzero = mags[mags > tol]
        if nonzero.size == 0:
            return 0.0, 0.0
        return float(nonzero.min()), float(nonzero.max())


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean noise with a declared sub-Gaussian parameter sigma.

    ``gaussian`` draws N(0, sigma^2); ``uniform-bounded`` draws U[-sigma, sigma],
    for which sigma itself is a valid sub-Gaussian parameter.
    """

    kind: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "uniform-bounded"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros(size)
        if self.kind == "gaussian":
            return rng.normal(0.0, self.sigma, size)
        return rng.uniform(-self.sigma, self.sigma, size)


@dataclass(frozen=True)
class BanditInstance:
    """Immutable K-armed instance: per-arm profiles, one noise model, a horizon."""

    arms: tuple[MeanProfile, ...]
    noise: NoiseModel
    horizon: int

    def __post_init__(self) -> None:
        if len(self.arms) < 1:
            raise ValueError("need at least one arm")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(p.period for p in self.arms)

    def mean_at(self, arm: int, epoch: int) -> float:
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range for {self.n_arms} arms")
        return self.arms[arm].mean_at(epoch)

    def means_matrix(self, horizon: int | None = None) -> np.ndarray:
        """(K, T) matrix of mean rewards over epochs 1..T."""
        T = self.horizon if horizon is None else horizon
        out = np.empty((self.n_arms, T))
        t = np.arange(1, T + 1)
        for k, prof in enumerate(self.arms):
            out[k] = np.asarray(prof.values)[(t - 1) % prof.period]
        return out

    def noise_stream(self, seed: int, horizon: int | None = None) -> "NoiseStream":
        T = self.horizon if horizon is None else horizon
        return NoiseStream(self.noise, seed, T)


class NoiseStream:
    """Deterministic per-replication noise, indexed by absolute epoch.

    The whole horizon is materialized up front from the seed, so the draw at a
    given epoch is a pure function of (seed, epoch) and repeated lookups are
    bit-identical.
    """

    def __init__(self, model: NoiseModel, seed: int, horizon: int):
        self.seed = seed
        self.model = model
        self._eps = model.draw(np.random.default_rng(seed), horizon)

    @property
    def values(self) -> np.ndarray:
        """All draws for epochs 1..horizon (index t-1 holds epoch t)."""
        return self._eps

    def at(self, epoch: int) -> float:
        if epoch < 1 or epoch > len(self._eps):
            raise IndexError(f"epoch {epoch} outside materialized horizon")
        return float(self._eps[epoch - 1])


def mean_at(instance: BanditInstance, arm: int, epoch: int) -> float:
    """Mean reward of ``arm`` (0-based) at 1-based ``epoch``."""
    return instance.mean_at(arm, epoch)


def sample_reward(instance: BanditInstance, arm: int, epoch: int, stream: NoiseStream) -> float:
    """One reward draw: mean plus the stream's noise at this epoch."""
    return instance.mean_at(arm, epoch) + stream.at(epoch)


@dataclass
class RunResult:
    """One episode's trace with gaps against the per-epoch best arm."""

    actions: np.ndarray
    rewards: np.ndarray
    gaps: np.ndarray
    cumulative_regret: np.ndarray
    seed: int
    policy_id: str
    estimated_periods: tuple[int, ...] | None = None
    events: list = field(default_factory=list)

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_regret[-1])


def pseudo_regret(instance: BanditInstance, actions: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Per-epoch gaps and their prefix sums for an action sequence of length T.

    gap_t = max_k mu_{k,t} - mu_{actions[t],t}; gaps are nonnegative and the
    cumulative series is nondecreasing.
    """
    acts = np.asarray(actions, dtype=int)
    if acts.shape != (instance.horizon,):
        raise ValueError(
            f"actions must have length {instance.horizon}, got {acts.shape}"
        )
    if acts.size and (acts.min() < 0 or acts.max() >= instance.n_arms):
        raise IndexError("action index out of range")
    means = instance.means_matrix()
    best = means.max(axis=0)
    chosen = means[acts, np.arange(instance.horizon)]
    gaps = best - chosen
    return gaps, np.cumsum(gaps)


# ---------------------------------------------------------------------------
# Named instance constructors
# ---------------------------------------------------------------------------

def make_demo_instance(n: int, sigma: float) -> BanditInstance:
    """Single-arm period-4 demo: mu_t = 3 + 3 sin(pi t / 2) + 3 cos(pi t).

    Spectral content: magnitude 3 at frequency 0, 1.5 at 1/4, 3 at 1/2. The
    means intentionally leave [0, 1]; the validity report flags that rather
    than rejecting the instance.
    """
    if n < 4:
        raise ValueError("need n >= 4 for one full cycle")
    vals = tuple(3 + 3 * math.sin(0.5 * math.pi * t) + 3 * math.cos(math.pi * t) for t in (1, 2, 3, 4))
    profile = MeanProfile(period=4, values=vals)
    return BanditInstance(arms=(profile,), noise=NoiseModel("gaussian", sigma), horizon=n)


def default_gap(T: int) -> float:
    """The sqrt(1/(2T)) gap used by the hard stationary construction."""
    return math.sqrt(1.0 / (2.0 * T))


def make_lower_bound_instance(
    family: str,
    T: int,
    delta_gap: float | None = None,
    sign: int = +1,
    T1: int = 2,
    periods: Sequence[int] | None = None,
    perturbation: float = 0.0,
    sigma: float = 1.0,
) -> BanditInstance:
    """Hard instances used in lower-bound style experiments.

    e1: two stationary arms (0.5 +/- gap, 0.5); ``sign`` picks the variant and
        ``delta_gap`` defaults to sqrt(1/(2T)).
    e2: e1 with arm 1 made periodic with minimal period ``T1`` (the gap sits on
        phase 1 only).
    e3: e2 seeded with periods for every arm; each arm k >= 2 whose period is
        at least 2 gets +perturbation/sqrt(2K) added to its phase-1 mean.
    """
    fam = family.lower()
    gap = default_gap(T) if delta_gap is None else float(delta_gap)
    if fam == "e1":
        if not 0 < gap < 0.5:
            raise ValueError("gap must lie in (0, 0.5)")
        arm1 = MeanProfile.from_values([0.5 + sign * gap])
        arm2 = MeanProfile.from_values([0.5])
        return BanditInstance((arm1, arm2), NoiseModel("gaussian", sigma), T)

    if fam == "e2":
        if not 0 < gap < 0.5:
            raise ValueError("gap must lie in (0, 0.5)")
        if T1 < 2:
            raise ValueError("e2 needs a periodic first arm (T1 >= 2)")
        vals = [0.5 + sign * gap] + [0.5] * (T1 - 1)
        return BanditInstance(
            (MeanProfile.from_values(vals), MeanProfile.from_values([0.5])),
            NoiseModel("gaussian", sigma),
            T,
        )

    if fam == "e3":
        if periods is None:
            raise ValueError("e3 needs the full period list")
        periods = list(periods)
        if len(periods) < 2:
            raise ValueError("e3 needs at least two arms")
        K = len(periods)
        bump = perturbation / math.sqrt(2 * K)
        if not 0 <= 0.5 + bump <= 1 or not 0 < gap < 0.5:
            raise ValueError("perturbation or gap pushes means outside [0, 1]")
        arms = [
            MeanProfile.from_values([0.5 + sign * gap] + [0.5] * (periods[0] - 1))
            if periods[0] >= 2
            else MeanProfile.from_values([0.5 + sign * gap])
        ]
        for Tk in periods[1:]:
            if Tk >= 2 and bump != 0.0:
                arms.append(MeanProfile.from_values([0.5 + bump] + [0.5] * (Tk - 1)))
            else:
                # zero perturbation collapses to the stationary e2 arm
                arms.append(MeanProfile.from_values([0.5]))
        return BanditInstance(tuple(arms), NoiseModel("gaussian", sigma), T)

    raise ValueError(f"unknown family {family!r}; expected e1, e2 or e3")


def instance_metric(a: BanditInstance, b: BanditInstance) -> float:
    """Root sum of squared per-(arm, phase) mean differences between instances.

    Arms are compared over one cycle of the longer of the two declared periods
    (profiles are extended periodically), so instances whose declared periods
    differ but whose means agree are at distance 0.
    """
    if a.n_arms != b.n_arms:
        raise ValueError("instances must have the same number of arms")
    total = 0.0
    for pa, pb in zip(a.arms, b.arms):
        span = max(pa.period, pb.period)
        for t in range(1, span + 1):
            total += (pa.mean_at(t) - pb.mean_at(t)) ** 2
    return math.sqrt(total)


def validity_report(
    instance: BanditInstance,
    n: int | None = None,
    g: int | None = None,
    sigma: float | None = None,
    H: float | None = None,
) -> dict:
    """Non-fatal checks against the modeling assumptions.

    Always reports the [0, 1] mean-range check, K >= 2 and T >= 4K. When
    stage-one parameters (n, g) are given, also reports which periods violate
    T_k < n / (2 g); with sigma and H as well, evaluates the minimum-amplitude
    condition for reliable frequency detection per arm.
    """
    report: dict = {
        "means_in_unit_interval": [
            all(0.0 <= v <= 1.0 for v in prof.values) for prof in instance.arms
        ],
        "k_at_least_2": instance.n_arms >= 2,
        "horizon_at_least_4k": instance.horizon >= 4 * instance.n_arms,
        "periods": list(instance.periods),
    }
    report["all_means_in_unit_interval"] = all(report["means_in_unit_interval"])
    if n is not None and g is not None:
        bound = n / (2 * g)
        report["period_bound"] = bound
        report["period_within_bound"] = [p.period < bound for p in instance.arms]
        if sigma is not None and H is not None:
            from .spectral import amplitude_condition_coefficients

            sig_c, b_c = amplitude_condition_coefficients(n, g, sigma, H)
            checks = []
            for prof in instance.arms:
                weakest, strongest = prof.amplitude_range()
                required = sig_c * sigma + b_c * strongest
                checks.append(
                    {
                        "weakest": weakest,
                        "strongest": strongest,
                        "required": required,
                        "satisfied": weakest >= required if strongest > 0 else True,
                    }
                )
            report["amplitude_condition"] = checks
    return report


# ---------------------------------------------------------------------------
# JSON instance files
# ---------------------------------------------------------------------------

def instance_to_dict(instance: BanditInstance) -> dict:
    return {
        "arms": [{"period": p.period, "values": list(p.values)} for p in instance.arms],
        "noise": {"kind": instance.noise.kind, "sigma": instance.noise.sigma},
        "horizon": instance.horizon,
    }


def instance_from_dict(spec: dict) -> BanditInstance:
    """Instance from {arms: [{period, values}|{period, fourier}], noise, horizon}."""
    arms = []
    for arm in spec["arms"]:
        if "values" in arm:
            prof = MeanProfile(period=int(arm["period"]), values=tuple(float(v) for v in arm["values"]))
        elif "fourier" in arm:
            coeffs = [complex(re, im) for re, im in arm["fourier"]]
            if len(coeffs) != int(arm["period"]):
                raise ValueError("fourier coefficient count must equal period")
            prof = MeanProfile.from_fourier(coeffs)
        else:
            raise ValueError("arm needs either 'values' or 'fourier'")
        arms.append(prof)
    noise = spec.get("noise", {})
    return BanditInstance(
        arms=tuple(arms),
        noise=NoiseModel(noise.get("kind", "gaussian"), float(noise.get("sigma", 1.0))),
        horizon=int(spec["horizon"]),
    )


def load_instance(path: str) -> BanditInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def save_instance(instance: BanditInstance, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
