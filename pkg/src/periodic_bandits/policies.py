"""Learning policies for periodic bandits.

The centerpiece is the two-stage policy: a deterministic exploration block that
feeds the spectral period estimator, followed by a nested confidence-bound
tournament that learns one mean per (arm, phase) "effective arm" while reusing
the exploration samples. An oracle variant runs the identical procedure with
the true periods injected, which makes the two traces bit-identical whenever
estimation succeeds. Baselines: sequential elimination for a shared known
period, per-phase UCB, stationary UCB, and UCB over residues modulo the LCM of
the estimated periods.

Arms are 0-based; epochs are 1-based. Phases are residues t mod T_k in
{0, ..., T_k - 1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .spectral import default_H, estimate_periods


def recommended_parameters(T: int, K: int) -> tuple[int, int, float]:
    """Stage-one defaults: n = floor(sqrt(T/K)), g = ceil(sqrt(n)), H = sqrt(1 + log n)."""
    if T <= 4 * K:
        raise ValueError("horizon too short: need T > 4K")
    n = int(math.floor(math.sqrt(T / K)))
    g = math.ceil(math.sqrt(n))
    return n, g, default_H(n)


def stage_one_schedule(t: int, n: int, n_arms: int) -> int:
    """Arm pulled at epoch t of the exploration block: arms in order, n pulls each."""
    if not 1 <= t <= n * n_arms:
        raise ValueError(f"epoch {t} outside stage one (1..{n * n_arms})")
    return (t - 1) // n


def count_same_phase(actions: dict[int, int], index_set: Sequence[int], arm: int, t: int, period: int) -> int:
    """|{j in index_set : action_j = arm and j = t (mod period)}|.

    Literal counting over an explicit index set; the policies keep incremental
    counters, this form is the reference they are checked against.
    """
    if period < 1:
        raise ValueError("period must be positive")
    return sum(1 for j in index_set if actions.get(j) == arm and j % period == t % period)


@dataclass(frozen=True)
class InstanceView:
    """What a policy may know: K, T, sigma, and (only if privileged) the true periods."""

    n_arms: int
    horizon: int
    sigma: float
    true_periods: tuple[int, ...] | None = None


class Policy:
    """Sequential decision interface: begin once, then decide/observe per epoch."""

    policy_id = "base"
    uses_true_periods = False

    def begin(self, view: InstanceView) -> None:
        raise NotImplementedError

    def decide(self, t: int) -> int:
        raise NotImplementedError

    def observe(self, t: int, arm: int, reward: float) -> None:
        raise NotImplementedError

    @property
    def estimated_periods(self) -> tuple[int, ...] | None:
        return None

    @property
    def events(self) -> list:
        return []


# ---------------------------------------------------------------------------
# Nested confidence-bound state (stage two)
# ---------------------------------------------------------------------------

class NestedCBState:
    """Sufficient statistics for the screening tournament.

    Keeps, per round s and arm k, the count and reward sum at every phase
    modulo the (estimated) period of k, both for the reused exploration block
    and for the per-round index sets. The index sets themselves are retained
    for auditing; all decisions read only the counters.
    """

    def __init__(self, periods: Sequence[int], sigma: float, horizon: int, delta: float):
        self.periods = tuple(int(p) for p in periods)
        if any(p < 1 for p in self.periods):
            raise ValueError("periods must be positive")
        self.sigma = float(sigma)
        self.horizon = int(horizon)
        self.delta = float(delta)
        self.d_hat = sum(self.periods)
        self.S = max(int(math.floor(math.log2(horizon))), 1)
        K = len(self.periods)
        self._bar_counts = [[0] * p for p in self.periods]
        self._bar_sums = [[0.0] * p for p in self.periods]
        self._round_counts: dict[int, list[list[int]]] = {}
        self._round_sums: dict[int, list[list[float]]] = {}
        self.psi_rounds: dict[int, list[int]] = {}
        self.psi_bar: list[int] = []
        self._term_cache: dict[int, float] = {}
        self._K = K

    def add_bar_sample(self, epoch: int, arm: int, reward: float) -> None:
        p = epoch % self.periods[arm]
        self._bar_counts[arm][p] += 1
        self._bar_sums[arm][p] += reward
        self.psi_bar.append(epoch)

    def _round_slot(self, s: int) -> tuple[list[list[int]], list[list[float]]]:
        if s not in self._round_counts:
            self._round_counts[s] = [[0] * p for p in self.periods]
            self._round_sums[s] = [[0.0] * p for p in self.periods]
            self.psi_rounds[s] = []
        return self._round_counts[s], self._round_sums[s]

    def add_round_sample(self, s: int, epoch: int, arm: int, reward: float) -> None:
        counts, sums = self._round_slot(s)
        p = epoch % self.periods[arm]
        counts[arm][p] += 1
        sums[arm][p] += reward
        self.psi_rounds[s].append(epoch)

    def counts_at(self, s: int, arm: int, t: int) -> tuple[int, int]:
        """(reuse-block count, round-s count) at arm's phase of epoch t."""
        p = t % self.periods[arm]
        c_bar = self._bar_counts[arm][p]
        c_s = self._round_counts[s][arm][p] if s in self._round_counts else 0
        return c_bar, c_s

    def phase_mean(self, s: int, arm: int, t: int) -> float:
        p = t % self.periods[arm]
        c_bar = self._bar_counts[arm][p]
        c_s = self._round_counts[s][arm][p] if s in self._round_counts else 0
        total = c_bar + c_s
        if total == 0:
            raise ValueError(f"no samples for arm {arm} at phase {p} in round {s}")
        top = self._bar_sums[arm][p] + (self._round_sums[s][arm][p] if s in self._round_sums else 0.0)
        return top / total

    def _term(self, c: int) -> float:
        # sqrt((4 sigma^2 / c) * log(8 d_hat c / delta)), memoized on c
        cached = self._term_cache.get(c)
        if cached is None:
            cached = math.sqrt(
                (4.0 * self.sigma * self.sigma / c)
                * math.log(8.0 * self.d_hat * c / self.delta)
            )
            self._term_cache[c] = cached
        return cached

    def phase_width(self, s: int, arm: int, t: int) -> float:
        """Count-weighted combination of the two Hoeffding radii.

        A summand with zero count contributes nothing (its weight is zero);
        with both counts zero the width is infinite, which forces exploration.
        """
        c_bar, c_s = self.counts_at(s, arm, t)
        total = c_bar + c_s
        if total == 0:
            return math.inf
        w = 0.0
        if c_bar:
            w += c_bar * self._term(c_bar)
        if c_s:
            w += c_s * self._term(c_s)
        return w / total


def nested_cb_decide(
    state: NestedCBState, t: int, n_arms: int, trace: list | None = None
) -> tuple[int, int | None]:
    """One screening tournament at epoch t; returns (arm, exploration round).

    Rounds s = 1, 2, ...: if some active arm's width at the current phase
    exceeds sigma/2^s, pull the widest such arm (ties to the smallest index)
    and charge the epoch to round s. If instead every width is at most
    sigma/sqrt(T), exploit the highest estimated mean; the epoch joins no
    index set (round None). Otherwise drop arms more than 2^(1-s) sigma below
    the best estimate and continue. The round counter is capped at
    floor(log2 T), falling through to the exploit branch.

    Reads the state without mutating it. When ``trace`` is given, every
    elimination appends {round, active, means, cutoff, survivors}.
    """
    sigma, T = state.sigma, state.horizon
    narrow = sigma / math.sqrt(T)
    active = list(range(n_arms))
    s = 1
    while True:
        widths = [state.phase_width(s, k, t) for k in active]
        gate = sigma / (2.0 ** s)
        if any(w > gate for w in widths):
            best, best_w = None, -math.inf
            for k, w in zip(active, widths):
                if w > gate and w > best_w:
                    best, best_w = k, w
            return best, s
        if all(w <= narrow for w in widths) or s >= state.S:
            best, best_m = active[0], -math.inf
            for k in active:
                m = state.phase_mean(s, k, t)
                if m > best_m:
                    best, best_m = k, m
            return best, None
        means = {k: state.phase_mean(s, k, t) for k in active}
        cutoff = max(means.values()) - sigma * 2.0 ** (1 - s)
        survivors = [k for k in active if means[k] >= cutoff]
        if trace is not None:
            trace.append(
                {"round": s, "active": list(active), "means": means,
                 "cutoff": cutoff, "survivors": list(survivors)}
            )
        active = survivors
        s += 1


class TwoStagePolicy(Policy):
    """Explore-then-screen policy with spectral period estimation.

    Stage one pulls each arm n times consecutively; stage two runs, at every
    epoch, a screening tournament over rounds s = 1, 2, ...: explore any arm
    whose confidence width at the current phase exceeds sigma/2^s, exploit the
    best estimate once every width is below sigma/sqrt(T), and otherwise drop
    arms more than 2^(1-s) sigma below the leader and move to the next round.
    Exploration pulls in round s are recorded in that round's index set only;
    exploit pulls are logged but never feed the estimators.

    With ``oracle=True`` the true periods replace the estimates and the
    spectral step is skipped; everything else is identical.
    """

    policy_id = "two_stage"

    def __init__(
        self,
        n: int | None = None,
        g: int | None = None,
        H: float | None = None,
        t_max: int | None = None,
        delta: float | None = None,
        oracle: bool = False,
    ):
        self.n, self.g, self.H, self.t_max, self.delta = n, g, H, t_max, delta
        self.oracle = oracle
        if oracle:
            self.policy_id = "oracle"
        self.uses_true_periods = oracle

    def begin(self, view: InstanceView) -> None:
        K, T = view.n_arms, view.horizon
        if self.n is None or self.g is None:
            n_rec, g_rec, H_rec = recommended_parameters(T, K)
            self.n = self.n or n_rec
            self.g = self.g or g_rec
            if self.H is None:
                self.H = H_rec
        if self.H is None:
            self.H = default_H(self.n)
        if self.n * K >= T:
            raise ValueError("stage one would consume the whole horizon")
        self._view = view
        self._delta = self.delta if self.delta is not None else 8.0 / T
        self._blocks: list[list[float]] = [[] for _ in range(K)]
        self._state: NestedCBState | None = None
        self._pending_round: int | None = None
        self._events: list = []
        self._estimated: tuple[int, ...] | None = None
        self._estimates = None

    @property
    def stage_one_end(self) -> int:
        return self.n * self._view.n_arms

    def _finalize_stage_one(self) -> None:
        K, T = self._view.n_arms, self._view.horizon
        if self.oracle:
            periods = self._view.true_periods
            if periods is None:
                raise ValueError("oracle variant needs the true periods")
        else:
            blocks = [
                (self._blocks[k], range(self.n * k + 1, self.n * (k + 1) + 1))
                for k in range(K)
            ]
            periods, self._estimates = estimate_periods(
                blocks, self.n, self.g, self.H, self._view.sigma, t_max=self.t_max
            )
        self._estimated = tuple(periods)
        state = NestedCBState(periods, self._view.sigma, T, self._delta)
        for k in range(K):
            for i, y in enumerate(self._blocks[k]):
                state.add_bar_sample(self.n * k + 1 + i, k, y)
        self._state = state

    def decide(self, t: int) -> int:
        if t <= self.stage_one_end:
            self._pending_round = None
            return stage_one_schedule(t, self.n, self._view.n_arms)
        if self._state is None:
            self._finalize_stage_one()
        arm, pending = nested_cb_decide(self._state, t, self._view.n_arms)
        if pending is not None and math.isinf(self._state.phase_width(pending, arm, t)):
            self._events.append((t, "zero_count_forced_pull", arm))
        self._pending_round = pending
        return arm

    def observe(self, t: int, arm: int, reward: float) -> None:
        if t <= self.stage_one_end:
            self._blocks[arm].append(reward)
            return
        if self._pending_round is not None:
            self._state.add_round_sample(self._pending_round, t, arm, reward)

    @property
    def state(self) -> NestedCBState | None:
        return self._state

    @property
    def estimated_periods(self) -> tuple[int, ...] | None:
        return self._estimated

    @property
    def events(self) -> list:
        return self._events


class OraclePolicy(TwoStagePolicy):
    """Two-stage policy with the true periods injected in place of estimates."""

    def __init__(self, **kwargs):
        kwargs["oracle"] = True
        super().__init__(**kwargs)


# ---------------------------------------------------------------------------
# Sequential elimination (shared known period, fixed best arm)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EliminationState:
    """Snapshot of a round-based elimination run."""

    round: int
    active: tuple[int, ...]
    pulls_per_arm: int
    pull_counts: dict[int, int]
    round_means: dict[int, float]
    T1: int


def elimination_schedule(s: int, K: int, T: int, T1: int) -> int:
    """Pulls per active arm in round s: ceil(2^(2+2s) log(K T s^2) / T1) * T1."""
    if s < 1 or T1 < 1:
        raise ValueError("need s >= 1 and T1 >= 1")
    raw = 2.0 ** (2 + 2 * s) * math.log(K * T * s * s)
    return math.ceil(raw / T1) * T1


class SequentialEliminationPolicy(Policy):
    """Round-based elimination with whole-period averaging.

    All arms must share one period T1. In round s each active arm is pulled
    n_s times (a multiple of T1, so its estimate averages complete cycles);
    the round ends by dropping arms more than sigma/2^s below the best round
    average. Requires a fixed best arm to be meaningful.
    """

    policy_id = "seq_elim"
    uses_true_periods = True

    def begin(self, view: InstanceView) -> None:
        if view.true_periods is None:
            raise ValueError("sequential elimination needs the shared period")
        periods = set(view.true_periods)
        if len(periods) != 1:
            raise ValueError(f"arms must share one period, got {sorted(periods)}")
        self.T1 = periods.pop()
        self._view = view
        self.round = 1
        self.active = list(range(view.n_arms))
        self._n_s = elimination_schedule(1, view.n_arms, view.horizon, self.T1)
        self._cursor = 0      # position within the active list
        self._done_for_arm = 0
        self._sums = {k: 0.0 for k in self.active}
        self.rounds_log: list[dict] = []

    def decide(self, t: int) -> int:
        return self.active[self._cursor]

    def observe(self, t: int, arm: int, reward: float) -> None:
        self._sums[arm] += reward
        self._done_for_arm += 1
        if self._done_for_arm < self._n_s:
            return
        self._done_for_arm = 0
        self._cursor += 1
        if self._cursor < len(self.active):
            return
        # round complete: keep arms within sigma / 2^s of the best average
        means = {k: self._sums[k] / self._n_s for k in self.active}
        cutoff = max(means.values()) - self._view.sigma / (2.0 ** self.round)
        survivors = [k for k in self.active if means[k] >= cutoff]
        self.rounds_log.append(
            {"round": self.round, "n_s": self._n_s, "active": list(self.active),
             "means": means, "survivors": list(survivors)}
        )
        self.active = survivors
        self.round += 1
        self._n_s = elimination_schedule(self.round, self._view.n_arms, self._view.horizon, self.T1)
        self._cursor = 0
        self._sums = {k: 0.0 for k in self.active}

    @property
    def state(self) -> EliminationState:
        done = {
            k: (self._n_s if i < self._cursor else self._done_for_arm if i == self._cursor else 0)
            for i, k in enumerate(self.active)
        }
        means = {k: self._sums[k] / done[k] for k in self.active if done[k]}
        return EliminationState(
            round=self.round,
            active=tuple(self.active),
            pulls_per_arm=self._n_s,
            pull_counts=done,
            round_means=means,
            T1=self.T1,
        )


# ---------------------------------------------------------------------------
# UCB baselines
# ---------------------------------------------------------------------------

class _CellUCB:
    """Independent UCB1 cells: one (count, sum) table per cell of a partition."""

    def __init__(self, n_cells: int, n_arms: int, scale: float):
        self.counts = [[0] * n_arms for _ in range(n_cells)]
        self.sums = [[0.0] * n_arms for _ in range(n_cells)]
        self.visits = [0] * n_cells
        self.scale = scale

    def pick(self, cell: int) -> int:
        counts = self.counts[cell]
        for k, c in enumerate(counts):
            if c == 0:
                return k
        n_cell = self.visits[cell]
        sums = self.sums[cell]
        best, best_idx = -math.inf, 0
        for k, c in enumerate(counts):
            idx = sums[k] / c + self.scale * math.sqrt(2.0 * math.log(n_cell) / c)
            if idx > best:
                best, best_idx = idx, k
        return best_idx

    def update(self, cell: int, arm: int, reward: float) -> None:
        self.counts[cell][arm] += 1
        self.sums[cell][arm] += reward
        self.visits[cell] += 1


class StationaryUCB(Policy):
    """UCB1 that ignores periodicity altogether."""

    policy_id = "stationary_ucb"

    def __init__(self, ucb_scale: float = 1.0):
        self.scale = ucb_scale

    def begin(self, view: InstanceView) -> None:
        self._cells = _CellUCB(1, view.n_arms, self.scale)

    def decide(self, t: int) -> int:
        return self._cells.pick(0)

    def observe(self, t: int, arm: int, reward: float) -> None:
        self._cells.update(0, arm, reward)


class PerPhaseUCB(Policy):
    """One independent UCB1 per phase of a shared, known period."""

    policy_id = "per_phase_ucb"
    uses_true_periods = True

    def __init__(self, ucb_scale: float = 1.0):
        self.scale = ucb_scale

    def begin(self, view: InstanceView) -> None:
        if view.true_periods is None:
            raise ValueError("per-phase UCB needs the shared period")
        periods = set(view.true_periods)
        if len(periods) != 1:
            raise ValueError(f"arms must share one period, got {sorted(periods)}")
        self.T1 = periods.pop()
        self._cells = _CellUCB(self.T1, view.n_arms, self.scale)

    def decide(self, t: int) -> int:
        return self._cells.pick(t % self.T1)

    def observe(self, t: int, arm: int, reward: float) -> None:
        self._cells.update(t % self.T1, arm, reward)


class LcmUCB(TwoStagePolicy):
    """Two-stage baseline whose second stage decomposes epochs by residue
    modulo the LCM of the estimated periods (capped to avoid blowup) and runs
    a fresh UCB1 in every residue class; stage-one samples are not reused.
    """

    policy_id = "lcm_ucb"

    def __init__(self, ucb_scale: float = 1.0, lcm_cap: int | None = None, **kwargs):
        kwargs.pop("oracle", None)
        super().__init__(**kwargs)
        self.policy_id = "lcm_ucb"
        self.scale = ucb_scale
        self.lcm_cap = lcm_cap

    def begin(self, view: InstanceView) -> None:
        super().begin(view)
        self._cells = None

    def _finalize_stage_one(self) -> None:
        super()._finalize_stage_one()
        cap = self.lcm_cap if self.lcm_cap is not None else self._view.horizon
        self.lcm_period = min(math.lcm(*self._estimated), cap)
        self._cells = _CellUCB(self.lcm_period, self._view.n_arms, self.scale)

    def decide(self, t: int) -> int:
        if t <= self.stage_one_end:
            return stage_one_schedule(t, self.n, self._view.n_arms)
        if self._cells is None:
            self._finalize_stage_one()
        return self._cells.pick(t % self.lcm_period)

    def observe(self, t: int, arm: int, reward: float) -> None:
        if t <= self.stage_one_end:
            self._blocks[arm].append(reward)
            return
        self._cells.update(t % self.lcm_period, arm, reward)


POLICY_IDS = ("two_stage", "oracle", "seq_elim", "per_phase_ucb", "stationary_ucb", "lcm_ucb")


def make_policy(policy_id: str, params: dict | None = None) -> Policy:
    """Instantiate a policy by its id with a namespaced parameter dict."""
    params = dict(params or {})
    if policy_id == "two_stage":
        return TwoStagePolicy(**params)
    if policy_id == "oracle":
        return OraclePolicy(**params)
    if policy_id == "seq_elim":
        return SequentialEliminationPolicy(**params)
    if policy_id == "per_phase_ucb":
        return PerPhaseUCB(**params)
    if policy_id == "stationary_ucb":
        return StationaryUCB(**params)
    if policy_id == "lcm_ucb":
        return LcmUCB(**params)
    raise ValueError(f"unknown policy id {policy_id!r}; expected one of {POLICY_IDS}")
