"""Experiment orchestration: episodes, Monte Carlo replication, aggregation.

Configs are plain JSON dicts. Replication r always uses seed base_seed + r, so
growing the replication count preserves the prefix of results, and noise is
keyed by (seed, epoch) so every policy in a run faces the identical noise
sequence. Parallel execution cannot change output bytes: jobs are mapped in a
fixed order and reduced deterministically.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from dataclasses import dataclass
from multiprocessing import Pool

import numpy as np

from . import __version__
from .env import (
    BanditInstance,
    RunResult,
    instance_from_dict,
    make_demo_instance,
    make_lower_bound_instance,
    pseudo_regret,
)
from .policies import InstanceView, Policy, make_policy
from .spectral import failure_probability_bound

CSV_HEADER = "policy,T,replication,t,cum_regret"


def run_episode(instance: BanditInstance, policy: Policy, seed: int) -> RunResult:
    """Play one full episode; deterministic in (instance, policy config, seed)."""
    T, K = instance.horizon, instance.n_arms
    stream = instance.noise_stream(seed)
    view = InstanceView(
        n_arms=K,
        horizon=T,
        sigma=instance.noise.sigma,
        true_periods=instance.periods if policy.uses_true_periods else None,
    )
    policy.begin(view)
    actions = np.empty(T, dtype=int)
    rewards = np.empty(T, dtype=float)
    profiles = [np.asarray(p.values) for p in instance.arms]
    periods = instance.periods
    eps = stream.values
    for t in range(1, T + 1):
        a = policy.decide(t)
        y = profiles[a][(t - 1) % periods[a]] + eps[t - 1]
        policy.observe(t, a, y)
        actions[t - 1] = a
        rewards[t - 1] = y
    gaps, cum = pseudo_regret(instance, actions)
    return RunResult(
        actions=actions,
        rewards=rewards,
        gaps=gaps,
        cumulative_regret=cum,
        seed=seed,
        policy_id=policy.policy_id,
        estimated_periods=policy.estimated_periods,
        events=list(policy.events),
    )


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def make_preset_instance(name: str, params: dict | None = None) -> BanditInstance:
    """Named instances: the single-arm spectral demo, the default three-arm
    sweep environment, and the e1/e2/e3 hard families."""
    params = dict(params or {})
    if name == "demo":
        return make_demo_instance(params.get("n", 50), params.get("sigma", 0.2))
    if name == "sweep_default":
        return default_sweep_instance(
            horizon=params.get("horizon", 40000), sigma=params.get("sigma", 0.1)
        )
    if name in ("e1", "e2", "e3"):
        return make_lower_bound_instance(name, **params)
    raise ValueError(f"unknown preset {name!r}")


def default_sweep_instance(horizon: int, sigma: float = 0.04) -> BanditInstance:
    """Three arms with periods (2, 3, 4) and a phase-dependent best arm.

    Every arm carries a strong fundamental, detectable at the recommended
    stage-one sample sizes of the larger horizons, and cross-arm margins a few
    multiples of sigma at most phases.
    """
    from .env import MeanProfile, NoiseModel

    arms = (
        MeanProfile.from_values([0.36, 0.04]),
        MeanProfile.from_values([0.04, 0.36, 0.08]),
        MeanProfile.from_values([0.40, 0.24, 0.0, 0.16]),
    )
    return BanditInstance(arms=arms, noise=NoiseModel("gaussian", sigma), horizon=horizon)


def resolve_instance(spec: dict, horizon: int | None = None) -> BanditInstance:
    if "file" in spec:
        with open(spec["file"]) as fh:
            inst = instance_from_dict(json.load(fh))
    elif "preset" in spec:
        params = dict(spec.get("params", {}))
        if horizon is not None and spec["preset"] in ("sweep_default",):
            params["horizon"] = horizon
        if horizon is not None and spec["preset"] in ("e1", "e2", "e3"):
            params["T"] = horizon
        inst = make_preset_instance(spec["preset"], params)
    else:
        inst = instance_from_dict(spec)
    if horizon is not None and inst.horizon != horizon:
        inst = BanditInstance(arms=inst.arms, noise=inst.noise, horizon=horizon)
    return inst


def default_sweep_config() -> dict:
    """The stock regret-rate experiment: five horizons, 50 replications."""
    return {
        "instance": {"preset": "sweep_default", "params": {"sigma": 0.04}},
        "policies": [
            {"id": "two_stage"},
            {"id": "oracle"},
            {"id": "stationary_ucb"},
            {"id": "lcm_ucb"},
        ],
        "horizons": [2500, 5000, 10000, 20000, 40000],
        "replications": 50,
        "base_seed": 0,
        "curve_points": 128,
        "workers": 1,
    }


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _curve_grid(T: int, points: int) -> np.ndarray:
    return np.unique(np.linspace(1, T, num=min(T, points)).astype(int))


def _run_job(job: tuple) -> dict:
    instance_dict, horizon, policy_id, params, rep, seed, curve_points = job
    instance = resolve_instance(instance_dict, horizon=horizon)
    policy = make_policy(policy_id, params)
    result = run_episode(instance, policy, seed)
    grid = _curve_grid(instance.horizon, curve_points)
    success = None
    if result.estimated_periods is not None:
        success = tuple(result.estimated_periods) == tuple(instance.periods)
    return {
        "policy": policy.policy_id,
        "T": instance.horizon,
        "replication": rep,
        "seed": seed,
        "final_regret": result.final_regret,
        "curve_t": grid.tolist(),
        "curve_regret": [float(result.cumulative_regret[t - 1]) for t in grid],
        "estimated_periods": list(result.estimated_periods) if result.estimated_periods else None,
        "success": success,
        "n_events": len(result.events),
    }


@dataclass
class AggregateStats:
    """Replication summary for one (policy, horizon) cell."""

    policy: str
    T: int
    n_reps: int
    mean_final_regret: float
    se_final_regret: float
    success_rate: float | None
    curve_slope: float | None

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "T": self.T,
            "n_reps": self.n_reps,
            "mean_final_regret": self.mean_final_regret,
            "se_final_regret": self.se_final_regret,
            "success_rate": self.success_rate,
            "curve_slope": self.curve_slope,
        }


def loglog_slope(xs, ys, tail_fraction: float = 0.5) -> float:
    """OLS slope of log(y) against log(x) over the tail of a curve.

    The tail keeps the last ceil(len * tail_fraction) points; nonpositive y
    values in the tail are skipped with a warning. Needs two usable points.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise ValueError("need two aligned sweep points at minimum")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    k = max(2, math.ceil(xs.size * tail_fraction))
    xs, ys = xs[-k:], ys[-k:]
    keep = ys > 0
    if not keep.all():
        warnings.warn(f"skipped {int((~keep).sum())} nonpositive regret points in slope fit")
    xs, ys = xs[keep], ys[keep]
    if xs.size < 2:
        raise ValueError("fewer than two positive points left in the tail")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def aggregate(rep_rows: list[dict]) -> AggregateStats:
    finals = np.array([r["final_regret"] for r in rep_rows])
    R = len(rep_rows)
    se = float(finals.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    succ = [r["success"] for r in rep_rows if r["success"] is not None]
    success_rate = (sum(succ) / len(succ)) if succ else None
    grid = np.asarray(rep_rows[0]["curve_t"])
    mean_curve = np.mean([r["curve_regret"] for r in rep_rows], axis=0)
    try:
        slope = loglog_slope(grid, mean_curve, tail_fraction=0.5)
    except ValueError:
        slope = None
    return AggregateStats(
        policy=rep_rows[0]["policy"],
        T=rep_rows[0]["T"],
        n_reps=R,
        mean_final_regret=float(finals.mean()),
        se_final_regret=se,
        success_rate=success_rate,
        curve_slope=slope,
    )


def monte_carlo(config: dict, out_dir: str | None = None) -> dict:
    """Run every (policy, horizon, replication) cell of a config.

    Returns {"cells": {(policy, T): AggregateStats}, "raw": rows,
    "sweep_slopes": {policy: slope of mean final regret vs horizon}} and, when
    ``out_dir`` is given, writes regret_curves.csv, summary.json, run_meta.json
    and raw/ files.
    """
    R = int(config.get("replications", 1))
    if R < 1:
        raise ValueError("need at least one replication")
    base_seed = int(config.get("base_seed", 0))
    curve_points = int(config.get("curve_points", 128))
    workers = int(config.get("workers", 1))
    horizons = config.get("horizons")
    if horizons is None:
        horizons = [None]
    else:
        hs = [int(h) for h in horizons]
        if hs != sorted(hs) or len(set(hs)) != len(hs):
            raise ValueError("horizons must be strictly increasing")
        horizons = hs

    jobs = []
    for pol in config["policies"]:
        for T in horizons:
            for rep in range(R):
                jobs.append(
                    (config["instance"], T, pol["id"], pol.get("params", {}), rep, base_seed + rep, curve_points)
                )
    if workers > 1:
        with Pool(workers) as pool:
            rows = pool.map(_run_job, jobs)
    else:
        rows = [_run_job(j) for j in jobs]

    cells: dict[tuple[str, int], AggregateStats] = {}
    by_cell: dict[tuple[str, int], list[dict]] = {}
    for row in rows:
        by_cell.setdefault((row["policy"], row["T"]), []).append(row)
    for key, cell_rows in by_cell.items():
        cell_rows.sort(key=lambda r: r["replication"])
        cells[key] = aggregate(cell_rows)

    sweep_slopes: dict[str, float] = {}
    for pol in config["policies"]:
        pid = make_policy(pol["id"], pol.get("params", {})).policy_id
        ts = sorted(T for (p, T) in cells if p == pid)
        if len(ts) >= 2:
            finals = [cells[(pid, T)].mean_final_regret for T in ts]
            try:
                sweep_slopes[pid] = loglog_slope(ts, finals, tail_fraction=float(config.get("tail_fraction", 0.5)))
            except ValueError:
                sweep_slopes[pid] = float("nan")

    results = {"cells": cells, "raw": rows, "sweep_slopes": sweep_slopes}
    if out_dir is not None:
        write_outputs(config, results, out_dir)
    return results


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_curves_csv(rows: list[dict], path: str) -> None:
    ordered = sorted(rows, key=lambda r: (r["policy"], r["T"], r["replication"]))
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in ordered:
            base = f'{r["policy"]},{r["T"]},{r["replication"]},'
            for t, c in zip(r["curve_t"], r["curve_regret"]):
                fh.write(base + f"{t},{_fmt(c)}\n")


def summary_dict(config: dict, results: dict) -> dict:
    cells = [s.to_dict() for s in results["cells"].values()]
    cells.sort(key=lambda c: (c["policy"], c["T"]))
    return {
        "config_hash": config_hash(config),
        "cells": cells,
        "sweep_slopes": results["sweep_slopes"],
    }


def write_outputs(config: dict, results: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_curves_csv(results["raw"], os.path.join(out_dir, "regret_curves.csv"))
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary_dict(config, results), fh, indent=2, sort_keys=True)
    meta = {
        "config": config,
        "config_hash": config_hash(config),
        "seeds": [int(config.get("base_seed", 0)) + r for r in range(int(config.get("replications", 1)))],
        "versions": {"periodic_bandits": __version__, "numpy": np.__version__},
    }
    with open(os.path.join(out_dir, "run_meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    raw_dir = os.path.join(out_dir, "raw")
    os.makedirs(raw_dir, exist_ok=True)
    by_cell: dict[tuple[str, int], list[dict]] = {}
    for row in results["raw"]:
        by_cell.setdefault((row["policy"], row["T"]), []).append(row)
    for (pid, T), cell_rows in sorted(by_cell.items()):
        cell_rows.sort(key=lambda r: r["replication"])
        with open(os.path.join(raw_dir, f"{pid}_T{T}.json"), "w") as fh:
            json.dump(cell_rows, fh)


def report_from_dir(out_dir: str) -> dict:
    """Recompute summary.json (and regret_curves.csv if absent) from raw files."""
    raw_dir = os.path.join(out_dir, "raw")
    rows: list[dict] = []
    for name in sorted(os.listdir(raw_dir)):
        if name.endswith(".json"):
            with open(os.path.join(raw_dir, name)) as fh:
                rows.extend(json.load(fh))
    cells = {}
    by_cell: dict[tuple[str, int], list[dict]] = {}
    for row in rows:
        by_cell.setdefault((row["policy"], row["T"]), []).append(row)
    for key, cell_rows in by_cell.items():
        cell_rows.sort(key=lambda r: r["replication"])
        cells[key] = aggregate(cell_rows)
    sweep_slopes = {}
    for pid in sorted({p for p, _ in cells}):
        ts = sorted(T for (p, T) in cells if p == pid)
        if len(ts) >= 2:
            finals = [cells[(pid, T)].mean_final_regret for T in ts]
            try:
                sweep_slopes[pid] = loglog_slope(ts, finals)
            except ValueError:
                sweep_slopes[pid] = float("nan")
    results = {"cells": cells, "raw": rows, "sweep_slopes": sweep_slopes}
    meta_path = os.path.join(out_dir, "run_meta.json")
    config = {}
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            config = json.load(fh).get("config", {})
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary_dict(config, results), fh, indent=2, sort_keys=True)
    csv_path = os.path.join(out_dir, "regret_curves.csv")
    if not os.path.exists(csv_path):
        write_curves_csv(rows, csv_path)
    return results


# ---------------------------------------------------------------------------
# Theory overlays
# ---------------------------------------------------------------------------

def regret_rate_envelope(T: int, d: int, constant: float = 1.0) -> float:
    """constant * sqrt(T d log(T)^2 log(T/d)); the shape of the two-stage rate."""
    if T <= d:
        raise ValueError("need T > d for the envelope")
    return constant * math.sqrt(T * d * math.log(T) ** 2 * math.log(T / d))


def bound_overlay(T: int, d: int, K: int, n: int, H: float, sigma: float, constant: float = 1.0) -> dict:
    """Theoretical companions for an empirical regret curve: the stage-one
    misidentification bound and a scaled rate envelope."""
    del sigma  # the failure bound depends on the noise only through H's choice
    return {
        "failure_bound": failure_probability_bound(n, K, H),
        "rate_envelope": regret_rate_envelope(T, d, constant),
    }
