"""Paired executions, reproducibility certification, regret curves and sweeps.

Seeding: run ``k`` of a config uses shared seed ``shared_seed + k``; the two
executions of pair ``k`` draw rewards from ``[reward_seed_a, k]`` and
``[reward_seed_b, k]``. Everything is pre-assigned per cell, so running cells
in parallel cannot change any result.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .environments import LinearEnvironment, MabEnvironment, RewardStream, environment_from_dict, load_environment
from .linear_policies import coarse_net_eta, run_alg3, run_alg4
from .mab_policies import run_alg1, run_alg2, run_etc
from .repro_sq import SqRequest, repro_mean_from_stats, required_samples
from .shared_randomness import SharedSeed
from .trace import ExecutionTrace, first_divergence

POLICIES = ("etc", "alg1", "alg2", "alg3", "alg4")
CP_ALPHA = 0.025  # lower end of the two-sided 95% interval


@dataclass
class ExperimentConfig:
    policy: str
    env: dict | str
    T: int
    rho: float
    n_pairs: int = 30
    runs: int = 20
    shared_seed: int = 0
    reward_seed_a: int = 1
    reward_seed_b: int = 2
    delta_min: float | None = None
    net_eta: float | str | None = None  # number, or "coarse" for T^(-1/(4d+2))
    beta: int | None = None
    env_id: str = ""

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        if isinstance(self.env, str) and not Path(self.env).is_file():
            raise FileNotFoundError(self.env)
        if self.reward_seed_a == self.reward_seed_b:
            raise ValueError("paired executions need distinct reward seeds")
        self.T = int(self.T)
        if not self.env_id:
            self.env_id = Path(self.env).stem if isinstance(self.env, str) else "inline"

    def environment(self) -> MabEnvironment | LinearEnvironment:
        return load_environment(self.env) if isinstance(self.env, str) else environment_from_dict(self.env)

    @classmethod
    def from_dict(cls, spec: dict) -> "ExperimentConfig":
        return cls(**spec)


@dataclass
class PairedRunReport:
    identical: bool
    first_divergence: int | None
    traces: tuple[ExecutionTrace, ExecutionTrace]


@dataclass
class RegretCurve:
    horizons: list[int]
    mean_pseudo_regret: list[float]
    ci_halfwidth: list[float]
    runs_per_point: int
    per_run: list[list[float]] = field(default_factory=list)


def run_policy(config: ExperimentConfig, shared_seed: int, reward_seed, env=None,
               T: int | None = None) -> ExecutionTrace:
    """One execution of ``config.policy``."""
    env = config.environment() if env is None else env
    T = config.T if T is None else int(T)
    shared = SharedSeed(shared_seed)
    stream = RewardStream(reward_seed)
    p = config.policy
    if p == "etc":
        if config.delta_min is None:
            raise ValueError("etc needs delta_min")
        return run_etc(env, T, config.rho, config.delta_min, shared, stream)
    if p == "alg1":
        return run_alg1(env, T, config.rho, shared, stream)
    if p == "alg2":
        return run_alg2(env, T, config.rho, shared, stream, config.beta)
    if p == "alg3":
        return run_alg3(env, T, config.rho, shared, stream, config.beta)
    eta = config.net_eta
    if eta == "coarse":
        eta = coarse_net_eta(T, env.d)
    return run_alg4(env, T, config.rho, shared, stream, net_eta=None if eta is None else float(eta))


def run_paired(config: ExperimentConfig, pair_index: int = 0, env=None) -> PairedRunReport:
    """Two executions sharing internal randomness, with independent rewards."""
    env = config.environment() if env is None else env
    shared = config.shared_seed + pair_index
    a = run_policy(config, shared, [config.reward_seed_a, pair_index], env)
    b = run_policy(config, shared, [config.reward_seed_b, pair_index], env)
    div = first_divergence(a.arms, b.arms)  # compares arm identifiers only
    return PairedRunReport(div is None, div, (a, b))


def clopper_pearson_lower(successes: int, n: int, alpha: float = CP_ALPHA) -> float:
    """One-sided lower confidence bound for a binomial rate."""
    if n <= 0:
        raise ValueError("need at least one trial")
    if successes <= 0:
        return 0.0
    return float(stats.beta.ppf(alpha, successes, n - successes + 1))


def estimate_repro_rate(config: ExperimentConfig, n_pairs: int | None = None,
                        reports: list | None = None) -> tuple[float, float]:
    """Fraction of identical pairs and its Clopper-Pearson lower bound.

    When ``reports`` is a list, the per-pair reports are appended to it.
    """
    n = config.n_pairs if n_pairs is None else n_pairs
    if n < 30:
        raise ValueError("certification needs at least 30 pairs")
    env = config.environment()
    hits = 0
    for k in range(n):
        rep = run_paired(config, k, env)
        hits += rep.identical
        if reports is not None:
            reports.append((k, rep.identical, rep.first_divergence))
    return hits / n, clopper_pearson_lower(hits, n)


def pseudo_regret(trace: ExecutionTrace, env: MabEnvironment | LinearEnvironment) -> float:
    """``T * best - sum_t mean(a_t)`` with true means."""
    if isinstance(env, MabEnvironment):
        mu = np.asarray(env.arm_means)
        counts = np.bincount(trace.arms, minlength=env.K)
        return float(trace.T * env.best_mean - counts @ mu)
    if trace.points is None:
        raise ValueError("linear traces need the action points")
    counts = np.bincount(trace.arms, minlength=len(trace.points))
    values = np.asarray(trace.points) @ env.theta_star
    return float(trace.T * env.best_value - counts @ values)


def _mean_ci(xs: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(xs, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(1.96 * x.std(ddof=1) / math.sqrt(x.size))


def regret_samples(config: ExperimentConfig, T: int | None = None, runs: int | None = None) -> list[float]:
    env = config.environment()
    n = config.runs if runs is None else runs
    return [
        pseudo_regret(run_policy(config, config.shared_seed + k, [config.reward_seed_a, k], env, T), env)
        for k in range(n)
    ]


def regret_curve(config: ExperimentConfig, horizons: Sequence[int], runs: int | None = None) -> RegretCurve:
    n = config.runs if runs is None else runs
    per_run = [regret_samples(config, T, n) for T in horizons]
    stats_ = [_mean_ci(r) for r in per_run]
    return RegretCurve(list(horizons), [m for m, _ in stats_], [c for _, c in stats_], n, per_run)


# -- sweeps ---------------------------------------------------------------

SWEEP_COLUMNS = ("policy", "env_id", "T", "rho", "runs", "mean_regret", "ci", "error")


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _sweep_cell(config: ExperimentConfig) -> dict:
    row = {"policy": config.policy, "env_id": config.env_id, "T": config.T,
           "rho": _fmt(config.rho), "runs": config.runs}
    try:
        mean, ci = _mean_ci(regret_samples(config))
        row.update(mean_regret=_fmt(mean), ci=_fmt(ci), error="")
    except Exception as exc:  # a failed cell is recorded, the sweep goes on
        row.update(mean_regret="", ci="", error=f"{type(exc).__name__}: {exc}")
    return row


def sweep(configs: Sequence[ExperimentConfig], workers: int = 1) -> list[dict]:
    """Regret table with one row per config, in input order."""
    if not configs:
        raise ValueError("empty sweep")
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_sweep_cell, configs))
    return [_sweep_cell(c) for c in configs]


def rows_to_csv(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in columns})
    return buf.getvalue()


def write_csv(path: str | Path, rows: list[dict], columns: Sequence[str]) -> None:
    Path(path).write_text(rows_to_csv(rows, columns))


def config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)


# -- mean-estimator certification -----------------------------------------

@dataclass
class MeanCheck:
    tau: float
    rho: float
    delta: float
    trials: int
    agreements: int
    accuracy_failures: int

    @property
    def agreement_rate(self) -> float:
        return self.agreements / self.trials

    @property
    def accuracy_rate(self) -> float:
        return 1.0 - self.accuracy_failures / self.trials

    @property
    def agreement_lower(self) -> float:
        return clopper_pearson_lower(self.agreements, self.trials)

    def accuracy_ceiling(self) -> float:
        """Allowed failures: ``delta * n`` plus three binomial standard deviations."""
        n = self.trials
        return self.delta * n + 3.0 * math.sqrt(n * self.delta * (1.0 - self.delta))

    def certified(self) -> bool:
        return self.agreement_lower >= 1.0 - self.rho and self.accuracy_failures <= self.accuracy_ceiling()


def check_repro_mean(p: float, tau: float, rho: float, delta: float, trials: int,
                     shared_seed: int = 0, reward_seed_a: int = 1, reward_seed_b: int = 2) -> MeanCheck:
    """Paired calls of the rounding estimator on Bernoulli(``p``) data.

    Call ``k`` shares seed ``shared_seed + k``; each execution's empirical mean
    is drawn as Binomial(n, p)/n, which is exact in distribution.
    """
    req = SqRequest(tau, rho, delta)
    n = required_samples(req)
    ma = np.random.default_rng(reward_seed_a).binomial(n, p, size=trials) / n
    mb = np.random.default_rng(reward_seed_b).binomial(n, p, size=trials) / n
    agree = fail = 0
    for k in range(trials):
        seed = SharedSeed(shared_seed + k)
        va = repro_mean_from_stats(float(ma[k]), n, req, seed)
        vb = repro_mean_from_stats(float(mb[k]), n, req, seed)
        agree += va == vb
        fail += abs(va - p) > tau
    return MeanCheck(tau, rho, delta, trials, agree, fail)
