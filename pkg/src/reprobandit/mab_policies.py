"""Reproducible K-armed bandit policies.

* :func:`run_etc` explores round-robin for a number of rounds fixed by the
  known gap, then commits.
* :func:`run_alg1` is batched elimination on top of the reproducible mean
  estimator.
* :func:`run_alg2` is batched elimination with a blown-up sample size and a
  shared random elimination threshold.

All three return the full :class:`~reprobandit.trace.ExecutionTrace`. Arms are
0-based. Ties in every argmax go to the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environments import MabEnvironment, RewardStream, pull_mab_many
from .errors import HorizonTooSmall
from .repro_sq import DELTA_FLOOR, SqRequest, repro_mean_from_stats, required_samples
from .shared_randomness import Purpose, SharedSeed, SubstreamKey
from .trace import ExecutionTrace, TraceBuilder

MIN_BLOWUP = 2304
_FLOOR_EPS = 1e-9


def _floor(x: float) -> int:
    return math.floor(x + _FLOOR_EPS)


def _ceil(x: float) -> int:
    return math.ceil(x - _FLOOR_EPS)


def blowup(K: int, rho: float) -> int:
    """``floor(max(K^2 / rho^2, 2304))``."""
    return _floor(max(K * K / (rho * rho), MIN_BLOWUP))


@dataclass(frozen=True)
class BatchSchedule:
    T: int
    K: int
    B: int
    q: float
    beta: int
    base_pulls: tuple[int, ...]  # floor(q^i) for i = 1..B-1
    cumulative: tuple[int, ...]  # c_i

    def pulls_per_arm(self, i: int) -> int:
        """Pulls of each active arm in batch ``i`` (1-based)."""
        return self.beta * self.base_pulls[i - 1]


def batch_plan(T: int, K: int, rho: float, beta_override: int | None = None,
               policy: str = "alg2", n_batches: int | None = None) -> BatchSchedule:
    """Geometric batch schedule with ``B = ceil(ln T)`` and ``q = T^(1/B)``."""
    if T < 2:
        raise ValueError("horizon must be at least 2")
    B = n_batches if n_batches is not None else math.ceil(math.log(T))
    B = max(B, 1)
    q = T ** (1.0 / B)
    if beta_override is not None:
        beta = int(beta_override)
    elif policy == "alg2":
        beta = blowup(K, rho)
    else:
        beta = 1
    base = tuple(_floor(q**i) for i in range(1, B))
    cum = tuple(int(c) for c in np.cumsum(base)) if base else ()
    return BatchSchedule(T, K, B, q, beta, base, cum)


@dataclass(frozen=True)
class ConfidenceRadii:
    U: float
    U_tilde: float
    U_bar: float


@dataclass
class EliminationState:
    active: list[int]
    estimates: dict[int, float] = field(default_factory=dict)
    pull_counts: dict[int, int] = field(default_factory=dict)
    batch_index: int = 0


def _argmax(active, estimates) -> int:
    best = active[0]
    for a in active[1:]:
        if estimates.get(a, 0.0) > estimates.get(best, 0.0):
            best = a
    return best


def eliminate_alg2(state: EliminationState, radii: ConfidenceRadii) -> list[int]:
    """Keep arms unless ``mu_hat + U_tilde < max mu_hat - U_bar``."""
    top = max(state.estimates[a] for a in state.active)
    cut = top - radii.U_bar
    return [a for a in state.active if not state.estimates[a] + radii.U_tilde < cut]


def _commit(builder: TraceBuilder, env, stream, arm: int, n: int) -> None:
    if n > 0:
        builder.add(arm, pull_mab_many(env, arm, n, stream))


def run_etc(env: MabEnvironment, T: int, rho: float, delta_min: float,
            shared: SharedSeed | None = None, stream: RewardStream | None = None) -> ExecutionTrace:
    """Round-robin for ``m = ceil(4 ln(1/rho) / gap^2)`` rounds per arm, then commit."""
    if not 0.0 < delta_min <= 1.0:
        raise ValueError("known gap must lie in (0, 1]")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    stream = stream if stream is not None else RewardStream(0)
    K = env.K
    m = max(0, _ceil(4.0 / delta_min**2 * math.log(1.0 / rho)))
    if m * K > T:
        raise HorizonTooSmall(f"exploration needs {m * K} > T={T} pulls")
    explore = np.stack([pull_mab_many(env, a, m, stream) for a in range(K)]) if m else np.empty((K, 0))
    means = explore.mean(axis=1) if m else np.zeros(K)
    best = int(np.argmax(means))  # first maximum
    rest = T - m * K
    arms = np.concatenate([np.tile(np.arange(K), m), np.full(rest, best)]).astype(np.int64)
    rewards = np.concatenate([explore.T.ravel(), pull_mab_many(env, best, rest, stream)])
    log = [{"explore_rounds": m, "estimates": means.tolist(), "committed": best}]
    return ExecutionTrace(arms, rewards, log)


def run_alg1(env: MabEnvironment, T: int, rho: float, shared: SharedSeed,
             stream: RewardStream) -> ExecutionTrace:
    """Batched elimination on reproducible mean estimates.

    Each batch targets accuracy ``tau_i = min(1, sqrt(ln(2KTB)/c_i))``; every
    active arm is topped up to the sample count the estimator needs at
    ``(tau_i, rho/(KB), 1/(2KTB))`` and re-estimated on all its samples.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    K = env.K
    if T < K:
        raise HorizonTooSmall("need T >= K")
    builder = TraceBuilder()
    if K == 1:
        _commit(builder, env, stream, 0, T)
        return builder.build()
    plan = batch_plan(T, K, rho, policy="alg1")
    B = plan.B
    log_term = math.log(2 * K * T * B)
    delta = max(1.0 / (2 * K * T * B), DELTA_FLOOR)
    rho_arm = rho / (K * B)
    active = list(range(K))
    sums = np.zeros(K)
    counts = np.zeros(K, dtype=np.int64)
    estimates: dict[int, float] = {}
    log = []
    r = T
    for i in range(1, B):
        c_i = plan.cumulative[i - 1]
        tau = min(1.0, math.sqrt(log_term / c_i))
        target = required_samples(SqRequest(tau, rho_arm, delta))
        need = {a: max(0, target - int(counts[a])) for a in active}
        if sum(need.values()) > r:
            break
        for a in active:
            if need[a]:
                x = pull_mab_many(env, a, need[a], stream)
                builder.add(a, x)
                sums[a] += x.sum()
                counts[a] += need[a]
        r -= sum(need.values())
        for a in active:
            req = SqRequest(tau, rho_arm, delta, SubstreamKey(Purpose.GRID_OFFSET, i, a))
            estimates[a] = repro_mean_from_stats(sums[a] / counts[a], int(counts[a]), req, shared)
        top = max(estimates[a] for a in active)
        survivors = [a for a in active if not estimates[a] < top - 2.0 * tau]
        log.append({
            "batch": i, "active": list(active), "tau": tau, "target_samples": target,
            "estimates": {a: estimates[a] for a in active},
            "eliminated": [a for a in active if a not in survivors], "remaining": r,
        })
        active = survivors
    _commit(builder, env, stream, _argmax(active, estimates), r)
    return builder.build(log)


def run_alg2(env: MabEnvironment, T: int, rho: float, shared: SharedSeed,
             stream: RewardStream, beta: int | None = None) -> ExecutionTrace:
    """Batched elimination with blow-up ``beta`` and random threshold ``U_bar``.

    The batch log records, per batch, the radii, the drawn threshold and the
    arms whose estimate sits in the region where the threshold decides.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    K = env.K
    builder = TraceBuilder()
    if K == 1:
        _commit(builder, env, stream, 0, T)
        return builder.build()
    plan = batch_plan(T, K, rho, beta_override=beta, policy="alg2")
    if plan.B < 2 or plan.pulls_per_arm(1) * K > T:
        raise HorizonTooSmall(f"first batch needs {plan.beta} * {K} * floor(q) pulls > T={T}")
    B = plan.B
    log_term = math.log(2 * K * T * B)
    state = EliminationState(list(range(K)))
    sums = np.zeros(K)
    counts = np.zeros(K, dtype=np.int64)
    log = []
    r = T
    for i in range(1, B):
        n = plan.pulls_per_arm(i)
        if n * len(state.active) > r:
            break
        for a in state.active:
            x = pull_mab_many(env, a, n, stream)
            builder.add(a, x)
            sums[a] += x.sum()
            counts[a] += n
        c_i = plan.cumulative[i - 1]
        U = math.sqrt(2.0 * log_term / c_i)
        U_tilde = math.sqrt(2.0 * log_term / (plan.beta * c_i))
        U_bar = shared.uniform(SubstreamKey(Purpose.THRESHOLD, i, 0), U / 2.0, U)
        radii = ConfidenceRadii(U, U_tilde, U_bar)
        r -= n * len(state.active)
        state.batch_index = i
        state.estimates = {a: sums[a] / counts[a] for a in state.active}
        state.pull_counts = {a: int(counts[a]) for a in state.active}
        top_arm = _argmax(state.active, state.estimates)
        top = state.estimates[top_arm]
        lo, hi = top - U - 5.0 * U_tilde, top - U / 2.0 + 3.0 * U_tilde
        bad = [a for a in state.active if a != top_arm and lo <= state.estimates[a] <= hi]
        survivors = eliminate_alg2(state, radii)
        log.append({
            "batch": i, "active": list(state.active), "pulls_per_arm": n,
            "U": U, "U_tilde": U_tilde, "U_bar": U_bar,
            "estimates": dict(state.estimates), "top_arm": top_arm,
            "bad_region": bad, "eliminated": [a for a in state.active if a not in survivors],
            "remaining": r,
        })
        state.active = survivors
    _commit(builder, env, stream, _argmax(state.active, state.estimates), r)
    return builder.build(log)
