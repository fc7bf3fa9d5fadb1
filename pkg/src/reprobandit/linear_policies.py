"""Reproducible linear bandits over finite arm sets and over netted infinite sets.

:func:`run_alg3` runs batched elimination on finite arms: each batch pulls a
deterministic multiset from an approximate G-optimal design, fits least
squares, and eliminates with a shared random threshold.

:func:`run_alg4` handles infinite sets through a deterministic net. Each batch
designs over the surviving net points and replaces plain least squares with
:func:`reproducible_lse`, which rounds per-arm means on a shared random grid.

Rewards are assumed 1-subgaussian around ``<theta*, a>``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .environments import ActionKind, ActionSet, LinearEnvironment, RewardStream, pull_linear_many
from .errors import DegenerateArmSet, HorizonTooSmall, NetTooLarge, SingularDesign
from .mab_policies import _floor, blowup
from .optimal_design import (
    RANK_TOL,
    Design,
    design_to_multiset,
    effective_support,
    frank_wolfe_design,
    g_value,
    ky_initialize,
)
from .repro_sq import DELTA_FLOOR, SqRequest, repro_mean_from_stats, required_samples
from .shared_randomness import Purpose, SharedSeed, SubstreamKey
from .trace import ExecutionTrace, TraceBuilder

COND_WARN = 1e12
NET_CAP = 1_000_000
NOISE_SCALE = 1.0  # subgaussian variance proxy of the reward noise


@dataclass
class LseResult:
    theta_hat: np.ndarray
    gram: np.ndarray
    pull_count: np.ndarray


def _solve_gram(V: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        c = scipy.linalg.cho_factor(V, lower=True)
    except np.linalg.LinAlgError:
        raise SingularDesign("Gram matrix is not positive definite") from None
    cond = np.linalg.cond(V)
    if cond > COND_WARN:
        warnings.warn(f"ill-conditioned Gram matrix (cond={cond:.3g})", RuntimeWarning, stacklevel=3)
    return scipy.linalg.cho_solve(c, b)


def least_squares_from_stats(points, counts, reward_sums) -> LseResult:
    """LSE from per-arm pull counts and reward sums."""
    A = np.atleast_2d(np.asarray(points, dtype=float))
    n = np.asarray(counts, dtype=float)
    s = np.asarray(reward_sums, dtype=float)
    V = (A * n[:, None]).T @ A
    theta = _solve_gram(V, A.T @ s)
    return LseResult(theta, V, np.asarray(counts, dtype=np.int64))


def least_squares(pulls) -> LseResult:
    """LSE from an iterable of ``(action, reward)`` pairs."""
    pulls = list(pulls)
    if not pulls:
        raise SingularDesign("no pulls")
    A = np.array([np.asarray(a, dtype=float).ravel() for a, _ in pulls])
    r = np.array([float(x) for _, x in pulls])
    uniq, inverse = np.unique(A, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    counts = np.bincount(inverse, minlength=len(uniq))
    sums = np.bincount(inverse, weights=r, minlength=len(uniq))
    return least_squares_from_stats(uniq, counts, sums)


# -- nets -----------------------------------------------------------------

@dataclass
class NetSpec:
    base_set: ActionSet
    resolution: float
    points: np.ndarray

    @property
    def size(self) -> int:
        return len(self.points)


def coarse_net_eta(T: int, d: int) -> float:
    """Resolution ``T^(-1/(4d+2))`` that keeps netted regret sublinear."""
    return float(T) ** (-1.0 / (4 * d + 2))


def projected_net_size(d: int, eta: float) -> float:
    """Lattice points of pitch ``eta/sqrt(d)`` inside the unit ball, estimated by volume."""
    h = eta / math.sqrt(d)
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return ball * (1.0 + h * math.sqrt(d) / 2) ** d / h**d


def build_net(base: ActionSet, eta: float, cap: int = NET_CAP) -> NetSpec:
    """Deterministic ``eta``-cover of ``base``.

    Finite sets (and hypercube vertices) are their own cover. For the unit ball
    the net is the axis lattice of pitch ``eta/sqrt(d)`` inside the ball:
    truncating the coordinates of any ball point toward zero lands on a lattice
    point of no larger norm at distance at most ``eta``.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    if base.kind is not ActionKind.UNIT_BALL:
        return NetSpec(base, eta, np.asarray(base.materialize(), dtype=float))
    d = base.dim
    est = projected_net_size(d, eta)
    if est > cap:
        raise NetTooLarge(
            f"about {est:.3g} net points exceed the cap of {cap}; use a coarser resolution "
            f"such as {coarse_net_eta(10**6, d):.3g} (T^(-1/(4d+2)) at T=1e6)"
        )
    h = eta / math.sqrt(d)
    m = _floor(1.0 / h)
    grid = np.arange(-m, m + 1) * h
    pts = np.zeros((1, 0))
    sq = np.zeros(1)
    for _ in range(d):
        new_sq = (sq[:, None] + grid[None, :] ** 2).ravel()
        keep = new_sq <= 1.0 + 1e-12
        pts = np.column_stack([np.repeat(pts, len(grid), axis=0), np.tile(grid, len(sq))])[keep]
        sq = new_sq[keep]
    return NetSpec(base, eta, pts)


# -- reproducible LSE -----------------------------------------------------

def lse_sq_request(tau: float, rho: float, delta: float, d: int, n_core: int,
                   batch: int = 0, arm: int = 0) -> SqRequest:
    """Per-arm estimator parameters ``(tau/(11d), rho/|C|, delta/(2|C|))``."""
    return SqRequest(
        tau / (11.0 * d), rho / n_core, max(delta / (2.0 * n_core), DELTA_FLOOR),
        SubstreamKey(Purpose.GRID_OFFSET, batch, arm), NOISE_SCALE,
    )


def reproducible_lse_from_means(support, counts, means, rho: float, delta: float, tau: float,
                                seed: SharedSeed, batch: int = 0, arm_ids=None,
                                strict: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """``V^{-1} sum_a a n_a v(a)`` with ``v(a)`` the grid-rounded mean of arm ``a``.

    ``arm_ids`` name the per-arm grid-offset substreams (default: row order).
    Returns ``(theta_sq, v)``.
    """
    C = np.atleast_2d(np.asarray(support, dtype=float))
    n = np.asarray(counts, dtype=np.int64)
    k, d = C.shape
    ids = range(k) if arm_ids is None else arm_ids
    v = np.empty(k)
    for j, (a_id, m) in enumerate(zip(ids, means)):
        req = lse_sq_request(tau, rho, delta, d, k, batch, int(a_id))
        v[j] = repro_mean_from_stats(float(m), int(n[j]), req, seed, strict)
    V = (C * n[:, None]).T @ C
    return _solve_gram(V, C.T @ (n * v)), v


def reproducible_lse(core_pulls, support, rho: float, delta: float, tau: float,
                     seed: SharedSeed, batch: int = 0, arm_ids=None, strict: bool = True) -> np.ndarray:
    """Reproducible LSE from per-arm reward lists over the core set ``support``."""
    pulls = [np.asarray(x, dtype=float) for x in core_pulls]
    if any(x.size == 0 for x in pulls):
        raise SingularDesign("every core arm needs at least one reward")
    counts = [x.size for x in pulls]
    means = [float(x.mean()) for x in pulls]
    theta, _ = reproducible_lse_from_means(support, counts, means, rho, delta, tau, seed, batch, arm_ids, strict)
    return theta


# -- policies -------------------------------------------------------------

def _span_coords(arms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates of ``arms`` in an orthonormal basis of their span."""
    _, s, vt = np.linalg.svd(arms, full_matrices=False)
    r = int(np.sum(s > RANK_TOL * max(1.0, s[0])))
    if r == 0:
        raise DegenerateArmSet("active arms are all zero")
    basis = vt[:r].T
    return arms @ basis, basis


def _design(arms: np.ndarray, shared: SharedSeed, batch: int, target_g: float | None = None) -> tuple[Design, np.ndarray]:
    coords, basis = _span_coords(arms)
    init = ky_initialize(coords, shared, batch)
    k = coords.shape[1]
    design = frank_wolfe_design(coords, init, target_g if target_g is not None else 2.0 * k)
    return design, basis


def _argmax_first(values: np.ndarray) -> int:
    return int(np.argmax(values))  # first maximum


def _check_rho(rho: float) -> None:
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")


def run_alg3(env: LinearEnvironment, T: int, rho: float, shared: SharedSeed,
             stream: RewardStream, beta: int | None = None) -> ExecutionTrace:
    """Batched elimination over a finite arm set with blow-up and random threshold.

    Batch ``i`` pulls the design multiset for accuracy ``eps_tilde_i`` at
    confidence ``1 - 1/(K T^2)``, fits least squares on that batch alone, and
    removes ``a`` when ``<a, th> + eps_tilde_i < max <., th> - eps_bar_i`` with
    ``eps_bar_i ~ Uni[eps_i/2, eps_i]`` from the shared seed.
    """
    _check_rho(rho)
    arms = env.action_set.materialize()
    if arms is None:
        raise ValueError("run_alg3 needs a finite action set")
    K, d = arms.shape
    builder = TraceBuilder()
    if K == 1:
        builder.add(0, pull_linear_many(env, arms[0], T, stream, 0))
        return builder.build(points=arms)
    if np.linalg.matrix_rank(arms, tol=RANK_TOL) < d:
        raise DegenerateArmSet("arms do not span the ambient space")
    B = max(math.ceil(math.log(T)), 2)
    q = T ** (1.0 / B)
    beta = blowup(K, rho) if beta is None else int(beta)
    log_term = math.log(K * T * T)
    delta = 1.0 / (K * T * T)
    active = np.arange(K)
    theta = None
    log = []
    r = T
    for i in range(1, B):
        eps = math.sqrt(d * log_term / q**i)
        eps_tilde = math.sqrt(d * log_term / (beta * q**i))
        if len(active) == 1:
            break
        design, basis = _design(arms[active], shared, i)
        counts = design_to_multiset(design, eps_tilde, delta)
        n_i = int(counts.sum())
        if n_i > r:
            if i == 1:
                raise HorizonTooSmall(f"first batch needs {n_i} > T={T} pulls")
            break
        chosen = active[design.indices]
        sums = np.empty(len(chosen))
        for j, (a, c) in enumerate(zip(chosen, counts)):
            x = pull_linear_many(env, arms[a], int(c), stream, int(a))
            builder.add(a, x)
            sums[j] = x.sum()
        r -= n_i
        fit = least_squares_from_stats(design.support, counts, sums)
        theta = basis @ fit.theta_hat
        eps_bar = shared.uniform(SubstreamKey(Purpose.THRESHOLD, i, 0), eps / 2.0, eps)
        values = arms[active] @ theta
        keep = ~(values + eps_tilde < values.max() - eps_bar)
        log.append({
            "batch": i, "active": len(active), "g": design.g, "converged": design.converged,
            "eps": eps, "eps_tilde": eps_tilde, "eps_bar": eps_bar, "core_size": len(chosen),
            "pulls": n_i, "theta": theta.tolist(), "eliminated": active[~keep].tolist(), "remaining": r,
        })
        active = active[keep]
    if theta is None and len(active) > 1:
        raise HorizonTooSmall("no batch fits in the horizon")
    best = int(active[0]) if theta is None else int(active[_argmax_first(arms[active] @ theta)])
    if r > 0:
        builder.add(best, pull_linear_many(env, arms[best], r, stream, best))
    return builder.build(log, arms)


def alg4_blowup_factor(d: int, T: int, rho: float) -> float:
    """Per-pull blow-up ``d^3 log d log^2 log d logloglog d log^2 T / rho^2``.

    Logs are guarded so small ``d`` keeps every factor at least 1:
    ``ln max(d, 3)``, ``ln(ln d + e)`` and ``ln(ln(ln d + e) + e)``.
    """
    l1 = math.log(max(d, 3))
    l2 = math.log(math.log(d) + math.e)
    l3 = math.log(l2 + math.e)
    return d**3 * l1 * l2**2 * l3 * math.log(T) ** 2 / rho**2


def run_alg4(env: LinearEnvironment, T: int, rho: float, shared: SharedSeed, stream: RewardStream,
             net_eta: float | None = None, even_allocation: bool = False, strict: bool = False,
             net_cap: int = NET_CAP) -> ExecutionTrace:
    """Batched elimination over a net with the reproducible LSE.

    ``net_eta`` defaults to ``1/T``. Batch ``i`` targets ``eps_i = d sqrt(ln T / q^i)``,
    spends ``ceil(M_i)`` pulls on the core set of a rebalanced design over the
    surviving net points (proportional to the weights unless
    ``even_allocation``), and removes points with
    ``<a, th> < max <., th> - 2 eps_i``. With ``strict`` the per-arm sample
    requirement of the rounding estimator is enforced; otherwise the shortfall
    is only logged.
    """
    _check_rho(rho)
    d = env.d
    eta = 1.0 / T if net_eta is None else float(net_eta)
    net = build_net(env.action_set, eta, net_cap)
    pts = net.points
    if np.linalg.matrix_rank(pts, tol=RANK_TOL) < d:
        raise DegenerateArmSet("net does not span the ambient space")
    builder = TraceBuilder()
    if len(pts) == 1:
        builder.add(0, pull_linear_many(env, pts[0], T, stream, 0))
        return builder.build(points=pts)
    B = max(math.ceil(math.log(T)), 2)
    q = T ** (1.0 / B)
    factor = alg4_blowup_factor(d, T, rho)
    rho_batch = rho / (d * B)
    delta = 1.0 / (2.0 * len(pts) * T * T)
    active = np.arange(len(pts))
    theta = None
    log = []
    r = T
    for i in range(1, B):
        if len(active) == 1:
            break
        eps = d * math.sqrt(math.log(T) / q**i)
        tau = min(eps, 1.0)
        M = math.ceil(factor * q**i - 1e-9)
        design, basis = _design(pts[active], shared, i)
        design = effective_support(design)
        design.g = g_value(design, pts[active] @ basis)
        k = len(design.weights)
        if even_allocation:
            counts = np.full(k, math.ceil(M / k))
        else:
            counts = np.ceil(design.weights * M - 1e-9).astype(np.int64)
        n_i = int(counts.sum())
        if n_i > r:
            if i == 1:
                raise HorizonTooSmall(f"first batch needs {n_i} > T={T} pulls")
            break
        chosen = active[design.indices]
        means = np.empty(k)
        for j, (a, c) in enumerate(zip(chosen, counts)):
            x = pull_linear_many(env, pts[a], int(c), stream, int(a))
            builder.add(a, x)
            means[j] = x.mean()
        r -= n_i
        theta_sub, v = reproducible_lse_from_means(
            design.support, counts, means, rho_batch, delta, tau, shared, i, chosen, strict)
        theta = basis @ theta_sub
        need = required_samples(lse_sq_request(tau, rho_batch, delta, basis.shape[1], k))
        values = pts[active] @ theta
        keep = ~(values < values.max() - 2.0 * eps)
        log.append({
            "batch": i, "active": len(active), "g": design.g, "converged": design.converged,
            "eps": eps, "eps_tilde": None, "eps_bar": None, "core_size": k, "pulls": n_i,
            "theta": theta.tolist(), "v": v.tolist(), "per_arm_required": need, "per_arm_min": int(counts.min()),
            "eliminated": int((~keep).sum()), "remaining": r,
        })
        active = active[keep]
    if theta is None and len(active) > 1:
        raise HorizonTooSmall("no batch fits in the horizon")
    best = int(active[0]) if theta is None else int(active[_argmax_first(pts[active] @ theta)])
    if r > 0:
        builder.add(best, pull_linear_many(env, pts[best], r, stream, best))
    return builder.build(log, pts)
