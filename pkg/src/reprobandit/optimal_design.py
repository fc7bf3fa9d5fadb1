"""Approximate G-optimal designs over finite arm sets.

The pipeline is: a sparse randomized initialization (two extreme arms per
random direction), Frank-Wolfe ascent on ``log det V(pi)`` until
``g(pi) = max_a a^T V(pi)^{-1} a`` falls under a target, a rebalancing step
that puts a floor on every support weight, and rounding to integer pull counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateArmSet, SingularDesign
from .shared_randomness import Purpose, SharedSeed, SubstreamKey

RANK_TOL = 1e-9
REFRESH_EVERY = 50
LSE_C1 = 8.0
SUPPORT_FLOOR_C = 0.125


@dataclass
class Design:
    """Distribution ``weights`` over the rows of ``support``.

    ``indices`` maps support rows back to the arm list the design was built on.
    """

    support: np.ndarray
    weights: np.ndarray
    indices: np.ndarray | None = None
    converged: bool = True
    g: float | None = None
    logdet_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.support = np.atleast_2d(np.asarray(self.support, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.indices is not None:
            self.indices = np.asarray(self.indices, dtype=np.int64)

    @property
    def d(self) -> int:
        return self.support.shape[1]

    @property
    def info_matrix(self) -> np.ndarray:
        return (self.support * self.weights[:, None]).T @ self.support


def _cholesky(V: np.ndarray):
    try:
        return scipy.linalg.cho_factor(V, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(f"information matrix is singular: {exc}") from None


def norms_sq(V: np.ndarray, arms: np.ndarray) -> np.ndarray:
    """``a^T V^{-1} a`` for every row ``a`` of ``arms``."""
    c, lower = _cholesky(V)
    z = scipy.linalg.solve_triangular(c, np.atleast_2d(arms).T, lower=lower)
    return np.einsum("ij,ij->j", z, z)


def g_value(design: Design, arms=None) -> float:
    """``max_a ||a||^2_{V(pi)^{-1}}`` over ``arms`` (default: the support)."""
    arms = design.support if arms is None else np.atleast_2d(np.asarray(arms, dtype=float))
    return float(np.max(norms_sq(design.info_matrix, arms)))


def _check_span(arms: np.ndarray) -> None:
    if arms.shape[0] == 0 or np.linalg.matrix_rank(arms, tol=RANK_TOL) < arms.shape[1]:
        raise DegenerateArmSet("arms do not span the ambient space")


def _merge(arms: np.ndarray, idx: list[int]) -> Design:
    uniq, inverse = np.unique(np.asarray(idx), return_inverse=True)
    weights = np.bincount(inverse, minlength=len(uniq)).astype(float) / len(idx)
    return Design(arms[uniq], weights, uniq)


def ky_initialize(arms, seed: SharedSeed, batch: int = 0) -> Design:
    """Sparse initial design: per random direction, the most and least correlated arms.

    Iteration ``j`` draws a Gaussian direction from substream
    ``(KY_DIRECTION, batch, j)``, projects it off the span of the arms chosen
    so far, and adds the arms with maximal and minimal correlation. The span
    grows by the one of the two with larger absolute correlation, so ``d``
    iterations always give a spanning support of at most ``2d`` arms with
    weight ``1/(2d)`` each (repeats merged).
    """
    arms = np.atleast_2d(np.asarray(arms, dtype=float))
    n, d = arms.shape
    _check_span(arms)
    basis = np.zeros((d, 0))
    chosen: list[int] = []
    for j in range(d):
        v = seed.normals(SubstreamKey(Purpose.KY_DIRECTION, batch, j), d)
        v = v - basis @ (basis.T @ v)
        corr = arms @ v
        hi, lo = int(np.argmax(corr)), int(np.argmin(corr))
        pick = hi if abs(corr[hi]) >= abs(corr[lo]) else lo
        w = arms[pick] - basis @ (basis.T @ arms[pick])
        norm = np.linalg.norm(w)
        if norm <= RANK_TOL:
            raise DegenerateArmSet("no arm has a component off the current span")
        basis = np.column_stack([basis, w / norm])
        chosen += [hi, lo]
    return _merge(arms, chosen)


def frank_wolfe_design(arms, init: Design, target_g: float | None = None, max_iters: int = 10_000) -> Design:
    """Frank-Wolfe on ``log det V(pi)`` from ``init`` until ``g(pi) <= target_g``.

    Step toward the arm of largest ``||a||^2_{V^{-1}}`` with the exact
    line-search size ``(g/d - 1)/(g - 1)``; ``V^{-1}`` is updated by
    Sherman-Morrison and recomputed every ``REFRESH_EVERY`` iterations.
    ``init.indices`` must refer to rows of ``arms``. On hitting
    ``max_iters`` the best iterate is returned with ``converged=False``.
    """
    arms = np.atleast_2d(np.asarray(arms, dtype=float))
    n, d = arms.shape
    target_g = 2.0 * d if target_g is None else float(target_g)
    if target_g < d:
        raise ValueError("target g below the Kiefer-Wolfowitz bound d")
    pi = np.zeros(n)
    pi[init.indices] = init.weights
    pi /= pi.sum()

    def fresh_inverse(p):
        V = (arms * p[:, None]).T @ arms
        try:
            return scipy.linalg.inv(V, check_finite=True), V
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularDesign(f"singular V at a Frank-Wolfe iterate: {exc}", iterate=p.copy()) from None

    Vinv, V = fresh_inverse(pi)
    history = [float(np.linalg.slogdet(V)[1])]
    converged = False
    for it in range(max_iters + 1):
        g_all = np.einsum("ij,jk,ik->i", arms, Vinv, arms)
        k = int(np.argmax(g_all))
        g = float(g_all[k])
        if not np.isfinite(g) or g <= 0.0:
            raise SingularDesign("non-finite norm during Frank-Wolfe", iterate=pi.copy())
        if g <= target_g:
            converged = True
            break
        if it == max_iters:
            break
        gamma = (g / d - 1.0) / (g - 1.0)
        pi *= 1.0 - gamma
        pi[k] += gamma
        if (it + 1) % REFRESH_EVERY == 0:
            Vinv, V = fresh_inverse(pi)
        else:
            u = Vinv @ arms[k]
            Vinv = (Vinv - gamma * np.outer(u, u) / (1.0 - gamma + gamma * g)) / (1.0 - gamma)
            V = (1.0 - gamma) * V + gamma * np.outer(arms[k], arms[k])
        history.append(float(np.linalg.slogdet(V)[1]))
    keep = np.flatnonzero(pi > 0.0)
    weights = pi[keep] / pi[keep].sum()
    out = Design(arms[keep], weights, keep, converged=converged, logdet_history=history)
    out.g = g_value(out, arms)
    return out


def effective_support_floor(d: int) -> float:
    """Weight floor ``C / (d ln d)`` guaranteed by :func:`effective_support` (``ln d`` read as ``ln max(d, 3)``)."""
    return SUPPORT_FLOOR_C / (d * math.log(max(d, 3)))


def mixing_weight(d: int) -> float:
    return 1.0 / (4.0 * d * math.log(max(d, 3)))


def mix_toward(design: Design, k: int, x: float) -> Design:
    """``(1 - x) pi + x * delta_k`` for support row ``k``."""
    w = (1.0 - x) * design.weights
    w[k] += x
    return Design(design.support, w, design.indices)


def effective_support(design: Design) -> Design:
    """Lift every support weight below ``x = 1/(4 d ln max(d,3))`` by mixing.

    All light arms are mixed in at once: ``(1 - k x) pi + x * sum_light delta``.
    ``V`` shrinks by at most ``1 - k x``, so ``g`` grows by at most
    ``1/(1 - k x)``; ``x`` is cut to ``1/(2k)`` if needed to keep that
    factor at most 2. The support is unchanged.
    """
    d = design.d
    x = mixing_weight(d)
    light = np.flatnonzero(design.weights < x)
    if light.size == 0:
        return Design(design.support, design.weights.copy(), design.indices, design.converged)
    x = min(x, 1.0 / (2.0 * light.size))
    w = (1.0 - light.size * x) * design.weights
    w[light] += x
    return Design(design.support, w / w.sum(), design.indices, design.converged)


def allocate_counts(weights, total: int) -> np.ndarray:
    """``ceil(pi(a) * total)`` per support arm."""
    w = np.asarray(weights, dtype=float)
    return np.ceil(w * total - 1e-9).astype(np.int64)


def multiset_size(d: int, epsilon: float, delta: float, c1: float = LSE_C1) -> int:
    """``N = ceil(C1 * d * ln(1/delta) / epsilon^2)``."""
    return math.ceil(c1 * d * math.log(1.0 / delta) / epsilon**2 - 1e-9)


def design_to_multiset(design: Design, epsilon: float, delta: float, c1: float = LSE_C1) -> np.ndarray:
    """Pull counts per support arm for accuracy ``epsilon`` at confidence ``1 - delta``."""
    if not (0.0 < epsilon and 0.0 < delta < 1.0):
        raise ValueError("need epsilon > 0 and delta in (0, 1)")
    if np.any(design.weights <= 0.0):
        raise ValueError("design weights must be positive")
    return allocate_counts(design.weights, multiset_size(design.d, epsilon, delta, c1))


def core_set_bound(d: int, c2: float) -> float:
    """``C2 * d * ln(ln d + e) + 2d``."""
    return c2 * d * math.log(math.log(d) + math.e) + 2 * d
