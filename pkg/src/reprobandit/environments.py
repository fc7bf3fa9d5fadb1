"""Stochastic reward processes for K-armed and linear bandits."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidAction, InvalidArm

NORM_TOL = 1e-9


class RewardStream:
    """Per-execution reward randomness.

    Each arm gets its own PCG64 generator spawned from ``seed``, so the n-th
    reward of arm ``a`` depends only on ``(seed, a, n)`` and not on how pulls
    of different arms interleave.
    """

    def __init__(self, seed: int | Sequence[int]):
        self.seed = seed
        self._gens: dict[int, np.random.Generator] = {}

    def generator(self, arm: int) -> np.random.Generator:
        gen = self._gens.get(arm)
        if gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(int(arm),))
            gen = np.random.Generator(np.random.PCG64(ss))
            self._gens[arm] = gen
        return gen


class Distribution(str, enum.Enum):
    BERNOULLI = "bernoulli"
    UNIFORM_AROUND_MEAN = "uniform_around_mean"


@dataclass(frozen=True)
class MabEnvironment:
    arm_means: tuple[float, ...]
    distribution_kind: Distribution = Distribution.BERNOULLI

    def __post_init__(self):
        means = tuple(float(m) for m in self.arm_means)
        if not means:
            raise ValueError("need at least one arm")
        if any(not (0.0 <= m <= 1.0) for m in means):
            raise ValueError("arm means must lie in [0, 1]")
        object.__setattr__(self, "arm_means", means)
        object.__setattr__(self, "distribution_kind", Distribution(self.distribution_kind))

    @property
    def K(self) -> int:
        return len(self.arm_means)

    @property
    def best_mean(self) -> float:
        return max(self.arm_means)


def pull_mab_many(env: MabEnvironment, arm: int, n: int, stream: RewardStream) -> np.ndarray:
    """``n`` independent rewards from ``arm``; values in ``[0, 1]``."""
    if not 0 <= arm < env.K:
        raise InvalidArm(f"arm {arm} not in [0, {env.K})")
    mu = env.arm_means[arm]
    u = stream.generator(arm).random(n)
    if env.distribution_kind is Distribution.BERNOULLI:
        return (u < mu).astype(float)
    half = min(mu, 1.0 - mu)
    return mu - half + 2.0 * half * u


def pull_mab(env: MabEnvironment, arm: int, stream: RewardStream) -> float:
    return float(pull_mab_many(env, arm, 1, stream)[0])


def gap_profile(env: MabEnvironment) -> tuple[list[float], float]:
    """Gaps to the best mean and the hardness ``sum_{gap>0} 1/gap``."""
    best = env.best_mean
    gaps = [best - m for m in env.arm_means]
    return gaps, sum(1.0 / g for g in gaps if g > 0)


class ActionKind(str, enum.Enum):
    FINITE = "finite"
    UNIT_BALL = "unit_ball"
    HYPERCUBE_VERTICES = "hypercube_vertices"


@dataclass(frozen=True)
class ActionSet:
    """Finite list of vectors, the unit ball, or the scaled hypercube vertices.

    Hypercube vertices are ``{-1/sqrt(d), +1/sqrt(d)}^d`` so every action has
    unit norm.
    """

    kind: ActionKind
    dim: int
    points: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ActionKind(self.kind))
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.kind is ActionKind.FINITE:
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            if pts.shape[1] != self.dim or pts.shape[0] == 0:
                raise ValueError("finite action set needs a nonempty (K, d) array")
            if np.any(np.linalg.norm(pts, axis=1) > 1.0 + NORM_TOL):
                raise InvalidAction("actions must satisfy ||a|| <= 1")
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)

    @classmethod
    def finite(cls, points) -> "ActionSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(ActionKind.FINITE, pts.shape[1], pts)

    @classmethod
    def unit_ball(cls, d: int) -> "ActionSet":
        return cls(ActionKind.UNIT_BALL, d)

    @classmethod
    def hypercube_vertices(cls, d: int) -> "ActionSet":
        return cls(ActionKind.HYPERCUBE_VERTICES, d)

    def materialize(self) -> np.ndarray | None:
        """Explicit point list for the finite kinds, ``None`` for the ball."""
        if self.kind is ActionKind.FINITE:
            return self.points
        if self.kind is ActionKind.HYPERCUBE_VERTICES:
            d = self.dim
            bits = (np.arange(2**d)[:, None] >> np.arange(d)[::-1]) & 1
            return (2.0 * bits - 1.0) / np.sqrt(d)
        return None

    def best_value(self, theta: np.ndarray) -> float:
        """``sup_a <theta, a>`` over the (possibly infinite) set."""
        if self.kind is ActionKind.UNIT_BALL:
            return float(np.linalg.norm(theta))
        return float(np.max(self.materialize() @ theta))


@dataclass(frozen=True, eq=False)
class LinearEnvironment:
    theta_star: np.ndarray
    action_set: ActionSet
    noise_sigma: float = 1.0

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float).ravel()
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)
        if theta.shape[0] != self.action_set.dim:
            raise ValueError("theta and action set dimensions differ")
        if np.linalg.norm(theta) > 1.0 + NORM_TOL:
            raise ValueError("||theta*|| must be at most 1")
        if not 0.0 <= self.noise_sigma <= 1.0:
            raise ValueError("noise_sigma must lie in [0, 1]")

    @property
    def d(self) -> int:
        return self.action_set.dim

    @property
    def best_value(self) -> float:
        return self.action_set.best_value(self.theta_star)


def _check_action(action: np.ndarray) -> np.ndarray:
    a = np.asarray(action, dtype=float).ravel()
    if np.linalg.norm(a) > 1.0 + NORM_TOL:
        raise InvalidAction(f"||a|| = {np.linalg.norm(a)} exceeds 1")
    return a


def pull_linear_many(env: LinearEnvironment, action, n: int, stream: RewardStream, arm: int = 0) -> np.ndarray:
    """``n`` rewards ``<theta*, a> + sigma * N(0, 1)``; ``arm`` indexes the reward substream."""
    a = _check_action(action)
    mean = float(a @ env.theta_star)
    if env.noise_sigma == 0.0:
        return np.full(n, mean)
    return mean + env.noise_sigma * stream.generator(arm).standard_normal(n)


def pull_linear(env: LinearEnvironment, action, stream: RewardStream, arm: int = 0) -> float:
    return float(pull_linear_many(env, action, 1, stream, arm)[0])


def sample_mean_linear(env: LinearEnvironment, action, n: int, stream: RewardStream, arm: int = 0) -> float:
    """Mean of ``n`` rewards drawn in one shot.

    Exact in distribution for Gaussian noise (the mean is N(mu, sigma^2/n)),
    which lets Monte-Carlo checks use sample sizes far beyond memory.
    """
    a = _check_action(action)
    mean = float(a @ env.theta_star)
    if env.noise_sigma == 0.0 or n == 0:
        return mean
    return mean + env.noise_sigma / np.sqrt(n) * float(stream.generator(arm).standard_normal())


# -- config files ---------------------------------------------------------

def action_set_from_dict(spec: dict) -> ActionSet:
    kind = ActionKind(spec["kind"])
    if kind is ActionKind.FINITE:
        return ActionSet.finite(spec["points"])
    return ActionSet(kind, int(spec["dim"]))


def environment_from_dict(spec: dict) -> MabEnvironment | LinearEnvironment:
    """Build an environment from ``{"kind": "mab", ...}`` or ``{"kind": "linear", ...}``."""
    kind = spec.get("kind")
    if kind == "mab":
        return MabEnvironment(tuple(spec["means"]), spec.get("distribution", "bernoulli"))
    if kind == "linear":
        return LinearEnvironment(
            np.asarray(spec["theta"], dtype=float),
            action_set_from_dict(spec["actions"]),
            float(spec.get("sigma", 1.0)),
        )
    raise ValueError(f"unknown environment kind {kind!r}")


def environment_to_dict(env: MabEnvironment | LinearEnvironment) -> dict:
    if isinstance(env, MabEnvironment):
        return {"kind": "mab", "means": list(env.arm_means), "distribution": env.distribution_kind.value}
    acts = env.action_set
    actions = {"kind": acts.kind.value}
    if acts.kind is ActionKind.FINITE:
        actions["points"] = acts.points.tolist()
    else:
        actions["dim"] = acts.dim
    return {"kind": "linear", "theta": env.theta_star.tolist(), "actions": actions, "sigma": env.noise_sigma}


def load_environment(path: str | Path) -> MabEnvironment | LinearEnvironment:
    with open(path) as fh:
        return environment_from_dict(json.load(fh))
