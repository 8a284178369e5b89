"""Agents' data, quadratic regression costs and their exact gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def _as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class AgentData:
    """Data points ``x`` (shape ``(n_i, d)``) and responses ``y`` held by one agent."""

    id: int
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        y = _as_vector(self.y, "y")
        if x.ndim != 2:
            raise ValueError(f"agent {self.id}: x must be a matrix, got shape {x.shape}")
        if x.shape[0] < 1 or x.shape[0] != y.shape[0]:
            raise ValueError(
                f"agent {self.id}: x has {x.shape[0]} rows but y has length {y.shape[0]}"
            )
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def gram(self) -> np.ndarray:
        return self.x.T @ self.x


@dataclass(frozen=True)
class ConstraintBox:
    """Axis-aligned box ``[lo, hi]`` used as the feasible set."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lo, "lo")
        hi = _as_vector(self.hi, "hi")
        if lo.shape != hi.shape:
            raise ValueError("box bounds have different lengths")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box must be bounded")
        if np.any(lo > hi):
            raise ValueError("box is empty: lo > hi in some coordinate")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, d: int, half_width: float) -> "ConstraintBox":
        return cls(np.full(d, -float(half_width)), np.full(d, float(half_width)))

    @property
    def d(self) -> int:
        return self.lo.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, w) -> bool:
        w = np.asarray(w, dtype=np.float64)
        return bool(np.all(w >= self.lo) and np.all(w <= self.hi))


@dataclass(frozen=True)
class NoiseModel:
    """Bounded response noise; ``bound=None`` means noiseless responses."""

    bound: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.bound is not None and not self.bound >= 0:
            raise ValueError(f"noise bound must be non-negative, got {self.bound}")

    @property
    def is_noiseless(self) -> bool:
        return self.bound is None

    def sample(self, sizes: Sequence[int]) -> list[np.ndarray]:
        """Draw one noise vector per agent, each with Euclidean norm at most ``bound``.

        The direction is standard normal and the norm is uniform on ``[0, bound]``.
        """
        if self.bound is None:
            return [np.zeros(k) for k in sizes]
        rng = np.random.default_rng(self.seed)
        out = []
        for k in sizes:
            v = rng.standard_normal(k)
            radius = rng.uniform(0.0, self.bound)
            nv = np.linalg.norm(v)
            v = v * (radius / nv) if nv > 0 else np.zeros(k)
            # rounding can push the norm a hair over the bound
            nv = np.linalg.norm(v)
            if nv > self.bound:
                v = v * (self.bound / nv)
            out.append(v)
        return out


@dataclass(frozen=True)
class Problem:
    """A full regression instance.

    ``w_star`` is ground truth for adversaries and error metrics only; the
    server's update never sees it.
    """

    agents: tuple
    f: int
    w_star: np.ndarray
    box: ConstraintBox
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        agents = tuple(self.agents)
        if not agents:
            raise ValueError("problem needs at least one agent")
        for k, a in enumerate(agents):
            if a.id != k:
                raise ValueError(f"agent ids must be 0..n-1 in order, got {a.id} at {k}")
        d = agents[0].d
        if any(a.d != d for a in agents):
            raise ValueError("agents disagree on the dimension d")
        w_star = _as_vector(self.w_star, "w_star")
        if w_star.shape[0] != d or self.box.d != d:
            raise ValueError("w_star, box and data dimensions differ")
        n, f = len(agents), int(self.f)
        if f < 0 or 2 * f >= n:
            raise ValueError(f"A3 violated: need 0 <= f < n/2, got f={f}, n={n}")
        if not self.box.contains(w_star):
            raise ValueError("w_star lies outside the constraint box")
        w_star.setflags(write=False)
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "w_star", w_star)

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def d(self) -> int:
        return self.agents[0].d


def _check_dim(agent: AgentData, w) -> np.ndarray:
    w = _as_vector(w, "w")
    if w.shape[0] != agent.d:
        raise ValueError(f"w has length {w.shape[0]}, agent {agent.id} expects {agent.d}")
    return w


def cost(agent: AgentData, w) -> float:
    """Squared-error cost ``0.5 * ||y - x w||^2``."""
    w = _check_dim(agent, w)
    r = agent.y - agent.x @ w
    return 0.5 * float(r @ r)


def gradient(agent: AgentData, w) -> np.ndarray:
    """Gradient ``x^T (x w - y)`` of :func:`cost`."""
    w = _check_dim(agent, w)
    return agent.x.T @ (agent.x @ w - agent.y)


def synthesize_problem(x_blocks, w_star, noise: Optional[NoiseModel], f: int, box: ConstraintBox) -> Problem:
    """Build a problem whose responses are ``y_i = x_i w_star + xi_i``."""
    w_star = _as_vector(w_star, "w_star")
    noise = noise or NoiseModel()
    blocks = [np.atleast_2d(np.asarray(b, dtype=np.float64)) for b in x_blocks]
    if not blocks:
        raise ValueError("need at least one data block")
    d = blocks[0].shape[1]
    for k, b in enumerate(blocks):
        if b.ndim != 2 or b.shape[1] != d:
            raise ValueError(f"block {k} has shape {b.shape}, expected (*, {d})")
    if w_star.shape[0] != d:
        raise ValueError(f"w_star has length {w_star.shape[0]}, data has d={d}")
    xis = noise.sample([b.shape[0] for b in blocks])
    agents = tuple(AgentData(k, b, b @ w_star + xi) for k, (b, xi) in enumerate(zip(blocks, xis)))
    return Problem(agents, f, w_star, box, noise)
