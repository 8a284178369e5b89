"""Simulated Byzantine behaviour: omniscient, random and crashing agents."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np


@dataclass(frozen=True)
class Omniscient:
    """Points away from ``w_star`` with the largest norm that survives filtering."""


@dataclass(frozen=True)
class RandomGradient:
    scale: float = 10.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"random adversary scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class Crash:
    """Behaves honestly until ``stop_at``, then never reports again."""

    stop_at: int = 0

    def __post_init__(self):
        if self.stop_at < 0:
            raise ValueError("crash iteration must be non-negative")


AdversaryKind = Union[Omniscient, RandomGradient, Crash]


def parse_adversary(spec) -> AdversaryKind:
    """Build an adversary from a config mapping such as ``{"kind": "random", "scale": 10}``."""
    if isinstance(spec, (Omniscient, RandomGradient, Crash)):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = str(spec.pop("kind", "omniscient")).lower()
    if kind == "omniscient":
        return Omniscient(**spec)
    if kind in ("random", "random_gradient"):
        return RandomGradient(**{k: float(v) for k, v in spec.items()})
    if kind == "crash":
        return Crash(**{k: int(v) for k, v in spec.items()})
    raise ValueError(f"unknown adversary kind {kind!r}; expected omniscient, random or crash")


def adversary_to_dict(kind: AdversaryKind) -> dict:
    if isinstance(kind, Omniscient):
        return {"kind": "omniscient"}
    if isinstance(kind, RandomGradient):
        return {"kind": "random", "scale": kind.scale}
    return {"kind": "crash", "stop_at": kind.stop_at}


def byzantine_report(
    kind: AdversaryKind,
    t: int,
    w_t,
    w_star,
    honest_reports,
    f: int,
    rng: np.random.Generator,
    own_gradient: Optional[np.ndarray] = None,
) -> Optional[np.ndarray]:
    """The vector a faulty agent sends at iteration ``t``.

    Returns ``None`` when the agent sends nothing (a crashed agent). The
    crash adversary needs ``own_gradient``, the gradient it would send if
    it were honest.
    """
    w_t = np.asarray(w_t, dtype=np.float64)
    if isinstance(kind, Omniscient):
        if w_star is None:
            raise ValueError("omniscient adversary needs w_star")
        norms = sorted((float(np.linalg.norm(r.g)) for r in honest_reports), reverse=True)
        if len(norms) < f + 1:
            raise ValueError(
                f"omniscient adversary needs at least f+1={f + 1} honest reports, got {len(norms)}"
            )
        offset = w_t - np.asarray(w_star, dtype=np.float64)
        dist = np.linalg.norm(offset)
        if dist == 0.0:
            return np.zeros_like(w_t)
        return -offset / dist * norms[f]
    if isinstance(kind, RandomGradient):
        return rng.normal(0.0, kind.scale, size=w_t.shape[0])
    if isinstance(kind, Crash):
        if t >= kind.stop_at:
            return None
        if own_gradient is None:
            raise ValueError("crash adversary needs its honest gradient before stop_at")
        return np.asarray(own_gradient, dtype=np.float64)
    raise TypeError(f"not an adversary kind: {kind!r}")
