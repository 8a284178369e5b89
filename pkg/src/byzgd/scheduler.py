"""Bounded-staleness delivery of honest gradients.

An honest agent ``i`` contributes ``gradient(w^{t - s_i(t)})`` at iteration
``t`` with ``0 <= s_i(t) <= t_o`` and ``s_i(t+1) <= s_i(t) + 1``. An agent
that has not delivered anything yet contributes the zero vector. The server
keeps the last report of every agent and may declare an agent crashed once
its newest report is older than ``outdatedness_limit`` iterations.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from byzgd.core import AgentData, gradient
from byzgd.filters import GradientReport


class DelayPattern(str, enum.Enum):
    SYNCHRONOUS = "synchronous"
    RANDOM = "random"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class DelayModel:
    t_o: int = 0
    pattern: DelayPattern = DelayPattern.SYNCHRONOUS
    delivery_prob: float = 0.7
    periods: Optional[tuple] = None
    seed: int = 0
    outdatedness_limit: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "pattern", DelayPattern(self.pattern))
        if self.t_o < 0:
            raise ValueError(f"t_o must be non-negative, got {self.t_o}")
        if not 0.0 < self.delivery_prob <= 1.0:
            raise ValueError(f"delivery probability must be in (0, 1], got {self.delivery_prob}")
        if self.pattern is DelayPattern.PERIODIC:
            if not self.periods:
                raise ValueError("periodic delays need a period per agent")
            periods = tuple(int(p) for p in self.periods)
            if any(p < 1 or p - 1 > self.t_o for p in periods):
                raise ValueError(f"every period must lie in [1, t_o + 1] = [1, {self.t_o + 1}]")
            object.__setattr__(self, "periods", periods)
        if self.outdatedness_limit is not None and self.outdatedness_limit < self.t_o:
            raise ValueError("outdatedness_limit below t_o would exclude honest agents")

    @property
    def is_synchronous(self) -> bool:
        return self.t_o == 0 or self.pattern is DelayPattern.SYNCHRONOUS


class StalenessProcess:
    """Generates ``s_i(t)`` for every agent, one iteration at a time."""

    def __init__(self, model: DelayModel, n: int):
        self.model = model
        self.n = n
        self._rng = np.random.default_rng(model.seed)
        self._prev = np.zeros(n, dtype=np.int64)
        self._t = 0
        if model.pattern is DelayPattern.PERIODIC and len(model.periods) != n:
            raise ValueError(f"got {len(model.periods)} periods for {n} agents")

    def advance(self) -> np.ndarray:
        """Staleness of every agent at the next iteration."""
        m, t = self.model, self._t
        if m.is_synchronous:
            s = np.zeros(self.n, dtype=np.int64)
        elif m.pattern is DelayPattern.PERIODIC:
            s = np.array([t % p for p in m.periods], dtype=np.int64)
        else:
            # delivery forced once staleness would exceed t_o
            draws = self._rng.random(self.n)
            grown = self._prev + 1
            late = (draws >= m.delivery_prob) & (grown <= m.t_o)
            s = np.where(late, grown, 0)
        self._prev = s
        self._t += 1
        return s


def effective_report(agent: AgentData, t: int, staleness: int, history: Mapping[int, np.ndarray]) -> GradientReport:
    """Report of an honest agent at iteration ``t`` given its staleness."""
    issued = t - int(staleness)
    if issued < 0:
        return GradientReport(agent.id, np.zeros(agent.d), issued)
    return GradientReport(agent.id, gradient(agent, history[issued]), issued)


class EstimateHistory:
    """The last ``t_o + 1`` estimates, addressable by iteration."""

    def __init__(self, t_o: int):
        self._buf: deque = deque(maxlen=t_o + 1)
        self._first = 0

    def append(self, w: np.ndarray) -> None:
        if len(self._buf) == self._buf.maxlen:
            self._first += 1
        self._buf.append(np.array(w, dtype=np.float64))

    def __getitem__(self, t: int) -> np.ndarray:
        k = t - self._first
        if k < 0 or k >= len(self._buf):
            raise KeyError(f"estimate of iteration {t} is not retained")
        return self._buf[k]

    def __contains__(self, t: int) -> bool:
        return 0 <= t - self._first < len(self._buf)


class ReportBoard:
    """Latest report of every agent, as held by the server."""

    def __init__(self, n: int, d: int, outdatedness_limit: Optional[int] = None):
        self.n = n
        self.limit = outdatedness_limit
        self._latest = {i: GradientReport(i, np.zeros(d), -1) for i in range(n)}
        self.crashed: set = set()

    def post(self, report: GradientReport) -> None:
        if report.issued_at >= self._latest[report.agent_id].issued_at:
            self._latest[report.agent_id] = report

    def collect(self, t: int) -> list:
        """Reports used at iteration ``t``; newly outdated agents are marked crashed first."""
        if self.limit is not None:
            for i, r in self._latest.items():
                if i not in self.crashed and t - r.issued_at > self.limit:
                    self.crashed.add(i)
        return [r for i, r in sorted(self._latest.items()) if i not in self.crashed]

    def staleness(self, t: int) -> np.ndarray:
        return np.array([t - self._latest[i].issued_at for i in range(self.n)], dtype=np.int64)


def check_staleness_trace(s: np.ndarray, t_o: int, agents: Sequence[int]) -> bool:
    """True if rows ``s[t]`` obey ``s <= t_o`` and ``s(t+1) <= s(t) + 1`` for ``agents``."""
    s = np.asarray(s)[:, list(agents)]
    if s.size == 0:
        return True
    if np.any(s < 0) or np.any(s > t_o):
        return False
    if s.shape[0] > 1 and np.any(s[1:] > s[:-1] + 1):
        return False
    return bool(np.all(s[0] <= 1))
