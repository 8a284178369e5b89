"""Norm-based robust aggregation of gradient reports.

Every rule sorts the ``n`` reports by Euclidean norm (ties broken by
ascending agent id) and keeps the ``n - f`` smallest as the filter set.
They differ in what happens to the ``f`` largest:

* ``NORM``: dropped.
* ``NORM_CAP``: rescaled down to the largest kept norm.
* ``NORMALIZE``: every nonzero report is rescaled to the largest kept norm
  (experimental; no convergence guarantee is known for it).
* ``NONE``: plain sum of everything, the unprotected baseline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class FilterKind(str, enum.Enum):
    NONE = "none"
    NORM = "norm"
    NORM_CAP = "norm_cap"
    NORMALIZE = "normalize"

    @classmethod
    def parse(cls, value) -> "FilterKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown filter {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class GradientReport:
    """Gradient ``g`` from agent ``agent_id``, computed at the estimate of iteration ``issued_at``."""

    agent_id: int
    g: np.ndarray
    issued_at: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.g))


@dataclass(frozen=True)
class Aggregate:
    """Result of one aggregation: the direction plus bookkeeping for traces."""

    direction: np.ndarray
    kept: tuple  # the filter set, in sort order
    rescaled: tuple  # ids whose reports were rescaled


class FilterError(ValueError):
    pass


def _check_reports(reports) -> None:
    ids = sorted(r.agent_id for r in reports)
    if ids != list(range(len(reports))):
        raise FilterError(f"expected one report per agent id 0..{len(reports) - 1}, got ids {ids}")
    for r in reports:
        if not np.all(np.isfinite(r.g)):
            raise FilterError(f"report from agent {r.agent_id} is not finite")


def sort_by_norm(reports) -> list[int]:
    """Agent ids ordered by non-decreasing report norm, ties by ascending id."""
    _check_reports(reports)
    return [r.agent_id for r in sorted(reports, key=lambda r: (r.norm, r.agent_id))]


def _rescale(g: np.ndarray, target: float) -> np.ndarray:
    norm = np.linalg.norm(g)
    if norm == 0.0:
        return np.zeros_like(g)
    return g * (target / norm)


def filter_aggregate(kind, reports, f: int) -> Aggregate:
    """Aggregate ``reports`` and also return the kept/rescaled ids."""
    kind = FilterKind.parse(kind)
    reports = list(reports)
    n = len(reports)
    if n == 0:
        raise FilterError("no reports to aggregate")
    if kind is not FilterKind.NONE and not 0 <= 2 * f < n:
        raise FilterError(f"A3 violated: filtering needs 0 <= f < n/2, got f={f}, n={n}")
    order = sort_by_norm(reports)
    by_id = {r.agent_id: np.asarray(r.g, dtype=np.float64) for r in reports}
    d = by_id[order[0]].shape[0]

    if kind is FilterKind.NONE:
        return Aggregate(np.sum([by_id[i] for i in range(n)], axis=0), tuple(order), ())

    kept, dropped = order[: n - f], order[n - f:]
    cap = float(np.linalg.norm(by_id[kept[-1]]))
    direction = np.zeros(d)
    if kind is FilterKind.NORMALIZE:
        for i in order:
            direction += _rescale(by_id[i], cap)
        rescaled = tuple(i for i in order if np.linalg.norm(by_id[i]) > 0.0)
        return Aggregate(direction, tuple(kept), rescaled)

    for i in kept:
        direction += by_id[i]
    if kind is FilterKind.NORM_CAP:
        for i in dropped:
            direction += _rescale(by_id[i], cap)
        return Aggregate(direction, tuple(kept), tuple(dropped))
    return Aggregate(direction, tuple(kept), ())


def aggregate(kind, reports, f: int) -> np.ndarray:
    """Robust update direction from one report per agent.

    Raises:
        FilterError: if ids are not exactly ``0..n-1``, a report is not
            finite, or ``2f >= n`` for a filtering rule.
    """
    return filter_aggregate(kind, reports, f).direction
