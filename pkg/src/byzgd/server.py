"""Projected gradient descent driven by filtered gradient reports."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from byzgd import analysis
from byzgd.adversaries import byzantine_report
from byzgd.core import ConstraintBox, gradient
from byzgd.filters import FilterKind, GradientReport, filter_aggregate
from byzgd.scheduler import EstimateHistory, ReportBoard, StalenessProcess, effective_report

DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    pass


class ScheduleKind(str, enum.Enum):
    DIMINISHING = "diminishing"
    CONSTANT = "constant"
    LINEAR_RATE = "linear_rate"


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``c/(t+1)``, a constant, or the rate-optimal constant of the problem."""

    kind: ScheduleKind = ScheduleKind.DIMINISHING
    c: float = 10.0
    eta: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.kind is ScheduleKind.DIMINISHING and not self.c > 0:
            raise ValueError(f"diminishing step needs c > 0, got {self.c}")
        if self.kind is ScheduleKind.CONSTANT and not (self.eta is not None and self.eta > 0):
            raise ValueError(f"constant step needs eta > 0, got {self.eta}")

    @property
    def is_monotone(self) -> bool:
        return True

    def resolve(self, problem) -> "StepSchedule":
        """Replace a linear-rate schedule by the constant it stands for."""
        if self.kind is not ScheduleKind.LINEAR_RATE:
            return self
        agents = list(problem.agents)
        mu = analysis.compute_mu(agents)
        gamma = analysis.compute_gamma(agents, problem.f)
        eta, _ = analysis.theorem3_step_and_rate(problem.n, problem.f, mu, gamma)
        return StepSchedule(ScheduleKind.CONSTANT, eta=eta)

    def __call__(self, t: int) -> float:
        if self.kind is ScheduleKind.DIMINISHING:
            return self.c / (t + 1)
        if self.kind is ScheduleKind.CONSTANT:
            return self.eta
        raise ValueError("linear_rate schedule must be resolved against a problem first")


def project_box(w, box: ConstraintBox) -> np.ndarray:
    return np.minimum(box.hi, np.maximum(box.lo, np.asarray(w, dtype=np.float64)))


def step(w_t, direction, eta_t: float, box: ConstraintBox) -> np.ndarray:
    if not eta_t > 0:
        raise ValueError(f"step size must be positive, got {eta_t}")
    direction = np.asarray(direction, dtype=np.float64)
    if not np.all(np.isfinite(direction)):
        raise DivergenceError("update direction is not finite")
    return project_box(np.asarray(w_t, dtype=np.float64) - eta_t * direction, box)


@dataclass
class Trace:
    """Per-iteration record of a run; row ``t`` holds ``w^t`` and the direction used to leave it."""

    d: int
    n: int
    w: list = field(default_factory=list)
    error: list = field(default_factory=list)
    kept: list = field(default_factory=list)
    rescaled: list = field(default_factory=list)
    direction_norm: list = field(default_factory=list)
    staleness: list = field(default_factory=list)
    crashed: list = field(default_factory=list)
    byzantine_ids: tuple = ()
    status: str = "ok"
    message: str = ""

    def __len__(self) -> int:
        return len(self.w)

    @property
    def estimates(self) -> np.ndarray:
        return np.asarray(self.w).reshape(-1, self.d)

    @property
    def errors(self) -> np.ndarray:
        return np.asarray(self.error, dtype=np.float64)

    @property
    def staleness_matrix(self) -> np.ndarray:
        return np.asarray(self.staleness, dtype=np.int64).reshape(-1, self.n)

    @property
    def final_error(self) -> float:
        return float(self.error[-1])

    @property
    def diverged(self) -> bool:
        return self.status != "ok"


class Server:
    """The update rule. It only ever sees reports, ``f``, the box and the step sizes."""

    def __init__(self, f: int, box: ConstraintBox, kind: FilterKind, schedule: StepSchedule):
        self.f = f
        self.box = box
        self.kind = FilterKind.parse(kind)
        self.schedule = schedule

    def direction(self, reports, crashed=()):
        """Aggregate the reports of non-crashed agents.

        A crashed agent is known faulty, so each exclusion also lowers the
        number of faults still to be tolerated.
        """
        ids = [r.agent_id for r in reports]
        local = [GradientReport(k, r.g, r.issued_at) for k, r in enumerate(reports)]
        f_eff = max(0, self.f - len(crashed))
        agg = filter_aggregate(self.kind, local, f_eff)
        return agg.direction, tuple(ids[k] for k in agg.kept), tuple(ids[k] for k in agg.rescaled)

    def update(self, w, direction, t: int) -> np.ndarray:
        return step(w, direction, self.schedule(t), self.box)


def run(config) -> Trace:
    """Simulate ``config.horizon`` iterations and return the trace.

    The run stops early with ``status == "diverged"`` when an estimate or
    direction stops being finite or the estimate norm passes 1e12.
    """
    problem = config.problem
    n, d, f = problem.n, problem.d, problem.f
    byz = tuple(sorted(config.byzantine_ids))
    byz_set = set(byz)
    server = Server(f, problem.box, config.filter, config.schedule.resolve(problem))

    delays = config.delays
    process = StalenessProcess(delays, n)
    history = EstimateHistory(delays.t_o)
    board = ReportBoard(n, d, delays.outdatedness_limit)
    rng = np.random.default_rng([config.seed, 1])
    w_star = problem.w_star

    trace = Trace(d=d, n=n, byzantine_ids=byz)
    w = np.array(config.w0, dtype=np.float64)
    history.append(w)
    for t in range(config.horizon + 1):
        s = process.advance()
        honest = []
        for a in problem.agents:
            if a.id in byz_set:
                continue
            r = effective_report(a, t, int(s[a.id]), history)
            honest.append(r)
            board.post(r)
        for i in byz:
            own = gradient(problem.agents[i], w)
            g = byzantine_report(config.adversary, t, w, w_star, honest, f, rng, own_gradient=own)
            if g is not None:
                board.post(GradientReport(i, np.asarray(g, dtype=np.float64), t))
        reports = board.collect(t)

        trace.w.append(w.copy())
        trace.error.append(float(np.linalg.norm(w - w_star)))
        trace.staleness.append(board.staleness(t))
        trace.crashed.append(tuple(sorted(board.crashed)))
        try:
            direction, kept, rescaled = server.direction(reports, board.crashed)
        except ValueError as exc:
            trace.status, trace.message = "diverged", f"t={t}: {exc}"
            trace.kept.append(())
            trace.rescaled.append(())
            trace.direction_norm.append(math.nan)
            break
        trace.kept.append(kept)
        trace.rescaled.append(rescaled)
        trace.direction_norm.append(float(np.linalg.norm(direction)))
        if t == config.horizon:
            break
        try:
            w = server.update(w, direction, t)
        except DivergenceError as exc:
            trace.status, trace.message = "diverged", f"t={t}: {exc}"
            break
        if not np.all(np.isfinite(w)) or np.linalg.norm(w) > DIVERGENCE_NORM:
            trace.status, trace.message = "diverged", f"t={t + 1}: estimate blew up"
            break
        history.append(w)
    return trace
