"""Constants and tolerance thresholds of a regression instance.

All quantities are computed exactly: the strong-convexity moduli ``lambda_``
and ``gamma`` are minima over every agent subset of the relevant size, so the
enumeration is guarded against combinatorial blow-up.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from byzgd.core import AgentData, ConstraintBox

MAX_SUBSETS = 200_000
RANK_TOL = 1e-9
SYMMETRY_TOL = 1e-9


class EnumerationLimitError(ValueError):
    pass


def symmetric_eigen_extremes(m) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric PSD matrix.

    Tiny negative eigenvalues from rounding (down to -1e-9) are clamped to 0.
    """
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (m + m.T))
    lo, hi = float(ev[0]), float(ev[-1])
    if -1e-9 <= lo < 0.0:
        lo = 0.0
    return lo, hi


def _subsets(count: int, size: int):
    total = math.comb(count, size)
    if total > MAX_SUBSETS:
        raise EnumerationLimitError(
            f"C({count}, {size}) = {total} subsets exceeds the limit of {MAX_SUBSETS}; "
            "raise byzgd.analysis.MAX_SUBSETS explicitly to proceed"
        )
    return itertools.combinations(range(count), size)


def _subset_size(agents, f: int, multiple: int, n: Optional[int]) -> int:
    if not agents:
        raise ValueError("need at least one honest agent")
    total = len(agents) if n is None else n
    size = total - multiple * f
    if size < 1 or size > len(agents):
        raise ValueError(
            f"subset size n-{multiple}f = {size} is not in [1, {len(agents)}]"
        )
    return size


def _min_subset_eigen(agents, size: int) -> float:
    grams = [a.gram for a in agents]
    best = math.inf
    for combo in _subsets(len(agents), size):
        g = sum(grams[k] for k in combo)
        best = min(best, symmetric_eigen_extremes(g)[0])
    return best


def compute_mu(agents: Sequence[AgentData]) -> float:
    """Maximum over agents of the largest eigenvalue of ``x_i^T x_i``."""
    if not agents:
        raise ValueError("need at least one honest agent")
    return max(symmetric_eigen_extremes(a.gram)[1] for a in agents)


def compute_lambda(agents: Sequence[AgentData], f: int, n: Optional[int] = None) -> float:
    """Normalized minimal Gram eigenvalue over agent subsets of size ``n - f``.

    ``n`` defaults to ``len(agents)``; pass the total agent count when
    ``agents`` holds only the honest ones.
    """
    size = _subset_size(agents, f, 1, n)
    return _min_subset_eigen(agents, size) / size


def compute_gamma(agents: Sequence[AgentData], f: int, n: Optional[int] = None) -> float:
    """Like :func:`compute_lambda` with subsets of size ``n - 2f``."""
    size = _subset_size(agents, f, 2, n)
    return _min_subset_eigen(agents, size) / size


def sparse_observability(agents: Sequence[AgentData], f: int, n: Optional[int] = None) -> bool:
    """True iff every stack of ``n - 2f`` agents' data has full column rank."""
    size = _subset_size(agents, f, 2, n)
    d = agents[0].d
    for combo in _subsets(len(agents), size):
        stacked = np.vstack([agents[k].x for k in combo])
        if stacked.shape[0] < d:
            return False
        if np.linalg.svd(stacked, compute_uv=False)[d - 1] <= RANK_TOL:
            return False
    return True


def thresholds(mu: float, lambda_: float, gamma: float) -> tuple[float, float, float]:
    """Upper bounds on ``f/n`` for the three convergence conditions.

    Returns ``(norm filter via lambda, norm filter via gamma, norm-cap
    filter)``. A degenerate constant (``<= 0``) yields a threshold of 0.
    """
    if not mu > 0:
        return 0.0, 0.0, 0.0
    thr_t1 = 1.0 / (1.0 + 2.0 * mu / lambda_) if lambda_ > 0 else 0.0
    if gamma > 0:
        thr_t2 = 1.0 / (2.0 + mu / gamma)
        thr_a2 = 1.0 / (2.0 + mu / gamma - gamma / mu)
    else:
        thr_t2 = thr_a2 = 0.0
    return thr_t1, thr_t2, thr_a2


def _margin(n: int, f: int, mu: float, gamma: float) -> float:
    return n * gamma - f * (2.0 * gamma + mu)


def theorem3_step_and_rate(n: int, f: int, mu: float, gamma: float) -> tuple[float, float]:
    """Constant step size and the linear contraction factor it guarantees."""
    margin = _margin(n, f, mu, gamma)
    if not (mu > 0 and margin > 0):
        raise ValueError(
            f"f/n = {f}/{n} does not satisfy f/n < 1/(2 + mu/gamma) (mu={mu}, gamma={gamma})"
        )
    scale = mu * mu * (n - f) ** 2
    eta = margin / scale
    # the clamp only guards rounding when the margin saturates
    rho = math.sqrt(max(0.0, 1.0 - 2.0 * eta * margin + scale * eta * eta))
    return eta, rho


def gradient_noise_bound(agents: Sequence[AgentData], xi: float) -> float:
    """Bound on the gradient perturbation induced by response noise of norm <= ``xi``."""
    u = max(math.sqrt(symmetric_eigen_extremes(a.x @ a.x.T)[1]) for a in agents)
    return u * xi


def noise_radius(n: int, f: int, mu: float, gamma: float, agents: Sequence[AgentData], xi: float) -> float:
    """Radius of the ball around ``w_star`` the noisy iterates eventually stay in."""
    if xi < 0:
        raise ValueError("noise bound must be non-negative")
    if not (gamma > 0 and _margin(n, f, mu, gamma) > 0):
        raise ValueError(
            f"f/n = {f}/{n} does not satisfy f/n < 1/(2 + mu/gamma) (mu={mu}, gamma={gamma})"
        )
    big_d = gradient_noise_bound(agents, xi)
    r = f / n
    return (1.0 / gamma) * ((1.0 - 2.0 * r) / (1.0 - r * (2.0 + mu / gamma))) * big_d


def su_assumption_check(agents: Sequence[AgentData], honest_ids, byz_ids) -> np.ndarray:
    """Per basis vector ``e_k``: ``sum_honest ||(I - x_i^T x_i) e_k||_1 / (|H| - |B|)``.

    A value of at least 1 in some coordinate means the trimmed-mean
    condition of Su and Shahrampour fails for these data.
    """
    honest, byz = list(honest_ids), list(byz_ids)
    if set(honest) & set(byz):
        raise ValueError("honest and Byzantine sets overlap")
    if len(honest) <= len(byz):
        raise ValueError("need more honest than Byzantine agents")
    by_id = {a.id: a for a in agents}
    d = agents[0].d
    eye = np.eye(d)
    total = np.zeros(d)
    for i in honest:
        total += np.abs(eye - by_id[i].gram).sum(axis=0)
    return total / (len(honest) - len(byz))


def box_diameter_from(box: ConstraintBox, w_star) -> float:
    """Largest distance from ``w_star`` to a point of the box."""
    w_star = np.asarray(w_star, dtype=np.float64)
    far = np.maximum(np.abs(box.lo - w_star), np.abs(box.hi - w_star))
    return float(np.linalg.norm(far))


@dataclass
class AnalysisReport:
    n: int
    f: int
    mu: float
    lambda_: float
    gamma: float
    gamma_big: float
    thr_t1: float
    thr_t2: float
    thr_a2: float
    f_over_n: float
    cond_t1: bool
    cond_t2: bool
    cond_a2: bool
    sparse_observable: bool
    su_values: list = field(default_factory=list)
    eta_star: Optional[float] = None
    rho: Optional[float] = None
    d_star: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        def mark(ok):
            return "PASS" if ok else "FAIL"

        lines = [
            f"n = {self.n}, f = {self.f}, f/n = {self.f_over_n:.4f}",
            f"mu = {self.mu:.6g}  lambda = {self.lambda_:.6g}  gamma = {self.gamma:.6g}  Gamma = {self.gamma_big:.6g}",
            f"norm filter (lambda bound)  f/n < {self.thr_t1:.4f}  {mark(self.cond_t1)}",
            f"norm filter (gamma bound)   f/n < {self.thr_t2:.4f}  {mark(self.cond_t2)}",
            f"norm-cap filter             f/n < {self.thr_a2:.4f}  {mark(self.cond_a2)}",
            f"2f-sparse observable: {self.sparse_observable}",
            "Su-Shahrampour values: " + ", ".join(f"{v:.4f}" for v in self.su_values),
        ]
        if self.eta_star is not None:
            lines.append(f"constant step eta* = {self.eta_star:.6g}, rate rho = {self.rho:.8f}")
        if self.d_star is not None:
            lines.append(f"noise radius D* = {self.d_star:.6g}")
        return "\n".join(lines)


def analyze(problem, byzantine_ids: Sequence[int] = ()) -> AnalysisReport:
    """Compute every constant for ``problem``.

    The server does not know which agents are faulty, so mu, lambda and
    gamma range over all ``n`` agents; this is conservative for any honest
    subset. ``byzantine_ids`` only feeds the Su-Shahrampour diagnostic.
    """
    agents = list(problem.agents)
    n, f = problem.n, problem.f
    mu = compute_mu(agents)
    lam = compute_lambda(agents, f)
    gam = compute_gamma(agents, f)
    thr_t1, thr_t2, thr_a2 = thresholds(mu, lam, gam)
    r = f / n
    byz = sorted(set(byzantine_ids))
    honest = [a.id for a in agents if a.id not in byz]
    su = su_assumption_check(agents, honest, byz).tolist() if len(honest) > len(byz) else []
    report = AnalysisReport(
        n=n,
        f=f,
        mu=mu,
        lambda_=lam,
        gamma=gam,
        gamma_big=box_diameter_from(problem.box, problem.w_star),
        thr_t1=thr_t1,
        thr_t2=thr_t2,
        thr_a2=thr_a2,
        f_over_n=r,
        cond_t1=r < thr_t1,
        cond_t2=r < thr_t2,
        cond_a2=r < thr_a2,
        sparse_observable=sparse_observability(agents, f),
        su_values=su,
    )
    if report.cond_t2:
        report.eta_star, report.rho = theorem3_step_and_rate(n, f, mu, gam)
        if not problem.noise.is_noiseless:
            report.d_star = noise_radius(n, f, mu, gam, agents, problem.noise.bound)
    return report
