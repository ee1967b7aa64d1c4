"""Evaluation metrics, stationarity certificate and rank-sum comparison."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import ConfigurationError, ObjectiveMatrix


@dataclass
class RunRecord:
    method: str
    seed: int
    K: int
    worst: float
    average: float
    per_objective_best: np.ndarray = field(repr=False)
    wall_time: float = 0.0
    status: str = "ok"
    message: str = ""

    @classmethod
    def from_matrix(cls, method, seed, F, wall_time=0.0):
        best = per_objective_best(F)
        worst, average = worst_and_average(best)
        return cls(method, seed, np.shape(F)[1], worst, average, best, wall_time)

    @classmethod
    def failed(cls, method, seed, K, message, wall_time=0.0):
        return cls(method, seed, K, float("nan"), float("nan"), np.empty(0), wall_time, "failed", message)


def per_objective_best(F) -> np.ndarray:
    """Best value of each objective over the solution set (row minima)."""
    if isinstance(F, ObjectiveMatrix):
        F = F.values
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise ConfigurationError("expected an (m, K) objective matrix")
    return F.min(axis=1)


def worst_and_average(best) -> tuple[float, float]:
    best = np.asarray(best, dtype=float).reshape(-1)
    if best.size == 0:
        raise ConfigurationError("empty best-value vector")
    return float(best.max()), float(best.mean())


def min_norm_convex_combination(gradients, iters: int = 1000, tol: float = 1e-14):
    """Minimum-norm point in the convex hull of the given gradients.

    Away-step Frank-Wolfe with exact line search on
    ``min_{a in simplex} |sum_i a_i g_i|^2``. A near-zero residual norm
    certifies Pareto stationarity.

    Returns
    -------
    weights : ndarray of shape (m,)
    residual_norm : float
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    if iters < 1:
        raise ConfigurationError("iters must be >= 1")
    m = G.shape[0]
    M = G @ G.T
    a = np.full(m, 1.0 / m)
    for _ in range(iters):
        grad = M @ a  # half-gradient of |G^T a|^2
        s = int(np.argmin(grad))
        support = np.flatnonzero(a > 0)
        v = int(support[np.argmax(grad[support])])
        gap_fw = grad @ a - grad[s]
        gap_away = grad[v] - grad @ a
        if max(gap_fw, gap_away) <= tol:
            break
        if gap_fw >= gap_away:
            d = -a.copy()
            d[s] += 1.0
            gmax = 1.0
        else:
            d = a.copy()
            d[v] -= 1.0
            gmax = a[v] / (1.0 - a[v]) if a[v] < 1.0 else np.inf
        curv = d @ M @ d
        if curv <= 0:
            break
        gamma = min(gmax, -(grad @ d) / curv)
        if gamma <= 0:
            break
        a = a + gamma * d
        a[a < 1e-16] = 0.0
        a /= a.sum()
    return a, float(np.linalg.norm(G.T @ a))


class Outcome(str, enum.Enum):
    A_BETTER = "a_better"
    B_BETTER = "b_better"
    NO_DIFFERENCE = "no_difference"


SYMBOLS = {Outcome.A_BETTER: "+", Outcome.NO_DIFFERENCE: "=", Outcome.B_BETTER: "-"}


@dataclass(frozen=True)
class RankSumResult:
    outcome: Outcome
    p_value: float
    statistic: float
    method: str

    @property
    def symbol(self) -> str:
        """``+`` if the first sample is significantly lower, ``-`` if higher, else ``=``."""
        return SYMBOLS[self.outcome]


def wilcoxon_rank_sum(sample_a, sample_b, alpha: float = 0.05) -> RankSumResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney U) test for minimization.

    Uses the exact null distribution when the smaller sample has at most 8
    values and there are no ties; otherwise the normal approximation with
    tie and continuity corrections. When significant, the sample with the
    lower median is the better one; equal medians report no difference.
    """
    a = np.asarray(sample_a, dtype=float).reshape(-1)
    b = np.asarray(sample_b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ConfigurationError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return RankSumResult(Outcome.NO_DIFFERENCE, 1.0, a.size * b.size / 2.0, "degenerate")
    ties = np.unique(pooled).size < pooled.size
    method = "exact" if min(a.size, b.size) <= 8 and not ties else "asymptotic"
    res = stats.mannwhitneyu(a, b, use_continuity=True, alternative="two-sided", method=method)
    p = float(min(1.0, res.pvalue))
    outcome = Outcome.NO_DIFFERENCE
    if p < alpha:
        ma, mb = np.median(a), np.median(b)
        if ma < mb:
            outcome = Outcome.A_BETTER
        elif ma > mb:
            outcome = Outcome.B_BETTER
    return RankSumResult(outcome, p, float(res.statistic), method)


def stationarity_certificate(problem, x, weights=None, iters: int = 1000):
    """Residual of the best convex combination of objective gradients at ``x``.

    With ``weights`` (e.g. one column of the STCH-Set weight matrix) the
    residual of that normalized combination is returned instead.
    """
    _, G = problem.evaluate(np.asarray(x, dtype=float).reshape(1, -1))
    G = G[:, 0, :]
    if weights is None:
        return min_norm_convex_combination(G, iters)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return w, float(np.linalg.norm(w @ G))
