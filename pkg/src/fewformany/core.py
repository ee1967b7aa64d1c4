"""Shared domain types: problems, solution sets, preferences and smoothing."""

from __future__ import annotations

import enum
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised when shapes or settings are inconsistent."""


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Problem(ABC):
    """A bundle of ``m`` differentiable objectives over ``R^n``.

    Subclasses implement :meth:`evaluate`, a batched evaluation over a whole
    solution set. The scalar accessors ``value(i, x)`` / ``gradient(i, x)``
    are derived from it. Objective indices are 0-based.

    Instances are treated as immutable once built; all arrays they hold are
    read-only so a problem can be shared across worker threads.
    """

    descriptor: str = ""

    def __init__(self, m: int, n: int, epsilon: float = 0.1, descriptor: str = ""):
        if m < 1 or n < 1:
            raise ConfigurationError(f"m and n must be positive, got m={m}, n={n}")
        self.m = int(m)
        self.n = int(n)
        self.epsilon = float(epsilon)
        self.descriptor = descriptor
        # every built-in family has lower bound 0, so z* = 0 - epsilon
        self.ideal_point = _readonly(np.full(self.m, -self.epsilon))

    @abstractmethod
    def evaluate(self, X: np.ndarray, gradients: bool = True):
        """Evaluate every objective at every solution.

        Parameters
        ----------
        X : ndarray of shape (K, n)
        gradients : bool
            Whether to also compute the gradient tensor.

        Returns
        -------
        F : ndarray of shape (m, K)
            ``F[i, k] = f_i(X[k])``.
        G : ndarray of shape (m, K, n) or None
            ``G[i, k] = grad f_i(X[k])``.
        """

    def weighted_gradient(self, X: np.ndarray, W: np.ndarray) -> np.ndarray:
        """``out[k] = sum_i W[i, k] * grad f_i(X[k])``, shape ``(K, n)``.

        Subclasses override this when the contraction is cheaper than
        materializing the full gradient tensor.
        """
        _, G = self.evaluate(X)
        return np.einsum("ik,ikn->kn", W, G)

    def _evaluate_pair(self, X, gradients):
        # A one-row product goes through gemv, which rounds differently from
        # the gemm used for K >= 2. Evaluating a duplicated pair keeps a
        # column's values independent of K, bit for bit.
        F, G = self.evaluate(np.vstack([X, X]), gradients)
        return F[:, :1].copy(), (None if G is None else G[:, :1].copy())

    def value(self, i: int, x) -> float:
        F, _ = self.evaluate(self._single(x), gradients=False)
        return float(F[i, 0])

    def gradient(self, i: int, x) -> np.ndarray:
        _, G = self.evaluate(self._single(x))
        return G[i, 0].copy()

    def _single(self, x):
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if x.shape[1] != self.n:
            raise ConfigurationError(f"expected a {self.n}-vector, got length {x.shape[1]}")
        return x

    def to_dict(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} has no serial form")

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m}, n={self.n}, {self.descriptor!r})"


class FunctionProblem(Problem):
    """Problem built from per-objective Python callables.

    ``value(i, x)`` and ``gradient(i, x)`` are called objective by objective,
    so this is meant for small hand-written problems and tests.
    """

    def __init__(
        self,
        values: Sequence[Callable[[np.ndarray], float]],
        gradients: Sequence[Callable[[np.ndarray], np.ndarray]],
        n: int,
        epsilon: float = 0.1,
        descriptor: str = "callables",
    ):
        if len(values) != len(gradients):
            raise ConfigurationError("need one gradient per objective")
        super().__init__(len(values), n, epsilon, descriptor)
        self._values = tuple(values)
        self._gradients = tuple(gradients)

    def evaluate(self, X, gradients=True):
        X = check_solutions(X, self.n)
        K = X.shape[0]
        F = np.empty((self.m, K))
        G = np.empty((self.m, K, self.n)) if gradients else None
        for i in range(self.m):
            for k in range(K):
                F[i, k] = self._values[i](X[k])
                if gradients:
                    G[i, k] = np.asarray(self._gradients[i](X[k]), dtype=float).reshape(self.n)
        return F, G


@dataclass(frozen=True)
class SolutionSet:
    """``K`` candidate solutions stored as a read-only ``(K, n)`` array."""

    solutions: np.ndarray

    def __post_init__(self):
        X = np.array(self.solutions, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise ConfigurationError(f"solutions must be a non-empty (K, n) array, got shape {X.shape}")
        X.setflags(write=False)
        object.__setattr__(self, "solutions", X)

    @property
    def K(self) -> int:
        return self.solutions.shape[0]

    @property
    def n(self) -> int:
        return self.solutions.shape[1]

    def flat(self) -> np.ndarray:
        """Solution-major flattening (solution outer, coordinate inner)."""
        return self.solutions.reshape(-1).copy()

    @classmethod
    def from_flat(cls, v, K: int) -> "SolutionSet":
        return cls(np.asarray(v, dtype=float).reshape(K, -1))


def check_solutions(X, n: int | None = None) -> np.ndarray:
    """Return ``X`` as a float ``(K, n)`` array, validating the dimension."""
    if isinstance(X, SolutionSet):
        X = X.solutions
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if n is not None and X.shape[0] == n else X[:, None]
    if X.ndim != 2:
        raise ConfigurationError(f"solutions must be 2-D, got shape {X.shape}")
    if n is not None and X.shape[1] != n:
        raise ConfigurationError(f"solution dimension {X.shape[1]} does not match problem dimension {n}")
    return X


@dataclass(frozen=True)
class ObjectiveMatrix:
    """``values[i, k] = f_i(x^(k))``; rows are objectives."""

    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 2:
            raise ConfigurationError("objective matrix must be 2-D")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


def evaluate_matrix(problem: Problem, solution_set) -> ObjectiveMatrix:
    """Evaluate all objectives on all solutions."""
    X = check_solutions(solution_set, problem.n)
    F, _ = problem.evaluate(X, gradients=False)
    if F.shape != (problem.m, X.shape[0]):
        raise ConfigurationError(f"problem returned shape {F.shape}, expected {(problem.m, X.shape[0])}")
    return ObjectiveMatrix(F)


def check_preference(lam, m: int | None = None, strict: bool = False) -> np.ndarray:
    """Validate a preference vector on the probability simplex.

    ``strict=True`` additionally requires every entry to be positive.
    """
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if m is not None and lam.shape[0] != m:
        raise ConfigurationError(f"preference has {lam.shape[0]} entries, expected {m}")
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise ConfigurationError("preference entries must be finite and nonnegative")
    if abs(lam.sum() - 1.0) > 1e-12 * max(1, lam.shape[0]):
        raise ConfigurationError(f"preference must sum to 1, sums to {lam.sum():.17g}")
    if strict and np.any(lam <= 0):
        raise ConfigurationError("preference must be strictly positive")
    return lam


def uniform_preference(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


class Schedule(str, enum.Enum):
    FIXED = "fixed"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class SmoothingConfig:
    """Smoothing parameters for the smooth max (outer) and smooth min (inner).

    ``mu_inner=None`` means every objective uses ``mu_outer``. With the
    exponential schedule every parameter is its start value times
    ``max(floor, exp(-decay_rate * t))``, so a start of 1 decays to ``floor``.

    ``mu_outer=None`` sets the outer parameter to ``mu_inner / m``. The outer
    smooth max acts on preference-weighted gaps whose size is about ``1/m``
    of the raw objective values under a uniform preference; dividing by
    ``m`` keeps the outer operator as sharp, relative to its inputs, as the
    inner one.
    """

    mu_outer: float | None = 0.1
    mu_inner: float | tuple | None = None
    schedule: Schedule = Schedule.FIXED
    decay_rate: float = 3e-3
    floor: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "schedule", Schedule(self.schedule))
        if self.mu_outer is None and self.mu_inner is None:
            raise ConfigurationError("mu_outer=None needs mu_inner")
        if self.mu_outer is not None and not self.mu_outer > 0:
            raise ConfigurationError(f"mu_outer must be positive, got {self.mu_outer}")
        if self.mu_inner is not None:
            inner = np.ravel(np.asarray(self.mu_inner, dtype=float))
            if not np.all(inner > 0):
                raise ConfigurationError("every mu_inner entry must be positive")
            inner = float(inner[0]) if inner.size == 1 and np.ndim(self.mu_inner) == 0 else tuple(inner.tolist())
            object.__setattr__(self, "mu_inner", inner)
        if self.schedule is Schedule.EXPONENTIAL and not (0 < self.floor <= 1 and self.decay_rate >= 0):
            raise ConfigurationError("exponential schedule needs 0 < floor <= 1 and decay_rate >= 0")

    @classmethod
    def adaptive(cls, start: float = 1.0, decay_rate: float = 3e-3, floor: float = 0.05, outer: float | None = None):
        """Exponential decay from ``start`` to ``start * floor``; outer defaults to ``start / m``."""
        return cls(mu_outer=outer, mu_inner=start, schedule=Schedule.EXPONENTIAL, decay_rate=decay_rate, floor=floor)

    def factor(self, t: int) -> float:
        if self.schedule is Schedule.FIXED:
            return 1.0
        return max(self.floor, math.exp(-self.decay_rate * t))

    def at(self, t: int, m: int):
        """Smoothing parameters ``(mu, mu_inner)`` at iteration ``t`` for ``m`` objectives."""
        s = self.factor(t)
        if self.mu_inner is None:
            inner = np.full(m, self.mu_outer)
        elif isinstance(self.mu_inner, float):
            inner = np.full(m, self.mu_inner)
        elif len(self.mu_inner) != m:
            raise ConfigurationError(f"mu_inner has {len(self.mu_inner)} entries, expected {m}")
        else:
            inner = np.array(self.mu_inner)
        outer = float(np.mean(inner)) / m if self.mu_outer is None else self.mu_outer
        return outer * s, inner * s


class Dominance(str, enum.Enum):
    STRICTLY_DOMINATES = "strictly_dominates"
    DOMINATES = "dominates"
    NONE = "none"


def dominates(a, b) -> Dominance:
    """Pareto relation of objective vector ``a`` to ``b`` (minimization).

    ``STRICTLY_DOMINATES`` when ``a`` is better in every entry, ``DOMINATES``
    when it is no worse everywhere and better somewhere, ``NONE`` otherwise.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ConfigurationError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if np.all(a < b):
        return Dominance.STRICTLY_DOMINATES
    if np.all(a <= b) and np.any(a < b):
        return Dominance.DOMINATES
    return Dominance.NONE
