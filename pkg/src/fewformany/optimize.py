"""Gradient-descent drivers for set scalarizations and the baselines.

* :func:`run_set_descent` runs plain (sub)gradient descent on TCH-Set or
  STCH-Set over all ``K`` solutions jointly.
* :func:`run_baseline_scalarization` solves ``K`` independent
  single-solution LS/TCH/STCH problems with random preferences.
* :func:`som_init` and :func:`som_optimize` implement the sum-of-minimum
  baseline (k-means++ style seeding, then Lloyd-style alternation).
"""

from __future__ import annotations

import csv
import enum
import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import scalarize
from .core import ConfigurationError, Problem, SmoothingConfig, SolutionSet, check_solutions


class Method(str, enum.Enum):
    LS = "LS"
    TCH = "TCH"
    STCH = "STCH"
    TCH_SET = "TCH-Set"
    STCH_SET = "STCH-Set"
    SOM = "SoM"


SET_METHODS = (Method.TCH_SET, Method.STCH_SET)
BASELINE_METHODS = (Method.LS, Method.TCH, Method.STCH)


class DivergenceError(RuntimeError):
    """A descent produced a non-finite value; usually the step size is too large."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings shared by every driver.

    ``step_schedule="decay"`` uses ``step_size / sqrt(t)`` at iteration ``t``.
    ``preference_concentration`` is the Dirichlet concentration for the
    baselines' random preferences. ``som_*`` fields size the SoM inner loops.
    """

    method: Method = Method.STCH_SET
    iterations: int = 10000
    step_size: float = 1e-2
    step_schedule: str = "constant"
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig.adaptive)
    seed: int = 0
    checkpoint_every: int = 100
    preference: tuple | None = None
    preference_concentration: float = 1.0
    som_init_steps: int = 200
    som_update_steps: int = 50
    som_rounds: int = 20

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.iterations < 1:
            raise ConfigurationError(f"iterations must be >= 1, got {self.iterations}")
        if not self.step_size > 0:
            raise ConfigurationError(f"step_size must be positive, got {self.step_size}")
        if self.step_schedule not in ("constant", "decay"):
            raise ConfigurationError(f"step_schedule must be 'constant' or 'decay', got {self.step_schedule!r}")
        if self.checkpoint_every < 1:
            raise ConfigurationError("checkpoint_every must be >= 1")

    def step(self, t: int) -> float:
        if self.step_schedule == "decay":
            return self.step_size / math.sqrt(t)
        return self.step_size

    def with_(self, **changes) -> "OptimizerConfig":
        return replace(self, **changes)


@dataclass
class Trace:
    iteration: list = field(default_factory=list)
    value: list = field(default_factory=list)
    worst: list = field(default_factory=list)
    average: list = field(default_factory=list)

    def record(self, t, value, F):
        best = F.min(axis=1)
        self.iteration.append(int(t))
        self.value.append(float(value))
        self.worst.append(float(best.max()))
        self.average.append(float(best.mean()))

    def __len__(self):
        return len(self.iteration)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "value", "worst", "average"])
            for row in zip(self.iteration, self.value, self.worst, self.average):
                w.writerow([row[0]] + [f"{v:.6e}" for v in row[1:]])


def _quiet_overflow(fn):
    """Silence NumPy overflow warnings; the drivers check finiteness themselves."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore"):
            return fn(*args, **kwargs)

    return wrapper


def child_seed(seed, *path) -> np.random.SeedSequence:
    """Deterministic child of ``seed`` addressed by ``path`` (unlike the stateful ``spawn``)."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(path))


def seed_streams(seed: int):
    """Split a master seed into (problem, init, preference) seed sequences."""
    return child_seed(seed, 0), child_seed(seed, 1), child_seed(seed, 2)


def initial_solutions(n: int, K: int, seed) -> SolutionSet:
    """Standard-normal starting set; equal seeds give equal sets."""
    return SolutionSet(np.random.default_rng(seed).standard_normal((K, n)))


def _as_start(problem, init, seed):
    if isinstance(init, (int, np.integer)):
        init = initial_solutions(problem.n, int(init), seed_streams(seed)[1])
    return check_solutions(init, problem.n).copy()


def _check_finite(value, X, method, t):
    if not (np.isfinite(value) and np.all(np.isfinite(X))):
        raise DivergenceError(f"{method.value}: non-finite iterate at iteration {t}; reduce the step size")


def _preference(problem, config):
    if config.preference is None:
        return np.full(problem.m, 1.0 / problem.m)
    lam = np.asarray(config.preference, dtype=float)
    if lam.shape != (problem.m,):
        raise ConfigurationError(f"preference needs {problem.m} entries")
    return lam


def set_objective(problem, X, config, t=0, lam=None, gradients=True):
    """Configured set scalarization at ``X`` (iteration ``t``).

    Returns ``(output, F)``. Gradients are contracted through
    :meth:`Problem.weighted_gradient` rather than the full gradient tensor.
    """
    lam = _preference(problem, config) if lam is None else lam
    F, _ = problem.evaluate(X, gradients=False)
    if not np.all(np.isfinite(F)):
        raise DivergenceError(f"{config.method.value}: non-finite objective at iteration {t}; reduce the step size")
    if config.method is Method.TCH_SET:
        out = scalarize.tch_set_value_subgrad(F, None, lam, problem.ideal_point)
        W = np.zeros_like(F)
        i, k = out.active
        W[i, k] = lam[i]
    elif config.method is Method.STCH_SET:
        mu, mu_inner = config.smoothing.at(t, problem.m)
        out = scalarize.stch_set_value_grad(F, None, lam, problem.ideal_point, mu, mu_inner)
        W = out.weights
    else:
        raise ConfigurationError(f"{config.method.value} is not a set scalarization")
    if gradients:
        out = replace(out, gradients=problem.weighted_gradient(X, W))
    return out, F


@_quiet_overflow
def run_set_descent(problem: Problem, config: OptimizerConfig, init) -> tuple[SolutionSet, Trace]:
    """Optimize TCH-Set or STCH-Set by gradient descent.

    ``init`` is a starting :class:`SolutionSet` (or array) or an integer
    ``K``, in which case the start is drawn from the config seed's init
    stream. Step ``t`` uses the smoothing of iteration ``t - 1``, where the
    gradient is taken.
    """
    if config.method not in SET_METHODS:
        raise ConfigurationError(f"run_set_descent needs TCH-Set or STCH-Set, got {config.method.value}")
    X = _as_start(problem, init, config.seed)
    lam = _preference(problem, config)
    trace = Trace()
    for t in range(1, config.iterations + 1):
        out, F = set_objective(problem, X, config, t - 1, lam)
        _check_finite(out.value, X, config.method, t - 1)
        if (t - 1) % config.checkpoint_every == 0:
            trace.record(t - 1, out.value, F)
        X -= config.step(t) * out.gradients
    out, F = set_objective(problem, X, config, config.iterations, lam, gradients=False)
    _check_finite(out.value, X, config.method, config.iterations)
    trace.record(config.iterations, out.value, F)
    return SolutionSet(X), trace


def slot_preferences(m: int, K: int, concentration: float, seed) -> np.ndarray:
    """One Dirichlet preference per slot, each from its own child seed.

    Slot ``k``'s preference depends only on ``(seed, k)``, not on ``K``.
    """
    from .problems import sample_preferences

    return np.stack([sample_preferences(m, 1, concentration, child_seed(seed, k))[0] for k in range(K)], axis=1)


def _batched_single(method, F, Lam, z, mu):
    """Independent per-column scalarizations; column ``k`` uses ``Lam[:, k]``."""
    m, K = F.shape
    if method is Method.LS:
        values = np.einsum("ik,ik->k", Lam, F)
        W = Lam
    elif method is Method.TCH:
        terms = Lam * (F - z[:, None])
        j = np.argmax(terms, axis=0)
        values = terms[j, np.arange(K)]
        W = np.zeros_like(F)
        W[j, np.arange(K)] = Lam[j, np.arange(K)]
    else:
        Z = Lam * (F - z[:, None]) / mu
        zmax = Z.max(axis=0)
        E = np.exp(Z - zmax)
        S = E.sum(axis=0)
        values = mu * (zmax + np.log(S))
        W = Lam * E / S
    return values, W


@_quiet_overflow
def run_baseline_scalarization(problem: Problem, config: OptimizerConfig, K) -> tuple[SolutionSet, Trace]:
    """Solve ``K`` independent LS/TCH/STCH problems with random preferences.

    ``K`` may also be a starting solution set. Preferences come from the
    config seed's preference stream, split per slot. The trace's value is
    the mean of the ``K`` scalarized values.
    """
    if config.method not in BASELINE_METHODS:
        raise ConfigurationError(f"baseline must be LS, TCH or STCH, got {config.method.value}")
    X = _as_start(problem, K, config.seed)
    K = X.shape[0]
    if config.preference is not None:
        Lam = np.repeat(_preference(problem, config)[:, None], K, axis=1)
    else:
        Lam = slot_preferences(problem.m, K, config.preference_concentration, seed_streams(config.seed)[2])
    z = problem.ideal_point
    trace = Trace()
    for t in range(1, config.iterations + 1):
        mu, _ = config.smoothing.at(t - 1, problem.m)
        F, _ = problem.evaluate(X, gradients=False)
        values, W = _batched_single(config.method, F, Lam, z, mu)
        value = float(values.mean())
        _check_finite(value, X, config.method, t - 1)
        if (t - 1) % config.checkpoint_every == 0:
            trace.record(t - 1, value, F)
        X -= config.step(t) * problem.weighted_gradient(X, W)
    mu, _ = config.smoothing.at(config.iterations, problem.m)
    F, _ = problem.evaluate(X, gradients=False)
    values, _ = _batched_single(config.method, F, Lam, z, mu)
    _check_finite(float(values.mean()), X, config.method, config.iterations)
    trace.record(config.iterations, values.mean(), F)
    return SolutionSet(X), trace


def _descend_groups(problem, X, members, steps, step_size, method=Method.SOM):
    """Gradient descent on each solution's group-mean objective.

    ``members`` is an ``(m, K)`` 0/1 matrix; solutions with no members stay put.
    """
    sizes = members.sum(axis=0)
    active = sizes > 0
    scale = np.where(active, 1.0 / np.maximum(sizes, 1), 0.0)
    Wt = members * scale[None, :]
    for t in range(steps):
        X -= step_size * problem.weighted_gradient(X, Wt)
        if not np.all(np.isfinite(X)):
            raise DivergenceError(f"{method.value}: non-finite iterate in inner descent step {t}; reduce the step size")
    return X


def sample_objective(losses, rng) -> int:
    """Pick an objective with probability proportional to ``losses``.

    Falls back to a uniform choice when every loss is zero.
    """
    losses = np.clip(np.asarray(losses, dtype=float), 0.0, None)
    total = losses.sum()
    if not total > 0:
        return int(rng.integers(len(losses)))
    return int(rng.choice(len(losses), p=losses / total))


@_quiet_overflow
def som_init(problem: Problem, K: int, config: OptimizerConfig, start=None) -> SolutionSet:
    """k-means++ style seeding for the sum-of-minimum baseline.

    Each new solution descends on a single objective, chosen uniformly for
    the first solution and proportionally to the current best loss after.
    ``start`` gives the starting points for the single-objective descents
    (default: the config seed's shared initial set).
    """
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    X0 = _as_start(problem, K if start is None else start, config.seed)
    rng = np.random.default_rng(child_seed(config.seed, 3))
    chosen = np.empty((0, problem.n))
    for k in range(K):
        if k == 0:
            j = int(rng.integers(problem.m))
        else:
            F, _ = problem.evaluate(chosen, gradients=False)
            j = sample_objective(F.min(axis=1), rng)
        members = np.zeros((problem.m, 1))
        members[j, 0] = 1.0
        x = _descend_groups(problem, X0[k : k + 1].copy(), members, config.som_init_steps, config.step_size)
        chosen = np.vstack([chosen, x])
    return SolutionSet(chosen)


@_quiet_overflow
def som_optimize(problem: Problem, init, config: OptimizerConfig, rounds: int | None = None) -> tuple[SolutionSet, Trace]:
    """Lloyd-style alternation for ``(1/m) sum_i min_k f_i(x^(k))``.

    Each round assigns every objective to its best solution (smallest index
    on ties), then runs ``som_update_steps`` descent steps on each group's
    mean objective. Raises ``AssertionError`` if an assignment step ever
    increases the assigned cost.
    """
    rounds = config.som_rounds if rounds is None else rounds
    if rounds < 1:
        raise ConfigurationError("rounds must be >= 1")
    X = check_solutions(init, problem.n).copy()
    m, K = problem.m, X.shape[0]
    trace = Trace()
    assign = None
    for r in range(rounds):
        F, _ = problem.evaluate(X, gradients=False)
        new_assign = np.argmin(F, axis=1)
        som = F[np.arange(m), new_assign].mean()
        if not np.isfinite(som):
            raise DivergenceError(f"SoM: non-finite objective in round {r}")
        if assign is not None:
            before = F[np.arange(m), assign].mean()
            assert som <= before + 1e-12 * max(1.0, abs(before)), "assignment step increased the sum-of-min objective"
        assign = new_assign
        trace.record(r, som, F)
        members = np.zeros((m, K))
        members[np.arange(m), assign] = 1.0
        X = _descend_groups(problem, X, members, config.som_update_steps, config.step_size)
    F, _ = problem.evaluate(X, gradients=False)
    trace.record(rounds, F.min(axis=1).mean(), F)
    return SolutionSet(X), trace


def run_method(problem: Problem, config: OptimizerConfig, K: int, init=None) -> tuple[SolutionSet, Trace]:
    """Dispatch on ``config.method``; ``init`` defaults to the shared seeded start."""
    start = initial_solutions(problem.n, K, seed_streams(config.seed)[1]) if init is None else init
    if config.method in SET_METHODS:
        return run_set_descent(problem, config, start)
    if config.method in BASELINE_METHODS:
        return run_baseline_scalarization(problem, config, start)
    return som_optimize(problem, som_init(problem, K, config, start), config)
