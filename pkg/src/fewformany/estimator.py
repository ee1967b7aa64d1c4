"""Estimator-style front end: ``FewForManyOptimizer().fit(problem)``."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, check_scalar

from .core import ConfigurationError, Problem, Schedule, SmoothingConfig, check_solutions
from .metrics import per_objective_best, worst_and_average
from .optimize import Method, OptimizerConfig, run_method


class FewForManyOptimizer(BaseEstimator):
    """Find ``n_solutions`` solutions that jointly cover a problem's objectives.

    Parameters
    ----------
    n_solutions : int
        Size ``K`` of the solution set.
    method : str
        One of ``LS``, ``TCH``, ``STCH``, ``TCH-Set``, ``STCH-Set``, ``SoM``.
    iterations, step_size, step_schedule
        Gradient-descent settings (``step_schedule`` is ``constant`` or ``decay``).
    mu : "adaptive" or float
        ``"adaptive"`` decays the smoothing from 1 to 5% of it; a number
        fixes both the outer and the inner smoothing.
    preference : array-like of shape (m,), optional
        Preference for the set methods (uniform if omitted). Baselines draw
        Dirichlet preferences with ``preference_concentration`` instead.
    random_state : int or None
        Master seed for initialization and preference sampling.

    Attributes
    ----------
    solutions_ : ndarray of shape (n_solutions, n)
    trace_ : Trace
    objective_matrix_ : ndarray of shape (m, n_solutions)
    worst_, average_ : float
    """

    def __init__(
        self,
        n_solutions: int = 5,
        method: str = "STCH-Set",
        iterations: int = 10000,
        step_size: float = 1e-2,
        step_schedule: str = "constant",
        mu="adaptive",
        preference=None,
        preference_concentration: float = 1.0,
        random_state: int | None = 0,
    ):
        self.n_solutions = n_solutions
        self.method = method
        self.iterations = iterations
        self.step_size = step_size
        self.step_schedule = step_schedule
        self.mu = mu
        self.preference = preference
        self.preference_concentration = preference_concentration
        self.random_state = random_state

    def _config(self) -> OptimizerConfig:
        check_scalar(self.n_solutions, "n_solutions", numbers.Integral, min_val=1)
        check_scalar(self.iterations, "iterations", numbers.Integral, min_val=1)
        check_scalar(self.step_size, "step_size", numbers.Real, min_val=0, include_boundaries="neither")
        try:
            method = Method(self.method)
        except ValueError:
            raise ConfigurationError(f"unknown method {self.method!r}") from None
        if isinstance(self.mu, str):
            if self.mu != "adaptive":
                raise ConfigurationError(f"mu must be 'adaptive' or a positive number, got {self.mu!r}")
            smoothing = SmoothingConfig.adaptive()
        else:
            mu = check_scalar(self.mu, "mu", numbers.Real, min_val=0, include_boundaries="neither")
            smoothing = SmoothingConfig(mu_outer=float(mu), mu_inner=float(mu), schedule=Schedule.FIXED)
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1)[0])
        elif not isinstance(seed, numbers.Integral) or seed < 0:
            raise ConfigurationError(f"random_state must be a non-negative int or None, got {seed!r}")
        pref = None if self.preference is None else tuple(np.asarray(self.preference, dtype=float))
        return OptimizerConfig(
            method=method,
            iterations=int(self.iterations),
            step_size=float(self.step_size),
            step_schedule=self.step_schedule,
            smoothing=smoothing,
            seed=int(seed),
            preference=pref,
            preference_concentration=self.preference_concentration,
        )

    @staticmethod
    def _check_problem(problem) -> Problem:
        if not isinstance(problem, Problem):
            raise ConfigurationError(f"expected a Problem, got {type(problem).__name__}")
        return problem

    def fit(self, problem, y=None, init=None):
        """Optimize the solution set; ``init`` overrides the seeded start."""
        problem = self._check_problem(problem)
        X, trace = run_method(problem, self._config(), self.n_solutions, init=init)
        self.solutions_ = np.array(X.solutions)
        self.trace_ = trace
        self.objective_matrix_ = self.transform(problem)
        self.worst_, self.average_ = worst_and_average(per_objective_best(self.objective_matrix_))
        self.n_features_in_ = problem.n
        return self

    def transform(self, problem) -> np.ndarray:
        """Objective matrix ``F[i, k] = f_i(x_k)`` of the fitted solutions."""
        check_is_fitted(self, "solutions_")
        problem = self._check_problem(problem)
        check_solutions(self.solutions_, problem.n)
        F, _ = problem.evaluate(self.solutions_, gradients=False)
        return F

    def predict(self, problem) -> np.ndarray:
        """Index of the best solution for each objective (lowest index on ties)."""
        return np.argmin(self.transform(problem), axis=1)

    def score(self, problem, y=None) -> float:
        """Negated worst metric, so larger is better."""
        return -worst_and_average(per_objective_best(self.transform(problem)))[0]
