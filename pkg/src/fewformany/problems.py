"""Seeded benchmark problems: convex quadratics and noisy mixed regression.

All generators draw from ``numpy.random.default_rng(seed)`` (PCG64, normals
via NumPy's ziggurat sampler), so the same spec and seed rebuild the same
problem bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import ConfigurationError, Problem, check_solutions, _readonly


@dataclass(frozen=True)
class QuadraticProblemSpec:
    """Random quadratics ``scale * (B^T B + 0.1 I)`` with ``B`` of shape ``(rank, n)``.

    ``rank=n, scale=1`` gives full-rank Wishart curvatures. The defaults
    put the LS baseline at m=128, K=5 at a mean average of about 0.7 and a
    mean worst of about 4.
    """

    m: int
    n: int = 10
    seed: int = 0
    rank: int = 3
    scale: float = 0.03


@dataclass(frozen=True)
class MixedRegressionSpec:
    m: int = 1000
    d: int = 10
    K_true: int = 5
    sigma: float = 0.1
    beta: float = 0.01
    seed: int = 0
    hidden: int = 10


@dataclass(frozen=True)
class MlpParams:
    """Parameters of ``psi(a) = p^T relu(W a + q) + o``."""

    W: np.ndarray
    p: np.ndarray
    q: np.ndarray
    o: float

    @staticmethod
    def size(d_in: int, d_hidden: int) -> int:
        return d_hidden * d_in + 2 * d_hidden + 1

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.W), self.p, self.q, [self.o]])

    @classmethod
    def unflatten(cls, v, d_in: int, d_hidden: int) -> "MlpParams":
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != cls.size(d_in, d_hidden):
            raise ConfigurationError(f"expected {cls.size(d_in, d_hidden)} parameters, got {v.shape[-1]}")
        h = d_hidden
        W = v[: h * d_in].reshape(h, d_in)
        p = v[h * d_in : h * d_in + h]
        q = v[h * d_in + h : h * d_in + 2 * h]
        return cls(W, p, q, float(v[-1]))


class QuadraticProblem(Problem):
    """``f_i(x) = (x - c_i)^T A_i (x - c_i)`` with SPD ``A_i``; each minimum is 0."""

    family = "quadratic"

    def __init__(self, A, centers, epsilon=0.1, spec: QuadraticProblemSpec | None = None):
        A = _readonly(A)
        C = _readonly(centers)
        super().__init__(A.shape[0], A.shape[1], epsilon, _describe(self.family, spec))
        self.A, self.centers, self.spec = A, C, spec

    def evaluate(self, X, gradients=True):
        X = check_solutions(X, self.n)
        if X.shape[0] == 1:
            return self._evaluate_pair(X, gradients)
        D = X[None, :, :] - self.centers[:, None, :]
        AD = D @ self.A  # A_i symmetric
        F = np.sum(D * AD, axis=2)
        return F, (2.0 * AD if gradients else None)

    def weighted_gradient(self, X, W):
        X = check_solutions(X, self.n)
        AD = (X[None, :, :] - self.centers[:, None, :]) @ self.A
        return 2.0 * np.einsum("ik,ika->ka", W, AD)

    def to_dict(self):
        return _spec_dict(self.family, self.spec, self.epsilon)


class MixedLinearRegression(Problem):
    """``f_i(x) = (a_i^T x - b_i)^2 / 2 + beta |x|^2 / 2`` for each data point."""

    family = "mixed_linear"

    def __init__(self, A, b, beta=0.01, epsilon=0.1, spec=None, truth=None, labels=None):
        A, b = _readonly(A), _readonly(b)
        super().__init__(A.shape[0], A.shape[1], epsilon, _describe(self.family, spec))
        self.A, self.b, self.beta, self.spec = A, b, float(beta), spec
        self.truth = None if truth is None else _readonly(truth)
        self.labels = None if labels is None else np.asarray(labels, dtype=int)

    def evaluate(self, X, gradients=True):
        X = check_solutions(X, self.n)
        if X.shape[0] == 1:
            return self._evaluate_pair(X, gradients)
        R = self.A @ X.T - self.b[:, None]
        F = 0.5 * R**2 + 0.5 * self.beta * np.sum(X**2, axis=1)[None, :]
        if not gradients:
            return F, None
        G = R[:, :, None] * self.A[:, None, :] + self.beta * X[None, :, :]
        return F, G

    def weighted_gradient(self, X, W):
        X = check_solutions(X, self.n)
        R = self.A @ X.T - self.b[:, None]
        return (W * R).T @ self.A + self.beta * W.sum(axis=0)[:, None] * X

    def to_dict(self):
        return _spec_dict(self.family, self.spec, self.epsilon)

    def export_csv(self, path):
        _write_data_csv(path, self.A, self.b, self.labels)


class MixedNonlinearRegression(Problem):
    """Per-point squared error of a one-hidden-layer ReLU network plus ridge.

    Decision vectors are flattened :class:`MlpParams` (``W`` row-major, then
    ``p``, ``q``, ``o``). The ReLU derivative at exactly 0 is taken as 0.
    """

    family = "mixed_nonlinear"

    def __init__(self, A, b, hidden=10, beta=0.01, epsilon=0.1, spec=None, truth=None, labels=None):
        A, b = _readonly(A), _readonly(b)
        self.d_in, self.d_hidden = A.shape[1], int(hidden)
        super().__init__(A.shape[0], MlpParams.size(self.d_in, self.d_hidden), epsilon, _describe(self.family, spec))
        self.A, self.b, self.beta, self.spec = A, b, float(beta), spec
        self.truth = None if truth is None else _readonly(truth)
        self.labels = None if labels is None else np.asarray(labels, dtype=int)

    def _split(self, X):
        h, d = self.d_hidden, self.d_in
        W = X[:, : h * d].reshape(-1, h, d)
        p = X[:, h * d : h * d + h]
        q = X[:, h * d + h : h * d + 2 * h]
        o = X[:, -1]
        return W, p, q, o

    def forward(self, X):
        """Network outputs ``psi(a_i; X[k])`` as an ``(m, K)`` array plus hidden activations."""
        X = check_solutions(X, self.n)
        W, p, q, o = self._split(X)
        Z = np.einsum("khd,id->ikh", W, self.A) + q[None, :, :]
        H = np.maximum(Z, 0.0)
        return np.einsum("ikh,kh->ik", H, p) + o[None, :], Z, H

    def evaluate(self, X, gradients=True):
        X = check_solutions(X, self.n)
        psi, Z, H = self.forward(X)
        R = psi - self.b[:, None]
        F = 0.5 * R**2 + 0.5 * self.beta * np.sum(X**2, axis=1)[None, :]
        if not gradients:
            return F, None
        _, p, _, _ = self._split(X)
        m, K = R.shape
        h, d = self.d_hidden, self.d_in
        dq = (Z > 0) * p[None, :, :]  # d psi / d q, shape (m, K, h)
        G = np.empty((m, K, self.n))
        G[:, :, : h * d] = (dq[:, :, :, None] * self.A[:, None, None, :]).reshape(m, K, h * d)
        G[:, :, h * d : h * d + h] = H
        G[:, :, h * d + h : h * d + 2 * h] = dq
        G[:, :, -1] = 1.0
        G *= R[:, :, None]
        G += self.beta * X[None, :, :]
        return F, G

    def weighted_gradient(self, X, W):
        X = check_solutions(X, self.n)
        psi, Z, H = self.forward(X)
        _, p, _, _ = self._split(X)
        C = W * (psi - self.b[:, None])  # per-(i, k) residual weights
        dq = (Z > 0) * p[None, :, :]
        CQ = C[:, :, None] * dq
        h, d = self.d_hidden, self.d_in
        out = np.empty((X.shape[0], self.n))
        out[:, : h * d] = np.einsum("ikh,id->khd", CQ, self.A).reshape(-1, h * d)
        out[:, h * d : h * d + h] = np.einsum("ik,ikh->kh", C, H)
        out[:, h * d + h : h * d + 2 * h] = CQ.sum(axis=0)
        out[:, -1] = C.sum(axis=0)
        return out + self.beta * W.sum(axis=0)[:, None] * X

    def to_dict(self):
        return _spec_dict(self.family, self.spec, self.epsilon)

    def export_csv(self, path):
        _write_data_csv(path, self.A, self.b, self.labels)


def gen_quadratics(spec: QuadraticProblemSpec, epsilon: float = 0.1) -> QuadraticProblem:
    """Random strongly convex quadratics with centers ~ N(0, I).

    ``A_i = scale * (B_i^T B_i + 0.1 I)`` with standard normal ``B_i`` of
    shape ``(rank, n)``.
    """
    if spec.m < 1 or spec.n < 1 or spec.rank < 1:
        raise ConfigurationError("m, n and rank must be positive")
    if not spec.scale > 0:
        raise ConfigurationError("scale must be positive")
    rng = np.random.default_rng(spec.seed)
    B = rng.standard_normal((spec.m, spec.rank, spec.n))
    A = spec.scale * (np.einsum("iba,ibc->iac", B, B) + 0.1 * np.eye(spec.n))
    A = 0.5 * (A + np.swapaxes(A, 1, 2))
    centers = rng.standard_normal((spec.m, spec.n))
    return QuadraticProblem(A, centers, epsilon, spec)


def _mixture_data(spec: MixedRegressionSpec, rng, n_params):
    truth = rng.standard_normal((spec.K_true, n_params))
    A = rng.standard_normal((spec.m, spec.d))
    labels = rng.integers(0, spec.K_true, size=spec.m)
    noise = spec.sigma * rng.standard_normal(spec.m)
    return truth, A, labels, noise


def _check_regression(spec):
    if spec.m < 1 or spec.d < 1 or spec.K_true < 1 or spec.hidden < 1:
        raise ConfigurationError("m, d, K_true and hidden must be positive")
    if spec.sigma < 0:
        raise ConfigurationError("sigma must be nonnegative")


def gen_mixed_linear(spec: MixedRegressionSpec, epsilon: float = 0.1) -> MixedLinearRegression:
    """Data ``b_i = a_i^T xhat_{c_i} + noise_i`` from ``K_true`` Gaussian ground truths."""
    _check_regression(spec)
    rng = np.random.default_rng(spec.seed)
    truth, A, labels, noise = _mixture_data(spec, rng, spec.d)
    b = np.einsum("id,id->i", A, truth[labels]) + noise
    return MixedLinearRegression(A, b, spec.beta, epsilon, spec, truth, labels)


def gen_mixed_nonlinear(spec: MixedRegressionSpec, epsilon: float = 0.1) -> MixedNonlinearRegression:
    """Same recipe as :func:`gen_mixed_linear` with random ReLU networks as ground truths."""
    _check_regression(spec)
    rng = np.random.default_rng(spec.seed)
    size = MlpParams.size(spec.d, spec.hidden)
    truth, A, labels, noise = _mixture_data(spec, rng, size)
    ref = MixedNonlinearRegression(A, np.zeros(spec.m), spec.hidden, spec.beta)
    psi, _, _ = ref.forward(truth)
    b = psi[np.arange(spec.m), labels] + noise
    return MixedNonlinearRegression(A, b, spec.hidden, spec.beta, epsilon, spec, truth, labels)


UNIFORM = math.inf


def sample_preferences(m: int, count: int, concentration: float = 1.0, seed=None) -> list[np.ndarray]:
    """Draw ``count`` preferences from ``Dirichlet(concentration * 1_m)``.

    ``concentration=math.inf`` returns copies of the uniform vector.
    """
    if not concentration > 0:
        raise ConfigurationError(f"concentration must be positive, got {concentration}")
    if math.isinf(concentration):
        return [np.full(m, 1.0 / m) for _ in range(count)]
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.full(m, float(concentration)), size=count)
    # renormalize so the sum is 1 to within rounding
    return [row / row.sum() for row in P]


FAMILIES = {
    "quadratic": (QuadraticProblemSpec, gen_quadratics),
    "mixed_linear": (MixedRegressionSpec, gen_mixed_linear),
    "mixed_nonlinear": (MixedRegressionSpec, gen_mixed_nonlinear),
}


def make_problem(family: str, epsilon: float = 0.1, **fields) -> Problem:
    """Build a problem from its family name and spec fields."""
    try:
        spec_cls, gen = FAMILIES[family]
    except KeyError:
        raise ConfigurationError(f"unknown problem family {family!r}; expected one of {sorted(FAMILIES)}") from None
    try:
        spec = spec_cls(**fields)
    except TypeError as exc:
        raise ConfigurationError(f"bad fields for {family}: {exc}") from None
    return gen(spec, epsilon)


def problem_from_dict(d: dict) -> Problem:
    d = dict(d)
    return make_problem(d.pop("family"), d.pop("epsilon", 0.1), **d.get("spec", {}))


def _spec_dict(family, spec, epsilon):
    if spec is None:
        raise NotImplementedError("problem was not built from a spec")
    return {"family": family, "epsilon": epsilon, "spec": asdict(spec)}


def _describe(family, spec):
    if spec is None:
        return family
    return f"{family}(seed={spec.seed})"


def _write_data_csv(path, A, b, labels):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [f"a{j}" for j in range(A.shape[1])] + ["b"]
        if labels is not None:
            header.append("component")
        w.writerow(header)
        for i in range(A.shape[0]):
            row = [repr(float(v)) for v in A[i]] + [repr(float(b[i]))]
            if labels is not None:
                row.append(int(labels[i]))
            w.writerow(row)
