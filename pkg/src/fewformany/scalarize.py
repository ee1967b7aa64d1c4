"""Scalarizations of one solution or of a solution set.

Every function takes objective values, optionally the matching gradients,
a preference ``lam`` and (for Tchebycheff variants) an ideal point
``z_star``, and returns a :class:`ScalarizationOutput`. The non-smooth
variants (TCH, TCH-Set) return a subgradient selected by the smallest active
index; ``output.subgradient`` is ``True`` for them.

Shapes: ``F`` is ``(m, K)``, ``grads`` is ``(m, K, n)``. Single-solution
functions accept ``f`` of shape ``(m,)`` and ``grads`` of shape ``(m, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, ObjectiveMatrix


@dataclass(frozen=True)
class SmoothReduceResult:
    value: float
    softmax_weights: np.ndarray


@dataclass(frozen=True)
class ScalarizationOutput:
    """Value, (sub)gradients per solution and, for STCH-Set, the weights.

    ``gradients`` has shape ``(K, n)`` (``None`` if no gradients were given).
    For STCH-Set, ``weights[i, k] = lam_i * outer[i] * inner[i, k]`` so that
    ``gradients[k] = sum_i weights[i, k] * grad f_i(x^(k))``.
    """

    value: float
    gradients: np.ndarray | None = None
    weights: np.ndarray | None = None
    outer: np.ndarray | None = None
    inner: np.ndarray | None = None
    active: tuple | None = None
    subgradient: bool = False


def _check_reduce_input(values, mu):
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ConfigurationError("cannot reduce an empty vector")
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("smooth reductions need finite inputs")
    if not mu > 0:
        raise ConfigurationError(f"smoothing parameter must be positive, got {mu}")
    return v


def _lse_rows(Z):
    """Row-wise log-sum-exp and softmax, shifted by the row maximum."""
    zmax = Z.max(axis=-1, keepdims=True)
    E = np.exp(Z - zmax)
    S = E.sum(axis=-1, keepdims=True)
    return (zmax + np.log(S))[..., 0], E / S


def smooth_max(values, mu: float) -> SmoothReduceResult:
    """``mu * log(sum_i exp(v_i / mu))``, with ``max(v) <= value <= max(v) + mu log n``."""
    v = _check_reduce_input(values, mu)
    lse, w = _lse_rows(v / mu)
    return SmoothReduceResult(float(mu * lse), w)


def smooth_min(values, mu: float) -> SmoothReduceResult:
    """``-mu * log(sum_k exp(-v_k / mu))``, with ``min(v) - mu log n <= value <= min(v)``."""
    v = _check_reduce_input(values, mu)
    lse, w = _lse_rows(-v / mu)
    return SmoothReduceResult(float(-mu * lse), w)


def _prepare(F, grads, lam, z_star=None):
    if isinstance(F, ObjectiveMatrix):
        F = F.values
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
        if grads is not None:
            grads = np.asarray(grads, dtype=float)
            grads = grads[:, None, :] if grads.ndim == 2 else grads
    m, K = F.shape
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape[0] != m:
        raise ConfigurationError(f"preference has {lam.shape[0]} entries for {m} objectives")
    if z_star is not None:
        z_star = np.broadcast_to(np.asarray(z_star, dtype=float), (m,))
    if grads is not None:
        grads = np.asarray(grads, dtype=float)
        if grads.ndim != 3 or grads.shape[:2] != (m, K):
            raise ConfigurationError(f"gradients must have shape ({m}, {K}, n), got {grads.shape}")
    return F, grads, lam, z_star


def _single_column(F):
    if F.shape[1] != 1:
        raise ConfigurationError(f"single-solution scalarization got {F.shape[1]} solutions")


def ls_value_grad(f, grads, lam) -> ScalarizationOutput:
    """Linear scalarization ``sum_i lam_i f_i(x)``."""
    F, G, lam, _ = _prepare(f, grads, lam)
    _single_column(F)
    value = float(lam @ F[:, 0])
    g = None if G is None else (lam @ G[:, 0, :])[None, :]
    return ScalarizationOutput(value, g)


def tch_value_subgrad(f, grads, lam, z_star) -> ScalarizationOutput:
    """Tchebycheff ``max_i lam_i (f_i(x) - z*_i)``."""
    F, G, lam, z = _prepare(f, grads, lam, z_star)
    _single_column(F)
    terms = lam * (F[:, 0] - z)
    j = int(np.argmax(terms))  # argmax returns the first maximal index
    g = None if G is None else (lam[j] * G[j, 0])[None, :]
    return ScalarizationOutput(float(terms[j]), g, active=(j, 0), subgradient=True)


def stch_value_grad(f, grads, lam, z_star, mu: float) -> ScalarizationOutput:
    """Smooth Tchebycheff ``mu log sum_i exp(lam_i (f_i - z*_i) / mu)``."""
    F, G, lam, z = _prepare(f, grads, lam, z_star)
    _single_column(F)
    if not mu > 0:
        raise ConfigurationError(f"mu must be positive, got {mu}")
    lse, omega = _lse_rows(lam * (F[:, 0] - z) / mu)
    g = None if G is None else ((omega * lam) @ G[:, 0, :])[None, :]
    return ScalarizationOutput(float(mu * lse), g, outer=omega)


def tch_set_value_subgrad(F, grads, lam, z_star) -> ScalarizationOutput:
    """TCH-Set ``max_i lam_i (min_k F[i, k] - z*_i)``.

    The subgradient is nonzero only on the solution ``k*`` covering the
    active objective ``i*``.
    """
    F, G, lam, z = _prepare(F, grads, lam, z_star)
    k_best = np.argmin(F, axis=1)
    best = F[np.arange(F.shape[0]), k_best]
    terms = lam * (best - z)
    i_star = int(np.argmax(terms))
    k_star = int(k_best[i_star])
    g = None
    if G is not None:
        g = np.zeros((F.shape[1], G.shape[2]))
        g[k_star] = lam[i_star] * G[i_star, k_star]
    return ScalarizationOutput(float(terms[i_star]), g, active=(i_star, k_star), subgradient=True)


def stch_set_value_grad(F, grads, lam, z_star, mu: float, mu_inner=None) -> ScalarizationOutput:
    """Smooth TCH-Set value and exact gradient.

    ``mu`` smooths the max over objectives; ``mu_inner`` (scalar or length-m,
    defaults to ``mu``) smooths each objective's min over solutions. The
    preference multiplies the whole gap ``smin_k F[i, k] - z*_i``.
    """
    F, G, lam, z = _prepare(F, grads, lam, z_star)
    m, K = F.shape
    mu_i = np.broadcast_to(np.asarray(mu if mu_inner is None else mu_inner, dtype=float), (m,))
    if not mu > 0 or np.any(mu_i <= 0):
        raise ConfigurationError("all smoothing parameters must be positive")
    if not np.all(np.isfinite(F)):
        raise ConfigurationError("objective matrix contains non-finite values")

    lse_in, inner = _lse_rows(-F / mu_i[:, None])
    smin = -mu_i * lse_in
    y = lam * (smin - z)
    lse_out, outer = _lse_rows(y / mu)
    W = (lam * outer)[:, None] * inner
    g = None if G is None else np.einsum("ik,ikn->kn", W, G)
    return ScalarizationOutput(float(mu * lse_out), g, weights=W, outer=outer, inner=inner)


def sum_of_min_value(F) -> float:
    """Mean over objectives of the best value across solutions."""
    if isinstance(F, ObjectiveMatrix):
        F = F.values
    return float(np.mean(np.min(np.asarray(F, dtype=float), axis=1)))
