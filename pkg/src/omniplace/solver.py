"""Minimizers for the group-norm regularized least-squares objective.

Two independent backends are provided:

``irls``
    Majorize-minimize with iteratively reweighted ridge solves. Each group norm
    ``||v||`` is bounded by ``||v||^2 / (2a) + a / 2`` with ``a = max(||v_prev||, eps)``,
    which turns every step into one symmetric positive-definite linear system.
    The iteration is monotone on the eps-smoothed objective in which each group
    norm below ``eps`` is replaced by ``x^2 / (2 eps) + eps / 2``.

``prox_grad``
    FISTA with function-value restart on the squared loss, using the exact
    proximal map of ``lambda1 ||.||_M + lambda2 ||.||_S``. Feature blocks nest
    inside sensor blocks, so that map is feature-level block shrinkage followed
    by sensor-level block shrinkage.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ShapeError, SingularityError, ValidationError
from .model import (
    FeatureMatrix,
    Hyperparams,
    ModalityLayout,
    ScenarioLabels,
    WeightMatrix,
    group_norms,
    objective_values,
    residual,
)

BACKENDS = ("irls", "prox_grad")


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    tol: float = 1e-8
    epsilon: float = 1e-8
    backend: str = "irls"

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValidationError("max_iters must be a positive integer")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}, got {self.backend!r}")


@dataclass
class SolveResult:
    W: WeightMatrix
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _huber(x: np.ndarray, eps: float) -> np.ndarray:
    return np.where(x >= eps, x, x * x / (2 * eps) + eps / 2)


def smoothed_objective(
    layout: ModalityLayout, A: np.ndarray, B: np.ndarray, W: np.ndarray, h: Hyperparams, eps: float
) -> float:
    """Objective with every group norm (and the unsquared loss) eps-smoothed."""
    r = float(np.linalg.norm(residual(A, B, W)))
    if h.loss_variant == "squared":
        value = 0.5 * r * r
    else:
        value = float(_huber(np.array(r), eps))
    if h.lambda1:
        value += h.lambda1 * float(_huber(group_norms(W, layout.feature_slices()), eps).sum())
    if h.lambda2:
        value += h.lambda2 * float(_huber(group_norms(W, layout.sensor_slices()), eps).sum())
    return value


def _row_index(layout: ModalityLayout) -> tuple[np.ndarray, np.ndarray]:
    """Flat feature-block and sensor index of every row."""
    dims = [f.dim for s in layout.sensors for f in s.features]
    feat_of_row = np.repeat(np.arange(len(dims)), dims)
    sens_of_row = layout.sensor_of_block()[feat_of_row]
    return feat_of_row, sens_of_row


def _shrink_blocks(values: np.ndarray, slices, threshold: float) -> None:
    for rows in slices:
        block = values[rows]
        nrm = np.linalg.norm(block)
        if nrm <= threshold:
            block[...] = 0.0
        else:
            block *= 1.0 - threshold / nrm


def group_prox_values(layout: ModalityLayout, values: np.ndarray, step: float, h: Hyperparams) -> np.ndarray:
    out = np.array(values, dtype=float, copy=True)
    if h.lambda1:
        _shrink_blocks(out, layout.feature_slices(), step * h.lambda1)
    if h.lambda2:
        _shrink_blocks(out, layout.sensor_slices(), step * h.lambda2)
    return out


def group_prox(W: WeightMatrix, step: float, h: Hyperparams) -> WeightMatrix:
    """Proximal map of ``step * (lambda1 ||.||_M + lambda2 ||.||_S)``."""
    if not step > 0:
        raise ValidationError("prox step must be positive")
    return WeightMatrix(W.layout, group_prox_values(W.layout, W.values, step, h))


def smooth_gradient(A: FeatureMatrix, B: ScenarioLabels, W: WeightMatrix, h: Hyperparams) -> np.ndarray:
    """Gradient of ``0.5 ||A^T W - B||_F^2`` with respect to ``W``."""
    if h.loss_variant != "squared":
        raise ValidationError("the smooth gradient is defined for the squared loss only")
    return A.values @ residual(A.values, B.values, W.values)


def _check_inputs(A: FeatureMatrix, B: ScenarioLabels) -> None:
    if A.n_images != B.values.shape[0]:
        raise ShapeError(f"{A.n_images} feature columns but {B.values.shape[0]} label rows")


def solve(
    A: FeatureMatrix,
    B: ScenarioLabels,
    h: Hyperparams | None = None,
    cfg: SolverConfig | None = None,
) -> SolveResult:
    """Minimize the regularized objective over ``W``."""
    h = h or Hyperparams()
    cfg = cfg or SolverConfig()
    _check_inputs(A, B)
    if cfg.backend == "irls":
        values, trace, iters, conv = _irls(A.layout, A.values, B.values, h, cfg)
    else:
        if h.loss_variant != "squared":
            raise ValidationError("prox_grad backend requires the squared loss")
        values, trace, iters, conv = _fista(A.layout, A.values, B.values, h, cfg)
    return SolveResult(WeightMatrix(A.layout, values), trace, iters, conv)


class _ReweightedSystem:
    """Solves ``(A A^T + diag(d)) W = A B``.

    When there are more rows than images and ``d > 0`` the p x p system is
    never formed; the Woodbury identity gives
    ``W = D^-1 A (I + A^T D^-1 A)^-1 B`` with an n x n factorization.
    """

    def __init__(self, A: np.ndarray, B: np.ndarray):
        self.A = A
        self.B = B
        p, n = A.shape
        self.wide = p > n
        self.gram = None if self.wide else A @ A.T
        self.AB = None if self.wide else A @ B

    def solve(self, d: np.ndarray) -> np.ndarray:
        if self.wide and np.all(d > 0):
            scaled = self.A / d[:, None]
            inner = np.eye(self.A.shape[1]) + self.A.T @ scaled
            return scaled @ self._cho(inner, self.B)
        gram = self.gram if self.gram is not None else self.A @ self.A.T
        ab = self.AB if self.AB is not None else self.A @ self.B
        system = gram + np.diag(d)
        return self._cho(system, ab)

    @staticmethod
    def _cho(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        try:
            factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise SingularityError(
                "normal equations are singular; use nonzero lambda1 or lambda2"
            ) from None
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def _require_full_rank(A: np.ndarray) -> None:
    p, n = A.shape
    if p > n:
        raise SingularityError(
            f"A A^T is rank deficient ({p} rows, {n} images); use nonzero lambda1 or lambda2"
        )
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= max(p, n) * np.finfo(float).eps * sv[0]:
        raise SingularityError("A A^T is rank deficient; use nonzero lambda1 or lambda2")


def _relative_change(prev: float, cur: float) -> float:
    if prev == cur:
        return 0.0
    return abs(prev - cur) / max(abs(prev), np.finfo(float).tiny)


def _irls(layout, A, B, h, cfg):
    eps = cfg.epsilon
    system = _ReweightedSystem(A, B)
    feat_of_row, sens_of_row = _row_index(layout)
    fslices, sslices = layout.feature_slices(), layout.sensor_slices()
    p = A.shape[0]
    regularized = h.lambda1 > 0 or h.lambda2 > 0
    if not regularized:
        _require_full_rank(A)

    W = system.solve(np.full(p, h.lambda1 + h.lambda2, dtype=float))
    trace = [smoothed_objective(layout, A, B, W, h, eps)]
    if not regularized:
        # Plain least squares: the initial solve is already optimal.
        return W, trace, 0, True

    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        d = np.zeros(p)
        if h.lambda1:
            d += h.lambda1 / np.maximum(group_norms(W, fslices), eps)[feat_of_row]
        if h.lambda2:
            d += h.lambda2 / np.maximum(group_norms(W, sslices), eps)[sens_of_row]
        if h.loss_variant == "unsquared":
            d *= max(float(np.linalg.norm(A.T @ W - B)), eps)
        W = system.solve(d)
        trace.append(smoothed_objective(layout, A, B, W, h, eps))
        if _relative_change(trace[-2], trace[-1]) <= cfg.tol:
            converged = True
            break
    return W, trace, it, converged


def lipschitz_constant(A: np.ndarray) -> float:
    """Largest eigenvalue of ``A A^T``, via whichever Gram matrix is smaller."""
    gram = A.T @ A if A.shape[0] > A.shape[1] else A @ A.T
    return float(np.linalg.eigvalsh(gram)[-1])


def _fista(layout, A, B, h, cfg):
    L = lipschitz_constant(A)
    step = 1.0 / L if L > 0 else 1.0

    def f(W):
        return objective_values(layout, A, B, W, h)

    def forward_backward(Y):
        return group_prox_values(layout, Y - step * (A @ (A.T @ Y - B)), step, h)

    W = np.zeros((A.shape[0], B.shape[1]))
    Y = W
    t = 1.0
    trace = [f(W)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        W_new = forward_backward(Y)
        f_new = f(W_new)
        restarted = f_new > trace[-1]
        if restarted:
            t = 1.0
            W_new = forward_backward(W)
            f_new = f(W_new)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        Y = W_new + ((t - 1.0) / t_next) * (W_new - W)
        W, t = W_new, t_next
        trace.append(f_new)
        if not restarted and _relative_change(trace[-2], trace[-1]) <= cfg.tol:
            converged = True
            break
    return W, trace, it, converged
