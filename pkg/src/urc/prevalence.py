"""Estimators of the field class distribution."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    CellHistogram,
    ConfusionMatrix,
    UnlabeledPredictionSet,
    as_probability_vector,
    normalize,
    require_nonempty,
)
from .errors import InvalidConfig, RankDeficient, ShapeMismatch
from .losses import LossConfig, combined_loss_and_gradient


class Method(str, enum.Enum):
    NAIVE = "naive"
    LINEAR = "linear"
    MAP = "map"
    CC = "cc"
    ACC = "acc"
    EM = "em"


@dataclass(frozen=True)
class MapConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    max_iterations: int = 5000
    tolerance: float = 1e-10
    step_init: float = 0.1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidConfig("max_iterations must be at least 1")
        if not self.tolerance > 0:
            raise InvalidConfig("tolerance must be positive")
        if not self.step_init > 0:
            raise InvalidConfig("step_init must be positive")


@dataclass(frozen=True, eq=False)
class PrevalenceEstimate:
    p: np.ndarray
    method: Method
    final_loss: Optional[float] = None
    iterations_used: Optional[int] = None
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "p", as_probability_vector(self.p))
        object.__setattr__(self, "method", Method(self.method))


def naive_estimate(field: UnlabeledPredictionSet) -> PrevalenceEstimate:
    """Average of the predicted class probabilities."""
    require_nonempty(len(field), "field set")
    return PrevalenceEstimate(normalize(field.predictions.mean(axis=0)), Method.NAIVE)


def solve_clipped(A: np.ndarray, b: np.ndarray, method: Method) -> PrevalenceEstimate:
    """Least-squares solve of ``A @ p = b``, clipped onto the simplex.

    ``A`` is cells x classes. Raises :class:`RankDeficient` when ``A`` lacks
    full column rank; the condition number is always reported.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n_cells, n_classes = A.shape
    if b.shape != (n_cells,):
        raise ShapeMismatch(f"right-hand side of length {b.size} for {n_cells} cells")
    if n_cells < n_classes:
        raise RankDeficient(f"{n_cells} cells cannot identify {n_classes} classes", rank=n_cells)
    sv = np.linalg.svd(A, compute_uv=False)
    tol = sv.max() * max(A.shape) * np.finfo(float).eps
    rank = int((sv > tol).sum())
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if rank < n_classes:
        raise RankDeficient(f"matrix has rank {rank} < {n_classes}", rank=rank, condition_number=cond)
    raw = np.linalg.lstsq(A, b, rcond=None)[0]
    inside = bool(np.all(raw >= -1e-9) and np.all(raw <= 1 + 1e-9) and abs(raw.sum() - 1) <= 1e-9)
    p = normalize(np.clip(raw, 0.0, 1.0))
    return PrevalenceEstimate(
        p, method, converged=inside,
        diagnostics={"condition_number": cond, "rank": rank, "raw_solution": raw.tolist()},
    )


def linear_solve_estimate(m_a: ConfusionMatrix, v_a) -> PrevalenceEstimate:
    """Invert ``v = p @ M`` for ``p`` (least squares if there are more cells than classes)."""
    return solve_clipped(m_a.entries.T, np.asarray(v_a, dtype=float), Method.LINEAR)


MAX_LOGIT_STEP = 1.0


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def map_estimate(hist: CellHistogram, m_a: ConfusionMatrix, config: MapConfig) -> PrevalenceEstimate:
    """Minimize the combined loss over the simplex interior.

    The simplex is parametrized as ``softmax(z)`` with the last logit pinned to
    zero; iterations are gradient steps on ``z`` with Armijo backtracking and a
    step that doubles after every accepted move, capped so no logit moves by
    more than :data:`MAX_LOGIT_STEP` per iteration. Iteration starts at the prior.
    """
    prior = config.loss.prior
    if prior is None:
        raise InvalidConfig("MAP estimation needs config.loss.prior")
    n = m_a.n_classes
    if prior.shape != (n,):
        raise ShapeMismatch(f"prior of length {prior.size} for {n} classes")
    if np.any(prior <= 0):
        # the starting point must be interior
        start = normalize(np.maximum(prior, 1e-12))
    else:
        start = prior

    z = np.log(start) - np.log(start[-1])
    p = _softmax(z)
    value, grad = combined_loss_and_gradient(hist, m_a, p, config.loss)
    step = config.step_init
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        # chain rule through softmax: dL/dz = p * (g - <p, g>), last logit fixed
        gz = p * (grad - p @ grad)
        gz[-1] = 0.0
        g2 = float(gz @ gz)
        if g2 == 0.0:
            converged = True
            break
        gmax = float(np.abs(gz).max())
        while True:
            # cap the move in logit space so one step cannot jump into the
            # saturated corner where the gradient vanishes
            step = min(step, MAX_LOGIT_STEP / gmax)
            z_new = z - step * gz
            p_new = _softmax(z_new)
            if np.all(p_new > 0):
                v_new, g_new = combined_loss_and_gradient(hist, m_a, p_new, config.loss)
                if v_new <= value - 1e-4 * step * g2:
                    break
            step *= 0.5
            if step < 1e-300:
                v_new = None
                break
        if v_new is None:
            # no descent possible at machine precision
            converged = True
            break
        decrease = value - v_new
        z, p, value, grad = z_new, p_new, v_new, g_new
        if decrease < config.tolerance:
            converged = True
            break
        step *= 2.0
    return PrevalenceEstimate(
        normalize(p), Method.MAP, final_loss=float(value),
        iterations_used=iterations, converged=converged,
    )
