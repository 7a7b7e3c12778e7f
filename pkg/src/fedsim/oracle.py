"""Ground truth the algorithms are checked against.

Nothing here calls into :mod:`fedsim.algorithms`; the fixed points are
closed-form solutions of the round maps, evaluated directly.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, OracleError
from .objectives import Objective, QuadraticObjective, check_weights, global_objective

MAX_ORACLE_ITERATIONS = 1_000_000


class OracleMethod(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    LONG_GD = "long_gd"


@dataclass(frozen=True)
class OracleResult:
    x_star: np.ndarray
    f_star: float
    method: OracleMethod
    residual: float


def optimum_quadratic(objective: QuadraticObjective, weights) -> OracleResult:
    """Solve ``(sum w_i A_i) x = sum w_i A_i b_i``."""
    w = check_weights(weights, objective.num_clients)
    H = sum(wi * c.curvature for wi, c in zip(w, objective.clients))
    rhs = sum(wi * (c.curvature @ c.center) for wi, c in zip(w, objective.clients))
    try:
        if np.linalg.eigvalsh(H)[0] <= 0:
            raise np.linalg.LinAlgError
        x = np.linalg.solve(H, rhs)
    except np.linalg.LinAlgError:
        raise ConfigurationError("sum of weighted curvatures is singular") from None
    residual = float(np.linalg.norm(objective.global_gradient(w, x)))
    return OracleResult(x, global_objective(objective, w, x), OracleMethod.CLOSED_FORM, residual)


def optimum_long_gd(objective: Objective, weights, tolerance: float = 1e-10, x0=None,
                    max_iterations: int = MAX_ORACLE_ITERATIONS) -> OracleResult:
    """Full-batch gradient descent with Armijo backtracking until ``||grad F|| <= tolerance``.

    The trial step grows by 2x after every accepted step, so the step size
    tracks the local curvature instead of staying at its most conservative value.
    """
    w = check_weights(weights, objective.num_clients)
    x = np.zeros(objective.dim) if x0 is None else np.array(x0, dtype=np.float64)
    f = global_objective(objective, w, x)
    g = objective.global_gradient(w, x)
    step = 1.0
    for _ in range(max_iterations):
        gnorm2 = float(g @ g)
        if np.sqrt(gnorm2) <= tolerance:
            return OracleResult(x, f, OracleMethod.LONG_GD, float(np.sqrt(gnorm2)))
        roundoff = 1e-14 * max(1.0, abs(f))
        while True:
            x_try = x - step * g
            f_try = global_objective(objective, w, x_try)
            if 0.5 * step * gnorm2 > roundoff:
                if f_try <= f - 0.5 * step * gnorm2:
                    g_try = objective.global_gradient(w, x_try)
                    break
            else:
                # the predicted decrease is below the loss's roundoff: judge by the gradient instead
                g_try = objective.global_gradient(w, x_try)
                if float(g_try @ g_try) < gnorm2:
                    break
            step *= 0.5
            if step < 1e-20:
                raise OracleError("line search stalled before reaching the tolerance")
        x, f, g = x_try, f_try, g_try
        step *= 2.0
    raise OracleError(f"gradient descent did not reach tolerance {tolerance} in {max_iterations} iterations")


def _check_identity_instance(centers, weights, eta, steps):
    if not 0 < eta < 1:
        raise ConfigurationError("eta must lie in (0, 1)")
    if len(centers) != len(weights) or len(steps) != len(weights):
        raise ConfigurationError("need one center, weight and step count per client")
    if any(int(k) < 1 for k in steps):
        raise ConfigurationError("step counts must be >= 1")
    return [np.atleast_1d(np.asarray(b, dtype=np.float64)) for b in centers]


def fedavg_fixed_point_quadratic(centers, weights, eta, steps) -> np.ndarray:
    """Fixed point of deterministic FedAvg on ``F_i = 1/2 ||x - b_i||^2``.

    Local GD maps ``x -> b_i + (1 - eta)^{K_i} (x - b_i)``, so the averaged
    round map is fixed at ``sum_i w_i s_i b_i / sum_i w_i s_i`` with
    ``s_i = 1 - (1 - eta)^{K_i}``.
    """
    centers = _check_identity_instance(centers, weights, eta, steps)
    s = [w * (1.0 - (1.0 - eta) ** int(k)) for w, k in zip(weights, steps)]
    return sum(si * b for si, b in zip(s, centers)) / sum(s)


def fednova_fixed_point_quadratic(centers, weights, eta, steps) -> np.ndarray:
    """Fixed point of deterministic FedNova: ``sum_i w_i c_i (x - b_i) = 0``, ``c_i = s_i / K_i``."""
    centers = _check_identity_instance(centers, weights, eta, steps)
    c = [w * (1.0 - (1.0 - eta) ** int(k)) / int(k) for w, k in zip(weights, steps)]
    return sum(ci * b for ci, b in zip(c, centers)) / sum(c)


def theorem1_bias_bound(objective: Objective, weights, steps, x_star) -> float:
    """Inconsistency scale ``sum_i w_i (K_i / K_min - 1) F_i(x_star)`` for FedAvg under step asynchronism."""
    w = check_weights(weights, objective.num_clients)
    kmin = min(int(k) for k in steps)
    return float(sum(wi * (int(k) / kmin - 1.0) * objective.loss(i, x_star)
                     for i, (wi, k) in enumerate(zip(w, steps))))


def compute_oracle(objective: Objective, weights, tolerance: float = 1e-10) -> OracleResult:
    if isinstance(objective, QuadraticObjective):
        return optimum_quadratic(objective, weights)
    if objective.strong_convexity <= 0:
        raise ConfigurationError("the gradient-descent oracle needs a strongly convex objective")
    return optimum_long_gd(objective, weights, tolerance=tolerance)
