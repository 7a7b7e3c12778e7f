"""Local update rules and server aggregation for FedaGrac and the baselines.

FedaGrac clients run ``K_i`` SGD steps on a calibrated gradient

    x_{k+1} = x_k - eta * (g_k + lambda * (nu - nu_i))

where ``nu`` is the server's global reference orientation and ``nu_i`` the
client's stored local orientation; the correction ``nu - nu_i`` is frozen for
the whole round. After the models are averaged and ``K_bar`` is known, each
client transmits either its first or its averaged stochastic gradient
(selected by an :class:`OrientationPolicy`), and the new ``nu`` is the weighted
sum of those transmissions.

SCAFFOLD is not a separate code path: it is ``FedaGrac(Constant(1.0), Avg)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ConfigurationError, ProtocolError
from .heterogeneity import weighted_mean_steps
from .numeric import check_finite, weighted_sum
from .objectives import Objective


# ---------------------------------------------------------------- schedules

@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not self.value >= 0:
            raise ConfigurationError("lambda must be >= 0")


@dataclass(frozen=True)
class Piecewise:
    """``breakpoints`` is a sequence of ``(last_round, lambda)``; ``last_round=None`` means "forever"."""

    breakpoints: tuple

    def __post_init__(self):
        bps = tuple((None if r is None else int(r), float(v)) for r, v in self.breakpoints)
        if not bps or bps[-1][0] is not None:
            raise ConfigurationError("the last breakpoint must be open-ended (round None)")
        bounded = [r for r, _ in bps[:-1]]
        if any(r is None for r in bounded) or bounded != sorted(set(bounded)):
            raise ConfigurationError("breakpoint rounds must be strictly increasing")
        if any(v < 0 for _, v in bps):
            raise ConfigurationError("lambda must be >= 0")
        object.__setattr__(self, "breakpoints", bps)


CalibrationSchedule = Union[Constant, Piecewise]

#: lambda = 0.1 for rounds 1-50, 0.5 for rounds 51-150, 1.0 afterwards.
INCREASE = Piecewise(((50, 0.1), (150, 0.5), (None, 1.0)))


def lambda_at(schedule: CalibrationSchedule, round: int) -> float:
    if round < 1:
        raise ConfigurationError("rounds are numbered from 1")
    if isinstance(schedule, Constant):
        return float(schedule.value)
    for last, value in schedule.breakpoints:
        if last is None or round <= last:
            return value
    raise AssertionError("unreachable: last breakpoint is open-ended")


# ---------------------------------------------------------------- algorithm kinds

class OrientationPolicy(str, enum.Enum):
    DEFAULT = "default"  # averaged iff K_i <= K_bar, else first
    AVG = "avg"
    FIRST = "first"
    REVERSE = "reverse"  # averaged iff K_i > K_bar


class Branch(str, enum.Enum):
    AVERAGE = "average"
    FIRST = "first"


@dataclass(frozen=True)
class FedAvg:
    name = "fedavg"


@dataclass(frozen=True)
class FedNova:
    name = "fednova"


@dataclass(frozen=True)
class FedProx:
    mu_prox: float = 0.01
    name = "fedprox"

    def __post_init__(self):
        if self.mu_prox < 0:
            raise ConfigurationError("mu_prox must be >= 0")


@dataclass(frozen=True)
class FedaGrac:
    schedule: CalibrationSchedule = Constant(1.0)
    policy: OrientationPolicy = OrientationPolicy.DEFAULT
    name = "fedagrac"

    def __post_init__(self):
        object.__setattr__(self, "policy", OrientationPolicy(self.policy))


AlgorithmKind = Union[FedAvg, FedNova, FedProx, FedaGrac]


def scaffold() -> FedaGrac:
    return FedaGrac(Constant(1.0), OrientationPolicy.AVG)


def algorithm_label(kind: AlgorithmKind) -> str:
    """Display name; the SCAFFOLD configuration of FedaGrac is labelled ``scaffold``."""
    if kind == scaffold():
        return "scaffold"
    if isinstance(kind, FedaGrac) and kind.policy is not OrientationPolicy.DEFAULT:
        return f"fedagrac_{kind.policy.value}"
    return kind.name


# ---------------------------------------------------------------- client side

@dataclass(frozen=True)
class ClientReport:
    final_model: np.ndarray
    steps: int
    first_grad: np.ndarray
    avg_grad: np.ndarray
    bytes_sent: int = 0


@dataclass(frozen=True)
class CalibrationState:
    nu: np.ndarray
    nu_client: tuple


def initial_calibration(objective: Objective, weights, x1) -> CalibrationState:
    """``nu_i = grad F_i(x_1)`` on the full local data, ``nu = sum_i w_i nu_i``."""
    nu_client = tuple(objective.exact_gradient(i, x1) for i in range(objective.num_clients))
    return CalibrationState(weighted_sum(weights, nu_client), nu_client)


def _local_sgd(x_start, steps, eta, objective, client, rng, correction=None, mu_prox=0.0) -> ClientReport:
    if steps < 1:
        raise ConfigurationError("a client must run at least one local step")
    if not eta > 0:
        raise ConfigurationError("eta must be > 0")
    x_start = np.asarray(x_start, dtype=np.float64)
    x = x_start
    first = None
    gsum = np.zeros_like(x_start)
    gradient = objective.sampler(client, rng)
    for k in range(steps):
        g = gradient(x)
        if k == 0:
            first = g
        gsum += g
        direction = g
        if correction is not None:
            direction = direction + correction
        if mu_prox:
            direction = direction + mu_prox * (x - x_start)
        x = check_finite(x - eta * direction, client=client, step=k)
    return ClientReport(final_model=x, steps=int(steps), first_grad=first, avg_grad=gsum / steps)


def local_update_fedagrac(x_start, nu, nu_i, steps, eta, lam, objective, client, rng) -> ClientReport:
    if lam < 0:
        raise ConfigurationError("lambda must be >= 0")
    correction = None
    if lam != 0:
        correction = lam * (np.asarray(nu) - np.asarray(nu_i))
    return _local_sgd(x_start, steps, eta, objective, client, rng, correction=correction)


def local_update_fedavg(x_start, steps, eta, objective, client, rng) -> ClientReport:
    return _local_sgd(x_start, steps, eta, objective, client, rng)


def local_update_fedprox(x_start, steps, eta, mu_prox, objective, client, rng) -> ClientReport:
    """SGD on ``f_i(x) + mu_prox/2 ||x - x_start||^2``."""
    if mu_prox < 0:
        raise ConfigurationError("mu_prox must be >= 0")
    return _local_sgd(x_start, steps, eta, objective, client, rng, mu_prox=float(mu_prox))


def select_branch(policy: OrientationPolicy, steps: int, kbar: float) -> Branch:
    policy = OrientationPolicy(policy)
    if policy is OrientationPolicy.AVG:
        return Branch.AVERAGE
    if policy is OrientationPolicy.FIRST:
        return Branch.FIRST
    slow = steps <= kbar
    if policy is OrientationPolicy.REVERSE:
        slow = not slow
    return Branch.AVERAGE if slow else Branch.FIRST


def choose_orientation(policy: OrientationPolicy, steps: int, kbar: float, report: ClientReport) -> np.ndarray:
    """The vector a client transmits (and stores as its next ``nu_i``)."""
    if select_branch(policy, steps, kbar) is Branch.AVERAGE:
        return report.avg_grad
    return report.first_grad


def reconstruct_avg_grad(x_global, final_model, eta, steps, lam, nu, nu_i) -> np.ndarray:
    """Recover a client's averaged gradient from its model delta.

    Unrolling the calibrated local recursion gives
    ``avg_grad = (x_global - final_model) / (eta * K_i) - lambda * (nu - nu_i)``.
    """
    if not eta > 0 or steps < 1:
        raise ConfigurationError("need eta > 0 and steps >= 1")
    avg = (np.asarray(x_global) - np.asarray(final_model)) / (eta * steps)
    if lam != 0:
        avg = avg - lam * (np.asarray(nu) - np.asarray(nu_i))
    return avg


# ---------------------------------------------------------------- server side

def _check_reports(reports, weights):
    if len(reports) != len(weights) or any(r is None for r in reports):
        raise ProtocolError(f"expected one report per client ({len(weights)}), full participation is required")


def aggregate_models(weights, finals: Sequence[np.ndarray]) -> np.ndarray:
    return check_finite(weighted_sum(weights, finals))


def server_round_fedavg(x_global, reports, weights) -> np.ndarray:
    _check_reports(reports, weights)
    return aggregate_models(weights, [r.final_model for r in reports])


def server_round_fedagrac(x_global, reports, weights, state: CalibrationState, policy: OrientationPolicy):
    """Model averaging, ``K_bar``, orientation selection and new ``nu``.

    Returns ``(new_global_model, new_state, kbar)``.
    """
    _check_reports(reports, weights)
    x_next = aggregate_models(weights, [r.final_model for r in reports])
    kbar = weighted_mean_steps(weights, [r.steps for r in reports])
    sent = tuple(choose_orientation(policy, r.steps, kbar, r) for r in reports)
    return x_next, CalibrationState(weighted_sum(weights, sent), sent), kbar


def server_round_fednova(x_global, reports, weights, eta) -> np.ndarray:
    """Normalized averaging with ``tau_eff = K_bar``.

    ``d_i = (x - x_i) / (eta K_i)`` and ``x+ = x - eta K_bar sum_i w_i d_i``.
    With equal ``K_i`` this telescopes to plain model averaging, which is
    what is computed in that case.
    """
    _check_reports(reports, weights)
    steps = [r.steps for r in reports]
    if len(set(steps)) == 1:
        return aggregate_models(weights, [r.final_model for r in reports])
    x_global = np.asarray(x_global, dtype=np.float64)
    normalized = [(x_global - r.final_model) / (eta * r.steps) for r in reports]
    tau_eff = weighted_mean_steps(weights, steps)
    return check_finite(x_global - eta * tau_eff * weighted_sum(weights, normalized))
