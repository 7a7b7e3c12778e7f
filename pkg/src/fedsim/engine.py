"""Round orchestration for every algorithm kind.

Per round ``t``:

1. draw the step plan ``K_i``;
2. broadcast the global model (and ``nu`` for FedaGrac);
3. clients run their local updates (concurrently, through the transport);
4. the server aggregates the returned models and computes ``K_bar``;
5. FedaGrac only: ``K_bar`` is announced and each client returns its orientation;
6. metrics are evaluated on the full global objective.

Client randomness is keyed by ``(seed, client, round)``, and every reduction
runs in ascending client order, so results do not depend on the thread count
or on the transport.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import algorithms as alg
from .algorithms import Branch, FedaGrac, FedAvg, FedNova, FedProx
from .data import Partition, uniform_partition
from .errors import ConfigurationError, DivergenceError, ProtocolError
from .heterogeneity import StepSchedule, draw_steps, weighted_mean_steps
from .numeric import STREAM_GRADIENT, rng_stream, weighted_sum
from .objectives import Objective, global_objective
from .oracle import OracleResult
from .transport import (Broadcast, InProcTransport, KbarAnnounce, Orientation, Report, Shutdown,
                        TcpTransport, decode, encode)

log = logging.getLogger(__name__)

FLOAT_BYTES = 8


@dataclass
class RunConfig:
    algorithm: alg.AlgorithmKind
    objective: Objective
    eta: float
    rounds: int
    step_schedule: StepSchedule
    partition: Optional[Partition] = None
    seed: int = 0
    eval_every: int = 1
    worker_threads: int = 1
    transport: str = "inproc"
    port: int = 0
    reconstruction: bool = False
    x0: Optional[np.ndarray] = None
    oracle: Optional[OracleResult] = None

    def __post_init__(self):
        if self.partition is None:
            self.partition = uniform_partition(self.objective.num_clients)

    @property
    def num_clients(self) -> int:
        return self.objective.num_clients

    @property
    def weights(self) -> np.ndarray:
        return self.partition.weights

    def validate(self) -> None:
        if not self.eta > 0:
            raise ConfigurationError("eta must be > 0")
        if self.rounds < 1:
            raise ConfigurationError("rounds must be ≥ 1")
        if self.eval_every < 1:
            raise ConfigurationError("eval_every must be ≥ 1")
        if self.worker_threads < 1:
            raise ConfigurationError("threads must be ≥ 1")
        if self.partition.num_clients != self.objective.num_clients:
            raise ConfigurationError(
                f"partition has {self.partition.num_clients} clients, objective has {self.objective.num_clients}")
        if self.transport not in ("inproc", "tcp"):
            raise ConfigurationError(f"unknown transport {self.transport!r}")
        if self.reconstruction and not isinstance(self.algorithm, FedaGrac):
            raise ConfigurationError("reconstruction only applies to FedaGrac")


@dataclass(frozen=True)
class MetricsRecord:
    round: int
    global_loss: float
    grad_norm_sq: float
    optimality_gap: Optional[float]
    kbar: float
    bytes_up: int
    bytes_down: int


@dataclass
class RunResult:
    records: list
    final_model: np.ndarray
    failure: Optional[str] = None
    oracle: Optional[OracleResult] = None
    reports_per_round: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure is None


def bytes_accounting(dim: int, algorithm: alg.AlgorithmKind, branch: Optional[Branch] = None,
                     reconstruction: bool = False) -> tuple:
    """Per-client ``(bytes_up, bytes_down)`` for one round.

    Each vector costs ``8 * dim`` bytes and each scalar 8 bytes. Baselines move
    the model down and the model plus ``K_i`` up. FedaGrac adds ``nu`` and
    ``K_bar`` downstream and the orientation upstream, except that with
    reconstruction an averaged-gradient orientation is recomputed on the
    server and not sent.
    """
    vec = FLOAT_BYTES * dim
    up = vec + FLOAT_BYTES
    down = vec
    if isinstance(algorithm, FedaGrac):
        down += vec + FLOAT_BYTES
        if not (reconstruction and branch is Branch.AVERAGE):
            up += vec
    return up, down


class ClientNode:
    """Client-side protocol handler: frames in, frames out."""

    def __init__(self, client_id: int, config: RunConfig, nu_init: Optional[np.ndarray] = None):
        self.id = client_id
        self.objective = config.objective
        self.algorithm = config.algorithm
        self.eta = config.eta
        self.schedule = config.step_schedule
        self.weights = config.weights
        self.seed = config.seed
        self.reconstruction = config.reconstruction
        self.nu_i = nu_init
        self.report = None
        self.steps = None

    def local_update(self, round_, x, nu):
        steps = draw_steps(self.schedule, round_, self.weights, self.seed).steps[self.id]
        rng = None if self.objective.deterministic else rng_stream(self.seed, STREAM_GRADIENT, self.id, round_)
        a = self.algorithm
        if isinstance(a, FedaGrac):
            lam = alg.lambda_at(a.schedule, round_)
            return alg.local_update_fedagrac(x, nu, self.nu_i, steps, self.eta, lam, self.objective, self.id, rng)
        if isinstance(a, FedProx):
            return alg.local_update_fedprox(x, steps, self.eta, a.mu_prox, self.objective, self.id, rng)
        return alg.local_update_fedavg(x, steps, self.eta, self.objective, self.id, rng)

    def __call__(self, frame: bytes) -> list:
        msg, _ = decode(frame)
        if isinstance(msg, Broadcast):
            self.report = self.local_update(msg.round, msg.model, msg.nu)
            return [encode(Report(self.id, self.report.final_model, self.report.steps))]
        if isinstance(msg, KbarAnnounce):
            if self.report is None:
                raise ProtocolError(f"client {self.id}: K_bar announced before any local round")
            branch = alg.select_branch(self.algorithm.policy, self.report.steps, msg.kbar)
            self.nu_i = alg.choose_orientation(self.algorithm.policy, self.report.steps, msg.kbar, self.report)
            if self.reconstruction and branch is Branch.AVERAGE:
                return [encode(Orientation(self.id))]
            return [encode(Orientation(self.id, self.nu_i))]
        if isinstance(msg, Shutdown):
            return []
        raise ProtocolError(f"client {self.id}: unexpected {type(msg).__name__}")


def _evaluate(objective, weights, x, round_, oracle, kbar, up, down) -> MetricsRecord:
    loss = global_objective(objective, weights, x)
    g = objective.global_gradient(weights, x)
    gap = None if oracle is None else loss - oracle.f_star
    return MetricsRecord(round_, loss, float(g @ g), gap, float(kbar), int(up), int(down))


def _make_transport(config, nodes):
    if config.transport == "tcp":
        return TcpTransport(nodes, port=config.port, worker_threads=config.worker_threads)
    return InProcTransport(nodes, worker_threads=config.worker_threads)


def run(config: RunConfig) -> RunResult:
    """Execute ``config.rounds`` communication rounds.

    Record 0 is the initial model; afterwards a record is written every
    ``eval_every`` rounds and after the final round. ``bytes_up`` and
    ``bytes_down`` are cumulative totals over all clients. A divergence stops
    the run; the records collected so far are returned with ``failure`` set.
    """
    config.validate()
    objective, weights, algorithm = config.objective, config.weights, config.algorithm
    m, d = objective.num_clients, objective.dim
    x = np.zeros(d) if config.x0 is None else np.array(config.x0, dtype=np.float64)
    if x.shape != (d,):
        raise ConfigurationError(f"x0 must have dimension {d}")
    oracle = config.oracle
    fedagrac = isinstance(algorithm, FedaGrac)

    state = alg.initial_calibration(objective, weights, x) if fedagrac else None
    nodes = [ClientNode(i, config, state.nu_client[i] if fedagrac else None) for i in range(m)]
    records = [_evaluate(objective, weights, x, 0, oracle, 0.0, 0, 0)]
    reports_per_round = []
    total_up = total_down = 0
    failure = None

    transport = _make_transport(config, nodes).start()
    try:
        for t in range(1, config.rounds + 1):
            plan = draw_steps(config.step_schedule, t, weights, config.seed)
            nu = state.nu if fedagrac else np.zeros(0)
            replies = transport.exchange([encode(Broadcast(t, x, nu))] * m)
            reports = [decode(f)[0] for f in replies]
            for i, r in enumerate(reports):
                if not isinstance(r, Report) or r.client_id != i:
                    raise ProtocolError(f"expected a report from client {i}")
                if r.steps != plan.steps[i]:
                    raise ProtocolError(f"client {i} reported {r.steps} steps, plan says {plan.steps[i]}")
            reports_per_round.append(len(reports))
            finals = [r.model for r in reports]
            kbar = weighted_mean_steps(weights, plan.steps)

            branches = [None] * m
            if isinstance(algorithm, FedNova):
                x_next = alg.server_round_fednova(
                    x, [alg.ClientReport(r.model, r.steps, None, None) for r in reports], weights, config.eta)
            else:
                x_next = alg.aggregate_models(weights, finals)

            if fedagrac:
                lam = alg.lambda_at(algorithm.schedule, t)
                replies = transport.exchange([encode(KbarAnnounce(t, kbar))] * m)
                sent = []
                for i, frame in enumerate(replies):
                    o = decode(frame)[0]
                    if not isinstance(o, Orientation) or o.client_id != i:
                        raise ProtocolError(f"expected an orientation from client {i}")
                    branches[i] = alg.select_branch(algorithm.policy, plan.steps[i], kbar)
                    if o.vector.size == 0:
                        sent.append(alg.reconstruct_avg_grad(x, finals[i], config.eta, plan.steps[i], lam,
                                                             state.nu, state.nu_client[i]))
                    else:
                        sent.append(o.vector)
                state = alg.CalibrationState(weighted_sum(weights, sent), tuple(sent))

            for b in branches:
                up, down = bytes_accounting(d, algorithm, b, config.reconstruction)
                total_up += up
                total_down += down
            x = x_next
            if t % config.eval_every == 0 or t == config.rounds:
                records.append(_evaluate(objective, weights, x, t, oracle, kbar, total_up, total_down))
    except DivergenceError as exc:
        failure = str(exc)
        log.warning("run aborted: %s", failure)
    finally:
        try:
            transport.close()
        except Exception:  # a failed client may already have torn its side down
            log.debug("transport close failed", exc_info=True)
    return RunResult(records, x, failure, oracle, reports_per_round)
