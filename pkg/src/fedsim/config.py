"""Flat key-value experiment configuration and its translation into a :class:`RunConfig`.

The JSON form mirrors :class:`ExperimentConfig` field for field, so a config
file, a manifest entry and a set of command-line flags all describe a run the
same way. Building a run is deterministic: the problem instance is drawn from
``instance_seed`` (defaulting to ``seed``), gradient noise and step counts
from ``seed``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from . import algorithms as alg
from .data import load_bundled, load_libsvm, partition_dirichlet, partition_iid, partition_shard, uniform_partition
from .engine import RunConfig
from .errors import ConfigurationError, FedSimError
from .heterogeneity import StepSchedule
from .numeric import STREAM_INSTANCE, STREAM_PARTITION, rng_stream
from .objectives import LogisticObjective, QuadraticObjective, make_linear_toy, make_quadratic_suite
from .oracle import compute_oracle

ALGORITHMS = ("fedavg", "fednova", "fedprox", "scaffold", "fedagrac")
POLICIES = tuple(p.value for p in alg.OrientationPolicy)
OBJECTIVES = ("quadratic", "logistic", "lineartoy")


@dataclass
class ExperimentConfig:
    algorithm: str = "fedagrac"
    policy: str = "default"
    lambda_: float = 1.0
    lambda_schedule: Optional[str] = None
    mu_prox: float = 0.01
    eta: float = 0.01
    rounds: int = 100
    clients: int = 10
    steps_mean: float = 10.0
    steps_var: float = 0.0
    steps_mode: str = "fixed"
    steps_overrides: Optional[list] = None
    partition: str = "dirichlet:0.3"
    dataset: Optional[str] = None
    objective: str = "quadratic"
    sigma: float = 0.0
    dim: int = 5
    quad_mu: float = 0.1
    quad_L: float = 1.0
    center_scale: float = 5.0
    quadratic_centers: Optional[list] = None
    batch_size: int = 20
    l2_reg: float = 1e-3
    points_per_client: int = 50
    jitter: float = 0.5
    x0: Optional[list] = None
    seed: int = 0
    instance_seed: Optional[int] = None
    transport: str = "inproc"
    port: int = 0
    threads: int = 1
    eval_every: int = 1
    reconstruction: bool = False

    # "lambda" is a keyword; it is spelled without the underscore on disk
    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            name = key.replace("-", "_")
            name = "lambda_" if name == "lambda" else name
            if name not in names:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[name] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lambda_")
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        merged = self.to_dict()
        merged.update(changes)
        return ExperimentConfig.from_dict(merged)

    def validate(self) -> None:
        def number(name, kind=float):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigurationError(f"{name.rstrip('_')} must be a number")
            if kind is int and int(v) != v:
                raise ConfigurationError(f"{name} must be an integer")
            setattr(self, name, kind(v))

        for name in ("lambda_", "mu_prox", "eta", "steps_mean", "steps_var", "sigma", "quad_mu", "quad_L",
                     "center_scale", "l2_reg", "jitter"):
            number(name)
        for name in ("rounds", "clients", "dim", "batch_size", "points_per_client", "seed", "port", "threads",
                     "eval_every"):
            number(name, int)
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {', '.join(ALGORITHMS)}")
        if self.policy not in POLICIES:
            raise ConfigurationError(f"policy must be one of {', '.join(POLICIES)}")
        if self.objective not in OBJECTIVES:
            raise ConfigurationError(f"objective must be one of {', '.join(OBJECTIVES)}")
        if not self.eta > 0:
            raise ConfigurationError("eta must be > 0")
        if self.rounds < 1:
            raise ConfigurationError("rounds must be ≥ 1")
        if self.clients < 1:
            raise ConfigurationError("clients must be ≥ 1")
        if self.lambda_ < 0:
            raise ConfigurationError("lambda must be ≥ 0")
        if self.lambda_schedule not in (None, "increase"):
            raise ConfigurationError("lambda_schedule must be 'increase' or null")
        if self.mu_prox < 0:
            raise ConfigurationError("mu_prox must be ≥ 0")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be ≥ 0")
        if self.steps_mode not in ("fixed", "random"):
            raise ConfigurationError("steps_mode must be 'fixed' or 'random'")
        if self.steps_overrides is None and self.steps_mean < 1:
            raise ConfigurationError("steps_mean must be ≥ 1")
        if self.steps_var < 0:
            raise ConfigurationError("steps_var must be ≥ 0")
        if self.steps_overrides is not None and len(self.steps_overrides) != self.clients:
            raise ConfigurationError("steps_overrides needs one entry per client")
        if self.quadratic_centers is not None and len(self.quadratic_centers) != self.clients:
            raise ConfigurationError("quadratic_centers needs one entry per client")
        if self.transport not in ("inproc", "tcp"):
            raise ConfigurationError("transport must be 'inproc' or 'tcp'")
        if self.threads < 1:
            raise ConfigurationError("threads must be ≥ 1")
        if self.eval_every < 1:
            raise ConfigurationError("eval_every must be ≥ 1")
        if not 0 <= self.port < 65536:
            raise ConfigurationError("port must be in [0, 65535]")
        if self.seed < 0 or (self.instance_seed is not None and self.instance_seed < 0):
            raise ConfigurationError("seeds must be non-negative")
        if self.reconstruction and self.algorithm not in ("fedagrac", "scaffold"):
            raise ConfigurationError("reconstruction only applies to fedagrac/scaffold")
        parse_partition(self.partition)

    @property
    def effective_instance_seed(self) -> int:
        return self.seed if self.instance_seed is None else int(self.instance_seed)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must hold a flat JSON object")
    return ExperimentConfig.from_dict(raw)


def parse_partition(spec: str):
    """``iid``, ``dirichlet:ALPHA`` or ``shard:C`` -> ``(kind, parameter)``."""
    kind, _, arg = str(spec).partition(":")
    try:
        if kind == "iid" and not arg:
            return "iid", None
        if kind == "dirichlet":
            alpha = float(arg)
            if alpha > 0:
                return kind, alpha
        if kind == "shard":
            c = int(arg)
            if c >= 1:
                return kind, c
    except ValueError:
        pass
    raise ConfigurationError(f"partition must be iid, dirichlet:ALPHA (>0) or shard:C (>=1), got {spec!r}")


def make_algorithm(cfg: ExperimentConfig) -> alg.AlgorithmKind:
    if cfg.algorithm == "fedavg":
        return alg.FedAvg()
    if cfg.algorithm == "fednova":
        return alg.FedNova()
    if cfg.algorithm == "fedprox":
        return alg.FedProx(cfg.mu_prox)
    if cfg.algorithm == "scaffold":
        return alg.scaffold()
    schedule = alg.INCREASE if cfg.lambda_schedule == "increase" else alg.Constant(cfg.lambda_)
    return alg.FedaGrac(schedule, alg.OrientationPolicy(cfg.policy))


def _partition(cfg, labels):
    kind, arg = parse_partition(cfg.partition)
    rng = rng_stream(cfg.effective_instance_seed, STREAM_PARTITION)
    if kind == "iid":
        return partition_iid(len(labels), cfg.clients, rng)
    if kind == "dirichlet":
        return partition_dirichlet(labels, arg, cfg.clients, rng)
    return partition_shard(labels, arg, cfg.clients, rng)


def make_objective(cfg: ExperimentConfig):
    """Build ``(objective, partition)`` for a config."""
    rng = rng_stream(cfg.effective_instance_seed, STREAM_INSTANCE)
    if cfg.objective == "quadratic":
        if cfg.quadratic_centers is not None:
            obj = QuadraticObjective.identity(cfg.quadratic_centers, sigma=cfg.sigma)
        else:
            obj = make_quadratic_suite(cfg.clients, cfg.dim, rng, mu=cfg.quad_mu, L=cfg.quad_L,
                                       center_scale=cfg.center_scale, sigma=cfg.sigma)
        return obj, uniform_partition(cfg.clients)
    if cfg.objective == "lineartoy":
        obj = make_linear_toy(cfg.clients, cfg.points_per_client, rng, jitter=cfg.jitter, sigma=cfg.sigma)
        return obj, uniform_partition(cfg.clients)
    try:
        dataset = load_bundled() if cfg.dataset is None else load_libsvm(cfg.dataset)
    except OSError as exc:
        raise ConfigurationError(f"cannot read dataset {cfg.dataset}: {exc.strerror}") from None
    part = _partition(cfg, dataset.labels)
    return LogisticObjective.from_dataset(dataset, part, l2_reg=cfg.l2_reg, batch_size=cfg.batch_size), part


def build_run(cfg: ExperimentConfig, with_oracle: bool = True) -> RunConfig:
    objective, part = make_objective(cfg)
    schedule = StepSchedule(cfg.steps_mean, cfg.steps_var, cfg.steps_mode,
                            None if cfg.steps_overrides is None else tuple(cfg.steps_overrides))
    oracle = None
    if with_oracle:
        try:
            oracle = compute_oracle(objective, part.weights)
        except FedSimError:
            oracle = None
    return RunConfig(
        algorithm=make_algorithm(cfg), objective=objective, eta=cfg.eta, rounds=cfg.rounds,
        step_schedule=schedule, partition=part, seed=cfg.seed, eval_every=cfg.eval_every,
        worker_threads=cfg.threads, transport=cfg.transport, port=cfg.port,
        reconstruction=cfg.reconstruction, x0=None if cfg.x0 is None else np.asarray(cfg.x0, dtype=np.float64),
        oracle=oracle,
    )
