"""Bundled experiment suites.

Each preset expands to a list of ``(run_name, ExperimentConfig)`` pairs that
share one problem instance and differ along the preset's sweep axes.
"""
from __future__ import annotations

from .config import ExperimentConfig
from .errors import ConfigurationError

BASELINES = ("fedagrac", "fedavg", "fednova", "scaffold", "fedprox")

INCONSISTENCY_DEMO = dict(
    objective="quadratic", clients=2, quadratic_centers=[[0.0], [10.0]], sigma=0.0,
    eta=0.1, rounds=500, steps_overrides=[1, 20], seed=0,
)

ORIENTATION_ABLATION = dict(
    objective="quadratic", clients=10, dim=5, quad_mu=0.1, quad_L=1.0, center_scale=5.0, sigma=0.5,
    eta=0.01, rounds=300, steps_mean=50, steps_var=400, steps_mode="random", seed=0, instance_seed=0,
    algorithm="fedagrac", **{"lambda": 1.0},
)

VARIANCE_SWEEP = dict(
    objective="quadratic", clients=20, dim=5, quad_mu=0.1, quad_L=1.0, sigma=0.5,
    eta=0.001, rounds=10, steps_mean=500, seed=0, instance_seed=0,
)
VARIANCES = (0.0, 100.0, 10000.0)

LAMBDA_SWEEP = dict(
    objective="logistic", clients=20, partition="dirichlet:0.3", batch_size=4,
    eta=0.005, rounds=200, steps_mean=50, steps_var=100, steps_mode="fixed", seed=0, instance_seed=0,
    algorithm="fedagrac",
)
LAMBDAS = (0.0, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0)


def _expand(name, base, overrides):
    out = []
    for run_name, changes in _runs(name, base):
        merged = {**base, **changes, **overrides}
        out.append((run_name, ExperimentConfig.from_dict(merged)))
    return out


def _runs(name, base):
    if name == "inconsistency-demo":
        return [("fedavg", {"algorithm": "fedavg"}), ("fedagrac", {"algorithm": "fedagrac", "lambda": 1.0})]
    if name == "orientation-ablation":
        return [(f"fedagrac_{p}", {"policy": p}) for p in ("default", "avg", "first", "reverse")]
    if name == "variance-sweep":
        runs = []
        for v in VARIANCES:
            modes = ("fixed",) if v == 0 else ("fixed", "random")
            for mode in modes:
                for a in BASELINES:
                    tag = f"v{int(v)}" if v == 0 else f"v{int(v)}_{mode}"
                    runs.append((f"{a}_{tag}", {"algorithm": a, "steps_var": v, "steps_mode": mode}))
        return runs
    if name == "lambda-sweep":
        runs = [(f"fedagrac_lambda{lam:g}", {"lambda": lam}) for lam in LAMBDAS]
        runs.append(("fedagrac_increase", {"lambda_schedule": "increase"}))
        return runs
    raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = {
    "inconsistency-demo": INCONSISTENCY_DEMO,
    "orientation-ablation": ORIENTATION_ABLATION,
    "variance-sweep": VARIANCE_SWEEP,
    "lambda-sweep": LAMBDA_SWEEP,
}


def expand_preset(name: str, overrides: dict | None = None) -> list:
    """Runs of preset ``name`` with ``overrides`` applied to every run."""
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return _expand(name, PRESETS[name], overrides or {})
