import numpy as np
import pytest

from fedsim import algorithms as alg
from fedsim.algorithms import Branch
from fedsim.config import ExperimentConfig, build_run
from fedsim.engine import RunConfig, bytes_accounting, run
from fedsim.errors import ConfigurationError
from fedsim.heterogeneity import StepSchedule
from fedsim.objectives import QuadraticObjective, make_quadratic_suite
from fedsim.oracle import fedavg_fixed_point_quadratic, optimum_quadratic


def _cfg(**kw):
    base = dict(objective="quadratic", clients=6, dim=3, sigma=0.7, eta=0.02, rounds=12, steps_mean=8,
                steps_var=16, steps_mode="random", seed=3)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def _seq(result):
    return [(r.round, r.global_loss, r.grad_norm_sq, r.optimality_gap, r.kbar, r.bytes_up, r.bytes_down)
            for r in result.records]


def test_pair_examples():
    q = QuadraticObjective.identity([[0.0], [10.0]])
    oracle = optimum_quadratic(q, [0.5, 0.5])
    sched = StepSchedule(1, overrides=(1, 20))
    ag = run(RunConfig(alg.FedaGrac(), q, 0.1, 500, sched, oracle=oracle))
    assert ag.ok and ag.records[-1].optimality_gap <= 1e-10
    avg = run(RunConfig(alg.FedAvg(), q, 0.1, 2000, sched, oracle=oracle, eval_every=100))
    x_inf = fedavg_fixed_point_quadratic([[0.0], [10.0]], [0.5, 0.5], 0.1, (1, 20))
    assert abs(avg.final_model[0] - x_inf[0]) <= 1e-8


def test_records_layout_and_bytes():
    res = run(build_run(_cfg(algorithm="fedavg", rounds=10, eval_every=4)))
    assert [r.round for r in res.records] == [0, 4, 8, 10]
    first = res.records[0]
    assert (first.bytes_up, first.bytes_down, first.kbar) == (0, 0, 0.0)
    assert res.records[-1].bytes_up == 10 * 6 * (8 * 3 + 8)
    assert res.records[-1].bytes_down == 10 * 6 * 8 * 3
    assert res.reports_per_round == [6] * 10


@pytest.mark.parametrize("algorithm", ["fedavg", "fedagrac", "scaffold", "fednova", "fedprox"])
def test_thread_count_does_not_matter(algorithm):
    runs = [_seq(run(build_run(_cfg(algorithm=algorithm, threads=n)))) for n in (1, 4, 8)]
    assert runs[0] == runs[1] == runs[2]


def test_seed_changes_noise():
    assert _seq(run(build_run(_cfg(seed=1)))) != _seq(run(build_run(_cfg(seed=2))))


def test_monotone_gap_deterministic():
    q = make_quadratic_suite(8, 4, np.random.default_rng(2), mu=0.1, L=1.0)
    sched = StepSchedule(10, 9, "random")
    eta = 1.0 / (q.smoothness * 16)
    oracle = optimum_quadratic(q, np.full(8, 1 / 8))
    res = run(RunConfig(alg.FedaGrac(), q, eta, 80, sched, seed=4, oracle=oracle))
    gaps = [r.optimality_gap for r in res.records if r.round >= 3]
    assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(gaps, gaps[1:]))


def test_divergence_returns_partial_records():
    res = run(build_run(_cfg(algorithm="fedavg", eta=3.0, sigma=0.0, rounds=50)))
    assert not res.ok and "diverged" in res.failure
    assert 1 <= len(res.records) < 51


def test_lambda_zero_matches_fedavg():
    a = run(build_run(_cfg(algorithm="fedagrac", **{"lambda": 0.0})))
    b = run(build_run(_cfg(algorithm="fedavg")))
    assert [s[:5] for s in _seq(a)] == [s[:5] for s in _seq(b)]


@pytest.mark.parametrize("m", [2, 4])
def test_identical_clients_make_algorithms_agree(m):
    # power-of-two client counts keep the weighted mean of equal vectors exact
    centers = [[1.0, -2.0]] * m
    base = dict(objective="quadratic", clients=m, quadratic_centers=centers, sigma=0.0, eta=0.1, rounds=15,
                steps_mean=6, x0=[4.0, 3.0])
    seqs = {}
    for a in ("fedavg", "fedagrac", "scaffold", "fednova"):
        seqs[a] = [r[:3] for r in _seq(run(build_run(ExperimentConfig.from_dict({**base, "algorithm": a}))))]
    seqs["fedprox"] = [r[:3] for r in _seq(run(build_run(
        ExperimentConfig.from_dict({**base, "algorithm": "fedprox", "mu_prox": 0.0}))))]
    assert len({str(s) for s in seqs.values()}) == 1
    one_step = {**base, "steps_mean": 1}
    a = _seq(run(build_run(ExperimentConfig.from_dict({**one_step, "algorithm": "fedprox"}))))
    b = _seq(run(build_run(ExperimentConfig.from_dict({**one_step, "algorithm": "fedavg"}))))
    assert [r[:3] for r in a] == [r[:3] for r in b]


def test_fednova_equal_steps_bitwise():
    for seed in range(5):
        a = run(build_run(_cfg(algorithm="fednova", steps_var=0, seed=seed)))
        b = run(build_run(_cfg(algorithm="fedavg", steps_var=0, seed=seed)))
        assert a.final_model.tobytes() == b.final_model.tobytes()


def test_reconstruction_saves_bytes_keeps_trajectory():
    plain = run(build_run(_cfg()))
    rec = run(build_run(_cfg(reconstruction=True)))
    assert rec.records[-1].bytes_up < plain.records[-1].bytes_up
    assert rec.records[-1].bytes_down == plain.records[-1].bytes_down
    for p, r in zip(plain.records, rec.records):
        assert r.global_loss == pytest.approx(p.global_loss, rel=1e-9)


def test_tcp_matches_inproc():
    a = run(build_run(_cfg(rounds=5)))
    b = run(build_run(_cfg(rounds=5, transport="tcp", threads=3)))
    assert _seq(a) == _seq(b)


def test_gap_omitted_without_oracle():
    res = run(build_run(_cfg(rounds=2), with_oracle=False))
    assert all(r.optimality_gap is None for r in res.records)


def test_bytes_accounting_examples():
    assert bytes_accounting(100, alg.FedAvg()) == (808, 800)
    assert bytes_accounting(100, alg.FedaGrac(), Branch.AVERAGE, reconstruction=True) == (808, 1608)
    assert bytes_accounting(100, alg.FedaGrac(), Branch.FIRST, reconstruction=True) == (1608, 1608)
    assert bytes_accounting(100, alg.FedaGrac(), Branch.AVERAGE) == (1608, 1608)


def test_run_validation():
    q = QuadraticObjective.identity([[0.0]])
    with pytest.raises(ConfigurationError, match="eta must be > 0"):
        run(RunConfig(alg.FedAvg(), q, 0.0, 3, StepSchedule(1)))
    with pytest.raises(ConfigurationError, match="rounds must be ≥ 1"):
        run(RunConfig(alg.FedAvg(), q, 0.1, 0, StepSchedule(1)))
    with pytest.raises(ConfigurationError):
        run(RunConfig(alg.FedAvg(), q, 0.1, 3, StepSchedule(1), reconstruction=True))
