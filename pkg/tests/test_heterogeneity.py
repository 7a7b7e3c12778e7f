import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedsim.errors import ConfigurationError
from fedsim.heterogeneity import StepMode, StepSchedule, draw_steps


def test_zero_variance():
    plan = draw_steps(StepSchedule(100), 3, [1 / 3] * 3, seed=0)
    assert plan.steps == (100, 100, 100) and plan.kbar == pytest.approx(100)
    assert not plan.asynchronous


def test_overrides():
    plan = draw_steps(StepSchedule(1, overrides=(1, 20)), 1, [0.5, 0.5], seed=0)
    assert (plan.kbar, plan.kmin, plan.kmax) == (10.5, 1, 20)


def test_override_count_must_match():
    with pytest.raises(ConfigurationError):
        draw_steps(StepSchedule(1, overrides=(1, 2, 3)), 1, [0.5, 0.5], seed=0)


def test_fixed_mode_repeats():
    sched = StepSchedule(500, 10_000, StepMode.FIXED)
    w = [1 / 20] * 20
    plans = {draw_steps(sched, t, w, seed=9).steps for t in range(1, 51)}
    assert len(plans) == 1


def test_random_mode_redraws_and_reproduces():
    sched = StepSchedule(50, 400, StepMode.RANDOM)
    w = [0.1] * 10
    a = [draw_steps(sched, t, w, seed=2).steps for t in range(1, 20)]
    b = [draw_steps(sched, t, w, seed=2).steps for t in range(1, 20)]
    assert a == b and len(set(a)) > 1


@given(mean=st.floats(1, 50), variance=st.floats(0, 1e6), seed=st.integers(0, 2**31), round_=st.integers(1, 500))
def test_clamped_at_one(mean, variance, seed, round_):
    plan = draw_steps(StepSchedule(mean, variance, "random"), round_, [0.25] * 4, seed)
    assert min(plan.steps) >= 1


def test_empirical_mean():
    sched = StepSchedule(40, 25, "random")
    draws = np.concatenate([draw_steps(sched, t, [0.01] * 100, seed=1).steps for t in range(1, 101)])
    assert draws.size == 10_000
    assert abs(draws.mean() - 40) <= 3 * np.sqrt(25 / 10_000) + 0.5


@pytest.mark.parametrize("kwargs", [dict(mean=0.5), dict(mean=5, variance=-1), dict(mean=5, overrides=(0, 3))])
def test_schedule_validation(kwargs):
    with pytest.raises(ConfigurationError):
        StepSchedule(**kwargs)
