"""Step asynchronism biases FedAvg; gradient calibration removes the bias.

Two 1-D clients pull towards 0 and 10. The global optimum is 5, but when the
second client takes 20 local steps per round and the first takes one, FedAvg
settles at a point far closer to 10. Run with ``python demos/01_objective_inconsistency.py``.
"""
from fedsim.algorithms import FedAvg, FedaGrac
from fedsim.engine import RunConfig, run
from fedsim.heterogeneity import StepSchedule
from fedsim.objectives import QuadraticObjective
from fedsim.oracle import fedavg_fixed_point_quadratic, optimum_quadratic, theorem1_bias_bound

centers, weights, eta = [[0.0], [10.0]], [0.5, 0.5], 0.1
problem = QuadraticObjective.identity(centers)
oracle = optimum_quadratic(problem, weights)
print(f"true optimum x* = {oracle.x_star[0]:g}, F(x*) = {oracle.f_star:g}")

# %% FedAvg converges to the fixed point of its round map, not to x*
for steps in [(1, 1), (1, 5), (1, 20)]:
    res = run(RunConfig(FedAvg(), problem, eta, 2000, StepSchedule(1, overrides=steps), oracle=oracle,
                        eval_every=2000))
    predicted = fedavg_fixed_point_quadratic(centers, weights, eta, steps)[0]
    bound = theorem1_bias_bound(problem, weights, steps, oracle.x_star)
    print(f"K={steps}: FedAvg ends at {res.final_model[0]:.6f} (closed form {predicted:.6f}), "
          f"gap {res.records[-1].optimality_gap:.4f}, bias scale {bound:g}")

# %% FedaGrac with the same asynchronous plan
res = run(RunConfig(FedaGrac(), problem, eta, 500, StepSchedule(1, overrides=(1, 20)), oracle=oracle,
                    eval_every=100))
for r in res.records:
    print(f"FedaGrac round {r.round:4d}: gap {r.optimality_gap:.3e}")
