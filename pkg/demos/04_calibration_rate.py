"""Effect of the calibration rate lambda on non-i.i.d. logistic regression.

Uses the bundled 200-row dataset split across 20 clients with Dirichlet(0.3)
label skew. lambda = 0 is FedAvg; the "increase" schedule ramps lambda up
over the run.
"""
from fedsim.config import build_run
from fedsim.engine import run
from fedsim.presets import expand_preset

oracle = None
for name, cfg in expand_preset("lambda-sweep", {"rounds": 60}):
    rc = build_run(cfg, with_oracle=oracle is None)
    oracle = oracle or rc.oracle
    rc.oracle = oracle
    last = run(rc).records[-1]
    print(f"{name:26s} loss {last.global_loss:.6f}  gap {last.optimality_gap:.3e}")
