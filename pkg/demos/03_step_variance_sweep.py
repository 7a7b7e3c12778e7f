"""FedAvg, FedNova, FedProx, SCAFFOLD and FedaGrac as step counts get more uneven.

A shortened version of the ``variance-sweep`` preset (fewer local steps) so it
finishes in seconds. Larger variance means more asynchronous clients.
"""
from fedsim.config import build_run
from fedsim.engine import run
from fedsim.presets import expand_preset

oracle = None
for name, cfg in expand_preset("variance-sweep", {"steps_mean": 50, "eta": 0.01, "rounds": 20}):
    rc = build_run(cfg, with_oracle=oracle is None)
    oracle = oracle or rc.oracle
    rc.oracle = oracle
    res = run(rc)
    status = res.failure or f"gap {res.records[-1].optimality_gap:.4e}"
    print(f"{name:22s} {status}")
