"""Which gradient should a client send back as its reference orientation?

Runs the four orientation policies on one heterogeneous quadratic suite with
random step counts, for a single seed and fewer rounds than the full
``orientation-ablation`` preset. It also shows how many bytes the reconstruction
trick saves.
"""
from fedsim.config import build_run
from fedsim.engine import run
from fedsim.presets import expand_preset

runs = expand_preset("orientation-ablation", {"rounds": 100})
oracle = None
for name, cfg in runs:
    rc = build_run(cfg, with_oracle=oracle is None)
    oracle = oracle or rc.oracle
    rc.oracle = oracle
    last = run(rc).records[-1]
    print(f"{name:18s} gap {last.optimality_gap:.3e}  uplink {last.bytes_up / 1e6:.2f} MB")

# %% The Default policy with reconstruction: slower clients send nothing extra
name, cfg = runs[0]
rc = build_run(cfg.replace(reconstruction=True), with_oracle=False)
rc.oracle = oracle
last = run(rc).records[-1]
print(f"{name + ' +recon':18s} gap {last.optimality_gap:.3e}  uplink {last.bytes_up / 1e6:.2f} MB")
