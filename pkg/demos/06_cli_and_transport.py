"""The ``fedsim`` command line and the TCP loopback transport.

Equivalent shell session::

    fedsim run --preset inconsistency-demo --seed 7 --out ./results
    fedsim run --algorithm fedagrac --transport tcp --threads 4 --rounds 20 --out ./results-tcp

The in-process and TCP transports carry the same frames, so the metrics files
match byte for byte.
"""
import tempfile
from pathlib import Path

from fedsim.cli import main

with tempfile.TemporaryDirectory() as tmp:
    main(["run", "--preset", "inconsistency-demo", "--seed", "7", "--out", tmp])
    print((Path(tmp) / "manifest.json").read_text()[:400], "...")
    args = ["run", "--algorithm", "fedagrac", "--sigma", "0.5", "--steps-var", "16", "--steps-mode", "random",
            "--rounds", "20"]
    main(args + ["--out", f"{tmp}/inproc"])
    main(args + ["--transport", "tcp", "--threads", "4", "--out", f"{tmp}/tcp"])
    same = Path(tmp, "inproc", "fedagrac.csv").read_bytes() == Path(tmp, "tcp", "fedagrac.csv").read_bytes()
    print("TCP and in-process CSVs identical:", same)
