"""CSV metrics files and JSON run manifests."""
from __future__ import annotations

import csv
import json
import os
from typing import Iterable

import numpy as np

from .engine import MetricsRecord

CSV_HEADER = ("round", "global_loss", "grad_norm_sq", "optimality_gap", "kbar", "bytes_up", "bytes_down")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def emit_csv(records: Iterable[MetricsRecord], path) -> None:
    """Write one row per record; floats keep 17 significant digits, a missing gap is left blank."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in records:
                w.writerow([r.round, _fmt(r.global_loss), _fmt(r.grad_norm_sq),
                            "" if r.optimality_gap is None else _fmt(r.optimality_gap),
                            _fmt(r.kbar), r.bytes_up, r.bytes_down])
    except Exception:
        try:
            os.remove(path)
        except OSError:
            pass
        raise


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: not a fedsim metrics file")
    return [MetricsRecord(int(r[0]), float(r[1]), float(r[2]), None if r[3] == "" else float(r[3]),
                          float(r[4]), int(r[5]), int(r[6])) for r in rows[1:]]


def oracle_to_json(oracle):
    if oracle is None:
        return None
    return {"x_star": [float(v) for v in np.asarray(oracle.x_star)], "f_star": float(oracle.f_star),
            "method": oracle.method.value, "residual": float(oracle.residual)}


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
