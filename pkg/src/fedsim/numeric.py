"""Dense float64 vector helpers and seeded, stream-split random generators.

Parameter vectors are plain 1-D ``numpy.float64`` arrays. Nothing here mutates
its inputs.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DivergenceError

#: Any coordinate whose magnitude exceeds this aborts a run.
DIVERGENCE_THRESHOLD = 1e12

# Stream purposes; part of the SeedSequence spawn key so that draws for
# different concerns never overlap.
STREAM_GRADIENT = 0
STREAM_STEPS = 1
STREAM_PARTITION = 2
STREAM_INSTANCE = 3


def as_vector(values, dim: int | None = None) -> np.ndarray:
    """Copy ``values`` into a read-only float64 vector, checking shape and finiteness."""
    vec = np.array(values, dtype=np.float64).reshape(-1)
    if dim is not None and vec.shape[0] != dim:
        raise ConfigurationError(f"expected a vector of dimension {dim}, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise DivergenceError("vector has non-finite entries")
    vec.setflags(write=False)
    return vec


def check_finite(x: np.ndarray, client=None, step=None) -> np.ndarray:
    """Raise :class:`DivergenceError` if ``x`` is non-finite or beyond the threshold."""
    # NaN fails the comparison, so one reduction covers NaN, inf and overflow
    if x.size and not float(np.abs(x).max()) <= DIVERGENCE_THRESHOLD:
        where = []
        if client is not None:
            where.append(f"client {client}")
        if step is not None:
            where.append(f"step {step}")
        suffix = f" ({', '.join(where)})" if where else ""
        raise DivergenceError(f"iterate diverged{suffix}", client=client, step=step)
    return x


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``alpha * x + y`` as a new vector."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ConfigurationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not np.isfinite(alpha):
        raise ConfigurationError("alpha must be finite")
    return alpha * x + y


def weighted_sum(weights: Sequence[float], vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Return ``sum_i weights[i] * vectors[i]``.

    Terms are accumulated one at a time in index order (ascending client id),
    so the result does not depend on how the vectors were produced.
    """
    if len(weights) == 0 or len(weights) != len(vectors):
        raise ConfigurationError("weighted_sum needs equally many (>= 1) weights and vectors")
    first = np.asarray(vectors[0], dtype=np.float64)
    acc = float(weights[0]) * first
    for w, v in zip(weights[1:], vectors[1:]):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != first.shape:
            raise ConfigurationError(f"dimension mismatch: {v.shape} vs {first.shape}")
        acc = acc + float(w) * v
    return acc


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    The key is typically ``(purpose, client, round)``. PCG64 seeded through a
    SeedSequence spawn key yields identical sequences on every platform.
    """
    if seed < 0 or any(k < 0 for k in key):
        raise ConfigurationError("seed and stream keys must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
