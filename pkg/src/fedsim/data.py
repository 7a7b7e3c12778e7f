"""LIBSVM ingestion and non-i.i.d. client partitioning."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ParseError

BUNDLED_DATASET = "a9a_desk.libsvm"


@dataclass(frozen=True)
class Dataset:
    """Sparse samples with 0-based feature indices.

    ``samples[j]`` is ``(features, label)`` where ``features`` is a tuple of
    ``(index, value)`` pairs with strictly increasing indices.
    """

    samples: tuple
    d: int
    label_set: tuple = field(default=())

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> list:
        return [label for _, label in self.samples]

    def dense(self) -> np.ndarray:
        X = np.zeros((self.n, self.d))
        for j, (feats, _) in enumerate(self.samples):
            for idx, val in feats:
                X[j, idx] = val
        return X


def _parse_number(token, lineno, what):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"non-numeric {what} {token!r}", lineno) from None


def parse_libsvm(text) -> Dataset:
    """Parse LIBSVM text (``label idx:val ...`` with 1-based indices).

    Binary label sets are normalized to ``{-1, +1}`` (smaller value maps to -1);
    other labels are kept as integers where integral.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii")
    raw = []
    max_index = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        label = _parse_number(tokens[0], lineno, "label")
        feats = []
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep or not idx_s or not val_s:
                raise ParseError(f"malformed token {tok!r}", lineno)
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(f"non-integer feature index {idx_s!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"feature index {idx} must be >= 1", lineno)
            if idx <= prev:
                raise ParseError("non-increasing feature index", lineno)
            prev = idx
            val = _parse_number(val_s, lineno, "value")
            if not np.isfinite(val):
                raise ParseError(f"non-finite value {val_s!r}", lineno)
            feats.append((idx - 1, val))
        max_index = max(max_index, prev)
        raw.append((tuple(feats), label))
    if not raw:
        raise ParseError("empty dataset")

    distinct = sorted({label for _, label in raw})
    if len(distinct) == 2:
        mapping = {distinct[0]: -1, distinct[1]: 1}
    else:
        mapping = {v: int(v) if float(v).is_integer() else v for v in distinct}
    samples = tuple((feats, mapping[label]) for feats, label in raw)
    return Dataset(samples=samples, d=max_index, label_set=tuple(sorted(set(mapping.values()))))


def serialize_libsvm(dataset: Dataset) -> str:
    """Inverse of :func:`parse_libsvm` (values written with ``repr`` so they round-trip)."""
    lines = []
    for feats, label in dataset.samples:
        head = f"+{label}" if isinstance(label, (int, np.integer)) and label > 0 else f"{label}"
        body = " ".join(f"{idx + 1}:{val!r}" for idx, val in feats)
        lines.append(f"{head} {body}".rstrip())
    return "\n".join(lines) + "\n"


def load_libsvm(path) -> Dataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh.read())


def load_bundled() -> Dataset:
    """The synthetic a9a-shaped sample shipped with the package (200 rows, 123 features)."""
    return parse_libsvm(resources.files("fedsim.resources").joinpath(BUNDLED_DATASET).read_bytes())


@dataclass(frozen=True)
class Partition:
    """Disjoint, exhaustive assignment of sample indices to clients."""

    assignment: tuple

    @property
    def num_clients(self) -> int:
        return len(self.assignment)

    @property
    def n(self) -> int:
        return int(sum(len(a) for a in self.assignment))

    @property
    def weights(self) -> np.ndarray:
        sizes = np.array([len(a) for a in self.assignment], dtype=np.float64)
        return sizes / sizes.sum()

    def validate(self, n: int | None = None) -> None:
        """Raise :class:`ConfigurationError` unless the partition is disjoint, exhaustive and non-empty."""
        total = self.n if n is None else n
        seen = np.concatenate([np.asarray(a, dtype=np.int64) for a in self.assignment])
        if any(len(a) == 0 for a in self.assignment):
            raise ConfigurationError("partition has an empty client")
        if seen.size != total or not np.array_equal(np.sort(seen), np.arange(total)):
            raise ConfigurationError("partition is not a disjoint cover of all samples")


def _freeze(lists) -> Partition:
    return Partition(tuple(np.sort(np.asarray(a, dtype=np.int64)) for a in lists))


def uniform_partition(num_clients: int) -> Partition:
    """One pseudo-sample per client: equal weights for objectives without data (quadratics)."""
    return Partition(tuple(np.array([i], dtype=np.int64) for i in range(num_clients)))


def partition_iid(n: int, num_clients: int, rng: np.random.Generator) -> Partition:
    if not 1 <= num_clients <= n:
        raise ConfigurationError(f"need 1 <= clients ({num_clients}) <= samples ({n})")
    return _freeze(np.array_split(rng.permutation(n), num_clients))


def partition_dirichlet(labels: Sequence, alpha: float, num_clients: int, rng: np.random.Generator) -> Partition:
    """Per-class Dirichlet(alpha) proportions, multinomial split of each class.

    A client left empty receives one sample taken from the currently largest
    client, repeated until every client holds data.
    """
    labels = np.asarray(labels)
    n = labels.size
    if alpha <= 0:
        raise ConfigurationError("alpha must be > 0")
    if num_clients < 1:
        raise ConfigurationError("need at least one client")
    if num_clients > n:
        raise ConfigurationError(f"more clients ({num_clients}) than samples ({n})")
    buckets = [[] for _ in range(num_clients)]
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        p = rng.dirichlet(np.full(num_clients, float(alpha)))
        counts = rng.multinomial(members.size, p)
        start = 0
        for i, c in enumerate(counts):
            buckets[i].extend(members[start:start + c].tolist())
            start += c
    for i in range(num_clients):
        if not buckets[i]:
            donor = max(range(num_clients), key=lambda j: (len(buckets[j]), -j))
            buckets[i].append(buckets[donor].pop())
    return _freeze(buckets)


def partition_shard(labels: Sequence, classes_per_client: int, num_clients: int,
                    rng: np.random.Generator) -> Partition:
    """Label-sorted shards, ``classes_per_client`` shards dealt to each client.

    Every shard holds a single label: the ``num_clients * classes_per_client``
    shards are apportioned to classes by size (largest remainder, at least one
    per class) and each class is cut into near-equal pieces. With balanced,
    evenly divisible classes all shards, and hence all clients, are the same
    size.
    """
    labels = np.asarray(labels)
    n = labels.size
    classes = np.unique(labels)
    if classes.size < 1:
        raise ConfigurationError("need at least one class")
    if classes_per_client < 1 or num_clients < 1:
        raise ConfigurationError("classes_per_client and clients must be >= 1")
    num_shards = num_clients * classes_per_client
    if num_shards < classes.size:
        raise ConfigurationError(
            f"{num_shards} shards cannot cover {classes.size} classes; raise clients or classes_per_client")
    if num_shards > n:
        raise ConfigurationError(f"{num_shards} shards need at least as many samples (have {n})")

    order = np.argsort(labels, kind="stable")
    sizes = np.array([np.count_nonzero(labels == c) for c in classes])
    # largest-remainder apportionment with a floor of one shard per class
    quota = sizes / n * num_shards
    alloc = np.maximum(1, np.floor(quota).astype(int))
    while alloc.sum() > num_shards:
        j = np.argmax(np.where(alloc > 1, alloc - quota, -np.inf))
        alloc[j] -= 1
    while alloc.sum() < num_shards:
        room = np.where(alloc < sizes, quota - alloc, -np.inf)
        alloc[np.argmax(room)] += 1

    shards = []
    start = 0
    for size, k in zip(sizes, alloc):
        shards.extend(np.array_split(order[start:start + size], k))
        start += size
    dealt = rng.permutation(num_shards)
    buckets = [np.concatenate([shards[s] for s in dealt[i::num_clients]]) for i in range(num_clients)]
    return _freeze(buckets)
