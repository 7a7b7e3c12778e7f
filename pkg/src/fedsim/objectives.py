"""Client-indexed loss families with exact and stochastic gradients.

Three families are provided:

* :class:`QuadraticObjective` -- ``F_i(x) = 1/2 (x - b_i)^T A_i (x - b_i)``
  with synthetic Gaussian gradient noise of total variance ``sigma**2``.
* :class:`LogisticObjective` -- l2-regularized logistic regression on each
  client's local samples; stochastic gradients are uniformly sampled
  mini-batches.
* :class:`LinearToyObjective` -- a two-parameter line fit (slope, intercept)
  under mean squared error, with the same Gaussian noise model as the
  quadratic family.

Every family exposes ``loss``, ``exact_gradient`` and ``stochastic_gradient``
per client, plus the regularity constants ``smoothness`` (L),
``strong_convexity`` (mu) and ``sigma``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError
from .numeric import weighted_sum

WEIGHT_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class QuadraticClient:
    curvature: np.ndarray
    center: np.ndarray


@dataclass(frozen=True)
class LogisticClient:
    features: np.ndarray
    labels: np.ndarray
    l2_reg: float = 1e-3


@dataclass(frozen=True)
class LinearToyClient:
    slope: float
    intercept: float
    xs: np.ndarray
    ys: np.ndarray


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def check_weights(weights: Sequence[float], num_clients: int | None = None) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ConfigurationError("weights must be a non-empty 1-D sequence")
    if num_clients is not None and w.size != num_clients:
        raise ConfigurationError(f"expected {num_clients} weights, got {w.size}")
    if np.any(w < 0):
        raise ConfigurationError("weights must be non-negative")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ConfigurationError(f"weights must sum to 1 (got {w.sum():.12g})")
    return w


class Objective:
    """Common surface of the loss families."""

    kind: str = "abstract"
    clients: tuple
    dim: int
    sigma: float

    @property
    def num_clients(self) -> int:
        return len(self.clients)

    @property
    def deterministic(self) -> bool:
        """True when stochastic gradients are exact, so no random stream is consumed."""
        return self.sigma == 0.0

    def _client(self, client: int):
        if not isinstance(client, (int, np.integer)) or not 0 <= client < len(self.clients):
            raise ConfigurationError(f"unknown client id {client!r}")
        return self.clients[client]

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ConfigurationError(f"expected a vector of dimension {self.dim}, got shape {x.shape}")
        return x

    def loss(self, client: int, x) -> float:
        raise NotImplementedError

    def exact_gradient(self, client: int, x) -> np.ndarray:
        raise NotImplementedError

    def stochastic_gradient(self, client: int, x, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sampler(self, client: int, rng: np.random.Generator):
        """Callable ``x -> stochastic_gradient(client, x, rng)`` with validation hoisted out of the loop."""
        self._client(client)
        return lambda x: self.stochastic_gradient(client, x, rng)

    def _gaussian_noise_gradient(self, client, x, rng):
        g = self.exact_gradient(client, x)
        if self.sigma == 0.0:
            return g
        return g + rng.standard_normal(self.dim) * (self.sigma / np.sqrt(self.dim))

    def global_loss(self, weights, x) -> float:
        return global_objective(self, weights, x)

    def global_gradient(self, weights, x) -> np.ndarray:
        w = check_weights(weights, self.num_clients)
        return weighted_sum(w, [self.exact_gradient(i, x) for i in range(self.num_clients)])

    def dissimilarity(self, weights, x) -> float:
        """Measured ``max_i ||grad F_i(x)||^2 / ||grad F(x)||^2`` (the squared B)."""
        full = self.global_gradient(weights, x)
        denom = float(full @ full)
        if denom <= 0.0:
            raise ConfigurationError("dissimilarity is undefined where the global gradient vanishes")
        return max(float(g @ g) for g in (self.exact_gradient(i, x) for i in range(self.num_clients))) / denom


def global_objective(spec: Objective, weights, x) -> float:
    """``F(x) = sum_i w_i F_i(x)``; the weights must sum to one."""
    w = check_weights(weights, spec.num_clients)
    return float(sum(wi * spec.loss(i, x) for i, wi in enumerate(w)))


class QuadraticObjective(Objective):
    kind = "quadratic"

    def __init__(self, curvatures, centers, sigma: float = 0.0):
        if len(curvatures) != len(centers) or len(centers) == 0:
            raise ConfigurationError("need one curvature matrix per center, at least one client")
        if sigma < 0:
            raise ConfigurationError("sigma must be >= 0")
        clients = []
        dim = None
        for a, b in zip(curvatures, centers):
            b = _readonly(b).reshape(-1)
            a = _readonly(np.atleast_2d(a))
            if dim is None:
                dim = b.size
            if b.size != dim or a.shape != (dim, dim):
                raise ConfigurationError("inconsistent dimensions across quadratic clients")
            if not np.allclose(a, a.T, rtol=0, atol=1e-12):
                raise ConfigurationError("curvature matrices must be symmetric")
            clients.append(QuadraticClient(a, b))
        self.clients = tuple(clients)
        self.dim = dim
        self.sigma = float(sigma)
        eigs = [np.linalg.eigvalsh(c.curvature) for c in self.clients]
        if min(e[0] for e in eigs) <= 0:
            raise ConfigurationError("curvature matrices must be positive definite")
        self.smoothness = float(max(e[-1] for e in eigs))
        self.strong_convexity = float(min(e[0] for e in eigs))

    @classmethod
    def identity(cls, centers, sigma: float = 0.0) -> "QuadraticObjective":
        centers = [np.atleast_1d(np.asarray(b, dtype=np.float64)) for b in centers]
        d = centers[0].size
        return cls([np.eye(d)] * len(centers), centers, sigma=sigma)

    def loss(self, client, x) -> float:
        c = self._client(client)
        r = self._check_x(x) - c.center
        return 0.5 * float(r @ (c.curvature @ r))

    def exact_gradient(self, client, x) -> np.ndarray:
        c = self._client(client)
        return c.curvature @ (self._check_x(x) - c.center)

    def stochastic_gradient(self, client, x, rng) -> np.ndarray:
        return self._gaussian_noise_gradient(client, x, rng)

    def sampler(self, client, rng):
        c = self._client(client)
        A, b = c.curvature, c.center
        if self.sigma == 0.0:
            return lambda x: A @ (x - b)
        d, scale = self.dim, self.sigma / np.sqrt(self.dim)
        return lambda x: A @ (x - b) + rng.standard_normal(d) * scale


class LogisticObjective(Objective):
    """Per-client ``mean_j log(1 + exp(-y_j a_j^T w)) + l2_reg/2 ||w||^2``."""

    kind = "logistic"

    def __init__(self, clients: Sequence[LogisticClient], batch_size: int = 20):
        if len(clients) == 0:
            raise ConfigurationError("need at least one client")
        if batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        dim = clients[0].features.shape[1]
        checked = []
        for c in clients:
            X = _readonly(c.features)
            y = _readonly(c.labels)
            if X.ndim != 2 or X.shape[1] != dim or X.shape[0] != y.size or y.size == 0:
                raise ConfigurationError("inconsistent logistic client shapes")
            if not np.all(np.isin(y, (-1.0, 1.0))):
                raise ConfigurationError("logistic labels must be -1 or +1")
            if c.l2_reg < 0:
                raise ConfigurationError("l2_reg must be >= 0")
            checked.append(LogisticClient(X, y, float(c.l2_reg)))
        self.clients = tuple(checked)
        self.dim = dim
        self.batch_size = int(batch_size)
        # sigmoid' <= 1/4 bounds the data term's Hessian by X^T X / (4 n)
        self.smoothness = float(
            max(np.linalg.eigvalsh(c.features.T @ c.features)[-1] / (4 * c.labels.size) + c.l2_reg for c in self.clients)
        )
        self.strong_convexity = float(min(c.l2_reg for c in self.clients))
        # Upper bound on the mini-batch gradient's std: per-sample data-term
        # gradients have norm <= ||a_j||, the regularizer cancels.
        bounds = []
        for c in self.clients:
            if self.batch_size >= c.labels.size:
                bounds.append(0.0)
            else:
                bounds.append(float(np.max(np.linalg.norm(c.features, axis=1))) / np.sqrt(self.batch_size))
        self.sigma = max(bounds)

    @property
    def deterministic(self) -> bool:
        return all(self.batch_size >= c.labels.size for c in self.clients)

    @classmethod
    def from_dataset(cls, dataset, partition, l2_reg: float = 1e-3, batch_size: int = 20) -> "LogisticObjective":
        X = dataset.dense()
        y = np.asarray(dataset.labels, dtype=np.float64)
        clients = [LogisticClient(X[idx], y[idx], l2_reg) for idx in partition.assignment]
        return cls(clients, batch_size=batch_size)

    def _margins(self, c, x, idx=None):
        X = c.features if idx is None else c.features[idx]
        y = c.labels if idx is None else c.labels[idx]
        return X, y, y * (X @ x)

    def loss(self, client, x) -> float:
        c = self._client(client)
        x = self._check_x(x)
        _, _, m = self._margins(c, x)
        return float(np.mean(np.logaddexp(0.0, -m)) + 0.5 * c.l2_reg * float(x @ x))

    def _batch_gradient(self, c, x, idx=None):
        X, y, m = self._margins(c, x, idx)
        return -(X.T @ (y * expit(-m))) / y.size + c.l2_reg * x

    def exact_gradient(self, client, x) -> np.ndarray:
        c = self._client(client)
        return self._batch_gradient(c, self._check_x(x))

    def stochastic_gradient(self, client, x, rng) -> np.ndarray:
        c = self._client(client)
        x = self._check_x(x)
        n = c.labels.size
        if self.batch_size >= n:
            return self._batch_gradient(c, x)
        idx = rng.choice(n, size=self.batch_size, replace=False)
        return self._batch_gradient(c, x, idx)


class LinearToyObjective(Objective):
    """Fit ``y = slope * x + intercept``; parameters are ``(slope, intercept)``."""

    kind = "lineartoy"

    def __init__(self, clients: Sequence[LinearToyClient], sigma: float = 0.0):
        if len(clients) == 0:
            raise ConfigurationError("need at least one client")
        if sigma < 0:
            raise ConfigurationError("sigma must be >= 0")
        checked = []
        for c in clients:
            xs, ys = _readonly(c.xs).reshape(-1), _readonly(c.ys).reshape(-1)
            if xs.size == 0 or xs.size != ys.size:
                raise ConfigurationError("each toy client needs matching, non-empty xs and ys")
            checked.append(LinearToyClient(float(c.slope), float(c.intercept), xs, ys))
        self.clients = tuple(checked)
        self.dim = 2
        self.sigma = float(sigma)
        eigs = [np.linalg.eigvalsh(self._hessian(c)) for c in self.clients]
        self.smoothness = float(max(e[-1] for e in eigs))
        self.strong_convexity = float(min(e[0] for e in eigs))

    @staticmethod
    def _hessian(c) -> np.ndarray:
        n = c.xs.size
        return (2.0 / n) * np.array([[c.xs @ c.xs, c.xs.sum()], [c.xs.sum(), n]])

    def _residual(self, c, x):
        return x[0] * c.xs + x[1] - c.ys

    def loss(self, client, x) -> float:
        c = self._client(client)
        r = self._residual(c, self._check_x(x))
        return float(np.mean(r * r))

    def exact_gradient(self, client, x) -> np.ndarray:
        c = self._client(client)
        r = self._residual(c, self._check_x(x))
        n = r.size
        return np.array([2.0 * (r @ c.xs) / n, 2.0 * r.sum() / n])

    def stochastic_gradient(self, client, x, rng) -> np.ndarray:
        return self._gaussian_noise_gradient(client, x, rng)


def random_spd(dim: int, low: float, high: float, rng: np.random.Generator) -> np.ndarray:
    """Random symmetric matrix with eigenvalues uniform in ``[low, high]``; one of each endpoint is pinned."""
    if dim == 1:
        return np.array([[rng.uniform(low, high)]])
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = rng.uniform(low, high, size=dim)
    eig[0], eig[-1] = low, high
    return (q * eig) @ q.T


def make_quadratic_suite(num_clients: int, dim: int, rng: np.random.Generator, *, mu: float = 0.1,
                         L: float = 1.0, center_scale: float = 5.0, sigma: float = 0.0) -> QuadraticObjective:
    """Heterogeneous strongly convex quadratics with random curvature and centers."""
    if num_clients < 1 or dim < 1:
        raise ConfigurationError("num_clients and dim must be >= 1")
    if not 0 < mu <= L:
        raise ConfigurationError("need 0 < mu <= L")
    curvatures = [random_spd(dim, mu, L, rng) for _ in range(num_clients)]
    curvatures = [(a + a.T) / 2 for a in curvatures]
    centers = [rng.normal(0.0, center_scale, size=dim) for _ in range(num_clients)]
    return QuadraticObjective(curvatures, centers, sigma=sigma)


def make_linear_toy(num_clients: int, points_per_client: int, rng: np.random.Generator, *,
                    jitter: float = 0.5, sigma: float = 0.0) -> LinearToyObjective:
    """Each client's points fluctuate around its own line ``y = a_i x + b_i``."""
    if num_clients < 1 or points_per_client < 2:
        raise ConfigurationError("need >= 1 client and >= 2 points per client")
    clients = []
    for _ in range(num_clients):
        a, b = rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)
        xs = rng.uniform(-1.0, 1.0, size=points_per_client)
        ys = a * xs + b + rng.normal(0.0, jitter, size=points_per_client)
        clients.append(LinearToyClient(a, b, xs, ys))
    return LinearToyObjective(clients, sigma=sigma)
