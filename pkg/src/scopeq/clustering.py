"""K-means over embeddings and sharpened soft cluster assignment.

Soft assignment of an embedding e is r_k proportional to
(1 / (||e - c_k||^2 + epsilon))^alpha, normalized to sum to 1. The power
underflows doubles well before distances get interesting, so normalization
runs as a softmax over -alpha * log(d^2 + epsilon).
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InfeasibleClusteringError, ShapeMismatchError

__all__ = [
    "ClusterModel",
    "kmeans_fit",
    "soft_assign",
    "assign_stream",
    "hard_assign",
]


@dataclass(frozen=True)
class ClusterModel:
    centers: np.ndarray  # (k, dim)
    k: int
    alpha: float = 16.0
    epsilon: float = 1e-12

    def __post_init__(self):
        centers = np.ascontiguousarray(self.centers, dtype=float)
        if centers.ndim != 2:
            raise ShapeMismatchError("centers must be a (k, dim) array")
        if self.k != centers.shape[0] or self.k < 2:
            raise InfeasibleClusteringError(
                f"k={self.k} does not match {centers.shape[0]} centers (need k >= 2)"
            )
        if not np.all(np.isfinite(centers)):
            raise InfeasibleClusteringError("non-finite cluster center")
        if len(np.unique(centers, axis=0)) != self.k:
            raise InfeasibleClusteringError("cluster centers must be distinct")
        if self.alpha <= 0 or self.epsilon <= 0:
            raise InfeasibleClusteringError("alpha and epsilon must be positive")
        object.__setattr__(self, "centers", centers)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def _plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++: D^2-weighted draws."""
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total == 0.0:
            # All remaining mass sits on chosen centers; any point works.
            centers[j] = x[rng.integers(n)]
            continue
        centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _lloyd_run(x: np.ndarray, k: int, rng: np.random.Generator, max_iters: int, tol: float):
    centers = _plusplus_init(x, k, rng)
    trace = []
    for _ in range(max_iters):
        labels, sums, counts, inertia = _kernels.lloyd_iteration(x, centers)
        trace.append(float(inertia))
        new_centers = centers.copy()
        occupied = counts > 0
        new_centers[occupied] = sums[occupied] / counts[occupied, None]
        empty = np.flatnonzero(~occupied)
        if len(empty) > 0:
            dist = np.sum((x - centers[labels]) ** 2, axis=1)
            for c in empty:
                far = int(np.argmax(dist))
                new_centers[c] = x[far]
                dist[far] = -1.0
        shift = float(np.max(np.sqrt(np.sum((new_centers - centers) ** 2, axis=1))))
        centers = new_centers
        if shift < tol:
            break
    return centers, trace


def kmeans_fit(
    embeddings,
    k: int,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
    alpha: float = 16.0,
    epsilon: float = 1e-12,
    n_init: int = 10,
):
    """Best of n_init seeded k-means++ runs; returns (ClusterModel, trace).

    Each run records inertia at every assignment step, so the returned
    trace (of the lowest-final-inertia run; earlier run wins ties) is
    non-increasing. An empty cluster is re-seeded to the point farthest
    from its assigned center, farthest first when several empty out.
    """
    x = np.ascontiguousarray(embeddings, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        raise ShapeMismatchError("embeddings must be a nonempty (n, dim) array")
    if k < 2:
        raise InfeasibleClusteringError(f"k must be >= 2, got {k}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    if len(np.unique(x, axis=0)) < k:
        raise InfeasibleClusteringError(
            f"need at least {k} distinct embeddings, got {len(np.unique(x, axis=0))}"
        )

    best = None
    for run in range(n_init):
        rng = np.random.default_rng([seed, run])
        centers, trace = _lloyd_run(x, k, rng, max_iters, tol)
        if best is None or trace[-1] < best[1][-1]:
            best = (centers, trace)
    model = ClusterModel(centers=best[0], k=k, alpha=alpha, epsilon=epsilon)
    return model, best[1]


def _check_dim(x: np.ndarray, model: ClusterModel):
    if x.shape[-1] != model.dim:
        raise ShapeMismatchError(
            f"embedding dim {x.shape[-1]} does not match centers dim {model.dim}"
        )


def soft_assign(embedding, model: ClusterModel) -> np.ndarray:
    """Length-k assignment vector; positive components summing to 1."""
    e = np.ascontiguousarray(embedding, dtype=float)
    if e.ndim != 1:
        raise ShapeMismatchError("soft_assign expects a single embedding vector")
    _check_dim(e, model)
    r = _kernels.soft_assign_batch(e[None, :], model.centers, model.alpha, model.epsilon)
    return r[0]


def assign_stream(embeddings, model: ClusterModel) -> np.ndarray:
    """(n, k) soft assignments, one row per input embedding, order kept."""
    x = np.ascontiguousarray(embeddings, dtype=float)
    if x.size == 0:
        return np.empty((0, model.k))
    if x.ndim != 2:
        raise ShapeMismatchError("assign_stream expects an (n, dim) array")
    _check_dim(x, model)
    return _kernels.soft_assign_batch(x, model.centers, model.alpha, model.epsilon)


def hard_assign(embeddings, model: ClusterModel) -> np.ndarray:
    """Index of the nearest center per embedding (ties to the lowest)."""
    x = np.ascontiguousarray(embeddings, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatchError("hard_assign expects an (n, dim) array")
    _check_dim(x, model)
    labels, _, _, _ = _kernels.lloyd_iteration(x, model.centers)
    return labels
