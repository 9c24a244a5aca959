"""Contrastive batch loss over projected view pairs.

Conventions, fixed throughout:
  * A batch is N pairs (z_i_1, z_i_2), the two augmented views of frame i.
  * One loss term per frame. The numerator is exp(sim(z_i_1, z_i_2)/tau);
    the denominator sums exp(sim(z_i_a, z_k_b)/tau) over all k != i and
    both view indices a, b, so it has 4(N-1) terms and excludes the
    positive pair itself.
  * The scalar training loss is the mean of the N per-frame terms.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .augment import AugmentConfig
from .errors import DegenerateInputError, UndefinedLossError
from .optim import AdamConfig

__all__ = [
    "ContrastiveConfig",
    "cosine_similarity",
    "nt_xent_loss",
    "nt_xent_grad",
    "nt_xent_loss_and_grad",
]


@dataclass(frozen=True)
class ContrastiveConfig:
    temperature: float = 0.5
    batch_size: int = 16
    epochs: int = 50
    adam: AdamConfig = field(default_factory=AdamConfig)
    augmentation: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (denominator is empty for N=1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise DegenerateInputError(f"expected equal-length vectors, got {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInputError("cosine similarity undefined for zero-norm input")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _stack_pairs(projected_pairs):
    try:
        z1 = np.ascontiguousarray([np.asarray(a, dtype=float) for a, _ in projected_pairs])
        z2 = np.ascontiguousarray([np.asarray(b, dtype=float) for _, b in projected_pairs])
    except ValueError as exc:
        raise DegenerateInputError(f"all projected vectors must share one length: {exc}") from exc
    if len(z1) < 2:
        raise UndefinedLossError("need at least 2 pairs; denominator is empty for one")
    if z1.ndim != 2 or z1.shape != z2.shape:
        raise DegenerateInputError("all projected vectors must share one length")
    if np.any(np.linalg.norm(z1, axis=1) == 0.0) or np.any(np.linalg.norm(z2, axis=1) == 0.0):
        raise DegenerateInputError("zero-norm projected vector in batch")
    return z1, z2


def _check_tau(tau: float):
    if tau <= 0:
        raise ValueError("temperature must be positive")


def nt_xent_loss(projected_pairs, tau: float) -> float:
    """Batch-mean contrastive loss over the given view pairs."""
    z1, z2 = _stack_pairs(projected_pairs)
    _check_tau(tau)
    loss, _, _ = _kernels.nt_xent_loss_grad(z1, z2, tau)
    return float(loss)


def nt_xent_grad(projected_pairs, tau: float):
    """Gradients of the batch-mean loss.

    Returns (g1, g2): g1[i] is the gradient with respect to z_i_1 and g2[i]
    with respect to z_i_2, stacked as (N, d) arrays.
    """
    z1, z2 = _stack_pairs(projected_pairs)
    _check_tau(tau)
    _, g1, g2 = _kernels.nt_xent_loss_grad(z1, z2, tau)
    return g1, g2


def nt_xent_loss_and_grad(z1: np.ndarray, z2: np.ndarray, tau: float):
    """Loss and both gradient stacks in one pass over pre-stacked views."""
    z1 = np.ascontiguousarray(z1, dtype=float)
    z2 = np.ascontiguousarray(z2, dtype=float)
    if len(z1) < 2:
        raise UndefinedLossError("need at least 2 pairs; denominator is empty for one")
    if z1.shape != z2.shape or z1.ndim != 2:
        raise DegenerateInputError("view stacks must be equal-shape (N, d) arrays")
    if np.any(np.linalg.norm(z1, axis=1) == 0.0) or np.any(np.linalg.norm(z2, axis=1) == 0.0):
        raise DegenerateInputError("zero-norm projected vector in batch")
    _check_tau(tau)
    loss, g1, g2 = _kernels.nt_xent_loss_grad(z1, z2, tau)
    return float(loss), g1, g2
