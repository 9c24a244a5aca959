"""Numpy implementations of the hot kernels.

These are the reference implementations and the fallback used when the
compiled extension is unavailable. Both backends expose the same three
functions with identical semantics:

* ``soft_assign_batch``    sharpened inverse-square-distance cluster weights
* ``lloyd_iteration``      one assignment + accumulation pass of Lloyd's loop
* ``nt_xent_loss_grad``    contrastive pair loss and its analytic gradient

All inputs are float64 C-contiguous arrays; callers are responsible for
validation and layout.
"""

import numpy as np

# Rows per chunk when materializing (chunk, K, d) distance intermediates.
_CHUNK = 8192


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n, K), computed chunk-wise."""
    n = points.shape[0]
    k = centers.shape[0]
    out = np.empty((n, k))
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        diff = points[lo:hi, None, :] - centers[None, :, :]
        out[lo:hi] = np.einsum("mkd,mkd->mk", diff, diff)
    return out


def soft_assign_batch(
    emb: np.ndarray, centers: np.ndarray, alpha: float, eps: float
) -> np.ndarray:
    """Per-row cluster membership weights.

    Weight of center k is (1 / (||e - c_k||^2 + eps))^alpha, normalized to
    sum to 1. Computed in log space (softmax over -alpha * log(d^2 + eps))
    because the powered inverse underflows float64 already at moderate
    distances.
    """
    logits = -alpha * np.log(_sq_distances(emb, centers) + eps)
    logits -= logits.max(axis=1, keepdims=True)
    r = np.exp(logits)
    r /= r.sum(axis=1, keepdims=True)
    return r


def lloyd_iteration(
    points: np.ndarray, centers: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """One Lloyd pass: nearest-center labels, per-cluster sums and counts.

    Returns ``(labels, sums, counts, inertia)`` where inertia is the total
    squared distance of every point to its nearest center under the given
    centers. Ties go to the lowest center index. Means and empty-cluster
    policy are the caller's job.
    """
    k, d = centers.shape
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sums = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    inertia = 0.0
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        chunk = points[lo:hi]
        diff = chunk[:, None, :] - centers[None, :, :]
        d2 = np.einsum("mkd,mkd->mk", diff, diff)
        lab = np.argmin(d2, axis=1)
        labels[lo:hi] = lab
        inertia += float(d2[np.arange(hi - lo), lab].sum())
        np.add.at(sums, lab, chunk)
        counts += np.bincount(lab, minlength=k)
    return labels, sums, counts, inertia


def nt_xent_loss_grad(
    z1: np.ndarray, z2: np.ndarray, tau: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Contrastive loss over n paired views and its gradient.

    For pair i the loss is -log of exp(sim(z_i^1, z_i^2)/tau) over the sum of
    exp(sim(z_i^a, z_k^b)/tau) for every other pair k != i and all four view
    combinations (a, b). ``sim`` is cosine similarity. Returns the mean loss
    over pairs plus its gradient with respect to every input row.

    The denominator is evaluated with a per-pair log-sum-exp so arbitrarily
    small temperatures stay finite.
    """
    n = z1.shape[0]
    z = np.concatenate([z1, z2], axis=0)
    norms = np.sqrt(np.einsum("ij,ij->i", z, z))
    u = z / norms[:, None]
    logits = (u @ u.T) / tau

    off = ~np.eye(n, dtype=bool)
    neg_inf = -np.inf
    # Four (n, n) view blocks; own-pair column masked out of each.
    blocks = np.stack(
        [
            np.where(off, logits[:n, :n], neg_inf),
            np.where(off, logits[:n, n:], neg_inf),
            np.where(off, logits[n:, :n], neg_inf),
            np.where(off, logits[n:, n:], neg_inf),
        ]
    )
    m = blocks.max(axis=(0, 2))
    w = np.exp(blocks - m[None, :, None])
    denom = w.sum(axis=(0, 2))
    log_d = m + np.log(denom)
    pos = logits[np.arange(n), n + np.arange(n)]
    loss = float(np.mean(log_d - pos))

    # dL/dS: -coef at each positive-pair entry, coef * softmax-weight at every
    # denominator entry; then pull back through S = U U^T and row
    # normalization (which also removes the radial component exactly).
    coef = 1.0 / (n * tau)
    p = w / denom[None, :, None]
    g = np.zeros((2 * n, 2 * n))
    g[:n, :n] = p[0] * coef
    g[:n, n:] = p[1] * coef
    g[n:, :n] = p[2] * coef
    g[n:, n:] = p[3] * coef
    g[np.arange(n), n + np.arange(n)] -= coef
    du = (g + g.T) @ u
    radial = np.einsum("ij,ij->i", du, u)
    dz = (du - radial[:, None] * u) / norms[:, None]
    return loss, dz[:n], dz[n:]
