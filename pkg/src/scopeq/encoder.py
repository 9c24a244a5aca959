"""Small MLP encoder plus projection head, trained contrastively.

The embedding used downstream is the encoder output alone; the projection
head exists only inside the training loss. Weights are stored row-major as
(out_dim, in_dim) matrices so a layer computes act(W x + b).
"""

from dataclasses import dataclass, field

import numpy as np

from .augment import augment
from .contrastive import ContrastiveConfig, nt_xent_loss_and_grad
from .errors import DegenerateInputError, DivergenceError, ShapeMismatchError
from .optim import adam_init, adam_step
from .records import FrameTensor

__all__ = [
    "DenseLayer",
    "EncoderParams",
    "encoder_init",
    "encoder_forward",
    "embed_batch",
    "encoder_input_jacobian",
    "train_encoder",
]

_ACTIVATIONS = {
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
}


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "identity"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ShapeMismatchError(f"layer shapes {w.shape} / {b.shape} do not chain")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


def _check_chain(layers, first_in=None):
    prev = first_in
    for layer in layers:
        if prev is not None and layer.in_dim != prev:
            raise ShapeMismatchError(
                f"layer expects input {layer.in_dim}, previous produces {prev}"
            )
        prev = layer.out_dim
    return prev


@dataclass(frozen=True)
class EncoderParams:
    encoder_layers: list
    projection_layers: list
    embed_dim: int

    def __post_init__(self):
        if not self.encoder_layers:
            raise ShapeMismatchError("encoder needs at least one layer")
        if len(self.projection_layers) != 2:
            raise ShapeMismatchError("projection head must have exactly one hidden layer")
        out = _check_chain(self.encoder_layers)
        if out != self.embed_dim:
            raise ShapeMismatchError(
                f"encoder produces {out}, embed_dim says {self.embed_dim}"
            )
        _check_chain(self.projection_layers, first_in=self.embed_dim)

    @property
    def input_dim(self) -> int:
        return self.encoder_layers[0].in_dim


def encoder_init(
    input_dim: int,
    hidden_dims=(32,),
    embed_dim: int = 16,
    proj_hidden_dim: int = 16,
    proj_dim: int = 16,
    activation: str = "tanh",
    seed: int = 0,
) -> EncoderParams:
    """Random params: normal weights scaled by 1/sqrt(fan-in), zero bias.

    Hidden layers use the given activation; the final encoder layer and the
    final projection layer are linear.
    """
    rng = np.random.default_rng([seed, 0])

    def layer(n_in, n_out, act):
        w = rng.normal(0.0, 1.0 / np.sqrt(n_in), (n_out, n_in))
        return DenseLayer(weights=w, bias=np.zeros(n_out), activation=act)

    dims = [input_dim, *hidden_dims, embed_dim]
    enc = [
        layer(dims[i], dims[i + 1], activation if i < len(dims) - 2 else "identity")
        for i in range(len(dims) - 1)
    ]
    proj = [
        layer(embed_dim, proj_hidden_dim, activation),
        layer(proj_hidden_dim, proj_dim, "identity"),
    ]
    return EncoderParams(encoder_layers=enc, projection_layers=proj, embed_dim=embed_dim)


def _as_input(params: EncoderParams, frame) -> np.ndarray:
    x = frame.flat if isinstance(frame, FrameTensor) else np.asarray(frame, dtype=float).reshape(-1)
    if x.size != params.input_dim:
        raise ShapeMismatchError(
            f"frame has {x.size} values, encoder expects {params.input_dim}"
        )
    return x


def _forward_stack(layers, x: np.ndarray):
    """Batched forward; returns output and per-layer (input, pre-activation)."""
    caches = []
    for layer in layers:
        z = x @ layer.weights.T + layer.bias
        caches.append((x, z))
        x = _ACTIVATIONS[layer.activation][0](z)
    return x, caches


def _backward_stack(layers, caches, d_out: np.ndarray):
    """Gradients for each layer plus the gradient at the stack input."""
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        x_in, z = caches[i]
        dz = d_out * _ACTIVATIONS[layers[i].activation][1](z)
        grads[i] = (dz.T @ x_in, dz.sum(axis=0))
        d_out = dz @ layers[i].weights
    return grads, d_out


def encoder_forward(params: EncoderParams, frame) -> np.ndarray:
    """Embedding of one frame; the projection head is not applied."""
    x = _as_input(params, frame)
    out, _ = _forward_stack(params.encoder_layers, x[None, :])
    return out[0]


def embed_batch(params: EncoderParams, frames) -> np.ndarray:
    x = np.stack([_as_input(params, f) for f in frames])
    out, _ = _forward_stack(params.encoder_layers, x)
    return out


def encoder_input_jacobian(params: EncoderParams, frame) -> np.ndarray:
    """(embed_dim, input_dim) Jacobian of encoder_forward at the frame."""
    x = _as_input(params, frame)
    jac = np.eye(x.size)
    for layer in params.encoder_layers:
        z = layer.weights @ x + layer.bias
        jac = (_ACTIVATIONS[layer.activation][1](z)[:, None] * layer.weights) @ jac
        x = _ACTIVATIONS[layer.activation][0](z)
    return jac


def _params_to_list(params: EncoderParams):
    out = []
    for layer in [*params.encoder_layers, *params.projection_layers]:
        out.append(layer.weights)
        out.append(layer.bias)
    return out


def _list_to_params(values, template: EncoderParams) -> EncoderParams:
    it = iter(values)
    n_enc = len(template.encoder_layers)
    layers = [
        DenseLayer(weights=next(it), bias=next(it), activation=l.activation)
        for l in [*template.encoder_layers, *template.projection_layers]
    ]
    return EncoderParams(
        encoder_layers=layers[:n_enc],
        projection_layers=layers[n_enc:],
        embed_dim=template.embed_dim,
    )


def batch_loss_and_grads(params: EncoderParams, x1: np.ndarray, x2: np.ndarray, tau: float):
    """Contrastive loss of one batch and its gradient for every weight/bias.

    x1 and x2 hold the two augmented views, row-aligned. The gradient list
    is ordered like _params_to_list.
    """
    enc = params.encoder_layers
    proj = params.projection_layers
    h1, enc_c1 = _forward_stack(enc, x1)
    h2, enc_c2 = _forward_stack(enc, x2)
    z1, proj_c1 = _forward_stack(proj, h1)
    z2, proj_c2 = _forward_stack(proj, h2)
    loss, gz1, gz2 = nt_xent_loss_and_grad(z1, z2, tau)
    proj_g1, dh1 = _backward_stack(proj, proj_c1, gz1)
    proj_g2, dh2 = _backward_stack(proj, proj_c2, gz2)
    enc_g1, _ = _backward_stack(enc, enc_c1, dh1)
    enc_g2, _ = _backward_stack(enc, enc_c2, dh2)
    grads = []
    for g1, g2 in [*zip(enc_g1, enc_g2), *zip(proj_g1, proj_g2)]:
        grads.append(g1[0] + g2[0])
        grads.append(g1[1] + g2[1])
    return loss, grads


def train_encoder(frames, cfg: ContrastiveConfig, params: EncoderParams | None = None):
    """Contrastive training; returns (final params, per-epoch mean loss).

    Each frame is augmented twice up front and the shuffled batch partition
    is fixed, then replayed every epoch. That keeps the run bit-reproducible
    under one seed and makes a zero learning rate yield a constant trace.
    """
    frames = list(frames)
    if len(frames) < 2 * cfg.batch_size:
        raise DegenerateInputError(
            f"need at least {2 * cfg.batch_size} frames, got {len(frames)}"
        )
    frames = [f if isinstance(f, FrameTensor) else FrameTensor(np.asarray(f, dtype=float)) for f in frames]
    if params is None:
        params = encoder_init(frames[0].flat.size, seed=cfg.seed)

    rng_aug = np.random.default_rng([cfg.seed, 1])
    x1 = np.stack([_as_input(params, augment(f, cfg.augmentation, rng_aug)) for f in frames])
    x2 = np.stack([_as_input(params, augment(f, cfg.augmentation, rng_aug)) for f in frames])

    rng_shuffle = np.random.default_rng([cfg.seed, 2])
    perm = rng_shuffle.permutation(len(frames))
    batches = [
        perm[i : i + cfg.batch_size]
        for i in range(0, len(perm), cfg.batch_size)
    ]
    # A trailing remainder of one frame cannot form a loss term; drop it.
    batches = [b for b in batches if len(b) >= 2]

    state = adam_init(_params_to_list(params))
    trace = []
    for epoch in range(cfg.epochs):
        total = 0.0
        count = 0
        for idx in batches:
            current = _list_to_params(state.params, params)
            loss, grads = batch_loss_and_grads(current, x1[idx], x2[idx], cfg.temperature)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            state = adam_step(state, grads, cfg.adam)
            total += loss * len(idx)
            count += len(idx)
        trace.append(total / count)
    return _list_to_params(state.params, params), trace
