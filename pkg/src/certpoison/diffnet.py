"""Small dense networks with exact first-order gradients.

A model is a flat parameter vector (per layer: row-major weight matrix, then
bias vector) plus a NetworkSpec describing layer shapes, so optimizers and the
bilevel solver can treat models as points in R^V. Backprop is hand rolled;
curvature is only ever accessed through central finite differences of
gradients (`hvp`), which keeps the module free of autodiff machinery.

All operations are pure given explicit inputs and safe to call concurrently
on shared parameter vectors; new values are always returned, never written in
place.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .rng import child_rng

RELU = "relu"
IDENTITY = "identity"
CROSS_ENTROPY = "cross_entropy"

VV = "vv"  # differentiate the parameter gradient along a parameter direction
UV = "uv"  # differentiate the input gradient along a parameter direction


@dataclass(frozen=True)
class NetworkSpec:
    """Dense-net shape: (input dim, hidden widths..., class count)."""

    layer_sizes: tuple
    activation: str = RELU
    init_seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ContractViolationError("layer_sizes needs input and output entries")
        if any(s <= 0 for s in sizes):
            raise ContractViolationError("layer sizes must be positive")
        if sizes[-1] < 2:
            raise ContractViolationError("need at least two output classes")
        if self.activation not in (RELU, IDENTITY):
            raise ContractViolationError(f"unknown activation {self.activation!r}")

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def num_classes(self):
        return self.layer_sizes[-1]

    @property
    def num_params(self):
        return sum(fi * fo + fo for fi, fo in _layer_pairs(self))


@functools.lru_cache(maxsize=None)
def _layer_pairs(spec):
    return tuple(zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]))


@functools.lru_cache(maxsize=None)
def _layer_slices(spec):
    """(weight slice, bias slice, fan_in, fan_out) per layer into the flat vector."""
    out = []
    pos = 0
    for fi, fo in _layer_pairs(spec):
        w = slice(pos, pos + fi * fo)
        pos += fi * fo
        b = slice(pos, pos + fo)
        pos += fo
        out.append((w, b, fi, fo))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def weight_mask(spec):
    """Boolean mask over the flat vector selecting weight (non-bias) entries."""
    mask = np.zeros(spec.num_params, dtype=bool)
    for w, _, _, _ in _layer_slices(spec):
        mask[w] = True
    mask.setflags(write=False)
    return mask


@dataclass
class ModelParams:
    """Flat parameter vector bound to its NetworkSpec."""

    flat: np.ndarray
    spec: NetworkSpec

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=float).ravel()
        if flat.size != self.spec.num_params:
            raise ContractViolationError(
                f"flat vector has {flat.size} entries, spec needs {self.spec.num_params}"
            )
        if not np.all(np.isfinite(flat)):
            raise ContractViolationError("parameters must be finite")
        self.flat = flat

    def layers(self):
        """(W, b) views into the flat vector, in layer order."""
        return [
            (self.flat[w].reshape(fi, fo), self.flat[b])
            for w, b, fi, fo in _layer_slices(self.spec)
        ]

    def with_flat(self, flat):
        return ModelParams(flat, self.spec)


@dataclass
class Batch:
    """Feature matrix (rows = samples) with integer labels."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=int).ravel()
        if x.ndim != 2:
            raise ContractViolationError("x must be a 2-D matrix")
        if x.shape[0] != y.size:
            raise ContractViolationError("x rows and label count differ")
        if not np.all(np.isfinite(x)):
            raise ContractViolationError("features must be finite (no NaN/Inf)")
        if y.size and y.min() < 0:
            raise ContractViolationError("labels must be nonnegative")
        self.x = x
        self.y = y

    def __len__(self):
        return self.y.size

    def subset(self, idx):
        return Batch(self.x[idx], self.y[idx])


def init_params(spec, rng=None):
    """He-style seeded initialization: W ~ N(0, scale/fan_in), zero biases."""
    if rng is None:
        rng = child_rng(spec.init_seed)
    gain = 2.0 if spec.activation == RELU else 1.0
    chunks = []
    for fi, fo in _layer_pairs(spec):
        w = rng.standard_normal((fi, fo)) * np.sqrt(gain / fi)
        chunks.append(w.ravel())
        chunks.append(np.zeros(fo))
    return ModelParams(np.concatenate(chunks), spec)


def _check_input(spec, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ContractViolationError(
            f"input has {x.shape[-1] if x.ndim else 0} columns, spec wants {spec.input_dim}"
        )
    return x


def forward_logits(params, x):
    """Logits for a matrix of inputs, shape (rows, num_classes)."""
    x = _check_input(params.spec, x)
    relu = params.spec.activation == RELU
    layers = params.layers()
    h = x
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if relu and i < len(layers) - 1:
            h = np.maximum(h, 0.0)
    return h


def forward_with_vjp(params, x):
    """Logits plus a pullback: vjp(dlogits) -> (grad_flat_params, grad_x)."""
    x = _check_input(params.spec, x)
    spec = params.spec
    relu = spec.activation == RELU
    layers = params.layers()
    acts = [x]  # input to each layer
    pre = []  # pre-activation of each layer
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if (relu and i < len(layers) - 1) else z
        if i < len(layers) - 1:
            acts.append(h)
    logits = h

    def vjp(dlogits):
        grad = np.zeros(spec.num_params)
        slices = _layer_slices(spec)
        dz = np.asarray(dlogits, dtype=float)
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            wsl, bsl, fi, fo = slices[i]
            grad[wsl] = (acts[i].T @ dz).ravel()
            grad[bsl] = dz.sum(axis=0)
            da = dz @ w.T
            if i > 0:
                dz = da * (pre[i - 1] > 0) if relu else da
        return grad, da

    return logits, vjp


def tempered_softmax(logits, alpha_temp):
    """softmax(alpha * logits) along the last axis, max-subtracted for safety."""
    if not alpha_temp > 0:
        raise ContractViolationError("alpha_temp must be positive")
    z = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ContractViolationError("non-finite logits")
    t = alpha_temp * (z - z.max(axis=-1, keepdims=True))
    e = np.exp(t)
    return e / e.sum(axis=-1, keepdims=True)


def tempered_softmax_vjp(probs, alpha_temp, dprobs):
    """Pull a cotangent on tempered-softmax outputs back to the logits."""
    inner = np.sum(dprobs * probs, axis=-1, keepdims=True)
    return alpha_temp * probs * (dprobs - inner)


def log_tempered_softmax(logits, alpha_temp):
    """log softmax(alpha * logits); stable for saturated temperatures."""
    z = alpha_temp * np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def loss_grad(params, batch, loss_kind=CROSS_ENTROPY, weight_decay=0.0):
    """Mean cross-entropy plus weight decay, with both gradients.

    Returns (loss, grad_params_flat, grad_inputs); the decay term is
    weight_decay * sum(W**2) over weight entries only, biases excluded.
    """
    if loss_kind != CROSS_ENTROPY:
        raise ContractViolationError(f"unknown loss kind {loss_kind!r}")
    if weight_decay < 0:
        raise ContractViolationError("weight_decay must be nonnegative")
    if len(batch) == 0:
        raise ContractViolationError("empty batch")
    n = len(batch)
    if batch.y.max() >= params.spec.num_classes:
        raise ContractViolationError("label outside class range")
    logits, vjp = forward_with_vjp(params, batch.x)
    zmax = logits.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
    loss = float(np.mean(lse - logits[np.arange(n), batch.y]))
    dlogits = np.exp(logits - zmax)
    dlogits /= dlogits.sum(axis=1, keepdims=True)
    dlogits[np.arange(n), batch.y] -= 1.0
    dlogits /= n
    grad_flat, grad_x = vjp(dlogits)
    if weight_decay > 0.0:
        mask = weight_mask(params.spec)
        w = params.flat[mask]
        loss += weight_decay * float(w @ w)
        grad_flat[mask] += 2.0 * weight_decay * w
    return loss, grad_flat, grad_x


def default_fd_step(v):
    """Central-difference step scaled to the parameter magnitude."""
    return 1e-4 * (1.0 + float(np.linalg.norm(v)))


def hvp(params, batch, loss, q, direction=VV, fd_step=None):
    """Hessian-vector product by central differences of first-order gradients.

    `loss` is a callable (ModelParams, Batch) -> (value, grad_params,
    grad_inputs). Direction VV differentiates the parameter gradient along q;
    UV differentiates the input gradient along the same parameter direction,
    returning a vector over the flattened batch inputs. q = 0 returns zeros.
    """
    if direction not in (VV, UV):
        raise ContractViolationError(f"unknown hvp direction {direction!r}")
    q = np.asarray(q, dtype=float).ravel()
    if q.size != params.spec.num_params:
        raise ContractViolationError("q length must match the parameter count")
    out_dim = params.spec.num_params if direction == VV else batch.x.size
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        return np.zeros(out_dim)
    h = default_fd_step(params.flat) if fd_step is None else float(fd_step)
    qhat = q / qn
    _, gp_plus, gx_plus = loss(params.with_flat(params.flat + h * qhat), batch)
    _, gp_minus, gx_minus = loss(params.with_flat(params.flat - h * qhat), batch)
    if direction == VV:
        return (gp_plus - gp_minus) * (qn / (2.0 * h))
    return (np.asarray(gx_plus) - np.asarray(gx_minus)).ravel() * (qn / (2.0 * h))
