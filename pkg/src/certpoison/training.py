"""Robust training losses and the Adam trainer.

Methods: plain cross-entropy ("standard"), Gaussian augmentation
("gauss_aug"), certified-radius hinge training ("macer"), and adversarial
training against the smoothed classifier ("smooth_adv", approximated by
regenerating PGD examples against the current model each step).

Noise handling: the public losses draw fresh Gaussian noise from the caller's
generator; `*_frozen` variants take the draws explicitly so callers (gradient
checks, the bilevel attack) can hold noise fixed across evaluations. The
trainer derives one child stream per optimization step, which makes the
reduction chain standard == gauss_aug(sigma=0) == smooth_adv(adv_l2=0) hold
bit-exactly under shared seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffnet import (Batch, forward_with_vjp, init_params, log_tempered_softmax,
                      loss_grad, tempered_softmax_vjp, weight_mask)
from .errors import ContractViolationError, NumericalError
from .rng import as_keys, child_rng
from .smoothing import SmoothingConfig, clamped_quantile_and_slope

STANDARD = "standard"
GAUSS_AUG = "gauss_aug"
MACER = "macer"
SMOOTH_ADV = "smooth_adv"
METHODS = (STANDARD, GAUSS_AUG, MACER, SMOOTH_ADV)


@dataclass(frozen=True)
class MacerParams:
    """Noise draws k, robustness weight lam, hinge factor gamma."""

    k: int = 16
    lam: float = 4.0
    gamma: float = 8.0

    def __post_init__(self):
        if self.k < 1:
            raise ContractViolationError("macer k must be >= 1")
        if self.lam < 0 or not self.gamma > 0:
            raise ContractViolationError("need lam >= 0 and gamma > 0")


@dataclass(frozen=True)
class SmoothAdvParams:
    """Permissible l2 distortion, PGD step count, noise draws per point."""

    adv_l2: float = 0.5
    pgd_steps: int = 2
    k_noise: int = 1

    def __post_init__(self):
        if self.pgd_steps < 1 or self.k_noise < 1:
            raise ContractViolationError("pgd_steps and k_noise must be >= 1")
        if self.adv_l2 < 0:
            raise ContractViolationError("adv_l2 must be nonnegative")


@dataclass(frozen=True)
class TrainConfig:
    method: str
    smoothing: SmoothingConfig
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 100
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractViolationError(f"unknown training method {self.method!r}")
        if self.batch_size < 1 or self.epochs < 1 or not self.lr > 0:
            raise ContractViolationError("bad optimizer settings")
        if self.weight_decay < 0:
            raise ContractViolationError("weight_decay must be nonnegative")


def gauss_aug_loss_frozen(params, batch, noise, weight_decay):
    """Cross-entropy on x + noise with input gradients; noise is explicit."""
    shifted = Batch(batch.x + noise, batch.y)
    return loss_grad(params, shifted, weight_decay=weight_decay)


def gauss_aug_loss(params, batch, sigma, weight_decay, rng, noise=None):
    """Cross-entropy on Gaussian-corrupted inputs, one fresh draw per sample."""
    if sigma < 0:
        raise ContractViolationError("sigma must be nonnegative")
    if noise is None:
        noise = sigma * rng.standard_normal(batch.x.shape)
    loss, grad_params, _ = gauss_aug_loss_frozen(params, batch, noise, weight_decay)
    return loss, grad_params


def macer_loss_frozen(params, batch, noise, macer, sigma, alpha_temp, weight_decay):
    """Classification + certified-radius hinge loss with explicit noise.

    noise has shape (k, n, d). zhat is the mean tempered softmax over the k
    draws; the hinge penalizes gamma minus the soft radius margin on points
    the soft smoothed classifier gets right. The indicator, the runner-up
    choice, and the hinge mask are treated as constants during
    differentiation; gradients flow through zhat only. Returns
    (loss, grad_params, grad_inputs).
    """
    k, n, d = noise.shape
    labels = batch.y
    rows = np.arange(n)

    # all k draws in one stacked pass
    stacked = (batch.x[None, :, :] + noise).reshape(k * n, d)
    logits, vjp = forward_with_vjp(params, stacked)
    log_probs = log_tempered_softmax(logits, alpha_temp).reshape(k, n, -1)
    probs = np.exp(log_probs)
    zhat = probs.mean(axis=0)  # (n, C)

    # Classification term -log zhat_y, evaluated in log space across draws.
    log_zy = np.logaddexp.reduce(log_probs[:, rows, labels], axis=0) - np.log(k)
    class_loss = float(np.mean(-log_zy))
    # d(-log zhat_y)/d log p_jy: softmax weights of the draws.
    draw_w = np.exp(log_probs[:, rows, labels] - log_zy[None, :] - np.log(k))

    # Hinge term on the soft radius margin.
    masked = zhat.copy()
    masked[rows, labels] = -np.inf
    runner = masked.argmax(axis=1)
    qy, slope_y = clamped_quantile_and_slope(zhat[rows, labels])
    qr, slope_r = clamped_quantile_and_slope(zhat[rows, runner])
    margin = qy - qr
    correct = zhat.argmax(axis=1) == labels
    active = correct & (margin < macer.gamma)
    coef = 0.5 * macer.lam * sigma
    hinge_loss = float(coef * np.sum(np.maximum(macer.gamma - margin, 0.0) * correct) / n)

    dzhat = np.zeros_like(zhat)
    dzhat[rows, labels] = np.where(active, -coef * slope_y / n, 0.0)
    dzhat[rows, runner] += np.where(active, coef * slope_r / n, 0.0)

    # classification term: draw-weighted tempered cross-entropy gradient
    dlogits = (draw_w[:, :, None] / n) * alpha_temp * probs
    dlogits[:, rows, labels] -= (draw_w / n) * alpha_temp
    # hinge term through zhat = mean_j probs_j
    dlogits += tempered_softmax_vjp(probs, alpha_temp,
                                    np.broadcast_to(dzhat / k, probs.shape))
    grad_params, gx = vjp(dlogits.reshape(k * n, -1))
    grad_inputs = gx.reshape(k, n, d).sum(axis=0)

    loss = class_loss + hinge_loss
    if weight_decay > 0:
        mask = weight_mask(params.spec)
        w = params.flat[mask]
        loss += weight_decay * float(w @ w)
        grad_params[mask] += 2.0 * weight_decay * w
    return loss, grad_params, grad_inputs


def macer_loss(params, batch, macer, sigma, alpha_temp, weight_decay, rng, noise=None):
    if noise is None:
        noise = sigma * rng.standard_normal((macer.k,) + batch.x.shape)
    loss, grad_params, _ = macer_loss_frozen(params, batch, noise, macer, sigma,
                                             alpha_temp, weight_decay)
    return loss, grad_params


def _avg_true_class_logprob_grad(params, x, y, noise, alpha_temp):
    """Value and x-gradient of -log mean_j softmax_y(alpha * logits(x + eta_j)).

    Stable across saturated temperatures: the mean over draws is taken in
    log space and each draw's contribution is weighted by its share of the
    total true-class probability. All k draws go through one stacked pass.
    """
    k, n, d = noise.shape
    rows = np.arange(n)
    stacked = (x[None, :, :] + noise).reshape(k * n, d)
    logits, vjp = forward_with_vjp(params, stacked)
    log_probs = log_tempered_softmax(logits, alpha_temp).reshape(k, n, -1)
    probs = np.exp(log_probs)
    log_py = log_probs[:, rows, y]  # (k, n)
    log_mean = np.logaddexp.reduce(log_py, axis=0) - np.log(k)
    value = -log_mean
    draw_w = np.exp(log_py - log_mean[None, :] - np.log(k))
    dlogits = draw_w[:, :, None] * alpha_temp * probs
    dlogits[:, rows, y] -= draw_w * alpha_temp
    _, gx = vjp(dlogits.reshape(k * n, -1))
    return value, gx.reshape(k, n, d).sum(axis=0)


def _project_l2_ball(x, center, radius):
    delta = x - center
    norms = np.linalg.norm(delta, axis=1, keepdims=True)
    scale = np.minimum(1.0, radius / np.maximum(norms, 1e-30))
    return center + delta * scale


def pgd_smoothed(params, x, y, adv_l2, steps, k_noise, sigma, alpha_temp, rng,
                 box=(0.0, 1.0), noise=None):
    """l2 PGD ascent on the noise-averaged negative log-probability of y.

    Noise draws are frozen across steps; each step moves 2*adv_l2/steps along
    the row-normalized gradient, then projects onto the l2 ball of radius
    adv_l2 around x and clips to the box. Returns the iterate (including the
    start) with the highest objective per row, so the attack objective never
    decreases relative to the clean point.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    if noise is None:
        noise = sigma * rng.standard_normal((k_noise,) + x.shape)
    step = 2.0 * adv_l2 / steps
    x_adv = x.copy()
    best_x = x.copy()
    best_val = np.full(x.shape[0], -np.inf)
    for _ in range(steps):
        val, grad = _avg_true_class_logprob_grad(params, x_adv, y, noise, alpha_temp)
        improved = val > best_val
        best_val = np.where(improved, val, best_val)
        best_x[improved] = x_adv[improved]
        norms = np.linalg.norm(grad, axis=1, keepdims=True)
        x_adv = x_adv + step * grad / np.maximum(norms, 1e-30)
        x_adv = _project_l2_ball(x_adv, x, adv_l2)
        if box is not None:
            x_adv = np.clip(x_adv, box[0], box[1])
    val, _ = _avg_true_class_logprob_grad(params, x_adv, y, noise, alpha_temp)
    improved = val > best_val
    best_x[improved] = x_adv[improved]
    return best_x


def smoothadv_loss(params, batch, sa, sigma, weight_decay, rng, box=(0.0, 1.0)):
    """Gaussian-augmented loss on PGD examples against the smoothed model.

    The augmentation noise is drawn before the PGD noise so that
    adv_l2 -> 0 reduces to gauss_aug_loss exactly under a shared stream.
    Adversarial points are treated as data (no gradient through PGD).
    """
    ga_noise = sigma * rng.standard_normal(batch.x.shape)
    x_adv = pgd_smoothed(params, batch.x, batch.y, sa.adv_l2, sa.pgd_steps,
                         sa.k_noise, sigma, alpha_temp=1.0, rng=rng, box=box)
    loss, grad_params, _ = gauss_aug_loss_frozen(params, Batch(x_adv, batch.y),
                                                 ga_noise, weight_decay)
    return loss, grad_params


def _step_loss(params, mb, cfg, extras, rng, box):
    sigma = cfg.smoothing.sigma
    if cfg.method == STANDARD:
        return gauss_aug_loss(params, mb, 0.0, cfg.weight_decay, rng)
    if cfg.method == GAUSS_AUG:
        return gauss_aug_loss(params, mb, sigma, cfg.weight_decay, rng)
    if cfg.method == MACER:
        macer = extras if isinstance(extras, MacerParams) else MacerParams()
        return macer_loss(params, mb, macer, sigma, cfg.smoothing.alpha_temp,
                          cfg.weight_decay, rng)
    sa = extras if isinstance(extras, SmoothAdvParams) else SmoothAdvParams()
    return smoothadv_loss(params, mb, sa, sigma, cfg.weight_decay, rng, box=box)


def train(dataset, spec, cfg, extras=None, seed=None, box=(0.0, 1.0),
          loss_history=None):
    """Adam on the configured loss over shuffled mini-batches.

    Deterministic given the seed: initialization, shuffles, and per-step noise
    all come from child streams keyed by (seed, tag, epoch, step). `extras`
    carries MacerParams or SmoothAdvParams when the method needs them. A
    non-finite loss aborts with NumericalError. Appends per-step losses to
    loss_history when a list is supplied.
    """
    if len(dataset) == 0:
        raise ContractViolationError("empty training set")
    keys = as_keys(cfg.seed if seed is None else seed)
    params = init_params(spec, rng=child_rng(*keys, 101))
    beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
    m = np.zeros_like(params.flat)
    v = np.zeros_like(params.flat)
    t = 0
    n = len(dataset)
    for epoch in range(cfg.epochs):
        perm = child_rng(*keys, 102, epoch).permutation(n)
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            mb = dataset.subset(perm[start:start + cfg.batch_size])
            rng = child_rng(*keys, 103, epoch, bi)
            loss, grad = _step_loss(params, mb, cfg, extras, rng, box)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, step {bi}")
            if loss_history is not None:
                loss_history.append(float(loss))
            t += 1
            m = beta1 * m + (1 - beta1) * grad
            v = beta2 * v + (1 - beta2) * grad * grad
            mhat = m / (1 - beta1 ** t)
            vhat = v / (1 - beta2 ** t)
            params = params.with_flat(
                params.flat - cfg.lr * mhat / (np.sqrt(vhat) + eps_adam))
    return params
