"""Clean-label poisoning of certified defenses.

`pacd_attack` drives the bilevel solver with the soft-radius upper cost
(mean soft certified radius of a validation batch from the target class) and
a robust-training lower cost on clean + poison mini-batches; one projected
upper step per outer iteration keeps every poison row inside the eps
infinity-ball around its base point and inside the pixel box. Labels are
never touched. `standard_poison` is the accuracy-targeting baseline (standard
training below, validation loss above), `watermark_baseline` the
non-optimized blending control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bilevel
from .bilevel import BilevelConfig, BilevelProblem
from .diffnet import (Batch, ModelParams, NetworkSpec, forward_with_vjp,
                      init_params, loss_grad, tempered_softmax,
                      tempered_softmax_vjp)
from .errors import ContractViolationError
from .rng import child_rng
from .smoothing import SmoothingConfig, clamped_quantile_and_slope
from .training import (GAUSS_AUG, MACER, SMOOTH_ADV, MacerParams,
                       SmoothAdvParams, gauss_aug_loss_frozen,
                       macer_loss_frozen, pgd_smoothed)

LOWER_METHODS = (GAUSS_AUG, MACER, SMOOTH_ADV)


@dataclass(frozen=True)
class ClassWide:
    """Poison every training point of the target class."""


@dataclass(frozen=True)
class Fraction:
    """Poison a uniformly chosen alpha fraction of the target class."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ContractViolationError("fraction alpha must lie in (0, 1]")


@dataclass(frozen=True)
class TargetPoints:
    """Poison the pool_size nearest target-class points to each target.

    `indices` select target points from the validation/evaluation batch
    handed to select_poison_pool.
    """

    indices: tuple
    pool_size: int = 1

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if not self.indices or self.pool_size < 1:
            raise ContractViolationError("need target indices and pool_size >= 1")


@dataclass
class PoisonSet:
    """Base points, per-point perturbations, and the budget they satisfy."""

    base_x: np.ndarray
    labels: np.ndarray
    delta: np.ndarray
    eps: float
    box: tuple = (0.0, 1.0)

    def __post_init__(self):
        self.base_x = np.asarray(self.base_x, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        self.delta = np.asarray(self.delta, dtype=float)
        if self.base_x.shape != self.delta.shape:
            raise ContractViolationError("base and delta shapes differ")
        if self.base_x.shape[0] != self.labels.size:
            raise ContractViolationError("label count mismatch")
        if not self.eps >= 0:
            raise ContractViolationError("eps must be nonnegative")
        tol = 1e-7  # slack for 9-significant-digit serialization round trips
        if self.delta.size and float(np.abs(self.delta).max()) > self.eps + tol:
            raise ContractViolationError("a perturbation exceeds the eps budget")
        composite = self.base_x + self.delta
        lo, hi = self.box
        if self.delta.size and (composite.min() < lo - tol or composite.max() > hi + tol):
            raise ContractViolationError("a poison point leaves the pixel box")

    @property
    def poisoned_x(self):
        return self.base_x + self.delta

    def as_batch(self):
        return Batch(self.poisoned_x, self.labels)

    def __len__(self):
        return self.labels.size


@dataclass(frozen=True)
class AttackConfig:
    target_class: int
    lower_method: str
    eps: float
    smoothing: SmoothingConfig
    bilevel: BilevelConfig
    net: NetworkSpec
    clean_batch: int = 200
    poison_batch: int = 100
    val_batch: int = 100
    mode: object = field(default_factory=ClassWide)
    macer: MacerParams = MacerParams(k=2, lam=1.0, gamma=8.0)
    smoothadv: SmoothAdvParams = SmoothAdvParams()
    weight_decay: float = 0.0
    box: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.lower_method not in LOWER_METHODS:
            raise ContractViolationError(f"unknown lower method {self.lower_method!r}")
        if not self.eps > 0:
            raise ContractViolationError("eps must be positive")
        if self.poison_batch > self.clean_batch:
            raise ContractViolationError("poison_batch must not exceed clean_batch")
        if self.poison_batch < 1 or self.val_batch < 1:
            raise ContractViolationError("batch sizes must be >= 1")


@dataclass
class AttackReport:
    poison: PoisonSet
    upper_history: tuple
    config: object
    history: list


def _sample_without_replacement(rng, n, size):
    if size >= n:
        return rng.permutation(n)
    return rng.choice(n, size=size, replace=False)


class PoisonDefenseProblem(BilevelProblem):
    """Bilevel instance: soft-radius upper cost, robust-training lower cost.

    u is the flattened matrix of poison inputs; v the flattened model
    parameters. Each outer iteration freezes fresh mini-batch indices and
    noise draws (and, for the adversarial-training lower level, fresh PGD
    offsets against the current model), so all gradients and Hessian-vector
    products within the iteration see one fixed smooth objective.
    """

    def __init__(self, clean, base, val, cfg):
        self.clean = clean
        self.base = base
        self.val = val
        self.cfg = cfg
        self.net = cfg.net
        self.n_poison, self.d = base.x.shape
        self.lo = np.maximum(base.x - cfg.eps, cfg.box[0]).ravel()
        self.hi = np.minimum(base.x + cfg.eps, cfg.box[1]).ravel()
        self.idx_clean = None
        self.idx_poison = None
        self.idx_val = None
        self.noise_lower = None
        self.val_noise = None
        self.adv_offsets = None
        self.ga_noise = None

    def initial_u(self):
        return self.base.x.ravel()

    def init_v(self, rng):
        return init_params(self.net, rng=rng).flat

    def begin_outer(self, iteration, rng, u, v):
        cfg = self.cfg
        sigma = cfg.smoothing.sigma
        self.idx_clean = _sample_without_replacement(rng, len(self.clean),
                                                     cfg.clean_batch)
        self.idx_poison = _sample_without_replacement(rng, self.n_poison,
                                                      cfg.poison_batch)
        self.idx_val = _sample_without_replacement(rng, len(self.val),
                                                   cfg.val_batch)
        nb = self.idx_clean.size + self.idx_poison.size
        self.val_noise = sigma * rng.standard_normal(
            (cfg.smoothing.k, self.idx_val.size, self.d))
        if cfg.lower_method == GAUSS_AUG:
            self.noise_lower = sigma * rng.standard_normal((nb, self.d))
        elif cfg.lower_method == MACER:
            self.noise_lower = sigma * rng.standard_normal((cfg.macer.k, nb, self.d))
        else:  # adversarial training: refresh offsets against the current model
            self.ga_noise = sigma * rng.standard_normal((nb, self.d))
            xb, yb = self._lower_batch(u)
            params = ModelParams(v, self.net)
            sa = cfg.smoothadv
            x_adv = pgd_smoothed(params, xb, yb, sa.adv_l2, sa.pgd_steps,
                                 sa.k_noise, sigma, alpha_temp=1.0, rng=rng,
                                 box=cfg.box)
            self.adv_offsets = x_adv - xb

    def _lower_batch(self, u):
        poison_x = u.reshape(self.n_poison, self.d)
        xb = np.vstack([self.clean.x[self.idx_clean],
                        poison_x[self.idx_poison]])
        yb = np.concatenate([self.clean.y[self.idx_clean],
                             self.base.y[self.idx_poison]])
        return xb, yb

    def _zeta_grads(self, u, v):
        cfg = self.cfg
        params = ModelParams(v, self.net)
        xb, yb = self._lower_batch(u)
        if cfg.lower_method == GAUSS_AUG:
            loss, gp, gx = gauss_aug_loss_frozen(params, Batch(xb, yb),
                                                 self.noise_lower,
                                                 cfg.weight_decay)
        elif cfg.lower_method == MACER:
            loss, gp, gx = macer_loss_frozen(params, Batch(xb, yb),
                                             self.noise_lower, cfg.macer,
                                             cfg.smoothing.sigma,
                                             cfg.smoothing.alpha_temp,
                                             cfg.weight_decay)
        else:
            loss, gp, gx = gauss_aug_loss_frozen(
                params, Batch(xb + self.adv_offsets, yb), self.ga_noise,
                cfg.weight_decay)
        grad_u = np.zeros((self.n_poison, self.d))
        np.add.at(grad_u, self.idx_poison, gx[self.idx_clean.size:])
        return loss, gp, grad_u.ravel()

    def lower_grad_v(self, u, v):
        return self._zeta_grads(u, v)[1]

    def lower_grad_u(self, u, v):
        return self._zeta_grads(u, v)[2]

    def _soft_radius_cost(self, v, want_grad):
        """Mean soft radius over the frozen validation batch, and its
        parameter gradient; misclassified points contribute zero."""
        cfg = self.cfg
        params = ModelParams(v, self.net)
        xv = self.val.x[self.idx_val]
        yv = self.val.y[self.idx_val]
        nv = yv.size
        rows = np.arange(nv)
        k = cfg.smoothing.k
        alpha = cfg.smoothing.alpha_temp
        stacked = (xv[None, :, :] + self.val_noise).reshape(k * nv, self.d)
        logits, vjp = forward_with_vjp(params, stacked)
        probs = tempered_softmax(logits, alpha).reshape(k, nv, -1)
        zbar = probs.mean(axis=0)
        correct = zbar.argmax(axis=1) == yv
        masked = zbar.copy()
        masked[rows, yv] = -np.inf
        runner = masked.argmax(axis=1)
        qy, slope_y = clamped_quantile_and_slope(zbar[rows, yv])
        qr, slope_r = clamped_quantile_and_slope(zbar[rows, runner])
        radii = 0.5 * cfg.smoothing.sigma * (qy - qr)
        xi = float(np.sum(radii[correct]) / nv)
        if not want_grad:
            return xi, None
        coef = 0.5 * cfg.smoothing.sigma / nv
        dz = np.zeros_like(zbar)
        dz[rows, yv] = np.where(correct, coef * slope_y, 0.0)
        dz[rows, runner] += np.where(correct, -coef * slope_r, 0.0)
        dlogits = tempered_softmax_vjp(probs, alpha,
                                       np.broadcast_to(dz / k, probs.shape))
        grad_v, _ = vjp(dlogits.reshape(k * nv, -1))
        return xi, grad_v

    def upper_value(self, u, v):
        return self._soft_radius_cost(v, want_grad=False)[0]

    def upper_grad_u(self, u, v):
        return np.zeros_like(u)

    def upper_grad_v(self, u, v):
        return self._soft_radius_cost(v, want_grad=True)[1]

    def project_u(self, u):
        return np.clip(u, self.lo, self.hi)


class StandardPoisonProblem(BilevelProblem):
    """Accuracy-targeting baseline: maximize validation cross-entropy of a
    standard-training lower level (full-batch at desk scale)."""

    def __init__(self, clean, base, val, eps, net, box=(0.0, 1.0)):
        self.clean = clean
        self.base = base
        self.val = val
        self.net = net
        self.n_poison, self.d = base.x.shape
        self.lo = np.maximum(base.x - eps, box[0]).ravel()
        self.hi = np.minimum(base.x + eps, box[1]).ravel()

    def initial_u(self):
        return self.base.x.ravel()

    def init_v(self, rng):
        return init_params(self.net, rng=rng).flat

    def _train_batch(self, u):
        poison_x = u.reshape(self.n_poison, self.d)
        return Batch(np.vstack([self.clean.x, poison_x]),
                     np.concatenate([self.clean.y, self.base.y]))

    def lower_grad_v(self, u, v):
        params = ModelParams(v, self.net)
        return loss_grad(params, self._train_batch(u))[1]

    def lower_grad_u(self, u, v):
        params = ModelParams(v, self.net)
        gx = loss_grad(params, self._train_batch(u))[2]
        return gx[len(self.clean):].ravel()

    def upper_value(self, u, v):
        params = ModelParams(v, self.net)
        return -loss_grad(params, self.val)[0]

    def upper_grad_u(self, u, v):
        return np.zeros_like(u)

    def upper_grad_v(self, u, v):
        params = ModelParams(v, self.net)
        return -loss_grad(params, self.val)[1]

    def project_u(self, u):
        return np.clip(u, self.lo, self.hi)


def _check_target_only(batch, target_class, name):
    if not np.all(batch.y == target_class):
        raise ContractViolationError(f"{name} must contain only target-class points")


def pacd_attack(clean, base, val, cfg, rng):
    """Optimize clean-label poison against a robust-training lower level.

    clean: the unalterable training data (other classes); base: target-class
    points the poison starts from; val: held-out target-class points whose
    soft certified radius the attack minimizes. Returns an AttackReport whose
    upper_history holds the mean soft radius per outer iteration.
    """
    if isinstance(cfg.mode, ClassWide):
        _check_target_only(base, cfg.target_class, "base")
        _check_target_only(val, cfg.target_class, "val")
    if len(base) == 0 or len(val) == 0:
        raise ContractViolationError("base and val must be nonempty")
    problem = PoisonDefenseProblem(clean, base, val, cfg)
    u, history = bilevel.solve(problem, cfg.bilevel, rng)
    delta = u.reshape(base.x.shape) - base.x
    poison = PoisonSet(base.x, base.y, delta, cfg.eps, box=cfg.box)
    return AttackReport(poison, tuple(h["xi"] for h in history), cfg, history)


def standard_poison(clean, base, val, eps, bilevel_cfg, rng, net,
                    box=(0.0, 1.0)):
    """Baseline poisoning against standard training.

    The upper cost is the negated validation cross-entropy (the attack
    maximizes the victim's validation loss); the lower level is plain
    empirical-risk training.
    """
    if len(base) == 0 or len(val) == 0:
        raise ContractViolationError("base and val must be nonempty")
    if not eps > 0:
        raise ContractViolationError("eps must be positive")
    problem = StandardPoisonProblem(clean, base, val, eps, net, box=box)
    u, history = bilevel.solve(problem, bilevel_cfg, rng)
    delta = u.reshape(base.x.shape) - base.x
    poison = PoisonSet(base.x, base.y, delta, eps, box=box)
    return AttackReport(poison, tuple(h["xi"] for h in history), None, history)


def watermark_baseline(base, others, opacity, eps, rng, box=(0.0, 1.0)):
    """Blend a random non-target image into each base point, clipped to eps.

    poison = clip(opacity * other + (1 - opacity) * base) into the eps ball
    and the pixel box; a non-optimized control for the bilevel attack.
    """
    if not 0.0 <= opacity <= 1.0:
        raise ContractViolationError("opacity must lie in [0, 1]")
    if len(others) == 0:
        raise ContractViolationError("need at least one non-target image")
    idx = rng.integers(0, len(others), size=len(base))
    blend = opacity * others.x[idx] + (1.0 - opacity) * base.x
    lo = np.maximum(base.x - eps, box[0])
    hi = np.minimum(base.x + eps, box[1])
    poison_x = np.clip(blend, lo, hi)
    return PoisonSet(base.x, base.y, poison_x - base.x, eps, box=box)


def select_poison_indices(train, cfg, val=None):
    """Training-row indices the attacker is allowed to perturb.

    ClassWide takes every target-class point; Fraction(alpha) a uniform
    sample of ceil(alpha * n) of them; TargetPoints the pool_size nearest
    (l2) target-class points to each selected target row of `val`.
    """
    target_rows = np.flatnonzero(train.y == cfg.target_class)
    if target_rows.size == 0:
        raise ContractViolationError("target class absent from training data")
    mode = cfg.mode
    if isinstance(mode, ClassWide):
        chosen = target_rows
    elif isinstance(mode, Fraction):
        count = math.ceil(mode.alpha * target_rows.size)
        rng = child_rng(cfg.smoothing.seed, 31)
        chosen = np.sort(rng.choice(target_rows, size=count, replace=False))
    elif isinstance(mode, TargetPoints):
        if val is None:
            raise ContractViolationError("TargetPoints mode needs the target batch")
        picked = set()
        for ti in mode.indices:
            target = val.x[ti]
            dists = np.linalg.norm(train.x[target_rows] - target, axis=1)
            order = np.argsort(dists, kind="stable")[:mode.pool_size]
            picked.update(int(target_rows[o]) for o in order)
        chosen = np.array(sorted(picked), dtype=int)
    else:
        raise ContractViolationError(f"unknown poisoning mode {mode!r}")
    if chosen.size == 0:
        raise ContractViolationError("empty poison selection")
    return chosen


def select_poison_pool(train, cfg, val=None):
    """The Batch of training points select_poison_indices picks."""
    return train.subset(select_poison_indices(train, cfg, val=val))
