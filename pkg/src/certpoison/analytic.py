"""Closed-form oracles for the linear and isotropic-Gaussian cases.

For a 1-D two-class problem trained with squared loss, the decision threshold
has the closed form t = (sum(u) + sum(x_pos)) / (2n), so the optimal
clean-label poisoning of the negative class is a uniform shift of +-eps; the
feasibility of the +eps solution depends on how the budget compares with the
class-mean gap. These closed forms (and the perpendicular-bisector geometry
of the two-Gaussian toy) serve as exact references for the numerical attack.
All functions here are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bilevel import BilevelProblem
from .diffnet import Batch
from .errors import ContractViolationError, SingularityError

CASE1 = "case1"  # shift the negative class down by eps (always locally optimal)
TWO_LOCAL = "two_local"  # budget large enough that +eps is a second local optimum


@dataclass(frozen=True)
class Linear1dInstance:
    """Training points of both classes plus the poisoning budget."""

    x_pos: tuple
    x_neg: tuple
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "x_pos", tuple(float(v) for v in self.x_pos))
        object.__setattr__(self, "x_neg", tuple(float(v) for v in self.x_neg))
        if len(self.x_pos) != len(self.x_neg) or not self.x_pos:
            raise ContractViolationError("classes must have equal, nonzero sizes")
        if not self.eps > 0:
            raise ContractViolationError("eps must be positive")
        if not sum(self.x_neg) < sum(self.x_pos):
            raise ContractViolationError("requires sum(x_neg) < sum(x_pos)")


def least_squares_linear_1d(x_pos, u):
    """Exact squared-loss fit of labels +-1; returns (w, b, threshold -b/w)."""
    x_pos = np.asarray(x_pos, dtype=float)
    u = np.asarray(u, dtype=float)
    if x_pos.size != u.size:
        raise ContractViolationError("x_pos and u must have equal lengths")
    pts = np.concatenate([x_pos, u])
    ys = np.concatenate([np.ones_like(x_pos), -np.ones_like(u)])
    xbar = pts.mean()
    ybar = ys.mean()
    den = float(np.sum((pts - xbar) ** 2))
    scale = max(1.0, float(np.max(np.abs(pts))) ** 2)
    if den <= 1e-14 * scale * pts.size:
        raise SingularityError("all points coincide; threshold undefined")
    w = float(np.sum((pts - xbar) * (ys - ybar)) / den)
    b = float(ybar - w * xbar)
    if w == 0.0:
        raise SingularityError("zero slope; threshold undefined")
    return w, b, -b / w


@dataclass(frozen=True)
class PoisonOptima:
    case1: np.ndarray
    case2: np.ndarray | None
    t_case1: float
    t_case2: float | None
    global_case: str


def theorem1_optima(instance):
    """Closed-form optima of the 1-D squared-loss poisoning problem.

    Case 1 (u = x_neg - eps) always exists and is the unique global optimum
    when the budget is below the class-mean gap; otherwise u = x_neg + eps is
    a second locally optimal solution.
    """
    x_pos = np.asarray(instance.x_pos)
    x_neg = np.asarray(instance.x_neg)
    n = x_neg.size
    eps = instance.eps
    base_t = (x_pos.sum() + x_neg.sum()) / (2 * n)
    case1 = x_neg - eps
    t1 = base_t - eps / 2.0
    gap = (x_pos.sum() - x_neg.sum()) / n
    if eps >= gap:
        return PoisonOptima(case1, x_neg + eps, t1, base_t + eps / 2.0, TWO_LOCAL)
    return PoisonOptima(case1, None, t1, None, CASE1)


def eq4_upper_cost(t, orientation, neg_sample):
    """Mean certified radius of negative-class samples under threshold t.

    orientation is sign(w): +1 classifies negative iff x < t. Correctly
    classified samples contribute their distance to the threshold,
    misclassified ones contribute 0.
    """
    if orientation not in (1, -1):
        raise ContractViolationError("orientation must be +1 or -1")
    xs = np.asarray(neg_sample, dtype=float)
    if xs.size == 0:
        raise ContractViolationError("empty sample")
    return float(np.mean(np.maximum(orientation * (t - xs), 0.0)))


def corollary1_threshold(instance, alpha_frac, eps_tilde):
    """Threshold after shifting ceil(alpha*n) negative points down by eps_tilde.

    Equals the all-points threshold with eps = alpha * eps_tilde exactly
    whenever alpha * n is integral.
    """
    if not 0.0 <= alpha_frac <= 1.0:
        raise ContractViolationError("alpha_frac must lie in [0, 1]")
    x_pos = np.asarray(instance.x_pos)
    x_neg = np.asarray(instance.x_neg)
    n = x_neg.size
    shifted = math.ceil(alpha_frac * n)
    return float((x_pos.sum() + x_neg.sum() - shifted * eps_tilde) / (2 * n))


@dataclass(frozen=True)
class GaussToyConfig:
    """Two isotropic Gaussians; the negative class (label 0) gets poisoned."""

    mu_neg: tuple = (0.2, 0.2)
    mu_pos: tuple = (0.8, 0.8)
    sigma_data: float = 0.3
    eps: float = 0.1
    n_per_class: int = 500
    sigma_smooth: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "mu_neg", tuple(float(v) for v in self.mu_neg))
        object.__setattr__(self, "mu_pos", tuple(float(v) for v in self.mu_pos))
        if len(self.mu_neg) != len(self.mu_pos):
            raise ContractViolationError("class means must share a dimension")
        if self.mu_neg == self.mu_pos:
            raise ContractViolationError("class means must differ")
        if not self.sigma_data > 0 or self.n_per_class < 1:
            raise ContractViolationError("bad sampling settings")
        if self.eps < 0:
            raise ContractViolationError("eps must be nonnegative")


@dataclass(frozen=True)
class GaussToyOracle:
    clean_acr_analytic: float
    poisoned_acr_analytic: float
    drop: float


def _bisector_distance(point, mu_a, mu_b):
    """Signed distance of `point` to the bisector of (mu_a, mu_b), positive
    on mu_a's side."""
    normal = mu_b - mu_a
    normal = normal / np.linalg.norm(normal)
    mid = 0.5 * (mu_a + mu_b)
    return float((mid - point) @ normal)


def gauss_toy_oracle(cfg):
    """Analytic certified radius of the negative class mean, clean vs poisoned.

    The clean boundary is the perpendicular bisector of the two means; the
    optimal poisoning shifts every negative coordinate down by eps, moving the
    bisector toward the (unchanged) test distribution. The radius of the mean
    drops by eps * sqrt(d) / 2, which is eps / sqrt(2) in the symmetric 2-D
    configuration.
    """
    mu1 = np.array(cfg.mu_neg, dtype=float)
    mu2 = np.array(cfg.mu_pos, dtype=float)
    clean = _bisector_distance(mu1, mu1, mu2)
    mu1_shift = mu1 - cfg.eps
    poisoned = max(0.0, _bisector_distance(mu1, mu1_shift, mu2))
    return GaussToyOracle(clean, poisoned, clean - poisoned)


def gauss_toy_expected_acr(cfg, rng, n_samples=100000):
    """Monte-Carlo expected radius over negative-class test draws.

    Differs from the mean-point radius of gauss_toy_oracle: misclassified
    draws count as zero, correctly classified ones contribute their distance
    to the (clean or poisoned) boundary.
    """
    mu1 = np.array(cfg.mu_neg, dtype=float)
    mu2 = np.array(cfg.mu_pos, dtype=float)
    draws = mu1 + cfg.sigma_data * rng.standard_normal((n_samples, mu1.size))
    out = {}
    for name, mu_a in (("clean", mu1), ("poisoned", mu1 - cfg.eps)):
        normal = (mu2 - mu_a) / np.linalg.norm(mu2 - mu_a)
        mid = 0.5 * (mu_a + mu2)
        dist = (mid[None, :] - draws) @ normal
        out[name] = float(np.mean(np.maximum(dist, 0.0)))
    return out


def gauss_toy_sample(cfg, rng):
    """n_per_class draws per class; negative class first, labels {0, 1}."""
    mu1 = np.array(cfg.mu_neg, dtype=float)
    mu2 = np.array(cfg.mu_pos, dtype=float)
    d = mu1.size
    neg = mu1 + cfg.sigma_data * rng.standard_normal((cfg.n_per_class, d))
    pos = mu2 + cfg.sigma_data * rng.standard_normal((cfg.n_per_class, d))
    x = np.vstack([neg, pos])
    y = np.concatenate([np.zeros(cfg.n_per_class, dtype=int),
                        np.ones(cfg.n_per_class, dtype=int)])
    return Batch(x, y)


class Linear1dPoisonProblem(BilevelProblem):
    """The 1-D squared-loss poisoning instance as a bilevel problem.

    u holds the poison positions (starting at x_neg), v = (w, b). The lower
    cost is the squared loss over positive points and poison points; the
    upper cost is the empirical mean certified radius of a negative-class
    sample (distance to the threshold for correctly classified points).
    Curvature comes from the inherited finite-difference oracles.
    `per_point_eps` overrides the instance budget with one bound per point
    (zero freezes a point), which realizes fractional poisoning.
    """

    def __init__(self, instance, neg_sample=None, per_point_eps=None):
        self.instance = instance
        self.x_pos = np.asarray(instance.x_pos, dtype=float)
        self.x_neg = np.asarray(instance.x_neg, dtype=float)
        self.neg_sample = (self.x_neg if neg_sample is None
                           else np.asarray(neg_sample, dtype=float))
        eps = instance.eps if per_point_eps is None else np.asarray(per_point_eps)
        self.lo = self.x_neg - eps
        self.hi = self.x_neg + eps

    def initial_u(self):
        return self.x_neg.copy()

    def init_v(self, rng):
        return 0.1 * rng.standard_normal(2)

    def _residuals(self, u, v):
        w, b = v
        return w * self.x_pos + b - 1.0, w * u + b + 1.0

    def lower_value(self, u, v):
        rp, rn = self._residuals(u, v)
        return 0.5 * (np.sum(rp ** 2) + np.sum(rn ** 2)) / self.x_pos.size

    def lower_grad_v(self, u, v):
        rp, rn = self._residuals(u, v)
        n = self.x_pos.size
        dw = (np.sum(rp * self.x_pos) + np.sum(rn * u)) / n
        db = (np.sum(rp) + np.sum(rn)) / n
        return np.array([dw, db])

    def lower_grad_u(self, u, v):
        w = v[0]
        _, rn = self._residuals(u, v)
        return w * rn / self.x_pos.size

    def upper_value(self, u, v):
        w, b = v
        if w == 0.0:
            return 0.0
        s = 1.0 if w > 0 else -1.0
        t = -b / w
        return eq4_upper_cost(t, int(s), self.neg_sample)

    def upper_grad_u(self, u, v):
        return np.zeros_like(u)

    def upper_grad_v(self, u, v):
        w, b = v
        if w == 0.0:
            return np.zeros(2)
        s = 1.0 if w > 0 else -1.0
        t = -b / w
        active = np.mean(s * (t - self.neg_sample) > 0.0)
        dxi_dt = s * active
        return np.array([dxi_dt * (b / w ** 2), dxi_dt * (-1.0 / w)])

    def project_u(self, u):
        return np.clip(u, self.lo, self.hi)
