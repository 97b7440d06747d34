"""Randomized smoothing: hard and soft smoothing, certified radii, ACR/ACA.

The Monte-Carlo `certify` follows the two-phase procedure of standard
randomized-smoothing practice: guess the top class from n0 noisy votes, then
lower-bound its probability with n more votes via a one-sided Clopper-Pearson
bound and certify the radius sigma * Phi^-1(pA_lower). The two-sided radius
formula (sigma/2) * (Phi^-1(pA) - Phi^-1(pB)) is kept available for soft
radii, where both class probabilities are observed.

Sampling is split into chunks, each drawn from a child stream keyed by
(seed, point index, phase, chunk index); counts are commutative sums, so
serial and parallel chunk evaluation produce identical certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .diffnet import forward_logits, tempered_softmax
from .errors import ContractViolationError, DomainError
from .rng import child_rng

ABSTAIN = -1

# Arguments of Phi^-1 are clamped into [PROB_CLAMP, 1 - PROB_CLAMP] inside the
# soft radius so the attack never differentiates through an infinity.
PROB_CLAMP = 1e-6

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Rational approximation of the standard normal quantile (Acklam), refined
# below with one Newton step against the erf-based CDF.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


@dataclass(frozen=True)
class SmoothingConfig:
    """Noise level, soft-smoothing sample count, inverse temperature, seed."""

    sigma: float
    k: int = 20
    alpha_temp: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ContractViolationError("sigma must be nonnegative")
        if self.k < 1:
            raise ContractViolationError("k must be >= 1")
        if not self.alpha_temp > 0:
            raise ContractViolationError("alpha_temp must be positive")


@dataclass(frozen=True)
class CertifyConfig:
    """Monte-Carlo certification parameters (selection n0, estimation n)."""

    n0: int = 100
    n: int = 100000
    alpha_fail: float = 0.001
    batch: int = 10000

    def __post_init__(self):
        if not 1 <= self.n0 <= self.n:
            raise ContractViolationError("need n >= n0 >= 1")
        if not 0.0 < self.alpha_fail < 1.0:
            raise ContractViolationError("alpha_fail must lie in (0, 1)")
        if self.batch < 1:
            raise ContractViolationError("batch must be >= 1")


@dataclass(frozen=True)
class CertificationResult:
    """Predicted class (or ABSTAIN) with its certified l2 radius."""

    verdict: int
    radius: float
    pa_lower: float

    @property
    def is_abstain(self):
        return self.verdict == ABSTAIN


@dataclass(frozen=True)
class PointResult:
    index: int
    true_label: int
    result: CertificationResult
    counted_radius: float


@dataclass(frozen=True)
class RadiusReport:
    """Per-point certificates plus ACR and approximate certified accuracy."""

    per_point: tuple
    acr: float
    aca: float


def std_normal_cdf(x):
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / _SQRT2)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT2PI


def std_normal_quantile(p):
    """Inverse standard normal CDF, accurate to well below 1e-9 absolute."""
    p_arr = np.asarray(p, dtype=float)
    scalar = p_arr.ndim == 0
    p_arr = np.atleast_1d(p_arr)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)) or not np.all(np.isfinite(p_arr)):
        raise DomainError("quantile argument must lie strictly in (0, 1)")
    x = np.empty_like(p_arr)

    low = p_arr < _P_LOW
    high = p_arr > 1.0 - _P_LOW
    mid = ~(low | high)

    if np.any(mid):
        q = p_arr[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num * q / den

    for sel, tail_p, sign in ((low, p_arr[low], 1.0), (high, 1.0 - p_arr[high], -1.0)):
        if np.any(sel):
            q = np.sqrt(-2.0 * np.log(tail_p))
            num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
            den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
            x[sel] = sign * num / den

    # One Newton refinement against the erf-based CDF; skipped where the
    # density underflows (approximation error is far below 1e-9 there anyway).
    pdf = std_normal_pdf(x)
    ok = pdf > 1e-290
    x[ok] -= (std_normal_cdf(x[ok]) - p_arr[ok]) / pdf[ok]
    return float(x[0]) if scalar else x


def clamped_quantile_and_slope(p):
    """Phi^-1 of a probability clamped into [PROB_CLAMP, 1 - PROB_CLAMP],
    plus its derivative in p (zero where the clamp is active)."""
    clamped = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    q = std_normal_quantile(clamped)
    slope = np.where((p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP),
                     1.0 / std_normal_pdf(q), 0.0)
    return q, slope


def quantile_slope(p):
    """d/dp of std_normal_quantile: 1 / pdf(quantile(p))."""
    return 1.0 / std_normal_pdf(std_normal_quantile(p))


def clopper_pearson_lower(successes, trials, alpha_fail):
    """One-sided lower confidence bound on a binomial proportion.

    The bound is the p solving P[Bin(trials, p) >= successes] = alpha_fail,
    computed through the Beta-quantile characterization of the exact
    (Clopper-Pearson) interval. Zero successes return 0.
    """
    successes = int(successes)
    trials = int(trials)
    if trials < 1 or not 0 <= successes <= trials:
        raise ContractViolationError("need 0 <= successes <= trials, trials >= 1")
    if not 0.0 < alpha_fail < 1.0:
        raise ContractViolationError("alpha_fail must lie in (0, 1)")
    if successes == 0:
        return 0.0
    return float(special.betaincinv(successes, trials - successes + 1, alpha_fail))


def certified_radius_two_sided(pa, pb, sigma):
    """(sigma/2) * (Phi^-1(pa) - Phi^-1(pb)) with probabilities clamped."""
    pa = float(np.clip(pa, PROB_CLAMP, 1.0 - PROB_CLAMP))
    pb = float(np.clip(pb, PROB_CLAMP, 1.0 - PROB_CLAMP))
    return 0.5 * sigma * (std_normal_quantile(pa) - std_normal_quantile(pb))


def radius_from_counts(top_class, counts, n, sigma, alpha_fail):
    """Certificate from a vote histogram: class + sigma * Phi^-1(pA_lower)."""
    counts = np.asarray(counts, dtype=int)
    if int(counts.sum()) != int(n):
        raise ContractViolationError("counts must sum to n")
    pa = clopper_pearson_lower(int(counts[top_class]), int(n), alpha_fail)
    if pa > 0.5:
        return CertificationResult(int(top_class), sigma * std_normal_quantile(pa), pa)
    return CertificationResult(ABSTAIN, 0.0, pa)


def _noise_votes(params, x, sigma, num, batch, seed, point_index, phase):
    """Per-class hard-vote counts over `num` Gaussian corruptions of x."""
    num_classes = params.spec.num_classes
    counts = np.zeros(num_classes, dtype=np.int64)
    x = np.asarray(x, dtype=float).ravel()
    for chunk_index, start in enumerate(range(0, num, batch)):
        m = min(batch, num - start)
        g = child_rng(seed, 7, point_index, phase, chunk_index)
        noisy = x[None, :] + sigma * g.standard_normal((m, x.size))
        preds = forward_logits(params, noisy).argmax(axis=1)
        counts += np.bincount(preds, minlength=num_classes)
    return counts


def certify(params, x, smoothing, cert, rng=None, point_index=0):
    """Monte-Carlo certification of the smoothed classifier at x.

    Draws cert.n0 noisy copies to select the top class, cert.n more to bound
    its probability, and delegates to radius_from_counts. With probability at
    least 1 - cert.alpha_fail the returned class equals the smoothed
    prediction and the prediction is constant within the returned l2 radius.
    `rng` is an integer seed (defaults to smoothing.seed); all draws come from
    child streams keyed by (seed, point_index, phase, chunk).
    """
    seed = smoothing.seed if rng is None else int(rng)
    counts0 = _noise_votes(params, x, smoothing.sigma, cert.n0, cert.batch,
                           seed, point_index, phase=0)
    top = int(counts0.argmax())
    counts = _noise_votes(params, x, smoothing.sigma, cert.n, cert.batch,
                          seed, point_index, phase=1)
    return radius_from_counts(top, counts, cert.n, smoothing.sigma, cert.alpha_fail)


def soft_smooth_output(params, x, smoothing, rng=None):
    """Mean tempered softmax over k Gaussian corruptions of a single input."""
    if rng is None:
        rng = child_rng(smoothing.seed, 11)
    x = np.asarray(x, dtype=float).ravel()
    noise = smoothing.sigma * rng.standard_normal((smoothing.k, x.size))
    probs = tempered_softmax(forward_logits(params, x[None, :] + noise),
                             smoothing.alpha_temp)
    return probs.mean(axis=0)


def soft_radius(probs, true_label, sigma):
    """Soft certified radius; 0 when the soft prediction is wrong.

    Ties in the argmax break toward the smallest class index. Probabilities
    are clamped before Phi^-1 so the value stays finite and differentiable
    almost everywhere (the attack differentiates through this formula).
    """
    probs = np.asarray(probs, dtype=float).ravel()
    true_label = int(true_label)
    if int(probs.argmax()) != true_label:
        return 0.0
    others = np.delete(probs, true_label)
    return certified_radius_two_sided(probs[true_label], others.max(), sigma)


def acr_aca(params, points, smoothing, cert, rng=None):
    """Certify every point; ACR averages counted radii, ACA counts radius > 0.

    The counted radius is the certified radius when the verdict matches the
    true label and 0 for misclassified or abstained points.
    """
    if len(points) == 0:
        raise ContractViolationError("no evaluation points")
    rows = []
    for i in range(len(points)):
        res = certify(params, points.x[i], smoothing, cert, rng=rng, point_index=i)
        counted = res.radius if res.verdict == int(points.y[i]) else 0.0
        rows.append(PointResult(i, int(points.y[i]), res, counted))
    counted = np.array([r.counted_radius for r in rows])
    return RadiusReport(tuple(rows), float(counted.mean()), float((counted > 0).mean()))
