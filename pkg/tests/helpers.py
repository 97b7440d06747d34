"""Independent oracles used to freeze expected values in the tests.

Everything here is deliberately implemented from first principles (bisection,
exhaustive tail sums, straight-line arithmetic, finite differences) without
touching the code paths under test.
"""

import math

import numpy as np

from certpoison.bilevel import BilevelProblem


def phi(x):
    """Standard normal CDF from the error function."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def bisect_quantile(p, lo=-13.0, hi=13.0, iters=90):
    """Solve phi(x) = p by bisection."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if phi(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _log_binom_coeffs(k, n):
    from scipy.special import gammaln
    js = np.arange(k, n + 1)
    return js, gammaln(n + 1) - gammaln(js + 1) - gammaln(n - js + 1)


def binomial_tail(k, n, p, _pre=None):
    """P[Bin(n, p) >= k] by an exact log-space sum."""
    if k <= 0:
        return 1.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    js, logc = _log_binom_coeffs(k, n) if _pre is None else _pre
    log_terms = logc + js * math.log(p) + (n - js) * math.log1p(-p)
    m = log_terms.max()
    return float(np.exp(m) * np.exp(log_terms - m).sum())


def bisect_clopper_lower(k, n, alpha, iters=80):
    """Solve P[Bin(n, p) >= k] = alpha for p by bisection."""
    if k == 0:
        return 0.0
    pre = _log_binom_coeffs(k, n)
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if binomial_tail(k, n, mid, _pre=pre) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def straight_line_forward(params, x):
    """Re-implements the dense forward pass with explicit Python loops."""
    spec = params.spec
    sizes = spec.layer_sizes
    flat = params.flat
    h = [list(map(float, row)) for row in np.atleast_2d(x)]
    pos = 0
    for li in range(len(sizes) - 1):
        fi, fo = sizes[li], sizes[li + 1]
        w = [[flat[pos + r * fo + c] for c in range(fo)] for r in range(fi)]
        pos += fi * fo
        b = [flat[pos + c] for c in range(fo)]
        pos += fo
        nxt = []
        for row in h:
            out = []
            for c in range(fo):
                acc = b[c]
                for r in range(fi):
                    acc += row[r] * w[r][c]
                if spec.activation == "relu" and li < len(sizes) - 2:
                    acc = max(acc, 0.0)
                out.append(acc)
            nxt.append(out)
        h = nxt
    return np.array(h)


def central_diff_grad(f, x, step=1e-5, coords=None):
    """Central finite differences of a scalar function at selected coords."""
    x = np.asarray(x, dtype=float)
    coords = range(x.size) if coords is None else coords
    out = {}
    for i in coords:
        e = np.zeros_like(x)
        e[i] = step
        out[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return out


def check_grad(f, grad, x, coords, step=1e-5, rel_tol=1e-4, floor=1e-8):
    """Assert grad[i] matches central differences at the given coordinates."""
    fd = central_diff_grad(f, x, step=step, coords=coords)
    worst = 0.0
    for i, fdi in fd.items():
        denom = max(abs(fdi), abs(grad[i]), floor)
        rel = abs(grad[i] - fdi) / denom
        worst = max(worst, rel)
    assert worst <= rel_tol, f"worst relative gradient error {worst:.3g}"
    return worst


class QuadraticBilevel(BilevelProblem):
    """xi = 1/2 (v - a)'A(v - a) + 1/2 (u - c)'C(u - c),
    zeta = 1/2 v'Bv + u'Dv (+ const). v*(u) = -B^{-1} D'u, and the exact
    hypergradient is grad_u xi - D B^{-1} grad_v xi."""

    def __init__(self, A, B, C, D, a, c, u0):
        self.A, self.B, self.C, self.D = A, B, C, D
        self.a, self.c = a, c
        self.u0 = np.asarray(u0, dtype=float)

    def initial_u(self):
        return self.u0.copy()

    def init_v(self, rng):
        return rng.standard_normal(self.B.shape[0])

    def v_star(self, u):
        return -np.linalg.solve(self.B, self.D.T @ u)

    def upper_value(self, u, v):
        dv = v - self.a
        du = u - self.c
        return 0.5 * dv @ self.A @ dv + 0.5 * du @ self.C @ du

    def upper_grad_u(self, u, v):
        return self.C @ (u - self.c)

    def upper_grad_v(self, u, v):
        return self.A @ (v - self.a)

    def lower_grad_v(self, u, v):
        return self.B @ v + self.D.T @ u

    def lower_grad_u(self, u, v):
        return self.D @ v

    def exact_hypergradient(self, u):
        v = self.v_star(u)
        return self.upper_grad_u(u, v) - self.D @ np.linalg.solve(
            self.B, self.upper_grad_v(u, v))

    def reduced_objective(self, u):
        return self.upper_value(u, self.v_star(u))


def random_quadratic(dim_u, dim_v, seed, u0_scale=1.0):
    rng = np.random.default_rng(seed)

    def spd(d, lo=0.5, hi=2.0):
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        return q @ np.diag(rng.uniform(lo, hi, d)) @ q.T

    A = spd(dim_v)
    B = spd(dim_v)
    C = spd(dim_u)
    D = 0.3 * rng.standard_normal((dim_u, dim_v))
    a = rng.standard_normal(dim_v)
    c = rng.standard_normal(dim_u)
    u0 = u0_scale * rng.standard_normal(dim_u)
    return QuadraticBilevel(A, B, C, D, a, c, u0)
