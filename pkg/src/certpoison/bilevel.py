"""Approximate-hypergradient bilevel solver.

Solves min_u xi(u, v*(u)) s.t. v*(u) = argmin_v zeta(u, v) by alternating:
a few plain gradient steps on v, an iterative solve of the linear system
H q = grad_v xi with H the lower-level Hessian (accessed only through
Hessian-vector products), the hypergradient p = grad_u xi - H_uv q, and a
projected step on u. q is warm-started across outer iterations; the lower
variable can be periodically reinitialized so the poison does not overfit one
local minimum (q is reset to zero then, since the stale system no longer
matches the fresh v).

Problems supply first-order gradients; curvature defaults to central finite
differences of those gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, NumericalError


@dataclass(frozen=True)
class BilevelConfig:
    """Step counts and step sizes for the alternating solver."""

    outer_iters: int = 50
    t1: int = 10
    t2: int = 10
    tau: float = 0.1
    rho: float = 0.001
    beta: float = 0.01
    reinit_every: int | None = 10
    fd_step: float = 1e-4
    warmup: int = 0  # extra lower steps whenever v is freshly initialized

    def __post_init__(self):
        if self.outer_iters < 1 or self.t1 < 1 or self.t2 < 1:
            raise ContractViolationError("iteration counts must be >= 1")
        if self.tau < 0 or not self.rho > 0 or not self.beta > 0:
            raise ContractViolationError("step sizes must be positive (tau >= 0)")
        if self.reinit_every is not None and self.reinit_every < 1:
            raise ContractViolationError("reinit_every must be >= 1 or None")
        if not self.fd_step > 0:
            raise ContractViolationError("fd_step must be positive")
        if self.warmup < 0:
            raise ContractViolationError("warmup must be nonnegative")


@dataclass
class BilevelState:
    u: np.ndarray
    v: np.ndarray
    q: np.ndarray | None = None
    iteration: int = 0


def _fd_directional(grad_fn, v, q, fd_step):
    """(grad(v + h qhat) - grad(v - h qhat)) * |q| / 2h, h scaled to |v|."""
    q = np.asarray(q, dtype=float)
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        return np.zeros_like(np.asarray(grad_fn(v), dtype=float))
    h = fd_step * (1.0 + float(np.linalg.norm(v)))
    qhat = q / qn
    gp = np.asarray(grad_fn(v + h * qhat), dtype=float)
    gm = np.asarray(grad_fn(v - h * qhat), dtype=float)
    return (gp - gm) * (qn / (2.0 * h))


class BilevelProblem:
    """Interface the solver drives.

    Subclasses implement the gradients of the upper cost xi and lower cost
    zeta, initial values, and the feasibility projection for u. Curvature
    (hvp_vv, hvp_uv) defaults to finite differences of the first-order
    gradients; override with exact products when available. Stochastic
    problems may resample their frozen mini-batch in `begin_outer`.
    """

    def initial_u(self):
        raise NotImplementedError

    def init_v(self, rng):
        raise NotImplementedError

    def begin_outer(self, iteration, rng, u, v):
        pass

    def upper_value(self, u, v):
        raise NotImplementedError

    def upper_grad_u(self, u, v):
        raise NotImplementedError

    def upper_grad_v(self, u, v):
        raise NotImplementedError

    def lower_grad_u(self, u, v):
        raise NotImplementedError

    def lower_grad_v(self, u, v):
        raise NotImplementedError

    def project_u(self, u):
        return u

    def hvp_vv(self, u, v, q, fd_step):
        return _fd_directional(lambda w: self.lower_grad_v(u, w), v, q, fd_step)

    def hvp_uv(self, u, v, q, fd_step):
        return _fd_directional(lambda w: self.lower_grad_u(u, w), v, q, fd_step)


def lower_solve(problem, state, t1, rho):
    """t1 plain gradient steps on v at fixed u."""
    if t1 < 1:
        raise ContractViolationError("t1 must be >= 1")
    v = state.v
    for _ in range(t1):
        g = np.asarray(problem.lower_grad_v(state.u, v), dtype=float)
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite lower-level gradient")
        v = v - rho * g
    return BilevelState(u=state.u, v=v, q=state.q, iteration=state.iteration)


def solve_linear_system(problem, state, t2, beta, fd_step=1e-4, events=None):
    """Gradient descent on |H q - g|^2 for q, warm-started from state.q.

    g = grad_v xi at the current (u, v); each iteration costs two
    Hessian-vector products. If the residual norm grows for 5 consecutive
    iterations, beta is halved and iteration continues (logged to `events`).
    Returns (q, residual_norm_of_returned_q).
    """
    if t2 < 1:
        raise ContractViolationError("t2 must be >= 1")
    u, v = state.u, state.v
    g = np.asarray(problem.upper_grad_v(u, v), dtype=float)
    if state.q is not None and state.q.shape == g.shape:
        q = state.q.copy()
    else:
        q = np.zeros_like(g)
    b = beta
    bad_streak = 0
    prev_res = None
    for t in range(t2):
        hq = problem.hvp_vv(u, v, q, fd_step)
        r = hq - g
        res = float(np.linalg.norm(r))
        if not np.isfinite(res):
            # the iterate blew past float range: back off hard and retry
            q = np.zeros_like(g)
            b *= 0.25
            bad_streak = 0
            prev_res = None
            if events is not None:
                events.append({"kind": "beta_reset", "t": t, "beta": b})
            if b < 1e-30:
                raise NumericalError("linear-system step size underflowed")
            continue
        if prev_res is not None and res > prev_res:
            bad_streak += 1
            if bad_streak >= 5:
                b *= 0.5
                bad_streak = 0
                if events is not None:
                    events.append({"kind": "beta_halved", "t": t, "beta": b})
        else:
            bad_streak = 0
        prev_res = res
        hr = problem.hvp_vv(u, v, r, fd_step)
        q = q - b * 2.0 * hr
    if not np.all(np.isfinite(q)):
        q = np.zeros_like(g)
    final_res = float(np.linalg.norm(problem.hvp_vv(u, v, q, fd_step) - g))
    return q, final_res


def hypergradient(problem, state, fd_step=1e-4):
    """grad_u xi - H_uv q at the current iterate; q must be solved already."""
    if state.q is None:
        raise ContractViolationError("hypergradient needs a solved q")
    gu = np.asarray(problem.upper_grad_u(state.u, state.v), dtype=float)
    return gu - problem.hvp_uv(state.u, state.v, state.q, fd_step)


def projected_update(u, p, tau, eps, u_base, box_lo=0.0, box_hi=1.0):
    """Step u - tau*p clamped into the eps-ball around u_base and the box."""
    lo = np.maximum(np.asarray(u_base, dtype=float) - eps, box_lo)
    hi = np.minimum(np.asarray(u_base, dtype=float) + eps, box_hi)
    return np.clip(np.asarray(u, dtype=float) - tau * np.asarray(p, dtype=float), lo, hi)


def solve(problem, cfg, rng):
    """Run the full alternating scheme; returns (u_final, history).

    History holds one row per outer iteration: the upper value xi evaluated
    after the lower solve, the final linear-system residual, the hypergradient
    norm, and any step-size events.
    """
    u = np.array(problem.initial_u(), dtype=float)
    state = BilevelState(u=u, v=np.asarray(problem.init_v(rng), dtype=float))
    history = []
    for m in range(cfg.outer_iters):
        fresh_v = m == 0
        if cfg.reinit_every is not None and m > 0 and m % cfg.reinit_every == 0:
            state.v = np.asarray(problem.init_v(rng), dtype=float)
            state.q = None
            fresh_v = True
        problem.begin_outer(m, rng, state.u, state.v)
        t1 = cfg.t1 + (cfg.warmup if fresh_v else 0)
        state = lower_solve(problem, state, t1, cfg.rho)
        events = []
        q, residual = solve_linear_system(problem, state, cfg.t2, cfg.beta,
                                          cfg.fd_step, events=events)
        state.q = q
        p = hypergradient(problem, state, cfg.fd_step)
        xi = float(problem.upper_value(state.u, state.v))
        state.u = problem.project_u(state.u - cfg.tau * p)
        state.iteration = m + 1
        history.append({
            "iteration": m,
            "xi": xi,
            "residual": residual,
            "p_norm": float(np.linalg.norm(p)),
            "events": events,
        })
    return state.u, history


def history_rows(history):
    """History as structured-text rows: iteration, xi, residual, |p|."""
    lines = ["iteration xi residual p_norm"]
    for row in history:
        lines.append(f"{row['iteration']} {row['xi']:.9g} "
                     f"{row['residual']:.9g} {row['p_norm']:.9g}")
    return "\n".join(lines) + "\n"
