"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Every tolerance is pinned here; the benchmark protocols (data seeds,
solver constants, certification parameters) are the frozen recipes shipped in
certpoison.evalharness, so all numbers are deterministic.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from certpoison.analytic import (GaussToyConfig, Linear1dInstance,
                                 Linear1dPoisonProblem, corollary1_threshold,
                                 eq4_upper_cost, gauss_toy_oracle,
                                 least_squares_linear_1d, theorem1_optima)
from certpoison.attack import PoisonSet, pacd_attack, watermark_baseline
from certpoison.bilevel import (BilevelConfig, BilevelState, hypergradient,
                                lower_solve, solve, solve_linear_system)
from certpoison.diffnet import Batch, NetworkSpec, init_params, loss_grad
from certpoison.evalharness import (blob_benchmark_protocol,
                                    empirical_robustness,
                                    gauss_toy_protocol, retrain_and_certify,
                                    run_gauss_toy_benchmark)
from certpoison.rng import child_rng
from certpoison.smoothing import clopper_pearson_lower, std_normal_quantile
from certpoison.training import (MacerParams, SmoothAdvParams,
                                 gauss_aug_loss_frozen, macer_loss_frozen,
                                 pgd_smoothed, train)

from helpers import (bisect_clopper_lower, bisect_quantile, central_diff_grad,
                     random_quadratic)

TOY_TARGETS = {0.25: (0.4047, 0.3585), 0.5: (0.4139, 0.3587),
             0.75: (0.4123, 0.3544)}


def report_line(criterion, passed, detail):
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    assert passed, detail


class TestCriterion1ToyReproduction:
    def test_toy_gaussian_acr_aca_windows(self):
        start = time.time()
        details = []
        passed = True
        for sigma in (0.25, 0.5, 0.75):
            out = run_gauss_toy_benchmark(sigma, n_seeds=3)
            pc, pp = TOY_TARGETS[sigma]
            c, p = out["clean"], out["poisoned"]
            ok = (0.37 <= c["acr_mean"] <= 0.45
                  and abs(c["acr_mean"] - pc) <= 0.03
                  and 0.32 <= p["acr_mean"] <= 0.39
                  and abs(p["acr_mean"] - pp) <= 0.03
                  and 0.88 <= c["aca_mean"] <= 0.92
                  and 0.856 <= p["aca_mean"] <= 0.896)
            passed &= ok
            details.append(f"s={sigma}: {c['acr_mean']:.4f}/{c['aca_mean']:.3f}"
                           f"->{p['acr_mean']:.4f}/{p['aca_mean']:.3f}")
        elapsed = time.time() - start
        passed &= elapsed <= 600
        report_line(1, passed,
                    "; ".join(details) + f" (targets 0.4047->0.3585 etc, "
                    f"{elapsed:.0f}s <= 600s)")


class TestCriterion2AnalyticOracle:
    def test_reference_values_to_1e9(self):
        oracle = gauss_toy_oracle(GaussToyConfig())
        ok = (abs(oracle.clean_acr_analytic - 0.3 * np.sqrt(2)) <= 1e-9
              and abs(oracle.poisoned_acr_analytic - 0.25 * np.sqrt(2)) <= 1e-9
              and abs(oracle.drop - 0.1 / np.sqrt(2)) <= 1e-9
              and abs(oracle.clean_acr_analytic - 0.42426) <= 1e-5
              and abs(oracle.poisoned_acr_analytic - 0.35355) <= 1e-5
              and abs(oracle.drop - 0.07071) <= 1e-5)
        report_line(2, ok, f"{oracle.clean_acr_analytic:.6f} -> "
                           f"{oracle.poisoned_acr_analytic:.6f} "
                           f"(drop {oracle.drop:.6f})")


class TestCriterion3Theorem1Recovery:
    def test_solver_matches_closed_form_on_100_instances(self):
        start = time.time()
        rng = np.random.default_rng(314)
        cfg = BilevelConfig(outer_iters=60, t1=40, t2=60, tau=1.0, rho=0.3,
                            beta=0.1, reinit_every=None, warmup=200)
        worst_dev = 0.0
        grid_hits = 0
        for trial in range(100):
            n = int(rng.integers(2, 21))
            x_neg = np.sort(rng.uniform(0.0, 0.45, n))
            x_pos = np.sort(rng.uniform(0.55, 1.0, n))
            # stay in the unique-global regime: budget below the mean gap
            gap = (x_pos.sum() - x_neg.sum()) / n
            eps = float(rng.uniform(0.02, min(0.12, 0.8 * gap)))
            inst = Linear1dInstance(tuple(x_pos), tuple(x_neg), eps)
            opt = theorem1_optima(inst)
            assert opt.case2 is None

            u, _ = solve(Linear1dPoisonProblem(inst), cfg, child_rng(trial))
            worst_dev = max(worst_dev, float(np.max(np.abs(u - opt.case1)) / eps))

            best = np.inf
            for shift in np.linspace(-eps, eps, 201):
                w, b, t = least_squares_linear_1d(x_pos, x_neg + shift)
                best = min(best, eq4_upper_cost(t, 1 if w > 0 else -1, x_neg))
            w, b, t = least_squares_linear_1d(x_pos, opt.case1)
            closed = eq4_upper_cost(t, 1 if w > 0 else -1, x_neg)
            grid_hits += closed <= best + 1e-9
        elapsed = time.time() - start
        ok = worst_dev <= 0.01 and grid_hits == 100 and elapsed <= 120
        report_line(3, ok, f"worst |u - u*|_inf = {worst_dev:.4f} * eps "
                           f"(<= 0.01), grid confirms {grid_hits}/100, "
                           f"{elapsed:.0f}s <= 120s")


class TestCriterion4Corollary1:
    def test_closed_form_exact_and_bilevel_agreement(self):
        # closed form: fractional threshold equals full threshold with
        # eps = alpha * eps_tilde, exactly
        rng = np.random.default_rng(41)
        worst_closed = 0.0
        for _ in range(50):
            n = int(rng.integers(1, 8)) * 4
            x_neg = tuple(rng.uniform(0.0, 0.4, n))
            x_pos = tuple(rng.uniform(0.6, 1.0, n))
            inst = Linear1dInstance(x_pos, x_neg, 0.05)
            for alpha in (0.25, 0.5, 0.75, 1.0):
                eps_tilde = float(rng.uniform(0.05, 0.2))
                t_frac = corollary1_threshold(inst, alpha, eps_tilde)
                full = Linear1dInstance(x_pos, x_neg, alpha * eps_tilde)
                worst_closed = max(worst_closed,
                                   abs(t_frac - theorem1_optima(full).t_case1))

        # end to end: solve the fraction-mode and full-mode bilevel problems
        n, alpha, eps_tilde = 8, 0.5, 0.16
        grid = np.random.default_rng(42)
        x_neg = np.sort(grid.uniform(0.05, 0.40, n))
        x_pos = np.sort(grid.uniform(0.60, 0.95, n))
        eps_eq = alpha * eps_tilde
        cfg = BilevelConfig(outer_iters=80, t1=40, t2=40, tau=0.5, rho=0.3,
                            beta=0.3, reinit_every=None)

        full_inst = Linear1dInstance(tuple(x_pos), tuple(x_neg), eps_eq)
        u_full, _ = solve(Linear1dPoisonProblem(full_inst), cfg, child_rng(43))
        _, _, t_full = least_squares_linear_1d(x_pos, u_full)

        frac_inst = Linear1dInstance(tuple(x_pos), tuple(x_neg), eps_tilde)
        per_point = np.zeros(n)
        per_point[: int(alpha * n)] = eps_tilde
        u_frac, _ = solve(Linear1dPoisonProblem(frac_inst,
                                                per_point_eps=per_point),
                          cfg, child_rng(44))
        _, _, t_frac = least_squares_linear_1d(x_pos, u_frac)
        bilevel_dev = abs(t_frac - t_full)

        ok = worst_closed <= 1e-12 and bilevel_dev <= 0.02 * eps_eq
        report_line(4, ok, f"closed-form deviation {worst_closed:.2e} <= 1e-12, "
                           f"bilevel |t_frac - t_full| = {bilevel_dev:.2e} "
                           f"<= {0.02 * eps_eq:.2e}")


class TestCriterion5HypergradientFidelity:
    def test_quadratics_up_to_dim_50(self):
        worst_exact = worst_fd = 0.0
        for seed, (du, dv) in enumerate([(5, 8), (20, 35), (40, 50)]):
            problem = random_quadratic(du, dv, seed=seed)
            state = BilevelState(u=problem.initial_u(),
                                 v=problem.init_v(child_rng(seed)))
            state = lower_solve(problem, state, 50, 0.45)
            q, _ = solve_linear_system(problem, state, 50, 0.45)
            state.q = q
            p = hypergradient(problem, state)
            exact = problem.exact_hypergradient(state.u)
            worst_exact = max(worst_exact, float(
                np.linalg.norm(p - exact) / np.linalg.norm(exact)))
            fd = np.array([central_diff_grad(problem.reduced_objective,
                                             state.u, coords=[i])[i]
                           for i in range(du)])
            worst_fd = max(worst_fd, float(
                np.linalg.norm(p - fd) / np.linalg.norm(fd)))
        ok = worst_exact <= 1e-3 and worst_fd <= 1e-3
        report_line(5, ok, f"T1=T2=50: vs analytic {worst_exact:.2e}, "
                           f"vs finite differences {worst_fd:.2e} (<= 1e-3)")


class TestCriterion6ConfidenceBounds:
    def test_clopper_pearson_and_quantile(self):
        rng = np.random.default_rng(6)
        worst_cp = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 1500))
            k = int(rng.integers(0, n + 1))
            alpha = float(rng.uniform(1e-4, 0.25))
            got = clopper_pearson_lower(k, n, alpha)
            want = bisect_clopper_lower(k, n, alpha)
            worst_cp = max(worst_cp, abs(got - want))

        n, p_true, alpha, trials = 400, 0.8, 0.05, 10000
        ks = rng.binomial(n, p_true, size=trials)
        by_k = {k: clopper_pearson_lower(int(k), n, alpha)
                for k in np.unique(ks)}
        coverage = float(np.mean([by_k[k] <= p_true for k in ks]))
        floor = 1 - alpha - 3 * np.sqrt(alpha * (1 - alpha) / trials)

        worst_q = 0.0
        for p in rng.uniform(1e-6, 1 - 1e-6, 500):
            worst_q = max(worst_q,
                          abs(std_normal_quantile(p) - bisect_quantile(p)))

        ok = worst_cp <= 1e-10 and coverage >= floor and worst_q <= 1e-8
        report_line(6, ok, f"CP vs tail bisection {worst_cp:.2e} <= 1e-10 "
                           f"(1000 triples), coverage {coverage:.4f} >= "
                           f"{floor:.4f}, quantile vs bisection "
                           f"{worst_q:.2e} <= 1e-8")


class TestCriterion7GradientSuite:
    def test_every_loss_passes_finite_differences(self):
        spec = NetworkSpec((4, 8, 3), init_seed=7)
        params = init_params(spec)
        rng = np.random.default_rng(7)
        batch = Batch(rng.uniform(size=(10, 4)), rng.integers(0, 3, 10))
        sigma = 0.3
        checks = {}

        def rel_err(f, grad):
            coords = rng.choice(spec.num_params, 20, replace=False)
            fd = central_diff_grad(f, params.flat, coords=coords)
            worst = 0.0
            for i, fdi in fd.items():
                denom = max(abs(fdi), abs(grad[i]), 1e-8)
                worst = max(worst, abs(grad[i] - fdi) / denom)
            return worst

        _, g, _ = loss_grad(params, batch)
        checks["cross_entropy"] = rel_err(
            lambda v: loss_grad(params.with_flat(v), batch)[0], g)

        noise = sigma * child_rng(70).standard_normal(batch.x.shape)
        _, g, _ = gauss_aug_loss_frozen(params, batch, noise, 0.0)
        checks["gauss_aug"] = rel_err(
            lambda v: gauss_aug_loss_frozen(params.with_flat(v), batch,
                                            noise, 0.0)[0], g)

        macer = MacerParams(k=4, lam=2.0, gamma=8.0)
        knoise = sigma * child_rng(71).standard_normal((4,) + batch.x.shape)
        _, g, _ = macer_loss_frozen(params, batch, knoise, macer, sigma, 1.0, 0.0)
        checks["macer"] = rel_err(
            lambda v: macer_loss_frozen(params.with_flat(v), batch, knoise,
                                        macer, sigma, 1.0, 0.0)[0], g)

        sa = SmoothAdvParams(adv_l2=0.4, pgd_steps=3, k_noise=2)
        x_adv = pgd_smoothed(params, batch.x, batch.y, sa.adv_l2, sa.pgd_steps,
                             sa.k_noise, sigma, 1.0, child_rng(72))
        adv_batch = Batch(x_adv, batch.y)
        _, g, _ = gauss_aug_loss_frozen(params, adv_batch, noise, 0.0)
        checks["smooth_adv"] = rel_err(
            lambda v: gauss_aug_loss_frozen(params.with_flat(v), adv_batch,
                                            noise, 0.0)[0], g)

        ok = all(v <= 1e-4 for v in checks.values())
        report_line(7, ok, ", ".join(f"{k} {v:.2e}" for k, v in checks.items())
                    + " (<= 1e-4 at 20 random coordinates)")


class TestCriterion8DeskScaleAttack:
    def test_784_dim_class_wide_attack(self):
        start = time.time()
        splits, attack_cfg, train_cfg, cert_cfg = blob_benchmark_protocol()
        clean, base = splits.clean, splits.base
        rep = pacd_attack(clean, base, splits.val, attack_cfg, child_rng(0, 77))
        wm = watermark_baseline(base, clean, 0.1, attack_cfg.eps,
                                child_rng(0, 76))
        runs = {
            "clean": PoisonSet(base.x, base.y, np.zeros_like(base.x), 0.0),
            "pacd": rep.poison,
            "watermark": wm,
        }
        acr = {}
        for name, poison in runs.items():
            report = retrain_and_certify(poison, clean, splits.eval_pts,
                                         train_cfg.method, train_cfg, cert_cfg,
                                         n_seeds=3, net=attack_cfg.net)
            acr[name] = report.aggregate()["acr_mean"]
        reduction = 1 - acr["pacd"] / acr["clean"]
        reduction_wm = 1 - acr["watermark"] / acr["clean"]
        elapsed = time.time() - start
        ok = reduction >= 0.20 and reduction_wm < reduction and elapsed <= 1800
        report_line(8, ok, f"clean ACR {acr['clean']:.3f}, poisoned "
                           f"{acr['pacd']:.3f} ({reduction:.1%} >= 20%), "
                           f"watermark {acr['watermark']:.3f} "
                           f"({reduction_wm:+.1%} < pacd), "
                           f"{elapsed:.0f}s <= 1800s")


class TestCriterion9EmpiricalRobustness:
    def test_pgd_distortion_vs_analytic_distance(self):
        sigma = 0.25
        splits, attack_cfg, train_cfg, _ = gauss_toy_protocol(sigma)
        clean, base = splits.clean, splits.base
        eval_sub = splits.eval_pts.subset(np.arange(60))

        # analytic oracle: per-point distance to the clean Bayes bisector
        mu1, mu2 = np.array([0.2, 0.2]), np.array([0.8, 0.8])
        nrm = (mu2 - mu1) / np.linalg.norm(mu2 - mu1)
        mid = 0.5 * (mu1 + mu2)
        dist = (mid - eval_sub.x) @ nrm
        oracle = float(np.mean(np.maximum(dist, 0.01)))

        rep = pacd_attack(clean, base, splits.val, attack_cfg, child_rng(31, 99))
        measured = {}
        for name, delta in (("clean", np.zeros_like(base.x)),
                            ("poisoned", rep.poison.delta)):
            vals = []
            for s in range(3):
                data = Batch(np.vstack([clean.x, base.x + delta]),
                             np.concatenate([clean.y, base.y]))
                params = train(data, attack_cfg.net, train_cfg, seed=(0, s),
                               box=(-5.0, 5.0))
                res = empirical_robustness(params, eval_sub, sigma, m_aug=20,
                                           pgd_iters=100, bound_lo=0.01,
                                           bound_hi=10.0, alpha_temp=1.0,
                                           seed=s, box=(-5.0, 5.0))
                vals.append(res.mean_distortion)
            measured[name] = float(np.mean(vals))
        rel_dev = abs(measured["clean"] - oracle) / oracle
        ok = rel_dev <= 0.15 and measured["poisoned"] < measured["clean"]
        report_line(9, ok, f"clean mean distortion {measured['clean']:.4f} vs "
                           f"analytic {oracle:.4f} (rel dev {rel_dev:.3f} <= "
                           f"0.15), poisoned {measured['poisoned']:.4f} < clean")


class TestCriterion10NonReproducibilityStatement:
    def test_readme_states_desk_scale_limits(self):
        readme = Path(__file__).resolve().parents[1] / "README.md"
        text = " ".join(readme.read_text().split())
        needle = "full-scale CNN/ResNet results on MNIST and CIFAR10"
        ok = needle in text and "out of desk-scale reach" in text
        statement = ("the exact full-scale CNN/ResNet results on MNIST and "
                     "CIFAR10 are out of desk-scale reach; the acceptance "
                     "suite substitutes analytic oracles and property checks "
                     "on small dense models")
        print(f"statement: {statement}")
        report_line(10, ok, "README carries the explicit desk-scale "
                            "non-reproducibility statement")
