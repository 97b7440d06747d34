"""Directional experiment-level checks on the toy benchmark (moderate cost)."""

import dataclasses

import numpy as np
import pytest

from certpoison.analytic import GaussToyConfig
from certpoison.attack import AttackConfig, PoisonSet, pacd_attack
from certpoison.bilevel import BilevelConfig
from certpoison.diffnet import NetworkSpec
from certpoison.evalharness import (epsilon_sweep, make_gauss_toy_splits,
                                    transfer_matrix)
from certpoison.rng import child_rng
from certpoison.smoothing import CertifyConfig, SmoothingConfig
from certpoison.training import (GAUSS_AUG, MACER, SMOOTH_ADV, MacerParams,
                                 SmoothAdvParams, TrainConfig)

BOX = (-5.0, 5.0)


@pytest.fixture(scope="module")
def toy():
    splits = make_gauss_toy_splits(GaussToyConfig(sigma_smooth=0.25), seed=31,
                                   n_val=200, n_eval=200)
    smoothing = SmoothingConfig(sigma=0.25, k=20, alpha_temp=8.0, seed=0)
    attack_cfg = AttackConfig(
        target_class=0, lower_method=GAUSS_AUG, eps=0.1, smoothing=smoothing,
        bilevel=BilevelConfig(outer_iters=80, t1=30, t2=15, tau=10.0, rho=0.5,
                              beta=0.2, reinit_every=None, warmup=300),
        net=NetworkSpec((2, 2), activation="identity"),
        clean_batch=400, poison_batch=400, val_batch=200, box=BOX)
    train_cfg = TrainConfig(GAUSS_AUG, smoothing, lr=0.005, epochs=150,
                            batch_size=100, seed=0)
    cert = CertifyConfig(n0=100, n=20000, alpha_fail=0.001, batch=20000)
    return splits, attack_cfg, train_cfg, cert


class TestTransferDirectional:
    def test_poison_transfers_across_training_methods(self, toy):
        splits, attack_cfg, train_cfg, cert = toy
        clean, base = splits.clean, splits.base
        rep = pacd_attack(clean, base, splits.val, attack_cfg, child_rng(31, 7))
        poisons = {
            GAUSS_AUG: rep.poison,
            "none": PoisonSet(base.x, base.y, np.zeros_like(base.x),
                              attack_cfg.eps, box=BOX),
        }
        methods = [GAUSS_AUG, MACER, SMOOTH_ADV]
        cfgs = {m: dataclasses.replace(train_cfg, method=m) for m in methods}
        extras = {MACER: MacerParams(k=8, lam=2.0, gamma=4.0),
                  SMOOTH_ADV: SmoothAdvParams(adv_l2=0.25, pgd_steps=2,
                                              k_noise=1)}
        grid = transfer_matrix(poisons, clean, splits.eval_pts, methods, cfgs,
                               cert, n_seeds=1, extras_by_method=extras,
                               box=BOX)
        assert len(grid) == len(poisons) * len(methods)
        # the poison generated against gauss_aug reduces ACR under every
        # evaluation method, relative to the no-op poison baseline
        for method in methods:
            clean_acr = grid[("none", method)].aggregate()["acr_mean"]
            pois_acr = grid[(GAUSS_AUG, method)].aggregate()["acr_mean"]
            assert pois_acr < clean_acr, (method, pois_acr, clean_acr)


class TestEpsilonSweepTrend:
    def test_acr_nonincreasing_in_budget(self, toy):
        splits, attack_cfg, train_cfg, cert = toy
        sweep_cfg = dataclasses.replace(
            attack_cfg,
            bilevel=dataclasses.replace(attack_cfg.bilevel, outer_iters=60))
        series = epsilon_sweep([0.0, 0.1, 0.2, 0.3], splits, sweep_cfg,
                               train_cfg, cert, n_seeds=2,
                               rng=child_rng(31, 8))
        acrs = [rep.aggregate()["acr_mean"] for _, rep in series]
        sds = [rep.aggregate()["acr_sd"] for _, rep in series]
        assert series[0][0] == 0.0
        for i in range(1, len(acrs)):
            slack = max(sds[i - 1], sds[i], 0.01)
            assert acrs[i] <= acrs[i - 1] + slack, (acrs, sds)
        # the largest budget must show a clear absolute reduction
        assert acrs[-1] <= acrs[0] - 0.10
