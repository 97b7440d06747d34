"""Command-line interface.

Commands: gen-data, attack, retrain-certify, transfer, sweep-eps,
sweep-decay, emp-robust, oracle, report. Settings may come from a config
file of `key = value` lines (same names as the long flags, dashes or
underscores); explicit flags override file values. Exit codes: 0 success,
1 contract/parse error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analytic, evalharness
from .attack import (AttackConfig, ClassWide, Fraction, TargetPoints,
                     pacd_attack, select_poison_indices, standard_poison,
                     watermark_baseline)
from .bilevel import BilevelConfig
from .diffnet import Batch, NetworkSpec
from .errors import ContractViolationError, NumericalError, ParseError
from .rng import child_rng
from .smoothing import CertifyConfig, SmoothingConfig
from .training import (GAUSS_AUG, MACER, METHODS, SMOOTH_ADV, MacerParams,
                       SmoothAdvParams, TrainConfig, train)


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", row=lineno)
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _merge_config(args, argv):
    """Fill settings from --config file values; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    file_values = _read_config_file(args.config)
    given = {opt.lstrip("-").replace("-", "_").split("=", 1)[0]
             for opt in argv if opt.startswith("--")}
    for key, raw in file_values.items():
        if not hasattr(args, key) or key in given:
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, raw.lower() in ("1", "true", "yes"))
        elif isinstance(current, int) and not isinstance(current, bool):
            setattr(args, key, int(raw))
        elif isinstance(current, float):
            setattr(args, key, float(raw))
        else:
            setattr(args, key, raw)
    return args


def _feature_range(args):
    return (args.feature_lo, args.feature_hi)


def _load_splits(args):
    data = Path(args.data)
    rng = _feature_range(args)
    train_batch = evalharness.load_csv(data / "train.csv", feature_range=rng)
    val = evalharness.load_csv(data / "val.csv", feature_range=rng)
    eval_pts = evalharness.load_csv(data / "eval.csv", feature_range=rng)
    return evalharness.DataSplits(train_batch, val, eval_pts, args.target_class)


def _net_spec(args, input_dim, num_classes):
    hidden = [int(h) for h in args.hidden.split(",") if h.strip()] if args.hidden else []
    activation = "relu" if hidden else "identity"
    return NetworkSpec((input_dim, *hidden, num_classes), activation,
                       init_seed=args.seed)


def _parse_mode(text):
    if text == "class-wide":
        return ClassWide()
    if text.startswith("fraction:"):
        return Fraction(float(text.split(":", 1)[1]))
    if text.startswith("targets:"):
        parts = text.split(":")
        indices = tuple(int(i) for i in parts[1].split(","))
        pool = int(parts[2].split("=", 1)[1]) if len(parts) > 2 else 1
        return TargetPoints(indices, pool)
    raise ContractViolationError(f"unknown mode {text!r}")


def _train_cfg(args, method):
    smoothing = SmoothingConfig(sigma=args.sigma, k=args.k,
                                alpha_temp=args.alpha_temp, seed=args.seed)
    return TrainConfig(method=method, smoothing=smoothing, lr=args.lr,
                       epochs=args.epochs, batch_size=args.batch_size,
                       weight_decay=args.weight_decay, seed=args.seed)


def _extras_for(method, args):
    if method == MACER:
        return MacerParams(k=args.macer_k, lam=args.macer_lam,
                           gamma=args.macer_gamma)
    if method == SMOOTH_ADV:
        return SmoothAdvParams(adv_l2=args.adv_l2, pgd_steps=args.pgd_steps,
                               k_noise=args.k_noise)
    return None


def _cert_cfg(args):
    return CertifyConfig(n0=args.n0, n=args.n, alpha_fail=args.alpha,
                         batch=args.cert_batch)


def _box(args):
    return (args.box_lo, args.box_hi)


def cmd_gen_data(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "gauss-toy":
        cfg = analytic.GaussToyConfig(n_per_class=args.n_per_class,
                                      eps=args.eps, sigma_smooth=args.sigma)
        splits = evalharness.make_gauss_toy_splits(cfg, seed=args.seed,
                                                   n_val=args.n_val,
                                                   n_eval=args.n_eval)
    elif args.kind == "blobs":
        splits = evalharness.make_blob_splits(dim=args.dim,
                                              n_per_class=args.n_per_class,
                                              n_val=args.n_val,
                                              n_eval=args.n_eval,
                                              seed=args.seed)
    else:
        raise ContractViolationError(f"unknown dataset kind {args.kind!r}")
    evalharness.save_csv(splits.train, out / "train.csv")
    evalharness.save_csv(splits.val, out / "val.csv")
    evalharness.save_csv(splits.eval_pts, out / "eval.csv")
    print(f"wrote train/val/eval CSVs to {out} "
          f"({len(splits.train)} train rows, target class {splits.target_class})")
    return 0


def cmd_attack(args):
    splits = _load_splits(args)
    clean, base = splits.clean, splits.base
    rng = child_rng(args.seed, 53)
    if args.method == "watermark":
        poison = watermark_baseline(base, clean, args.opacity, args.eps, rng,
                                    box=_box(args))
        history = ()
    elif args.method == "standard":
        bcfg = BilevelConfig(outer_iters=args.outer_iters, t1=args.t1,
                             t2=args.t2, tau=args.tau, rho=args.rho,
                             beta=args.beta, reinit_every=args.reinit_every or None)
        net = _net_spec(args, clean.x.shape[1], int(splits.train.y.max()) + 1)
        report = standard_poison(clean, base, splits.val, args.eps, bcfg, rng,
                                 net, box=_box(args))
        poison, history = report.poison, report.upper_history
    else:
        lower = {"pacd-gauss-aug": GAUSS_AUG, "pacd-macer": MACER,
                 "pacd-smooth-adv": SMOOTH_ADV}.get(args.method)
        if lower is None:
            raise ContractViolationError(f"unknown attack method {args.method!r}")
        smoothing = SmoothingConfig(sigma=args.sigma, k=args.k,
                                    alpha_temp=args.alpha_temp, seed=args.seed)
        bcfg = BilevelConfig(outer_iters=args.outer_iters, t1=args.t1,
                             t2=args.t2, tau=args.tau, rho=args.rho,
                             beta=args.beta, reinit_every=args.reinit_every or None)
        net = _net_spec(args, clean.x.shape[1], int(splits.train.y.max()) + 1)
        cfg = AttackConfig(target_class=args.target_class, lower_method=lower,
                           eps=args.eps, smoothing=smoothing, bilevel=bcfg,
                           net=net, clean_batch=args.clean_batch,
                           poison_batch=args.poison_batch,
                           val_batch=args.val_batch, mode=_parse_mode(args.mode),
                           macer=MacerParams(k=args.macer_k, lam=args.macer_lam,
                                             gamma=args.macer_gamma),
                           smoothadv=SmoothAdvParams(adv_l2=args.adv_l2,
                                                     pgd_steps=args.pgd_steps,
                                                     k_noise=args.k_noise),
                           weight_decay=args.weight_decay, box=_box(args))
        if not isinstance(cfg.mode, ClassWide):
            # non-class-wide modes: only the pool is perturbable, the rest of
            # the training data (including unselected target rows) stays clean
            pool_idx = select_poison_indices(splits.train, cfg, val=splits.val)
            base = splits.train.subset(pool_idx)
            rest = np.setdiff1d(np.arange(len(splits.train)), pool_idx)
            clean = splits.train.subset(rest)
        report = pacd_attack(clean, base, splits.val, cfg, rng)
        poison, history = report.poison, report.upper_history
    out = Path(args.out)
    evalharness.save_poison(poison, out)
    with open(out / "attack_manifest.txt", "w") as fh:
        fh.write(f"method = {args.method}\n")
        fh.write(f"eps = {args.eps:.9g}\n")
        fh.write(f"sigma = {args.sigma:.9g}\n")
        fh.write(f"seed = {args.seed}\n")
        fh.write(f"target_class = {args.target_class}\n")
        if history:
            fh.write("upper_history = " +
                     ",".join(f"{h:.6g}" for h in history) + "\n")
    print(f"poison written to {out} ({len(poison)} rows, eps={args.eps})")
    if history:
        print(f"upper cost: {history[0]:.4f} -> {history[-1]:.4f}")
    return 0


def cmd_retrain_certify(args):
    splits = _load_splits(args)
    poison = evalharness.load_poison(Path(args.poison),
                                     feature_range=_feature_range(args))
    method = args.method
    if method not in METHODS:
        raise ContractViolationError(f"unknown training method {method!r}")
    cfg = _train_cfg(args, method)
    net = _net_spec(args, splits.train.x.shape[1], int(splits.train.y.max()) + 1)
    report = evalharness.retrain_and_certify(
        poison, splits.clean, splits.eval_pts, method, cfg, _cert_cfg(args),
        args.seeds, extras=_extras_for(method, args), box=_box(args), net=net)
    evalharness.write_report(report, args.out)
    agg = report.aggregate(method)
    print(f"{method}: ACR {agg.get('acr_mean', float('nan')):.4f} "
          f"+- {agg.get('acr_sd', 0.0):.4f}, "
          f"ACA {agg.get('aca_mean', float('nan')):.4f} "
          f"({agg['included']}/{agg['attempted']} seeds)")
    print(f"report written to {args.out}")
    return 0


def cmd_transfer(args):
    splits = _load_splits(args)
    poisons = {}
    for pair in args.poisons.split(","):
        name, directory = pair.split("=", 1)
        poisons[name] = evalharness.load_poison(Path(directory),
                                                feature_range=_feature_range(args))
    methods = args.methods.split(",")
    train_cfgs = {m: _train_cfg(args, m) for m in methods}
    extras = {m: _extras_for(m, args) for m in methods}
    net = _net_spec(args, splits.train.x.shape[1], int(splits.train.y.max()) + 1)
    grid = evalharness.transfer_matrix(poisons, splits.clean, splits.eval_pts,
                                       methods, train_cfgs, _cert_cfg(args),
                                       args.seeds, extras_by_method=extras,
                                       box=_box(args), net=net)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for (gen, ev), report in grid.items():
        evalharness.write_report(report, out / f"transfer_{gen}_to_{ev}.txt")
        agg = report.aggregate(ev)
        print(f"{gen} -> {ev}: ACR {agg.get('acr_mean', float('nan')):.4f} "
              f"ACA {agg.get('aca_mean', float('nan')):.4f}")
    return 0


def cmd_sweep_eps(args):
    splits = _load_splits(args)
    eps_list = [float(e) for e in args.eps_list.split(",")]
    smoothing = SmoothingConfig(sigma=args.sigma, k=args.k,
                                alpha_temp=args.alpha_temp, seed=args.seed)
    bcfg = BilevelConfig(outer_iters=args.outer_iters, t1=args.t1, t2=args.t2,
                         tau=args.tau, rho=args.rho, beta=args.beta,
                         reinit_every=args.reinit_every or None)
    net = _net_spec(args, splits.train.x.shape[1], int(splits.train.y.max()) + 1)
    positive = [e for e in eps_list if e > 0]
    acfg = AttackConfig(target_class=args.target_class, lower_method=GAUSS_AUG,
                        eps=max(positive) if positive else args.eps,
                        smoothing=smoothing, bilevel=bcfg, net=net,
                        clean_batch=args.clean_batch,
                        poison_batch=args.poison_batch, val_batch=args.val_batch,
                        box=_box(args))
    series = evalharness.epsilon_sweep(eps_list, splits, acfg,
                                       _train_cfg(args, args.method),
                                       _cert_cfg(args), args.seeds,
                                       extras=_extras_for(args.method, args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for eps, report in series:
        evalharness.write_report(report, out / f"eps_{eps:g}.txt")
        agg = report.aggregate()
        print(f"eps={eps:g}: ACR {agg.get('acr_mean', float('nan')):.4f}")
    with open(out / "plot_data.txt", "w") as fh:
        fh.write(evalharness.plot_data(series))
    return 0


def cmd_sweep_decay(args):
    splits = _load_splits(args)
    poison = evalharness.load_poison(Path(args.poison),
                                     feature_range=_feature_range(args))
    decays = [float(d) for d in args.decay_list.split(",")]
    net = _net_spec(args, splits.train.x.shape[1], int(splits.train.y.max()) + 1)
    series = evalharness.decay_sweep(decays, poison, splits.clean,
                                     splits.eval_pts, args.method,
                                     _train_cfg(args, args.method),
                                     _cert_cfg(args), args.seeds,
                                     extras=_extras_for(args.method, args),
                                     box=_box(args), net=net)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for decay, report in series:
        evalharness.write_report(report, out / f"decay_{decay:g}.txt")
        agg = report.aggregate()
        print(f"decay={decay:g}: ACR {agg.get('acr_mean', float('nan')):.4f}")
    with open(out / "plot_data.txt", "w") as fh:
        fh.write(evalharness.plot_data(series))
    return 0


def cmd_emp_robust(args):
    splits = _load_splits(args)
    if args.poison:
        poison = evalharness.load_poison(Path(args.poison),
                                         feature_range=_feature_range(args))
        dataset_base = poison
    else:
        base = splits.base
        dataset_base = evalharness.PoisonSet(base.x, base.y,
                                             np.zeros_like(base.x), 0.0,
                                             box=_box(args))
    cfg = _train_cfg(args, args.method)
    net = _net_spec(args, splits.train.x.shape[1], int(splits.train.y.max()) + 1)
    dataset = Batch(np.vstack([splits.clean.x, dataset_base.poisoned_x]),
                    np.concatenate([splits.clean.y, dataset_base.labels]))
    vals = []
    lines = ["# certpoison empirical robustness v1"]
    for s in range(args.seeds):
        params = train(dataset, net, cfg, extras=_extras_for(args.method, args),
                       seed=(cfg.seed, s), box=_box(args))
        eval_subset = splits.eval_pts.subset(np.arange(min(args.points,
                                                           len(splits.eval_pts))))
        res = evalharness.empirical_robustness(
            params, eval_subset, args.sigma, args.m_aug, args.pgd_iters,
            args.bound_lo, args.bound_hi, alpha_temp=args.alpha_temp,
            seed=cfg.seed + s, box=_box(args))
        vals.append(res.mean_distortion)
        print(f"seed {s}: mean distortion {res.mean_distortion:.4f} "
              f"(never flipped: {res.never_flipped}, "
              f"already wrong: {res.already_misclassified})")
        lines.append(f"seed={s} mean_distortion={res.mean_distortion:.9g} "
                     f"never_flipped={res.never_flipped} "
                     f"already_misclassified={res.already_misclassified}")
    print(f"mean over seeds: {float(np.mean(vals)):.4f}")
    if args.out:
        lines.append(f"mean_over_seeds = {float(np.mean(vals)):.9g}")
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_oracle(args):
    toy = analytic.gauss_toy_oracle(analytic.GaussToyConfig(eps=args.eps))
    print(f"gauss toy: clean {toy.clean_acr_analytic:.5f} -> "
          f"poisoned {toy.poisoned_acr_analytic:.5f} (drop {toy.drop:.5f})")
    rng = child_rng(args.seed, 61)
    agree = 0
    for _ in range(args.instances):
        n = int(rng.integers(2, 12))
        x_neg = np.sort(rng.uniform(0.0, 0.45, n))
        x_pos = np.sort(rng.uniform(0.55, 1.0, n))
        inst = analytic.Linear1dInstance(tuple(x_pos), tuple(x_neg),
                                         float(rng.uniform(0.02, 0.2)))
        opt = analytic.theorem1_optima(inst)
        best_cost = None
        for shift in np.linspace(-inst.eps, inst.eps, 201):
            w, b, t = analytic.least_squares_linear_1d(x_pos, x_neg + shift)
            cost = analytic.eq4_upper_cost(t, 1 if w > 0 else -1, x_neg)
            if best_cost is None or cost < best_cost:
                best_cost = cost
        w, b, t = analytic.least_squares_linear_1d(x_pos, opt.case1)
        closed = analytic.eq4_upper_cost(t, 1 if w > 0 else -1, x_neg)
        if closed <= best_cost + 1e-9:
            agree += 1
    print(f"closed-form optimum attains the grid minimum on "
          f"{agree}/{args.instances} random instances")
    inst = analytic.Linear1dInstance((1.0, 0.9), (0.0, 0.1), 0.1)
    frac = analytic.corollary1_threshold(inst, 0.5, 0.2)
    full = analytic.corollary1_threshold(inst, 1.0, 0.1)
    print(f"fraction equivalence |t_frac - t_full| = {abs(frac - full):.2e}")
    return 0 if agree == args.instances else 2


def cmd_report(args):
    reports = [evalharness.read_report(p) for p in args.files]
    if args.plot_data:
        xs = ([float(x) for x in args.xs.split(",")] if args.xs
              else list(range(len(reports))))
        if len(xs) != len(reports):
            raise ContractViolationError("need one x per report file")
        sys.stdout.write(evalharness.plot_data(list(zip(xs, reports))))
        return 0
    for path, report in zip(args.files, reports):
        print(f"== {path}")
        for method in report.methods():
            agg = report.aggregate(method)
            if agg["included"]:
                print(f"  {method}: ACR {agg['acr_mean']:.4f} "
                      f"+- {agg['acr_sd']:.4f}, ACA {agg['aca_mean']:.4f} "
                      f"({agg['included']}/{agg['attempted']} seeds)")
            else:
                print(f"  {method}: no successful seeds "
                      f"({agg['attempted']} attempted)")
    return 0


def _add_common(p):
    p.add_argument("--config", default=None, help="key = value settings file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.25)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--target-class", type=int, default=0)
    p.add_argument("--feature-lo", type=float, default=0.0)
    p.add_argument("--feature-hi", type=float, default=1.0)
    p.add_argument("--box-lo", type=float, default=0.0)
    p.add_argument("--box-hi", type=float, default=1.0)
    p.add_argument("--hidden", default="", help="comma list of hidden widths")
    p.add_argument("--k", type=int, default=20, help="soft smoothing draws")
    p.add_argument("--alpha-temp", type=float, default=8.0)


def _add_train_flags(p):
    p.add_argument("--method", default=GAUSS_AUG)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--macer-k", type=int, default=16)
    p.add_argument("--macer-lam", type=float, default=4.0)
    p.add_argument("--macer-gamma", type=float, default=8.0)
    p.add_argument("--adv-l2", type=float, default=0.5)
    p.add_argument("--pgd-steps", type=int, default=2)
    p.add_argument("--k-noise", type=int, default=1)


def _add_cert_flags(p):
    p.add_argument("--n0", type=int, default=100)
    p.add_argument("--n", type=int, default=100000)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--cert-batch", type=int, default=10000)


def _add_bilevel_flags(p):
    p.add_argument("--outer-iters", type=int, default=50)
    p.add_argument("--t1", type=int, default=10)
    p.add_argument("--t2", type=int, default=10)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--rho", type=float, default=0.001)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--reinit-every", type=int, default=10)
    p.add_argument("--clean-batch", type=int, default=200)
    p.add_argument("--poison-batch", type=int, default=100)
    p.add_argument("--val-batch", type=int, default=100)


def build_parser():
    parser = argparse.ArgumentParser(prog="certpoison")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write synthetic train/val/eval CSVs")
    _add_common(p)
    p.add_argument("--kind", default="gauss-toy", choices=["gauss-toy", "blobs"])
    p.add_argument("--n-per-class", type=int, default=500)
    p.add_argument("--n-val", type=int, default=300)
    p.add_argument("--n-eval", type=int, default=500)
    p.add_argument("--dim", type=int, default=784)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("attack", help="optimize a poison set")
    _add_common(p)
    _add_train_flags(p)
    _add_bilevel_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", default="class-wide")
    p.add_argument("--opacity", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack, method="pacd-gauss-aug")

    p = sub.add_parser("retrain-certify", help="retrain on a poison and certify")
    _add_common(p)
    _add_train_flags(p)
    _add_cert_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--poison", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrain_certify)

    p = sub.add_parser("transfer", help="cross-method retraining grid")
    _add_common(p)
    _add_train_flags(p)
    _add_cert_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--poisons", required=True,
                   help="comma list of method=poison_dir pairs")
    p.add_argument("--methods", required=True, help="comma list of methods")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("sweep-eps", help="attack + retrain over a budget grid")
    _add_common(p)
    _add_train_flags(p)
    _add_cert_flags(p)
    _add_bilevel_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--eps-list", default="0,0.1,0.2,0.3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_eps)

    p = sub.add_parser("sweep-decay", help="retrain over weight-decay grid")
    _add_common(p)
    _add_train_flags(p)
    _add_cert_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--poison", required=True)
    p.add_argument("--decay-list", default="0,1e-4,1e-2,1e-1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_decay)

    p = sub.add_parser("emp-robust", help="mean minimal PGD distortion")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--poison", default=None)
    p.add_argument("--m-aug", type=int, default=20)
    p.add_argument("--pgd-iters", type=int, default=100)
    p.add_argument("--bound-lo", type=float, default=0.01)
    p.add_argument("--bound-hi", type=float, default=10.0)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--out", default=None, help="optional summary file")
    p.set_defaults(func=cmd_emp_robust)

    p = sub.add_parser("oracle", help="closed-form sanity checks")
    _add_common(p)
    p.add_argument("--instances", type=int, default=50)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="aggregate report files / emit plot data")
    p.add_argument("files", nargs="+")
    p.add_argument("--plot-data", action="store_true")
    p.add_argument("--xs", default=None, help="comma list of x values")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args, argv)
        return args.func(args)
    except (ContractViolationError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
