"""Experiment orchestration: datasets, retraining over seeds, reports.

Reports use a structured-text format of `key = value` lines plus row
records::

    # certpoison report v1
    manifest.config_hash = 1f2e3d...
    manifest.attempted = 3
    row method=gauss_aug seed=0 acr=0.4047 aca=0.9 accuracy=0.91 status=ok
    agg method=gauss_aug acr_mean=... acr_sd=... aca_mean=... aca_sd=... included=3

Every row carries the configuration hash and seed index, so re-running a
manifest reproduces all numbers bit-exactly. Failed seeds stay visible: rows
are marked status=failed and the attempted/included counts always appear.

CSV format: no header; each row is d decimal feature values followed by one
integer label. Features are validated against `feature_range` (default
[0, 1]; widen it for unbounded synthetic data). Values are written with 9
significant digits, and save -> load is value-exact at that precision.
"""

from __future__ import annotations

import dataclasses
import hashlib
import statistics
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analytic import GaussToyConfig, gauss_toy_sample
from .attack import AttackConfig, PoisonSet, pacd_attack, watermark_baseline
from .bilevel import BilevelConfig
from .diffnet import Batch, NetworkSpec, forward_logits
from .errors import ContractViolationError, NumericalError, ParseError
from .rng import child_rng
from .smoothing import (CertifyConfig, SmoothingConfig, acr_aca,
                        std_normal_quantile)
from .training import TrainConfig, pgd_smoothed, train

REPORT_HEADER = "# certpoison report v1"


def save_csv(batch, path):
    """Write a Batch as rows of features (9 significant digits) + label."""
    with open(path, "w") as fh:
        for row, label in zip(batch.x, batch.y):
            fh.write(",".join(f"{v:.9g}" for v in row) + f",{int(label)}\n")


def load_csv(path, feature_range=(0.0, 1.0)):
    """Parse a feature CSV into a Batch, reporting the row of any defect."""
    lo, hi = feature_range
    xs = []
    ys = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
                if width < 2:
                    raise ParseError("rows need at least one feature and a label",
                                     row=lineno)
            elif len(cells) != width:
                raise ParseError(f"ragged row: {len(cells)} cells, expected {width}",
                                 row=lineno)
            try:
                feats = [float(c) for c in cells[:-1]]
            except ValueError:
                raise ParseError("unparseable feature value", row=lineno) from None
            try:
                label = int(cells[-1])
            except ValueError:
                raise ParseError("unparseable label", row=lineno) from None
            if any(not (lo <= f <= hi) for f in feats):
                raise ParseError(f"feature outside [{lo:g}, {hi:g}]", row=lineno)
            if label < 0:
                raise ParseError("negative label", row=lineno)
            xs.append(feats)
            ys.append(label)
    if not xs:
        raise ParseError("empty dataset")
    return Batch(np.array(xs, dtype=float), np.array(ys, dtype=int))


def save_poison(poison, directory):
    """Persist a PoisonSet: poison.csv + base.csv (Batch CSV) + manifest.txt."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_csv(poison.as_batch(), directory / "poison.csv")
    save_csv(Batch(poison.base_x, poison.labels), directory / "base.csv")
    with open(directory / "manifest.txt", "w") as fh:
        fh.write(f"eps = {poison.eps:.9g}\n")
        fh.write(f"box_lo = {poison.box[0]:.9g}\n")
        fh.write(f"box_hi = {poison.box[1]:.9g}\n")


def load_poison(directory, feature_range=None):
    """Rebuild a PoisonSet from save_poison output, re-checking the budget."""
    directory = Path(directory)
    manifest = {}
    with open(directory / "manifest.txt") as fh:
        for line in fh:
            if "=" in line:
                key, val = line.split("=", 1)
                manifest[key.strip()] = val.strip()
    eps = float(manifest["eps"])
    box = (float(manifest.get("box_lo", 0.0)), float(manifest.get("box_hi", 1.0)))
    if feature_range is None:
        feature_range = box
    composite = load_csv(directory / "poison.csv", feature_range=feature_range)
    base = load_csv(directory / "base.csv", feature_range=feature_range)
    return PoisonSet(base.x, base.y, composite.x - base.x, eps, box=box)


@dataclass
class ExperimentConfig:
    """Schema of the CLI configuration file: `key = value` lines using these
    field names (dashes and underscores are interchangeable); command-line
    flags of the same names override file values."""

    data: str = ""
    target_class: int = 0
    method: str = "gauss_aug"
    eps: float = 0.1
    sigma: float = 0.25
    n_seeds: int = 3
    eval_points: int = 500
    out: str = ""

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ContractViolationError("n_seeds must be >= 1")


def load_experiment_config(path):
    """Parse a `key = value` settings file into an ExperimentConfig;
    unknown keys are ignored (they belong to command-specific flags)."""
    fields = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", row=lineno)
            key, raw = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in fields:
                continue
            kind = fields[key]
            if kind == "int":
                values[key] = int(raw)
            elif kind == "float":
                values[key] = float(raw)
            else:
                values[key] = raw
    return ExperimentConfig(**values)


@dataclass
class DataSplits:
    """Training data plus target-class-only validation and evaluation sets."""

    train: Batch
    val: Batch
    eval_pts: Batch
    target_class: int

    @property
    def clean(self):
        """Training rows outside the target class."""
        return self.train.subset(np.flatnonzero(self.train.y != self.target_class))

    @property
    def base(self):
        """Target-class training rows (the attacker's starting points)."""
        return self.train.subset(np.flatnonzero(self.train.y == self.target_class))


def make_gauss_toy_splits(cfg, seed=0, n_val=300, n_eval=500):
    """Two-Gaussian toy: train both classes, val/eval from the target class."""
    train_batch = gauss_toy_sample(cfg, child_rng(seed, 1))
    val_cfg = dataclasses.replace(cfg, n_per_class=n_val)
    eval_cfg = dataclasses.replace(cfg, n_per_class=n_eval)
    val_all = gauss_toy_sample(val_cfg, child_rng(seed, 2))
    eval_all = gauss_toy_sample(eval_cfg, child_rng(seed, 3))
    val = val_all.subset(np.flatnonzero(val_all.y == 0))
    eval_pts = eval_all.subset(np.flatnonzero(eval_all.y == 0))
    return DataSplits(train_batch, val, eval_pts, target_class=0)


def make_blob_splits(dim=784, n_per_class=500, n_val=150, n_eval=200,
                     separation=2.0, noise_sd=0.08, seed=0, target_class=0):
    """Two smooth high-dimensional prototypes with Gaussian jitter in [0, 1]."""
    rng = child_rng(seed, 5)
    proto0 = np.clip(0.5 + 0.25 * np.sin(np.linspace(0, 6 * np.pi, dim))
                     + 0.05 * rng.standard_normal(dim), 0.15, 0.85)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    proto1 = np.clip(proto0 + separation * direction, 0.05, 0.95)

    def draw(n, stream):
        g = child_rng(seed, stream)
        half = n // 2
        x0 = np.clip(proto0 + noise_sd * g.standard_normal((half, dim)), 0.0, 1.0)
        x1 = np.clip(proto1 + noise_sd * g.standard_normal((n - half, dim)), 0.0, 1.0)
        return Batch(np.vstack([x0, x1]),
                     np.concatenate([np.zeros(half, int), np.ones(n - half, int)]))

    train_batch = draw(2 * n_per_class, 6)
    val_all = draw(2 * n_val, 7)
    eval_all = draw(2 * n_eval, 8)
    val = val_all.subset(np.flatnonzero(val_all.y == target_class))
    eval_pts = eval_all.subset(np.flatnonzero(eval_all.y == target_class))
    return DataSplits(train_batch, val, eval_pts, target_class=target_class)


def config_hash(*objs):
    """Short stable hash over the repr of configuration objects."""
    blob = "|".join(repr(o) for o in objs).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class SeedRow:
    method: str
    seed_index: int
    acr: float
    aca: float
    accuracy: float
    status: str
    config_hash: str


@dataclass
class Report:
    rows: list
    manifest: dict

    def aggregate(self, method=None):
        """Mean and sd of ACR/ACA/accuracy over succeeded seeds."""
        ok = [r for r in self.rows
              if r.status == "ok" and (method is None or r.method == method)]
        attempted = [r for r in self.rows
                     if method is None or r.method == method]
        if not ok:
            return {"attempted": len(attempted), "included": 0}
        out = {"attempted": len(attempted), "included": len(ok)}
        for name in ("acr", "aca", "accuracy"):
            vals = [getattr(r, name) for r in ok]
            out[f"{name}_mean"] = statistics.fmean(vals)
            out[f"{name}_sd"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
        return out

    def methods(self):
        seen = []
        for r in self.rows:
            if r.method not in seen:
                seen.append(r.method)
        return seen


def plain_accuracy(params, points):
    preds = forward_logits(params, points.x).argmax(axis=1)
    return float(np.mean(preds == points.y))


def retrain_and_certify(poison, clean, eval_pts, method, train_cfg, cert_cfg,
                        n_seeds, extras=None, box=(0.0, 1.0), net=None):
    """Train from scratch on clean + poison for each seed, then certify.

    Each seed derives its own init/shuffle/noise streams from
    (train_cfg.seed, seed index); a training run that diverges is marked
    failed and excluded from the aggregates but stays in the report.
    """
    if n_seeds < 1:
        raise ContractViolationError("n_seeds must be >= 1")
    if net is None:
        num_classes = max(2, int(max(clean.y.max(), poison.labels.max(),
                                     eval_pts.y.max())) + 1)
        net = NetworkSpec((clean.x.shape[1], num_classes), activation="identity")
    dataset = Batch(np.vstack([clean.x, poison.poisoned_x]),
                    np.concatenate([clean.y, poison.labels]))
    chash = config_hash(method, train_cfg, cert_cfg, net, poison.eps)
    rows = []
    for s in range(n_seeds):
        try:
            params = train(dataset, net, train_cfg, extras=extras,
                           seed=(train_cfg.seed, s), box=box)
            report = acr_aca(params, eval_pts, train_cfg.smoothing, cert_cfg,
                             rng=train_cfg.seed + 7919 * s)
            rows.append(SeedRow(method, s, report.acr, report.aca,
                                plain_accuracy(params, eval_pts), "ok", chash))
        except NumericalError:
            rows.append(SeedRow(method, s, 0.0, 0.0, 0.0, "failed", chash))
    manifest = {
        "config_hash": chash,
        "method": method,
        "n_seeds": n_seeds,
        "sigma": train_cfg.smoothing.sigma,
        "eps": poison.eps,
        "cert_n0": cert_cfg.n0,
        "cert_n": cert_cfg.n,
        "cert_alpha": cert_cfg.alpha_fail,
        "attempted": n_seeds,
        "included": sum(1 for r in rows if r.status == "ok"),
    }
    return Report(rows, manifest)


def transfer_matrix(poisons, clean, eval_pts, methods, train_cfgs, cert_cfg,
                    n_seeds, extras_by_method=None, box=(0.0, 1.0), net=None):
    """retrain_and_certify for every (generation method, evaluation method).

    `poisons` maps generation method -> PoisonSet (all sharing base points and
    eps); `train_cfgs` maps evaluation method -> TrainConfig. Returns a dict
    keyed by (generation, evaluation) pairs.
    """
    eps_values = {p.eps for p in poisons.values()}
    if len(eps_values) > 1:
        raise ContractViolationError("transfer poisons must share eps")
    extras_by_method = extras_by_method or {}
    grid = {}
    for gen_method, poison in poisons.items():
        for eval_method in methods:
            grid[(gen_method, eval_method)] = retrain_and_certify(
                poison, clean, eval_pts, eval_method, train_cfgs[eval_method],
                cert_cfg, n_seeds, extras=extras_by_method.get(eval_method),
                box=box, net=net)
    return grid


def epsilon_sweep(eps_list, splits, attack_cfg, train_cfg, cert_cfg, n_seeds,
                  extras=None, rng=None):
    """Full attack + retrain per eps; eps = 0 skips the attack entirely."""
    eps_list = list(eps_list)
    if any(b < a for a, b in zip(eps_list, eps_list[1:])):
        raise ContractViolationError("eps_list must be nondecreasing")
    if not eps_list or eps_list[0] != 0.0:
        raise ContractViolationError("eps_list must include 0 first")
    rng = rng or child_rng(attack_cfg.smoothing.seed, 41)
    clean, base = splits.clean, splits.base
    out = []
    for eps in eps_list:
        if eps == 0.0:
            poison = PoisonSet(base.x, base.y, np.zeros_like(base.x), 0.0,
                               box=attack_cfg.box)
        else:
            cfg = dataclasses.replace(attack_cfg, eps=eps)
            poison = pacd_attack(clean, base, splits.val, cfg, rng).poison
        report = retrain_and_certify(poison, clean, splits.eval_pts,
                                     train_cfg.method, train_cfg, cert_cfg,
                                     n_seeds, extras=extras, box=attack_cfg.box)
        out.append((eps, report))
    return out


def decay_sweep(decay_list, poison, clean, eval_pts, method, train_cfg,
                cert_cfg, n_seeds, extras=None, box=(0.0, 1.0), net=None):
    """Retrain with each weight-decay coefficient against a fixed poison."""
    out = []
    for decay in decay_list:
        cfg = dataclasses.replace(train_cfg, weight_decay=decay)
        out.append((decay, retrain_and_certify(poison, clean, eval_pts, method,
                                               cfg, cert_cfg, n_seeds,
                                               extras=extras, box=box, net=net)))
    return out


def _hard_smoothed_predict(params, x, sigma, m_aug, rng):
    noise = sigma * rng.standard_normal((m_aug, x.size))
    preds = forward_logits(params, x[None, :] + noise).argmax(axis=1)
    return int(np.bincount(preds, minlength=params.spec.num_classes).argmax())


@dataclass
class EmpiricalRobustness:
    mean_distortion: float
    per_point: tuple
    never_flipped: int
    already_misclassified: int


def empirical_robustness(params, eval_pts, sigma, m_aug, pgd_iters,
                         bound_lo, bound_hi, alpha_temp=1.0, seed=0,
                         box=(0.0, 1.0), halvings=12):
    """Mean minimal l2 distortion that flips the smoothed prediction.

    Per point: binary search over the l2 bound; at each candidate bound run
    the noise-averaged PGD attack with m_aug frozen draws and check whether
    the (vote-based) smoothed prediction leaves the true label. Points that
    never flip at bound_hi contribute bound_hi and are counted separately;
    points already misclassified contribute bound_lo.
    """
    if not bound_lo < bound_hi:
        raise ContractViolationError("need bound_lo < bound_hi")
    results = []
    never = 0
    misclassified = 0
    for i in range(len(eval_pts)):
        x = eval_pts.x[i]
        y = int(eval_pts.y[i])

        def flips(bound):
            x_adv = pgd_smoothed(params, x, [y], bound, pgd_iters, m_aug,
                                 sigma, alpha_temp, rng=child_rng(seed, i, 3),
                                 box=box)[0]
            pred = _hard_smoothed_predict(params, x_adv, sigma, m_aug,
                                          child_rng(seed, i, 4))
            return pred != y

        pred0 = _hard_smoothed_predict(params, x, sigma, m_aug,
                                       child_rng(seed, i, 4))
        if pred0 != y:
            misclassified += 1
            results.append(bound_lo)
            continue
        if not flips(bound_hi):
            never += 1
            results.append(bound_hi)
            continue
        lo, hi = bound_lo, bound_hi
        for _ in range(halvings):
            mid = 0.5 * (lo + hi)
            if flips(mid):
                hi = mid
            else:
                lo = mid
        results.append(hi)
    return EmpiricalRobustness(float(np.mean(results)), tuple(results),
                               never, misclassified)


def max_certifiable_radius(sigma):
    """Upper bound on any reported radius: sigma * Phi^-1(1 - 1e-6)."""
    return sigma * std_normal_quantile(1.0 - 1e-6)


# Shipped desk-scale benchmark protocols. Every constant below is part of the
# frozen, deterministic recipe the acceptance suite and the CLI examples run;
# the two-Gaussian numbers are only meaningful under this exact protocol.

TOY_BOX = (-5.0, 5.0)
TOY_DATA_SEED = 31


def gauss_toy_protocol(sigma, seed=TOY_DATA_SEED):
    """Frozen two-Gaussian benchmark: splits and all configs for one sigma."""
    splits = make_gauss_toy_splits(GaussToyConfig(sigma_smooth=sigma),
                                   seed=seed, n_val=300, n_eval=500)
    net = NetworkSpec((2, 2), activation="identity", init_seed=0)
    smoothing = SmoothingConfig(sigma=sigma, k=40, alpha_temp=8.0, seed=0)
    attack_cfg = AttackConfig(
        target_class=0, lower_method="gauss_aug", eps=0.1,
        smoothing=smoothing,
        bilevel=BilevelConfig(outer_iters=300, t1=50, t2=20, tau=10.0,
                              rho=0.5, beta=0.2, reinit_every=None,
                              warmup=400),
        net=net, clean_batch=500, poison_batch=500, val_batch=300,
        box=TOY_BOX)
    train_cfg = TrainConfig("gauss_aug", smoothing, lr=0.002, epochs=400,
                            batch_size=100, seed=0)
    cert_cfg = CertifyConfig(n0=100, n=100000, alpha_fail=0.001, batch=25000)
    return splits, attack_cfg, train_cfg, cert_cfg


def run_gauss_toy_benchmark(sigma, n_seeds=3, seed=TOY_DATA_SEED,
                            with_watermark=False, rng=None):
    """Attack the toy, retrain from scratch, certify; clean vs poisoned.

    Returns a dict of aggregates keyed 'clean', 'poisoned' (and 'watermark'
    when requested), plus the attack report under 'attack'.
    """
    splits, attack_cfg, train_cfg, cert_cfg = gauss_toy_protocol(sigma, seed)
    clean, base = splits.clean, splits.base
    rng = rng or child_rng(seed, 99)
    attack_report = pacd_attack(clean, base, splits.val, attack_cfg, rng)
    runs = {
        "clean": PoisonSet(base.x, base.y, np.zeros_like(base.x), 0.0,
                           box=TOY_BOX),
        "poisoned": attack_report.poison,
    }
    if with_watermark:
        runs["watermark"] = watermark_baseline(base, clean, 0.1,
                                               attack_cfg.eps,
                                               child_rng(seed, 98), box=TOY_BOX)
    out = {"attack": attack_report}
    for name, poison in runs.items():
        report = retrain_and_certify(poison, clean, splits.eval_pts,
                                     train_cfg.method, train_cfg, cert_cfg,
                                     n_seeds, box=TOY_BOX, net=attack_cfg.net)
        out[name] = report.aggregate()
    return out


def blob_benchmark_protocol(seed=0):
    """Frozen 784-dimensional two-class benchmark (dense ReLU net)."""
    splits = make_blob_splits(dim=784, n_per_class=500, n_val=150, n_eval=200,
                              separation=2.0, noise_sd=0.08, seed=seed)
    net = NetworkSpec((784, 32, 2), activation="relu", init_seed=0)
    smoothing = SmoothingConfig(sigma=0.25, k=8, alpha_temp=2.0, seed=0)
    attack_cfg = AttackConfig(
        target_class=0, lower_method="gauss_aug", eps=0.1,
        smoothing=smoothing,
        bilevel=BilevelConfig(outer_iters=100, t1=10, t2=10, tau=1.0,
                              rho=0.01, beta=1e-3, reinit_every=10,
                              warmup=150),
        net=net, clean_batch=250, poison_batch=150, val_batch=100)
    train_cfg = TrainConfig("gauss_aug", smoothing, lr=1e-3, epochs=30,
                            batch_size=128, seed=0)
    cert_cfg = CertifyConfig(n0=100, n=10000, alpha_fail=0.001, batch=2500)
    return splits, attack_cfg, train_cfg, cert_cfg


def write_radius_report(radius_report, path):
    """Per-point certification rows for a smoothing.RadiusReport."""
    lines = ["# certpoison radius report v1",
             f"acr = {radius_report.acr:.9g}",
             f"aca = {radius_report.aca:.9g}"]
    for row in radius_report.per_point:
        lines.append(f"point index={row.index} label={row.true_label} "
                     f"verdict={row.result.verdict} "
                     f"radius={row.result.radius:.9g} "
                     f"pa_lower={row.result.pa_lower:.9g} "
                     f"counted={row.counted_radius:.9g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(report, path):
    lines = [REPORT_HEADER]
    for key in sorted(report.manifest):
        lines.append(f"manifest.{key} = {report.manifest[key]}")
    for r in report.rows:
        lines.append(
            f"row method={r.method} seed={r.seed_index} acr={r.acr:.9g} "
            f"aca={r.aca:.9g} accuracy={r.accuracy:.9g} status={r.status} "
            f"config_hash={r.config_hash}")
    for method in report.methods():
        agg = report.aggregate(method)
        if agg["included"]:
            lines.append(
                f"agg method={method} acr_mean={agg['acr_mean']:.9g} "
                f"acr_sd={agg['acr_sd']:.9g} aca_mean={agg['aca_mean']:.9g} "
                f"aca_sd={agg['aca_sd']:.9g} included={agg['included']} "
                f"attempted={agg['attempted']}")
        else:
            lines.append(f"agg method={method} included=0 "
                         f"attempted={agg['attempted']}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report(path):
    manifest = {}
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != REPORT_HEADER:
            raise ParseError(f"not a report file: {header!r}", row=1)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("manifest."):
                key, val = line[len("manifest."):].split("=", 1)
                manifest[key.strip()] = val.strip()
            elif line.startswith("row "):
                fields = dict(tok.split("=", 1) for tok in line[4:].split())
                rows.append(SeedRow(fields["method"], int(fields["seed"]),
                                    float(fields["acr"]), float(fields["aca"]),
                                    float(fields["accuracy"]), fields["status"],
                                    fields.get("config_hash", "")))
            elif not line.startswith("agg "):
                raise ParseError("unrecognized report line", row=lineno)
    return Report(rows, manifest)


def plot_data(series):
    """(x, mean, sd) triples, one per line, for external plotting.

    `series` is a list of (x, Report) pairs; the mean/sd are the ACR
    aggregates of each report's first method.
    """
    lines = []
    for x, report in series:
        agg = report.aggregate()
        lines.append(f"{x:.9g} {agg.get('acr_mean', 0.0):.9g} "
                     f"{agg.get('acr_sd', 0.0):.9g}")
    return "\n".join(lines) + "\n"
