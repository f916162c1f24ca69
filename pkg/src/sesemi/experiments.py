"""End-to-end experiment runs: data preparation, training and artifacts."""

import json
import logging
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import checkpoint
from .config import ExperimentConfig
from .datasets import (
    Dataset,
    load_cifar10,
    make_split,
    save_points_csv,
    three_spirals,
    two_moons,
)
from .grid import data_bounds, export_decision_grid
from .models import convnet_spec, mlp_spec
from .rng import RngStream
from .training import train_sesemi
from .transforms import gcn, zca_apply, zca_fit

logger = logging.getLogger(__name__)

SYNTHETIC = {"two_moons": two_moons, "three_spirals": three_spirals}


def _balanced_subset(dataset, n, seed):
    if n <= 0 or n >= len(dataset):
        return dataset
    rng = RngStream(seed).split("subset")
    per = [np.flatnonzero(dataset.targets == c) for c in range(dataset.num_classes)]
    base, extra = divmod(n, dataset.num_classes)
    idx = np.concatenate([
        p[rng.permutation(len(p))[:base + (1 if c < extra else 0)]] for c, p in enumerate(per)
    ])
    return dataset.subset(np.sort(idx))


def preprocess_images(inputs, zca, dtype="float32"):
    """GCN each image, then apply a fitted ZCA map; returns ``N x C x H x W``."""
    flat = gcn(np.asarray(inputs, dtype=np.float64).reshape(len(inputs), -1))
    if zca is not None:
        flat = zca_apply(zca, flat)
    return flat.reshape(inputs.shape).astype(dtype)


def prepare_data(cfg):
    """Return ``(train, test, zca_state, preprocessing)`` for an experiment config."""
    if cfg.dataset in SYNTHETIC:
        gen = SYNTHETIC[cfg.dataset]
        train = gen(cfg.n_per_class, cfg.data_noise, seed=cfg.data_seed)
        test = gen(cfg.n_per_class, cfg.data_noise, seed=cfg.data_seed + 1)
        return train, test, None, {}
    train, test = load_cifar10(cfg.data_path)
    train = _balanced_subset(train, cfg.train_subset, cfg.data_seed)
    test = _balanced_subset(test, cfg.test_subset, cfg.data_seed + 1)
    flat = gcn(train.inputs.reshape(len(train), -1))
    zca = zca_fit(flat, cfg.zca_epsilon)
    train = Dataset(preprocess_images(train.inputs, zca, cfg.dtype), train.targets, 10)
    test = Dataset(preprocess_images(test.inputs, zca, cfg.dtype), test.targets, 10)
    return train, test, zca, {"gcn": True, "zca": True}


def build_spec(cfg, train):
    if cfg.arch == "mlp":
        return mlp_spec(train.num_classes, train.inputs.shape[1], cfg.hidden, dropout=cfg.dropout, dtype=cfg.dtype)
    return convnet_spec(train.num_classes, train.inputs.shape[1:], cfg.widths, dropout=cfg.dropout, dtype=cfg.dtype)


def matched_epochs(cfg, n_unlabeled, n_labeled):
    """Epochs over the labeled set giving the step budget of ``cfg.epochs`` over the unlabeled pool."""
    b = cfg.batch_size_labeled
    return max(1, cfg.epochs * math.ceil(n_unlabeled / b) // math.ceil(n_labeled / b))


def run_experiment(cfg, out_dir=None, supervised_epochs="match"):
    """Train per ``cfg`` and write every artifact into ``out_dir``.

    In supervised mode the epoch count is rescaled so the run takes as many
    steps as the semi-supervised run over the full training set would.
    Returns ``(model, metrics, paths)``.
    """
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    started = time.time()
    train, test, zca, prep = prepare_data(cfg)
    split = make_split(train, cfg.num_labeled, cfg.mode, seed=cfg.seed, test=test)
    tcfg = cfg.train_config()
    if cfg.mode == "supervised" and supervised_epochs == "match":
        tcfg = replace(tcfg, epochs=matched_epochs(tcfg, len(train), cfg.num_labeled))
    spec = build_spec(cfg, train)
    model, metrics = train_sesemi(split, spec, tcfg)

    paths = {
        "metrics": os.path.join(out_dir, "metrics.csv"),
        "epochs": os.path.join(out_dir, "epochs.csv"),
        "checkpoint": os.path.join(out_dir, "model.ckpt"),
        "manifest": os.path.join(out_dir, "manifest.json"),
    }
    with open(paths["metrics"], "w", newline="") as fh:
        fh.write(metrics.steps_csv())
    with open(paths["epochs"], "w", newline="") as fh:
        fh.write(metrics.epochs_csv())
    checkpoint.save(paths["checkpoint"], model, zca, prep)
    if spec.input_shape == (2,):
        paths["grid"] = os.path.join(out_dir, "grid.csv")
        with open(paths["grid"], "w", newline="") as fh:
            fh.write(export_decision_grid(model, data_bounds(train.inputs), cfg.grid_resolution))
        paths["test"] = os.path.join(out_dir, "test.csv")
        save_points_csv(test, paths["test"])
    manifest = {
        "config": cfg.to_text(),
        "train_config": asdict(tcfg),
        "seed": cfg.seed,
        "arch": spec.to_dict(),
        "steps": len(metrics.steps),
        "final_test_error": metrics.epochs[-1][1] if metrics.epochs else None,
        "wall_time_s": round(time.time() - started, 3),
        "precision": "training at " + spec.dtype + " with float64 loss and batch statistics; "
                     "checkpoint parameters stored as float32",
        "python": platform.python_version(),
    }
    with open(paths["manifest"], "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return model, metrics, paths


@dataclass
class PairedResult:
    seeds: list
    supervised_acc: list
    ssl_acc: list
    first_loss_super: list = field(default_factory=list)  # ssl run, step 0

    @property
    def gap(self):
        return float(np.mean(self.ssl_acc) - np.mean(self.supervised_acc))

    @property
    def wins(self):
        return int(sum(s > u for s, u in zip(self.ssl_acc, self.supervised_acc)))


def paired_comparison(cfg, seeds, data=None, progress=None):
    """Supervised-only vs SSL test accuracy on paired seeds.

    Each seed fixes the labeled subset, initialization and every random
    stream for both runs; the supervised run gets the same step budget.
    ``data`` optionally supplies precomputed ``(train, test)``; otherwise the
    synthetic generators are re-seeded per seed.
    """
    result = PairedResult([], [], [])
    for seed in seeds:
        if data is None:
            run_cfg = replace(cfg, seed=seed, data_seed=1000 + 2 * seed)
            train, test, _, _ = prepare_data(run_cfg)
        else:
            run_cfg = replace(cfg, seed=seed)
            train, test = data
        spec = build_spec(run_cfg, train)
        accs = {}
        for mode in ("supervised", "ssl"):
            tcfg = replace(run_cfg.train_config(), mode=mode, eval_every=10**9)
            split = make_split(train, run_cfg.num_labeled, mode, seed=seed, test=test)
            if mode == "supervised":
                tcfg = replace(tcfg, epochs=matched_epochs(tcfg, len(train), run_cfg.num_labeled))
            _, metrics = train_sesemi(split, spec, tcfg)
            accs[mode] = 1.0 - metrics.epochs[-1][1]
            if mode == "ssl":
                result.first_loss_super.append(metrics.steps[0].loss_super)
        result.seeds.append(seed)
        result.supervised_acc.append(accs["supervised"])
        result.ssl_acc.append(accs["ssl"])
        if progress is not None:
            progress(seed, accs)
    return result


CIFAR_SMOKE_WIDTHS = (8, 16, 32)


def cifar_smoke_config(data_path, train_subset=4000, num_labeled=400, epochs=10):
    """Reduced-scale CIFAR-10 comparison settings; far from the full-size ConvNet."""
    return ExperimentConfig(
        dataset="cifar10", data_path=data_path, arch="convnet", widths=CIFAR_SMOKE_WIDTHS,
        train_subset=train_subset, num_labeled=num_labeled, epochs=epochs, data_seed=0,
    )


def cifar_smoke(data_path, seeds=(0, 1, 2), progress=None, **kwargs):
    """Paired supervised vs SSL runs on one fixed GCN+ZCA preprocessed subset."""
    cfg = cifar_smoke_config(data_path, **kwargs)
    train, test, _, _ = prepare_data(cfg)
    return paired_comparison(cfg, seeds, data=(train, test), progress=progress)


def demo_config(dataset, mode="ssl", seed=0, out="demo"):
    """Settings for the 2-D demos: 500 points per class, 5 labels per class."""
    n_classes = 2 if dataset == "two_moons" else 3
    return ExperimentConfig(
        mode=mode, dataset=dataset, seed=seed, data_seed=seed, n_per_class=500,
        num_labeled=5 * n_classes, arch="mlp", hidden=(100, 100, 100), dropout=0.0,
        aug_noise=0.0, epochs=DEMO_EPOCHS, output_dir=out, eval_every=1,
    )


DEMO_EPOCHS = 20
