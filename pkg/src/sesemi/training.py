"""Joint supervised + self-supervised mini-batch training."""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .exceptions import ContractError, NumericalError, ParameterError
from .models import SELF_SUPERVISED, SUPERVISED, build_model
from .rng import RngStream
from .transforms import (
    NUM_PROXY_CLASSES,
    AugmentPolicy,
    apply_geo_points,
    augment_batch,
    expand_proxy_batch,
)

logger = logging.getLogger(__name__)

MODES = ("supervised", "asl", "ssl")


@dataclass
class TrainConfig:
    mode: str = "ssl"
    batch_size_labeled: int = 16
    w: float = 1.0
    base_lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    dropout: float = 0.5
    epochs: int = 50
    lr_power: float = 0.5
    seed: int = 0
    aug_translate: int = 2
    aug_hflip: bool = True
    aug_noise: float = 0.15
    eval_every: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.w < 0:
            raise ParameterError(f"w must be >= 0, got {self.w}")
        if self.base_lr <= 0:
            raise ParameterError(f"base_lr must be > 0, got {self.base_lr}")
        if not 0 <= self.momentum < 1:
            raise ParameterError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.lr_power <= 0:
            raise ParameterError(f"lr_power must be > 0, got {self.lr_power}")
        if self.batch_size_labeled < 1 or self.epochs < 1 or self.eval_every < 1:
            raise ParameterError("batch_size_labeled, epochs and eval_every must be >= 1")

    def policy(self, self_branch=False):
        policy = AugmentPolicy(self.aug_translate, self.aug_hflip, self.aug_noise)
        return policy.without_hflip() if self_branch else policy


@dataclass
class StepRecord:
    step: int
    epoch: int
    lr: float
    loss_super: float
    loss_self: float
    loss_total: float


@dataclass
class RunMetrics:
    steps: list = field(default_factory=list)
    epochs: list = field(default_factory=list)

    def steps_csv(self):
        lines = ["step,epoch,lr,loss_super,loss_self,loss_total"]
        for r in self.steps:
            lines.append(
                f"{r.step},{r.epoch},{r.lr!r},{r.loss_super!r},{r.loss_self!r},{r.loss_total!r}"
            )
        return "\n".join(lines) + "\n"

    def epochs_csv(self):
        lines = ["epoch,test_error"]
        lines += [f"{e},{err!r}" for e, err in self.epochs]
        return "\n".join(lines) + "\n"


def lr_schedule(t, t_max, base_lr=0.05, p=0.5):
    """Polynomial decay ``base_lr * (1 - t / t_max) ** p``."""
    if t_max < 1:
        raise ContractError(f"t_max must be >= 1, got {t_max}")
    if not 0 <= t <= t_max:
        raise ContractError(f"step {t} outside [0, {t_max}]")
    return base_lr * (1.0 - t / t_max) ** p


def sesemi_loss(z, y, z_self, y_self, w=1.0):
    """Return ``(total, loss_super, loss_self)``; total = CE(z, y) + w * CE(z_self, y_self)."""
    loss_super = T.softmax_cross_entropy(z, y)
    loss_self = T.softmax_cross_entropy(z_self, y_self)
    return T.add(loss_super, T.scale(loss_self, w)), loss_super, loss_self


class OptimizerState:
    """Per-parameter Nesterov velocities, lazily zero-initialized."""

    def __init__(self):
        self.velocity = {}

    def __getitem__(self, name):
        return self.velocity[name]


def nesterov_step(params, grads, state, lr, momentum=0.9, weight_decay=5e-4, decays=None):
    """One Nesterov momentum update in place.

    ``params`` and ``grads`` map names to arrays (a missing or ``None``
    gradient counts as zero).  ``decays(name)`` selects which parameters get
    weight decay; by default all do.
    """
    for name, theta in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(theta)
        elif g.shape != theta.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {theta.shape} for {name}")
        if weight_decay and (decays is None or decays(name)):
            g = g + weight_decay * theta
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(theta)
        v = momentum * v - lr * g
        state.velocity[name] = v
        theta += (momentum * v - lr * g).astype(theta.dtype)
    return params


@dataclass
class Batch:
    step: int
    epoch: int
    labeled_indices: np.ndarray
    unlabeled_indices: np.ndarray
    x_labeled: np.ndarray
    y: np.ndarray
    x_unlabeled: np.ndarray


def steps_per_epoch(split, cfg):
    """Epochs walk the unlabeled pool, or the labeled set when there is none."""
    n = len(split.unlabeled_inputs) or len(split.labeled)
    return math.ceil(n / cfg.batch_size_labeled)


def sample_batches(split, cfg, rng, self_branch=None, labeled_batch=None):
    """Yield :class:`Batch` objects for a whole run.

    An epoch walks a fresh shuffle of the unlabeled pool (of the labeled set
    when the pool is empty) in chunks of
    ``batch_size_labeled``; the last partial chunk is kept.  Labeled examples
    are drawn by cycling an independently shuffled copy of the labeled set,
    reshuffled at every wrap-around.
    """
    if self_branch is None:
        self_branch = cfg.mode != "supervised"
    if self_branch and len(split.unlabeled_inputs) == 0:
        raise ContractError(f"mode {cfg.mode!r} needs a non-empty unlabeled set")
    b = cfg.batch_size_labeled
    labeled_batch = b if labeled_batch is None else labeled_batch
    n_lab = len(split.labeled)
    rng_u = rng.split("unlabeled-order")
    rng_l = rng.split("labeled-order")
    driver_n = len(split.unlabeled_inputs) or n_lab

    lab_order = rng_l.permutation(n_lab)
    lab_pos = 0

    def next_labeled(k):
        nonlocal lab_order, lab_pos
        out = []
        while len(out) < k:
            if lab_pos == n_lab:
                lab_order = rng_l.permutation(n_lab)
                lab_pos = 0
            take = min(k - len(out), n_lab - lab_pos)
            out.extend(lab_order[lab_pos:lab_pos + take])
            lab_pos += take
        return np.asarray(out, dtype=np.int64)

    step = 0
    for epoch in range(cfg.epochs):
        order = rng_u.permutation(driver_n)
        for start in range(0, driver_n, b):
            u_idx = order[start:start + b]
            l_idx = next_labeled(labeled_batch)
            x_u = split.unlabeled_inputs[u_idx] if len(split.unlabeled_inputs) else split.unlabeled_inputs[:0]
            yield Batch(step, epoch, l_idx, u_idx, split.labeled.inputs[l_idx], split.labeled.targets[l_idx], x_u)
            step += 1


def test_error(model, dataset, batch_size=512):
    was_training = model.training
    model.eval()
    pred = model.predict(dataset.inputs, batch_size)
    if was_training:
        model.train()
    return float(np.mean(pred != dataset.targets))


def _proxy_batch(x_raw, is_image, rng):
    if is_image:
        return expand_proxy_batch(x_raw)
    labels = rng.integers(0, NUM_PROXY_CLASSES, size=len(x_raw))
    return apply_geo_points(x_raw, labels), labels


def train_sesemi(split, spec, cfg, self_branch=None, model=None, trace=None):
    """Run joint training and return ``(model, metrics)``.

    ``self_branch=False`` removes the self-supervised loss from the graph
    while keeping every other random stream where it was; the supervised
    mode uses it and so does the equal-branch comparison.  ``trace``, when
    given, is called as ``trace(step, model)`` after every update.
    """
    if self_branch is None:
        self_branch = cfg.mode != "supervised"
    root = RngStream(cfg.seed)
    if model is None:
        model = build_model(replace(spec, dropout=cfg.dropout), root.split("init"))
    model.train()

    is_image = split.labeled.is_image
    labeled_batch = cfg.batch_size_labeled * (NUM_PROXY_CLASSES if is_image else 1)
    spe = steps_per_epoch(split, cfg)
    n_steps = spe * cfg.epochs
    t_max = max(n_steps - 1, 1)
    policy_sup = cfg.policy() if is_image else AugmentPolicy(0, False, cfg.aug_noise)
    policy_self = policy_sup.without_hflip()

    rng_aug_sup = root.split("augment-supervised")
    rng_aug_self = root.split("augment-self")
    rng_drop_sup = root.split("dropout-supervised")
    rng_drop_self = root.split("dropout-self")
    rng_proxy = root.split("proxy-labels")
    decays = model.decays
    state = OptimizerState()
    metrics = RunMetrics()

    for batch in sample_batches(split, cfg, root.split("sampling"), self_branch, labeled_batch):
        t = batch.step
        lr = lr_schedule(t, t_max, cfg.base_lr, cfg.lr_power)
        model.zero_grad()

        try:
            with np.errstate(over="ignore", invalid="ignore"):
                x_l = augment_batch(batch.x_labeled, policy_sup, rng_aug_sup)
                z = model.forward(x_l, SUPERVISED, rng_drop_sup)
                loss_super = T.softmax_cross_entropy(z, batch.y)
                if self_branch:
                    x_u, y_u = _proxy_batch(batch.x_unlabeled, is_image, rng_proxy)
                    x_u = augment_batch(x_u, policy_self, rng_aug_self)
                    z_self = model.forward(x_u, SELF_SUPERVISED, rng_drop_self)
                    loss_self = T.softmax_cross_entropy(z_self, y_u)
                    total = T.add(loss_super, T.scale(loss_self, cfg.w))
                    self_value = float(loss_self.data)
                else:
                    total = loss_super
                    self_value = 0.0
        except NumericalError as exc:
            raise NumericalError(f"step {t} (epoch {batch.epoch}, lr={lr}): {exc}") from exc

        total_value = float(total.data)
        if not math.isfinite(total_value):
            raise NumericalError(
                f"non-finite loss at step {t} (epoch {batch.epoch}, lr={lr}): "
                f"loss_super={float(loss_super.data)}, loss_self={self_value}"
            )
        T.backward(total)
        nesterov_step(
            {n: p.data for n, p in model.params.items()},
            {n: p.grad for n, p in model.params.items()},
            state, lr, cfg.momentum, cfg.weight_decay, decays,
        )
        metrics.steps.append(StepRecord(t, batch.epoch, lr, float(loss_super.data), self_value, total_value))
        if trace is not None:
            trace(t, model)

        if (t + 1) % spe == 0 and split.test is not None:
            epoch = batch.epoch
            if (epoch + 1) % cfg.eval_every == 0 or t + 1 == n_steps:
                err = test_error(model, split.test)
                metrics.epochs.append((epoch, err))
                logger.info("epoch %d step %d loss %.4f test error %.4f", epoch, t, total_value, err)

    model.eval()
    return model, metrics
