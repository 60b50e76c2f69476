"""Pretraining and fine-tuning loops."""
from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from ..augment import expand_dataset
from ..datagen.dataset import PdeDataset
from ..datagen.types import GridSpec
from ..exceptions import NonFiniteError
from ..operators import OperatorModel, attach_head, build_model, detach_head
from ..pretext import (
    build_binary,
    build_jigsaw,
    build_masked,
    build_sort,
    coefficient_label,
    derivative_fields,
    jigsaw_bank,
    picl_loss,
)
from ..pretext.builders import PatchSpec, apply_mask_token
from .losses import relative_l2, relative_l2_per_sample
from .records import MetricRecord
from .spec import POOL_SIZE, TrainSpec

log = logging.getLogger(__name__)


def seeded_subset(pool, n: int, seed: int):
    """``n`` distinct items drawn uniformly from ``pool`` (a dataset or a length).

    Each seed draws independently; a larger ``n`` is not a superset of a smaller one.
    """
    size = pool if isinstance(pool, int) else len(pool)
    if n > size:
        raise ValueError(f"cannot draw {n} samples from a pool of {size}")
    idx = np.random.default_rng(seed).permutation(size)[:n]
    return idx if isinstance(pool, int) else pool.subset(idx)


def _batches(n, batch_size, gen):
    order = torch.randperm(n, generator=gen)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def _optimizer(params, spec: TrainSpec, steps_per_epoch: int):
    opt = torch.optim.Adam(params, lr=spec.lr, weight_decay=spec.weight_decay)
    total = max(1, spec.epochs * steps_per_epoch)
    if spec.scheduler == "one_cycle":
        sched = torch.optim.lr_scheduler.OneCycleLR(opt, max_lr=spec.lr, total_steps=total)
    elif spec.scheduler == "cosine_annealing":
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=total)
    else:
        sched = None
    return opt, sched


def _check_loss(loss, epoch, batch):
    if not torch.isfinite(loss):
        raise NonFiniteError(f"non-finite loss at epoch {epoch}, batch {batch}",
                             where={"epoch": epoch, "batch": batch})


# -- prediction objective ----------------------------------------------------------

def prediction_loss(model, u, spec: TrainSpec, rng: np.random.Generator, first_pass=None):
    """Relative-L2 training loss for one batch ``u`` of full trajectories.

    Autoregressive batches draw one window start ``s``; when ``s`` leaves room
    for an earlier window, the input is the model's own no-grad prediction from
    frames ``[s - w, s)`` (pushforward). ``first_pass`` lets tests route that
    pass through a different module.
    """
    ro = spec.rollout
    w = ro.window
    if spec.task == "fixed_future":
        t = ro.fixed_future_target_frame
        return relative_l2(model(u[:, :w]), u[:, t:t + 1])
    last_start = ro.horizon[1] - 2 * w
    s = int(rng.integers(0, last_start + 1))
    x = u[:, s:s + w]
    if ro.pushforward and s >= w:
        with torch.no_grad():
            x = (first_pass or model)(u[:, s - w:s], s - w)
    return relative_l2(model(x, s), u[:, s + w:s + 2 * w])


@torch.no_grad()
def rollout(model, u0, spec: TrainSpec):
    """Frames ``horizon`` predicted from ``u0 = u[:, :window]`` in ``n_steps`` calls."""
    ro = spec.rollout
    x = u0
    out = []
    for k in range(ro.n_steps):
        x = model(x, ro.horizon[0] - ro.window + k * ro.window)
        out.append(x)
    return torch.cat(out, dim=1)


@torch.no_grad()
def evaluate(model, u, spec: TrainSpec, batch_size: int = 64) -> np.ndarray:
    """Per-sample validation error.

    Fixed-future: relative L2 of the target frame. Autoregressive: sum over
    rollout windows of the per-window relative L2.
    """
    model.eval()
    ro = spec.rollout
    w = ro.window
    errs = []
    for i in range(0, len(u), batch_size):
        ub = u[i:i + batch_size]
        if spec.task == "fixed_future":
            t = ro.fixed_future_target_frame
            e = relative_l2_per_sample(model(ub[:, :w]), ub[:, t:t + 1])
        else:
            pred = rollout(model, ub[:, :w], spec)
            e = 0
            for k in range(ro.n_steps):
                a = ro.horizon[0] + k * w
                e = e + relative_l2_per_sample(pred[:, k * w:(k + 1) * w], ub[:, a:a + w])
        errs.append(e.cpu().numpy())
    model.train()
    return np.concatenate(errs)


# -- pretext objectives --------------------------------------------------------------

@dataclass
class PretrainResult:
    model: OperatorModel
    history: list = field(default_factory=list)
    head: torch.nn.Module | None = None
    mask_token: torch.Tensor | None = None
    wall_clock: float = 0.0


class PretextObjective:
    """Builds a batch for ``strategy`` and returns its loss on ``net``."""

    def __init__(self, strategy: str, backbone: OperatorModel, grid: GridSpec, spec: TrainSpec, n_t: int):
        self.strategy = strategy
        self.spec = spec
        self.grid = grid
        self.n_t = n_t
        self.bank = None
        self.mask_token = None
        if strategy == "picl":
            self.net = backbone
        elif strategy == "jigsaw":
            self.bank = jigsaw_bank(8, spec.jigsaw_k)
            self.net = attach_head(backbone, strategy, n_out=spec.jigsaw_k)
        else:
            self.net = attach_head(backbone, strategy)
        if strategy == "masked":
            shape = (n_t, grid.n_x, grid.n_y)
            self.patch = PatchSpec.masked(shape)
            self.mask_token = torch.nn.Parameter(torch.zeros(self.patch.t_patch, self.patch.x_patch, self.patch.y_patch))

    def parameters(self):
        params = list(self.net.parameters())
        if self.mask_token is not None:
            params.append(self.mask_token)
        return params

    def loss(self, u: torch.Tensor, coeffs: np.ndarray, pdes: np.ndarray, rng: np.random.Generator):
        s = self.strategy
        un = u.numpy()
        w = self.net.backbone.in_frames if hasattr(self.net, "backbone") else self.net.in_frames
        if s == "binary":
            b = build_binary(un, rng=rng)
            logits = self.net(torch.from_numpy(b.inputs))
            return F.binary_cross_entropy_with_logits(logits, torch.from_numpy(b.labels))
        if s in ("timesort", "spacesort"):
            b = build_sort(un, axis="time" if s == "timesort" else "space_x", rng=rng)
            return F.cross_entropy(self.net(torch.from_numpy(b.inputs)), torch.from_numpy(b.labels))
        if s == "jigsaw":
            b = build_jigsaw(un, bank=self.bank, rng=rng)
            return F.cross_entropy(self.net(torch.from_numpy(b.inputs)), torch.from_numpy(b.labels))
        if s == "coefficient":
            start = int(rng.integers(0, self.n_t - w + 1))
            lab = coefficient_label(coeffs, self.spec.normalize_coefficients).astype(np.float32)
            return F.mse_loss(self.net(u[:, start:start + w]), torch.from_numpy(lab))
        if s == "derivative":
            start = int(rng.integers(0, self.n_t - w + 1))
            lab = derivative_fields(un, self.grid)[:, :, start:start + w]
            lab = torch.from_numpy(lab.reshape(len(un), -1, *un.shape[2:]).astype(np.float32))
            return F.mse_loss(self.net(u[:, start:start + w]), lab)
        if s == "masked":
            b = build_masked(un, self.patch, self.spec.mask_ratio, rng)
            x = apply_mask_token(u, b.mask, self.mask_token, self.patch)
            return F.mse_loss(self.net(x), u)
        if s == "picl":
            out_w = self.net.out_frames
            start = int(rng.integers(0, self.n_t - w - out_w))
            return picl_loss(self.net, u, coeffs, pdes, self.grid, start, self.spec.tau, w)
        raise ValueError(f"no pretext objective for {s!r}")


def pretrain(model: OperatorModel, strategy: str, dataset: PdeDataset, spec: TrainSpec,
             seed: int = 0) -> PretrainResult:
    """Train ``model`` on ``strategy`` and return it with the head detached.

    ``transfer`` trains the downstream prediction objective on the pretraining
    data; every other strategy trains its pretext loss through a projection head.
    """
    t_start = time.perf_counter()
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    gen = torch.Generator().manual_seed(seed)
    if spec.augmentation.kind != "none":
        dataset = expand_dataset(dataset, spec.augmentation, np.random.default_rng([seed, 1]))
    u_all = torch.from_numpy(np.ascontiguousarray(dataset.u, dtype=np.float32))
    steps = math.ceil(len(dataset) / spec.batch_size)

    if strategy == "transfer":
        objective = None
        params = list(model.parameters())
    else:
        objective = PretextObjective(strategy, model, dataset.grid, spec, dataset.u.shape[1])
        params = objective.parameters()
    opt, sched = _optimizer(params, spec, steps)
    model.train()
    history = []
    for epoch in range(spec.epochs):
        total, count = 0.0, 0
        for bi, idx in enumerate(_batches(len(dataset), spec.batch_size, gen)):
            ub = u_all[idx]
            if objective is None:
                loss = prediction_loss(model, ub, spec, rng)
            else:
                ii = idx.numpy()
                loss = objective.loss(ub, dataset.coeffs[ii], dataset.pde[ii], rng)
            _check_loss(loss, epoch, bi)
            opt.zero_grad()
            loss.backward()
            opt.step()
            if sched is not None:
                sched.step()
            total += float(loss.detach()) * len(idx)
            count += len(idx)
        history.append(total / count)
        log.info("pretrain %s epoch %d loss %.5g", strategy, epoch + 1, history[-1])
    head = None if objective is None or strategy == "picl" else objective.net.head
    token = None if objective is None else objective.mask_token
    return PretrainResult(detach_head(model), history, head, token, time.perf_counter() - t_start)


# -- fine-tuning ---------------------------------------------------------------------

def _fresh_or_pretrained(pretrained, family_config, seed):
    if pretrained is None:
        return build_model(family_config, seed=seed)
    if isinstance(pretrained, dict):
        pretrained = pretrained[seed]
    return copy.deepcopy(detach_head(pretrained))


def finetune_one(model: OperatorModel, train: PdeDataset, spec: TrainSpec, seed: int):
    torch.manual_seed(seed)
    rng = np.random.default_rng([seed, 2])
    gen = torch.Generator().manual_seed(seed)
    if spec.augmentation.kind != "none":
        train = expand_dataset(train, spec.augmentation, np.random.default_rng([seed, 3]))
    u = torch.from_numpy(np.ascontiguousarray(train.u, dtype=np.float32))
    steps = math.ceil(len(u) / spec.batch_size)
    opt, sched = _optimizer(model.parameters(), spec, steps)
    model.train()
    history = []
    for epoch in range(spec.epochs):
        total = 0.0
        for bi, idx in enumerate(_batches(len(u), spec.batch_size, gen)):
            loss = prediction_loss(model, u[idx], spec, rng)
            _check_loss(loss, epoch, bi)
            opt.zero_grad()
            loss.backward()
            opt.step()
            if sched is not None:
                sched.step()
            total += float(loss.detach()) * len(idx)
        history.append(total / len(u))
    return model, history


def finetune(pretrained, pool: PdeDataset, val: PdeDataset, spec: TrainSpec, model_config=None,
             context: dict | None = None, on_record=None) -> list[MetricRecord]:
    """Fine-tune once per seed on a fresh subset of ``pool`` and score on ``val``.

    ``pretrained`` is None (train from scratch with ``model_config``), one
    model shared by all seeds, or a mapping seed -> model.
    """
    if model_config is None:
        if pretrained is None:
            raise ValueError("model_config is required when training from scratch")
        first = next(iter(pretrained.values())) if isinstance(pretrained, dict) else pretrained
        model_config = detach_head(first).config
    if len(pool) > POOL_SIZE:
        raise ValueError(f"fine-tune pool exceeds {POOL_SIZE} samples")
    pdes = sorted(set(pool.pde))
    context = dict(context or {})
    distribution = context.pop("distribution", pool.distribution)
    records = []
    val_u = torch.from_numpy(np.ascontiguousarray(val.u, dtype=np.float32))
    for seed in spec.seeds:
        t0 = time.perf_counter()
        subset = seeded_subset(pool, min(spec.n_samples, len(pool)), seed)
        model = _fresh_or_pretrained(pretrained, model_config, seed)
        diverged = False
        history = []
        try:
            model, history = finetune_one(model, subset, spec, seed)
            errs = evaluate(model, val_u, spec)
            error = float(np.mean(errs))
            if not math.isfinite(error):
                raise NonFiniteError("non-finite validation error")
        except NonFiniteError as exc:
            log.warning("seed %d diverged: %s", seed, exc)
            diverged, error = True, math.inf
        rec = MetricRecord(
            model=model_config.family, strategy=spec.strategy, augmentation=spec.augmentation.kind,
            pde=",".join(pdes), distribution=distribution,
            task=spec.task, n_samples=spec.n_samples, seed=seed, error=error, diverged=diverged,
            epochs=spec.epochs, final_train_loss=history[-1] if history else math.nan,
            wall_clock=time.perf_counter() - t0, **context)
        records.append(rec)
        if on_record is not None:
            on_record(rec)
    return records


def finetune_fixed_future(pretrained, pool, val, spec: TrainSpec, **kw):
    spec = copy.copy(spec)
    spec.task = "fixed_future"
    return finetune(pretrained, pool, val, spec, **kw)


def finetune_autoregressive(pretrained, pool, val, spec: TrainSpec, **kw):
    spec = copy.copy(spec)
    spec.task = "autoregressive"
    return finetune(pretrained, pool, val, spec, **kw)
