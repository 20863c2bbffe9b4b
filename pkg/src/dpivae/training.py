"""Adam training with validation-ELBO early stopping."""

from __future__ import annotations

import copy
import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigurationError, NumericError, TrainingError
from .objective import TERMS, ObjectiveConfig, beta_at, elbo

log = logging.getLogger(__name__)

MAX_BAD_EPOCHS = 5


@dataclass
class TrainConfig:
    max_epochs: int = 20000
    batch_size: int = 1024
    patience_epochs: int = 2000
    lr_default: float = 1e-3
    lr_sigma_x: float = 5e-3
    encoder_lr_multiplier: float = 1.0
    seed: int = 0
    n_mc_val: int = 8
    grad_clip: float | None = None
    min_delta: float = 0.0

    def __post_init__(self):
        if self.max_epochs < 0 or self.batch_size < 1 or self.patience_epochs < 1 or self.n_mc_val < 1:
            raise ConfigurationError("epoch, batch and patience counts must be positive")
        if min(self.lr_default, self.lr_sigma_x, self.encoder_lr_multiplier) <= 0:
            raise ConfigurationError("learning rates must be positive")


@dataclass
class TrainHistory:
    train: list = field(default_factory=list)  # one dict of ELBO terms per epoch
    val: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = -math.inf
    wall_time: float = 0.0
    stopped_early: bool = False
    start_epoch: int = 0

    def __len__(self):
        return len(self.val)

    def val_totals(self):
        return np.array([r["total"] for r in self.val])

    def convergence_epoch(self, tol=1.0):
        """First epoch whose validation ELBO is within ``tol`` nats per record of the best one."""
        totals = self.val_totals()
        if len(totals) == 0:
            raise ConfigurationError("history is empty")
        return self.start_epoch + int(np.argmax(totals >= np.max(totals) - tol))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch"] + [f"train_{k}" for k in TERMS] + [f"val_{k}" for k in TERMS] + ["wall_time"])
            for i, (tr, va) in enumerate(zip(self.train, self.val)):
                w.writerow([self.start_epoch + i] + [tr[k] for k in TERMS] + [va[k] for k in TERMS] + [va["wall_time"]])


def should_stop(history: TrainHistory, patience: int) -> bool:
    """True once the best validation epoch lies more than ``patience`` epochs back."""
    if len(history) == 0:
        raise ConfigurationError("history is empty")
    totals = history.val_totals()
    best = int(np.argmax(totals))
    return len(totals) - 1 - best > patience


def make_optimizer(model, cfg: TrainConfig):
    enc_x, enc_other, sigma, rest = model.parameter_groups()
    groups = [
        {"params": enc_x, "lr": cfg.lr_default * cfg.encoder_lr_multiplier},
        {"params": enc_other, "lr": cfg.lr_default},
        {"params": sigma, "lr": cfg.lr_sigma_x},
        {"params": rest, "lr": cfg.lr_default},
    ]
    return torch.optim.Adam([g for g in groups if g["params"]])


def validation_eps(model, n_val, cfg: TrainConfig):
    """Fixed standard-normal draws for the validation ELBO (common random numbers)."""
    g = torch.Generator().manual_seed(cfg.seed + 7919)
    return torch.randn((cfg.n_mc_val, n_val, model.layout.d_z), generator=g, dtype=model.dtype)


def evaluate(model, data, obj_cfg: ObjectiveConfig, eps=None, n_mc=None, generator=None, chunk=None):
    """ELBO breakdown (floats) without gradients; ``chunk`` limits samples per pass."""
    with torch.no_grad():
        if eps is not None or chunk is None:
            return elbo(model, data.x, data.c, data.y, obj_cfg, n_mc=n_mc, generator=generator, eps=eps).as_floats()
        n_mc = n_mc or obj_cfg.n_mc_eval
        acc = {k: 0.0 for k in TERMS}
        done = 0
        while done < n_mc:
            k = min(chunk, n_mc - done)
            part = elbo(model, data.x, data.c, data.y, obj_cfg, n_mc=k, generator=generator).as_floats()
            for t in TERMS:
                acc[t] += part[t] * k
            done += k
        return {t: v / n_mc for t, v in acc.items()}


def train(model, datasets, obj_cfg: ObjectiveConfig | None = None, train_cfg: TrainConfig | None = None,
          log_path=None, checkpoint_path=None, start_epoch=0, fit_normalization=True, progress_every=0):
    """Train ``model`` on ``datasets = (train, val)`` and restore the best-validation parameters."""
    obj_cfg = obj_cfg or ObjectiveConfig()
    cfg = train_cfg or TrainConfig()
    train_ds, val_ds = datasets
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ConfigurationError("training and validation sets must be non-empty")
    if fit_normalization:
        model.fit_normalization(train_ds.x, train_ds.c, train_ds.y)
    history = TrainHistory(start_epoch=start_epoch)
    if cfg.max_epochs == 0:
        return model, history

    gen = torch.Generator().manual_seed(cfg.seed)
    opt = make_optimizer(model, cfg)
    x, c, y = model.as_tensor(train_ds.x), model.as_tensor(train_ds.c), model.as_tensor(train_ds.y)
    n = len(x)
    eps_val = validation_eps(model, len(val_ds), cfg)
    best_state = copy.deepcopy(model.state_dict())
    bad = 0
    t0 = time.perf_counter()

    for i in range(cfg.max_epochs):
        epoch = start_epoch + i
        beta = beta_at(epoch, obj_cfg)
        model.train()
        if cfg.batch_size >= n:
            batches = [slice(None)]
        else:
            perm = torch.randperm(n, generator=gen)
            batches = [perm[j : j + cfg.batch_size] for j in range(0, n, cfg.batch_size)]
        acc = {k: 0.0 for k in TERMS}
        finite = True
        for b in batches:
            opt.zero_grad()
            try:
                out = elbo(model, x[b], c[b], y[b], obj_cfg, generator=gen, beta=beta)
            except NumericError as exc:
                finite = False
                log.warning("epoch %d: %s", epoch, exc)
                break
            (-out.total).backward()
            if cfg.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            w = (len(x[b]) if not isinstance(b, slice) else n) / n
            for k, v in out.as_floats().items():
                acc[k] += w * v
        if not finite:
            bad += 1
            if bad >= MAX_BAD_EPOCHS:
                model.load_state_dict(best_state)
                raise TrainingError(
                    f"non-finite loss for {MAX_BAD_EPOCHS} consecutive epochs (last epoch {epoch}); "
                    f"best validation ELBO {history.best_val:.6g} at epoch {history.best_epoch}"
                )
            acc = {k: math.nan for k in TERMS}
        else:
            bad = 0

        model.eval()
        try:
            val = evaluate(model, val_ds, obj_cfg, eps=eps_val)
        except NumericError:
            val = {k: -math.inf for k in TERMS}
        val["wall_time"] = time.perf_counter() - t0
        history.train.append(acc)
        history.val.append(val)
        if val["total"] > history.best_val + cfg.min_delta:
            history.best_val = val["total"]
            history.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            if checkpoint_path:
                model.save(checkpoint_path, extra={"epoch": epoch, "best_val": history.best_val})
        if progress_every and i % progress_every == 0:
            log.info("epoch %d train %.4f val %.4f best %.4f@%d", epoch, acc["total"], val["total"],
                     history.best_val, history.best_epoch)
        if epoch - history.best_epoch > cfg.patience_epochs:
            history.stopped_early = True
            break

    model.load_state_dict(best_state)
    history.wall_time = time.perf_counter() - t0
    if log_path:
        history.to_csv(log_path)
    return model, history
