"""Multi-run experiments: the lambda sweep and the class-prediction benchmark.

Each (lambda, run) or (mode, quadrant, run) cell owns its data, model and
seeds, so cells can run in a process pool. With ``cache_dir`` set, finished
cells are stored as JSON and skipped on rerun.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from ..cases import get_case
from ..datagen import generate_observations, make_dataset, quadrant_split, sample_generative_factors, split_dataset
from ..errors import ConfigurationError, TrainingError
from ..model import DPIVAE, ModelConfig
from ..objective import ObjectiveConfig
from ..training import TrainConfig, train
from .baselines import BASELINES, fit_baseline
from .disentangle import SUBSETS, DisentanglementReport, disentanglement_scores
from .metrics import mse, r_squared_multi

log = logging.getLogger(__name__)

PAPER_LAMBDAS = (-1.0, -0.1, -0.01, -0.001, 0.0, 0.001, 0.01, 0.1, 1.0)
MODES = ("interpolation", "extrapolation")
DPIVAE_MODELS = ("DPIVAE-A", "DPIVAE-B")
HISTORY_KEYS = ("best_epoch", "best_val", "n_epochs", "sigma_x", "convergence_epoch", "stopped_early", "batch_size",
                "wall_time")


def _cell_seed(*parts):
    """Stable integer seed from a tuple of ints."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def fit_dpivae(case_id, train_ds, val_ds, grl_lambda=None, model_cfg=None, obj_cfg=None, train_cfg=None,
               seed=0, log_path=None, checkpoint_path=None):
    """Build and train one model; returns (model, history)."""
    model = DPIVAE(case_id, model_cfg or ModelConfig(), grl_lambda=grl_lambda, seed=seed)
    tcfg = replace(train_cfg or TrainConfig(), seed=seed)
    return train(model, (train_ds, val_ds), obj_cfg or ObjectiveConfig(), tcfg,
                 log_path=log_path, checkpoint_path=checkpoint_path)


def _run_cells(fn, cells, workers):
    if workers and workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def _config_tag(*cfgs):
    """Short digest of configs so cached cells from different settings never collide."""
    blob = json.dumps([asdict(c) for c in cfgs], sort_keys=True, default=str)
    return hashlib.sha1(blob.encode()).hexdigest()[:10]


def _cached(cache_dir, name, compute):
    path = os.path.join(cache_dir, name + ".json") if cache_dir else None
    if path and os.path.exists(path):
        with open(path) as fh:
            return json.load(fh)
    out = compute()
    if path:
        os.makedirs(cache_dir, exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(out, fh)
        os.replace(tmp, path)
    return out


# -- lambda sweep ---------------------------------------------------------


@dataclass
class SweepResult:
    case_id: str
    lambdas: list
    factors: list
    reports: list  # reports[i][r]: DisentanglementReport for lambda i, run r
    histories: list = field(default_factory=list)  # (best_epoch, best_val, n_epochs) per cell

    def stack(self, i):
        return np.stack([r.r2 for r in self.reports[i]])

    def mean(self):
        """(n_lambda, 3, n_factors) average R^2 over runs."""
        return np.stack([np.nanmean(self.stack(i), axis=0) for i in range(len(self.lambdas))])

    def band(self):
        """Two standard deviations over runs (zero for a single run)."""
        return np.stack([2 * np.nanstd(self.stack(i), axis=0) for i in range(len(self.lambdas))])

    def get(self, lam, subset, factor, stat="mean"):
        i = [float(v) for v in self.lambdas].index(float(lam))
        arr = self.mean() if stat == "mean" else self.band()
        return float(arr[i, SUBSETS.index(subset), self.factors.index(factor)])

    def rows(self):
        m, b = self.mean(), self.band()
        return [
            {"lambda": float(lam), "subset": s, "factor": f, "r2_mean": float(m[i, a, j]),
             "r2_2sd": float(b[i, a, j]), "runs": len(self.reports[i])}
            for i, lam in enumerate(self.lambdas)
            for a, s in enumerate(SUBSETS)
            for j, f in enumerate(self.factors)
        ]

    def to_csv(self, path):
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"case_id": self.case_id, "lambdas": [float(v) for v in self.lambdas], "factors": self.factors,
                       "rows": self.rows(), "histories": self.histories}, fh, indent=1)


@dataclass
class _SweepCell:
    case_id: str
    lam: float
    run: int
    seed: int
    model_cfg: ModelConfig
    obj_cfg: ObjectiveConfig
    train_cfg: TrainConfig
    n_train: int
    n_val: int
    n_score_train: int
    n_score_test: int
    cache_dir: str | None
    threads: int = 1


def _sweep_cell(cell: _SweepCell):
    torch.set_num_threads(cell.threads)

    def compute():
        data_seed = _cell_seed(cell.seed, 1, cell.run)
        model_seed = _cell_seed(cell.seed, 2, cell.run)
        d = make_dataset(cell.case_id, cell.n_train + cell.n_val, data_seed)
        tr, va, _ = split_dataset(d, cell.n_train, cell.n_val, 0)
        try:
            model, hist = fit_dpivae(cell.case_id, tr, va, cell.lam, cell.model_cfg, cell.obj_cfg, cell.train_cfg,
                                     seed=model_seed)
        except TrainingError as exc:
            raise TrainingError(f"lambda={cell.lam} run={cell.run}: {exc}") from exc
        rep = disentanglement_scores(model, cell.case_id, cell.n_score_train, cell.n_score_test,
                                     seed=_cell_seed(cell.seed, 3, cell.run))
        return {"r2": rep.r2.tolist(), "factors": rep.factors, "best_epoch": hist.best_epoch,
                "best_val": hist.best_val, "n_epochs": len(hist), "sigma_x": float(model.sigma_x.detach()),
                "convergence_epoch": hist.convergence_epoch(), "stopped_early": hist.stopped_early,
                "batch_size": min(cell.train_cfg.batch_size, len(tr)), "wall_time": hist.wall_time}

    tag = _config_tag(cell.model_cfg, cell.obj_cfg, cell.train_cfg)
    name = (f"sweep_{cell.case_id}_lam{cell.lam:+.6g}_run{cell.run}_seed{cell.seed}"
            f"_n{cell.n_train}-{cell.n_val}-{cell.n_score_train}-{cell.n_score_test}_{tag}")
    return _cached(cell.cache_dir, name, compute)


def lambda_sweep(case_id, lambdas=PAPER_LAMBDAS, runs_per_lambda=6, model_cfg=None, obj_cfg=None, train_cfg=None,
                 n_train=1024, n_val=512, n_score_train=1024, n_score_test=512, seed=0, workers=1, cache_dir=None):
    """Train ``runs_per_lambda`` models per lambda (fresh data and init) and score each."""
    if runs_per_lambda < 1:
        raise ConfigurationError("runs_per_lambda must be at least 1")
    if not lambdas:
        raise ConfigurationError("lambdas must be non-empty")
    cells = [
        _SweepCell(case_id, float(lam), r, seed, model_cfg or ModelConfig(), obj_cfg or ObjectiveConfig(),
                   train_cfg or TrainConfig(), n_train, n_val, n_score_train, n_score_test, cache_dir)
        for lam in lambdas
        for r in range(runs_per_lambda)
    ]
    out = _run_cells(_sweep_cell, cells, workers)
    reports, hists = [], []
    for i in range(len(lambdas)):
        chunk = out[i * runs_per_lambda : (i + 1) * runs_per_lambda]
        reports.append([DisentanglementReport(np.array(o["r2"], dtype=float), o["factors"], n_score_train,
                                              n_score_test, "linear") for o in chunk])
        hists += [{"lambda": float(lambdas[i]), "run": r, **{k: o.get(k) for k in HISTORY_KEYS}}
                  for r, o in enumerate(chunk)]
    return SweepResult(case_id, [float(v) for v in lambdas], reports[0][0].factors, reports, hists)


# -- class-prediction benchmark -------------------------------------------


@dataclass
class BenchmarkResult:
    case_id: str
    models: list
    modes: list
    cells: list  # one dict per (model, mode, quadrant, run) with r2 and mse

    def per_run(self, model, mode, metric="r2"):
        """Metric averaged over quadrant sub-cases, one value per run."""
        runs = sorted({c["run"] for c in self.cells})
        vals = []
        for r in runs:
            v = [c[metric] for c in self.cells if c["model"] == model and c["mode"] == mode and c["run"] == r]
            if v:
                vals.append(float(np.mean(v)))
        return np.array(vals)

    def stat(self, model, mode, metric="r2"):
        v = self.per_run(model, mode, metric)
        return float(v.mean()), float(v.std())

    def rows(self):
        rows = []
        for m in self.models:
            row = {"model": m}
            for mode in self.modes:
                for metric in ("r2", "mse"):
                    mean, std = self.stat(m, mode, metric)
                    row[f"{mode}_{metric}_mean"] = mean
                    row[f"{mode}_{metric}_std"] = std
            rows.append(row)
        return rows

    def to_csv(self, path):
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"case_id": self.case_id, "models": self.models, "modes": self.modes,
                       "summary": self.rows(), "cells": self.cells}, fh, indent=1)


@dataclass
class _BenchCell:
    case_id: str
    mode: str
    quadrant: int
    run: int
    seed: int
    models: tuple
    model_cfg: ModelConfig
    obj_cfg: ObjectiveConfig
    train_cfg: TrainConfig
    n_train: int
    n_val: int
    n_test: int
    pool_size: int
    baseline_cfg: dict
    cache_dir: str | None
    threads: int = 1


def benchmark_split(case_id, mode, quadrant, seed, n_train=1024, n_val=512, n_test=512, pool_size=8192, noise=None):
    """(train, val, test) datasets for one quadrant sub-case; only selected records are simulated."""
    pool = sample_generative_factors(case_id, pool_size, _cell_seed(seed, 10))
    tr_idx, te_idx = quadrant_split(pool, mode, quadrant)
    if len(tr_idx) < n_train + n_val or len(te_idx) < n_test:
        raise ConfigurationError(f"pool of {pool_size} too small for {mode} quadrant {quadrant}")
    fit = generate_observations(case_id, pool.subset(tr_idx[: n_train + n_val]), noise, _cell_seed(seed, 11))
    test = generate_observations(case_id, pool.subset(te_idx[:n_test]), noise, _cell_seed(seed, 12))
    train_ds, val_ds, _ = split_dataset(fit, n_train, n_val, 0)
    return train_ds, val_ds, test


def _dpivae_variant(name, model_cfg: ModelConfig):
    if name == "DPIVAE-A":
        return -1.0, replace(model_cfg, shared_encoder=False)
    if name == "DPIVAE-B":
        return 1.0 / 1024, replace(model_cfg, shared_encoder=True)
    raise ConfigurationError(f"unknown DPIVAE variant {name!r}")


def _bench_cell(cell: _BenchCell):
    torch.set_num_threads(cell.threads)
    seed = _cell_seed(cell.seed, cell.run, cell.quadrant, MODES.index(cell.mode))
    data = None
    out = []
    for name in cell.models:
        def compute(name=name):
            nonlocal data
            if data is None:
                data = benchmark_split(cell.case_id, cell.mode, cell.quadrant, seed, cell.n_train, cell.n_val,
                                       cell.n_test, cell.pool_size)
            tr, va, te = data
            res = {}
            if name in DPIVAE_MODELS:
                lam, mcfg = _dpivae_variant(name, cell.model_cfg)
                try:
                    model, hist = fit_dpivae(cell.case_id, tr, va, lam, mcfg, cell.obj_cfg, cell.train_cfg, seed=seed)
                except TrainingError as exc:
                    raise TrainingError(f"{name} {cell.mode} quadrant={cell.quadrant} run={cell.run}: {exc}") from exc
                pred, _ = model.predict_class(te.x)
                res = {"best_epoch": hist.best_epoch, "n_epochs": len(hist), "wall_time": hist.wall_time}
            else:
                # baselines fit the training split only; validation records only steer VAE stopping
                pred = fit_baseline(name, tr.x, tr.y, cell.baseline_cfg.get(name)).predict(te.x)
            pred = np.asarray(pred, dtype=float).reshape(te.y.shape)
            return {"r2": r_squared_multi(te.y, pred), "mse": mse(te.y, pred), **res}

        tag = (f"bench_{cell.case_id}_{name}_{cell.mode}_q{cell.quadrant}_run{cell.run}_seed{cell.seed}"
               f"_n{cell.n_train}-{cell.n_val}-{cell.n_test}-{cell.pool_size}")
        if name in DPIVAE_MODELS:
            tag += "_" + _config_tag(cell.model_cfg, cell.obj_cfg, cell.train_cfg)
        elif cell.baseline_cfg.get(name):
            tag += "_" + hashlib.sha1(json.dumps(cell.baseline_cfg[name], sort_keys=True).encode()).hexdigest()[:10]
        r = _cached(cell.cache_dir, tag, compute)
        out.append({"model": name, "mode": cell.mode, "quadrant": cell.quadrant, "run": cell.run, **r})
    return out


def benchmark(case_id="bridge", modes=MODES, runs=6, models=DPIVAE_MODELS + BASELINES, model_cfg=None,
              obj_cfg=None, train_cfg=None, n_train=1024, n_val=512, n_test=512, pool_size=8192,
              baseline_cfg=None, seed=0, workers=1, cache_dir=None, quadrants=(0, 1, 2, 3)):
    """Table-style comparison of class prediction from responses over quadrant sub-cases."""
    if runs < 1:
        raise ConfigurationError("runs must be at least 1")
    for m in modes:
        if m not in MODES:
            raise ConfigurationError(f"unknown split mode {m!r}")
    get_case(case_id)
    cells = [
        _BenchCell(case_id, mode, q, r, seed, tuple(models), model_cfg or ModelConfig(), obj_cfg or ObjectiveConfig(),
                   train_cfg or TrainConfig(), n_train, n_val, n_test, pool_size, baseline_cfg or {}, cache_dir)
        for r in range(runs)
        for mode in modes
        for q in quadrants
    ]
    out = _run_cells(_bench_cell, cells, workers)
    flat = [row for chunk in out for row in chunk]
    return BenchmarkResult(case_id, list(models), list(modes), flat)


def config_dict(obj):
    """Plain dict of a dataclass config, for manifests."""
    return asdict(obj)
