"""Command-line entry point: dpivae {generate,train,evaluate,traverse,sweep,benchmark}.

Exit codes: 0 success, 1 invalid input (config, arguments, missing
artifacts), 2 runtime failure (numerics, training abort, I/O).
Set DPIVAE_THREADS to cap torch/BLAS threads and enable deterministic
kernels for bitwise-repeatable runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import ConfigurationError, DomainError, GenerationError, NumericError, SizeError, TrainingError

log = logging.getLogger("dpivae")

THREADS_ENV = "DPIVAE_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class MissingArtifact(ConfigurationError):
    pass


def _apply_thread_cap():
    val = os.environ.get(THREADS_ENV)
    if not val:
        return
    try:
        n = int(val)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {val!r}")
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be at least 1")
    for var in ("OMP_NUM_THREADS", "MKL_NUM_THREADS", "OPENBLAS_NUM_THREADS"):
        os.environ[var] = str(n)
    import torch

    torch.set_num_threads(n)
    torch.use_deterministic_algorithms(True)


def _paths(cfg):
    out = cfg.out_dir
    return {
        "out": out,
        "data": os.path.join(out, "data", "dataset.csv"),
        "model": os.path.join(out, "model.pt"),
        "train_log": os.path.join(out, "train_log.csv"),
        "manifest": os.path.join(out, "config.yaml"),
    }


def _prepare(cfg):
    p = _paths(cfg)
    os.makedirs(p["out"], exist_ok=True)
    cfg.dump(p["manifest"])
    return p


def _require(path, what):
    if not os.path.exists(path):
        raise MissingArtifact(f"missing {what}: {path}")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)


# -- commands --------------------------------------------------------------


def cmd_generate(cfg, args):
    from .datagen import make_dataset

    p = _prepare(cfg)
    os.makedirs(os.path.dirname(p["data"]), exist_ok=True)
    d = make_dataset(cfg.case_id, cfg.data.n_records, cfg.seed, cfg.noise)
    d.to_csv(p["data"])
    print(f"wrote {len(d)} records to {p['data']}")


def _load_splits(cfg, p):
    from .datagen import Dataset, split_dataset

    _require(p["data"], "dataset (run 'generate' first)")
    d = Dataset.from_csv(p["data"])
    if d.case_id != cfg.case_id:
        raise ConfigurationError(f"dataset case {d.case_id!r} does not match config case {cfg.case_id!r}")
    return split_dataset(d, cfg.data.n_train, cfg.data.n_val, cfg.data.n_test)


def _load_model(cfg, p):
    from .model import DPIVAE

    _require(p["model"], "checkpoint (run 'train' first)")
    model = DPIVAE.load(p["model"])
    if model.case.case_id != cfg.case_id:
        raise ConfigurationError(f"checkpoint case {model.case.case_id!r} does not match config case {cfg.case_id!r}")
    return model


def cmd_train(cfg, args):
    import torch

    from .model import DPIVAE
    from .training import train

    p = _prepare(cfg)
    tr, va, _ = _load_splits(cfg, p)
    start = 0
    if args.resume:
        _require(p["model"], "checkpoint to resume from")
        blob = torch.load(p["model"], weights_only=False)
        model = DPIVAE.load(p["model"])
        start = int(blob["extra"].get("epoch", -1)) + 1
        fit_norm = False
    else:
        model = DPIVAE(cfg.case_id, cfg.model, grl_lambda=cfg.lam, seed=cfg.seed)
        fit_norm = True
    model, hist = train(model, (tr, va), cfg.objective, cfg.train, log_path=p["train_log"],
                        checkpoint_path=p["model"], start_epoch=start, fit_normalization=fit_norm,
                        progress_every=args.progress)
    if hist.best_epoch < 0 and not os.path.exists(p["model"]):
        model.save(p["model"], extra={"epoch": start - 1})
    _write_json(os.path.join(p["out"], "train_summary.json"), {
        "best_epoch": hist.best_epoch, "best_val": hist.best_val, "epochs_run": len(hist),
        "start_epoch": start, "stopped_early": hist.stopped_early, "sigma_x": float(model.sigma_x.detach()),
    })
    print(f"best validation ELBO {hist.best_val:.6g} at epoch {hist.best_epoch}; checkpoint {p['model']}")


def cmd_evaluate(cfg, args):
    from .evaluation import disentanglement_scores, mse, predict_class, r_squared_multi

    p = _prepare(cfg)
    model = _load_model(cfg, p)
    ev = cfg.evaluation
    rep = disentanglement_scores(model, cfg.case_id, ev.n_score_train, ev.n_score_test, ev.regressor,
                                 seed=cfg.seed, noise=cfg.data.noise)
    rep.to_csv(os.path.join(p["out"], "disentanglement.csv"))
    summary = {"disentanglement": rep.rows(), "regressor": rep.regressor_id}
    _, _, te = _load_splits(cfg, p)
    if len(te) >= 2:
        mean, _ = predict_class(model, te.x)
        summary["class_prediction"] = {"r2": r_squared_multi(te.y, mean), "mse": mse(te.y, mean), "n_test": len(te)}
    _write_json(os.path.join(p["out"], "evaluation.json"), summary)
    print(json.dumps(summary.get("class_prediction", {})))


def cmd_traverse(cfg, args):
    from .evaluation import traverse

    p = _prepare(cfg)
    model = _load_model(cfg, p)
    ev = cfg.evaluation
    factor = ev.traverse_factor or cfg.case.names("physics")[0]
    res = traverse(model, cfg.case_id, factor, ev.fixed_values, ev.n_grid, ev.n_real, cfg.seed, cfg.data.noise)
    base = os.path.join(p["out"], f"traverse_{factor}")
    res.to_csv(base + ".csv", latents_path=base + "_latents.csv")
    _write_json(base + ".json", {
        "factor": factor, "grid": res.grid.tolist(), "n_samples": res.n_samples, "sigma_x": res.sigma_x,
        **{f"variation_{k}": res.variation(k) for k in ("x_hat_p", "x_hat_d", "x_draw", "x_clean")},
        **{f"variance_{k}": res.variance(k) for k in ("x_hat_p", "x_hat_d", "x_clean")},
    })
    print(f"wrote {base}.csv")


def cmd_sweep(cfg, args):
    from .evaluation import lambda_sweep

    p = _prepare(cfg)
    ev = cfg.evaluation
    res = lambda_sweep(cfg.case_id, ev.lambdas, ev.runs, cfg.model, cfg.objective, cfg.train, cfg.data.n_train,
                       cfg.data.n_val, ev.n_score_train, ev.n_score_test, cfg.seed, args.workers,
                       os.path.join(p["out"], "cells"))
    res.to_csv(os.path.join(p["out"], "sweep.csv"))
    res.to_json(os.path.join(p["out"], "sweep.json"))
    print(f"wrote {os.path.join(p['out'], 'sweep.csv')}")


def cmd_benchmark(cfg, args):
    from .evaluation import benchmark

    p = _prepare(cfg)
    ev = cfg.evaluation
    res = benchmark(cfg.case_id, ev.modes, ev.runs, model_cfg=cfg.model, obj_cfg=cfg.objective, train_cfg=cfg.train,
                    n_train=cfg.data.n_train, n_val=cfg.data.n_val, n_test=cfg.data.n_test, pool_size=ev.pool_size,
                    baseline_cfg=ev.baselines, seed=cfg.seed, workers=args.workers,
                    cache_dir=os.path.join(p["out"], "cells"), quadrants=tuple(ev.quadrants))
    res.to_csv(os.path.join(p["out"], "benchmark.csv"))
    res.to_json(os.path.join(p["out"], "benchmark.json"))
    for row in res.rows():
        print(row["model"], " ".join(f"{m}: R2 {row[f'{m}_r2_mean']:.3f}" for m in res.modes))


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "traverse": cmd_traverse,
    "sweep": cmd_sweep,
    "benchmark": cmd_benchmark,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="dpivae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML experiment config (defaults when omitted)")
        sp.add_argument("--case", dest="case_id", help="override case_id")
        sp.add_argument("--seed", type=int, help="override seed")
        sp.add_argument("--out", dest="out_dir", help="override output directory")
        sp.add_argument("--workers", type=int, default=1, help="process pool size for sweep/benchmark")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "train":
            sp.add_argument("--resume", action="store_true", help="continue from the checkpoint in --out")
            sp.add_argument("--progress", type=int, default=0, help="log every N epochs (0: silent)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; those are validation errors here
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        from .config import load_config

        _apply_thread_cap()
        if args.workers < 1:
            raise ConfigurationError("--workers must be at least 1")
        cfg = load_config(args.config, case_id=args.case_id, seed=args.seed, out_dir=args.out_dir)
        COMMANDS[args.command](cfg, args)
    except (ConfigurationError, DomainError, SizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, TrainingError, GenerationError, OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
