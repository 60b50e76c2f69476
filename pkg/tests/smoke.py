"""Reduced-scale training run shared by the acceptance suite.

Run directly (``python3 tests/smoke.py OUT_DIR``) to produce the same summary
outside pytest.
"""
from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from pdepretrain.datagen import generate_dataset, load_split
from pdepretrain.operators import ModelConfig, build_model
from pdepretrain.training import TrainSpec, finetune, pretrain

SMOKE = {
    "pretrain_per_pde": 256,
    "finetune_samples": 64,
    "validation_samples": 256,
    "epochs": 30,
    "resolution": 32,
    "seed": 0,
    "family": "fno",
    "task": "fixed_future",
}
STRATEGIES = ("transfer", "binary", "timesort", "spacesort", "jigsaw", "coefficient", "derivative", "masked", "picl")


def run_smoke(out_dir, strategies=STRATEGIES, cfg=SMOKE, log=print):
    out_dir = Path(out_dir)
    seed = cfg["seed"]
    res = cfg["resolution"]
    generate_dataset("pretrain", seed, out_dir, res, n_per_pde=cfg["pretrain_per_pde"])
    generate_dataset("finetune_in", seed, out_dir, res, n_per_pde=cfg["finetune_samples"])
    generate_dataset("validation_in", seed, out_dir, res, n_per_pde=cfg["validation_samples"])
    pre = load_split(out_dir / f"pretrain_{res}.h5")
    pool = load_split(out_dir / f"finetune_in_{res}.h5", pdes=["heat"])
    val = load_split(out_dir / f"validation_in_{res}.h5", pdes=["heat"])
    model_cfg = ModelConfig(cfg["family"], out_frames=1)

    summary = {"config": cfg, "pretrain": {}, "finetune": {}}
    models = {}
    for strategy in strategies:
        t0 = time.perf_counter()
        spec = TrainSpec(phase="pretrain", strategy=strategy, task=cfg["task"], epochs=cfg["epochs"])
        result = pretrain(build_model(model_cfg, seed=seed), strategy, pre, spec, seed=seed)
        models[strategy] = result.model
        h = result.history
        summary["pretrain"][strategy] = {"history": h, "decrease": 1 - h[-1] / h[0],
                                         "seconds": time.perf_counter() - t0}
        log(f"pretrain {strategy}: {h[0]:.4g} -> {h[-1]:.4g} ({time.perf_counter() - t0:.0f}s)")

    spec = TrainSpec(phase="finetune", task=cfg["task"], epochs=cfg["epochs"], n_samples=cfg["finetune_samples"],
                     seeds=(seed,))
    for name, pretrained in (("none", None), ("transfer", models.get("transfer"))):
        if name == "transfer" and pretrained is None:
            continue
        spec.strategy = name
        (rec,) = finetune(pretrained, pool, val, spec, model_config=model_cfg)
        summary["finetune"][name] = {"error": rec.error, "diverged": rec.diverged,
                                     "final_train_loss": rec.final_train_loss}
        log(f"finetune {name}: validation error {rec.error:.4g}")

    values = [v for s in summary["pretrain"].values() for v in s["history"]]
    values += [v for s in summary["finetune"].values() for v in (s["error"], s["final_train_loss"])]
    summary["all_finite"] = all(math.isfinite(v) for v in values)
    (out_dir / "smoke_summary.json").write_text(json.dumps(summary, indent=1))
    return summary


if __name__ == "__main__":
    run_smoke(sys.argv[1], strategies=tuple(sys.argv[2:]) or STRATEGIES, log=lambda m: print(m, flush=True))
