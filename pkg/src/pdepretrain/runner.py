"""Experiment matrix orchestration: data, pretraining, fine-tuning cells."""
from __future__ import annotations

import json
import logging
import math
import subprocess
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from .augment import AugmentationSpec
from .config import Cell, cell_hash, dataset_section, expand_cells, pretrain_section, stable_hash
from .datagen import dataset_path, default_data_root, generate_dataset, is_complete, load_split
from .operators import ModelConfig, build_model, load_checkpoint, save_checkpoint
from .report.render import _write
from .training import TrainSpec, finetune, pretrain, read_records
from .training.records import append_record

log = logging.getLogger(__name__)

FINETUNE_SPLIT = {"in": "finetune_in", "out": "finetune_out", "ns": "finetune_ns"}
VALIDATION_SPLIT = {"in": "validation_in", "out": "validation_out", "ns": "validation_ns"}


@dataclass
class MatrixResult:
    planned: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    executed: list = field(default_factory=list)
    failed: dict = field(default_factory=dict)

    @property
    def exit_code(self):
        return 1 if self.failed else 0


def git_rev() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True, timeout=5)
        return out.stdout.strip() if out.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        return ""


class Paths:
    def __init__(self, cfg):
        self.out = Path(cfg["output_dir"])
        root = cfg["dataset"].get("root")
        self.data = Path(root) if root else default_data_root()
        self.records = self.out / "records.jsonl"
        self.checkpoints = self.out / "checkpoints"
        self.plan = self.out / "plan.json"
        self.failures = self.out / "failures.jsonl"


def _split_size(cfg, split):
    d = cfg["dataset"]
    if split == "pretrain":
        return d.get("pretrain_per_pde")
    if split.startswith("finetune"):
        return d.get("finetune_per_pde")
    return d.get("validation_per_pde")


def required_splits(cfg, cells):
    splits = set()
    if any(c.strategy != "none" for c in cells):
        splits.add("pretrain")
    for c in cells:
        splits.add(FINETUNE_SPLIT[c.distribution])
        splits.add(VALIDATION_SPLIT[c.distribution])
    # the out splits reuse the in initial conditions, so no extra dependency
    return sorted(splits)


def ensure_data(cfg, cells, paths: Paths, workers=1):
    res = cfg["dataset"]["resolution"]
    seed = cfg["master_seed"]
    for split in required_splits(cfg, cells):
        path = dataset_path(paths.data, split, res)
        n = _split_size(cfg, split)
        if is_complete(path, seed, n):
            continue
        if not cfg["dataset"].get("generate", True):
            raise FileNotFoundError(f"{path} missing and dataset.generate is false")
        prov = {"dataset_hash": stable_hash(dataset_section(cfg)), "seed_chain": [seed, split]}
        log.info("generating %s", path)
        generate_dataset(split, seed, paths.data, res, n_per_pde=n, workers=workers, provenance=prov)


def _model_config(cfg, family, task):
    out = 1 if task == "fixed_future" else 8
    return ModelConfig(family, out_frames=out, hparams=cfg["model"]["hparams"].get(family, {}))


def checkpoint_path(cfg, paths: Paths, key) -> Path:
    return paths.checkpoints / f"{stable_hash(pretrain_section(cfg, *key))}.npz"


def run_pretrain(cfg, key, paths: Paths):
    """Pretrain one (family, strategy, augmentation, task); skipped if the checkpoint exists."""
    family, strategy, augmentation, task = key
    path = checkpoint_path(cfg, paths, key)
    if path.exists():
        return path
    p = cfg["pretraining"]
    data = load_split(dataset_path(paths.data, "pretrain", cfg["dataset"]["resolution"]))
    spec = TrainSpec(phase="pretrain", strategy=strategy, task=task, epochs=p["epochs"],
                     augmentation=AugmentationSpec(augmentation), tau=p["tau"], jigsaw_k=p["jigsaw_k"],
                     mask_ratio=p["mask_ratio"], normalize_coefficients=p["normalize_coefficients"])
    seed = cfg["master_seed"]
    model = build_model(_model_config(cfg, family, task), seed=seed)
    result = pretrain(model, strategy, data, spec, seed=seed)
    prov = {"pretrain_hash": path.stem, "seed_chain": [seed], "section": pretrain_section(cfg, *key),
            "history": result.history}
    save_checkpoint(result.model, path, prov)
    return path


def run_cell(cfg, cell: Cell, paths: Paths, rev=""):
    """Fine-tune and score one cell, appending its record to the log."""
    res = cfg["dataset"]["resolution"]
    ft = cfg["finetune"]
    pool = load_split(dataset_path(paths.data, FINETUNE_SPLIT[cell.distribution], res), pdes=[cell.pde])
    val = load_split(dataset_path(paths.data, VALIDATION_SPLIT[cell.distribution], res), pdes=[cell.pde])
    if cell.strategy == "none":
        pretrained = None
    else:
        pretrained, _ = load_checkpoint(checkpoint_path(cfg, paths, cell.pretrain_key()))
    # NS lives on a 64^2 grid; every family is resolution independent
    model_cfg = _model_config(cfg, cell.family, cell.task)
    spec = TrainSpec(phase="finetune", strategy=cell.strategy, task=cell.task, epochs=ft["epochs"],
                     batch_size=ft["batch_size"], lr=ft["lr"], weight_decay=ft["weight_decay"],
                     augmentation=AugmentationSpec(cell.augmentation), seeds=(cell.seed,),
                     n_samples=cell.n_samples)
    h = cell_hash(cfg, cell)
    context = {"distribution": cell.distribution, "config_hash": h, "cell_id": cell.cell_id, "git_rev": rev,
               "extra": {"seed_chain": [cfg["master_seed"], cell.seed]}}
    (rec,) = finetune(pretrained, pool, val, spec, model_config=model_cfg, context=context)
    append_record(paths.records, rec)
    return rec


def _cell_job(cfg, cell, rev):
    paths = Paths(cfg)
    try:
        rec = run_cell(cfg, cell, paths, rev)
        return cell, None, rec.error
    except Exception:  # isolate every cell failure
        return cell, traceback.format_exc(), math.nan


def _pretrain_job(cfg, key):
    try:
        run_pretrain(cfg, key, Paths(cfg))
        return key, None
    except Exception:
        return key, traceback.format_exc()


def plan(cfg):
    cells = expand_cells(cfg)
    return [(c, cell_hash(cfg, c)) for c in cells]


def run_matrix(cfg, workers=1, dry_run=False, resume=True, echo=print, cell_runner=None):
    """Execute every planned cell not already in the record log.

    Failures are collected per cell; dependent cells of a failed pretraining
    are failed too. ``cell_runner`` replaces :func:`run_cell` (tests inject
    faults this way; it forces in-process execution).
    """
    paths = Paths(cfg)
    planned = plan(cfg)
    result = MatrixResult(planned=[c for c, _ in planned])
    if dry_run:
        for c, h in planned:
            echo(f"{h}  {c.cell_id}")
        echo(f"{len(planned)} planned cells")
        return result

    paths.out.mkdir(parents=True, exist_ok=True)
    plan_doc = json.dumps({"cells": [{"cell_id": c.cell_id, "hash": h} for c, h in planned],
                           "config_hash": stable_hash(cfg)}, indent=1, sort_keys=True) + "\n"
    _write(paths.plan, plan_doc)

    hashes = {h for _, h in planned}
    existing = read_records(paths.records)
    if not resume and existing:
        kept = [r for r in existing if r.config_hash not in hashes]
        _write(paths.records, "".join(r.to_json() + "\n" for r in kept))
        existing = kept
    done = {r.config_hash for r in existing}
    todo = []
    for c, h in planned:
        (result.skipped if h in done else todo).append(c)
    if not todo:
        echo(f"all {len(planned)} cells complete")
        _clear_failures(paths)
        return result

    ensure_data(cfg, todo, paths, workers=cfg["dataset"].get("workers", 1))
    rev = git_rev()

    keys = sorted({c.pretrain_key() for c in todo if c.strategy != "none"})
    failed_keys = {}
    jobs = [k for k in keys if not checkpoint_path(cfg, paths, k).exists()]
    for key, err in _map(_pretrain_job, [(cfg, k) for k in jobs], workers):
        if err:
            failed_keys[key] = err
            log.error("pretraining %s failed:\n%s", key, err)

    runnable = []
    for c in todo:
        if c.pretrain_key() in failed_keys:
            result.failed[c.cell_id] = "pretraining failed:\n" + failed_keys[c.pretrain_key()]
        else:
            runnable.append(c)
    if cell_runner is not None:
        for c in runnable:
            try:
                cell_runner(cfg, c, paths, rev)
                result.executed.append(c)
            except Exception:
                result.failed[c.cell_id] = traceback.format_exc()
    else:
        for c, err, error in _map(_cell_job, [(cfg, c, rev) for c in runnable], workers):
            if err:
                result.failed[c.cell_id] = err
            else:
                result.executed.append(c)
                echo(f"done {c.cell_id}: {error:.4g}")
    for cid, err in result.failed.items():
        log.error("cell %s failed:\n%s", cid, err)
    if result.failed:
        lines = "".join(json.dumps({"cell_id": k, "error": v.strip().splitlines()[-1]}) + "\n"
                        for k, v in sorted(result.failed.items()))
        _write(paths.failures, lines)
    else:
        _clear_failures(paths)
    echo(f"{len(result.executed)} executed, {len(result.skipped)} skipped, {len(result.failed)} failed")
    return result


def _clear_failures(paths):
    if paths.failures.exists():
        paths.failures.unlink()


def _map(fn, arglists, workers):
    if workers <= 1 or len(arglists) <= 1:
        for args in arglists:
            yield fn(*args)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args) for args in arglists]
        for f in as_completed(futures):
            yield f.result()
