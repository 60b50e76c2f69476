"""``bench`` command line: generate, pretrain, finetune, report, validate, run."""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .augment import AugmentationSpec
from .config import load_config, validate_config
from .datagen import SPLITS, dataset_path, default_data_root, generate_dataset, load_split
from .exceptions import BenchError, ConfigError
from .operators import FAMILIES, ModelConfig, build_model, load_checkpoint, save_checkpoint
from .report import write_report
from .training import STRATEGIES, TASKS, TrainSpec, finetune, pretrain, read_records
from .training.records import append_record


def _seeds(text):
    return tuple(int(s) for s in text.split(",") if s.strip())


@click.group()
@click.option("-v", "--verbose", count=True, help="More logging (-v info, -vv debug).")
def main(verbose):
    """Pretraining benchmark for neural PDE operators."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--split", type=click.Choice(sorted(SPLITS)), required=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--resolution", type=click.Choice(["32", "64"]), default="32", show_default=True)
@click.option("--n-per-pde", type=int, default=None, help="Override the split size.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: $BENCH_DATA_ROOT or ./data).")
@click.option("--workers", type=int, default=1, show_default=True)
def generate(split, seed, resolution, n_per_pde, out_dir, workers):
    """Solve and write one dataset split to HDF5."""
    out = Path(out_dir) if out_dir else default_data_root()
    m = generate_dataset(split, seed, out, int(resolution), n_per_pde=n_per_pde, workers=workers)
    click.echo(f"{m.path}: {m.counts}")


@main.command("pretrain")
@click.option("--family", type=click.Choice(FAMILIES), required=True)
@click.option("--strategy", type=click.Choice([s for s in STRATEGIES if s != "none"]), required=True)
@click.option("--task", type=click.Choice(TASKS), default="autoregressive", show_default=True)
@click.option("--data", "data_file", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Pretraining split (.h5).")
@click.option("--augmentation", type=click.Choice(["none", "noise", "shift", "scale"]), default="none")
@click.option("--epochs", type=int, default=None)
@click.option("--tau", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), required=True, help="Checkpoint (.npz).")
def pretrain_cmd(family, strategy, task, data_file, augmentation, epochs, tau, seed, out_file):
    """Pretrain a backbone and save it as a checkpoint."""
    data = load_split(data_file)
    spec = TrainSpec(phase="pretrain", strategy=strategy, task=task, epochs=epochs,
                     augmentation=AugmentationSpec(augmentation), tau=tau)
    model = build_model(ModelConfig(family, out_frames=spec.out_frames), seed=seed)
    result = pretrain(model, strategy, data, spec, seed=seed)
    save_checkpoint(result.model, out_file, {"strategy": strategy, "task": task, "augmentation": augmentation,
                                             "seed_chain": [seed], "history": result.history,
                                             "data": str(data_file)})
    click.echo(f"{strategy}: loss {result.history[0]:.4g} -> {result.history[-1]:.4g}; saved {out_file}")


@main.command("finetune")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Pretrained checkpoint; omit to train from scratch.")
@click.option("--family", type=click.Choice(FAMILIES), default=None, help="Required without --checkpoint.")
@click.option("--task", type=click.Choice(TASKS), default="autoregressive", show_default=True)
@click.option("--pool", "pool_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--val", "val_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--pde", default=None, help="Restrict to one PDE group of the splits.")
@click.option("--n-samples", type=int, default=500, show_default=True)
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--augmentation", type=click.Choice(["none", "noise", "shift", "scale"]), default="none")
@click.option("--strategy", default=None, help="Label for the records (default from the checkpoint).")
@click.option("--records", type=click.Path(dir_okay=False), required=True, help="JSONL log to append to.")
def finetune_cmd(checkpoint, family, task, pool_file, val_file, pde, n_samples, seeds, epochs, augmentation,
                 strategy, records):
    """Fine-tune once per seed and append one metric record each."""
    pdes = [pde] if pde else None
    pool, val = load_split(pool_file, pdes), load_split(val_file, pdes)
    out = 1 if task == "fixed_future" else 8
    if checkpoint:
        model, meta = load_checkpoint(checkpoint)
        if model.out_frames != out:
            raise click.UsageError(f"checkpoint predicts {model.out_frames} frames; {task} needs {out}")
        strategy = strategy or meta.get("provenance", {}).get("strategy", "transfer")
        model_cfg = model.config
    else:
        if family is None:
            raise click.UsageError("--family is required without --checkpoint")
        model, model_cfg, strategy = None, ModelConfig(family, out_frames=out), strategy or "none"
    spec = TrainSpec(phase="finetune", strategy=strategy, task=task, epochs=epochs, seeds=_seeds(seeds),
                     n_samples=n_samples, augmentation=AugmentationSpec(augmentation))
    recs = finetune(model, pool, val, spec, model_config=model_cfg,
                    on_record=lambda r: append_record(records, r))
    for r in recs:
        click.echo(f"seed {r.seed}: error {r.error:.4g}{' (diverged)' if r.diverged else ''}")


@main.command()
@click.option("--task", type=click.Choice(TASKS), default="autoregressive", show_default=True)
@click.option("--records", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="report", show_default=True)
@click.option("--n-samples", type=int, default=500, show_default=True)
def report(task, records, out_dir, n_samples):
    """Write markdown/CSV tables and plots from a record log."""
    files = write_report(read_records(records), out_dir, task=task, n_samples=n_samples)
    for f in files:
        click.echo(str(Path(out_dir) / f))
    if not files:
        click.echo("no records for this task", err=True)
        sys.exit(1)


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
def validate(config):
    """Check a config file; exit status 1 on errors."""
    try:
        diag = validate_config(config)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for w in diag.warnings:
        click.echo(f"warning: {w}")
    for e in diag.errors:
        click.echo(f"error: {e}", err=True)
    if diag.ok:
        click.echo("ok")
    sys.exit(0 if diag.ok else 1)


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel cell processes.")
@click.option("--dry-run", is_flag=True, help="List planned cells without running them.")
@click.option("--resume/--no-resume", default=True, show_default=True,
              help="Skip cells already in the record log.")
def run(config, workers, dry_run, resume):
    """Run the full experiment matrix of a config."""
    from .runner import run_matrix

    try:
        cfg = load_config(config)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    try:
        result = run_matrix(cfg, workers=workers, dry_run=dry_run, resume=resume, echo=click.echo)
    except BenchError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for cid in sorted(result.failed):
        click.echo(f"failed: {cid}", err=True)
    sys.exit(result.exit_code)


if __name__ == "__main__":
    main()
