"""Experiment configuration: YAML files validated against a JSON Schema.

A config expands into a Cartesian grid of fine-tuning cells; every cell has
a content hash that drives resumption and is stamped on its outputs.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import jsonschema
import yaml

from .exceptions import ConfigError
from .operators.base import DEFAULT_HPARAMS, FAMILIES
from .training.spec import POOL_SIZE, STRATEGIES, TASKS

log = logging.getLogger(__name__)

PDES = ["heat", "advection", "burgers", "ns"]
DISTRIBUTIONS = ["in", "out", "ns"]
AUGMENTATIONS = ["none", "noise", "shift", "scale"]

# values we had to choose; validate_config reports them so they stay visible
DECIDED_DEFAULTS = {
    ("pretraining", "tau"): 1.0,
    ("finetune", "epochs"): 200,
}


def _list_of(items):
    return {"type": "array", "minItems": 1, "uniqueItems": True, "items": items}


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "pretraining", "finetune"],
    "properties": {
        "name": {"type": "string"},
        "master_seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "root": {"type": "string"},
                "resolution": {"enum": [32, 64]},
                "generate": {"type": "boolean"},
                "pretrain_per_pde": {"type": "integer", "minimum": 1, "maximum": 3072},
                "finetune_per_pde": {"type": "integer", "minimum": 1, "maximum": POOL_SIZE},
                "validation_per_pde": {"type": "integer", "minimum": 1, "maximum": 256},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["families"],
            "properties": {
                "families": _list_of({"enum": list(FAMILIES)}),
                "hparams": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {f: {"type": "object"} for f in FAMILIES},
                },
            },
        },
        "pretraining": {
            "type": "object",
            "additionalProperties": False,
            "required": ["strategies"],
            "properties": {
                "strategies": _list_of({"enum": list(STRATEGIES)}),
                "augmentations": _list_of({"enum": AUGMENTATIONS}),
                "epochs": {"type": ["integer", "null"], "minimum": 1},
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "jigsaw_k": {"type": "integer", "minimum": 2},
                "mask_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "normalize_coefficients": {"type": "boolean"},
            },
        },
        "finetune": {
            "type": "object",
            "additionalProperties": False,
            "required": ["tasks"],
            "properties": {
                "tasks": _list_of({"enum": list(TASKS)}),
                "distributions": _list_of({"enum": DISTRIBUTIONS}),
                "pdes": _list_of({"enum": PDES}),
                "n_samples": _list_of({"type": "integer", "minimum": 1, "maximum": POOL_SIZE}),
                "seeds": _list_of({"type": "integer", "minimum": 0}),
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "weight_decay": {"type": "number", "minimum": 0},
            },
        },
        "report": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"out": {"type": "string"}, "n_samples": {"type": "integer"}},
        },
    },
}

DEFAULTS = {
    "name": "experiment",
    "master_seed": 0,
    "output_dir": "runs",
    "dataset": {"resolution": 32, "generate": True, "workers": 1},
    "model": {"hparams": {}},
    "pretraining": {"augmentations": ["none"], "epochs": None, "tau": 1.0, "jigsaw_k": 1000,
                    "mask_ratio": 0.75, "normalize_coefficients": False},
    "finetune": {"distributions": ["in"], "pdes": ["heat", "advection", "burgers"], "n_samples": [500],
                 "seeds": [0, 1, 2, 3, 4], "epochs": 200, "batch_size": 32, "lr": 1e-3, "weight_decay": 1e-6},
    "report": {"out": "report", "n_samples": 500},
}


@dataclass
class Diagnostics:
    errors: list
    warnings: list

    @property
    def ok(self):
        return not self.errors


def _path(err) -> str:
    out = ""
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def parse_yaml(text: str, source="<config>"):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: {getattr(exc, 'problem', None) or exc}") from exc


def check(data) -> Diagnostics:
    """Schema errors (with paths) plus cross-field checks and default warnings."""
    errors, warnings = [], []
    if not isinstance(data, dict):
        return Diagnostics(["<root>: config must be a mapping"], [])
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        errors.append(f"{_path(err)}: {err.message}")
    if errors:
        return Diagnostics(errors, warnings)
    cfg = resolve(data)
    ft = cfg["finetune"]
    if ("ns" in ft["pdes"]) != ("ns" in ft["distributions"]):
        errors.append("finetune: the ns PDE and the ns distribution must be listed together")
    for fam, hp in cfg["model"]["hparams"].items():
        unknown = set(hp) - set(DEFAULT_HPARAMS[fam])
        if unknown:
            errors.append(f"model.hparams.{fam}: unknown keys {sorted(unknown)}")
    for (section, key), value in DECIDED_DEFAULTS.items():
        given = data.get(section, {}).get(key)
        if given is None:
            warnings.append(f"{section}.{key} not set; using the chosen default {value}")
        elif given != value:
            warnings.append(f"{section}.{key} = {given} differs from the chosen default {value}")
    return Diagnostics(errors, warnings)


def validate_config(path) -> Diagnostics:
    """Parse and check a config file. Parse failures raise ConfigError with line:column."""
    path = Path(path)
    return check(parse_yaml(path.read_text(), str(path)))


def resolve(data) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    for k, v in data.items():
        if isinstance(v, dict):
            cfg[k] = {**cfg.get(k, {}), **v}
        else:
            cfg[k] = v
    return cfg


def load_config(path) -> dict:
    """Validated, defaults-filled config; raises ConfigError listing every problem."""
    path = Path(path)
    data = parse_yaml(path.read_text(), str(path))
    diag = check(data)
    if not diag.ok:
        raise ConfigError("invalid config:\n  " + "\n  ".join(diag.errors))
    for w in diag.warnings:
        log.warning(w)
    return resolve(data)


def stable_hash(obj, n=16) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:n]


# -- cell grid ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    family: str
    strategy: str
    augmentation: str
    task: str
    distribution: str
    pde: str
    n_samples: int
    seed: int

    @property
    def cell_id(self):
        return (f"{self.family}/{self.strategy}/{self.augmentation}/{self.task}/{self.distribution}/"
                f"{self.pde}/n{self.n_samples}/s{self.seed}")

    def pretrain_key(self):
        return (self.family, self.strategy, self.augmentation, self.task)


def dataset_section(cfg) -> dict:
    d = cfg["dataset"]
    return {"master_seed": cfg["master_seed"], "resolution": d["resolution"],
            "pretrain_per_pde": d.get("pretrain_per_pde"), "finetune_per_pde": d.get("finetune_per_pde"),
            "validation_per_pde": d.get("validation_per_pde")}


def pretrain_section(cfg, family, strategy, augmentation, task) -> dict:
    p = cfg["pretraining"]
    return {"dataset": dataset_section(cfg), "family": family,
            "hparams": cfg["model"]["hparams"].get(family, {}), "strategy": strategy,
            "augmentation": augmentation, "task": task, "epochs": p["epochs"], "tau": p["tau"],
            "jigsaw_k": p["jigsaw_k"], "mask_ratio": p["mask_ratio"],
            "normalize_coefficients": p["normalize_coefficients"]}


def cell_section(cfg, cell: Cell) -> dict:
    """Everything that determines a cell's result; its hash is the resume key."""
    ft = cfg["finetune"]
    base = {"dataset": dataset_section(cfg), "family": cell.family,
            "hparams": cfg["model"]["hparams"].get(cell.family, {})}
    if cell.strategy not in ("none",):
        base["pretrain"] = pretrain_section(cfg, *cell.pretrain_key())
    base.update({"strategy": cell.strategy, "augmentation": cell.augmentation, "task": cell.task,
                 "distribution": cell.distribution, "pde": cell.pde, "n_samples": cell.n_samples,
                 "seed": cell.seed, "epochs": ft["epochs"], "batch_size": ft["batch_size"], "lr": ft["lr"],
                 "weight_decay": ft["weight_decay"]})
    return base


def cell_hash(cfg, cell: Cell) -> str:
    return stable_hash(cell_section(cfg, cell))


def expand_cells(cfg) -> list[Cell]:
    """models x strategies x augmentations x tasks x distributions x PDEs x n x seeds.

    The ns distribution pairs only with the ns PDE and vice versa.
    """
    ft = cfg["finetune"]
    cells = []
    for fam, strat, aug, task, dist, pde, n, seed in product(
            cfg["model"]["families"], cfg["pretraining"]["strategies"], cfg["pretraining"]["augmentations"],
            ft["tasks"], ft["distributions"], ft["pdes"], ft["n_samples"], ft["seeds"]):
        if (dist == "ns") != (pde == "ns"):
            continue
        cells.append(Cell(fam, strat, aug, task, dist, pde, int(n), int(seed)))
    return cells


def example_config() -> str:
    """A complete config at the published defaults."""
    return """\
name: pretraining-benchmark
master_seed: 0
output_dir: runs
dataset:
  resolution: 32
  generate: true
model:
  families: [fno, deeponet, oformer, unet]
pretraining:
  strategies: [none, transfer, binary, timesort, jigsaw, coefficient, derivative, masked, picl]
  augmentations: [none]
finetune:
  tasks: [fixed_future, autoregressive]
  distributions: [in, out, ns]
  pdes: [heat, advection, burgers, ns]
  n_samples: [500]
  seeds: [0, 1, 2, 3, 4]
report:
  out: report
"""
