from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from ..exceptions import BenchError
from .base import ModelConfig, OperatorModel
from .deeponet import DeepONet
from .fno import FNO
from .oformer import OFormer
from .unet import Unet

MODEL_CLASSES = {"fno": FNO, "deeponet": DeepONet, "oformer": OFormer, "unet": Unet}
CHECKPOINT_VERSION = 1
_META_KEY = "__metadata__"


def build_model(config: ModelConfig | dict | str, seed: int = 0, **overrides) -> OperatorModel:
    if isinstance(config, str):
        config = ModelConfig(config, **overrides)
    elif isinstance(config, dict):
        config = ModelConfig.from_dict(config)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return MODEL_CLASSES[config.family](config)


def save_checkpoint(model: OperatorModel, path, provenance: dict | None = None) -> Path:
    """Weights as a named-array ``.npz`` with a JSON metadata document inside."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    meta = {"version": CHECKPOINT_VERSION, "config": model.config.to_dict(), "provenance": provenance or {}}
    arrays[_META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    tmp.replace(path)
    return path


def load_checkpoint(path) -> tuple[OperatorModel, dict]:
    with np.load(path, allow_pickle=False) as data:
        if _META_KEY not in data:
            raise BenchError(f"{path} has no metadata document")
        meta = json.loads(str(data[_META_KEY]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise BenchError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        model = build_model(ModelConfig.from_dict(meta["config"]))
        state = {k: torch.from_numpy(np.array(data[k])) for k in data.files if k != _META_KEY}
    model.load_state_dict(state)
    return model, meta
