"""Metric records and the append-only JSONL log."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

# fields that legitimately differ between identical reruns
VOLATILE_FIELDS = ("wall_clock",)


@dataclass
class MetricRecord:
    model: str
    strategy: str
    augmentation: str
    pde: str
    distribution: str
    task: str
    n_samples: int
    seed: int
    error: float
    diverged: bool = False
    epochs: int = 0
    final_train_loss: float = math.nan
    wall_clock: float = 0.0
    config_hash: str = ""
    cell_id: str = ""
    git_rev: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        # json has no inf/nan; keep them readable and reversible
        for k in ("error", "final_train_loss"):
            v = d[k]
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "MetricRecord":
        d = json.loads(line)
        for k in ("error", "final_train_loss"):
            if isinstance(d.get(k), str):
                d[k] = float(d[k])
        names = {f.name for f in fields(cls)}
        extra = {k: v for k, v in d.items() if k not in names}
        d = {k: v for k, v in d.items() if k in names}
        if extra:
            d.setdefault("extra", {}).update(extra)
        return cls(**d)

    def comparable(self) -> dict:
        # via JSON so that nan fields compare equal
        d = json.loads(self.to_json())
        for k in VOLATILE_FIELDS:
            d.pop(k)
        return d


def append_record(path, record: MetricRecord) -> None:
    """One ``write`` of one full line on an ``O_APPEND`` descriptor, so
    concurrent writers never interleave partial records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = (record.to_json() + "\n").encode()
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
    try:
        os.write(fd, data)
    finally:
        os.close(fd)


def read_records(path) -> list[MetricRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(MetricRecord.from_json(line))
    return out
