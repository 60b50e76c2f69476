"""Seed aggregation, best-strategy selection and improvement summaries."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from itertools import product

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

DISPLAY_SCALE = 0.1  # tables print errors in units of 1e-1
KEYS = ["model", "pde", "strategy", "augmentation"]
SHARED = ("task", "distribution", "n_samples")
MODEL_ORDER = ["fno", "deeponet", "oformer", "unet"]
PDE_ORDER = ["heat", "advection", "burgers", "ns"]
STRATEGY_ORDER = ["none", "transfer", "binary", "timesort", "spacesort", "jigsaw", "coefficient",
                  "derivative", "masked", "picl"]
AUGMENTATION_ORDER = ["none", "noise", "shift", "scale"]


def _order(values, preferred):
    rank = {v: i for i, v in enumerate(preferred)}
    return sorted(set(values), key=lambda v: (rank.get(v, len(rank)), v))


@dataclass
class ResultTable:
    """One row per (model, pde, strategy, augmentation) cell.

    ``cells`` holds ``mean``, ``std`` and ``count`` of the raw relative L2
    error; ``display`` divides by ``scale`` for printing.
    """

    cells: pd.DataFrame
    scale: float = DISPLAY_SCALE
    missing: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def display(self) -> pd.DataFrame:
        out = self.cells.copy()
        out["value"] = out["mean"] / self.scale
        out["spread"] = out["std"] / self.scale
        return out

    def slice(self, model, pde, augmentation=None) -> pd.DataFrame:
        c = self.cells
        sel = (c.model == model) & (c.pde == pde)
        if augmentation is not None:
            sel &= c.augmentation == augmentation
        return c[sel]

    def error(self, model, pde, strategy, augmentation="none") -> float:
        c = self.cells
        row = c[(c.model == model) & (c.pde == pde) & (c.strategy == strategy) & (c.augmentation == augmentation)]
        if row.empty:
            raise KeyError((model, pde, strategy, augmentation))
        return float(row["mean"].iloc[0])

    @property
    def models(self):
        return _order(self.cells.model, MODEL_ORDER)

    @property
    def pdes(self):
        return _order(self.cells.pde, PDE_ORDER)

    @property
    def strategies(self):
        return _order(self.cells.strategy, STRATEGY_ORDER)

    @classmethod
    def from_values(cls, rows, scale=DISPLAY_SCALE, meta=None):
        """Build from already-averaged display values (e.g. a published table)."""
        df = pd.DataFrame(rows)
        df["mean"] = df.pop("value").astype(float) * scale
        df["std"] = np.nan
        df["count"] = 0
        if "augmentation" not in df:
            df["augmentation"] = "none"
        keep = KEYS + ["mean", "std", "count"] + (["rank"] if "rank" in df else [])
        return cls(df[keep].reset_index(drop=True), scale, [], dict(meta or {}))


def aggregate(records, expected=None) -> ResultTable:
    """Mean and std-dev over seeds per cell.

    Records must agree on task, distribution and n_samples. ``expected`` maps
    key -> values; cells of that grid with no record are listed in
    ``missing`` (the grid of observed values is used when omitted).
    """
    records = list(records)
    if not records:
        return ResultTable(pd.DataFrame(columns=KEYS + ["mean", "std", "count"]), missing=[])
    df = pd.DataFrame([{**{k: getattr(r, k) for k in KEYS + list(SHARED)}, "error": r.error,
                        "seed": r.seed} for r in records])
    meta = {}
    for k in SHARED:
        vals = sorted(set(df[k]))
        if len(vals) > 1:
            raise ValueError(f"records mix {k} values {vals}; aggregate one slice at a time")
        meta[k] = vals[0]
    g = df.groupby(KEYS, sort=False)["error"]
    # population std so a single seed reports 0
    cells = pd.DataFrame({"mean": g.mean(), "std": g.std(ddof=0), "count": g.count()}).reset_index()
    grid = expected or {k: sorted(set(df[k])) for k in KEYS}
    have = set(map(tuple, cells[KEYS].itertuples(index=False, name=None)))
    missing = [c for c in product(*(grid[k] for k in KEYS)) if c not in have]
    for c in missing:
        log.warning("no records for cell %s", dict(zip(KEYS, c)))
    cells = _sorted_cells(cells)
    return ResultTable(cells, DISPLAY_SCALE, missing, meta)


def _sorted_cells(cells):
    keys = {"model": MODEL_ORDER, "pde": PDE_ORDER, "strategy": STRATEGY_ORDER, "augmentation": AUGMENTATION_ORDER}
    idx = {k: cells[k].map(lambda v, p=p: (p.index(v) if v in p else len(p), v)) for k, p in keys.items()}
    order = sorted(range(len(cells)), key=lambda i: tuple(idx[k].iloc[i] for k in KEYS))
    return cells.iloc[order].reset_index(drop=True)


def improvement_percent(err_none: float, err_best: float) -> float:
    """Relative improvement over no pretraining; negative when worse."""
    if not err_none > 0:
        raise ValueError(f"baseline error must be positive, got {err_none}")
    return (err_none - err_best) / err_none * 100.0


def _tie_key(strategy, augmentation="none"):
    return (strategy != "none", strategy, augmentation != "none", augmentation)


@dataclass(frozen=True)
class SummaryRow:
    model: str
    pde: str
    strategy: str
    augmentation: str
    error: float
    none_error: float
    improvement: float


def best_strategy(table: ResultTable, model, pde, include_baseline=True, augmentation="none") -> SummaryRow:
    """Lowest-error strategy for one (model, pde); ties go to None, then by name."""
    sl = table.slice(model, pde, augmentation)
    if sl.empty:
        raise KeyError((model, pde))
    none_err = table.error(model, pde, "none", augmentation)
    cands = [(float(m), s) for s, m in zip(sl.strategy, sl["mean"]) if include_baseline or s != "none"]
    err, strat = min(cands, key=lambda c: (c[0],) + _tie_key(c[1]))
    return SummaryRow(model, pde, strat, augmentation, err, none_err, improvement_percent(none_err, err))


def best_augmentation(table: ResultTable, model, pde) -> SummaryRow:
    """Lowest-error (strategy, augmentation) pair, measured against unaugmented None."""
    sl = table.slice(model, pde)
    none_err = table.error(model, pde, "none", "none")
    err, strat, aug = min(((float(m), s, a) for s, a, m in zip(sl.strategy, sl.augmentation, sl["mean"])),
                          key=lambda c: (c[0],) + _tie_key(c[1], c[2]))
    return SummaryRow(model, pde, strat, aug, err, none_err, improvement_percent(none_err, err))


def summary_frame(table: ResultTable, chooser=best_strategy, **kw) -> pd.DataFrame:
    rows = [chooser(table, m, p, **kw) for m in table.models for p in table.pdes
            if not table.slice(m, p).empty]
    return pd.DataFrame([r.__dict__ for r in rows])


def mean_best_improvement(table: ResultTable, pdes=("heat", "advection", "burgers"), include_baseline=True):
    """Per model: best improvement averaged over ``pdes`` present in the table."""
    out = {}
    for m in table.models:
        vals = [best_strategy(table, m, p, include_baseline).improvement for p in pdes
                if not table.slice(m, p).empty]
        out[m] = float(np.mean(vals)) if vals else math.nan
    return out


# -- published numbers ----------------------------------------------------------------

def load_published_tables() -> dict:
    """Transcribed result tables; per-cell values keep their printed digits."""
    text = resources.files("pdepretrain.report").joinpath("data/published_tables.json").read_text()
    return json.loads(text)


def published_table(name: str, tables=None) -> ResultTable:
    tables = tables or load_published_tables()
    return ResultTable.from_values(tables[name], tables["scale"], meta={"source": name})
