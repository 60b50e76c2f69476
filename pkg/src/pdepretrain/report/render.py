"""Markdown/CSV tables, scaling plots and the ``bench report`` writer.

Every output is a pure function of the record log: values are formatted with
fixed precision and SVGs are written without timestamps or random ids.
"""
from __future__ import annotations

import io
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .tables import (
    DISPLAY_SCALE,
    MODEL_ORDER,
    PDE_ORDER,
    ResultTable,
    _order,
    aggregate,
    best_augmentation,
    best_strategy,
    improvement_percent,
    summary_frame,
)

log = logging.getLogger(__name__)
PDE_LABEL = {"heat": "Heat", "advection": "Adv", "burgers": "Burgers", "ns": "NS"}
MODEL_LABEL = {"fno": "FNO", "deeponet": "DeepONet", "oformer": "OFormer", "unet": "Unet"}


def _cell(v, digits=3):
    return "--" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.{digits}f}"


def ranks(values):
    """1 for the lowest value, 2 for the second lowest, 0 otherwise (ties share)."""
    finite = sorted(set(v for v in values if np.isfinite(v)))
    top = finite[:2]
    return [top.index(v) + 1 if v in top else 0 for v in values]


def wide_frame(table: ResultTable) -> pd.DataFrame:
    """PDE x model rows, one column per strategy (or strategy/augmentation) pair."""
    d = table.display()
    aug = set(d.augmentation) != {"none"}
    d["column"] = [f"{s}/{a}" if aug else s for s, a in zip(d.strategy, d.augmentation)]
    cols = list(dict.fromkeys(d["column"]))
    wide = d.pivot_table(index=["pde", "model"], columns="column", values="value", sort=False)
    wide = wide.reindex(columns=cols)
    order = [(p, m) for p in _order(d.pde, PDE_ORDER) for m in _order(d.model, MODEL_ORDER)
             if (p, m) in wide.index]
    return wide.reindex(order)


def result_markdown(table: ResultTable, title="") -> str:
    """Published layout: lowest error in bold, second lowest in italics."""
    wide = wide_frame(table)
    head = ["PDE", "Model"] + list(wide.columns)
    lines = []
    if title:
        lines += [f"### {title}", ""]
    lines.append(f"Relative L2 error (x{table.scale:g}); **lowest**, _second lowest_.")
    lines.append("")
    lines.append("| " + " | ".join(head) + " |")
    lines.append("|" + "---|" * len(head))
    for (pde, model), row in wide.iterrows():
        vals = [float(v) for v in row.values]
        out = []
        for v, r in zip(vals, ranks(vals)):
            s = _cell(v)
            out.append(f"**{s}**" if r == 1 else (f"_{s}_" if r == 2 else s))
        lines.append("| " + " | ".join([PDE_LABEL.get(pde, pde), MODEL_LABEL.get(model, model)] + out) + " |")
    if table.missing:
        lines += ["", f"Missing cells: {len(table.missing)}"]
    return "\n".join(lines) + "\n"


def result_csv(table: ResultTable) -> str:
    d = table.display()
    d["rank"] = 0
    for _, idx in d.groupby(["model", "pde"], sort=False).groups.items():
        d.loc[idx, "rank"] = ranks([float(v) for v in d.loc[idx, "value"]])
    cols = ["pde", "model", "strategy", "augmentation", "value", "spread", "count", "rank"]
    return d[cols].to_csv(index=False, float_format="%.6g", lineterminator="\n")


def summary_markdown(summary: pd.DataFrame, title="", with_augmentation=False) -> str:
    models = _order(summary.model, MODEL_ORDER)
    pdes = _order(summary.pde, PDE_ORDER)
    idx = {(r.model, r.pde): r for r in summary.itertuples()}
    head = "| Model | " + " | ".join(PDE_LABEL.get(p, p) for p in pdes) + " |"
    sep = "|" + "---|" * (len(pdes) + 1)
    best, imp = [head, sep], [head, sep]
    for m in models:
        names, pcts = [], []
        for p in pdes:
            r = idx.get((m, p))
            if r is None:
                names.append("--")
                pcts.append("--")
                continue
            name = r.strategy if not with_augmentation else f"{r.augmentation} ({r.strategy})"
            names.append(name)
            pcts.append(f"{r.improvement:.3f}%")
        best.append(f"| {MODEL_LABEL.get(m, m)} | " + " | ".join(names) + " |")
        imp.append(f"| {MODEL_LABEL.get(m, m)} | " + " | ".join(pcts) + " |")
    label = "Best augmentation" if with_augmentation else "Best pretraining method"
    parts = [f"### {title}", ""] if title else []
    parts += [f"{label}:", ""] + best + ["", "Improvement over no pretraining:", ""] + imp
    return "\n".join(parts) + "\n"


# -- scaling and generalization ------------------------------------------------------

def scaling_table(records, sizes=(100, 250, 500, 1000), pdes=("heat", "advection", "burgers"),
                  include_baseline=False):
    """Per n: best improvement per (model, pde) and its PDE average per model.

    Returns ``(per_pde, averaged, missing_sizes)``.
    """
    records = list(records)
    present = sorted(set(r.n_samples for r in records))
    missing = [n for n in sizes if n not in present]
    for n in missing:
        log.warning("no records for n_samples=%d", n)
    per_pde = []
    for n in present:
        t = aggregate([r for r in records if r.n_samples == n])
        for m in t.models:
            for p in t.pdes:
                if p in pdes and not t.slice(m, p).empty:
                    row = best_strategy(t, m, p, include_baseline)
                    per_pde.append({"n_samples": n, **row.__dict__})
    per_pde = pd.DataFrame(per_pde)
    if per_pde.empty:
        return per_pde, per_pde, missing
    averaged = (per_pde.groupby(["n_samples", "model"], sort=False)["improvement"].mean()
                .unstack("model"))
    averaged = averaged.reindex(columns=_order(averaged.columns, MODEL_ORDER)).sort_index()
    return per_pde, averaged, missing


def curve_frame(records) -> pd.DataFrame:
    """Error mean and 1-sigma per (model, pde, strategy, n_samples)."""
    df = pd.DataFrame([{"model": r.model, "pde": r.pde, "strategy": r.strategy, "n_samples": r.n_samples,
                        "error": r.error} for r in records if r.augmentation == "none"])
    g = df.groupby(["model", "pde", "strategy", "n_samples"])["error"]
    return pd.DataFrame({"mean": g.mean(), "std": g.std(ddof=0)}).reset_index()


def _svg_bytes(fig) -> bytes:
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "pdepretrain"
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    return buf.getvalue()


def scaling_curves(records, out_dir, sizes=(100, 250, 500, 1000)):
    """One SVG (plus CSV twin) per (model, pde): error vs n for each strategy
    with 1-std-dev bars. Returns the PDE-averaged improvement table."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = list(records)
    curves = curve_frame(records)
    written = []
    for (model, pde), grp in curves.groupby(["model", "pde"], sort=True):
        stem = f"scaling_{model}_{pde}"
        _write(out_dir / f"{stem}.csv", grp.to_csv(index=False, float_format="%.6g", lineterminator="\n"))
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for strat, s in grp.groupby("strategy", sort=True):
            s = s.sort_values("n_samples")
            ax.errorbar(s.n_samples, s["mean"], yerr=s["std"], label=strat, capsize=2, marker="o", ms=3)
        ax.set_xscale("log")
        ax.set_xlabel("fine-tuning samples")
        ax.set_ylabel("relative L2 error")
        ax.set_title(f"{MODEL_LABEL.get(model, model)} / {PDE_LABEL.get(pde, pde)}")
        ax.legend(fontsize=6)
        fig.tight_layout()
        _write(out_dir / f"{stem}.svg", _svg_bytes(fig))
        plt.close(fig)
        written.append(stem)
    _, averaged, missing = scaling_table(records, sizes)
    return averaged, missing, written


def generalization_summary(tables: dict, pdes=("heat", "advection", "burgers"), include_baseline=False):
    """Per model: best improvement for each downstream distribution.

    ``tables`` maps ``in``/``out``/``ns`` to a ResultTable at a fixed n. The in
    and out columns average over ``pdes``; ns uses the NS PDE alone.
    """
    out = {}
    for dist, table in tables.items():
        use = ("ns",) if dist == "ns" else pdes
        col = {}
        for m in table.models:
            vals = [best_strategy(table, m, p, include_baseline).improvement for p in use
                    if not table.slice(m, p).empty]
            col[m] = float(np.mean(vals)) if vals else np.nan
        out[dist] = col
    frame = pd.DataFrame(out).T
    return frame.reindex(columns=_order(frame.columns, MODEL_ORDER))


def percent_markdown(frame: pd.DataFrame, index_label: str) -> str:
    head = f"| {index_label} | " + " | ".join(MODEL_LABEL.get(c, c) for c in frame.columns) + " |"
    lines = [head, "|" + "---|" * (len(frame.columns) + 1)]
    for idx, row in frame.iterrows():
        lines.append(f"| {idx} | " + " | ".join(_cell(float(v)) + "%" for v in row.values) + " |")
    return "\n".join(lines) + "\n"


# -- writer ----------------------------------------------------------------------------

def _write(path: Path, data):
    """Write only when the content changed, so reruns leave files untouched."""
    data = data.encode() if isinstance(data, str) else data
    if path.exists() and path.read_bytes() == data:
        return False
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return True


def write_report(records, out_dir, task="autoregressive", n_samples=500):
    """All tables for one task; returns the list of files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = [r for r in records if r.task == task]
    files = []
    if not records:
        log.warning("no %s records to report", task)
        return files
    by_dist = {}
    for dist in sorted(set(r.distribution for r in records)):
        sel = [r for r in records if r.distribution == dist and r.n_samples == n_samples]
        if not sel:
            continue
        plain = [r for r in sel if r.augmentation == "none"]
        if plain:
            table = aggregate(plain)
            by_dist[dist] = table
            stem = f"{task}_{dist}_pretraining"
            files += _emit(out_dir, stem, result_markdown(table, f"{task} / {dist} pretraining"), result_csv(table))
            s = summary_frame(table)
            files += _emit(out_dir, f"{stem}_summary", summary_markdown(s, f"{task} / {dist}"),
                           s.to_csv(index=False, float_format="%.6g", lineterminator="\n"))
        table = aggregate(sel)
        if set(table.cells.augmentation) != {"none"}:
            stem = f"{task}_{dist}_augmentation"
            files += _emit(out_dir, stem, result_markdown(table, f"{task} / {dist} augmentation"),
                           result_csv(table))
            s = summary_frame(table, chooser=best_augmentation)
            files += _emit(out_dir, f"{stem}_summary",
                           summary_markdown(s, f"{task} / {dist} augmentation", with_augmentation=True),
                           s.to_csv(index=False, float_format="%.6g", lineterminator="\n"))
    if len(by_dist) > 1:
        g = generalization_summary(by_dist)
        files += _emit(out_dir, f"{task}_generalization", percent_markdown(g, "Distribution"),
                       g.to_csv(float_format="%.6g", lineterminator="\n"))
    in_records = [r for r in records if r.distribution == "in" and r.augmentation == "none"]
    if len(set(r.n_samples for r in in_records)) > 1:
        averaged, missing, stems = scaling_curves(in_records, out_dir / "scaling")
        files += [f"scaling/{s}.svg" for s in stems]
        md = percent_markdown(averaged, "# Samples")
        if missing:
            md += f"\nMissing sample sizes: {', '.join(map(str, missing))}\n"
        files += _emit(out_dir, f"{task}_scaling", md, averaged.to_csv(float_format="%.6g", lineterminator="\n"))
    return files


def _emit(out_dir, stem, markdown, csv):
    _write(out_dir / f"{stem}.md", markdown)
    _write(out_dir / f"{stem}.csv", csv)
    return [f"{stem}.md", f"{stem}.csv"]


__all__ = [
    "DISPLAY_SCALE",
    "curve_frame",
    "generalization_summary",
    "improvement_percent",
    "percent_markdown",
    "ranks",
    "result_csv",
    "result_markdown",
    "scaling_curves",
    "scaling_table",
    "summary_markdown",
    "write_report",
]
