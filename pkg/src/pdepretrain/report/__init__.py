"""Aggregation of metric records into tables, summaries and plots."""
from .render import (
    generalization_summary,
    percent_markdown,
    ranks,
    result_csv,
    result_markdown,
    scaling_curves,
    scaling_table,
    summary_markdown,
    write_report,
)
from .tables import (
    DISPLAY_SCALE,
    ResultTable,
    SummaryRow,
    aggregate,
    best_augmentation,
    best_strategy,
    improvement_percent,
    load_published_tables,
    mean_best_improvement,
    published_table,
    summary_frame,
)
