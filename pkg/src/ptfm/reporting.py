"""Write an :class:`~ptfm.ensemble.EvaluationReport` to disk."""

from __future__ import annotations

import json
import os

from .ensemble import EvaluationReport, SLOT_BY_NAME
from .metrics import write_roc_csv

TITLES = {
    "tactical_nd": "Turnaround, non-disrupted",
    "tactical_d": "Turnaround, disrupted",
    "strategic_nd": "Block time, non-disrupted",
    "strategic_d": "Block time, disrupted",
    "op_a0": "A0 classifier",
    "op_a14": "A14 classifier",
}


def write_report(report: EvaluationReport, out_dir, formats=("json", "text"), plots=True) -> list[str]:
    """Emit report.json / report.txt, ROC CSVs and (optionally) PNG figures.

    Returns the written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "json" in formats:
        p = os.path.join(out_dir, "report.json")
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=1)
            fh.write("\n")
        written.append(p)
    if "text" in formats:
        p = os.path.join(out_dir, "report.txt")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(report.to_text())
        written.append(p)
    for name in ("op_a0", "op_a14"):
        ev = report.models[name]
        if ev.roc is not None:
            p = os.path.join(out_dir, f"roc_{name[3:]}.csv")
            write_roc_csv(ev.roc, p)
            written.append(p)
    if plots:
        written.extend(_figures(report, out_dir))
    return written


def _figures(report, out_dir):
    from . import plotting

    paths = []
    for name, ev in report.models.items():
        title = f"{report.role.display_name}: {TITLES[name]}"
        if SLOT_BY_NAME[name].is_classifier:
            if ev.roc is None:
                continue
            paths.append(plotting.roc_figure(ev.roc, ev.auc, title, os.path.join(out_dir, f"roc_{name[3:]}.png")))
        else:
            paths.append(
                plotting.parity_figure(
                    ev.predicted, ev.actual, title, os.path.join(out_dir, f"parity_{name}.png"), ev.rmse
                )
            )
    return paths
