"""Report files: metrics CSV, ROC/embedding TSVs and the run manifest."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .evaluate import REPORT_METRICS

METRICS_FILE = "metrics.csv"
ROC_FILE = "roc.tsv"
EMBED_FILE = "embed.tsv"
MANIFEST_FILE = "manifest.txt"
ABLATION_FILE = "ablation.csv"
FAILED_FILE = "FAILED"

METRIC_COLUMNS = ("subject", "task", "window_s", "model", "variant") + REPORT_METRICS


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def _write_table(path, columns, rows, delimiter):
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return Path(path)


def metric_rows(reports):
    rows = []
    for rep in reports:
        rows.extend(r.row() for r in rep.subjects)
        rows.append(rep.aggregate_row())
        rows.append(rep.sd_row())
    return rows


def write_metrics(path, reports):
    """Per-subject rows of every report followed by its ``mean`` and ``sd`` rows."""
    return _write_table(path, METRIC_COLUMNS, metric_rows(reports), ",")


def write_roc(path, reports):
    rows = []
    for rep in reports:
        for r in rep.subjects:
            for f, t in zip(r.fpr, r.tpr):
                rows.append({"model": r.model, "variant": r.variant, "window_s": r.window_s,
                             "subject": r.subject, "fpr": f, "tpr": t})
    cols = ("model", "variant", "window_s", "subject", "fpr", "tpr")
    return _write_table(path, cols, rows, "\t")


def write_embedding(path, points, labels):
    rows = [{"x": p[0], "y": p[1], "label": int(lab)} for p, lab in zip(points, labels)]
    return _write_table(path, ("x", "y", "label"), rows, "\t")


def read_embedding(path):
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader)
        rows = [r for r in reader]
    return header, rows


def write_ablation(path, ablation):
    cols = ["task", "variant"]
    for k in ablation.TABLE_COLUMNS:
        cols += [k, f"{k}_sd"]
    rows = []
    for r in ablation.rows():
        flat = {"task": r["task"], "variant": r["variant"]}
        for k in ablation.TABLE_COLUMNS:
            flat[k], flat[f"{k}_sd"] = r[k]
        rows.append(flat)
    return _write_table(path, cols, rows, ",")


class RunManifest:
    """Sectioned key/value text written before a run starts and updated as it goes.

    No timestamps or host details are recorded, so identical runs produce
    identical manifests.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.sections = {}

    def set(self, section, key, value):
        self.sections.setdefault(section, {})[key] = value
        return self

    def update(self, section, mapping):
        for k, v in mapping.items():
            self.set(section, k, v)
        return self

    def append_log(self, lines):
        log = self.sections.setdefault("stage_log", {})
        for line in lines:
            log[f"{len(log):03d}"] = line
        return self

    def to_text(self):
        out = []
        for name, items in self.sections.items():
            out.append(f"[{name}]")
            out.extend(f"{k} = {_fmt(v)}" for k, v in items.items())
            out.append("")
        return "\n".join(out)

    def write(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(self.to_text(), encoding="utf-8")
        return self.path


def read_manifest_text(path):
    """Parse a run manifest back into ``{section: {key: value}}`` (values as strings)."""
    sections, current = {}, None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1], {})
        elif " = " in line and current is not None:
            k, v = line.split(" = ", 1)
            current[k] = v
    return sections
