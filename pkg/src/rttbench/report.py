"""Evaluation run serialization and rendering.

Three output families: a versioned JSON document that round-trips the full
EvaluationRun, accuracy tables shaped like the trained/untrained result
tables (rows = stressor, columns = model x RTT level), and per-category /
per-untrained-kind F1 tables with matching bar-chart figures rendered to
PNG next to the delimited output.
"""

from __future__ import annotations

import csv
import io
import json
import os

from .errors import FormatError, ProtocolError
from .evaluation import (ConfusionMatrix, EvaluationRun, MetricsReport,
                         ScenarioResult)
from .stressors import ScenarioId, TRAINED_KINDS, UNTRAINED_KINDS
from .util import atomic_write_bytes, atomic_write_text

REPORT_VERSION = "report-v1"

# presentation order for table columns
TABLE_MODEL_ORDER = ("gnb", "nu_svr", "oc_svm", "svc", "knn", "dt", "rf")
MODEL_LABELS = {"gnb": "GNB", "nu_svr": "nu-SVR", "oc_svm": "OC-SVM",
                "svc": "SVC", "knn": "kNN", "dt": "DT", "rf": "RF"}


def _metrics_dict(m: MetricsReport) -> dict:
    return {"accuracy": m.accuracy, "precision": m.precision,
            "recall": m.recall, "f1": m.f1, "row_count": m.row_count}


def _metrics_from(doc: dict, scenario=None, model=None) -> MetricsReport:
    return MetricsReport(accuracy=doc["accuracy"], precision=doc["precision"],
                         recall=doc["recall"], f1=doc["f1"],
                         row_count=doc["row_count"], scenario=scenario,
                         model=model)


def run_to_dict(run: EvaluationRun) -> dict:
    return {
        "version": REPORT_VERSION,
        "seed": run.seed,
        "train_fraction": run.train_fraction,
        "train_rows": run.train_rows,
        "train_anomalous": run.train_anomalous,
        "model_meta": run.model_meta,
        "scenarios": [
            {"kind": r.scenario.kind, "level": r.scenario.level,
             "model": r.model, "split": r.split, "polarity": r.cm.polarity,
             "tp": r.cm.tp, "fp": r.cm.fp, "fn": r.cm.fn, "tn": r.cm.tn,
             **_metrics_dict(r.report)}
            for r in run.scenario_results],
        "categories": {m: {cat: _metrics_dict(rep) for cat, rep in cats.items()}
                       for m, cats in run.category_results.items()},
        "untrained_kinds": {m: {k: _metrics_dict(rep) for k, rep in kinds.items()}
                            for m, kinds in run.untrained_kind_results.items()},
    }


def run_from_dict(doc: dict) -> EvaluationRun:
    if doc.get("version") != REPORT_VERSION:
        raise FormatError(f"report version {doc.get('version')!r}, "
                          f"expected {REPORT_VERSION!r}")
    results = []
    for row in doc["scenarios"]:
        scenario = ScenarioId(row["kind"], row["level"])
        cm = ConfusionMatrix(tp=row["tp"], fp=row["fp"], fn=row["fn"],
                             tn=row["tn"], polarity=row["polarity"])
        results.append(ScenarioResult(
            scenario=scenario, model=row["model"], split=row["split"], cm=cm,
            report=_metrics_from(row, scenario=scenario, model=row["model"])))
    return EvaluationRun(
        seed=doc["seed"], train_fraction=doc["train_fraction"],
        train_rows=doc["train_rows"], train_anomalous=doc["train_anomalous"],
        scenario_results=results,
        category_results={m: {cat: _metrics_from(rep, model=m)
                              for cat, rep in cats.items()}
                          for m, cats in doc["categories"].items()},
        untrained_kind_results={m: {k: _metrics_from(rep, model=m)
                                    for k, rep in kinds.items()}
                                for m, kinds in doc["untrained_kinds"].items()},
        model_meta=doc["model_meta"])


def write_report_json(run: EvaluationRun, path) -> None:
    atomic_write_text(path, json.dumps(run_to_dict(run), indent=2) + "\n")


def read_report_json(path) -> EvaluationRun:
    with open(path) as fh:
        return run_from_dict(json.load(fh))


# --- delimited tables -----------------------------------------------------

def _accuracy_cell(run, model, kind, level):
    return f"{run.result_for(model, kind, level).report.accuracy * 100:.2f}"


def _table_header():
    out = ["test"]
    for m in TABLE_MODEL_ORDER:
        out += [f"{m}_high", f"{m}_low"]
    return out


def trained_accuracy_table(run: EvaluationRun) -> list[list[str]]:
    """Rows = trained stressors plus overall/unstressed; accuracy percent.

    The overall and unstressed rows have one value per model; it is
    repeated in both level columns to keep the grid rectangular.
    """
    models = [m for m in TABLE_MODEL_ORDER if m in run.category_results]
    rows = [_table_header()]
    for special in ("overall", "unstressed"):
        row = [special]
        for m in TABLE_MODEL_ORDER:
            if m in models:
                acc = f"{run.category_results[m][special].accuracy * 100:.2f}"
                row += [acc, acc]
            else:
                row += ["", ""]
        rows.append(row)
    for kind in sorted(TRAINED_KINDS):
        row = [kind]
        for m in TABLE_MODEL_ORDER:
            if m in models:
                row += [_accuracy_cell(run, m, kind, "high"),
                        _accuracy_cell(run, m, kind, "low")]
            else:
                row += ["", ""]
        rows.append(row)
    return rows


def untrained_accuracy_table(run: EvaluationRun) -> list[list[str]]:
    models = [m for m in TABLE_MODEL_ORDER if m in run.category_results]
    rows = [_table_header()]
    for kind in sorted(UNTRAINED_KINDS):
        row = [kind]
        for m in TABLE_MODEL_ORDER:
            if m in models:
                row += [_accuracy_cell(run, m, kind, "high"),
                        _accuracy_cell(run, m, kind, "low")]
            else:
                row += ["", ""]
        rows.append(row)
    return rows


def f1_category_table(run: EvaluationRun) -> list[list[str]]:
    models = [m for m in TABLE_MODEL_ORDER if m in run.category_results]
    rows = [["category"] + list(models)]
    for cat in ("unstressed", "anomalous", "non-anomalous", "overall"):
        row = [cat]
        for m in models:
            f1 = run.category_results[m][cat].f1
            row.append("" if f1 is None else f"{f1:.5f}")
        rows.append(row)
    return rows


def f1_untrained_table(run: EvaluationRun) -> list[list[str]]:
    models = [m for m in TABLE_MODEL_ORDER if m in run.untrained_kind_results]
    rows = [["scenario"] + list(models)]
    for kind in sorted(UNTRAINED_KINDS):
        row = [kind]
        for m in models:
            f1 = run.untrained_kind_results[m][kind].f1
            row.append("" if f1 is None else f"{f1:.5f}")
        rows.append(row)
    return rows


def _write_csv(path, rows) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


# --- figures ---------------------------------------------------------------

def _grouped_bars(path, title, group_names, series, ylabel):
    import io as _io

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(9, 4.2))
    n_series = len(series)
    width = 0.8 / max(n_series, 1)
    for si, (label, values) in enumerate(series):
        xs = [g + si * width for g in range(len(group_names))]
        vals = [v if v is not None else 0.0 for v in values]
        ax.bar(xs, vals, width=width, label=label)
    ax.set_xticks([g + 0.4 - width / 2 for g in range(len(group_names))])
    ax.set_xticklabels(group_names)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(ncol=4, fontsize=8, loc="lower right")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    buf = _io.BytesIO()
    fig.savefig(buf, format="png", dpi=130)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def render_figures(run: EvaluationRun, out_dir) -> list[str]:
    models = [m for m in TABLE_MODEL_ORDER if m in run.category_results]
    paths = []

    cats = ("unstressed", "anomalous", "non-anomalous", "overall")
    series = [(MODEL_LABELS[m],
               [run.category_results[m][c].f1 for c in cats]) for m in models]
    p = os.path.join(out_dir, "f1_categories.png")
    _grouped_bars(p, "F1 score by test category", cats, series, "F1 score")
    paths.append(p)

    um = [m for m in TABLE_MODEL_ORDER if m in run.untrained_kind_results]
    kinds = sorted(UNTRAINED_KINDS)
    series = [(MODEL_LABELS[m],
               [run.untrained_kind_results[m][k].f1 for k in kinds]) for m in um]
    p = os.path.join(out_dir, "f1_untrained.png")
    _grouped_bars(p, "F1 score on untrained scenarios", kinds, series, "F1 score")
    paths.append(p)
    return paths


def emit_report(run: EvaluationRun, out_dir, formats=("json", "csv"),
                figures: bool = True) -> list[str]:
    """Write the run's artifacts; returns the list of paths written."""
    if not run.category_results:
        raise ProtocolError("evaluation run holds no model results")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "json" in formats:
        p = os.path.join(out_dir, "report.json")
        write_report_json(run, p)
        written.append(p)
    if "csv" in formats:
        for name, rows in [
                ("trained_accuracy.csv", trained_accuracy_table(run)),
                ("untrained_accuracy.csv", untrained_accuracy_table(run)),
                ("f1_categories.csv", f1_category_table(run)),
                ("f1_untrained.csv", f1_untrained_table(run))]:
            p = os.path.join(out_dir, name)
            _write_csv(p, rows)
            written.append(p)
    if figures:
        written.extend(render_figures(run, out_dir))
    return written
