"""AUC computation, evaluation reports, and multi-classifier overlap.

AUC uses the Mann-Whitney formulation, average-rank statistics over the
score array, which equals (wins + 0.5*ties) / (positives * negatives) and
the trapezoidal ROC area. Overlap reports count, for every subset of
models, the test warnings correctly classified by exactly that subset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import LabelKind


class SingleClassError(Exception):
    """AUC undefined: the test set lacks positives or negatives."""


class EvaluationError(Exception):
    pass


class CoverageError(Exception):
    def __init__(self, message: str, missing: Mapping[str, tuple[str, ...]]):
        super().__init__(message)
        self.missing = dict(missing)


@dataclass(frozen=True)
class EvalReport:
    model: str
    dataset_id: str
    auc: float | None
    positives: int
    negatives: int
    missing: tuple[str, ...] = ()
    partial: bool = False
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class OverlapReport:
    model_names: tuple[str, ...]
    region_counts: dict[str, int]  # "+"-joined sorted model subset -> count
    union_correct: int
    total: int
    oracle_ensemble_accuracy: float


def auc(scored: Sequence[tuple[float, int]]) -> float:
    """Probability that a random positive outscores a random negative,
    ties half-weighted. Raises SingleClassError when undefined."""
    scores = np.asarray([s for s, _ in scored], dtype=float)
    labels = np.asarray([y for _, y in scored], dtype=int)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(
            f"AUC undefined: {n_pos} positive(s), {n_neg} negative(s)")
    # average ranks with ties: 1-based average rank per distinct score
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    avg_ranks = starts + (counts + 1) / 2.0
    ranks = avg_ranks[inverse]
    rank_sum_pos = float(ranks[labels == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(scores: Mapping[str, float], labels: Mapping[str, LabelKind | int],
             dataset_id: str, model: str = "") -> EvalReport:
    """Join scores with true labels by chain id and compute AUC.

    Chains without a score are listed and mark the report partial; zero
    overlap is an error. A single-class test set yields auc=None with a
    note rather than a failure.
    """

    def as_int(value) -> int:
        if isinstance(value, LabelKind):
            return 1 if value is LabelKind.ACTIONABLE else 0
        return int(value)

    covered = [cid for cid in labels if cid in scores]
    missing = tuple(sorted(cid for cid in labels if cid not in scores))
    if not covered:
        raise EvaluationError(f"{dataset_id}: no overlap between scores and labels")

    pairs = [(scores[cid], as_int(labels[cid])) for cid in covered]
    n_pos = sum(1 for _, y in pairs if y == 1)
    n_neg = len(pairs) - n_pos
    notes: list[str] = []
    try:
        value = auc(pairs)
    except SingleClassError as exc:
        value = None
        notes.append(str(exc))
    if missing:
        notes.append(f"{len(missing)} labeled chain(s) lack scores")
    return EvalReport(model=model, dataset_id=dataset_id, auc=value,
                      positives=n_pos, negatives=n_neg, missing=missing,
                      partial=bool(missing), notes=tuple(notes))


def overlap(predictions: Mapping[str, Mapping[str, int]],
            truth: Mapping[str, LabelKind | int]) -> OverlapReport:
    """Region counts over the power set of models by exact-correctness."""
    truth_ids = set(truth)
    missing: dict[str, tuple[str, ...]] = {}
    for model, preds in predictions.items():
        absent = truth_ids - set(preds)
        extra = set(preds) - truth_ids
        if absent or extra:
            missing[model] = tuple(sorted(absent | extra))
    if missing:
        raise CoverageError("models do not cover the same test set", missing)

    def as_int(value) -> int:
        if isinstance(value, LabelKind):
            return 1 if value is LabelKind.ACTIONABLE else 0
        return int(value)

    model_names = tuple(sorted(predictions))
    regions: dict[str, int] = {}
    union: set[str] = set()
    for cid, true_label in truth.items():
        correct = tuple(m for m in model_names
                        if predictions[m][cid] == as_int(true_label))
        key = "+".join(correct) if correct else "none"
        regions[key] = regions.get(key, 0) + 1
        if correct:
            union.add(cid)
    total = len(truth_ids)
    return OverlapReport(model_names=model_names, region_counts=regions,
                         union_correct=len(union), total=total,
                         oracle_ensemble_accuracy=len(union) / total if total else 0.0)


# ---------------------------------------------------------------------------
# Rendering


def report_to_dict(report: EvalReport) -> dict:
    return {
        "model": report.model,
        "dataset": report.dataset_id,
        "auc": None if report.auc is None else round(report.auc, 4),
        "auc_percent": None if report.auc is None else f"{report.auc * 100:.2f}%",
        "positives": report.positives,
        "negatives": report.negatives,
        "missing": list(report.missing),
        "partial": report.partial,
        "notes": list(report.notes),
    }


def _group_key(dataset_id: str) -> str:
    return dataset_id.split("/", 1)[0]


def render_report(reports: Sequence[EvalReport], out_dir: str | Path,
                  overlaps: Sequence[OverlapReport] = (),
                  provenance: Mapping[str, object] | None = None) -> list[Path]:
    """Write one machine-readable JSON document and one plain-text table,
    grouped by dataset family, in deterministic order."""
    if not reports:
        raise EvaluationError("nothing to render")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(reports, key=lambda r: (_group_key(r.dataset_id), r.dataset_id, r.model))

    doc = {
        "reports": [report_to_dict(r) for r in ordered],
        "overlaps": [
            {"models": list(o.model_names),
             "regions": dict(sorted(o.region_counts.items())),
             "union_correct": o.union_correct,
             "total": o.total,
             "oracle_ensemble_accuracy": round(o.oracle_ensemble_accuracy, 4)}
            for o in overlaps
        ],
        "provenance": dict(provenance or {}),
    }
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    lines: list[str] = []
    width = max(len(r.dataset_id) for r in ordered)
    model_width = max(max((len(r.model) for r in ordered), default=5), 5)
    current_group = None
    for r in ordered:
        group = _group_key(r.dataset_id)
        if group != current_group:
            if current_group is not None:
                lines.append("")
            lines.append(f"[{group}]")
            current_group = group
        auc_text = "   n/a" if r.auc is None else f"{r.auc:.4f} ({r.auc * 100:.2f}%)"
        flags = " partial" if r.partial else ""
        lines.append(f"  {r.dataset_id:<{width}}  {r.model:<{model_width}}  "
                     f"auc={auc_text}  pos={r.positives} neg={r.negatives}{flags}")
    for o in overlaps:
        lines.append("")
        lines.append(f"[overlap: {', '.join(o.model_names)}]")
        for key, count in sorted(o.region_counts.items()):
            lines.append(f"  {key}: {count}")
        lines.append(f"  union-correct: {o.union_correct}/{o.total} "
                     f"(oracle-ensemble accuracy {o.oracle_ensemble_accuracy:.4f})")
    text_path = out_dir / "report.txt"
    text_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [json_path, text_path]
