"""Command-line pipeline: ingest -> track -> label -> context -> split ->
scenarios -> train -> import-scores -> eval -> report, plus an all-in-one
``run``.

Every stage reads its inputs from the output directory written by earlier
stages, so deleting downstream artifacts and rerunning only downstream
stages reproduces them exactly. A run manifest records the config digest
and tool version; no artifact embeds wall-clock state, so identical configs
produce byte-identical outputs.

Exit codes: 0 success, 1 usage error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field, fields
from datetime import datetime
from pathlib import Path

from . import __version__
from .classifier import (ClassifierConfig, DegenerateCorpusError, build_vocabulary,
                         export_scores, import_scores, init_model, predict, train)
from .context import (abstract_context, context_record, dump_contexts, extract_context,
                      load_contexts, tokenize)
from .core import CommitRef, CommitSeries, LabelKind, WarningSnapshot
from .datasets import (ContextVariant, ScenarioVariant, assemble_examples, build_scenarios,
                       export_corpus, finetune_ladder, import_corpus, stratified_split)
from .evaluation import EvalReport, OverlapReport, evaluate, overlap, render_report
from .ingest import load_manifest, load_series, parse_normalized_report, warning_to_record
from .labeling import dump_labels, finalize_labels, load_labels, load_reviews
from .snapshots import DirSnapshotStore
from .tracking import dump_chains, initial_label, load_chains, track_series

STAGES = ("ingest", "track", "label", "context", "split", "scenarios",
          "train", "eval", "report")


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    manifest: Path
    out: Path
    reviews: Path | None = None
    context: str = "method"  # method | line
    abstract: bool = False
    window: int = 0
    token_cap: int = 256
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    fractions: tuple[float, ...] = ()
    scenario: str | None = None  # within1|within2|cross1|cross2|all
    scenario_corpora: tuple[Path, ...] = ()
    seed: int = 0
    jobs: int = 1
    line_tolerance: int = 3
    epochs: int = 30
    batch_size: int = 4
    learning_rate: float = 5e-5
    embedding_width: int = 32

    def validate(self) -> list[str]:
        problems = []
        if abs(sum(self.ratios) - 1.0) > 1e-9 or any(r < 0 for r in self.ratios):
            problems.append(f"ratios must be non-negative and sum to 1, got {self.ratios}")
        if list(self.fractions) != sorted(self.fractions):
            problems.append("fractions must be sorted ascending")
        if any(f < 0 or f > 1 for f in self.fractions):
            problems.append("fractions must lie in [0, 1]")
        if self.context not in ("method", "line"):
            problems.append(f"context must be 'method' or 'line', got {self.context!r}")
        if self.scenario not in (None, "all", *(v.value for v in ScenarioVariant)):
            problems.append(f"unknown scenario {self.scenario!r}")
        if self.out.resolve() == self.manifest.parent.resolve():
            problems.append("output directory must be distinct from the manifest directory")
        return problems

    @property
    def variant(self) -> ContextVariant:
        if self.abstract:
            return ContextVariant.ABSTRACTED
        if self.context == "line":
            return ContextVariant.LINE_ONLY
        return ContextVariant.RAW_METHOD

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(sequence_cap=self.token_cap,
                                embedding_width=self.embedding_width,
                                epochs=self.epochs, batch_size=self.batch_size,
                                learning_rate=self.learning_rate, seed=self.seed)

    def to_dict(self) -> dict:
        doc = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = [str(v) if isinstance(v, Path) else v for v in value]
            doc[f.name] = value
        return doc

    def digest(self) -> str:
        # identifies the computation: everything but where the output lands
        doc = {k: v for k, v in self.to_dict().items() if k != "out"}
        payload = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Artifact helpers


def _read_series(cfg: PipelineConfig) -> tuple[CommitSeries, bool]:
    doc = json.loads((cfg.out / "series.json").read_text(encoding="utf-8"))
    commits = tuple(CommitRef(id=c["id"],
                              timestamp=datetime.fromisoformat(c["timestamp"]),
                              ordinal=c["ordinal"], compilable=c["compilable"])
                    for c in doc["commits"])
    return CommitSeries(project=doc["project"], commits=commits), doc["synthesized_timestamps"]


def _read_snapshots(cfg: PipelineConfig, series: CommitSeries) -> list[WarningSnapshot]:
    commits = {c.id: c for c in series.commits}
    per_commit: dict[str, list[str]] = {}
    for raw in (cfg.out / "warnings.jsonl").read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        record = json.loads(raw)
        per_commit.setdefault(record.pop("commit"), []).append(json.dumps(record))
    snapshots = []
    for commit in series.compilable_commits:
        lines = per_commit.get(commit.id, [])
        warnings, errors = parse_normalized_report("\n".join(lines).encode("utf-8"), commit)
        if errors:
            raise ValueError(f"warnings.jsonl: bad record for {commit.id}: {errors[0].reason}")
        snapshots.append(WarningSnapshot.build(commit, warnings))
    return snapshots


def _store(cfg: PipelineConfig) -> DirSnapshotStore:
    manifest = load_manifest(cfg.manifest)
    return DirSnapshotStore({e.commit_id: e.source_path for e in manifest.entries
                             if e.source_path is not None})


def _corpus_dir(cfg: PipelineConfig) -> Path:
    return cfg.out / "corpus"


def _truth_from_corpus(path: Path) -> dict[str, int]:
    return {e.chain_id: (1 if e.label is LabelKind.ACTIONABLE else 0)
            for e in import_corpus(path)}


# ---------------------------------------------------------------------------
# Stages


def stage_ingest(cfg: PipelineConfig) -> None:
    manifest = load_manifest(cfg.manifest)
    result = load_series(manifest, jobs=cfg.jobs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    doc = {
        "project": result.series.project,
        "synthesized_timestamps": result.synthesized_timestamps,
        "flags": result.flags,
        "entry_errors": result.entry_errors,
        "commits": [{"id": c.id, "timestamp": c.timestamp.isoformat(),
                     "ordinal": c.ordinal, "compilable": c.compilable}
                    for c in result.series.commits],
    }
    (cfg.out / "series.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    with (cfg.out / "warnings.jsonl").open("w", encoding="utf-8") as fh:
        for snapshot in result.snapshots:
            for w in snapshot.warnings:
                record = dict(warning_to_record(w), commit=w.commit.id)
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def stage_track(cfg: PipelineConfig) -> None:
    series, _ = _read_series(cfg)
    snapshots = _read_snapshots(cfg, series)
    chains = track_series(series, snapshots, _store(cfg), cfg.line_tolerance)
    dump_chains(chains, series, cfg.out / "chains.jsonl")


def stage_label(cfg: PipelineConfig) -> None:
    series, synthesized = _read_series(cfg)
    chains = load_chains(cfg.out / "chains.jsonl", series)
    initial = [initial_label(c) for c in chains]
    reviews = load_reviews(cfg.reviews) if cfg.reviews else []
    labels = finalize_labels(initial, reviews, series, synthesized)
    dump_labels(labels, cfg.out / "labels.jsonl")


def stage_context(cfg: PipelineConfig) -> None:
    series, _ = _read_series(cfg)
    chains = load_chains(cfg.out / "chains.jsonl", series)
    store = _store(cfg)
    records = []
    for chain in chains:
        last = chain.warnings[-1]
        raw = extract_context(last, store, cfg.window, cfg.context)
        tokens = abstracted = None
        if raw.scope.value != "unavailable":
            tokens = tokenize(raw.source_text, cfg.token_cap)
            if cfg.abstract:
                abstracted = abstract_context(raw, cfg.token_cap)
        records.append(context_record(chain.chain_id, raw, abstracted, tokens,
                                      warning_type=chain.warning_type,
                                      warning_category=last.category))
    dump_contexts(records, cfg.out / "contexts.jsonl")


def _assembled_examples(cfg: PipelineConfig):
    series, _ = _read_series(cfg)
    labels = load_labels(cfg.out / "labels.jsonl")
    contexts = load_contexts(cfg.out / "contexts.jsonl")
    return assemble_examples(labels, contexts, cfg.variant, series.project)


def stage_split(cfg: PipelineConfig) -> None:
    examples = _assembled_examples(cfg)
    split = stratified_split(examples, cfg.ratios, cfg.seed)
    corpus_dir = _corpus_dir(cfg)
    counts = {
        "train": export_corpus(split.train, corpus_dir / "train.jsonl"),
        "validation": export_corpus(split.validation, corpus_dir / "validation.jsonl"),
        "test": export_corpus(split.test, corpus_dir / "test.jsonl"),
    }
    ladder_files = {}
    if cfg.fractions:
        for rung in finetune_ladder(split.train, cfg.fractions, cfg.seed):
            name = f"ladder_{round(rung.fraction * 100):03d}.jsonl"
            export_corpus(rung.examples, corpus_dir / name)
            ladder_files[f"{rung.fraction}"] = name
    manifest = {"seed": cfg.seed, "ratios": list(cfg.ratios), "counts": counts,
                "variant": cfg.variant.value, "ladder": ladder_files}
    (corpus_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def stage_scenarios(cfg: PipelineConfig) -> None:
    if cfg.scenario is None:
        return
    examples = _assembled_examples(cfg)
    for extra in cfg.scenario_corpora:
        examples.extend(import_corpus(extra))
    scenarios = build_scenarios(examples, cfg.seed)
    if cfg.scenario != "all":
        scenarios = [s for s in scenarios if s.variant.value == cfg.scenario]
    scen_dir = cfg.out / "scenarios"
    scen_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for spec in scenarios:
        stem = f"{spec.variant.value}_{spec.held_out_project}"
        export_corpus(spec.train, scen_dir / f"{stem}_train.jsonl")
        export_corpus(spec.test, scen_dir / f"{stem}_test.jsonl")
        entries.append({"variant": spec.variant.value, "project": spec.held_out_project,
                        "seed": spec.seed, "train": f"{stem}_train.jsonl",
                        "test": f"{stem}_test.jsonl"})
    (scen_dir / "manifest.json").write_text(
        json.dumps({"scenarios": entries}, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _train_and_score(cfg: PipelineConfig, train_path: Path, test_path: Path,
                     score_path: Path, model_name: str) -> str | None:
    """Train on one corpus and score another; degenerate corpora fall back
    to the seeded untrained model so sweeps still produce score files."""
    corpus = import_corpus(train_path) if train_path.exists() else []
    test = import_corpus(test_path)
    note = None
    try:
        model = train(cfg.classifier_config(), corpus)
    except DegenerateCorpusError as exc:
        model = init_model(cfg.classifier_config(), build_vocabulary(corpus))
        note = f"untrained fallback: {exc}"
    export_scores(predict(model, test), score_path, model_name)
    return note


def stage_train(cfg: PipelineConfig) -> None:
    corpus_dir = _corpus_dir(cfg)
    scores_dir = cfg.out / "scores"
    scores_dir.mkdir(parents=True, exist_ok=True)
    notes = {}
    note = _train_and_score(cfg, corpus_dir / "train.jsonl", corpus_dir / "test.jsonl",
                            scores_dir / "native_baseline.jsonl", "native_baseline")
    if note:
        notes["native_baseline"] = note
    for ladder_file in sorted(corpus_dir.glob("ladder_*.jsonl")):
        stem = ladder_file.stem
        note = _train_and_score(cfg, ladder_file, corpus_dir / "test.jsonl",
                                scores_dir / f"{stem}.jsonl", "native_baseline")
        if note:
            notes[stem] = note
    scen_manifest = cfg.out / "scenarios" / "manifest.json"
    if scen_manifest.exists():
        for entry in json.loads(scen_manifest.read_text(encoding="utf-8"))["scenarios"]:
            stem = f"{entry['variant']}_{entry['project']}"
            note = _train_and_score(cfg, cfg.out / "scenarios" / entry["train"],
                                    cfg.out / "scenarios" / entry["test"],
                                    scores_dir / f"scenario_{stem}.jsonl", "native_baseline")
            if note:
                notes[f"scenario_{stem}"] = note
    (scores_dir / "training_notes.json").write_text(
        json.dumps(notes, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def stage_import_scores(cfg: PipelineConfig, score_file: Path, model_name: str) -> int:
    known = set(_truth_from_corpus(_corpus_dir(cfg) / "test.jsonl"))
    result = import_scores(score_file, known_chain_ids=known)
    for problem in result.errors:
        print(f"import-scores: {score_file}: {problem}", file=sys.stderr)
    if result.duplicates:
        print(f"import-scores: {result.duplicates} duplicate chain id(s), last wins",
              file=sys.stderr)
    if not result.scores:
        raise ValueError(f"no valid records in {score_file}")
    scores_dir = cfg.out / "scores"
    scores_dir.mkdir(parents=True, exist_ok=True)
    export_scores(sorted(result.scores, key=lambda s: s.chain_id),
                  scores_dir / f"{model_name}.jsonl", model_name)
    return len(result.errors)


def stage_eval(cfg: PipelineConfig) -> None:
    corpus_dir = _corpus_dir(cfg)
    scores_dir = cfg.out / "scores"
    main_truth = _truth_from_corpus(corpus_dir / "test.jsonl")
    reports: list[EvalReport] = []
    main_predictions: dict[str, dict[str, int]] = {}

    for score_file in sorted(scores_dir.glob("*.jsonl")):
        name = score_file.stem
        imported = import_scores(score_file)
        score_map = {s.chain_id: s.score for s in imported.scores}
        if name.startswith("ladder_"):
            dataset_id = f"ladder/{name.removeprefix('ladder_')}"
            truth, model = main_truth, "native_baseline"
        elif name.startswith("scenario_"):
            stem = name.removeprefix("scenario_")
            variant, project = stem.split("_", 1)
            truth = _truth_from_corpus(cfg.out / "scenarios" / f"{stem}_test.jsonl")
            dataset_id, model = f"{variant}/{project}", "native_baseline"
        else:
            dataset_id, truth, model = "main", main_truth, name
            main_predictions[name] = {s.chain_id: s.predicted_label for s in imported.scores
                                      if s.chain_id in main_truth}
        reports.append(evaluate(score_map, truth, dataset_id, model))

    overlaps: list[OverlapReport] = []
    full_coverage = {m: p for m, p in main_predictions.items()
                     if set(p) == set(main_truth)}
    if len(full_coverage) >= 2:
        overlaps.append(overlap(full_coverage, main_truth))

    doc = {
        "reports": [{"model": r.model, "dataset": r.dataset_id, "auc": r.auc,
                     "positives": r.positives, "negatives": r.negatives,
                     "missing": list(r.missing), "partial": r.partial,
                     "notes": list(r.notes)} for r in reports],
        "overlaps": [{"models": list(o.model_names), "regions": o.region_counts,
                      "union_correct": o.union_correct, "total": o.total,
                      "oracle_ensemble_accuracy": o.oracle_ensemble_accuracy}
                     for o in overlaps],
    }
    reports_dir = cfg.out / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    (reports_dir / "eval_reports.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def stage_report(cfg: PipelineConfig) -> None:
    doc = json.loads((cfg.out / "reports" / "eval_reports.json").read_text(encoding="utf-8"))
    reports = [EvalReport(model=r["model"], dataset_id=r["dataset"], auc=r["auc"],
                          positives=r["positives"], negatives=r["negatives"],
                          missing=tuple(r["missing"]), partial=r["partial"],
                          notes=tuple(r["notes"]))
               for r in doc["reports"]]
    overlaps = [OverlapReport(model_names=tuple(o["models"]), region_counts=o["regions"],
                              union_correct=o["union_correct"], total=o["total"],
                              oracle_ensemble_accuracy=o["oracle_ensemble_accuracy"])
                for o in doc["overlaps"]]
    render_report(reports, cfg.out / "reports", overlaps,
                  provenance={"config_digest": cfg.digest(), "version": __version__,
                              "seed": cfg.seed})


STAGE_FNS = {
    "ingest": stage_ingest, "track": stage_track, "label": stage_label,
    "context": stage_context, "split": stage_split, "scenarios": stage_scenarios,
    "train": stage_train, "eval": stage_eval, "report": stage_report,
}


def run_pipeline(cfg: PipelineConfig) -> None:
    executed = []
    for stage in STAGES:
        if stage == "scenarios" and cfg.scenario is None:
            continue
        try:
            STAGE_FNS[stage](cfg)
        except Exception as exc:
            _write_run_manifest(cfg, executed, failed=stage)
            raise StageError(stage, exc) from exc
        executed.append(stage)
    _write_run_manifest(cfg, executed)


def _write_run_manifest(cfg: PipelineConfig, executed: list[str],
                        failed: str | None = None) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    doc = {"config": cfg.to_dict(), "config_digest": cfg.digest(),
           "version": __version__, "stages": executed}
    if failed:
        doc["failed_stage"] = failed
    (cfg.out / "run_manifest.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split("/")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must look like 0.7/0.1/0.2")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def _parse_fractions(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip() != "")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--manifest", type=Path)
    parser.add_argument("--out", type=Path)
    parser.add_argument("--reviews", type=Path)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--context", choices=("line", "method"))
    parser.add_argument("--abstract", choices=("on", "off"))
    parser.add_argument("--window", type=int)
    parser.add_argument("--token-cap", type=int, dest="token_cap")
    parser.add_argument("--ratios", type=_parse_ratios)
    parser.add_argument("--fractions", type=_parse_fractions)
    parser.add_argument("--scenario",
                        choices=("within1", "within2", "cross1", "cross2", "all"))
    parser.add_argument("--scenario-corpora", nargs="*", type=Path, dest="scenario_corpora")
    parser.add_argument("--line-tolerance", type=int, dest="line_tolerance")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--learning-rate", type=float, dest="learning_rate")
    parser.add_argument("--embedding-width", type=int, dest="embedding_width")


def build_config(args: argparse.Namespace) -> PipelineConfig:
    doc: dict = {}
    if args.config:
        doc.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for f in fields(PipelineConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            doc[f.name] = value
    if "manifest" not in doc or "out" not in doc:
        raise ValueError("--manifest and --out are required (flag or config file)")
    doc["manifest"] = Path(doc["manifest"])
    doc["out"] = Path(doc["out"])
    if doc.get("reviews"):
        doc["reviews"] = Path(doc["reviews"])
    if isinstance(doc.get("abstract"), str):
        doc["abstract"] = doc["abstract"] == "on"
    if "ratios" in doc:
        doc["ratios"] = tuple(doc["ratios"])
    if "fractions" in doc:
        doc["fractions"] = tuple(doc["fractions"])
    if "scenario_corpora" in doc:
        doc["scenario_corpora"] = tuple(Path(p) for p in doc["scenario_corpora"])
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError("unknown config key(s): " + ", ".join(sorted(unknown)))
    return PipelineConfig(**doc)


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="warntriage",
                     description="Static-analyzer warning triage pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", *STAGES):
        p = sub.add_parser(name)
        _add_common(p)
    p_import = sub.add_parser("import-scores")
    _add_common(p_import)
    p_import.add_argument("score_file", type=Path)
    p_import.add_argument("--model", required=True)

    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        problems = cfg.validate()
        if problems:
            for problem in problems:
                print(f"warntriage: config error: {problem}", file=sys.stderr)
            return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"warntriage: config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            run_pipeline(cfg)
        elif args.command == "import-scores":
            stage_import_scores(cfg, args.score_file, args.model)
        else:
            STAGE_FNS[args.command](cfg)
    except StageError as exc:
        print(f"warntriage: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        stage = args.command if args.command != "run" else "unknown"
        print(f"warntriage: stage {stage}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
