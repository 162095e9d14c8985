"""Analyzer report ingestion: the toolkit's boundary to static analyzers.

Two report dialects are understood:

* SpotBugs ``BugCollection`` XML (``BugInstance``/``SourceLine``/``Class``/
  ``Method`` elements).
* The toolkit's normalized format: UTF-8 JSON Lines, one flat record per
  warning with mandatory keys ``analyzer``, ``category``, ``type``,
  ``priority``, ``message``, ``file_path``, ``start_line``, ``end_line`` and
  optional ``class_name``, ``method_signature``. Unknown keys are ignored.

A series manifest is a JSON document::

    {"project": "demo",
     "entries": [{"commit": "c0", "timestamp": "2020-01-01T00:00:00Z",
                  "compilable": true, "report": "reports/c0.xml",
                  "source": "snapshots/c0"}, ...]}

The toolkit never runs Maven or SpotBugs itself; the manifest records the
results of that upstream compile-and-scan loop (see README for a shell-out
recipe). Entries without a report path are non-compilable by definition.
"""

from __future__ import annotations

import json
import logging
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .core import CommitRef, CommitSeries, Warning, WarningLocation, WarningSnapshot, validate_series

log = logging.getLogger(__name__)

NORMALIZED_MANDATORY = ("analyzer", "category", "type", "priority",
                        "message", "file_path", "start_line", "end_line")

# Synthesized clock used when a manifest omits timestamps: 1 day per ordinal.
SYNTHETIC_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)


class ReportParseError(Exception):
    """Malformed report that cannot be parsed at all."""

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message if byte_offset is None
                         else f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class RecordError:
    """One bad record in an otherwise parseable report."""

    line: int
    reason: str


@dataclass(frozen=True)
class ManifestEntry:
    commit_id: str
    timestamp: datetime | None
    compilable: bool
    report_path: Path | None
    source_path: Path | None


@dataclass(frozen=True)
class SeriesManifest:
    project: str
    entries: tuple[ManifestEntry, ...]


@dataclass
class LoadResult:
    series: CommitSeries
    snapshots: list[WarningSnapshot]
    entry_errors: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    synthesized_timestamps: bool = False

    def store_roots(self, manifest: SeriesManifest) -> dict[str, Path]:
        return {e.commit_id: e.source_path for e in manifest.entries
                if e.source_path is not None}


def _parse_timestamp(value) -> datetime | None:
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return datetime.fromtimestamp(value, tz=timezone.utc)
    ts = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def load_manifest(path: str | Path) -> SeriesManifest:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    entries = []
    for raw in doc["entries"]:
        compilable = bool(raw.get("compilable", raw.get("report") is not None))
        report = raw.get("report")
        if compilable and report is None:
            raise ValueError(f"manifest entry {raw.get('commit')}: compilable but no report path")
        if not compilable and report is not None:
            raise ValueError(f"manifest entry {raw.get('commit')}: report path on non-compilable entry")
        source = raw.get("source")
        entries.append(ManifestEntry(
            commit_id=str(raw["commit"]),
            timestamp=_parse_timestamp(raw.get("timestamp")),
            compilable=compilable,
            report_path=base / report if report else None,
            source_path=base / source if source else None,
        ))
    return SeriesManifest(project=str(doc["project"]), entries=tuple(entries))


# ---------------------------------------------------------------------------
# SpotBugs XML


def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + column


def _classname_to_path(classname: str) -> str:
    return classname.split("$", 1)[0].replace(".", "/") + ".java"


def parse_spotbugs_report(data: bytes, commit: CommitRef) -> tuple[list[Warning], list[str]]:
    """Parse a SpotBugs BugCollection document into warnings for ``commit``.

    Returns (warnings, flags). Instances without any SourceLine get
    start_line = end_line = 0 and a "no line info" flag; they survive
    tracking but are excluded from context extraction.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position
        raise ReportParseError(f"malformed XML: {exc}", _byte_offset(data, line, column)) from exc

    if root.tag != "BugCollection":
        log.warning("unexpected report root element %r; best-effort parse", root.tag)
    version = root.get("version", "")
    analyzer = f"spotbugs-{version}" if version else "spotbugs"

    flags: list[str] = []
    warnings: list[Warning] = []
    for bug in root.iter("BugInstance"):
        bug_type = bug.get("type", "")
        if not bug_type:
            flags.append("BugInstance without type skipped")
            continue

        class_elements = bug.findall("Class")
        class_el = next((c for c in class_elements if c.get("primary") == "true"),
                        class_elements[0] if class_elements else None)
        class_name = class_el.get("classname") if class_el is not None else None

        method_el = bug.find("Method")
        method_signature = None
        if method_el is not None:
            method_signature = f"{method_el.get('name', '')}{method_el.get('signature', '')}"
            if class_name is None:
                class_name = method_el.get("classname")

        source_line = None
        source_lines = bug.findall("SourceLine")
        for cand in source_lines:
            if cand.get("primary") == "true":
                source_line = cand
                break
        if source_line is None and source_lines:
            source_line = source_lines[0]

        start = end = 0
        file_path = None
        if source_line is not None:
            start = int(source_line.get("start", 0) or 0)
            end = int(source_line.get("end", 0) or 0)
            end = max(start, end)
            file_path = source_line.get("sourcepath") or source_line.get("sourcefile")
        else:
            flags.append(f"no line info: {bug_type}")
        if file_path is None:
            file_path = _classname_to_path(class_name) if class_name else "<unknown>"

        message = ""
        for tag in ("LongMessage", "ShortMessage"):
            el = bug.find(tag)
            if el is not None and el.text:
                message = el.text.strip()
                break

        warnings.append(Warning(
            analyzer=analyzer,
            category=bug.get("category", "UNKNOWN"),
            type=bug_type,
            priority=int(bug.get("priority", 0) or 0),
            message=message,
            location=WarningLocation(
                file_path=file_path,
                class_name=class_name,
                method_signature=method_signature if class_name else None,
                start_line=start,
                end_line=end,
            ),
            commit=commit,
        ))
    return warnings, flags


# ---------------------------------------------------------------------------
# Normalized JSON Lines


def parse_normalized_report(data: bytes, commit: CommitRef) -> tuple[list[Warning], list[RecordError]]:
    """Parse the normalized JSONL dialect. Bad records are collected as
    RecordErrors with their 1-based line number; parsing continues."""
    warnings: list[Warning] = []
    errors: list[RecordError] = []
    for lineno, raw in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            errors.append(RecordError(lineno, f"invalid JSON: {exc.msg}"))
            continue
        missing = [k for k in NORMALIZED_MANDATORY if k not in record]
        if missing:
            errors.append(RecordError(lineno, "missing mandatory field(s): " + ", ".join(missing)))
            continue
        try:
            warnings.append(Warning(
                analyzer=str(record["analyzer"]),
                category=str(record["category"]),
                type=str(record["type"]),
                priority=int(record["priority"]),
                message=str(record["message"]),
                location=WarningLocation(
                    file_path=str(record["file_path"]),
                    class_name=record.get("class_name"),
                    method_signature=record.get("method_signature"),
                    start_line=int(record["start_line"]),
                    end_line=int(record["end_line"]),
                ),
                commit=commit,
            ))
        except (ValueError, TypeError) as exc:
            errors.append(RecordError(lineno, str(exc)))
    return warnings, errors


def warning_to_record(w: Warning) -> dict:
    record = {
        "analyzer": w.analyzer,
        "category": w.category,
        "type": w.type,
        "priority": w.priority,
        "message": w.message,
        "file_path": w.location.file_path,
        "start_line": w.location.start_line,
        "end_line": w.location.end_line,
    }
    if w.location.class_name is not None:
        record["class_name"] = w.location.class_name
    if w.location.method_signature is not None:
        record["method_signature"] = w.location.method_signature
    return record


def export_normalized(warnings: list[Warning], path: str | Path) -> int:
    """Write warnings in the normalized JSONL dialect; returns the count."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for w in warnings:
            fh.write(json.dumps(warning_to_record(w), sort_keys=True) + "\n")
    return len(warnings)


# ---------------------------------------------------------------------------
# Series assembly


def _parse_report_file(entry: ManifestEntry, commit: CommitRef):
    data = entry.report_path.read_bytes()
    if entry.report_path.suffix.lower() == ".xml":
        warnings, _flags = parse_spotbugs_report(data, commit)
    else:
        warnings, record_errors = parse_normalized_report(data, commit)
        if record_errors:
            log.warning("%s: %d bad record(s)", entry.report_path, len(record_errors))
    return warnings


def load_series(manifest: SeriesManifest, jobs: int = 1) -> LoadResult:
    """Assemble the commit series and one warning snapshot per compilable
    commit, in ordinal order.

    An unreadable report demotes its entry to non-compilable and is counted
    in ``entry_errors`` rather than failing the whole load.
    """
    synthesized = any(e.timestamp is None for e in manifest.entries)
    commits: list[CommitRef] = []
    for ordinal, entry in enumerate(manifest.entries):
        ts = entry.timestamp
        if ts is None:
            ts = SYNTHETIC_EPOCH + timedelta(days=ordinal)
        commits.append(CommitRef(id=entry.commit_id, timestamp=ts,
                                 ordinal=ordinal, compilable=entry.compilable))

    result = LoadResult(
        series=CommitSeries(project=manifest.project, commits=tuple(commits)),
        snapshots=[],
        synthesized_timestamps=synthesized,
    )
    if synthesized:
        result.flags.append("timestamps synthesized at 1-day spacing")

    compilable = [(entry, commits[i]) for i, entry in enumerate(manifest.entries) if entry.compilable]

    def parse_one(pair):
        entry, commit = pair
        try:
            return WarningSnapshot.build(commit, _parse_report_file(entry, commit))
        except (OSError, ReportParseError) as exc:
            return (entry, exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parsed = list(pool.map(parse_one, compilable))
    else:
        parsed = [parse_one(pair) for pair in compilable]

    demoted: set[str] = set()
    for outcome in parsed:
        if isinstance(outcome, WarningSnapshot):
            result.snapshots.append(outcome)
            if outcome.duplicates_collapsed:
                result.flags.append(
                    f"{outcome.commit.id}: collapsed {outcome.duplicates_collapsed} duplicate warning(s)")
        else:
            entry, exc = outcome
            result.entry_errors.append(f"{entry.commit_id}: {exc}")
            demoted.add(entry.commit_id)

    if demoted:
        commits = [CommitRef(c.id, c.timestamp, c.ordinal, c.compilable and c.id not in demoted)
                   for c in result.series.commits]
        result.series = CommitSeries(project=manifest.project, commits=tuple(commits))

    violations = validate_series(result.series)
    if violations:
        raise ValueError("manifest yields invalid series: " + "; ".join(violations))
    return result
