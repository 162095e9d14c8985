"""Shared domain model: commits, warnings, snapshots, and label kinds.

Everything here is an immutable value record; instances are safe to share
across threads without coordination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum


class LabelKind(Enum):
    ACTIONABLE = "actionable"
    UNACTIONABLE = "unactionable"
    UNKNOWN = "unknown"


@dataclass(frozen=True, order=True)
class CommitRef:
    """One commit in a project's history.

    ``ordinal`` is the 0-based position in the series; it must increase with
    timestamp order (ties broken by series order).
    """

    id: str
    timestamp: datetime
    ordinal: int
    compilable: bool

    def __post_init__(self) -> None:
        if self.ordinal < 0:
            raise ValueError(f"ordinal must be >= 0, got {self.ordinal}")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))


@dataclass(frozen=True)
class CommitSeries:
    """Ordered commit history of one project.

    Construction does not validate: ``validate_series`` reports invariant
    violations as data, and the ingest boundary decides whether to reject.
    """

    project: str
    commits: tuple[CommitRef, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "commits", tuple(self.commits))

    @property
    def compilable_commits(self) -> tuple[CommitRef, ...]:
        return tuple(c for c in self.commits if c.compilable)

    @property
    def last_compilable(self) -> CommitRef:
        return self.compilable_commits[-1]


@dataclass(frozen=True)
class WarningLocation:
    """Where a warning points. ``start_line == end_line == 0`` means the
    analyzer reported no line info (class-level findings)."""

    file_path: str
    class_name: str | None = None
    method_signature: str | None = None
    start_line: int = 0
    end_line: int = 0

    def __post_init__(self) -> None:
        if not self.file_path:
            raise ValueError("file_path must be non-empty")
        if self.start_line < 0 or self.end_line < 0:
            raise ValueError("line numbers must be >= 0")
        if self.start_line > self.end_line:
            raise ValueError(f"start_line {self.start_line} > end_line {self.end_line}")
        if self.method_signature is not None and self.class_name is None:
            raise ValueError("method_signature requires class_name")

    @property
    def has_line_info(self) -> bool:
        return self.start_line > 0


@dataclass(frozen=True)
class Warning:
    analyzer: str
    category: str
    type: str
    priority: int
    message: str
    location: WarningLocation
    commit: CommitRef

    def __post_init__(self) -> None:
        if not self.type:
            raise ValueError("type must be non-empty")
        if not self.category:
            raise ValueError("category must be non-empty")


def warning_key(w: Warning) -> str:
    """Deterministic identity key over (type, file, lines, method signature).

    JSON encoding keeps the key injective even when fields contain the
    would-be separator characters.
    """
    return json.dumps(
        [w.type, w.location.file_path, w.location.start_line, w.location.end_line,
         w.location.method_signature],
        separators=(",", ":"),
    )


@dataclass(frozen=True)
class WarningSnapshot:
    """All warnings of one commit, deduplicated on ``warning_key``."""

    commit: CommitRef
    warnings: tuple[Warning, ...]
    duplicates_collapsed: int = field(default=0, compare=False)

    @classmethod
    def build(cls, commit: CommitRef, warnings: list[Warning] | tuple[Warning, ...]) -> "WarningSnapshot":
        for w in warnings:
            if w.commit != commit:
                raise ValueError(f"warning commit {w.commit.id} != snapshot commit {commit.id}")
        seen: dict[str, Warning] = {}
        for w in warnings:
            seen.setdefault(warning_key(w), w)
        return cls(commit=commit, warnings=tuple(seen.values()),
                   duplicates_collapsed=len(warnings) - len(seen))


def validate_series(s: CommitSeries) -> list[str]:
    """Return invariant violations (empty list means the series is valid)."""
    violations: list[str] = []
    if not s.commits:
        return ["series has no commits"]
    for pos, c in enumerate(s.commits):
        if c.ordinal != pos:
            violations.append(f"commit {c.id}: ordinal {c.ordinal}, expected {pos}")
    for prev, cur in zip(s.commits, s.commits[1:]):
        if cur.timestamp < prev.timestamp:
            violations.append(f"commit {cur.id}: timestamp precedes commit {prev.id}")
    if not any(c.compilable for c in s.commits):
        violations.append("no compilable commit in series")
    return violations
