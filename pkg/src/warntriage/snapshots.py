"""Access to per-commit source snapshots.

Matching and context extraction only ever need two primitives: read a file's
text at a commit, and compare file digests between commits. Snapshots may be
directory trees on disk (one root per commit) or in-memory mappings (tests).
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol


class SnapshotStore(Protocol):
    def has_snapshot(self, commit_id: str) -> bool: ...

    def read(self, commit_id: str, file_path: str) -> str | None:
        """File text at the commit, or None if the file or snapshot is absent."""

    def file_digest(self, commit_id: str, file_path: str) -> str | None: ...


def _digest(text: str) -> str:
    return hashlib.sha1(text.encode("utf-8")).hexdigest()


class DirSnapshotStore:
    """Snapshots laid out as one directory tree per commit."""

    def __init__(self, roots: dict[str, Path]):
        self._roots = {cid: Path(p) for cid, p in roots.items()}

    def has_snapshot(self, commit_id: str) -> bool:
        return commit_id in self._roots

    def read(self, commit_id: str, file_path: str) -> str | None:
        root = self._roots.get(commit_id)
        if root is None:
            return None
        path = root / file_path
        if not path.is_file():
            return None
        return path.read_text(encoding="utf-8", errors="replace")

    def file_digest(self, commit_id: str, file_path: str) -> str | None:
        text = self.read(commit_id, file_path)
        return None if text is None else _digest(text)


class DictSnapshotStore:
    """In-memory snapshots: {commit_id: {file_path: text}}."""

    def __init__(self, trees: dict[str, dict[str, str]]):
        self._trees = trees

    def has_snapshot(self, commit_id: str) -> bool:
        return commit_id in self._trees

    def read(self, commit_id: str, file_path: str) -> str | None:
        tree = self._trees.get(commit_id)
        if tree is None:
            return None
        return tree.get(file_path)

    def file_digest(self, commit_id: str, file_path: str) -> str | None:
        text = self.read(commit_id, file_path)
        return None if text is None else _digest(text)


EMPTY_STORE = DictSnapshotStore({})
