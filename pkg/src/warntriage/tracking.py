"""Warning evolution tracking across consecutive compilable commits.

Pairwise matching applies three strategies in order of confidence
(location, snippet, hash), each stage only considering warnings the earlier
stages left unmatched. A match never crosses warning types, and every
warning participates in at most one decision per commit pair. Chains are the
transitive closure of those decisions; a chain that ends before the last
compilable commit is classified by whether its file changed in the commit
where it disappeared.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .core import CommitRef, CommitSeries, Warning, WarningSnapshot, warning_key
from .ingest import parse_normalized_report, warning_to_record
from .snapshots import SnapshotStore

DEFAULT_LINE_TOLERANCE = 3

_WS_RUN = re.compile(r"\s+")


class MatchStrategy(Enum):
    LOCATION = "location"
    SNIPPET = "snippet"
    HASH = "hash"


class Disappearance(Enum):
    PERSISTS_TO_END = "persists_to_end"
    WITH_CODE_CHANGE = "with_code_change"
    OTHERWISE = "otherwise"


class InitialKind(Enum):
    CLOSED = "closed"
    OPEN = "open"
    UNKNOWN_INIT = "unknown"


@dataclass(frozen=True)
class MatchDecision:
    pre: Warning
    post: Warning
    strategy: MatchStrategy

    def __post_init__(self) -> None:
        if self.pre.type != self.post.type:
            raise ValueError("a match never crosses warning types")
        if self.pre.commit.ordinal >= self.post.commit.ordinal:
            raise ValueError("pre commit must precede post commit")


@dataclass(frozen=True)
class EvolutionChain:
    chain_id: str
    warnings: tuple[Warning, ...]
    first_seen: CommitRef
    last_seen: CommitRef
    disappearance: Disappearance
    disappeared_in: CommitRef | None
    strategies: tuple[MatchStrategy, ...]
    flags: tuple[str, ...] = ()

    @property
    def warning_type(self) -> str:
        return self.warnings[0].type


@dataclass(frozen=True)
class InitialLabel:
    chain: EvolutionChain
    kind: InitialKind


# ---------------------------------------------------------------------------
# Snippet access


def normalize_snippet(text: str) -> str:
    """Whitespace normalization: strip edges, collapse internal runs, drop
    blank lines; formatting-only commits must not break chains."""
    lines = [_WS_RUN.sub(" ", line.strip()) for line in text.splitlines()]
    return "\n".join(line for line in lines if line)


def snippet_text(w: Warning, store: SnapshotStore | None) -> str | None:
    """Normalized text of the warning's own lines at its commit, or None."""
    if store is None or not w.location.has_line_info:
        return None
    text = store.read(w.commit.id, w.location.file_path)
    if text is None:
        return None
    lines = text.splitlines()
    if w.location.start_line > len(lines):
        return None
    return normalize_snippet("\n".join(lines[w.location.start_line - 1:w.location.end_line]))


# ---------------------------------------------------------------------------
# The three strategies


def match_location(pre: Warning, post: Warning,
                   line_tolerance: int = DEFAULT_LINE_TOLERANCE) -> bool:
    if pre.type != post.type:
        return False
    a, b = pre.location, post.location
    if a.has_line_info != b.has_line_info:
        return False
    return (a.file_path == b.file_path
            and a.class_name == b.class_name
            and a.method_signature == b.method_signature
            and abs(a.start_line - b.start_line) <= line_tolerance)


def match_snippet(pre: Warning, post: Warning, store: SnapshotStore | None,
                  flags: list[str] | None = None) -> bool:
    if pre.type != post.type:
        return False
    pre_text = snippet_text(pre, store)
    post_text = snippet_text(post, store)
    if pre_text is None or post_text is None:
        if flags is not None:
            flags.append(f"snippet unavailable: {warning_key(pre)} vs {warning_key(post)}")
        return False
    sig_pre = pre.location.method_signature
    sig_post = post.location.method_signature
    if sig_pre is not None and sig_post is not None and sig_pre != sig_post:
        return False
    return pre_text == post_text


def _class_simple_name(class_name: str | None) -> str | None:
    return None if class_name is None else class_name.rsplit(".", 1)[-1]


def _method_name(method_signature: str | None) -> str | None:
    return None if method_signature is None else method_signature.split("(", 1)[0]


def warning_digest(w: Warning, store: SnapshotStore | None) -> str:
    """Stable content digest over type, snippet text (message when no
    snippet is available), simple class name, and method name."""
    snippet = snippet_text(w, store)
    body = ["snippet", snippet] if snippet is not None else ["message", w.message]
    payload = json.dumps(
        [w.type, body, _class_simple_name(w.location.class_name),
         _method_name(w.location.method_signature)],
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def match_hash(pre: Warning, post: Warning, store: SnapshotStore | None = None) -> bool:
    if pre.type != post.type:
        return False
    return warning_digest(pre, store) == warning_digest(post, store)


# ---------------------------------------------------------------------------
# Pairwise matching


def match_pair(s_pre: WarningSnapshot, s_post: WarningSnapshot,
               store: SnapshotStore | None = None,
               line_tolerance: int = DEFAULT_LINE_TOLERANCE,
               flags: list[str] | None = None) -> list[MatchDecision]:
    """One-to-one partial matching between two consecutive snapshots.

    Stage ambiguity (one pre matching several posts or vice versa) is
    resolved by smallest line distance, then lexicographic warning key, so
    the output is a pure function of the inputs.
    """
    if s_pre.commit.ordinal >= s_post.commit.ordinal:
        raise ValueError("snapshots must be in ordinal order")

    decisions: list[MatchDecision] = []
    free_pre = list(s_pre.warnings)
    free_post = list(s_post.warnings)

    def run_stage(strategy: MatchStrategy, predicate) -> None:
        candidates = []
        post_by_type: dict[str, list[Warning]] = {}
        for q in free_post:
            post_by_type.setdefault(q.type, []).append(q)
        for p in free_pre:
            for q in post_by_type.get(p.type, ()):
                if predicate(p, q):
                    distance = abs(p.location.start_line - q.location.start_line)
                    candidates.append((distance, warning_key(p), warning_key(q), p, q))
        candidates.sort(key=lambda c: c[:3])
        taken_pre: set[int] = set()
        taken_post: set[int] = set()
        for _, _, _, p, q in candidates:
            if id(p) in taken_pre or id(q) in taken_post:
                continue
            taken_pre.add(id(p))
            taken_post.add(id(q))
            decisions.append(MatchDecision(pre=p, post=q, strategy=strategy))
        if taken_pre:
            free_pre[:] = [p for p in free_pre if id(p) not in taken_pre]
            free_post[:] = [q for q in free_post if id(q) not in taken_post]

    run_stage(MatchStrategy.LOCATION, lambda p, q: match_location(p, q, line_tolerance))
    snippet_possible = (store is not None
                        and store.has_snapshot(s_pre.commit.id)
                        and store.has_snapshot(s_post.commit.id))
    if snippet_possible:
        run_stage(MatchStrategy.SNIPPET, lambda p, q: match_snippet(p, q, store))
    elif free_pre and free_post and flags is not None:
        flags.append(f"snippet stage skipped for {s_pre.commit.id}->{s_post.commit.id}: "
                     "source snapshot missing")
    run_stage(MatchStrategy.HASH, lambda p, q: match_hash(p, q, store))
    return decisions


# ---------------------------------------------------------------------------
# Chain assembly


def _chain_id(project: str, first: Warning) -> str:
    payload = f"{project}\x1f{first.commit.id}\x1f{warning_key(first)}"
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]


class _OpenChain:
    __slots__ = ("warnings", "strategies", "flags")

    def __init__(self, first: Warning):
        self.warnings = [first]
        self.strategies: list[MatchStrategy] = []
        self.flags: list[str] = []


def _classify_disappearance(chain: _OpenChain, gone_at: CommitRef,
                            store: SnapshotStore | None) -> tuple[Disappearance, list[str]]:
    last = chain.warnings[-1]
    file_path = last.location.file_path
    if (store is None or not store.has_snapshot(last.commit.id)
            or not store.has_snapshot(gone_at.id)):
        return Disappearance.OTHERWISE, ["disappearance cause unknown: sources unavailable"]
    before = store.file_digest(last.commit.id, file_path)
    after = store.file_digest(gone_at.id, file_path)
    if before is None:
        return Disappearance.OTHERWISE, [f"file absent at last sighting: {file_path}"]
    if after is None:
        return Disappearance.WITH_CODE_CHANGE, [f"file deleted: {file_path}"]
    if before != after:
        return Disappearance.WITH_CODE_CHANGE, []
    return Disappearance.OTHERWISE, []


def track_series(series: CommitSeries, snapshots: list[WarningSnapshot],
                 store: SnapshotStore | None = None,
                 line_tolerance: int = DEFAULT_LINE_TOLERANCE) -> list[EvolutionChain]:
    """Fold match_pair over consecutive compilable commits into chains.

    A warning absent from one compilable snapshot and present again later
    starts a new chain: matching never crosses gaps.
    """
    compilable = series.compilable_commits
    by_commit = {s.commit.id: s for s in snapshots}
    ordered = [by_commit[c.id] for c in compilable if c.id in by_commit]
    if len(ordered) != len(compilable):
        missing = [c.id for c in compilable if c.id not in by_commit]
        raise ValueError("missing snapshots for compilable commits: " + ", ".join(missing))

    chains: list[tuple[_OpenChain, Disappearance, CommitRef | None]] = []
    active: dict[int, _OpenChain] = {}

    if ordered:
        active = {id(w): _OpenChain(w) for w in ordered[0].warnings}
    for s_pre, s_post in zip(ordered, ordered[1:]):
        pair_flags: list[str] = []
        decisions = match_pair(s_pre, s_post, store, line_tolerance, pair_flags)
        matched_pre = {id(d.pre) for d in decisions}
        matched_post = {id(d.post) for d in decisions}

        next_active: dict[int, _OpenChain] = {}
        for d in decisions:
            chain = active[id(d.pre)]
            chain.warnings.append(d.post)
            chain.strategies.append(d.strategy)
            next_active[id(d.post)] = chain
        for w_id, chain in active.items():
            if w_id not in matched_pre:
                kind, extra = _classify_disappearance(chain, s_post.commit, store)
                chain.flags.extend(extra)
                chains.append((chain, kind, s_post.commit))
        for w in s_post.warnings:
            if id(w) not in matched_post:
                next_active[id(w)] = _OpenChain(w)
        active = next_active

    for chain in active.values():
        chains.append((chain, Disappearance.PERSISTS_TO_END, None))

    result = []
    for chain, kind, gone_at in chains:
        result.append(EvolutionChain(
            chain_id=_chain_id(series.project, chain.warnings[0]),
            warnings=tuple(chain.warnings),
            first_seen=chain.warnings[0].commit,
            last_seen=chain.warnings[-1].commit,
            disappearance=kind,
            disappeared_in=gone_at,
            strategies=tuple(chain.strategies),
            flags=tuple(chain.flags),
        ))
    result.sort(key=lambda c: (c.first_seen.ordinal, warning_key(c.warnings[0])))
    return result


def initial_label(chain: EvolutionChain) -> InitialLabel:
    kind = {
        Disappearance.PERSISTS_TO_END: InitialKind.OPEN,
        Disappearance.WITH_CODE_CHANGE: InitialKind.CLOSED,
        Disappearance.OTHERWISE: InitialKind.UNKNOWN_INIT,
    }[chain.disappearance]
    return InitialLabel(chain=chain, kind=kind)


# ---------------------------------------------------------------------------
# Chain dump (audit format + enough detail to rehydrate downstream stages)


def dump_chains(chains: list[EvolutionChain], series: CommitSeries, path: str | Path) -> int:
    compilable_ids = [c.id for c in series.compilable_commits]
    with Path(path).open("w", encoding="utf-8") as fh:
        for chain in chains:
            present = {w.commit.id for w in chain.warnings}
            record = {
                "chain": chain.chain_id,
                "type": chain.warning_type,
                "presence": [1 if cid in present else 0 for cid in compilable_ids],
                "strategies": [s.value for s in chain.strategies],
                "disappearance": chain.disappearance.value,
                "disappeared_in": chain.disappeared_in.id if chain.disappeared_in else None,
                "flags": list(chain.flags),
                "occurrences": [dict(warning_to_record(w), commit=w.commit.id)
                                for w in chain.warnings],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return len(chains)


def load_chains(path: str | Path, series: CommitSeries) -> list[EvolutionChain]:
    commits = {c.id: c for c in series.commits}
    chains = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        record = json.loads(raw)
        warnings = []
        for occ in record["occurrences"]:
            commit = commits[occ["commit"]]
            payload = json.dumps({k: v for k, v in occ.items() if k != "commit"})
            parsed, errors = parse_normalized_report(payload.encode("utf-8"), commit)
            if errors:
                raise ValueError(f"chain {record['chain']}: bad occurrence: {errors[0].reason}")
            warnings.extend(parsed)
        gone = record.get("disappeared_in")
        chains.append(EvolutionChain(
            chain_id=record["chain"],
            warnings=tuple(warnings),
            first_seen=warnings[0].commit,
            last_seen=warnings[-1].commit,
            disappearance=Disappearance(record["disappearance"]),
            disappeared_in=commits[gone] if gone else None,
            strategies=tuple(MatchStrategy(s) for s in record["strategies"]),
            flags=tuple(record.get("flags", ())),
        ))
    return chains
