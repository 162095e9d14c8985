"""Ground-truth labeling: lifetimes, the median filter, and review import.

Closed chains become actionable/unactionable only through an imported
review decision. Open chains are filtered against the median lifetime of the
reviewed actionable chains: strictly longer-lived ones are unactionable,
the rest are excluded as unknown. Reviews are batch files, never
interactive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import CommitSeries, LabelKind
from .tracking import Disappearance, EvolutionChain, InitialKind, InitialLabel


class Provenance(Enum):
    REVIEWED_CLOSED = "reviewed_closed"
    LIFETIME_FILTERED = "lifetime_filtered"
    EXCLUDED_UNKNOWN = "excluded_unknown"


@dataclass(frozen=True)
class Lifetime:
    chain_id: str
    seconds: float
    low_confidence: bool = False

    def __post_init__(self) -> None:
        if self.seconds < 0:
            raise ValueError(f"negative lifetime for chain {self.chain_id}")


@dataclass(frozen=True)
class ReviewDecision:
    chain_id: str
    verdict: LabelKind
    reviewer: str = ""
    note: str = ""


@dataclass(frozen=True)
class GroundTruthLabel:
    chain_id: str
    kind: LabelKind
    provenance: Provenance
    lifetime_seconds: float | None = None

    def __post_init__(self) -> None:
        decided = self.kind in (LabelKind.ACTIONABLE, LabelKind.UNACTIONABLE)
        if decided == (self.provenance is Provenance.EXCLUDED_UNKNOWN):
            raise ValueError(f"label kind {self.kind.value} inconsistent with "
                             f"provenance {self.provenance.value}")


class NoActionableBaselineError(Exception):
    """No reviewed actionable chain exists, so no median can be computed."""


class UnknownChainError(Exception):
    def __init__(self, chain_ids: Sequence[str], reason: str):
        super().__init__(f"{reason}: {', '.join(sorted(chain_ids))}")
        self.chain_ids = tuple(sorted(chain_ids))


def lifetime(chain: EvolutionChain, series: CommitSeries,
             synthesized_timestamps: bool = False) -> Lifetime:
    """Time from the chain's first occurrence to its disappearance, or to
    the last compilable commit when it persists."""
    if chain.disappearance is Disappearance.PERSISTS_TO_END or chain.disappeared_in is None:
        until = series.last_compilable.timestamp
    else:
        until = chain.disappeared_in.timestamp
    seconds = (until - chain.first_seen.timestamp).total_seconds()
    return Lifetime(chain_id=chain.chain_id, seconds=seconds,
                    low_confidence=synthesized_timestamps)


def median_actionable_lifetime(lifetimes: Sequence[Lifetime]) -> float:
    """Lower median (deterministic, conservative for even counts)."""
    if not lifetimes:
        raise NoActionableBaselineError("no actionable baseline")
    ordered = sorted(lt.seconds for lt in lifetimes)
    return ordered[(len(ordered) - 1) // 2]


def filter_open(open_chains: Sequence[EvolutionChain], series: CommitSeries,
                median: float, synthesized_timestamps: bool = False) -> list[GroundTruthLabel]:
    """Strictly-greater rule: lifetime > median is unactionable, lifetime
    <= median stays unknown and is excluded."""
    labels = []
    for chain in open_chains:
        lt = lifetime(chain, series, synthesized_timestamps)
        if lt.seconds > median:
            labels.append(GroundTruthLabel(chain.chain_id, LabelKind.UNACTIONABLE,
                                           Provenance.LIFETIME_FILTERED, lt.seconds))
        else:
            labels.append(GroundTruthLabel(chain.chain_id, LabelKind.UNKNOWN,
                                           Provenance.EXCLUDED_UNKNOWN, lt.seconds))
    return labels


def finalize_labels(initial_labels: Sequence[InitialLabel],
                    reviews: Iterable[ReviewDecision],
                    series: CommitSeries,
                    synthesized_timestamps: bool = False) -> list[GroundTruthLabel]:
    """Merge reviews with the lifetime filter into one label per chain.

    Raises UnknownChainError for reviews that reference chains that do not
    exist, are not initially closed, or are reviewed twice. When no chain is
    reviewed actionable the filter is skipped and every open chain is
    excluded as unknown.
    """
    by_id = {il.chain.chain_id: il for il in initial_labels}
    review_by_id: dict[str, ReviewDecision] = {}
    bogus = []
    duplicated = []
    not_closed = []
    for review in reviews:
        il = by_id.get(review.chain_id)
        if il is None:
            bogus.append(review.chain_id)
        elif il.kind is not InitialKind.CLOSED:
            not_closed.append(review.chain_id)
        elif review.chain_id in review_by_id:
            duplicated.append(review.chain_id)
        else:
            review_by_id[review.chain_id] = review
    if bogus:
        raise UnknownChainError(bogus, "reviews reference unknown chains")
    if not_closed:
        raise UnknownChainError(not_closed, "reviews target chains not initially closed")
    if duplicated:
        raise UnknownChainError(duplicated, "chains reviewed more than once")

    labels: list[GroundTruthLabel] = []
    actionable_lifetimes: list[Lifetime] = []
    open_chains: list[EvolutionChain] = []

    for il in initial_labels:
        chain = il.chain
        lt = lifetime(chain, series, synthesized_timestamps)
        if il.kind is InitialKind.OPEN:
            open_chains.append(chain)
        elif il.kind is InitialKind.CLOSED:
            review = review_by_id.get(chain.chain_id)
            if review is not None and review.verdict is LabelKind.ACTIONABLE:
                labels.append(GroundTruthLabel(chain.chain_id, LabelKind.ACTIONABLE,
                                               Provenance.REVIEWED_CLOSED, lt.seconds))
                actionable_lifetimes.append(lt)
            elif review is not None and review.verdict is LabelKind.UNACTIONABLE:
                labels.append(GroundTruthLabel(chain.chain_id, LabelKind.UNACTIONABLE,
                                               Provenance.REVIEWED_CLOSED, lt.seconds))
            else:
                labels.append(GroundTruthLabel(chain.chain_id, LabelKind.UNKNOWN,
                                               Provenance.EXCLUDED_UNKNOWN, lt.seconds))
        else:
            labels.append(GroundTruthLabel(chain.chain_id, LabelKind.UNKNOWN,
                                           Provenance.EXCLUDED_UNKNOWN, lt.seconds))

    try:
        median = median_actionable_lifetime(actionable_lifetimes)
    except NoActionableBaselineError:
        for chain in open_chains:
            lt = lifetime(chain, series, synthesized_timestamps)
            labels.append(GroundTruthLabel(chain.chain_id, LabelKind.UNKNOWN,
                                           Provenance.EXCLUDED_UNKNOWN, lt.seconds))
    else:
        labels.extend(filter_open(open_chains, series, median, synthesized_timestamps))

    order = {il.chain.chain_id: i for i, il in enumerate(initial_labels)}
    labels.sort(key=lambda lb: order[lb.chain_id])
    return labels


# ---------------------------------------------------------------------------
# Files: review import, label dump


def load_reviews(path: str | Path) -> list[ReviewDecision]:
    reviews = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        record = json.loads(raw)
        try:
            verdict = LabelKind(record["verdict"])
        except (KeyError, ValueError):
            raise ValueError(f"{path}:{lineno}: verdict must be one of "
                             "actionable/unactionable/unknown") from None
        reviews.append(ReviewDecision(
            chain_id=str(record["chain"]),
            verdict=verdict,
            reviewer=str(record.get("reviewer", "")),
            note=str(record.get("note", "")),
        ))
    return reviews


def dump_labels(labels: Sequence[GroundTruthLabel], path: str | Path) -> int:
    with Path(path).open("w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(json.dumps({
                "chain": label.chain_id,
                "label": label.kind.value,
                "provenance": label.provenance.value,
                "lifetime_seconds": label.lifetime_seconds,
            }, sort_keys=True) + "\n")
    return len(labels)


def load_labels(path: str | Path) -> list[GroundTruthLabel]:
    labels = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        record = json.loads(raw)
        labels.append(GroundTruthLabel(
            chain_id=record["chain"],
            kind=LabelKind(record["label"]),
            provenance=Provenance(record["provenance"]),
            lifetime_seconds=record.get("lifetime_seconds"),
        ))
    return labels


def labels_by_chain(labels: Iterable[GroundTruthLabel]) -> Mapping[str, GroundTruthLabel]:
    return {lb.chain_id: lb for lb in labels}
