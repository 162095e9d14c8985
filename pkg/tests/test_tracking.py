import random

import pytest

from synth import match_planted
from test_core import mk_commit, mk_warning
from warntriage.core import WarningSnapshot, warning_key
from warntriage.snapshots import DictSnapshotStore
from warntriage.tracking import (Disappearance, InitialKind, MatchStrategy, initial_label,
                                 load_chains, dump_chains, match_hash, match_location,
                                 match_pair, match_snippet, normalize_snippet,
                                 track_series, warning_digest)

C0 = mk_commit(0)
C1 = mk_commit(1)


def two_commit_store(pre_files: dict[str, str], post_files: dict[str, str]):
    return DictSnapshotStore({C0.id: pre_files, C1.id: post_files})


class TestMatchLocation:
    def test_identical_location(self):
        assert match_location(mk_warning(commit=C0), mk_warning(commit=C1), 3)

    def test_beyond_tolerance(self):
        assert not match_location(mk_warning(start=10, commit=C0),
                                  mk_warning(start=14, commit=C1), 3)

    def test_two_line_shift_within_tolerance(self):
        # a 2-line insertion above the warning keeps the pair matchable
        assert match_location(mk_warning(start=10, commit=C0),
                              mk_warning(start=12, commit=C1), 3)

    def test_type_mismatch(self):
        assert not match_location(mk_warning(wtype="A", commit=C0),
                                  mk_warning(wtype="B", commit=C1), 3)

    def test_line_info_presence_must_agree(self):
        with_lines = mk_warning(start=2, commit=C0)
        without = mk_warning(start=0, end=0, commit=C1)
        assert not match_location(with_lines, without, 3)


class TestMatchSnippet:
    def test_moved_code_matches(self):
        body = "int x = compute();\nreturn x;"
        pre = "\n".join(["// a"] * 3 + [body])
        post = "\n".join(["// b"] * 23 + [body])
        store = two_commit_store({"a/B.java": pre}, {"a/B.java": post})
        assert match_snippet(mk_warning(start=4, end=5, commit=C0),
                             mk_warning(start=24, end=25, commit=C1), store)

    def test_edited_snippet_differs(self):
        store = two_commit_store({"a/B.java": "int x = 1;"}, {"a/B.java": "int y = 1;"})
        assert not match_snippet(mk_warning(start=1, commit=C0),
                                 mk_warning(start=1, commit=C1), store)

    def test_missing_snapshot_flagged(self):
        store = DictSnapshotStore({C0.id: {"a/B.java": "int x;"}})
        flags = []
        assert not match_snippet(mk_warning(start=1, commit=C0),
                                 mk_warning(start=1, commit=C1), store, flags)
        assert any("snippet unavailable" in f for f in flags)

    def test_whitespace_reformat_still_matches(self):
        store = two_commit_store({"a/B.java": "int  x =  1;"},
                                 {"a/B.java": "  int x = 1;  "})
        assert match_snippet(mk_warning(start=1, commit=C0),
                             mk_warning(start=1, commit=C1), store)

    def test_normalization_rules(self):
        assert normalize_snippet("  a   b \n\n  c  ") == "a b\nc"


class TestMatchHash:
    def test_identical_inputs_match(self):
        assert match_hash(mk_warning(commit=C0), mk_warning(commit=C1))

    def test_file_rename_same_content_matches(self):
        text = "int x = 1;\nreturn x;"
        store = two_commit_store({"old/B.java": text}, {"new/B.java": text})
        pre = mk_warning(file_path="old/B.java", start=1, commit=C0)
        post = mk_warning(file_path="new/B.java", start=1, commit=C1)
        assert not match_location(pre, post, 3)
        assert match_hash(pre, post, store)

    def test_single_token_edits_never_collide(self):
        # avalanche check: 1000 random one-token edits all change the digest
        rng = random.Random(3)
        tokens = ["int", "x", "=", "compute", "(", ")", ";", "return", "x", ";"]
        base_text = " ".join(tokens)
        store_base = DictSnapshotStore({C0.id: {"a/B.java": base_text}})
        base = warning_digest(mk_warning(start=1, commit=C0), store_base)
        collisions = 0
        for i in range(1000):
            edited = list(tokens)
            edited[rng.randrange(len(edited))] = f"tok{i}"
            store = DictSnapshotStore({C0.id: {"a/B.java": " ".join(edited)}})
            if warning_digest(mk_warning(start=1, commit=C0), store) == base:
                collisions += 1
        assert collisions == 0

    def test_message_fallback_when_no_lines(self):
        a = mk_warning(start=0, end=0, message="same", commit=C0)
        b = mk_warning(start=0, end=0, message="same", commit=C1)
        c = mk_warning(start=0, end=0, message="different", commit=C1)
        assert match_hash(a, b)
        assert not match_hash(a, c)


class TestMatchPair:
    def test_identical_snapshots_all_location(self):
        warnings = [mk_warning(start=i * 10 + 1, commit=C0) for i in range(4)]
        posts = [mk_warning(start=i * 10 + 1, commit=C1) for i in range(4)]
        decisions = match_pair(WarningSnapshot.build(C0, warnings),
                               WarningSnapshot.build(C1, posts))
        assert len(decisions) == 4
        assert all(d.strategy is MatchStrategy.LOCATION for d in decisions)

    def test_disjoint_types_no_matches(self):
        pre = WarningSnapshot.build(C0, [mk_warning(wtype="A", commit=C0)])
        post = WarningSnapshot.build(C1, [mk_warning(wtype="B", commit=C1)])
        assert match_pair(pre, post) == []

    def test_three_warning_mixed_strategies(self):
        # one persists in place, one moves 20 lines (snippet), one is fixed
        stay_text = "int stay = 1;"
        move_text = "int moved = 2;"
        gone_text = "int gone = 3;"
        pre_file = "\n".join([stay_text, move_text, gone_text])
        post_file = "\n".join([stay_text] + ["// pad"] * 20 + [move_text])
        store = two_commit_store({"a/B.java": pre_file}, {"a/B.java": post_file})
        mk = lambda line, commit: mk_warning(start=line, commit=commit)
        pre = WarningSnapshot.build(C0, [mk(1, C0), mk(2, C0), mk(3, C0)])
        post = WarningSnapshot.build(C1, [mk(1, C1), mk(22, C1)])
        decisions = match_pair(pre, post, store)
        assert len(decisions) == 2
        assert {d.strategy for d in decisions} == {MatchStrategy.LOCATION,
                                                   MatchStrategy.SNIPPET}

    def test_ambiguity_resolved_by_line_distance_then_key(self):
        pre = WarningSnapshot.build(C0, [mk_warning(start=10, commit=C0),
                                         mk_warning(start=13, commit=C0)])
        post = WarningSnapshot.build(C1, [mk_warning(start=11, commit=C1)])
        decisions = match_pair(pre, post)
        assert len(decisions) == 1
        assert decisions[0].pre.location.start_line == 10  # distance 1 beats 2

    def test_partial_injection(self):
        rng = random.Random(9)
        pre = WarningSnapshot.build(C0, [mk_warning(start=rng.randint(1, 30), commit=C0)
                                         for _ in range(12)])
        post = WarningSnapshot.build(C1, [mk_warning(start=rng.randint(1, 30), commit=C1)
                                          for _ in range(12)])
        decisions = match_pair(pre, post)
        assert len({id(d.pre) for d in decisions}) == len(decisions)
        assert len({id(d.post) for d in decisions}) == len(decisions)

    def test_strategy_monotonicity_on_unchanged_code(self, fixture):
        # anything location-matched on unchanged code also snippet/hash-matches
        s_pre, s_post = fixture.snapshots[0], fixture.snapshots[1]
        for d in match_pair(s_pre, s_post, fixture.store):
            if d.strategy is MatchStrategy.LOCATION and d.pre.location.has_line_info:
                pre_text = fixture.store.read(d.pre.commit.id, d.pre.location.file_path)
                post_text = fixture.store.read(d.post.commit.id, d.post.location.file_path)
                if pre_text == post_text:
                    assert match_snippet(d.pre, d.post, fixture.store)
                    assert match_hash(d.pre, d.post, fixture.store)


class TestTrackSeries:
    def test_planted_chains_recovered_exactly(self, fixture):
        chains = track_series(fixture.series, fixture.snapshots, fixture.store)
        assert len(chains) == len(fixture.planted) == 12
        match_planted(fixture, chains)  # raises on any mismatch

    def test_initial_labels_match_plant(self, fixture):
        chains = track_series(fixture.series, fixture.snapshots, fixture.store)
        mapping = match_planted(fixture, chains)
        by_id = {c.chain_id: c for c in chains}
        for planted in fixture.planted:
            chain = by_id[mapping[planted.name]]
            assert initial_label(chain).kind is planted.initial, planted.name
            if planted.expect_flag:
                assert any(planted.expect_flag in f for f in chain.flags), planted.name

    def test_every_strategy_exercised(self, fixture):
        chains = track_series(fixture.series, fixture.snapshots, fixture.store)
        used = {s for c in chains for s in c.strategies}
        assert used == {MatchStrategy.LOCATION, MatchStrategy.SNIPPET, MatchStrategy.HASH}

    def test_chain_partition(self, fixture):
        chains = track_series(fixture.series, fixture.snapshots, fixture.store)
        total_occurrences = sum(len(s.warnings) for s in fixture.snapshots)
        assert sum(len(c.warnings) for c in chains) == total_occurrences
        seen = set()
        for chain in chains:
            for w in chain.warnings:
                key = (w.commit.id, warning_key(w))
                assert key not in seen
                seen.add(key)

    def test_determinism(self, fixture):
        a = track_series(fixture.series, fixture.snapshots, fixture.store)
        b = track_series(fixture.series, fixture.snapshots, fixture.store)
        assert [(c.chain_id, c.warnings, c.strategies, c.disappearance) for c in a] \
            == [(c.chain_id, c.warnings, c.strategies, c.disappearance) for c in b]

    def test_no_sources_degrades_to_otherwise(self, fixture):
        chains = track_series(fixture.series, fixture.snapshots, store=None)
        gone = [c for c in chains if c.disappearance is not Disappearance.PERSISTS_TO_END]
        assert gone, "fixture plants disappearing chains"
        for chain in gone:
            assert chain.disappearance is Disappearance.OTHERWISE
            assert any("sources unavailable" in f for f in chain.flags)

    def test_initial_label_mapping(self, fixture):
        chains = track_series(fixture.series, fixture.snapshots, fixture.store)
        for chain in chains:
            kind = initial_label(chain).kind
            assert kind is {
                Disappearance.PERSISTS_TO_END: InitialKind.OPEN,
                Disappearance.WITH_CODE_CHANGE: InitialKind.CLOSED,
                Disappearance.OTHERWISE: InitialKind.UNKNOWN_INIT,
            }[chain.disappearance]

    def test_dump_load_round_trip(self, fixture, tmp_path):
        chains = track_series(fixture.series, fixture.snapshots, fixture.store)
        path = tmp_path / "chains.jsonl"
        assert dump_chains(chains, fixture.series, path) == len(chains)
        loaded = load_chains(path, fixture.series)
        assert [(c.chain_id, c.warnings, c.strategies, c.disappearance, c.disappeared_in)
                for c in loaded] \
            == [(c.chain_id, c.warnings, c.strategies, c.disappearance, c.disappeared_in)
                for c in chains]


class TestMatchDecisionInvariants:
    def test_cross_type_decision_rejected(self):
        from warntriage.tracking import MatchDecision
        with pytest.raises(ValueError):
            MatchDecision(pre=mk_warning(wtype="A", commit=C0),
                          post=mk_warning(wtype="B", commit=C1),
                          strategy=MatchStrategy.LOCATION)

    def test_ordinal_order_enforced(self):
        from warntriage.tracking import MatchDecision
        with pytest.raises(ValueError):
            MatchDecision(pre=mk_warning(commit=C1), post=mk_warning(commit=C0),
                          strategy=MatchStrategy.LOCATION)
