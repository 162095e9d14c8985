import random

import pytest

from test_core import mk_commit, mk_warning
from warntriage.context import (ContextScope, RawContext, TokenKind,
                                abstract_context, de_abstract, extract_context,
                                parse_methods, render_tokens, tokenize)
from warntriage.snapshots import DictSnapshotStore

C0 = mk_commit(0)


class TestTokenize:
    def test_declaration_statement(self):
        seq = tokenize("int a = 1;")
        got = [(t.text, t.kind, t.subkind) for t in seq.tokens]
        assert got == [("int", TokenKind.KEYWORD, None),
                       ("a", TokenKind.IDENTIFIER, None),
                       ("=", TokenKind.OPERATOR, None),
                       ("1", TokenKind.LITERAL, "int"),
                       (";", TokenKind.SEPARATOR, None)]

    def test_empty_string(self):
        assert len(tokenize("")) == 0

    def test_cap_truncates(self):
        text = "x = y;\n" * 200  # 4 tokens per line -> 800 tokens
        seq = tokenize(text, cap=256)
        assert len(seq) == 256
        assert seq.truncated

    def test_under_cap_not_truncated(self):
        assert not tokenize("int a = 1;", cap=256).truncated

    def test_comments_dropped(self):
        seq = tokenize("int a; // trailing\n/* block\ncomment */ int b;")
        assert [t.text for t in seq.tokens] == ["int", "a", ";", "int", "b", ";"]

    def test_literal_subkinds(self):
        seq = tokenize("x = 0x1F; y = 2.5e3f; c = 'q'; s = \"hi\"; b = true; n = 10L;")
        literals = [(t.text, t.subkind) for t in seq.tokens if t.kind is TokenKind.LITERAL]
        assert literals == [("0x1F", "int"), ("2.5e3f", "float"), ("'q'", "char"),
                            ('"hi"', "str"), ("true", "bool"), ("10L", "int")]

    def test_string_escapes(self):
        seq = tokenize(r's = "a \"quoted\" word";')
        assert seq.tokens[2].text == r'"a \"quoted\" word"'

    def test_multi_char_operators(self):
        seq = tokenize("a >>= b; c = a >= b && d != e;")
        ops = [t.text for t in seq.tokens if t.kind is TokenKind.OPERATOR]
        assert ops == [">>=", "=", ">=", "&&", "!="]

    def test_invalid_char_becomes_other(self):
        seq = tokenize("int a = 1 # 2;")
        assert any(t.kind is TokenKind.OTHER and t.text == "#" for t in seq.tokens)

    def test_line_numbers_tracked(self):
        seq = tokenize("int a;\nint b;")
        assert seq.tokens[0].line == 1
        assert seq.tokens[-1].line == 2


SAMPLE = """package com.demo;

public class Box {
    private int size;

    public Box(int size) {
        this.size = size;
    }

    public int grow(int by) {
        int next = size + by;
        size = next;
        return next;
    }
}
"""


class TestParseMethods:
    def test_spans(self):
        spans = {s.name: s for s in parse_methods(SAMPLE)}
        assert spans["Box"].start_line == 6 and spans["Box"].end_line == 8
        assert spans["grow"].start_line == 10 and spans["grow"].end_line == 14
        assert spans["grow"].signature == "grow(int)"
        assert spans["grow"].class_name == "com.demo.Box"

    def test_interface_methods_without_body_skipped(self):
        src = "interface I {\n    int f(int x);\n    default int g() { return 1; }\n}\n"
        spans = parse_methods(src)
        assert [s.name for s in spans] == ["g"]

    def test_control_flow_not_mistaken_for_methods(self):
        src = ("class C {\n    void run() {\n        if (x()) {\n            while (y()) {\n"
               "                z();\n            }\n        }\n    }\n}\n")
        spans = parse_methods(src)
        assert [s.name for s in spans] == ["run"]

    def test_field_initializer_not_a_method(self):
        src = "class C {\n    static int[] TABLE = {1, 2, 3};\n    void f() { }\n}\n"
        assert [s.name for s in parse_methods(src)] == ["f"]


class TestExtractContext:
    def store(self, text):
        return DictSnapshotStore({C0.id: {"a/B.java": text}})

    def test_method_body_context(self):
        # warning on line 11 inside grow (10..14) -> full method text
        w = mk_warning(start=11, commit=C0, file_path="a/B.java")
        ctx = extract_context(w, self.store(SAMPLE))
        assert ctx.scope is ContextScope.METHOD_BODY
        assert ctx.method_signature == "grow(int)"
        assert ctx.source_text.splitlines()[0].strip() == "public int grow(int by) {"
        assert ctx.source_text.splitlines()[-1].strip() == "}"

    def test_field_level_warning_falls_back_to_line(self):
        w = mk_warning(start=4, commit=C0, file_path="a/B.java")  # field decl
        ctx = extract_context(w, self.store(SAMPLE))
        assert ctx.scope is ContextScope.LINE_WINDOW
        assert ctx.source_text.strip() == "private int size;"

    def test_missing_snapshot_unavailable(self):
        w = mk_warning(start=4, commit=C0, file_path="a/B.java")
        ctx = extract_context(w, DictSnapshotStore({}))
        assert ctx.scope is ContextScope.UNAVAILABLE

    def test_no_line_info_unavailable(self):
        w = mk_warning(start=0, end=0, commit=C0, file_path="a/B.java")
        ctx = extract_context(w, self.store(SAMPLE))
        assert ctx.scope is ContextScope.UNAVAILABLE
        assert "no line info" in ctx.flags

    def test_line_granularity_skips_methods(self):
        w = mk_warning(start=11, commit=C0, file_path="a/B.java")
        ctx = extract_context(w, self.store(SAMPLE), granularity="line")
        assert ctx.scope is ContextScope.LINE_WINDOW
        assert ctx.source_text.strip() == "int next = size + by;"

    def test_window_expands_line_context(self):
        w = mk_warning(start=11, commit=C0, file_path="a/B.java")
        ctx = extract_context(w, self.store(SAMPLE), window=1, granularity="line")
        assert len(ctx.source_text.splitlines()) == 3

    def test_innermost_method_wins(self):
        src = ("class C {\n    void outer() {\n        new Runnable() {\n"
               "        };\n        int x = 1;\n    }\n}\n")
        w = mk_warning(start=5, commit=C0, file_path="a/B.java")
        ctx = extract_context(w, self.store(src))
        assert ctx.scope is ContextScope.METHOD_BODY
        assert ctx.method_signature == "outer()"


def ctx_of(text):
    return RawContext("k", text, ContextScope.LINE_WINDOW)


class TestAbstraction:
    def test_declared_int_example(self):
        abstracted = abstract_context(ctx_of("int a = 1;"))
        assert render_tokens(abstracted.tokens.texts) == "int intVar1 = intLiteral1;"
        assert abstracted.mapping == {"intVar1": "a", "intLiteral1": "1"}

    def test_lexeme_reuse_and_numbering(self):
        abstracted = abstract_context(ctx_of("int a = 1; a = 2;"))
        assert render_tokens(abstracted.tokens.texts) == \
            "int intVar1 = intLiteral1; intVar1 = intLiteral2;"

    def test_no_identifiers_or_literals(self):
        abstracted = abstract_context(ctx_of("return;"))
        assert abstracted.tokens.texts == ["return", ";"]
        assert abstracted.mapping == {}

    def test_undeclared_identifier_gets_lexical_kind(self):
        abstracted = abstract_context(ctx_of("foo(bar);"))
        assert abstracted.tokens.texts == ["idVar1", "(", "idVar2", ")", ";"]
        assert abstracted.flags and "lexical fallback" in abstracted.flags[0]

    def test_declared_reference_type(self):
        abstracted = abstract_context(ctx_of('String s = "x"; s = "y";'))
        assert abstracted.tokens.texts == ["idVar1", "StringVar1", "=", "strLiteral1",
                                           ";", "StringVar1", "=", "strLiteral2", ";"]

    def test_parameter_declarations_recognized(self):
        abstracted = abstract_context(ctx_of("void f(int by) { g(by); }"))
        texts = abstracted.tokens.texts
        assert "intVar1" in texts
        assert texts.count("intVar1") == 2

    def test_unavailable_context_rejected(self):
        with pytest.raises(ValueError):
            abstract_context(RawContext("k", "", ContextScope.UNAVAILABLE))

    def test_round_trip_exact(self):
        text = SAMPLE + "\nclass D { void f() { double d = 2.5; log(d, \"x\"); } }"
        abstracted = abstract_context(ctx_of(text))
        assert de_abstract(abstracted) == tokenize(text).texts

    def test_alpha_consistency(self):
        a = abstract_context(ctx_of("int count = 1; use(count); int other = count;"))
        b = abstract_context(ctx_of("int total = 1; use(total); int other = total;"))
        assert a.tokens.texts == b.tokens.texts

    def test_determinism(self):
        text = "int a = 1; String s = \"v\"; call(a, s);"
        assert abstract_context(ctx_of(text)) == abstract_context(ctx_of(text))

    def test_truncation_flag_propagates(self):
        text = "int a = 1; " * 100
        abstracted = abstract_context(ctx_of(text), cap=50)
        assert abstracted.tokens.truncated
        assert len(abstracted.tokens) == 50


def random_method(rng: random.Random, idx: int) -> str:
    names = [f"v{idx}_{k}" for k in range(rng.randint(2, 6))]
    lines = [f"public int work{idx}(int seed) {{"]
    for i, name in enumerate(names):
        lines.append(f"    int {name} = seed * {rng.randint(1, 99)};")
    expr = " + ".join(rng.choice(names) for _ in range(3))
    lines.append(f'    String tag{idx} = "m{idx}";')
    lines.append(f"    log(tag{idx}, {expr});")
    lines.append(f"    return {expr};")
    lines.append("}")
    return "\n".join(lines)


class TestCorpusProperties:
    def test_round_trip_on_method_corpus(self):
        rng = random.Random(17)
        for idx in range(60):
            text = random_method(rng, idx)
            abstracted = abstract_context(ctx_of(text))
            assert de_abstract(abstracted) == tokenize(text).texts

    def test_vocabulary_reduction(self):
        rng = random.Random(23)
        raw_vocab, abstracted_vocab = set(), set()
        for idx in range(60):
            text = random_method(rng, idx)
            raw_vocab.update(tokenize(text).texts)
            abstracted_vocab.update(abstract_context(ctx_of(text)).tokens.texts)
        assert len(abstracted_vocab) <= len(raw_vocab)


class TestRenderTokens:
    def test_statement_spacing(self):
        assert render_tokens(["int", "a", "=", "1", ";"]) == "int a = 1;"

    def test_call_spacing(self):
        assert render_tokens(["f", "(", "a", ",", "b", ")", ";"]) == "f(a, b);"

    def test_member_access(self):
        assert render_tokens(["x", ".", "y", "(", ")"]) == "x.y()"
