"""Warning context extraction, tokenization, and abstraction.

The context of a warning is the body of the enclosing method when a
lightweight syntax scan of the file can find one, and the warning's own
lines otherwise (class-level findings, unparseable files). Contexts can be
abstracted by replacing every identifier and literal with a kind-prefixed,
numbered placeholder ("int a = 1;" becomes "int intVar1 = intLiteral1;"),
which shrinks the token vocabulary while keeping def-use structure: the
same lexeme always maps to the same placeholder within one context.

A tracked chain is represented by the context of its last occurrence: for
closed chains that is the code state that was subsequently changed.

The scanner is brace-based and deliberately modest: it handles classes,
interfaces, enums, records, nested types, constructors, generics, varargs
and throws clauses, but does not descend into anonymous classes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .core import Warning, warning_key
from .snapshots import SnapshotStore

DEFAULT_TOKEN_CAP = 256
DEFAULT_LINE_WINDOW = 0


class ContextScope(Enum):
    METHOD_BODY = "method_body"
    LINE_WINDOW = "line_window"
    UNAVAILABLE = "unavailable"


class TokenKind(Enum):
    IDENTIFIER = "identifier"
    LITERAL = "literal"
    KEYWORD = "keyword"
    OPERATOR = "operator"
    SEPARATOR = "separator"
    OTHER = "other"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    subkind: str | None = None  # literals: int/float/char/str/bool
    line: int = 0


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[Token, ...]
    truncated: bool = False

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class RawContext:
    warning_key: str
    source_text: str
    scope: ContextScope
    method_signature: str | None = None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class AbstractedContext:
    tokens: TokenSequence
    mapping: dict[str, str]  # placeholder -> original lexeme
    flags: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Lexer

JAVA_KEYWORDS = frozenset("""
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new null package
    private protected public record return short static strictfp super
    switch synchronized this throw throws transient try var void volatile
    while yield
""".split())

PRIMITIVE_TYPES = frozenset(
    ["byte", "short", "int", "long", "float", "double", "char", "boolean"])

_OPERATORS = sorted(
    ["=", ">", "<", "!", "~", "?", ":", "->", "==", ">=", "<=", "!=", "&&",
     "||", "++", "--", "+", "-", "*", "/", "&", "|", "^", "%", "<<", ">>",
     ">>>", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=", "<<=", ">>=",
     ">>>="],
    key=len, reverse=True)
_SEPARATORS = sorted(["(", ")", "{", "}", "[", "]", ";", ",", "...", ".", "@", "::"],
                     key=len, reverse=True)

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>//[^\n]*|/\*.*?\*/)
      | (?P<str>"(?:\\.|[^"\\\n])*")
      | (?P<char>'(?:\\.|[^'\\\n])*')
      | (?P<float>(?:\d[\d_]*\.[\d_]*(?:[eE][+-]?\d+)?
                    |\.\d[\d_]*(?:[eE][+-]?\d+)?
                    |\d[\d_]*[eE][+-]?\d+)[fFdD]?
                  |\d[\d_]*[fFdD])
      | (?P<int>0[xX][0-9a-fA-F_]+[lL]?|0[bB][01_]+[lL]?|\d[\d_]*[lL]?)
      | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
      | (?P<punct>""" + "|".join(re.escape(p) for p in _SEPARATORS + _OPERATORS) + r""")
      | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)
_SEPARATOR_SET = frozenset(_SEPARATORS)


def _lex(text: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    for m in _TOKEN_RE.finditer(text):
        group = m.lastgroup
        value = m.group()
        if group in ("ws", "comment"):
            line += value.count("\n")
            continue
        if group == "str":
            tokens.append(Token(value, TokenKind.LITERAL, "str", line))
        elif group == "char":
            tokens.append(Token(value, TokenKind.LITERAL, "char", line))
        elif group == "float":
            tokens.append(Token(value, TokenKind.LITERAL, "float", line))
        elif group == "int":
            tokens.append(Token(value, TokenKind.LITERAL, "int", line))
        elif group == "ident":
            if value in ("true", "false"):
                tokens.append(Token(value, TokenKind.LITERAL, "bool", line))
            elif value in JAVA_KEYWORDS:
                tokens.append(Token(value, TokenKind.KEYWORD, None, line))
            else:
                tokens.append(Token(value, TokenKind.IDENTIFIER, None, line))
        elif group == "punct":
            kind = TokenKind.SEPARATOR if value in _SEPARATOR_SET else TokenKind.OPERATOR
            tokens.append(Token(value, kind, None, line))
        else:
            tokens.append(Token(value, TokenKind.OTHER, None, line))
        line += value.count("\n")
    return tokens


def tokenize(source_text: str, cap: int | None = DEFAULT_TOKEN_CAP) -> TokenSequence:
    """Lexical token stream with comments dropped; truncation applied last."""
    tokens = _lex(source_text)
    if cap is not None and len(tokens) > cap:
        return TokenSequence(tokens=tuple(tokens[:cap]), truncated=True)
    return TokenSequence(tokens=tuple(tokens), truncated=False)


_CONTROL_KEYWORDS = frozenset({"if", "for", "while", "switch", "catch", "return",
                               "throw", "new", "assert", "synchronized", "do", "else"})
_WORD_END = re.compile(r"[A-Za-z0-9_$]$")


def render_tokens(texts: list[str]) -> str:
    """Join token texts with Java-ish spacing (inverse-ish of tokenize)."""
    out: list[str] = []
    for text in texts:
        glue = bool(out) and (
            text in (";", ",", ")", "]", ".", "...", "::")
            or out[-1] in ("(", "[", ".", "@", "::")
            or (text == "(" and _WORD_END.search(out[-1])
                and out[-1] not in _CONTROL_KEYWORDS))
        if glue:
            out.append(text)
        else:
            out.append((" " if out else "") + text)
    return "".join(out)


# ---------------------------------------------------------------------------
# Method spans

_CONTROL_PRECEDERS = frozenset({".", "@", "new"})
_TYPE_KEYWORDS = frozenset({"class", "interface", "enum", "record"})


@dataclass(frozen=True)
class MethodSpan:
    class_name: str
    name: str
    signature: str  # name(paramType,...)
    start_line: int
    end_line: int


def _matching_paren(tokens: list[Token], open_idx: int) -> int:
    depth = 0
    for i in range(open_idx, len(tokens)):
        if tokens[i].text == "(":
            depth += 1
        elif tokens[i].text == ")":
            depth -= 1
            if depth == 0:
                return i
    return -1


def _param_types(tokens: list[Token]) -> list[str]:
    if not tokens:
        return []
    groups: list[list[Token]] = [[]]
    depth = 0
    for t in tokens:
        if t.text in ("<", "(", "["):
            depth += 1
        elif t.text in (">", ")", "]"):
            depth -= 1
        if t.text == "," and depth == 0:
            groups.append([])
        else:
            groups[-1].append(t)
    types = []
    for group in groups:
        parts = [t for t in group if t.text not in ("final",) and t.text != "@"]
        # drop the trailing parameter name; everything before it is the type
        if parts and parts[-1].kind is TokenKind.IDENTIFIER and len(parts) > 1:
            parts = parts[:-1]
        types.append("".join(t.text for t in parts))
    return types


def parse_methods(text: str) -> list[MethodSpan]:
    """Brace-based scan for method and constructor body spans."""
    tokens = _lex(text)
    package = ""
    if tokens and tokens[0].text == "package":
        j = 1
        parts = []
        while j < len(tokens) and tokens[j].text != ";":
            parts.append(tokens[j].text)
            j += 1
        package = "".join(parts)

    spans: list[MethodSpan] = []
    scopes: list[dict] = []  # {"kind": class|method|other, ...}
    class_names: list[str] = []
    pending_class: str | None = None
    pending_method: tuple[str, str, int] | None = None

    def qualified() -> str:
        nested = "$".join(class_names)
        return f"{package}.{nested}" if package else nested

    i = 0
    n = len(tokens)
    while i < n:
        t = tokens[i]
        if t.kind is TokenKind.KEYWORD and t.text in _TYPE_KEYWORDS \
                and i + 1 < n and tokens[i + 1].kind is TokenKind.IDENTIFIER:
            pending_class = tokens[i + 1].text
            pending_method = None
            i += 2
            continue
        if t.text == "{":
            if pending_class is not None:
                class_names.append(pending_class)
                scopes.append({"kind": "class"})
                pending_class = None
            elif pending_method is not None:
                name, signature, start_line = pending_method
                scopes.append({"kind": "method", "name": name, "signature": signature,
                               "start_line": start_line, "class": qualified()})
                pending_method = None
            else:
                scopes.append({"kind": "other"})
            i += 1
            continue
        if t.text == "}":
            if scopes:
                top = scopes.pop()
                if top["kind"] == "method":
                    spans.append(MethodSpan(
                        class_name=top["class"], name=top["name"],
                        signature=top["signature"],
                        start_line=top["start_line"], end_line=t.line))
                elif top["kind"] == "class" and class_names:
                    class_names.pop()
            i += 1
            continue
        if (scopes and scopes[-1]["kind"] == "class"
                and t.kind is TokenKind.IDENTIFIER
                and i + 1 < n and tokens[i + 1].text == "("
                and (i == 0 or tokens[i - 1].text not in _CONTROL_PRECEDERS)):
            close = _matching_paren(tokens, i + 1)
            if close != -1:
                k = close + 1
                if k < n and tokens[k].text == "throws":
                    k += 1
                    while k < n and (tokens[k].kind is TokenKind.IDENTIFIER
                                     or tokens[k].text in (",", ".")):
                        k += 1
                if k < n and tokens[k].text == "{":
                    types = _param_types(tokens[i + 2:close])
                    pending_method = (t.text, f"{t.text}({','.join(types)})", t.line)
                    pending_class = None
                    i = k
                    continue
        i += 1
    spans.sort(key=lambda s: (s.start_line, s.end_line))
    return spans


# ---------------------------------------------------------------------------
# Context extraction


def extract_context(w: Warning, store: SnapshotStore | None,
                    window: int = DEFAULT_LINE_WINDOW,
                    granularity: str = "method") -> RawContext:
    """Method-body context with line-window fallback.

    ``granularity="line"`` skips the method scan entirely and always uses
    the warning's own lines. Class-level findings (no line info) and missing
    snapshots yield an Unavailable context; those never enter datasets.
    """
    key = warning_key(w)
    loc = w.location
    if not loc.has_line_info:
        return RawContext(key, "", ContextScope.UNAVAILABLE, None, ("no line info",))
    text = None if store is None else store.read(w.commit.id, loc.file_path)
    if text is None:
        return RawContext(key, "", ContextScope.UNAVAILABLE, None, ("source unavailable",))

    flags: list[str] = []
    lines = text.splitlines()
    if granularity == "method":
        try:
            spans = parse_methods(text)
        except RecursionError:
            spans = []
            flags.append("method parse failed")
        containing = [s for s in spans
                      if s.start_line <= loc.start_line and loc.end_line <= s.end_line]
        if containing:
            span = min(containing, key=lambda s: (s.end_line - s.start_line, -s.start_line))
            body = "\n".join(lines[span.start_line - 1:span.end_line])
            return RawContext(key, body, ContextScope.METHOD_BODY, span.signature, tuple(flags))

    lo = max(1, loc.start_line - window)
    hi = min(len(lines), loc.end_line + window)
    if lo > len(lines):
        flags.append("warning lines beyond end of file")
        body = ""
    else:
        body = "\n".join(lines[lo - 1:hi])
    return RawContext(key, body, ContextScope.LINE_WINDOW, None, tuple(flags))


# ---------------------------------------------------------------------------
# Abstraction

_DECL_FOLLOWERS = frozenset({"=", ";", ",", ")", ":"})


def _declared_types(tokens: tuple[Token, ...]) -> dict[str, str]:
    """Map identifier lexemes to their declared base type names.

    Recognizes the common declaration shapes: locals, fields, parameters and
    enhanced-for variables. Identifiers without a recognized declaration
    fall back to the lexical kind.
    """
    table: dict[str, str] = {}
    n = len(tokens)
    for i, t in enumerate(tokens):
        is_type_start = (t.text in PRIMITIVE_TYPES) or (t.kind is TokenKind.IDENTIFIER)
        if not is_type_start:
            continue
        j = i + 1
        # absorb a generic argument group and array brackets after the base type
        if j < n and tokens[j].text == "<":
            depth = 0
            while j < n:
                if tokens[j].text == "<":
                    depth += 1
                elif tokens[j].text == ">":
                    depth -= 1
                    if depth == 0:
                        j += 1
                        break
                elif tokens[j].text in (";", "{", ")"):
                    break
                j += 1
            else:
                continue
            if depth != 0:
                continue
        while j + 1 < n and tokens[j].text == "[" and tokens[j + 1].text == "]":
            j += 2
        if (j < n and tokens[j].kind is TokenKind.IDENTIFIER
                and j + 1 < n and tokens[j + 1].text in _DECL_FOLLOWERS):
            table.setdefault(tokens[j].text, t.text)
    return table


def abstract_context(raw: RawContext, cap: int | None = DEFAULT_TOKEN_CAP) -> AbstractedContext:
    """Replace identifiers/literals with <kind>Var<n> / <kind>Literal<n>.

    The kind is the declared type name when the scan finds one, else the
    lexical subkind ("id" for identifiers). Placeholders are numbered per
    kind in first-occurrence order and reused for repeated lexemes, so
    de-abstraction through the recorded mapping is exact.
    """
    if raw.scope is ContextScope.UNAVAILABLE:
        raise ValueError("cannot abstract an unavailable context")
    seq = tokenize(raw.source_text, cap)
    types = _declared_types(seq.tokens)

    counters: dict[str, int] = {}
    assigned: dict[tuple[bool, str], str] = {}
    mapping: dict[str, str] = {}
    fallbacks = 0
    out: list[Token] = []
    for t in seq.tokens:
        if t.kind is TokenKind.IDENTIFIER:
            prefix_kind = types.get(t.text)
            if prefix_kind is None:
                prefix_kind = "id"
                fallbacks += 1
            prefix = f"{prefix_kind}Var"
        elif t.kind is TokenKind.LITERAL:
            prefix = f"{t.subkind}Literal"
        else:
            out.append(t)
            continue
        slot = (t.kind is TokenKind.LITERAL, t.text)
        placeholder = assigned.get(slot)
        if placeholder is None:
            counters[prefix] = counters.get(prefix, 0) + 1
            placeholder = f"{prefix}{counters[prefix]}"
            assigned[slot] = placeholder
            mapping[placeholder] = t.text
        out.append(Token(placeholder, t.kind, t.subkind, t.line))

    flags = (f"lexical fallback for {fallbacks} identifier(s)",) if fallbacks else ()
    return AbstractedContext(
        tokens=TokenSequence(tokens=tuple(out), truncated=seq.truncated),
        mapping=mapping,
        flags=flags,
    )


def de_abstract(ctx: AbstractedContext) -> list[str]:
    """Original token texts recovered through the mapping."""
    return [ctx.mapping.get(t.text, t.text) for t in ctx.tokens.tokens]


# ---------------------------------------------------------------------------
# Context dump


def dump_contexts(records: list[dict], path: str | Path) -> int:
    """Write per-chain context records ({"chain", "scope", "raw",
    "abstracted", "truncated", ...}) as JSONL."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return len(records)


def load_contexts(path: str | Path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()]


def context_record(chain_id: str, raw: RawContext,
                   abstracted: AbstractedContext | None,
                   tokens: TokenSequence | None,
                   warning_type: str = "", warning_category: str = "") -> dict:
    return {
        "chain": chain_id,
        "scope": raw.scope.value,
        "method_signature": raw.method_signature,
        "warning_type": warning_type,
        "warning_category": warning_category,
        "raw": raw.source_text,
        "raw_tokens": tokens.texts if tokens is not None else None,
        "abstracted": (render_tokens(abstracted.tokens.texts)
                       if abstracted is not None else None),
        "abstracted_tokens": (abstracted.tokens.texts if abstracted is not None else None),
        "truncated": bool((tokens is not None and tokens.truncated)
                          or (abstracted is not None and abstracted.tokens.truncated)),
        "flags": list(raw.flags) + list(abstracted.flags if abstracted else ()),
    }
