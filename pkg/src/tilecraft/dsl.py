"""Text format for tiling specs.

One statement per concern, order free, comments run from '#' to end of line:

    set width = 64
    image I1 prompt "mossy stone wall"
    image I2 prompt "mossy stone wall, doorway" init "door.png"
    tile C1: {I1.right, I2.right} ~ {I1.left, I2.left} w = 16

parse() accepts CRLF or LF input and recovers at statement boundaries so one
bad line does not mask errors further down. serialize() writes the canonical
form: settings, images and constraints each sorted by name, the context
window always explicit, LF line endings.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constraints import (
    Constraint,
    ConstraintSpec,
    DEFAULT_WINDOW,
    ImageSlot,
    Side,
    SideRef,
    ValidatedSpec,
)

_KEYWORDS = ("image", "tile", "set")
_SIDES = {s.value: s for s in Side}


@dataclass(frozen=True)
class ParseError:
    """One diagnostic. line/col are 1-based; length is the span in chars."""

    kind: str  # "lex" | "syntax" | "reference"
    message: str
    line: int
    col: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.kind} error: {self.message}"


class TileSpecParseError(Exception):
    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident" | "int" | "string" | "punct" | "eof"
    text: str
    value: object
    line: int
    col: int
    first_on_line: bool

    @property
    def length(self) -> int:
        return max(1, len(self.text))


def _lex(text: str, errors: list[ParseError]) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    line_had_token = False

    def push(kind, text_, value, tline, tcol):
        nonlocal line_had_token
        tokens.append(_Token(kind, text_, value, tline, tcol, not line_had_token))
        line_had_token = True

    while i < n:
        ch = text[i]
        if ch == "\r":  # CRLF input is accepted, only LF is ever emitted
            i += 1
            continue
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            line_had_token = False
            continue
        if ch in " \t":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "{},~.:=":
            push("punct", ch, ch, line, col)
            i += 1
            col += 1
            continue
        if ch == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            out: list[str] = []
            raw_len = 1
            terminated = False
            while i < n and text[i] not in "\n\r":
                c = text[i]
                raw_len += 1
                if c == '"':
                    i += 1
                    col += 1
                    terminated = True
                    break
                if c == "\\":
                    if i + 1 < n and text[i + 1] not in "\n\r":
                        esc = text[i + 1]
                        out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                        i += 2
                        col += 2
                        raw_len += 1
                        continue
                out.append(c)
                i += 1
                col += 1
            if not terminated:
                errors.append(ParseError("lex", "unterminated string", start_line, start_col, raw_len))
            push("string", text[i - raw_len:i], "".join(out), start_line, start_col)
            continue
        if ch.isdigit():
            start_col = col
            j = i
            while j < n and text[j].isdigit():
                j += 1
            push("int", text[i:j], int(text[i:j]), line, start_col)
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            start_col = col
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            push("ident", text[i:j], text[i:j], line, start_col)
            col += j - i
            i = j
            continue
        errors.append(ParseError("lex", f"unexpected character {ch!r}", line, col, 1))
        i += 1
        col += 1

    tokens.append(_Token("eof", "", None, line, col, not line_had_token))
    return tokens


class _Bail(Exception):
    """Internal: abandon the current statement and resynchronize."""


class _Parser:
    def __init__(self, tokens: list[_Token], errors: list[ParseError]):
        self.toks = tokens
        self.pos = 0
        self.errors = errors
        self.images: list[ImageSlot] = []
        self.image_spans: dict[str, _Token] = {}
        self.constraints: list[Constraint] = []
        self.constraint_spans: dict[str, _Token] = {}
        self.settings: list[tuple[str, int | str]] = []
        self.side_refs: list[tuple[SideRef, _Token]] = []

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def take(self) -> _Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def fail(self, message: str, tok: _Token | None = None):
        tok = tok or self.peek()
        shown = repr(tok.text) if tok.kind != "eof" else "end of input"
        self.errors.append(ParseError("syntax", f"{message}, got {shown}", tok.line, tok.col, tok.length))
        raise _Bail

    def expect_punct(self, ch: str) -> _Token:
        t = self.peek()
        if t.kind == "punct" and t.text == ch:
            return self.take()
        self.fail(f"expected {ch!r}")

    def expect_ident(self, what: str) -> _Token:
        t = self.peek()
        if t.kind == "ident":
            return self.take()
        self.fail(f"expected {what}")

    def expect_keyword(self, word: str) -> _Token:
        t = self.peek()
        if t.kind == "ident" and t.text == word:
            return self.take()
        self.fail(f"expected {word!r}")

    def sync(self):
        """Skip to the next line-initial statement keyword."""
        while True:
            t = self.peek()
            if t.kind == "eof":
                return
            if t.first_on_line and t.kind == "ident" and t.text in _KEYWORDS:
                return
            self.take()

    def run(self):
        while True:
            t = self.peek()
            if t.kind == "eof":
                return
            try:
                if t.kind == "ident" and t.text == "image":
                    self.image_stmt()
                elif t.kind == "ident" and t.text == "tile":
                    self.constr_stmt()
                elif t.kind == "ident" and t.text == "set":
                    self.setting_stmt()
                else:
                    self.fail("expected a statement (image, tile or set)")
            except _Bail:
                self.sync()

    def image_stmt(self):
        self.take()  # image
        name = self.expect_ident("an image id")
        self.expect_keyword("prompt")
        t = self.peek()
        if t.kind != "string":
            self.fail("expected a quoted prompt")
        prompt = self.take().value
        init = None
        if self.peek().kind == "ident" and self.peek().text == "init":
            self.take()
            t = self.peek()
            if t.kind != "string":
                self.fail("expected a quoted init path")
            init = self.take().value
        if name.text in self.image_spans:
            self.errors.append(ParseError("reference", f"image {name.text!r} already declared",
                                          name.line, name.col, name.length))
            return
        self.image_spans[name.text] = name
        self.images.append(ImageSlot(id=name.text, prompt=prompt, init=init))

    def sideset(self) -> tuple[SideRef, ...]:
        self.expect_punct("{")
        refs: list[SideRef] = []
        while True:
            img = self.expect_ident("an image id")
            self.expect_punct(".")
            side_tok = self.expect_ident("a side (left, right, top or bottom)")
            side = _SIDES.get(side_tok.text)
            if side is None:
                self.errors.append(ParseError("syntax", f"unknown side {side_tok.text!r}",
                                              side_tok.line, side_tok.col, side_tok.length))
                raise _Bail
            ref = SideRef(img.text, side)
            refs.append(ref)
            self.side_refs.append((ref, img))
            t = self.peek()
            if t.kind == "punct" and t.text == ",":
                self.take()
                continue
            break
        self.expect_punct("}")
        return tuple(refs)

    def constr_stmt(self):
        self.take()  # tile
        name = self.expect_ident("a constraint id")
        self.expect_punct(":")
        set_a = self.sideset()
        self.expect_punct("~")
        set_b = self.sideset()
        window = DEFAULT_WINDOW
        if self.peek().kind == "ident" and self.peek().text == "w":
            self.take()
            self.expect_punct("=")
            t = self.peek()
            if t.kind != "int":
                self.fail("expected an integer window width")
            window = self.take().value
        if name.text in self.constraint_spans:
            self.errors.append(ParseError("reference", f"constraint {name.text!r} already declared",
                                          name.line, name.col, name.length))
            return
        self.constraint_spans[name.text] = name
        self.constraints.append(Constraint(id=name.text, set_a=set_a, set_b=set_b, window=window))

    def setting_stmt(self):
        self.take()  # set
        name = self.expect_ident("a setting name")
        self.expect_punct("=")
        t = self.peek()
        if t.kind not in ("int", "string", "ident"):
            self.fail("expected a value")
        value = self.take().value
        self.settings.append((name.text, value))


def parse(text: str) -> ConstraintSpec:
    """Parse spec text. Raises TileSpecParseError listing every diagnostic."""
    return parse_with_spans(text)[0]


def parse_with_spans(text: str) -> tuple[ConstraintSpec, dict[str, tuple[int, int, int]]]:
    """Parse and also return the (line, col, length) span of each declared
    image and constraint id, so later validation diagnostics can point back
    into the source text."""
    errors: list[ParseError] = []
    parser = _Parser(_lex(text, errors), errors)
    parser.run()
    declared = set(parser.image_spans)
    for ref, tok in parser.side_refs:
        if ref.image not in declared:
            errors.append(ParseError("reference", f"unknown image {ref.image!r}",
                                     tok.line, tok.col, tok.length))
    if errors:
        raise TileSpecParseError(sorted(errors, key=lambda e: (e.line, e.col)))
    spans = {name: (tok.line, tok.col, tok.length)
             for name, tok in list(parser.image_spans.items()) +
             list(parser.constraint_spans.items())}
    return ConstraintSpec(
        images=tuple(parser.images),
        constraints=tuple(parser.constraints),
        settings=tuple(parser.settings),
    ), spans


def _quote(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{out}"'


def serialize(spec: ConstraintSpec | ValidatedSpec) -> str:
    """Canonical text for a spec; parse(serialize(s)) reproduces s exactly
    when s is already in canonical (validated) order."""
    if isinstance(spec, ValidatedSpec):
        spec = spec.spec
    lines: list[str] = []
    for key, value in sorted(spec.settings, key=lambda kv: kv[0]):
        rendered = str(value) if isinstance(value, int) else (
            value if isinstance(value, str) and _is_ident(value) else _quote(str(value)))
        lines.append(f"set {key} = {rendered}")
    for slot in sorted(spec.images, key=lambda s: s.id):
        stmt = f"image {slot.id} prompt {_quote(slot.prompt or '')}"
        if slot.init is not None:
            stmt += f" init {_quote(slot.init)}"
        lines.append(stmt)
    for c in sorted(spec.constraints, key=lambda c: c.id):
        a = ", ".join(str(r) for r in c.set_a)
        b = ", ".join(str(r) for r in c.set_b)
        lines.append(f"tile {c.id}: {{{a}}} ~ {{{b}}} w = {c.window}")
    return "\n".join(lines) + "\n" if lines else ""


def _is_ident(s: str) -> bool:
    return bool(s) and (s[0].isalpha() or s[0] == "_") and all(c.isalnum() or c == "_" for c in s)
