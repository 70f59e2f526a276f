"""Spec text: lexing, parsing, diagnostics, canonical serialization."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tilecraft.constraints import Constraint, ConstraintSpec, ImageSlot, Side, SideRef, validate
from tilecraft.dsl import TileSpecParseError, parse, parse_with_spans, serialize

GOOD = '''\
set width = 64
set height = 64
image I1 prompt "a forest"
image I2 prompt "mossy stones" init "seed.png"
tile C1: {I1.right} ~ {I2.left} w = 12
tile C2: {I1.right, I2.right} ~ {I1.left, I2.left}
'''


def test_parse_structure():
    spec = parse(GOOD)
    assert spec.images == (
        ImageSlot("I1", "a forest", None),
        ImageSlot("I2", "mossy stones", "seed.png"),
    )
    assert spec.constraints[0] == Constraint(
        "C1", (SideRef("I1", Side.RIGHT),), (SideRef("I2", Side.LEFT),), 12)
    assert spec.constraints[1].window == 16  # default fills in
    assert len(spec.constraints[1].set_a) == 2
    assert spec.settings == (("width", 64), ("height", 64))


def test_parse_crlf_and_comments():
    text = 'set width = 32\r\n# a comment line\r\nimage I1 prompt "x" # trailing\r\n'
    spec = parse(text)
    assert spec.images == (ImageSlot("I1", "x", None),)
    assert spec.setting("width") == 32


def test_string_escapes_round_trip():
    prompt = 'quote " backslash \\ newline \n tab \t end'
    spec = ConstraintSpec(images=(ImageSlot("I1", prompt),),
                          settings=(("width", 8), ("height", 8)))
    again = parse(serialize(validate(spec).spec))
    assert again.images[0].prompt == prompt


def test_empty_document():
    assert parse("") == ConstraintSpec()
    assert serialize(ConstraintSpec()) == ""
    assert parse(serialize(ConstraintSpec())) == ConstraintSpec()


def _errors(text: str):
    with pytest.raises(TileSpecParseError) as ei:
        parse(text)
    return ei.value.errors


def test_unknown_image_span():
    # I9 starts at line 2, column 11
    errs = _errors('image I1 prompt "x"\ntile C1: {I9.right} ~ {I1.left}\n')
    assert [(e.kind, e.line, e.col, e.length) for e in errs] == [("reference", 2, 11, 2)]
    assert "I9" in errs[0].message


def test_unterminated_string():
    errs = _errors('image I1 prompt "oops\n')
    assert errs[0].kind == "lex"
    assert (errs[0].line, errs[0].col) == (1, 17)


def test_unknown_side_span():
    errs = _errors('image I1 prompt "x"\ntile C1: {I1.up} ~ {I1.left}\n')
    assert errs[0].kind == "syntax"
    assert (errs[0].line, errs[0].col, errs[0].length) == (2, 14, 2)


def test_duplicate_declarations():
    errs = _errors('image I1 prompt "a"\nimage I1 prompt "b"\n')
    assert [(e.kind, e.line, e.col) for e in errs] == [("reference", 2, 7)]
    errs = _errors('image I1 prompt "a"\n'
                   'tile C1: {I1.right} ~ {I1.left}\n'
                   'tile C1: {I1.top} ~ {I1.bottom}\n')
    assert [(e.kind, e.line) for e in errs] == [("reference", 3)]


def test_recovery_reports_multiple_errors():
    text = ('image prompt "missing name"\n'
            'image I1 prompt "ok"\n'
            'tile C1: {I1.up} ~ {I1.left}\n'
            'tile C2: {I1.right} ~ {I1.left}\n'
            'bogus statement\n')
    errs = _errors(text)
    assert len(errs) == 3
    assert [e.line for e in errs] == [1, 3, 5]  # sorted by position
    # forward reference is not an error: C2 on line 4 parsed fine despite neighbors


def test_forward_reference_allowed():
    spec = parse('tile C1: {I1.right} ~ {I1.left}\nimage I1 prompt "later"\n')
    assert spec.constraints[0].set_a[0].image == "I1"


def test_error_spans_inside_text():
    text = 'image I1 prompt "x"\ntile C1: {I1.right ~ {I1.left}\nset = 3\n'
    lines = text.split("\n")
    with pytest.raises(TileSpecParseError) as ei:
        parse(text)
    for e in ei.value.errors:
        assert 1 <= e.line <= len(lines)
        assert 1 <= e.col <= len(lines[e.line - 1]) + 1
        assert e.length >= 1


def test_parse_with_spans_records_declarations():
    _, spans = parse_with_spans(GOOD)
    assert spans["I1"] == (3, 7, 2)
    assert spans["C1"] == (5, 6, 2)


def test_serialize_canonical_and_stable():
    spec = ConstraintSpec(
        images=(ImageSlot("Z", "z"), ImageSlot("A", "a")),
        constraints=(Constraint("B2", (SideRef("Z", Side.RIGHT),),
                                (SideRef("A", Side.LEFT),)),),
        settings=(("width", 32), ("height", 32), ("note", "plain"), ("qq", "two words")),
    )
    text = serialize(validate(spec).spec)
    assert text == ('set height = 32\n'
                    'set note = plain\n'
                    'set qq = "two words"\n'
                    'set width = 32\n'
                    'image A prompt "a"\n'
                    'image Z prompt "z"\n'
                    'tile B2: {Z.right} ~ {A.left} w = 16\n')
    assert serialize(validate(parse(text)).spec) == text  # fixpoint


_ident = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True).filter(
    lambda s: s not in ("image", "tile", "set", "prompt", "init", "w",
                        "left", "right", "top", "bottom"))
_text = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\r"),
                max_size=20)
_side = st.sampled_from(list(Side))


@st.composite
def _specs(draw):
    image_ids = draw(st.lists(_ident, min_size=1, max_size=4, unique=True))
    images = tuple(ImageSlot(i, draw(_text), draw(st.none() | _text.filter(bool)))
                   for i in image_ids)
    cids = draw(st.lists(_ident, min_size=0, max_size=3, unique=True))
    constraints = []
    for cid in cids:
        set_a = draw(st.lists(st.tuples(st.sampled_from(image_ids), _side),
                              min_size=1, max_size=2, unique=True))
        set_b = draw(st.lists(st.tuples(st.sampled_from(image_ids), _side),
                              min_size=1, max_size=2, unique=True))
        w = draw(st.integers(min_value=0, max_value=31))
        constraints.append(Constraint(cid, tuple(SideRef(*r) for r in set_a),
                                      tuple(SideRef(*r) for r in set_b), w))
    return ConstraintSpec(images=images, constraints=tuple(constraints),
                          settings=(("depth", 1), ("height", 64), ("width", 64)))


@given(_specs())
def test_round_trip_property(spec):
    """parse(serialize(s)) == s for canonically ordered specs."""
    try:
        canonical = validate(spec).spec
    except Exception:
        return  # generator may produce e.g. cross-axis sets; round trip needs valid specs
    assert parse(serialize(canonical)) == canonical
