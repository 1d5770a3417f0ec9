from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from strategies import graphs

from kgforge.rdf import (
    RDF_LANGSTRING,
    RDF_TYPE,
    XSD,
    XSD_STRING,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Triple,
    TurtleSyntaxError,
    graph_union,
    parse_turtle,
    serialize_turtle,
)

DATA = Path(__file__).parent / "data" / "turtle"
EX = "http://example.org/ns#"


def ex(name: str) -> Iri:
    return Iri(EX + name)


def _as_json_term(t) -> dict:
    if isinstance(t, Iri):
        return {"iri": t.value}
    return {"lexical": t.lexical, "datatype": t.datatype.value, "language": t.language}


# ------------------------------------------------------------------ terms


def test_iri_rejects_whitespace_and_brackets():
    for bad in ["http://x y", "http://x<y>", "", 'http://"q"']:
        with pytest.raises(ValueError):
            Iri(bad)


def test_iri_local_name_and_namespace():
    assert ex("Thing").local_name == "Thing"
    assert ex("Thing").namespace == EX
    assert Iri("http://example.org/a/b").local_name == "b"


def test_language_literal_is_lang_string_and_lowercased():
    lit = Literal("colour", language="en-GB")
    assert lit.language == "en-gb"
    assert lit.datatype == RDF_LANGSTRING


def test_plain_literal_defaults_to_xsd_string():
    assert Literal("x").datatype == XSD_STRING


def test_blank_node_label_validation():
    assert BlankNode("b1").n3() == "_:b1"
    with pytest.raises(ValueError):
        BlankNode("has space")


def test_literal_in_subject_position_rejected():
    with pytest.raises((TypeError, ValueError)):
        Triple(Literal("x"), ex("p"), ex("o"))


# ------------------------------------------------------------------ graph


def test_graph_has_set_semantics():
    g = Graph()
    t = Triple(ex("s"), ex("p"), Literal("o"))
    g.add(t)
    g.add(t)
    assert len(g) == 1


def test_match_with_wildcards():
    g = Graph()
    g.add(Triple(ex("s"), ex("p"), ex("o1")))
    g.add(Triple(ex("s"), ex("p"), ex("o2")))
    g.add(Triple(ex("t"), ex("q"), ex("o1")))
    assert len(list(g.match(ex("s")))) == 2
    assert len(list(g.match(None, None, ex("o1")))) == 2
    assert list(g.match(ex("t"), ex("p"))) == []


def test_graph_equality_ignores_prefixes():
    a = parse_turtle(f"@prefix ex: <{EX}> . ex:s ex:p ex:o .")
    b = parse_turtle(f"<{EX}s> <{EX}p> <{EX}o> .")
    assert a == b


def test_union_renames_clashing_prefix_label():
    a = parse_turtle("@prefix ex: <http://a.org/> . ex:s ex:p ex:o .")
    b = parse_turtle("@prefix ex: <http://b.org/> . ex:s ex:p ex:o .")
    u = graph_union(a, b)
    assert len(u) == 2
    assert set(u.prefixes.values()) == {"http://a.org/", "http://b.org/"}
    assert u.prefixes["ex"] == "http://a.org/"


@settings(max_examples=200, deadline=None)
@given(graphs(), graphs())
def test_union_is_commutative_and_idempotent(a, b):
    assert graph_union(a, b) == graph_union(b, a)
    assert graph_union(a, a) == a
    assert len(graph_union(a, b)) <= len(a) + len(b)


# ------------------------------------------------------------------ parser


def test_parse_statement_lists_and_keyword_a():
    g = parse_turtle(
        f"""@prefix ex: <{EX}> .
        ex:s a ex:C ; ex:p "v" , "w" ; ."""
    )
    assert Triple(ex("s"), RDF_TYPE, ex("C")) in g
    assert set(g.objects(ex("s"), ex("p"))) == {Literal("v"), Literal("w")}


def test_parse_numbers_and_booleans():
    g = parse_turtle(f"@prefix ex: <{EX}> . ex:s ex:i -3 ; ex:d 2.50 ; ex:b true .")
    assert Literal("-3", Iri(XSD + "integer")) in g.objects(ex("s"), ex("i"))
    assert Literal("2.50", Iri(XSD + "decimal")) in g.objects(ex("s"), ex("d"))
    assert Literal("true", Iri(XSD + "boolean")) in g.objects(ex("s"), ex("b"))


def test_numeric_lexical_forms_are_kept_as_written():
    g = parse_turtle(f"<{EX}s> <{EX}p> .75 ; <{EX}q> +5 .")
    assert g.objects(ex("s"), ex("p")) == [Literal(".75", Iri(XSD + "decimal"))]
    assert g.objects(ex("s"), ex("q")) == [Literal("+5", Iri(XSD + "integer"))]


def test_parse_string_escapes():
    g = parse_turtle(f'<{EX}s> <{EX}p> "a\\tb\\u00e9\\"" .')
    assert g.objects(ex("s"), ex("p")) == [Literal('a\tbé"')]


@pytest.mark.parametrize(
    "text,line,col",
    [
        ("@prefix ex: <http://x.org/> .\nex:s ex:p [ ex:q 1 ] .", 2, 11),
        ("@prefix ex: <http://x.org/> .\nex:s ex:p ( 1 2 ) .", 2, 11),
        ("<http://x.org/s> <http://x.org/p> 1.5e3 .", 1, 35),
        ("@base <http://x.org/> .", 1, 1),
        ("<s> <http://x.org/p> 1 .", 1, 1),
        ("ex:s <http://x.org/p> 1 .", 1, 1),
        ('<http://x.org/s> <http://x.org/p> "open', 1, 35),
        ("<http://x.org/s> <http://x.org/p> <http://x.org/o>", 1, 51),
    ],
)
def test_syntax_errors_report_first_position(text, line, col):
    with pytest.raises(TurtleSyntaxError) as info:
        parse_turtle(text)
    assert (info.value.line, info.value.column) == (line, col)


def test_syntax_error_is_value_error_with_message():
    with pytest.raises(ValueError, match="line 1"):
        parse_turtle("@prefix ex <http://x.org/> .")


@pytest.mark.parametrize("name", sorted(p.stem for p in DATA.glob("*.ttl")))
def test_parser_agrees_with_reference_triples(name):
    # reference triples were produced once by an independent parser
    expected = json.loads((DATA / f"{name}.triples.json").read_text(encoding="utf-8"))
    g = parse_turtle((DATA / f"{name}.ttl").read_text(encoding="utf-8"))
    got = sorted(
        ([_as_json_term(t.subject), _as_json_term(t.predicate), _as_json_term(t.object)] for t in g),
        key=lambda t: json.dumps(t, sort_keys=True),
    )
    assert got == expected


# ------------------------------------------------------------------ serializer


def test_empty_graph_serializes_to_empty_string():
    assert serialize_turtle(Graph()) == ""


def test_serializer_output_is_canonical():
    g = parse_turtle(
        f"""@prefix ex: <{EX}> .
        @prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
        ex:b ex:z "two" , "one" ; a ex:T ; rdfs:label "B"@EN .
        ex:a ex:n 7 ; ex:d 1.5 ; ex:flag false ; ex:x <http://other.org/o> ; ex:bn _:k .
        _:k ex:note "line\\nbreak" ."""
    )
    expected = (
        "@prefix ex: <http://example.org/ns#> .\n"
        "@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n"
        "\n"
        "_:k ex:note \"line\\nbreak\" .\n"
        "\n"
        "ex:a ex:bn _:k ;\n"
        "    ex:d 1.5 ;\n"
        "    ex:flag false ;\n"
        "    ex:n 7 ;\n"
        "    ex:x <http://other.org/o> .\n"
        "\n"
        "ex:b a ex:T ;\n"
        "    ex:z \"one\" ,\n"
        "        \"two\" ;\n"
        "    rdfs:label \"B\"@en .\n"
    )
    assert serialize_turtle(g) == expected


def test_serializer_ignores_insertion_order():
    ts = [Triple(ex(f"s{i % 3}"), ex(f"p{i % 2}"), Literal(str(i))) for i in range(10)]
    a, b = Graph(), Graph()
    for t in ts:
        a.add(t)
    for t in reversed(ts):
        b.add(t)
    assert serialize_turtle(a) == serialize_turtle(b)


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_round_trip(g):
    text = serialize_turtle(g)
    assert parse_turtle(text) == g
    assert serialize_turtle(parse_turtle(text)) == text
