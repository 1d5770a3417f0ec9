"""Freeze reference triples for tests/data/turtle/*.ttl using rdflib as an independent parser.

rdflib is only needed when regenerating; the frozen JSON files are what the tests read.

    python3 scripts/freeze_turtle_goldens.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import rdflib
from rdflib import BNode, Literal, URIRef

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "tests" / "data" / "turtle"
XSD_STRING = "http://www.w3.org/2001/XMLSchema#string"
RDF_LANGSTRING = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString"


def term(t) -> dict:
    if isinstance(t, URIRef):
        return {"iri": str(t)}
    if isinstance(t, BNode):
        raise ValueError("golden inputs must not contain blank nodes")
    assert isinstance(t, Literal)
    if t.language:
        return {"lexical": str(t), "datatype": RDF_LANGSTRING, "language": t.language.lower()}
    return {"lexical": str(t), "datatype": str(t.datatype) if t.datatype else XSD_STRING, "language": None}


def main() -> int:
    rdflib.NORMALIZE_LITERALS = False  # keep lexical forms exactly as written
    for path in sorted(DATA.glob("*.ttl")):
        g = rdflib.Graph()
        g.parse(path, format="turtle")
        triples = sorted(
            ([term(s), term(p), term(o)] for s, p, o in g), key=lambda t: json.dumps(t, sort_keys=True)
        )
        out = path.with_suffix(".triples.json")
        out.write_text(json.dumps(triples, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        print(f"{path.name}: {len(triples)} triples -> {out.name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
