"""Check hand-written triples against a small shop ontology, leniently and strictly.

    python demos/conformance_check.py
"""

from __future__ import annotations

from pathlib import Path

from kgforge.ontology import Severity, ontology_from_graph
from kgforge.rdf import parse_turtle
from kgforge.stages import ConformanceMode, triple_to_text, validate_triples

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures" / "conformance"


def main() -> None:
    onto, _ = ontology_from_graph(parse_turtle((FIXTURES / "ontology.ttl").read_text(encoding="utf-8")))
    graph = parse_turtle((FIXTURES / "adversarial.ttl").read_text(encoding="utf-8"))
    print(f"{len(graph)} triples against {len(onto.classes)} classes and {len(onto.properties)} properties\n")
    for mode in ConformanceMode:
        issues = validate_triples(list(graph), onto, mode=mode)
        print(f"{mode.value}:")
        for issue in issues:
            print(f"  {issue.severity.value:<7} {issue.code.value:<16} {triple_to_text(issue.triple)}")
        kept = len(graph) - sum(issue.severity is Severity.ERROR for issue in issues)
        print(f"  -> {kept} triples would be kept\n")


if __name__ == "__main__":
    main()
