from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
ROOT = TESTS.parent
FIXTURES = ROOT / "fixtures"
sys.path.insert(0, str(TESTS))


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def catalog_replay(target: Path) -> Path:
    """Record the scripted catalog answers as digest-keyed replay fixtures under ``target``."""
    from kgforge.agents import CallableBackend, Gateway, RecordBackend
    from kgforge.corpus import load_corpus
    from kgforge.ontology import ontology_from_graph
    from kgforge.rdf import parse_turtle
    from kgforge.stages import PopulationConfig, populate_corpus

    src = FIXTURES / "catalog291"
    answers = {}
    for line in (src / "answers.jsonl").read_text(encoding="utf-8").splitlines():
        row = json.loads(line)
        answers[row["product_id"]] = row["text"]

    def answer(req):
        return answers[re.search(r"Product id: (\S+)", req.rendered_prompt).group(1)]

    onto, _ = ontology_from_graph(parse_turtle((src / "ontology.ttl").read_text(encoding="utf-8")))
    cfg = PopulationConfig(instance_base="http://example.org/catalog/product/", max_attempts=1)
    populate_corpus(load_corpus(src / "corpus.jsonl"), onto, Gateway(RecordBackend(CallableBackend(answer), target)), cfg)
    return target


@pytest.fixture(scope="session")
def catalog_agents(tmp_path_factory) -> Path:
    return catalog_replay(tmp_path_factory.mktemp("catalog-agents"))
