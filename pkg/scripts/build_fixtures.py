"""Record the bundled replay fixtures and golden artifacts for fixtures/aircon20.

The responses come from the scripted catalog agent in tests/catalog_agent.py, so the
recording is reproducible. Run from the repository root:

    python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from catalog_agent import answer_refine, respond  # noqa: E402

from kgforge.agents import CallableBackend, Gateway, RecordBackend  # noqa: E402
from kgforge.cli import cmd_ontology_refine, cmd_run_all  # noqa: E402
from kgforge.config import load_config  # noqa: E402

FIXTURE = ROOT / "fixtures" / "aircon20"
REFINE_CONFIG = """\
base_namespace = "http://example.org/aircon#"

[backend]
kind = "replay"
fixtures_dir = "agents"
"""
GOLDEN_FILES = ("ontology.ttl", "ontology.refined.ttl", "kg.ttl", "report.json")


def main() -> int:
    agents = FIXTURE / "agents"
    shutil.rmtree(agents, ignore_errors=True)
    cfg = load_config(FIXTURE / "kgforge.toml")
    gw = Gateway(RecordBackend(CallableBackend(respond), agents))

    work = ROOT / "build" / "aircon20-record"
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    code = cmd_run_all(cfg, work, "json", gw)
    if code:
        print(f"recording run exited with {code}", file=sys.stderr)
        return code

    golden = FIXTURE / "golden"
    golden.mkdir(exist_ok=True)
    for name in GOLDEN_FILES:
        shutil.copyfile(work / name, golden / name)
    print(f"{len(list(agents.glob('*.json')))} fixtures in {agents}; goldens in {golden}")

    # refinement fixtures: the recorded ontology, refined once with a split and once with a silent drop
    for name, drop in (("refine_split", ()), ("refine_drop", ("priceEur", "warrantyYears"))):
        target = ROOT / "fixtures" / name
        shutil.rmtree(target, ignore_errors=True)
        target.mkdir(parents=True)
        shutil.copyfile(golden / "ontology.ttl", target / "ontology.ttl")
        (target / "kgforge.toml").write_text(REFINE_CONFIG, encoding="utf-8")
        cfg = load_config(target / "kgforge.toml")
        gw = Gateway(RecordBackend(CallableBackend(lambda req, d=drop: answer_refine(req.rendered_prompt, d)), target / "agents"))
        work = ROOT / "build" / name
        shutil.rmtree(work, ignore_errors=True)
        work.mkdir(parents=True)
        shutil.copyfile(golden / "ontology.ttl", work / "ontology.ttl")
        print(f"{name}: exit {cmd_ontology_refine(cfg, work, gw)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
