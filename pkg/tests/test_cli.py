from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from kgforge.agents import CallableBackend, Gateway, RecordBackend
from kgforge.cli import EXIT_CONFIG, EXIT_OK, EXIT_REJECTED, EXIT_STAGE, cmd_ontology_build, cmd_populate, main
from kgforge.config import ConfigError, build_config, load_config
from kgforge.rdf import parse_turtle

ROOT = Path(__file__).resolve().parents[1]
FIX = ROOT / "fixtures"
AIRCON = FIX / "aircon20"
CONFIG = str(AIRCON / "kgforge.toml")


def run(*argv: str) -> int:
    return main(list(argv))


def test_run_all_matches_goldens(tmp_path, capsys):
    assert run("run-all", "--config", CONFIG, "--run-dir", str(tmp_path)) == EXIT_OK
    for name in ("ontology.ttl", "ontology.refined.ttl", "kg.ttl", "report.json"):
        assert (tmp_path / name).read_bytes() == (AIRCON / "golden" / name).read_bytes(), name
    out = capsys.readouterr().out
    assert "products: 19/20 succeeded" in out
    assert "coverage: 100.0%" in out


def test_stage_by_stage_equals_run_all(tmp_path, capsys):
    d = str(tmp_path)
    assert run("ontology", "build", "--config", CONFIG, "--run-dir", d) == EXIT_OK
    assert run("ontology", "refine", "--config", CONFIG, "--run-dir", d) == EXIT_OK
    assert run("populate", "--config", CONFIG, "--run-dir", d) == EXIT_OK
    capsys.readouterr()
    assert run("report", "--config", CONFIG, "--run-dir", d, "--format", "json") == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads((tmp_path / "report.json").read_text())
    assert (tmp_path / "kg.ttl").read_bytes() == (AIRCON / "golden" / "kg.ttl").read_bytes()
    trace = json.loads((tmp_path / "trace.json").read_text())
    assert trace["traces"][0]["stop_reason"] == "plateau"


def test_text_report_agrees_with_json(tmp_path, capsys):
    run("run-all", "--config", CONFIG, "--run-dir", str(tmp_path))
    capsys.readouterr()
    run("report", "--config", CONFIG, "--run-dir", str(tmp_path))
    text = capsys.readouterr().out
    report = json.loads((tmp_path / "report.json").read_text())
    assert f"({report['properties_instantiated']}/{report['properties_total']} properties instantiated)" in text
    assert f"triples: {report['triples_total']}" in text


def test_default_run_dir_is_timestamped_and_reused(tmp_path):
    out = tmp_path / "runs"
    assert run("ontology", "build", "--config", CONFIG, "--output-dir", str(out)) == EXIT_OK
    runs = list(out.iterdir())
    assert len(runs) == 1 and (runs[0] / "ontology.ttl").is_file()
    assert run("ontology", "refine", "--config", CONFIG, "--output-dir", str(out)) == EXIT_OK
    assert (runs[0] / "ontology.refined.ttl").is_file()


def test_flags_after_subcommand_and_before(tmp_path):
    assert run("--config", CONFIG, "ontology", "build", "--run-dir", str(tmp_path)) == EXIT_OK


def test_missing_corpus_names_the_path(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    assert run("ontology", "build", "--config", CONFIG, "--corpus", str(missing), "--run-dir", str(tmp_path)) == EXIT_CONFIG
    assert str(missing) in capsys.readouterr().err


def test_malformed_corpus_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "category": "c", "description": "d"}\n{oops\n', encoding="utf-8")
    assert run("ontology", "build", "--config", CONFIG, "--corpus", str(bad), "--run-dir", str(tmp_path)) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_bootstrap_failure_exits_2(tmp_path, capsys):
    agents = tmp_path / "agents"
    cfg = load_config(AIRCON / "kgforge.toml")
    recorder = Gateway(RecordBackend(CallableBackend(lambda req: "I would rather not."), agents))
    with pytest.raises(Exception):
        cmd_ontology_build(cfg, tmp_path, recorder)
    code = run("ontology", "build", "--config", CONFIG, "--fixtures-dir", str(agents), "--run-dir", str(tmp_path))
    assert code == EXIT_STAGE
    assert "InvalidRDF" in capsys.readouterr().err


def test_missing_replay_fixture_exits_2(tmp_path, capsys):
    empty = tmp_path / "agents"
    empty.mkdir()
    assert run("ontology", "build", "--config", CONFIG, "--fixtures-dir", str(empty), "--run-dir", str(tmp_path)) == EXIT_STAGE
    assert "no recorded response" in capsys.readouterr().err


def test_missing_fixtures_dir_is_config_error(tmp_path):
    code = run("ontology", "build", "--config", CONFIG, "--fixtures-dir", str(tmp_path / "absent"), "--run-dir", str(tmp_path))
    assert code == EXIT_CONFIG


def _refine_fixture(name: str, run_dir: Path) -> list[str]:
    shutil.copyfile(FIX / name / "ontology.ttl", run_dir / "ontology.ttl")
    return ["ontology", "refine", "--config", str(FIX / name / "kgforge.toml"), "--run-dir", str(run_dir)]


def test_refine_split_fixture(tmp_path):
    assert run(*_refine_fixture("refine_split", tmp_path)) == EXIT_OK
    report = json.loads((tmp_path / "refinement.json").read_text())
    assert (report["diff"]["summary"]["removed"], report["diff"]["summary"]["added"]) == (1, 3)
    assert len(report["rename_map"]["http://example.org/aircon#dimensions"]) == 3


def test_refine_drop_fixture_is_rejected(tmp_path, capsys):
    before = (FIX / "refine_drop" / "ontology.ttl").read_bytes()
    assert run(*_refine_fixture("refine_drop", tmp_path)) == EXIT_REJECTED
    assert (tmp_path / "ontology.ttl").read_bytes() == before
    assert not (tmp_path / "ontology.refined.ttl").exists()
    assert "--allow-drops" in capsys.readouterr().err
    assert run(*_refine_fixture("refine_drop", tmp_path), "--allow-drops") == EXIT_OK
    assert (tmp_path / "ontology.refined.ttl").exists()


def test_identity_refinement_round_trips(tmp_path):
    src = AIRCON / "golden" / "ontology.ttl"
    shutil.copyfile(src, tmp_path / "ontology.ttl")
    from kgforge.cli import cmd_ontology_refine

    cfg = load_config(AIRCON / "kgforge.toml")
    text = src.read_text(encoding="utf-8")
    gw = Gateway(CallableBackend(lambda req: "```turtle\n" + text + "```"))
    assert cmd_ontology_refine(cfg, tmp_path, gw) == EXIT_OK
    assert parse_turtle((tmp_path / "ontology.refined.ttl").read_text()) == parse_turtle(text)


def test_refine_without_ontology_is_config_error(tmp_path):
    assert run("ontology", "refine", "--config", CONFIG, "--run-dir", str(tmp_path)) == EXIT_CONFIG


def test_populate_empty_corpus(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    shutil.copyfile(AIRCON / "golden" / "ontology.ttl", tmp_path / "ontology.ttl")
    assert run("populate", "--config", CONFIG, "--corpus", str(empty), "--run-dir", str(tmp_path)) == EXIT_OK
    assert len(parse_turtle((tmp_path / "kg.ttl").read_text())) == 0


def test_populate_all_malformed_exits_2(tmp_path):
    shutil.copyfile(AIRCON / "golden" / "ontology.ttl", tmp_path / "ontology.ttl")
    cfg = load_config(AIRCON / "kgforge.toml")
    assert cmd_populate(cfg, tmp_path, Gateway(CallableBackend(lambda req: "nope"))) == EXIT_STAGE
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["products_succeeded"] == 0


def test_report_missing_kg_exits_1(tmp_path, capsys):
    (tmp_path / "results.json").write_text('{"results": []}', encoding="utf-8")
    assert run("report", "--config", CONFIG, "--run-dir", str(tmp_path)) == EXIT_CONFIG
    assert "kg.ttl" in capsys.readouterr().err


def test_validate_command(tmp_path, capsys):
    assert run("validate", str(AIRCON / "golden" / "ontology.refined.ttl")) == EXIT_OK
    broken = tmp_path / "broken.ttl"
    broken.write_text("@prefix ex: <http://x/> .\nex:s ex:p", encoding="utf-8")
    assert run("validate", str(broken)) == EXIT_STAGE
    assert "line 2" in capsys.readouterr().err
    adversarial = str(FIX / "conformance" / "adversarial.ttl")
    against = str(FIX / "conformance" / "ontology.ttl")
    assert run("validate", adversarial, "--against", against) == EXIT_OK
    assert run("validate", adversarial, "--against", against, "--strict") == EXIT_STAGE
    assert run("validate", str(tmp_path / "missing.ttl")) == EXIT_CONFIG


def test_http_backend_needs_key(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("KGFORGE_API_KEY", raising=False)
    code = run("ontology", "build", "--config", CONFIG, "--backend", "http", "--model", "m", "--run-dir", str(tmp_path))
    assert code == EXIT_CONFIG
    assert "KGFORGE_API_KEY" in capsys.readouterr().err


def test_bad_config_values(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('unknown_key = 1\n', encoding="utf-8")
    assert run("ontology", "build", "--config", str(cfg), "--run-dir", str(tmp_path)) == EXIT_CONFIG
    cfg.write_text('not toml [', encoding="utf-8")
    assert run("ontology", "build", "--config", str(cfg), "--run-dir", str(tmp_path)) == EXIT_CONFIG
    assert run("ontology", "build", "--config", str(tmp_path / "absent.toml")) == EXIT_CONFIG


def test_config_layering(tmp_path):
    cfg = build_config(
        {"corpus_path": "c.jsonl", "expansion": {"batch_size": 3, "sample_budget": 9}, "backend": {"fixtures_dir": "agents"}},
        {"seed": 5, "max_attempts": 2},
        base_dir=tmp_path,
    )
    assert cfg.corpus_path == tmp_path / "c.jsonl"
    assert cfg.backend.fixtures_dir == tmp_path / "agents"
    assert (cfg.expansion.batch_size, cfg.expansion.seed, cfg.max_attempts) == (3, 5, 2)
    assert build_config({}, {"paper_mode": True}).effective_max_attempts == 1
    assert build_config({"base_namespace": "http://e.org/o#"}).effective_instance_base == "http://e.org/o/product/"
    with pytest.raises(ConfigError):
        build_config({"max_attempts": 0})
    with pytest.raises(ConfigError):
        build_config({"conformance_mode": "picky"})


def test_catalog_populate(tmp_path, catalog_agents, capsys):
    shutil.copyfile(FIX / "catalog291" / "ontology.ttl", tmp_path / "ontology.ttl")
    argv = ["--config", str(FIX / "catalog291" / "kgforge.toml"), "--fixtures-dir", str(catalog_agents), "--run-dir", str(tmp_path)]
    assert run("populate", "--paper-mode", *argv) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert (report["products_total"], report["products_succeeded"], report["products_failed"]) == (291, 282, 9)
    assert (report["triples_total"], report["properties_instantiated"], report["properties_total"]) == (7459, 67, 69)
    capsys.readouterr()
    run("report", *argv)
    out = capsys.readouterr().out
    assert "coverage: 97.1% (67/69 properties instantiated)" in out
    assert "failure rate: 3.1%" in out
