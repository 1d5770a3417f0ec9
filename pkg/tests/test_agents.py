from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from kgforge.agents import (
    STAGE_TEMPLATE_IDS,
    AgentRequest,
    AgentTimeout,
    BackendKind,
    CallableBackend,
    FixtureStore,
    Gateway,
    HttpBackend,
    HttpError,
    MissingFixture,
    MissingVariable,
    PromptTemplate,
    RecordBackend,
    ReplayBackend,
    load_templates,
    render_prompt,
)

# ------------------------------------------------------------------ templates


def test_render_substitutes_every_placeholder():
    t = PromptTemplate("x", "Hello {{name}}, see {{ thing }} and {{name}}.")
    assert render_prompt(t, {"name": "Ada", "thing": "this"}) == "Hello Ada, see this and Ada."


def test_render_is_single_pass():
    t = PromptTemplate("x", "A={{a}} B={{b}}")
    assert render_prompt(t, {"a": "{{b}}", "b": "2"}) == "A={{b}} B=2"


def test_missing_variable_raises_with_name():
    with pytest.raises(MissingVariable) as info:
        render_prompt(PromptTemplate("x", "{{a}} {{b}}"), {"a": "1"})
    assert info.value.name == "b"


def test_unknown_variable_only_warns(caplog):
    with caplog.at_level("WARNING"):
        assert render_prompt(PromptTemplate("x", "{{a}}"), {"a": "1", "zzz": "2"}) == "1"
    assert "zzz" in caplog.text


def test_bundled_templates_have_required_placeholders():
    templates = load_templates()
    assert set(templates) == set(STAGE_TEMPLATE_IDS)
    assert templates["populate"].placeholders == {"ontology", "subject_iri", "product_id", "description"}


def test_template_directory_override(tmp_path):
    for tid in STAGE_TEMPLATE_IDS:
        (tmp_path / f"{tid}.txt").write_text(load_templates()[tid].body + "\nCustom.", encoding="utf-8")
    assert load_templates(tmp_path)["refine"].body.endswith("Custom.")
    (tmp_path / "refine.txt").write_text("no placeholders", encoding="utf-8")
    with pytest.raises(ValueError, match="refine"):
        load_templates(tmp_path)


# ------------------------------------------------------------------ requests


def test_digest_is_stable_and_sensitive_to_every_field():
    base = AgentRequest("populate", "prompt", 0.0, 4096)
    assert base.digest == AgentRequest("populate", "prompt", 0.0, 4096).digest
    assert len(base.digest) == 64
    variants = [
        AgentRequest("refine", "prompt", 0.0, 4096),
        AgentRequest("populate", "prompt ", 0.0, 4096),
        AgentRequest("populate", "prompt", 0.2, 4096),
        AgentRequest("populate", "prompt", 0.0, 2048),
    ]
    assert len({v.digest for v in variants} | {base.digest}) == 5


def test_digest_field_boundaries_are_unambiguous():
    assert AgentRequest("ab", "c").digest != AgentRequest("a", "bc").digest


def test_request_dict_round_trip():
    req = AgentRequest("bootstrap", "p", 0.3, 100)
    assert AgentRequest.from_dict(json.loads(json.dumps(req.to_dict()))) == req


def test_gateway_appends_feedback():
    gw = Gateway(CallableBackend(lambda r: ""))
    plain = gw.request("refine", {"namespace": "http://x/#", "ontology": "..."})
    retry = gw.request("refine", {"namespace": "http://x/#", "ontology": "..."}, feedback="bad syntax at 1:1")
    assert retry.rendered_prompt.startswith(plain.rendered_prompt)
    assert "bad syntax at 1:1" in retry.rendered_prompt
    assert retry.digest != plain.digest


# ------------------------------------------------------------------ record / replay


def test_record_then_replay_round_trip(tmp_path):
    calls = []

    def live(req):
        calls.append(req)
        return f"answer to {req.template_id}"

    req = AgentRequest("expand", "some prompt")
    recorded = RecordBackend(CallableBackend(live), tmp_path).invoke(req)
    replayed = ReplayBackend(tmp_path).invoke(req)
    assert replayed.text == recorded.text == "answer to expand"
    assert replayed.backend is BackendKind.REPLAY
    assert len(calls) == 1
    record = json.loads((tmp_path / f"{req.digest}.json").read_text(encoding="utf-8"))
    assert record["request"]["rendered_prompt"] == "some prompt"


def test_replay_miss_names_the_digest(tmp_path):
    req = AgentRequest("expand", "never recorded")
    with pytest.raises(MissingFixture) as info:
        ReplayBackend(tmp_path).invoke(req)
    assert info.value.digest == req.digest
    assert req.digest in str(info.value)


def test_fixture_store_leaves_no_temp_files(tmp_path):
    store = FixtureStore(tmp_path)
    for i in range(5):
        store.put(AgentRequest("x", str(i)), "t")
    assert len(store) == 5
    assert not list(tmp_path.glob(".tmp-*"))


# ------------------------------------------------------------------ http


class _Stub:
    """Serves scripted (status, body, delay) replies and records what it received."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.received = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                stub.received.append((self.path, dict(self.headers), json.loads(self.rfile.read(length))))
                status, body, delay = stub.replies.pop(0) if stub.replies else (500, "exhausted", 0)
                time.sleep(delay)
                data = body.encode("utf-8") if isinstance(body, str) else json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                try:
                    self.wfile.write(data)
                except BrokenPipeError:
                    pass

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/v1"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def ok(text: str):
    return (200, {"choices": [{"message": {"content": text}}]}, 0)


def test_http_backend_sends_chat_payload_with_bearer_key():
    with _Stub([ok("```turtle\n```")]) as stub:
        backend = HttpBackend(stub.url, "model-x", "secret", backoff=0.01)
        resp = backend.invoke(AgentRequest("refine", "the prompt", 0.0, 321))
        backend.close()
    path, headers, body = stub.received[0]
    assert path == "/v1/chat/completions"
    assert headers["Authorization"] == "Bearer secret"
    assert body["model"] == "model-x"
    assert body["messages"][-1] == {"role": "user", "content": "the prompt"}
    assert (body["temperature"], body["max_tokens"]) == (0.0, 321)
    assert resp.text == "```turtle\n```" and resp.backend is BackendKind.HTTP


def test_http_backend_retries_429_and_5xx_with_backoff():
    with _Stub([(429, "slow down", 0), (503, "busy", 0), ok("fine")]) as stub:
        backend = HttpBackend(stub.url, "m", "k", retries=3, backoff=0.05)
        start = time.perf_counter()
        assert backend.invoke(AgentRequest("x", "p")).text == "fine"
        elapsed = time.perf_counter() - start
    assert len(stub.received) == 3
    assert elapsed >= 0.05 + 0.1  # 0.05 * 2**0 + 0.05 * 2**1


def test_http_backend_gives_up_after_retries():
    with _Stub([(500, "a", 0)] * 3) as stub:
        backend = HttpBackend(stub.url, "m", "k", retries=2, backoff=0.001)
        with pytest.raises(HttpError) as info:
            backend.invoke(AgentRequest("x", "p"))
    assert info.value.status == 500
    assert len(stub.received) == 3


def test_http_backend_does_not_retry_client_errors():
    with _Stub([(401, "bad key", 0), ok("unused")]) as stub:
        backend = HttpBackend(stub.url, "m", "k", retries=3, backoff=0.001)
        with pytest.raises(HttpError) as info:
            backend.invoke(AgentRequest("x", "p"))
    assert info.value.status == 401
    assert len(stub.received) == 1


def test_http_backend_timeout():
    with _Stub([(200, "late", 0.5)] * 2) as stub:
        backend = HttpBackend(stub.url, "m", "k", timeout=0.1, retries=1, backoff=0.001)
        with pytest.raises(AgentTimeout):
            backend.invoke(AgentRequest("x", "p"))


def test_http_backend_from_env(monkeypatch):
    monkeypatch.delenv("KGFORGE_API_KEY", raising=False)
    with pytest.raises(Exception, match="KGFORGE_API_KEY"):
        HttpBackend.from_env("http://127.0.0.1:9", "m")
    monkeypatch.setenv("KGFORGE_API_KEY", "from-env")
    assert HttpBackend.from_env("http://127.0.0.1:9", "m").api_key == "from-env"


def test_record_backend_over_http(tmp_path):
    with _Stub([ok("recorded text")]) as stub:
        gw = Gateway(RecordBackend(HttpBackend(stub.url, "m", "k"), tmp_path))
        req = gw.request("refine", {"namespace": "http://x/#", "ontology": "o"})
        gw.invoke(req)
    assert Gateway(ReplayBackend(tmp_path)).invoke(req).text == "recorded text"
