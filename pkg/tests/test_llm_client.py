"""Record/replay transcript behavior and transport retries."""

from __future__ import annotations

import json

import pytest

from formflow.errors import ReplayMiss, TransportError
from formflow.llm import ChatRequest, LlmClient, ScriptedBackend, Transcript


class CountingBackend:
    def __init__(self, responses=None, failures=0):
        self.calls = 0
        self.failures = failures
        self.responses = responses

    def send(self, request: ChatRequest) -> str:
        self.calls += 1
        if self.calls <= self.failures:
            raise TransportError(f"boom {self.calls}")
        if self.responses is not None:
            return self.responses.pop(0)
        return f"echo:{request.messages[-1][1]}"


def req(text: str = "hello") -> ChatRequest:
    return ChatRequest.make("m1", [{"role": "user", "content": text}])


class TestChatRequest:
    def test_key_is_stable_across_dict_order(self):
        a = ChatRequest.make("m", [{"role": "user", "content": "x"}])
        b = ChatRequest.make("m", [{"content": "x", "role": "user"}])
        assert a.key() == b.key()

    def test_key_varies_with_inputs(self):
        base = req("x").key()
        assert req("y").key() != base
        assert ChatRequest.make("m2", [{"role": "user", "content": "x"}]) \
            .key() != base
        assert ChatRequest("m1", (("user", "x"),), 0.5).key() != base

    def test_hashable_and_frozen(self):
        assert req() == req()
        with pytest.raises(AttributeError):
            req().model = "other"


class TestModes:
    def test_record_then_replay(self, tmp_path):
        path = tmp_path / "t.jsonl"
        backend = CountingBackend()
        rec = LlmClient(backend, mode="record", transcript_path=path)
        assert rec.complete(req()) == "echo:hello"
        assert backend.calls == 1

        rep = LlmClient(mode="replay", transcript_path=path)
        assert rep.complete(req()) == "echo:hello"
        assert backend.calls == 1

    def test_replay_miss_names_the_key(self, tmp_path):
        path = tmp_path / "t.jsonl"
        LlmClient(CountingBackend(), mode="record",
                  transcript_path=path).complete(req())
        rep = LlmClient(mode="replay", transcript_path=path)
        with pytest.raises(ReplayMiss) as err:
            rep.complete(req("unseen"))
        assert req("unseen").key() in str(err.value)

    def test_record_is_lookup_first(self, tmp_path):
        path = tmp_path / "t.jsonl"
        backend = CountingBackend()
        client = LlmClient(backend, mode="record", transcript_path=path)
        client.complete(req())
        client.complete(req())
        assert backend.calls == 1
        # a resumed client re-reads the file instead of re-asking
        resumed = LlmClient(backend, mode="record", transcript_path=path)
        resumed.complete(req())
        assert backend.calls == 1
        assert len(path.read_text().splitlines()) == 1

    def test_live_mode_writes_no_transcript(self, tmp_path):
        backend = CountingBackend()
        client = LlmClient(backend, mode="live")
        client.complete(req())
        client.complete(req())
        assert backend.calls == 2
        assert list(tmp_path.iterdir()) == []

    @pytest.mark.parametrize("kwargs", [
        {"mode": "nonsense"},
        {"mode": "replay"},                       # no transcript
        {"mode": "record", "transcript_path": "t"},  # no backend
    ])
    def test_invalid_configurations(self, tmp_path, kwargs):
        if kwargs.get("transcript_path"):
            kwargs["transcript_path"] = tmp_path / "t.jsonl"
        with pytest.raises(ValueError):
            LlmClient(**kwargs)


class TestRetries:
    def test_backoff_then_success(self, tmp_path):
        sleeps: list[float] = []
        backend = CountingBackend(failures=2)
        client = LlmClient(backend, mode="record",
                           transcript_path=tmp_path / "t.jsonl",
                           sleep=sleeps.append)
        assert client.complete(req()) == "echo:hello"
        assert backend.calls == 3
        assert sleeps == [0.5, 1.0]

    def test_gives_up_after_three_attempts(self, tmp_path):
        sleeps: list[float] = []
        backend = CountingBackend(failures=99)
        client = LlmClient(backend, mode="record",
                           transcript_path=tmp_path / "t.jsonl",
                           sleep=sleeps.append)
        with pytest.raises(TransportError):
            client.complete(req())
        assert backend.calls == 3
        assert sleeps == [0.5, 1.0]
        assert not (tmp_path / "t.jsonl").exists()


class TestTranscript:
    def test_jsonl_shape(self, tmp_path):
        path = tmp_path / "t.jsonl"
        LlmClient(CountingBackend(), mode="record",
                  transcript_path=path).complete(req())
        (line,) = path.read_text().splitlines()
        rec = json.loads(line)
        assert rec["key"] == req().key()
        assert rec["request"]["model"] == "m1"
        assert rec["response"] == "echo:hello"
        assert "timestamp" in rec

    def test_load_tolerates_blank_lines(self, tmp_path):
        path = tmp_path / "t.jsonl"
        LlmClient(CountingBackend(), mode="record",
                  transcript_path=path).complete(req())
        path.write_text(path.read_text() + "\n\n")
        assert Transcript.load(path).lookup(req().key()) is not None


class TestScriptedBackend:
    def test_unknown_task_yields_error_payload(self):
        backend = ScriptedBackend()
        bad = ChatRequest.make("m", [
            {"role": "user", "content": "Task: no-such-task\n\npayload"}])
        assert json.loads(backend.send(bad)) == {"error": "unknown task"}
