import socket

import pytest

from vpdistill import net
from vpdistill.cli import main
from vpdistill.dataset import read_jsonl


class NetworkUsed(AssertionError):
    pass


@pytest.fixture
def no_sockets(monkeypatch):
    """Any attempt to open a socket or resolve a name fails the test."""
    attempts = []

    def deny(name):
        def blocked(*args, **kwargs):
            attempts.append(name)
            raise NetworkUsed(f"network operation {name} during an offline run")
        return blocked

    monkeypatch.setattr(socket, "socket", deny("socket"))
    monkeypatch.setattr(socket, "create_connection", deny("create_connection"))
    monkeypatch.setattr(socket, "getaddrinfo", deny("getaddrinfo"))
    monkeypatch.setattr(socket, "socketpair", deny("socketpair"))
    return attempts


def test_guard_itself_works(no_sockets):
    with pytest.raises(NetworkUsed):
        socket.create_connection(("127.0.0.1", 9))
    assert no_sockets == ["create_connection"]


def test_offline_full_pipeline_makes_no_network_calls(tmp_path, no_sockets):
    scenes = tmp_path / "scenes.jsonl"
    out = tmp_path / "d.jsonl"
    assert main(["gen-scenes", "--n", "40", "--seed", "2", "--out", str(scenes), "--offline"]) == 0
    code = main(["synth", "--offline", "--corpus", str(scenes), "--out", str(out), "--n-samples", "100",
                 "--p-attr-flip", "0.1", "--p-miss", "0.1", "--workers", "4"])
    assert code == 0
    assert no_sockets == []
    assert len(read_jsonl(out)) >= 100


def test_offline_rejects_network_features(tmp_path, no_sockets):
    scenes = tmp_path / "scenes.jsonl"
    main(["gen-scenes", "--n", "5", "--out", str(scenes)])
    for extra in (["--tool-backend", "remote", "--tool-base-url", "http://127.0.0.1:9"],
                  ["--judge", "--llm-base-url", "http://127.0.0.1:9", "--llm-model", "m"],
                  ["--cot-mode", "llm", "--llm-base-url", "http://127.0.0.1:9", "--llm-model", "m"]):
        assert main(["synth", "--offline", "--corpus", str(scenes), "--out", str(tmp_path / "d.jsonl"), *extra]) == 3
    assert no_sockets == []


def test_offline_env_switch_blocks_clients():
    with net.offline():
        with pytest.raises(net.OfflineError):
            net.require_online("test client")
    net.require_online("test client")
