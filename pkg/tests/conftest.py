import json
from pathlib import Path

import pytest

from vpdistill.scene import SceneGraph
from vpdistill.tools import NoiseConfig, OracleBackend, ToolRegistry
from vpdistill.values import VisualInput

FIXTURES = Path(__file__).parent / "fixtures"

COUNT_YELLOW_BUSES = """\
def execute_command(image):
    count = 0
    for bus in image.find("bus"):
        if bus.verify_property("bus", "yellow"):
            count += 1
    return str(count)
"""


def load_scene(name: str) -> SceneGraph:
    return SceneGraph.from_dict(json.loads((FIXTURES / name).read_text()))


@pytest.fixture
def bus_scene():
    # three buses, one of them yellow
    return load_scene("fig2_scene.json")


@pytest.fixture
def tennis_scene():
    return load_scene("tennis_scene.json")


def registry_for(*scenes, noise: NoiseConfig | None = None) -> ToolRegistry:
    return ToolRegistry(OracleBackend(list(scenes), noise or NoiseConfig()))


def visual(scene) -> VisualInput:
    return VisualInput.from_scene(scene)


class CountingRegistry:
    """Wraps a registry and counts traced tool invocations independently."""

    def __init__(self, inner):
        self.inner = inner
        self.traced_calls = 0

    def call(self, name, receiver, args, call_index):
        if name in ("find", "exists", "verify_property", "simple_query", "compute_depth", "llm_query"):
            self.traced_calls += 1
        return self.inner.call(name, receiver, args, call_index)


class FakeLlm:
    """Stand-in LLM client returning canned completions."""

    def __init__(self, texts, logprobs=None, fail=False):
        self.texts = list(texts)
        self.logprobs = logprobs
        self.fail = fail
        self.prompts = []

    def complete(self, prompt, *, n=1, temperature=0.0):
        from vpdistill.llm import Choice, LlmError

        self.prompts.append(prompt)
        if self.fail:
            raise LlmError("connection refused")
        lps = self.logprobs or [None] * len(self.texts)
        return [Choice(t, lp) for t, lp in zip(self.texts[:n], lps[:n])]


class MockServer:
    """Threaded local HTTP server; ``handler(path, body) -> (status, json_obj)``."""

    def __init__(self, handler):
        import threading
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

        self.requests = []
        outer = self

        class H(BaseHTTPRequestHandler):
            def do_POST(self):
                raw = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                body = json.loads(raw or b"{}")
                outer.requests.append((self.path, dict(self.headers), body))
                status, obj = handler(self.path, body)
                data = json.dumps(obj).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), H)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self):
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def mock_server():
    servers = []

    def start(handler):
        s = MockServer(handler)
        servers.append(s)
        return s

    yield start
    for s in servers:
        s.close()


# -- acceptance summary

ACCEPTANCE_LINES: list[str] = []


def acceptance(name: str, ok: bool, detail: str = "") -> None:
    """Record and print one PASS/FAIL line, then fail the test if needed."""
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
