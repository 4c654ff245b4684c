from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from knockout_eval.judges import Judge, OracleBackend
from knockout_eval.models import CandidateAnswer, EvaluationItem, TaskKind

FIXTURES = Path(__file__).parent / "fixtures"


def make_item(latents, *, max_points=10.0, item_id="q", task_kind=TaskKind.EXAM_GRADING,
              language="en", human=None, difficulty=None, exam_id=None, ids=None):
    ids = ids or [f"a{k:02d}" for k in range(len(latents))]
    human = human if human is not None else [None] * len(latents)
    answers = tuple(
        CandidateAnswer(aid, f"answer text {aid}", h, q) for aid, q, h in zip(ids, latents, human)
    )
    return EvaluationItem(
        id=item_id, prompt_text=f"question {item_id}", max_points=max_points, answers=answers,
        task_kind=task_kind, language=language, difficulty=difficulty, exam_id=exam_id,
    )


def oracle_judge(sigma=0.0, bias=0.0, seed=0, **kw) -> Judge:
    return Judge(OracleBackend(sigma, bias, seed), **kw)


class StubLLM:
    """Minimal OpenAI-compatible endpoint driven by a script of responses.

    Each script entry is ``(status, content)`` or ``("sleep", seconds, content)``.
    The last entry repeats once the script runs out.
    """

    def __init__(self, script):
        self.script = list(script)
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()

    def next(self):
        with self._lock:
            return self.script.pop(0) if len(self.script) > 1 else self.script[0]


@pytest.fixture
def stub_llm():
    servers = []

    def start(script):
        stub = StubLLM(script)

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with stub._lock:
                    stub.requests.append({"path": self.path, "body": body})
                    stub.headers.append(dict(self.headers))
                    stub.in_flight += 1
                    stub.max_in_flight = max(stub.max_in_flight, stub.in_flight)
                try:
                    step = stub.next()
                    if step[0] == "sleep":
                        time.sleep(step[1])
                        status, content = 200, step[2]
                    else:
                        status, content = step
                    if callable(content):
                        content = content(body)
                    if status == 200:
                        payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]})
                    else:
                        payload = json.dumps({"error": content})
                    data = payload.encode()
                    try:
                        self.send_response(status)
                        self.send_header("Content-Type", "application/json")
                        self.send_header("Content-Length", str(len(data)))
                        self.end_headers()
                        self.wfile.write(data)
                    except (BrokenPipeError, ConnectionResetError):
                        pass
                finally:
                    with stub._lock:
                        stub.in_flight -= 1

        server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        server.daemon_threads = True
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        stub.url = f"http://127.0.0.1:{server.server_address[1]}/v1"
        return stub

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()
