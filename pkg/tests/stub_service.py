"""Scriptable local chat-completion stub for exercising the refinement client."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class StubService:
    """One behavior is consumed per request, in order; repeats the last one after.

    Behaviors:
      ("content", text)   -> 200 with a completion envelope wrapping text
      ("status", code)    -> empty response with that HTTP status
      ("sleep", seconds)  -> sleep, then a valid-but-empty 200 envelope
    """

    def __init__(self):
        self.behaviors: list[tuple] = []
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        self._inflight = 0
        self.max_inflight = 0
        self.handle_delay = 0.0

        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                with stub._lock:
                    stub._inflight += 1
                    stub.max_inflight = max(stub.max_inflight, stub._inflight)
                    if stub.behaviors:
                        behavior = stub.behaviors.pop(0) if len(stub.behaviors) > 1 else stub.behaviors[0]
                    else:
                        behavior = ("content", "")
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    body = self.rfile.read(length)
                    with stub._lock:
                        stub.requests.append(json.loads(body) if body else {})
                    if stub.handle_delay:
                        time.sleep(stub.handle_delay)
                    kind, value = behavior
                    if kind == "status":
                        self.send_response(value)
                        self.send_header("Content-Length", "0")
                        self.end_headers()
                        return
                    if kind == "sleep":
                        time.sleep(value)
                        value = ""
                        kind = "content"
                    envelope = {"choices": [{"message": {"content": value}}]}
                    payload = json.dumps(envelope).encode("utf-8")
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                except BrokenPipeError:
                    pass  # client timed out and went away
                finally:
                    with stub._lock:
                        stub._inflight -= 1

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def close(self):
        self._server.shutdown()
        self._server.server_close()
