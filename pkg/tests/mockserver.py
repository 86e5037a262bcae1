"""In-process chat-completions endpoint for hermetic gateway tests.

Responses are scripted: push plain strings (returned as the assistant
message), integers (returned as that HTTP status with a JSON error body), or
dicts (sent verbatim as the 200 response body, for malformed-shape tests).
When the script is empty the server answers ``default_content``. Every
request body is recorded for assertions.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class MockChatServer:
    def __init__(self, default_content: str = "YES"):
        self.default_content = default_content
        self.script: list[str | int | dict] = []
        self.requests: list[dict] = []
        self.headers_seen: list[dict] = []
        self._lock = threading.Lock()
        owner = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # noqa: N802 - silence stderr
                pass

            def do_POST(self):  # noqa: N802
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                with owner._lock:
                    owner.requests.append({"path": self.path, "body": body})
                    owner.headers_seen.append(dict(self.headers))
                    item = owner.script.pop(0) if owner.script else owner.default_content
                if isinstance(item, int):
                    payload = json.dumps({"error": {"message": f"scripted {item}"}})
                    self.send_response(item)
                elif isinstance(item, dict):
                    payload = json.dumps(item)
                    self.send_response(200)
                else:
                    payload = json.dumps(
                        {"choices": [{"message": {"role": "assistant", "content": item}}]}
                    )
                    self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload.encode("utf-8"))

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.02), daemon=True
        )

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self._server.server_port}/v1"

    @property
    def request_count(self) -> int:
        with self._lock:
            return len(self.requests)

    def push(self, *items: str | int | dict) -> None:
        with self._lock:
            self.script.extend(items)

    def start(self) -> "MockChatServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
