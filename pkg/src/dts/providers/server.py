"""Reference stub server exposing any local provider over the wire protocol.

Meant for protocol conformance testing and for driving the engine against a
provider running in another process. Zero-probability entries are shipped as
the sentinel logprob -1e9, which exponentiates back to exactly 0.0, keeping
payloads valid strict JSON.
"""

from __future__ import annotations

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..core import BranchState
from .base import DistributionProvider

_NEG_INF_SENTINEL = -1e9


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    def _send_json(self, payload, status=200):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/v1/meta":
            self._send_json({"error": f"unknown path {self.path}"}, status=404)
            return
        provider = self.server.provider
        self._send_json(
            {
                "vocab_size": provider.vocab_size,
                "end_tokens": sorted(provider.end_tokens),
                "kind": self.server.kind,
            }
        )

    def do_POST(self):
        if self.path != "/v1/distribution":
            self._send_json({"error": f"unknown path {self.path}"}, status=404)
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            request = json.loads(self.rfile.read(length))
            prompt = tuple(int(t) for t in request["prompt"])
            sequences = [
                BranchState(
                    tokens=tuple(int(t) for t in seq["tokens"]),
                    cumulative_logprob=0.0,
                    finished=False,
                    branch_id=int(seq["branch_id"]),
                    parent_branch_id=seq.get("parent_branch_id"),
                    fork_step=seq.get("fork_step"),
                )
                for seq in request["sequences"]
            ]
        except Exception as exc:
            self._send_json({"error": f"bad request: {exc}"}, status=400)
            return
        try:
            rows = self.server.values_for(prompt, sequences)
        except Exception as exc:
            self._send_json({"error": f"provider failure: {exc}"}, status=500)
            return
        self._send_json(
            {
                "distributions": [
                    {"branch_id": seq.branch_id, "values": values}
                    for seq, values in zip(sequences, rows)
                ]
            }
        )


class ProviderServer(ThreadingHTTPServer):
    """Serves a DistributionProvider on 127.0.0.1; use as a context manager."""

    daemon_threads = True

    def __init__(self, provider: DistributionProvider, kind: str = "logprobs",
                 host: str = "127.0.0.1", port: int = 0):
        if kind not in ("logits", "logprobs"):
            raise ValueError(f"unsupported kind {kind!r}")
        super().__init__((host, port), _Handler)
        self.provider = provider
        self.kind = kind
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def values_for(self, prompt, sequences) -> list[list[float]]:
        provider = self.provider
        if self.kind == "logits" and hasattr(provider, "raw_logits"):
            return [list(provider.raw_logits(prompt, tuple(s.tokens))) for s in sequences]
        rows = provider.next_distributions(prompt, sequences)
        return [
            [math.log(p) if p > 0.0 else _NEG_INF_SENTINEL for p in map(float, dist.probs)]
            for dist in rows
        ]

    def start(self):
        self._thread = threading.Thread(
            target=self.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc_info):
        self.stop()
