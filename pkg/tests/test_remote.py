import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from dts import (
    BranchState,
    DtsConfig,
    PfsaModel,
    ProtocolError,
    ProviderServer,
    RemoteProvider,
    ScriptedModel,
    TransportError,
    run_dts,
)

from support import random_pfsa


def seq(*tokens, branch_id=0):
    return BranchState(tokens=tuple(tokens), cumulative_logprob=0.0, finished=False, branch_id=branch_id)


@pytest.fixture(scope="module")
def pfsa():
    return PfsaModel(
        initial_state=0,
        emissions={0: [0.5, 0.3, 0.2, 0.0], 1: [0.25, 0.25, 0.0, 0.5]},
        transitions={0: {0: 1, 1: 0, 2: 1}, 1: {0: 0, 1: 1}},
        end_tokens=[3],
    )


class TestStubServerRoundTrip:
    def test_handshake(self, pfsa):
        with ProviderServer(pfsa, kind="logprobs") as server:
            remote = RemoteProvider(server.url)
            assert remote.vocab_size == 4
            assert remote.end_tokens == frozenset({3})
            assert remote.kind == "logprobs"

    def test_batch_order_and_values(self, pfsa):
        with ProviderServer(pfsa, kind="logprobs") as server:
            remote = RemoteProvider(server.url)
            sequences = [seq(branch_id=0), seq(0, branch_id=1), seq(1, branch_id=2)]
            local = pfsa.next_distributions((), sequences)
            over_wire = remote.next_distributions((), sequences)
            for a, b in zip(local, over_wire):
                assert np.allclose(a.probs, b.probs, atol=1e-12)

    def test_zero_probabilities_survive_the_wire(self, pfsa):
        with ProviderServer(pfsa, kind="logprobs") as server:
            remote = RemoteProvider(server.url)
            dist = remote.next_distributions((), [seq()])[0]
            assert dist.probs[3] == 0.0

    def test_logits_kind_is_bit_exact_for_scripted(self):
        # the server forwards raw rule logits; the client applies the same
        # temperature softmax the in-process model uses
        scripted = ScriptedModel(
            rules=[([1], [3.0, 1.0, 0.5])],
            default_logits=[0.2, 0.1, 2.0],
            temperature=0.7,
            end_tokens=[2],
        )
        with ProviderServer(scripted, kind="logits") as server:
            remote = RemoteProvider(server.url, temperature=0.7)
            assert remote.kind == "logits"
            for tokens in [(), (1,), (0, 1)]:
                a = scripted.distribution((), tokens)
                b = remote.next_distributions((), [seq(*tokens)])[0]
                assert np.array_equal(a.probs, b.probs)

    def test_remote_run_matches_local_run(self, pfsa):
        cfg = DtsConfig(
            tau=0.6, k=2, temperature=1.0, max_tokens=12, end_tokens=frozenset({3}), seed=5,
        )
        local = run_dts(pfsa, [], cfg)
        with ProviderServer(pfsa, kind="logprobs") as server:
            remote_result = run_dts(RemoteProvider(server.url), [], cfg)
        assert remote_result.output.tokens == local.output.tokens
        assert remote_result.terminated == local.terminated

    def test_unknown_path_is_transport_error(self, pfsa):
        with ProviderServer(pfsa) as server:
            remote = RemoteProvider(server.url)
            with pytest.raises(TransportError):
                remote._request("GET", "/v1/nonsense")


class _CraftedHandler(BaseHTTPRequestHandler):
    """Serves a fixed meta payload and a crafted step payload."""

    meta: dict = {}
    step: dict = {}
    fail_first = 0
    lock = threading.Lock()

    def log_message(self, fmt, *args):
        pass

    def _send(self, payload, status=200):
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        self._send(type(self).meta)

    def do_POST(self):
        cls = type(self)
        with cls.lock:
            if cls.fail_first > 0:
                cls.fail_first -= 1
                # drop the connection to simulate a transport fault
                self.connection.close()
                return
        self._send(cls.step)


def crafted_server(meta, step, fail_first=0):
    handler = type(
        "Handler", (_CraftedHandler,),
        {"meta": meta, "step": step, "fail_first": fail_first, "lock": threading.Lock()},
    )
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(
        target=server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
    )
    thread.start()
    host, port = server.server_address[:2]
    return server, f"http://{host}:{port}"


META = {"vocab_size": 2, "end_tokens": [1], "kind": "logprobs"}


class TestProtocolValidation:
    def run_step(self, meta, step, fail_first=0, **kwargs):
        server, url = crafted_server(meta, step, fail_first)
        try:
            remote = RemoteProvider(url, **kwargs)
            return remote.next_distributions((), [seq()])
        finally:
            server.shutdown()
            server.server_close()

    def test_logprobs_converted(self):
        step = {"distributions": [{"branch_id": 0, "values": [math.log(0.5), math.log(0.5)]}]}
        dist = self.run_step(META, step)[0]
        assert np.allclose(dist.probs, [0.5, 0.5], atol=1e-12)

    def test_slightly_off_sum_renormalized(self):
        step = {"distributions": [{"branch_id": 0, "values": [math.log(0.4995), math.log(0.4995)]}]}
        dist = self.run_step(META, step)[0]
        assert float(dist.probs.sum()) == pytest.approx(1.0, abs=1e-12)

    def test_badly_off_sum_rejected(self):
        step = {"distributions": [{"branch_id": 0, "values": [math.log(0.3), math.log(0.3)]}]}
        with pytest.raises(ProtocolError, match="sums to"):
            self.run_step(META, step)

    def test_wrong_vocab_size_rejected(self):
        step = {"distributions": [{"branch_id": 0, "values": [0.0]}]}
        with pytest.raises(ProtocolError, match="vocab_size"):
            self.run_step(META, step)

    def test_order_mismatch_rejected(self):
        step = {"distributions": [{"branch_id": 9, "values": [math.log(0.5), math.log(0.5)]}]}
        with pytest.raises(ProtocolError, match="order"):
            self.run_step(META, step)

    def test_wrong_count_rejected(self):
        step = {"distributions": []}
        with pytest.raises(ProtocolError, match="0 distributions"):
            self.run_step(META, step)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ProtocolError, match="kind"):
            self.run_step({**META, "kind": "probits"}, {})

    def test_malformed_handshake_rejected(self):
        with pytest.raises(ProtocolError, match="handshake"):
            self.run_step({"vocab_size": 2}, {})

    def test_transient_drops_retried_with_attempt_count(self):
        step = {"distributions": [{"branch_id": 0, "values": [math.log(0.5), math.log(0.5)]}]}
        dist = self.run_step(META, step, fail_first=2, timeout=2.0)[0]
        assert np.allclose(dist.probs, [0.5, 0.5], atol=1e-12)

    def test_exhausted_retries_report_attempts(self):
        step = {"distributions": [{"branch_id": 0, "values": [math.log(0.5), math.log(0.5)]}]}
        with pytest.raises(TransportError) as excinfo:
            self.run_step(META, step, fail_first=50, timeout=0.5, max_attempts=3)
        assert excinfo.value.attempts == 3

    def test_http_error_is_transport_error(self, pfsa):
        class ErrorHandler(_CraftedHandler):
            def do_POST(self):
                self._send({"error": "teapot"}, status=500)

        server = ThreadingHTTPServer(("127.0.0.1", 0), ErrorHandler)
        ErrorHandler.meta = META
        threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True).start()
        host, port = server.server_address[:2]
        try:
            remote = RemoteProvider(f"http://{host}:{port}")
            with pytest.raises(TransportError, match="500"):
                remote.next_distributions((), [seq()])
        finally:
            server.shutdown()
            server.server_close()


class TestServerSideValidation:
    def test_bad_request_rejected_with_400(self, pfsa):
        import requests

        with ProviderServer(pfsa) as server:
            response = requests.post(
                server.url + "/v1/distribution", json={"prompt": "nope"}, timeout=5
            )
            assert response.status_code == 400

    def test_many_sequential_calls(self):
        model = random_pfsa(3, require_path_within=6)
        with ProviderServer(model, kind="logprobs") as server:
            remote = RemoteProvider(server.url)
            for i in range(50):
                dist = remote.next_distributions((), [seq()])[0]
                assert abs(float(dist.probs.sum()) - 1.0) < 1e-9
