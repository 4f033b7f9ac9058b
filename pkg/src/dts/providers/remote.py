"""HTTP client for a remote log-probability backend.

Wire protocol (JSON over HTTP):

  GET  /v1/meta          -> {"vocab_size": int, "end_tokens": [int...],
                             "kind": "logits" | "logprobs"}
  POST /v1/distribution  <- {"prompt": [int...],
                             "sequences": [{"branch_id": int, "tokens": [...],
                                            "parent_branch_id": int|null,
                                            "fork_step": int|null}, ...]}
                         -> {"distributions": [{"branch_id": int,
                                                "values": [float; vocab_size]}, ...]}

Response order must match request order. "logits" values are converted with
client-side temperature-scaled softmax; "logprobs" are exponentiated,
validated to sum to 1 within 1e-4, and renormalized. Branch lineage fields
are forwarded opaquely so servers can reuse caches.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import requests

from ..branching import softmax_with_temperature
from ..core import BranchState, ProtocolError, TokenDistribution, TokenId, TransportError
from .base import DistributionProvider

# acceptance window for raw logprob payload sums; 0.999 must renormalize
# cleanly while grossly unnormalized payloads still fail the contract
_SUM_TOL = 5e-3


class RemoteProvider(DistributionProvider):
    def __init__(
        self,
        endpoint: str,
        temperature: float = 1.0,
        timeout: float = 120.0,
        max_attempts: int = 3,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.temperature = float(temperature)
        self.timeout = float(timeout)
        self.max_attempts = int(max_attempts)
        self.session = session or requests.Session()

        meta = self._request("GET", "/v1/meta")
        try:
            self.vocab_size = int(meta["vocab_size"])
            self.end_tokens = frozenset(int(t) for t in meta["end_tokens"])
            self.kind = meta["kind"]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed handshake payload: {meta!r}") from exc
        if self.kind not in ("logits", "logprobs"):
            raise ProtocolError(f"unknown payload kind {self.kind!r}")
        self._check_vocab()

    def _request(self, method: str, path: str, payload=None):
        url = self.endpoint + path
        last_exc: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self.session.request(method, url, json=payload, timeout=self.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_exc = exc
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"{method} {url} returned HTTP {response.status_code}", attempts=attempt
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{method} {url} returned non-JSON body") from exc
        raise TransportError(
            f"{method} {url} failed after {self.max_attempts} attempts: {last_exc}",
            attempts=self.max_attempts,
        )

    def _to_distribution(self, values) -> TokenDistribution:
        if len(values) != self.vocab_size:
            raise ProtocolError(
                f"server sent {len(values)} values, expected vocab_size {self.vocab_size}"
            )
        if self.kind == "logits":
            return softmax_with_temperature(values, self.temperature)
        probs = np.exp(np.asarray(values, dtype=np.float64))
        total = float(probs.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise ProtocolError(f"logprob payload sums to {total}, outside 1 +/- {_SUM_TOL}")
        return TokenDistribution(probs / total)

    def distribution(self, prompt, tokens) -> TokenDistribution:
        state = BranchState(tokens=tuple(tokens), cumulative_logprob=0.0, finished=False, branch_id=0)
        return self.next_distributions(prompt, [state])[0]

    def next_distributions(
        self, prompt: Sequence[TokenId], sequences: Sequence[BranchState]
    ) -> list[TokenDistribution]:
        payload = {
            "prompt": [int(t) for t in prompt],
            "sequences": [
                {
                    "branch_id": s.branch_id,
                    "tokens": list(s.tokens),
                    "parent_branch_id": s.parent_branch_id,
                    "fork_step": s.fork_step,
                }
                for s in sequences
            ],
        }
        body = self._request("POST", "/v1/distribution", payload)
        try:
            rows = body["distributions"]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed step payload: {body!r}") from exc
        if len(rows) != len(sequences):
            raise ProtocolError(f"server sent {len(rows)} distributions for {len(sequences)} sequences")
        out = []
        for row, seq in zip(rows, sequences):
            if int(row.get("branch_id", -1)) != seq.branch_id:
                raise ProtocolError("response order does not match request order")
            out.append(self._to_distribution(row["values"]))
        return out
