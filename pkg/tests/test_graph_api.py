import json
import random

import httpx
import pytest

from corpusqa.errors import TransportError
from corpusqa.graph_api import (
    InMemoryGraphClient,
    RateLimiter,
    SemanticScholarClient,
    expand_seed,
)


class FakeGraph:
    """Explicit adjacency for expansion tests."""

    def __init__(self, refs, cites=None, no_fulltext=()):
        self._refs = refs
        self._cites = cites or {}
        self._no_fulltext = set(no_fulltext)

    def references(self, aid):
        return self._refs.get(aid, [])

    def citations(self, aid):
        return self._cites.get(aid, [])

    def has_full_text(self, aid):
        return aid not in self._no_fulltext

    def subject_of(self, aid):
        return "Physics"


def _dense_graph():
    # Seed with 12 first-hop neighbors; every first-hop node has 8 distinct
    # second-hop neighbors, so the 1 + 10 + 10*5 caps bind exactly.
    refs = {"seed": [f"f{i}" for i in range(12)]}
    for i in range(12):
        refs[f"f{i}"] = [f"s{i}-{j}" for j in range(8)]
    return FakeGraph(refs)


def test_expand_seed_caps_give_61():
    cluster = expand_seed("seed", _dense_graph(), random.Random(5))
    assert len(cluster.member_ids) == 1 + 10 + 10 * 5
    assert cluster.seed_id == "seed"
    assert not cluster.degenerate
    assert cluster.subject == "Physics"


def test_expand_seed_caps_at_availability():
    graph = FakeGraph({"seed": ["a", "b", "c"]})
    cluster = expand_seed("seed", graph, random.Random(0))
    assert cluster.member_ids == frozenset({"seed", "a", "b", "c"})


def test_expand_seed_deterministic():
    a = expand_seed("seed", _dense_graph(), random.Random(99))
    b = expand_seed("seed", _dense_graph(), random.Random(99))
    assert a.member_ids == b.member_ids


def test_expand_seed_filters_missing_full_text():
    graph = FakeGraph({"seed": ["a", "b", "c"]}, no_fulltext={"b"})
    cluster = expand_seed("seed", graph, random.Random(0))
    assert "b" not in cluster.member_ids


def test_expand_seed_degenerate():
    cluster = expand_seed("seed", FakeGraph({}), random.Random(0))
    assert cluster.degenerate
    assert cluster.member_ids == frozenset({"seed"})


def test_in_memory_client_edges(mini_corpus):
    client = InMemoryGraphClient(mini_corpus)
    assert "m02" in client.references("m01")
    assert "m01" in client.citations("m02")
    assert client.has_full_text("m05")
    assert not client.has_full_text("ext-m01-000")
    assert client.subject_of("m09") == "Biology"


def test_rate_limiter_blocks_and_releases():
    limiter = RateLimiter(rate_per_second=10000, capacity=2)
    for _ in range(5):
        limiter.acquire()  # should not deadlock


def _transport(handler):
    return httpx.MockTransport(handler)


def test_s2_client_reference_pagination():
    calls = []

    def handler(request):
        calls.append(str(request.url))
        offset = int(request.url.params.get("offset", 0))
        if offset == 0:
            payload = {"data": [{"citedPaper": {"paperId": "p1"}},
                                {"citedPaper": {"paperId": "p2"}}], "next": 2}
        else:
            payload = {"data": [{"citedPaper": {"paperId": "p3"}}]}
        return httpx.Response(200, json=payload)

    client = SemanticScholarClient(
        base_url="https://example.test/graph/v1",
        rate_limiter=RateLimiter(10000, 10),
        transport=_transport(handler),
    )
    assert client.references("x") == ["p1", "p2", "p3"]
    assert len(calls) == 2


def test_s2_client_full_text_flag():
    def handler(request):
        if request.url.path.endswith("/paper/with"):
            return httpx.Response(200, json={"openAccessPdf": {"url": "https://pdf"}})
        return httpx.Response(200, json={"openAccessPdf": None})

    client = SemanticScholarClient(
        base_url="https://example.test/graph/v1",
        rate_limiter=RateLimiter(10000, 10),
        transport=_transport(handler),
    )
    assert client.has_full_text("with")
    assert not client.has_full_text("without")


def test_s2_client_retries_then_raises():
    attempts = []

    def handler(request):
        attempts.append(1)
        return httpx.Response(503)

    client = SemanticScholarClient(
        base_url="https://example.test/graph/v1",
        rate_limiter=RateLimiter(100000, 10),
        max_retries=2,
        retry_wait=0.001,
        transport=_transport(handler),
    )
    with pytest.raises(TransportError):
        client.has_full_text("x")
    assert len(attempts) == 3  # initial try + 2 retries
