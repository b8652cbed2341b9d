"""Citation-graph expansion of seed articles into clusters.

``expand_seed`` samples up to ten first-hop related articles (references plus
citations) for a seed and up to five second-hop articles per first-hop member,
keeping only articles with full text available. The graph source is anything
implementing :class:`GraphClient`; :class:`SemanticScholarClient` speaks the
public scholarly-graph HTTP API and :class:`InMemoryGraphClient` serves a
loaded corpus (used by the offline pipeline and tests).
"""

from __future__ import annotations

import os
import random
import threading
import time
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Protocol, Sequence

import httpx

from .corpus import Corpus
from .errors import TransportError

FIRST_HOP_SAMPLES = 10
SECOND_HOP_SAMPLES = 5


@dataclass(frozen=True)
class ArticleCluster:
    """A seed article plus its sampled graph neighborhood."""

    seed_id: str
    member_ids: FrozenSet[str]
    subject: str
    degenerate: bool = False


class GraphClient(Protocol):
    def references(self, article_id: str) -> Sequence[str]: ...

    def citations(self, article_id: str) -> Sequence[str]: ...

    def has_full_text(self, article_id: str) -> bool: ...

    def subject_of(self, article_id: str) -> Optional[str]: ...


def expand_seed(
    seed: str,
    client: GraphClient,
    rng: random.Random,
    first_hop: int = FIRST_HOP_SAMPLES,
    second_hop: int = SECOND_HOP_SAMPLES,
    subject: Optional[str] = None,
) -> ArticleCluster:
    """Grow a cluster around ``seed``; deterministic for a fixed rng seed.

    Candidate neighbors are sorted before sampling so the draw depends only on
    the rng state, not on API response order. A seed with no eligible
    neighbors yields a single-member cluster flagged degenerate.
    """

    def eligible_neighbors(article_id, exclude):
        cands = set(client.references(article_id)) | set(client.citations(article_id))
        cands.discard(article_id)
        return sorted(c for c in cands if c not in exclude and client.has_full_text(c))

    members = [seed]
    member_set = {seed}
    first = eligible_neighbors(seed, member_set)
    first_drawn = rng.sample(first, min(first_hop, len(first)))
    members.extend(first_drawn)
    member_set.update(first_drawn)
    for hop in first_drawn:
        second = eligible_neighbors(hop, member_set)
        drawn = rng.sample(second, min(second_hop, len(second)))
        members.extend(drawn)
        member_set.update(drawn)

    resolved_subject = subject or client.subject_of(seed) or "CS"
    return ArticleCluster(
        seed_id=seed,
        member_ids=frozenset(member_set),
        subject=resolved_subject,
        degenerate=len(member_set) == 1,
    )


class InMemoryGraphClient:
    """Graph view over a loaded corpus: edges come from reference lists."""

    def __init__(self, corpus: Corpus):
        self._corpus = corpus
        self._citations: Dict[str, List[str]] = {aid: [] for aid in corpus.ids()}
        for art in corpus:
            for ref in art.reference_ids:
                if ref in self._citations:
                    self._citations[ref].append(art.article_id)

    def references(self, article_id: str) -> Sequence[str]:
        if article_id not in self._corpus:
            return []
        return [r for r in self._corpus.get(article_id).reference_ids if r in self._corpus]

    def citations(self, article_id: str) -> Sequence[str]:
        return self._citations.get(article_id, [])

    def has_full_text(self, article_id: str) -> bool:
        return article_id in self._corpus

    def subject_of(self, article_id: str) -> Optional[str]:
        return self._corpus.get(article_id).subject if article_id in self._corpus else None


class RateLimiter:
    """Token bucket; ``acquire`` blocks until a token is available."""

    def __init__(self, rate_per_second: float, capacity: int = 1):
        self.rate = float(rate_per_second)
        self.capacity = float(capacity)
        self._tokens = float(capacity)
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


# fieldsOfStudy labels mapped onto the eight corpus subjects.
_SUBJECT_MAP = {
    "Computer Science": "CS",
    "Economics": "Economics",
    "Engineering": "EE",
    "Mathematics": "Math",
    "Physics": "Physics",
    "Biology": "Biology",
    "Medicine": "Biology",
    "Business": "Finance",
}


class SemanticScholarClient:
    """HTTP client for Semantic Scholar-compatible article/reference/citation lookups.

    Requests are serialized through a rate limiter and retried with backoff;
    persistent failures raise :class:`TransportError`. The API key is read
    from an environment variable and sent as ``x-api-key``.
    """

    def __init__(
        self,
        base_url: str = "https://api.semanticscholar.org/graph/v1",
        api_key_env: str = "S2_API_KEY",
        rate_limiter: Optional[RateLimiter] = None,
        max_retries: int = 3,
        timeout: float = 30.0,
        retry_wait: float = 1.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        headers = {}
        key = os.environ.get(api_key_env, "")
        if key:
            headers["x-api-key"] = key
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport
        )
        self._limiter = rate_limiter or RateLimiter(rate_per_second=1.0)
        self._max_retries = max_retries
        self._retry_wait = retry_wait

    def _get(self, path: str, params: dict) -> dict:
        last_error = None
        for attempt in range(self._max_retries + 1):
            self._limiter.acquire()
            try:
                resp = self._client.get(path, params=params)
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if resp.status_code == 200:
                    return resp.json()
                if resp.status_code not in (429, 500, 502, 503, 504):
                    raise TransportError(f"GET {path} failed with status {resp.status_code}")
                last_error = RuntimeError(f"status {resp.status_code}")
            if attempt < self._max_retries:
                time.sleep(min(self._retry_wait * 2.0 ** attempt, 10.0))
        raise TransportError(f"GET {path} failed after {self._max_retries + 1} attempts: {last_error}")

    def _linked_ids(self, article_id: str, relation: str, key: str) -> List[str]:
        out: List[str] = []
        offset = 0
        while True:
            payload = self._get(
                f"/paper/{article_id}/{relation}",
                {"fields": "paperId,openAccessPdf", "limit": 500, "offset": offset},
            )
            for item in payload.get("data", []):
                linked = item.get(key) or {}
                if linked.get("paperId"):
                    out.append(linked["paperId"])
            nxt = payload.get("next")
            if nxt is None:
                return out
            offset = nxt

    def references(self, article_id: str) -> Sequence[str]:
        return self._linked_ids(article_id, "references", "citedPaper")

    def citations(self, article_id: str) -> Sequence[str]:
        return self._linked_ids(article_id, "citations", "citingPaper")

    def has_full_text(self, article_id: str) -> bool:
        payload = self._get(f"/paper/{article_id}", {"fields": "openAccessPdf"})
        pdf = payload.get("openAccessPdf") or {}
        return bool(pdf.get("url"))

    def subject_of(self, article_id: str) -> Optional[str]:
        payload = self._get(f"/paper/{article_id}", {"fields": "fieldsOfStudy"})
        for label in payload.get("fieldsOfStudy") or []:
            if label in _SUBJECT_MAP:
                return _SUBJECT_MAP[label]
        return None
