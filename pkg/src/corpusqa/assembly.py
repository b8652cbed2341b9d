"""Collection assembly: sampling articles up to a token-budget level.

A collection starts from a random article and grows — by uniform sampling or
by randomized DFS/BFS over the cluster-internal citation graph — until its
token total first reaches the level budget, then keeps growing if needed until
it holds at least four articles. An emitted set of collections additionally
satisfies a pairwise overlap cap of one half, enforced greedily with a retry
budget.
"""

from __future__ import annotations

import hashlib
import random
from collections import Counter, deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .corpus import Corpus
from .errors import AssemblyInfeasibleError, DanglingReferenceError
from .graph_api import ArticleCluster
from .tokenizer import DEFAULT_TOKENIZER, TokenizerSpec, level_budget, tokenize_count

MIN_ARTICLES = 4
MAX_OVERLAP = 0.5
SEPARATOR = "\n\n---\n\n"

STRATEGY_RANDOM = "random"
STRATEGY_DFS = "dfs"
STRATEGY_BFS = "bfs"


@dataclass(frozen=True)
class Collection:
    """An ordered set of at least four articles crossing a token budget."""

    collection_id: str
    level: str
    article_ids: Tuple[str, ...]
    strategy: str
    total_tokens: int
    subject: str = ""


@dataclass(frozen=True)
class ContextDocument:
    """Concatenated member full texts with per-article token offsets."""

    collection_id: str
    text: str
    article_offsets: Tuple[Tuple[str, int, int], ...]


def _member_ids(cluster: Union[ArticleCluster, Iterable[str]]) -> List[str]:
    if isinstance(cluster, ArticleCluster):
        return sorted(cluster.member_ids)
    return sorted(cluster)


def _check_feasible(corpus: Corpus, ids: Sequence[str], budget: int, level) -> None:
    if len(ids) < MIN_ARTICLES:
        raise AssemblyInfeasibleError(
            "min_articles", f"cluster has {len(ids)} articles, need >= {MIN_ARTICLES}"
        )
    mass = sum(corpus.get(a).token_count for a in ids)
    if mass < budget:
        raise AssemblyInfeasibleError(
            "token_mass", f"cluster holds {mass} tokens, below the {level} budget of {budget}"
        )


def _finalize(corpus: Corpus, picked: List[str], level, strategy: str) -> Collection:
    level_label = level if isinstance(level, str) else str(level)
    digest = hashlib.sha1(
        "|".join([level_label, strategy, ",".join(picked)]).encode("utf-8")
    ).hexdigest()[:12]
    subjects = Counter(corpus.get(a).subject for a in picked)
    return Collection(
        collection_id=f"c{digest}",
        level=level_label,
        article_ids=tuple(picked),
        strategy=strategy,
        total_tokens=sum(corpus.get(a).token_count for a in picked),
        subject=subjects.most_common(1)[0][0],
    )


def assemble_random(
    corpus: Corpus,
    cluster: Union[ArticleCluster, Iterable[str]],
    level: Union[str, int],
    rng: random.Random,
) -> Collection:
    """Uniform sampling without replacement until the budget first crosses."""
    ids = _member_ids(cluster)
    budget = level_budget(level)
    _check_feasible(corpus, ids, budget, level)

    order = rng.sample(ids, len(ids))
    picked: List[str] = []
    total = 0
    for aid in order:
        picked.append(aid)
        total += corpus.get(aid).token_count
        if total >= budget and len(picked) >= MIN_ARTICLES:
            break
    return _finalize(corpus, picked, level, STRATEGY_RANDOM)


def _cluster_adjacency(corpus: Corpus, ids: Sequence[str]) -> Dict[str, List[str]]:
    """Undirected citation adjacency restricted to the cluster."""
    id_set = set(ids)
    adj: Dict[str, set] = {a: set() for a in ids}
    for aid in ids:
        for ref in corpus.get(aid).reference_ids:
            if ref in id_set:
                adj[aid].add(ref)
                adj[ref].add(aid)
    return {a: sorted(ns) for a, ns in adj.items()}


def assemble_traversal(
    corpus: Corpus,
    cluster: Union[ArticleCluster, Iterable[str]],
    level: Union[str, int],
    mode: str,
    rng: random.Random,
) -> Collection:
    """DFS or BFS over cluster citation edges, restarting on exhausted components."""
    if mode not in (STRATEGY_DFS, STRATEGY_BFS):
        raise ValueError(f"mode must be 'dfs' or 'bfs', got {mode!r}")
    ids = _member_ids(cluster)
    budget = level_budget(level)
    _check_feasible(corpus, ids, budget, level)
    adj = _cluster_adjacency(corpus, ids)

    picked: List[str] = []
    visited = set()
    total = 0

    def done() -> bool:
        return total >= budget and len(picked) >= MIN_ARTICLES

    while not done():
        unvisited = [a for a in ids if a not in visited]
        frontier = deque([rng.choice(unvisited)])
        while frontier and not done():
            node = frontier.pop() if mode == STRATEGY_DFS else frontier.popleft()
            if node in visited:
                continue
            visited.add(node)
            picked.append(node)
            total += corpus.get(node).token_count
            neighbors = [n for n in adj[node] if n not in visited]
            neighbors = rng.sample(neighbors, len(neighbors))
            if mode == STRATEGY_DFS:
                # Reversed so the first sampled neighbor is explored first.
                frontier.extend(reversed(neighbors))
            else:
                frontier.extend(neighbors)
    return _finalize(corpus, picked, level, mode)


def check_overlap(a: Collection, b: Collection) -> float:
    """Shared-article fraction relative to the smaller collection."""
    sa, sb = set(a.article_ids), set(b.article_ids)
    return len(sa & sb) / min(len(sa), len(sb))


def assemble_batch(
    corpus: Corpus,
    cluster: Union[ArticleCluster, Iterable[str]],
    level: Union[str, int],
    count: int,
    strategy: str,
    rng: random.Random,
    accepted: Optional[List[Collection]] = None,
    max_retries: int = 50,
) -> List[Collection]:
    """Emit up to ``count`` collections whose pairwise overlap stays <= 0.5.

    Candidates exceeding the cap against any already-accepted collection are
    discarded; after ``max_retries`` consecutive rejections for one slot the
    batch stops early with whatever was accepted.
    """
    accepted = list(accepted) if accepted else []
    out: List[Collection] = []
    while len(out) < count:
        candidate = None
        for _ in range(max_retries):
            if strategy == STRATEGY_RANDOM:
                cand = assemble_random(corpus, cluster, level, rng)
            else:
                cand = assemble_traversal(corpus, cluster, level, strategy, rng)
            if all(check_overlap(cand, prev) <= MAX_OVERLAP for prev in accepted + out):
                candidate = cand
                break
        if candidate is None:
            break
        out.append(candidate)
    return out


def concat_context(
    collection: Collection,
    corpus: Corpus,
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER,
) -> ContextDocument:
    """Concatenate member texts in collection order with a fixed separator.

    Offsets are running token sums of the parts, so consecutive members are
    adjacent up to the separator width.
    """
    missing = [a for a in collection.article_ids if a not in corpus]
    if missing:
        raise DanglingReferenceError(
            f"collection {collection.collection_id} references missing articles: {missing}"
        )
    parts: List[str] = []
    offsets: List[Tuple[str, int, int]] = []
    cursor = 0
    sep_tokens = tokenize_count(SEPARATOR, tokenizer)
    for i, aid in enumerate(collection.article_ids):
        text = corpus.get(aid).full_text
        if i > 0:
            parts.append(SEPARATOR)
            cursor += sep_tokens
        start = cursor
        cursor += tokenize_count(text, tokenizer)
        offsets.append((aid, start, cursor))
        parts.append(text)
    return ContextDocument(
        collection_id=collection.collection_id,
        text="".join(parts),
        article_offsets=tuple(offsets),
    )
