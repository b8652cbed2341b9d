"""Regenerate the bundled 12-article synthetic corpus (deterministic).

The articles carry fabricated metadata shaped like real scholarly records:
variable author lists (including names needing SQL quoting and non-ASCII),
titles with known word counts, mixed internal/external reference lists, and
markdown full text sized so desk-scale token budgets (8K-24K) produce
collections of 4-10 articles under the default 4-chars-per-token heuristic.
The internal citation graph has two connected components so traversal
assembly exercises its restart path.
"""

import hashlib
import json
import random
from pathlib import Path


def article_id_for(short: str) -> str:
    """Stable 40-hex id for a mini-corpus article, shaped like real graph ids."""
    return hashlib.sha1(f"mini-corpus:{short}".encode("utf-8")).hexdigest()


WORDS = (
    "signal model graph latent sparse kernel policy gradient sample bound "
    "operator spectral entropy convex dual measure estimator prior posterior "
    "lattice manifold tensor module spline quadrature basis residual flow "
    "stability regret drift diffusion ensemble cascade threshold phase field "
    "response channel capacity noise filter adaptive robust causal dynamic"
).split()

FIRST = (
    "Amelia Bastian Chiara Daniel Elena Farid Greta Hiroshi Ingrid Jonas "
    "Katarina Liam Mariana Nadia Oliver Priya Quentin Rosa Stefan Tomas"
).split()
LAST = (
    "Arnold Baxter Chen Dubois Eriksen Fontana Garza Hartley Ibarra Jansen "
    "Kovacs Larsen Moreau Novak O'Neil Petrov Quiroga Rossi Sato Tanaka "
    "Ulrich Vargas Watanabe Ximenes Yilmaz Zhang Muñoz Keller"
).split()

ARTICLES = [
    # (id, subject, title, n_authors, target_tokens, internal_refs, n_external)
    ("m01", "CS", "Sparse Attention Routing for Structured Long Sequence Modeling", 5, 2600, ["m02", "m03"], 42),
    ("m02", "CS", "Benchmarking Retrieval Augmented Systems", 8, 3400, ["m04"], 35),
    ("m03", "Math", "Spectral Bounds for Random Graph Laplacians under Sparse Perturbations", 3, 2200, ["m04", "m05"], 58),
    ("m04", "Math", "A Unified View of Convex Duality", 6, 3000, ["m06"], 24),
    ("m05", "Statistics", "Posterior Contraction Rates in High Dimensional Regression Models", 7, 2800, ["m06"], 61),
    ("m06", "Statistics", "Robust Estimation with Heavy Tails", 4, 2400, [], 30),
    ("m07", "Physics", "Phase Transitions in Driven Lattice Systems with Long Range Coupling", 9, 3200, ["m01", "m08"], 47),
    ("m08", "Physics", "Noise Spectra of Coupled Oscillators", 5, 2600, ["m09"], 20),
    ("m09", "Biology", "Gene Regulatory Network Inference from Single Cell Trajectories", 10, 3000, ["m10"], 73),
    ("m10", "Biology", "Metabolic Flux Balance in Microbial Communities across Nutrient Gradients", 6, 2400, [], 39),
    ("m11", "Economics", "Auction Design under Correlated Private Signals", 4, 2800, ["m12"], 28),
    ("m12", "Finance", "Volatility Clustering and Regime Shifts in Emerging Market Index Returns", 3, 3400, [], 52),
]


def _prose(rng: random.Random, n_chars: int) -> str:
    out = []
    length = 0
    while length < n_chars:
        sentence_words = [rng.choice(WORDS) for _ in range(rng.randint(8, 18))]
        sentence = " ".join(sentence_words).capitalize() + "."
        out.append(sentence)
        length += len(sentence) + 1
    return " ".join(out)


def _full_text(rng: random.Random, title: str, authors, target_tokens: int) -> str:
    target_chars = target_tokens * 4
    sections = ["Abstract", "Introduction", "Methods", "Results", "Discussion", "Conclusion"]
    head = f"# {title}\n\n*{', '.join(authors)}*\n\n"
    body_budget = max(target_chars - len(head) - 400, 600)
    per_section = body_budget // len(sections)
    parts = [head]
    for name in sections:
        parts.append(f"## {name}\n\n{_prose(rng, per_section)}\n\n")
    text = "".join(parts)
    # Pad to land exactly on the character target (token count = chars / 4).
    if len(text) < target_chars:
        parts.append(_prose(rng, target_chars - len(text)))
        text = "".join(parts)
    return text[:target_chars]


def main() -> None:
    rng = random.Random(20240501)
    name_pool = [f"{f} {l}" for l in LAST for f in FIRST]
    rng.shuffle(name_pool)
    cursor = 0
    records = []
    for short, subject, title, n_authors, target, internal, n_external in ARTICLES:
        authors = name_pool[cursor : cursor + n_authors]
        cursor += n_authors
        externals = [
            hashlib.sha1(f"mini-ext:{short}:{k}".encode("utf-8")).hexdigest()
            for k in range(n_external)
        ]
        refs = [article_id_for(s) for s in internal] + externals
        rng.shuffle(refs)
        records.append(
            {
                "article_id": article_id_for(short),
                "title": title,
                "authors": authors,
                "reference_ids": refs,
                "full_text": _full_text(rng, title, authors, target),
                "subject": subject,
            }
        )
    target = Path(__file__).resolve().parents[1] / "src" / "corpusqa" / "data" / "mini_corpus.jsonl"
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    total = sum(len(r["full_text"]) for r in records) // 4
    print(f"wrote {len(records)} articles (~{total} heuristic tokens) to {target}")


if __name__ == "__main__":
    main()
