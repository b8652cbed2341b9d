"""Token counting for budget arithmetic.

Two interchangeable modes: a characters-per-token heuristic (default, needs no
assets) and a greedy longest-match count over a newline-delimited vocabulary
file for model-faithful budgets. Counts are deterministic for a fixed spec.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from .errors import ConfigurationError

HEURISTIC = "chars_per_token_heuristic"
VOCAB_FILE = "vocab_file"

# Budget levels are counted with K = 1,024 and M = 1,024K.
KIB = 1024
STANDARD_LEVELS = ("64K", "128K", "512K", "1M")

_LEVEL_RE = re.compile(r"^(\d+)([KM])$")


@dataclass(frozen=True)
class TokenizerSpec:
    """Selects exactly one counting mode."""

    kind: str = HEURISTIC
    vocab_path: Optional[str] = None
    chars_per_token: Union[int, float, Fraction] = 4

    def __post_init__(self):
        if self.kind == HEURISTIC:
            if self.vocab_path is not None:
                raise ConfigurationError("heuristic mode does not take a vocab_path")
            if not self.chars_per_token or self.chars_per_token <= 0:
                raise ConfigurationError("chars_per_token must be positive")
        elif self.kind == VOCAB_FILE:
            if self.vocab_path is None:
                raise ConfigurationError("vocab_file mode requires vocab_path")
        else:
            raise ConfigurationError(f"unknown tokenizer kind {self.kind!r}")


DEFAULT_TOKENIZER = TokenizerSpec()

_vocab_cache: dict = {}


def _load_vocab(path: str) -> dict:
    """Load a vocabulary as {first_char: [tokens sorted longest-first]}."""
    key = str(Path(path).resolve())
    if key in _vocab_cache:
        return _vocab_cache[key]
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"vocab file unreadable: {path}: {exc}") from exc
    buckets: dict = {}
    for line in raw.splitlines():
        if line:
            buckets.setdefault(line[0], []).append(line)
    for tokens in buckets.values():
        tokens.sort(key=len, reverse=True)
    _vocab_cache[key] = buckets
    return buckets


def tokenize_count(text: str, spec: TokenizerSpec = DEFAULT_TOKENIZER) -> int:
    """Count tokens in ``text`` under ``spec``.

    Heuristic mode returns ceil(len(text) / chars_per_token). Vocab mode scans
    left to right taking the longest matching vocabulary entry at each point;
    a character matching no entry costs one token.
    """
    if not text:
        return 0
    if spec.kind == HEURISTIC:
        cpt = spec.chars_per_token
        if isinstance(cpt, Fraction):
            return -(-len(text) * cpt.denominator // cpt.numerator)
        return math.ceil(len(text) / cpt)

    buckets = _load_vocab(spec.vocab_path)
    count = 0
    i = 0
    n = len(text)
    while i < n:
        step = 1
        for tok in buckets.get(text[i], ()):
            if text.startswith(tok, i):
                step = len(tok)
                break
        count += 1
        i += step
    return count


def level_budget(level: Union[str, int]) -> int:
    """Resolve a level label like ``"64K"`` or ``"1M"`` (or a raw int) to tokens."""
    if isinstance(level, int):
        if level <= 0:
            raise ConfigurationError(f"level budget must be positive, got {level}")
        return level
    m = _LEVEL_RE.match(level.strip())
    if not m:
        raise ConfigurationError(f"unparseable level {level!r} (expected e.g. '64K' or '1M')")
    value, unit = int(m.group(1)), m.group(2)
    return value * (KIB if unit == "K" else KIB * KIB)
