import pytest
from fractions import Fraction

from corpusqa.errors import ConfigurationError
from corpusqa.tokenizer import (
    DEFAULT_TOKENIZER,
    HEURISTIC,
    TokenizerSpec,
    VOCAB_FILE,
    level_budget,
    tokenize_count,
)


def test_empty_text_counts_zero():
    assert tokenize_count("", DEFAULT_TOKENIZER) == 0


def test_heuristic_exact_division():
    spec = TokenizerSpec(kind=HEURISTIC, chars_per_token=4)
    assert tokenize_count("x" * 4096, spec) == 1024


def test_heuristic_rounds_up():
    spec = TokenizerSpec(kind=HEURISTIC, chars_per_token=4)
    assert tokenize_count("x" * 5, spec) == 2


def test_heuristic_fraction_rate():
    spec = TokenizerSpec(kind=HEURISTIC, chars_per_token=Fraction(7, 2))
    assert tokenize_count("x" * 7, spec) == 2
    assert tokenize_count("x" * 8, spec) == 3


def test_monotone_under_concatenation():
    spec = DEFAULT_TOKENIZER
    a = "alpha beta gamma"
    b = "delta epsilon"
    assert tokenize_count(a + b, spec) >= max(tokenize_count(a, spec), tokenize_count(b, spec))


def test_spec_requires_exactly_one_mode():
    with pytest.raises(ConfigurationError):
        TokenizerSpec(kind=HEURISTIC, vocab_path="somewhere")
    with pytest.raises(ConfigurationError):
        TokenizerSpec(kind=VOCAB_FILE)
    with pytest.raises(ConfigurationError):
        TokenizerSpec(kind="bogus")
    with pytest.raises(ConfigurationError):
        TokenizerSpec(chars_per_token=0)


def test_vocab_mode_longest_match(tmp_path):
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("ab\nabc\nc\n", encoding="utf-8")
    spec = TokenizerSpec(kind=VOCAB_FILE, vocab_path=str(vocab))
    # "abc" matches the longest entry, "d" is an unknown single char.
    assert tokenize_count("abcd", spec) == 2
    assert tokenize_count("abc", spec) == 1
    assert tokenize_count("cab", spec) == 2


def test_vocab_mode_deterministic(tmp_path):
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("th\nthe\nquick\n \n", encoding="utf-8")
    spec = TokenizerSpec(kind=VOCAB_FILE, vocab_path=str(vocab))
    text = "the quick the thquick"
    assert tokenize_count(text, spec) == tokenize_count(text, spec)


def test_vocab_file_unreadable():
    spec = TokenizerSpec(kind=VOCAB_FILE, vocab_path="/nonexistent/vocab.txt")
    with pytest.raises(ConfigurationError):
        tokenize_count("abc", spec)


def test_level_budgets():
    assert level_budget("64K") == 65536
    assert level_budget("128K") == 131072
    assert level_budget("512K") == 524288
    assert level_budget("1M") == 1048576
    assert level_budget("8K") == 8192
    assert level_budget("2M") == 2097152
    assert level_budget(5000) == 5000


def test_level_budget_rejects_garbage():
    with pytest.raises(ConfigurationError):
        level_budget("64Q")
    with pytest.raises(ConfigurationError):
        level_budget(-1)
