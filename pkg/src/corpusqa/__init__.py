"""Toolkit for building long-context QA benchmarks over scientific-article collections.

The pipeline assembles article collections at token-budget levels, derives a
three-table metadata database per collection, instantiates SQL query templates
against it for ground-truth answers, converts the queries to natural-language
questions with round-trip validation through a chat endpoint, and evaluates
models on the result with exact-match / token-F1 scoring and failure analysis.
"""

__version__ = "0.1.0"
