"""Bundled data assets (template library, mini corpus)."""
