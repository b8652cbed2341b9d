"""Prompt template text assets."""
