"""Shared fixtures for the test suite; factories live in suite_helpers."""

from __future__ import annotations

import pytest


@pytest.fixture
def tmp_jsonl(tmp_path):
    def path(name: str):
        return tmp_path / name
    return path
