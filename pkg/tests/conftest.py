"""Shared fixtures: deterministic graphs wrapped from kg_fixtures builders."""

from __future__ import annotations

import pytest

from hetero_kge.graph import KnowledgeGraph

from kg_fixtures import build_cluster_kg, build_synthetic_kg, build_toy_kg


@pytest.fixture(scope="session")
def toy_kg() -> KnowledgeGraph:
    return build_toy_kg()


@pytest.fixture(scope="session")
def synthetic_kg() -> KnowledgeGraph:
    return build_synthetic_kg()


@pytest.fixture(scope="session")
def cluster_kg() -> KnowledgeGraph:
    return build_cluster_kg()
