"""Shared fixtures: stub encoder weights and a small corpus embedding."""

import numpy as np
import pytest

from qdraw import embedding, pipeline

STUB_SEED = 2024


@pytest.fixture(scope="session")
def stub_weights():
    return embedding.random_weights(STUB_SEED)


@pytest.fixture(scope="session")
def small_corpus(stub_weights):
    """64 rendered-and-encoded corpus latents plus their embedding."""
    latents = pipeline.corpus_latents(64, 128, 77, stub_weights)
    emb = embedding.build_corpus_embedding(latents, perplexity=15.0, iters=300, seed=5)
    return latents, emb
