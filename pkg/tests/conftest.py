"""Shared fixtures: small resource tables and model helpers."""

import numpy as np
import pytest

from hsdlab.model import ModelConfig, init_params
from hsdlab.preprocess import (EncodedSample, UnigramTable,
                               bundled_emoji_table)
from hsdlab.rng import splitmix64_values, uniforms


@pytest.fixture(scope="session")
def emoji_table():
    return bundled_emoji_table()


@pytest.fixture(scope="session")
def unigram_table():
    counts = {
        "ban": 100, "social": 80, "media": 90, "hate": 50, "the": 500,
        "news": 70, "daily": 40, "win": 45, "fair": 30, "score": 35,
    }
    return UnigramTable(counts=counts)


@pytest.fixture(scope="session")
def unigram_table_50():
    """50 words with a Zipf-ish count profile for segmenter oracles."""
    words = [
        "a", "an", "the", "to", "of", "in", "on", "at", "by", "for",
        "ban", "social", "media", "hate", "free", "press", "news", "now",
        "stop", "go", "win", "fair", "play", "game", "day", "all", "love",
        "life", "time", "good", "bad", "real", "fake", "true", "vote",
        "right", "left", "peace", "war", "word", "work", "home", "land",
        "rain", "sun", "star", "moon", "sea", "sky", "fire",
    ]
    counts = {w: max(1000 // (i + 1), 12) for i, w in enumerate(words)}
    return UnigramTable(counts=counts)


TINY_CFG = ModelConfig(vocab_size=50, emb_dim=8, hidden_dim=8, attn_dim=8,
                       dense_dim=8, max_len=5, dropout=0.0)


@pytest.fixture
def tiny_cfg():
    return TINY_CFG


def make_encoded(seed: int, true_len: int, max_len: int = 5,
                 vocab_size: int = 50) -> EncodedSample:
    """Deterministic EncodedSample with non-reserved token ids."""
    vals = splitmix64_values(seed, max_len)
    ids = np.zeros(max_len, dtype=np.int32)
    mask = np.zeros(max_len, dtype=np.uint8)
    for t in range(true_len):
        ids[t] = 2 + int(vals[t] % (vocab_size - 2))
        mask[t] = 1
    return EncodedSample(ids=ids, mask=mask, true_len=true_len)


def perturbed_params(cfg: ModelConfig, seed: int, dtype=np.float64,
                     scale: float = 0.05):
    """init_params plus small uniform noise on every tensor (biases too),
    so gradient checks exercise all entries away from init symmetry."""
    params = init_params(cfg, seed, dtype=dtype)
    offset = 0
    for name in sorted(params.tensors):
        arr = params.tensors[name]
        noise = (uniforms(seed ^ 0x5EED, arr.size, offset) * 2.0 - 1.0) * scale
        offset += arr.size
        arr += noise.reshape(arr.shape).astype(dtype)
    params.tensors["emb"][0] = 0.0
    return params
