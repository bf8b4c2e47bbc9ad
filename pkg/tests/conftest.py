import numpy as np
import pytest

from randenc.embeddings import TokenSequence, WordEmbeddingTable


@pytest.fixture
def nprng():
    return np.random.default_rng(20240817)


@pytest.fixture
def tiny_table():
    rng = np.random.default_rng(99)
    words = ["the", "cat", "sat", "down", "fast", "dog", "ran", "*"]
    return WordEmbeddingTable(
        dim=6, vectors={w: rng.normal(size=6) for w in words}, duplicates=0
    )


def make_seq(rng, t_len: int, dim: int) -> TokenSequence:
    return TokenSequence([f"t{i}" for i in range(t_len)], rng.normal(size=(t_len, dim)))


@pytest.fixture
def seq_factory(nprng):
    def factory(t_len: int, dim: int) -> TokenSequence:
        return make_seq(nprng, t_len, dim)

    return factory
