"""Shared builders for tiny corpora and model instances."""

import numpy as np
import pytest

from tempora.corpus import Document, TemporalCorpus, TimeSlice, Vocabulary
from tempora.replicated_softmax import RsmParams
from tempora.temporal_model import TemporalModelParams


def doc_from_vector(counts) -> Document:
    return Document.from_counts({i: int(c) for i, c in enumerate(counts) if c})


def make_corpus(doc_vectors_by_slice, labels=None, n_terms=None) -> TemporalCorpus:
    """Corpus from nested count-vector lists, one list per slice."""
    if n_terms is None:
        n_terms = len(doc_vectors_by_slice[0][0])
    vocab = Vocabulary.from_terms([f"w{i:02d}" for i in range(n_terms)])
    slices = []
    for t, vectors in enumerate(doc_vectors_by_slice):
        label = labels[t] if labels else str(2000 + t)
        slices.append(TimeSlice(label, tuple(doc_from_vector(v) for v in vectors)))
    return TemporalCorpus(vocab, tuple(slices))


def random_corpus(rng, n_slices=3, n_terms=4, docs_per_slice=2, doc_len=3
                  ) -> TemporalCorpus:
    by_slice = [
        [rng.multinomial(doc_len, np.ones(n_terms) / n_terms)
         for _ in range(docs_per_slice)]
        for _ in range(n_slices)
    ]
    return make_corpus(by_slice, n_terms=n_terms)


def random_rsm(rng, n_terms=3, n_topics=2, scale=0.5) -> RsmParams:
    return RsmParams(
        weights=rng.normal(0, scale, (n_terms, n_topics)),
        vbias=rng.normal(0, scale / 2, n_terms),
        hbias=rng.normal(0, scale / 2, n_topics),
    )


def random_temporal(rng, n_terms=3, n_topics=2, n_state=2, scale=0.4
                    ) -> TemporalModelParams:
    params = TemporalModelParams.init_random(n_terms, n_topics, n_state, rng,
                                             sigma=scale)
    params.state_bias = rng.normal(0, scale / 2, n_state)
    params.state0 = rng.normal(0, scale / 2, n_state)
    return params


def region_corpus(seed=0, n_regions=3, region_size=10, docs_per_slice=30,
                  doc_len=20) -> TemporalCorpus:
    """Slices with disjoint vocabulary regions: slice t only uses terms
    [t * region_size, (t+1) * region_size)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xC0)))
    n_terms = n_regions * region_size
    vocab = Vocabulary.from_terms([f"w{i:02d}" for i in range(n_terms)])
    slices = []
    for t in range(n_regions):
        docs = []
        for _ in range(docs_per_slice):
            counts = rng.multinomial(doc_len, np.ones(region_size) / region_size)
            docs.append(Document.from_counts(
                {region_size * t + i: int(c) for i, c in enumerate(counts) if c}))
        slices.append(TimeSlice(str(2000 + t), tuple(docs)))
    return TemporalCorpus(vocab, tuple(slices))


def region_terms(t, region_size=10):
    return [f"w{i:02d}" for i in range(region_size * t, region_size * (t + 1))]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
