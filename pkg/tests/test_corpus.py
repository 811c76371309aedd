import json

import numpy as np
import pytest

from tempora.corpus import (
    CorpusFormatError,
    CorpusWarning,
    Document,
    Vocabulary,
    ingest,
    serialize,
    split_fraction,
    split_held_out,
)

from conftest import make_corpus, random_corpus

# per-year document counts of the reference evaluation corpus
YEARLY_DOC_COUNTS = [73, 97, 265, 119, 108, 91, 219, 141, 192, 162,
                     382, 336, 329, 407, 395, 498, 367, 604, 559]


def write_corpus(tmp_path, slices, vocabulary=None):
    entries = []
    for label, lines in slices:
        path = tmp_path / f"{label}.bow"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        entries.append({"label": label, "file": path.name})
    manifest = {"slices": entries}
    if vocabulary is not None:
        (tmp_path / "vocab.txt").write_text("\n".join(vocabulary) + "\n", encoding="utf-8")
        manifest["vocabulary"] = "vocab.txt"
    mpath = tmp_path / "manifest.json"
    mpath.write_text(json.dumps(manifest), encoding="utf-8")
    return mpath


class TestVocabulary:
    def test_ids_dense_and_stable(self):
        vocab = Vocabulary.from_terms(["b", "a", "c"])
        assert [vocab.id(t) for t in ("b", "a", "c")] == [0, 1, 2]
        assert [vocab.term(i) for i in range(3)] == ["b", "a", "c"]

    def test_duplicate_term_rejected(self):
        with pytest.raises(CorpusFormatError, match="duplicate"):
            Vocabulary.from_terms(["a", "a"])

    def test_hash_changes_with_order(self):
        assert (Vocabulary.from_terms(["a", "b"]).hash_hex()
                != Vocabulary.from_terms(["b", "a"]).hash_hex())


class TestDocument:
    def test_simple_counts(self):
        doc = Document.from_counts({0: 2, 1: 1})
        assert doc.length == 3
        assert doc.dense(2).tolist() == [2.0, 1.0]

    def test_empty_rejected(self):
        with pytest.raises(CorpusFormatError):
            Document.from_counts({})

    def test_nonpositive_count_rejected(self):
        with pytest.raises(CorpusFormatError):
            Document.from_counts({0: 0})

    def test_dense_checks_vocabulary_size(self):
        doc = Document.from_counts({5: 1})
        with pytest.raises(ValueError, match="outside vocabulary"):
            doc.dense(3)


class TestIngest:
    def test_word_counts_accumulate(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["a:2 b:1"])])
        corpus = ingest(m)
        doc = corpus.slices[0].documents[0]
        assert doc.length == 3
        assert dict(doc.as_pairs()) == {corpus.vocabulary.id("a"): 2,
                                        corpus.vocabulary.id("b"): 1}

    def test_empty_slice_warns(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["a:1"]), ("1997", [""])])
        with pytest.warns(CorpusWarning, match="1997"):
            corpus = ingest(m)
        assert corpus.slices[1].n_docs == 0

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["# header", "", "a:1 b:2", ""])])
        corpus = ingest(m)
        assert corpus.slices[0].n_docs == 1

    def test_malformed_pair_names_file_and_line(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["a:1", "b:x"])])
        with pytest.raises(CorpusFormatError, match=r"1996\.bow:2"):
            ingest(m)

    def test_missing_count_rejected(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["justaword"])])
        with pytest.raises(CorpusFormatError, match="term:count"):
            ingest(m)

    def test_unknown_token_with_presupplied_vocab(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["a:1 z:1"])], vocabulary=["a", "b"])
        with pytest.raises(CorpusFormatError, match="'z'"):
            ingest(m)

    def test_presupplied_vocab_fixes_ids(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["b:1 a:1"])], vocabulary=["a", "b"])
        corpus = ingest(m)
        assert corpus.vocabulary.terms == ("a", "b")

    def test_vocab_terms_may_contain_spaces(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["machine_translation:3"])],
                         vocabulary=["machine translation", "machine_translation"])
        corpus = ingest(m)
        assert "machine translation" in corpus.vocabulary

    def test_term_may_contain_colon(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["a:b:2"])])
        corpus = ingest(m)
        assert corpus.vocabulary.terms == ("a:b",)

    def test_duplicate_labels_rejected(self, tmp_path):
        m = write_corpus(tmp_path, [("1996", ["a:1"]), ("1996", ["b:1"])])
        with pytest.raises(CorpusFormatError, match="unique"):
            ingest(m)

    def test_yearly_sized_corpus_shape(self, tmp_path):
        slices = [(str(1996 + i), ["a:1"] * n)
                  for i, n in enumerate(YEARLY_DOC_COUNTS)]
        corpus = ingest(write_corpus(tmp_path, slices))
        assert corpus.n_slices == 19
        assert corpus.total_docs() == sum(YEARLY_DOC_COUNTS) == 5344


class TestRoundTrip:
    def test_serialize_ingest_identity(self, tmp_path, rng):
        corpus = random_corpus(rng, n_slices=3, n_terms=5, docs_per_slice=4)
        manifest = serialize(corpus, tmp_path / "out")
        back = ingest(manifest)
        assert back.vocabulary.terms == corpus.vocabulary.terms
        assert back.labels == corpus.labels
        for s1, s2 in zip(corpus.slices, back.slices):
            assert s1.n_docs == s2.n_docs
            for d1, d2 in zip(s1.documents, s2.documents):
                assert d1.as_pairs() == d2.as_pairs()

    def test_token_conservation(self, tmp_path):
        lines = ["a:2 b:3", "c:1 a:4"]
        m = write_corpus(tmp_path, [("1996", lines)])
        corpus = ingest(m)
        assert corpus.total_tokens() == 2 + 3 + 1 + 4


class TestSplits:
    def test_held_out_sizes(self, rng):
        corpus = random_corpus(rng, n_slices=19, docs_per_slice=12)
        train, held = split_held_out(corpus, 10, seed=1)
        assert held.total_docs() == 190
        assert train.total_docs() == corpus.total_docs() - 190

    def test_held_out_zero_is_identity(self, rng):
        corpus = random_corpus(rng)
        train, held = split_held_out(corpus, 0, seed=1)
        assert held.total_docs() == 0
        assert train.total_docs() == corpus.total_docs()

    def test_held_out_deterministic(self, rng):
        corpus = random_corpus(rng, docs_per_slice=6)
        a = split_held_out(corpus, 2, seed=7)
        b = split_held_out(corpus, 2, seed=7)
        for s1, s2 in zip(a[1].slices, b[1].slices):
            assert [d.as_pairs() for d in s1.documents] == [d.as_pairs() for d in s2.documents]

    def test_held_out_too_large_names_slice(self, rng):
        corpus = random_corpus(rng, docs_per_slice=2)
        with pytest.raises(ValueError, match="2000"):
            split_held_out(corpus, 3, seed=0)

    def test_fraction_half_of_two(self, rng):
        corpus = random_corpus(rng, n_slices=1, docs_per_slice=2)
        train, test = split_fraction(corpus, 0.5, seed=0)
        assert train.total_docs() == 1 and test.total_docs() == 1

    def test_fraction_floor_keeps_single_doc_in_train(self, rng):
        corpus = random_corpus(rng, n_slices=1, docs_per_slice=1)
        train, test = split_fraction(corpus, 0.8, seed=0)
        assert train.total_docs() == 1 and test.total_docs() == 0

    def test_fraction_out_of_range(self, rng):
        corpus = random_corpus(rng)
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                split_fraction(corpus, bad, seed=0)

    def test_fraction_exact_tenths(self, rng):
        # 0.9 of 10 docs must leave exactly 1 test doc despite float 0.9
        corpus = random_corpus(rng, n_slices=1, docs_per_slice=10)
        train, test = split_fraction(corpus, 0.9, seed=0)
        assert test.total_docs() == 1

    def test_fraction_on_yearly_sized_corpus(self, tmp_path):
        slices = [(str(1996 + i), ["a:1"] * n)
                  for i, n in enumerate(YEARLY_DOC_COUNTS)]
        corpus = ingest(write_corpus(tmp_path, slices))
        train, test = split_fraction(corpus, 0.8, seed=0)
        # floor((1 - 0.8) * N) per slice
        expected = sum(n // 5 for n in YEARLY_DOC_COUNTS)
        assert test.total_docs() == expected == 1060

    def test_splits_partition(self, rng):
        corpus = random_corpus(rng, n_slices=2, docs_per_slice=5)
        for seed in range(5):
            train, test = split_fraction(corpus, 0.6, seed=seed)
            for t in range(2):
                combined = sorted(
                    tuple(d.as_pairs()) for d in
                    train.slices[t].documents + test.slices[t].documents)
                original = sorted(tuple(d.as_pairs())
                                  for d in corpus.slices[t].documents)
                assert combined == original
