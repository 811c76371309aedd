"""Time-sliced bag-of-words corpora over a single shared vocabulary.

A corpus is an ordered sequence of time slices; each slice holds sparse
word-count documents.  All documents across all slices index into one
vocabulary so the model weights stay aligned over time.

File formats
------------
Manifest (JSON)::

    {"slices": [{"label": "1996", "file": "1996.bow"}, ...],
     "vocabulary": "vocab.txt"}        # optional

Slice file (``.bow``): one document per line, whitespace-separated
``term:count`` pairs with positive integer counts.  Lines starting with
``#`` are comments; blank lines are ignored.

Vocabulary file: one term per line, the 0-based line number is the id.
Terms in a vocabulary file may contain spaces (e.g. pre-extracted
bigrams); terms in ``.bow`` files cannot, since pairs are split on
whitespace (the count is split off at the last ``:``).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np


class CorpusFormatError(ValueError):
    """Raised when a manifest, vocabulary or slice file cannot be parsed."""


class CorpusWarning(UserWarning):
    """Non-fatal corpus irregularities (e.g. an empty slice)."""


@dataclass(frozen=True)
class Vocabulary:
    """Immutable term <-> dense-id mapping shared by every slice."""

    terms: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_terms(cls, terms) -> "Vocabulary":
        terms = tuple(terms)
        index = {}
        for i, term in enumerate(terms):
            if term in index:
                raise CorpusFormatError(f"duplicate vocabulary term {term!r}")
            index[term] = i
        return cls(terms=terms, index=index)

    @classmethod
    def from_file(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls.from_terms(lines)

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def id(self, term: str) -> int:
        return self.index[term]

    def term(self, term_id: int) -> str:
        return self.terms[term_id]

    def hash_hex(self) -> str:
        """SHA-256 of the ordered term list; used to pair checkpoints with corpora."""
        payload = "\n".join(self.terms).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class Document:
    """Sparse word counts of a single document.

    ``ids`` and ``counts`` are parallel arrays sorted by id; ``length``
    is the total number of word tokens (the replicated-softmax D_n).
    """

    ids: np.ndarray
    counts: np.ndarray
    length: int

    @classmethod
    def from_counts(cls, counts: dict[int, int]) -> "Document":
        if not counts:
            raise CorpusFormatError("empty document (no term counts)")
        ids = np.array(sorted(counts), dtype=np.int64)
        vals = np.array([counts[i] for i in ids], dtype=np.int64)
        if (ids < 0).any() or (vals < 1).any():
            raise CorpusFormatError("term ids must be >= 0 and counts >= 1")
        return cls(ids=ids, counts=vals, length=int(vals.sum()))

    def dense(self, n_terms: int) -> np.ndarray:
        if len(self.ids) and self.ids[-1] >= n_terms:
            raise ValueError(
                f"document references term id {int(self.ids[-1])} "
                f"outside vocabulary of size {n_terms}"
            )
        v = np.zeros(n_terms, dtype=np.float64)
        v[self.ids] = self.counts
        return v

    def as_pairs(self) -> list[tuple[int, int]]:
        return [(int(i), int(c)) for i, c in zip(self.ids, self.counts)]


@dataclass(frozen=True)
class TimeSlice:
    """All documents sharing one time stamp."""

    label: str
    documents: tuple[Document, ...]

    @property
    def n_docs(self) -> int:
        return len(self.documents)

    def count_matrix(self, n_terms: int) -> np.ndarray:
        """Dense (n_docs, n_terms) count matrix for this slice."""
        if not self.documents:
            return np.zeros((0, n_terms), dtype=np.float64)
        return np.stack([d.dense(n_terms) for d in self.documents])

    def count_sum(self, n_terms: int) -> np.ndarray:
        """Sum of the documents' count vectors (drives the recurrent state)."""
        return self.count_matrix(n_terms).sum(axis=0)


@dataclass(frozen=True)
class TemporalCorpus:
    """Time-ordered slices over one shared vocabulary."""

    vocabulary: Vocabulary
    slices: tuple[TimeSlice, ...]

    def __post_init__(self):
        labels = [s.label for s in self.slices]
        if len(set(labels)) != len(labels):
            raise CorpusFormatError("slice labels must be unique")
        k = len(self.vocabulary)
        for s in self.slices:
            for doc in s.documents:
                if len(doc.ids) and doc.ids[-1] >= k:
                    raise CorpusFormatError(
                        f"slice {s.label!r} references term id {int(doc.ids[-1])} "
                        f"outside vocabulary of size {k}"
                    )

    @property
    def n_slices(self) -> int:
        return len(self.slices)

    @property
    def n_terms(self) -> int:
        return len(self.vocabulary)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.slices]

    def total_docs(self) -> int:
        return sum(s.n_docs for s in self.slices)

    def total_tokens(self) -> int:
        return sum(d.length for s in self.slices for d in s.documents)

    def count_sums(self) -> np.ndarray:
        """(n_slices, n_terms) matrix of per-slice summed count vectors."""
        return np.stack([s.count_sum(self.n_terms) for s in self.slices])

    def term_totals(self) -> np.ndarray:
        """Corpus-wide count of every vocabulary term."""
        return self.count_sums().sum(axis=0)


def _parse_bow_line(line: str, vocab_index: dict[str, int] | None,
                    builder: dict[str, int] | None, where: str) -> dict[int, int]:
    counts: dict[int, int] = {}
    for token in line.split():
        term, sep, count_s = token.rpartition(":")
        if not sep or not term:
            raise CorpusFormatError(f"{where}: malformed pair {token!r} (expected term:count)")
        try:
            count = int(count_s)
        except ValueError:
            raise CorpusFormatError(f"{where}: count {count_s!r} is not an integer") from None
        if count < 1:
            raise CorpusFormatError(f"{where}: count for {term!r} must be positive, got {count}")
        if vocab_index is not None:
            if term not in vocab_index:
                raise CorpusFormatError(f"{where}: token {term!r} not in the supplied vocabulary")
            term_id = vocab_index[term]
        else:
            term_id = builder.setdefault(term, len(builder))
        counts[term_id] = counts.get(term_id, 0) + count
    return counts


def ingest(manifest_path, vocabulary_path=None) -> TemporalCorpus:
    """Read a manifest and its slice files into a :class:`TemporalCorpus`.

    Without a pre-supplied vocabulary, term ids are assigned in order of
    first appearance scanning slices in manifest order, so ingestion is
    deterministic.  With a vocabulary (the manifest's ``"vocabulary"``
    entry, or ``vocabulary_path`` overriding it), unknown tokens are an
    error.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{manifest_path}: invalid JSON ({exc})") from None
    if not isinstance(manifest, dict) or "slices" not in manifest:
        raise CorpusFormatError(f"{manifest_path}: manifest must be an object with a 'slices' list")

    base = manifest_path.parent
    vocab_index = None
    builder: dict[str, int] | None = None
    if vocabulary_path is not None:
        vocabulary = Vocabulary.from_file(vocabulary_path)
        vocab_index = vocabulary.index
    elif manifest.get("vocabulary"):
        vocabulary = Vocabulary.from_file(base / manifest["vocabulary"])
        vocab_index = vocabulary.index
    else:
        builder = {}

    slices = []
    for entry in manifest["slices"]:
        label, fname = str(entry["label"]), entry["file"]
        path = base / fname
        docs = []
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            counts = _parse_bow_line(line, vocab_index, builder, f"{path}:{lineno}")
            docs.append(Document.from_counts(counts))
        if not docs:
            warnings.warn(f"slice {label!r} ({path}) has no documents", CorpusWarning)
        slices.append(TimeSlice(label=label, documents=tuple(docs)))

    if builder is not None:
        vocabulary = Vocabulary.from_terms(builder)
    return TemporalCorpus(vocabulary=vocabulary, slices=tuple(slices))


def serialize(corpus: TemporalCorpus, out_dir) -> Path:
    """Write a corpus back out in the manifest/.bow/vocabulary format.

    Returns the manifest path.  ``ingest(serialize(c))`` reproduces ``c``
    term-for-term and count-for-count.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab_file = "vocabulary.txt"
    (out_dir / vocab_file).write_text(
        "".join(t + "\n" for t in corpus.vocabulary.terms), encoding="utf-8"
    )
    entries = []
    for i, s in enumerate(corpus.slices):
        fname = f"slice_{i:03d}.bow"
        with open(out_dir / fname, "w", encoding="utf-8") as fh:
            for doc in s.documents:
                pairs = " ".join(f"{corpus.vocabulary.term(i)}:{c}" for i, c in doc.as_pairs())
                fh.write(pairs + "\n")
        entries.append({"label": s.label, "file": fname})
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps({"slices": entries, "vocabulary": vocab_file}, indent=2) + "\n",
        encoding="utf-8",
    )
    return manifest_path


def _take(slice_: TimeSlice, picked: np.ndarray) -> tuple[TimeSlice, TimeSlice]:
    mask = np.zeros(slice_.n_docs, dtype=bool)
    mask[picked] = True
    inside = tuple(d for d, m in zip(slice_.documents, mask) if m)
    outside = tuple(d for d, m in zip(slice_.documents, mask) if not m)
    return TimeSlice(slice_.label, inside), TimeSlice(slice_.label, outside)


def split_held_out(corpus: TemporalCorpus, per_slice: int, seed: int
                   ) -> tuple[TemporalCorpus, TemporalCorpus]:
    """Remove exactly ``per_slice`` random documents from every slice.

    Returns ``(train, held)``; the union is the input corpus and the
    selection is a pure function of ``seed``.
    """
    if per_slice < 0:
        raise ValueError("per_slice must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x48454C44)))
    train_slices, held_slices = [], []
    for s in corpus.slices:
        if per_slice > s.n_docs:
            raise ValueError(
                f"slice {s.label!r} has {s.n_docs} documents, cannot hold out {per_slice}"
            )
        picked = rng.choice(s.n_docs, size=per_slice, replace=False) if per_slice else np.array([], dtype=int)
        held, train = _take(s, picked)
        train_slices.append(train)
        held_slices.append(held)
    return (TemporalCorpus(corpus.vocabulary, tuple(train_slices)),
            TemporalCorpus(corpus.vocabulary, tuple(held_slices)))


def split_fraction(corpus: TemporalCorpus, train_fraction: float, seed: int
                   ) -> tuple[TemporalCorpus, TemporalCorpus]:
    """Per-slice train/test split; the test size is floor((1 - f) * N).

    The fraction is snapped to an exact rational so e.g. 0.8 of a
    10-document slice never loses a document to binary rounding.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    frac = Fraction(train_fraction).limit_denominator(10**6)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x46524143)))
    train_slices, test_slices = [], []
    for s in corpus.slices:
        n_test = int((1 - frac) * s.n_docs)  # Fraction floor division
        picked = rng.choice(s.n_docs, size=n_test, replace=False) if n_test else np.array([], dtype=int)
        test, train = _take(s, picked)
        train_slices.append(train)
        test_slices.append(test)
    return (TemporalCorpus(corpus.vocabulary, tuple(train_slices)),
            TemporalCorpus(corpus.vocabulary, tuple(test_slices)))
