"""Evaluation suite: perplexity, document dating, topic evolution and
keyword-trend statistics, and NPMI coherence against a local reference
corpus.

All metrics are pure functions over an immutable model snapshot plus
corpora; nothing here mutates parameters.  Log-likelihoods come from the
exact oracle when the hidden layer is enumerable and from annealed
importance sampling otherwise.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .corpus import TemporalCorpus
from .exact import MAX_EXACT_TOPICS, _LogZCache, estimate_log_z
from .replicated_softmax import free_energy, visible_distribution
from .temporal_model import ForwardState, TemporalModelParams, forward

__all__ = [
    "perplexity",
    "slice_perplexity",
    "sum_perplexity",
    "predict_timestamp",
    "mean_absolute_error_years",
    "TopicSet",
    "extract_topics",
    "build_topic_set",
    "set_cosine",
    "topic_popularity",
    "topic_term_drift",
    "TrendSequence",
    "longest_run",
    "keyword_trend",
    "avg_span",
    "CooccurrenceTable",
    "build_cooccurrence",
    "npmi",
    "coherence",
]


# ---------------------------------------------------------------------------
# likelihood-based metrics

def _log_z_lookup(params: TemporalModelParams, biases, z_mode: str,
                  rng: np.random.Generator | None, n_temps: int, n_chains: int):
    """Callable D -> log Z under one slice's biases, per the chosen mode."""
    if z_mode == "auto":
        z_mode = "exact" if params.n_topics <= MAX_EXACT_TOPICS else "ais"
    if z_mode == "exact":
        return _LogZCache(params.rsm, biases)
    if z_mode == "ais":
        if rng is None:
            rng = np.random.default_rng()
        cache: dict[int, float] = {}

        def lookup(n_words: int) -> float:
            if n_words not in cache:
                cache[n_words] = estimate_log_z(
                    params.rsm, n_words, biases,
                    n_temps=n_temps, n_chains=n_chains, rng=rng)
            return cache[n_words]

        return lookup
    raise ValueError(f"unknown z_mode {z_mode!r} (expected 'exact', 'ais' or 'auto')")


def _slice_log_probs(params: TemporalModelParams, fwd: ForwardState, counts,
                     t: int, z_mode: str, rng, n_temps: int, n_chains: int
                     ) -> tuple[np.ndarray, np.ndarray]:
    counts = np.atleast_2d(np.asarray(counts, dtype=np.float64))
    biases = fwd.slice_biases[t]
    lengths = counts.sum(axis=1)
    if (lengths < 1).any():
        raise ValueError("documents must be nonempty")
    log_z = _log_z_lookup(params, biases, z_mode, rng, n_temps, n_chains)
    fe = np.atleast_1d(free_energy(params.rsm, counts, biases))
    lp = -fe - np.array([log_z(int(d)) for d in lengths])
    return lp, lengths


def perplexity(log_probs, lengths) -> float:
    """Per-word perplexity ``exp(-sum(log P) / sum(D))``.

    A uniform model (every word probability 1/K) scores exactly K.
    Invariant under document order and word order within documents,
    since only totals enter.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.float64)
    if log_probs.size == 0:
        raise ValueError("perplexity of an empty document set is undefined")
    return float(np.exp(-log_probs.sum() / lengths.sum()))


def slice_perplexity(params: TemporalModelParams, fwd: ForwardState, counts,
                     t: int, z_mode: str = "auto", *,
                     rng: np.random.Generator | None = None,
                     n_temps: int = 1000, n_chains: int = 100) -> float:
    """Perplexity of a document batch under slice ``t``'s biases."""
    lp, lengths = _slice_log_probs(params, fwd, counts, t, z_mode, rng,
                                   n_temps, n_chains)
    return perplexity(lp, lengths)


def sum_perplexity(params: TemporalModelParams, context: TemporalCorpus,
                   eval_corpus: TemporalCorpus, z_mode: str = "auto", *,
                   activation: str = "tanh", scale_visible_sum: bool = False,
                   rng: np.random.Generator | None = None,
                   n_temps: int = 1000, n_chains: int = 100) -> float:
    """Sum of per-slice perplexities of ``eval_corpus``.

    The recurrent state (and hence each slice's biases) is driven by
    ``context``, normally the training corpus.  Empty evaluation slices
    are skipped.
    """
    if context.n_slices != eval_corpus.n_slices:
        raise ValueError("context and evaluation corpora must have the same slices")
    fwd = forward(params, context, activation=activation,
                  scale_visible_sum=scale_visible_sum)
    total = 0.0
    for t, s in enumerate(eval_corpus.slices):
        if s.n_docs == 0:
            continue
        total += slice_perplexity(params, fwd, s.count_matrix(params.n_terms), t,
                                  z_mode, rng=rng, n_temps=n_temps,
                                  n_chains=n_chains)
    return total


def predict_timestamp(params: TemporalModelParams, fwd: ForwardState, counts,
                      z_mode: str = "auto", *,
                      rng: np.random.Generator | None = None,
                      n_temps: int = 1000, n_chains: int = 100) -> np.ndarray:
    """Most likely slice index for each document (lowest perplexity).

    Ties break to the earliest slice.  Returns an int array, one entry
    per document row.
    """
    counts = np.atleast_2d(np.asarray(counts, dtype=np.float64))
    scores = np.empty((len(fwd.slice_biases), counts.shape[0]))
    for t in range(len(fwd.slice_biases)):
        scores[t], _ = _slice_log_probs(params, fwd, counts, t, z_mode, rng,
                                        n_temps, n_chains)
    return scores.argmax(axis=0)


def mean_absolute_error_years(predicted_labels, true_labels) -> float:
    """Mean |predicted year - true year| over paired slice labels."""
    if len(predicted_labels) != len(true_labels):
        raise ValueError("prediction and truth lists differ in length")
    if not predicted_labels:
        raise ValueError("no predictions given")
    try:
        pred = np.array([int(x) for x in predicted_labels], dtype=np.int64)
        true = np.array([int(x) for x in true_labels], dtype=np.int64)
    except ValueError:
        raise ValueError("slice labels must parse as integer years") from None
    return float(np.mean(np.abs(pred - true)))


# ---------------------------------------------------------------------------
# topic extraction and evolution

@dataclass(frozen=True)
class TopicSet:
    """Top terms of every topic at every time step."""

    labels: tuple[str, ...]
    topics: tuple[tuple[tuple[str, ...], ...], ...]  # [slice][topic][rank]

    @property
    def n_slices(self) -> int:
        return len(self.labels)

    def slice_terms(self, t: int) -> frozenset[str]:
        """Union of all topic terms at slice t."""
        return frozenset(term for topic in self.topics[t] for term in topic)

    def all_terms(self) -> frozenset[str]:
        return frozenset(term for t in range(self.n_slices) for term in self.slice_terms(t))


def extract_topics(params: TemporalModelParams, fwd: ForwardState, vocabulary,
                   t: int, top_n: int = 20, with_probs: bool = False):
    """Read slice ``t``'s topics by activating one hidden unit at a time.

    Topic j is the visible softmax given the one-hot hidden vector e_j
    under the slice's biases; the ``top_n`` most probable terms are
    returned, ties broken lexicographically.  ``with_probs`` additionally
    returns each term's probability, parallel to the term lists.
    """
    if top_n > params.n_terms:
        warnings.warn(f"top_n={top_n} exceeds vocabulary size {params.n_terms}; clamping")
        top_n = params.n_terms
    one_hots = np.eye(params.n_topics)
    probs = visible_distribution(params.rsm, one_hots, fwd.slice_biases[t])
    topics, topic_probs = [], []
    for j in range(params.n_topics):
        ranked = sorted(zip(-probs[j], vocabulary.terms))[:top_n]
        topics.append([term for _, term in ranked])
        topic_probs.append([-neg for neg, _ in ranked])
    return (topics, topic_probs) if with_probs else topics


def build_topic_set(params: TemporalModelParams, corpus: TemporalCorpus,
                    top_n: int = 20, *, activation: str = "tanh",
                    scale_visible_sum: bool = False) -> TopicSet:
    """Extract every slice's topics into one :class:`TopicSet`."""
    fwd = forward(params, corpus, activation=activation,
                  scale_visible_sum=scale_visible_sum)
    all_topics = []
    for t in range(corpus.n_slices):
        topics = extract_topics(params, fwd, corpus.vocabulary, t, top_n)
        all_topics.append(tuple(tuple(topic) for topic in topics))
    return TopicSet(labels=tuple(corpus.labels), topics=tuple(all_topics))


def set_cosine(a, b) -> float:
    """Cosine of two term sets' binary incidence vectors: |a&b|/sqrt(|a||b|)."""
    a, b = set(a), set(b)
    if not a or not b:
        return 0.0
    return len(a & b) / math.sqrt(len(a) * len(b))


def topic_popularity(topic_set: TopicSet, key_terms) -> list[float]:
    """Per slice, the best cosine match between any topic and the key terms."""
    key_terms = set(key_terms)
    return [
        max((set_cosine(topic, key_terms) for topic in topic_set.topics[t]),
            default=0.0)
        for t in range(topic_set.n_slices)
    ]


def topic_term_drift(terms_from, terms_to) -> float:
    """1 - cosine between two slices' unioned topic-term sets."""
    return 1.0 - set_cosine(terms_from, terms_to)


# ---------------------------------------------------------------------------
# keyword trends

@dataclass(frozen=True)
class TrendSequence:
    """Presence of one keyword in the extracted topics over time.

    ``span`` is the longest consecutive run of appearances and
    ``span_dict`` normalizes it by the keyword's corpus count (absent
    when the keyword never occurs in the corpus).
    """

    keyword: str
    bits: tuple[int, ...]
    span: int
    count: int
    span_dict: float | None


def longest_run(bits) -> int:
    """Length of the longest all-ones run in a 0/1 sequence."""
    best = run = 0
    for b in bits:
        run = run + 1 if b else 0
        best = max(best, run)
    return best


def keyword_trend(topic_set: TopicSet, keyword: str, corpus_count: int
                  ) -> TrendSequence:
    """Binary appearance sequence of ``keyword`` across slices, with SPAN."""
    bits = tuple(int(keyword in topic_set.slice_terms(t))
                 for t in range(topic_set.n_slices))
    span = longest_run(bits)
    span_dict = span / corpus_count if corpus_count > 0 else None
    return TrendSequence(keyword=keyword, bits=bits, span=span,
                         count=int(corpus_count), span_dict=span_dict)


def avg_span(topic_set: TopicSet, corpus: TemporalCorpus) -> float:
    """Mean of span/count over every unique term appearing in any topic.

    The denominator counts all unique topic terms; terms that never
    occur in the corpus (possible with a pre-supplied vocabulary) are
    excluded from the numerator with a warning.
    """
    terms = sorted(topic_set.all_terms())
    if not terms:
        raise ValueError("empty topic set")
    totals = corpus.term_totals()
    total = 0.0
    for term in terms:
        count = float(totals[corpus.vocabulary.id(term)]) if term in corpus.vocabulary else 0.0
        if count <= 0:
            warnings.warn(f"topic term {term!r} has zero corpus count; skipped in avg-SPAN")
            continue
        trend = keyword_trend(topic_set, term, int(count))
        total += trend.span / count
    return total / len(terms)


# ---------------------------------------------------------------------------
# NPMI coherence over a local reference corpus

@dataclass
class CooccurrenceTable:
    """Sliding-window co-occurrence counts over a reference corpus.

    Every window of ``window`` consecutive tokens (the whole text when
    shorter) is one event; ``counts[x]`` is the number of windows
    containing x and ``joint[(x, y)]`` (keys sorted, x may equal y: two
    occurrences in one window) the number containing both.
    """

    window: int
    total_windows: int
    counts: dict[str, int]
    joint: dict[tuple[str, str], int]

    def count(self, term: str) -> int:
        return self.counts.get(term, 0)

    def joint_count(self, x: str, y: str) -> int:
        return self.joint.get((min(x, y), max(x, y)), 0)

    def save(self, path) -> Path:
        path = Path(path)
        payload = {
            "format_version": 1,
            "window": self.window,
            "total_windows": self.total_windows,
            "counts": dict(sorted(self.counts.items())),
            "joint": [[x, y, c] for (x, y), c in sorted(self.joint.items())],
        }
        path.write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "CooccurrenceTable":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format_version") != 1:
            raise ValueError("unsupported co-occurrence table version")
        return cls(
            window=payload["window"],
            total_windows=payload["total_windows"],
            counts=dict(payload["counts"]),
            joint={(x, y): c for x, y, c in payload["joint"]},
        )


def build_cooccurrence(source, window: int = 5) -> CooccurrenceTable:
    """Count sliding-window co-occurrences over a plain-text corpus.

    ``source`` is a file path or an already tokenized list; tokens are
    whitespace-separated.  Windows slide by one token and only full
    windows are used (a text shorter than the window is one window).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if isinstance(source, (str, Path)):
        tokens = Path(source).read_text(encoding="utf-8").split()
    else:
        tokens = list(source)
    counts: dict[str, int] = {}
    joint: dict[tuple[str, str], int] = {}
    if not tokens:
        return CooccurrenceTable(window=window, total_windows=0, counts={}, joint={})
    n_windows = max(1, len(tokens) - window + 1)
    for start in range(n_windows):
        seen: dict[str, int] = {}
        for tok in tokens[start:start + window]:
            seen[tok] = seen.get(tok, 0) + 1
        for term, occ in seen.items():
            counts[term] = counts.get(term, 0) + 1
            if occ >= 2:
                joint[(term, term)] = joint.get((term, term), 0) + 1
        for x, y in combinations(sorted(seen), 2):
            joint[(x, y)] = joint.get((x, y), 0) + 1
    return CooccurrenceTable(window=window, total_windows=n_windows,
                             counts=counts, joint=joint)


def npmi(pair: tuple[str, str], table: CooccurrenceTable) -> float:
    """Normalized pointwise mutual information of a term pair in [-1, 1].

    Never co-occurring pairs score -1 by convention; a pair that always
    co-occurs (and only with each other) scores 1.
    """
    x, y = pair
    if table.total_windows == 0:
        return -1.0
    p_xy = table.joint_count(x, y) / table.total_windows
    if p_xy == 0.0:
        return -1.0
    if p_xy >= 1.0:
        return 1.0
    p_x = table.count(x) / table.total_windows
    p_y = table.count(y) / table.total_windows
    value = math.log(p_xy / (p_x * p_y)) / -math.log(p_xy)
    return min(1.0, max(-1.0, value))


def coherence(topic_terms, table: CooccurrenceTable) -> float:
    """Mean pairwise cosine of the topic words' NPMI context vectors.

    Each word's context vector holds its NPMI against every word of the
    topic (itself included).  Words missing from the reference corpus
    get an all-zero vector (cosine 0 against anything) with a warning.
    Topics with fewer than two terms have no pairs; returns NaN.
    """
    terms = list(topic_terms)
    if len(terms) < 2:
        return float("nan")
    vectors = []
    for term in terms:
        if table.count(term) == 0:
            warnings.warn(f"term {term!r} absent from the reference corpus; "
                          "using a zero context vector")
            vectors.append(np.zeros(len(terms)))
        else:
            vectors.append(np.array([npmi((term, other), table) for other in terms]))
    sims = []
    for i, j in combinations(range(len(terms)), 2):
        ni, nj = np.linalg.norm(vectors[i]), np.linalg.norm(vectors[j])
        sims.append(0.0 if ni == 0.0 or nj == 0.0
                    else float(vectors[i] @ vectors[j] / (ni * nj)))
    return float(np.mean(sims))
