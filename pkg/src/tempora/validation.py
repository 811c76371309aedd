"""Input validation helpers shared by the estimator facade and the CLI."""

from __future__ import annotations

import numpy as np

from .corpus import Document, TemporalCorpus

__all__ = ["check_count_matrix", "as_count_matrix", "check_corpus"]


def check_count_matrix(X, n_terms: int | None = None) -> np.ndarray:
    """Coerce to a dense (n_docs, n_terms) float count matrix.

    Counts must be finite and non-negative and every document must
    contain at least one token.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D count matrix, got ndim={X.ndim}")
    if n_terms is not None and X.shape[1] != n_terms:
        raise ValueError(f"count matrix has {X.shape[1]} columns, expected {n_terms}")
    if not np.all(np.isfinite(X)) or (X < 0).any():
        raise ValueError("counts must be finite and non-negative")
    if (X.sum(axis=1) < 1).any():
        raise ValueError("every document must contain at least one token")
    return X


def as_count_matrix(X, n_terms: int) -> np.ndarray:
    """Accept Documents, a sequence of Documents, or a raw count array."""
    if isinstance(X, Document):
        X = [X]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], Document):
        X = np.stack([doc.dense(n_terms) for doc in X])
    return check_count_matrix(X, n_terms)


def check_corpus(X) -> TemporalCorpus:
    if not isinstance(X, TemporalCorpus):
        raise TypeError(
            f"expected a TemporalCorpus (see tempora.corpus.ingest), got {type(X).__name__}"
        )
    if X.n_slices == 0:
        raise ValueError("corpus has no time slices")
    return X
