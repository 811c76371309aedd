"""Exact computations on small replicated-softmax instances.

The probability space is word *sequences*: a document of length D is a
K x D binary matrix (one softmax unit per position), so the partition
function for length D factorizes over positions::

    Z(D) = sum_h exp(D * hbias_eff . h) * (sum_k exp(vbias_eff_k + (W^T h)_k))^D

The 2^F sum over hidden states is enumerated directly (refused above
``MAX_EXACT_TOPICS``) in fixed-size chunks so memory stays bounded, and
everything runs in log space.  These routines are the verification
backbone: they back-stop the contrastive-divergence estimators, the
BPTT gradients and the perplexity wiring, and are exact up to
floating-point rounding.

For hidden layers too wide to enumerate, :func:`estimate_log_z` provides
an annealed-importance-sampling estimate, clearly approximate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .replicated_softmax import (
    RsmGradient,
    RsmParams,
    SliceBiases,
    _as_counts,
    _effective_biases,
    _hidden_input,
    free_energy,
)

__all__ = [
    "MAX_EXACT_TOPICS",
    "EnumerationLimitError",
    "all_hidden_states",
    "exact_log_z",
    "exact_log_probs",
    "exact_log_prob",
    "exact_rsm_gradient",
    "brute_force_log_z",
    "sequence_count_vectors",
    "estimate_log_z",
    "GradientCheck",
    "finite_difference_check",
]

MAX_EXACT_TOPICS = 24
_CHUNK = 1 << 14


class EnumerationLimitError(ValueError):
    """Exact enumeration refused because 2^n_topics is too large."""


def _check_enumerable(n_topics: int) -> None:
    if n_topics > MAX_EXACT_TOPICS:
        raise EnumerationLimitError(
            f"exact enumeration needs n_topics <= {MAX_EXACT_TOPICS}, got {n_topics}"
        )


def _state_block(codes: np.ndarray, n_topics: int) -> np.ndarray:
    """Hidden configurations for integer codes; bit j is unit j."""
    bits = (codes[:, None] >> np.arange(n_topics)[None, :]) & 1
    return bits.astype(np.float64)


def _iter_state_blocks(n_topics: int):
    total = 1 << n_topics
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        yield codes, _state_block(codes, n_topics)


def all_hidden_states(n_topics: int) -> np.ndarray:
    """All 2^F binary hidden configurations as a (2^F, F) float matrix."""
    _check_enumerable(n_topics)
    return _state_block(np.arange(1 << n_topics, dtype=np.int64), n_topics)


def _hidden_terms(params: RsmParams, biases: SliceBiases | None
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Per-hidden-state pieces shared by the exact routines.

    Returns (hbias_dot, log_norm), both of length 2^F, where for each
    hidden state ``h``: ``hbias_dot = hbias_eff . h`` and ``log_norm =
    log sum_k exp(vbias_eff_k + (W^T h)_k)``.
    """
    _check_enumerable(params.n_topics)
    vb, hb = _effective_biases(params, biases)
    hbias_dot = np.empty(1 << params.n_topics)
    log_norm = np.empty(1 << params.n_topics)
    for codes, states in _iter_state_blocks(params.n_topics):
        logits = vb[None, :] + states @ params.weights.T
        hbias_dot[codes] = states @ hb
        log_norm[codes] = logsumexp(logits, axis=1)
    return hbias_dot, log_norm


def exact_log_z(params: RsmParams, n_words: int,
                biases: SliceBiases | None = None) -> float:
    """Exact log partition function for documents of ``n_words`` words."""
    if n_words < 1:
        raise ValueError(f"document length must be >= 1, got {n_words}")
    hbias_dot, log_norm = _hidden_terms(params, biases)
    return float(logsumexp(n_words * (hbias_dot + log_norm)))


class _LogZCache:
    """Per-document-length cache of exact_log_z for one (params, biases)."""

    def __init__(self, params: RsmParams, biases: SliceBiases | None = None):
        self._hbias_dot, self._log_norm = _hidden_terms(params, biases)
        self._by_length: dict[int, float] = {}

    def __call__(self, n_words: int) -> float:
        got = self._by_length.get(n_words)
        if got is None:
            got = float(logsumexp(n_words * (self._hbias_dot + self._log_norm)))
            self._by_length[n_words] = got
        return got


def exact_log_probs(params: RsmParams, counts: np.ndarray,
                    biases: SliceBiases | None = None) -> np.ndarray:
    """Exact log P(document) for a batch of count vectors.

    Sequence-level probability: ``-F(v) - log Z(D)`` with the partition
    function computed once per distinct document length.
    """
    v, single = _as_counts(counts, params.n_terms)
    log_z = _LogZCache(params, biases)
    lengths = v.sum(axis=1)
    if (lengths < 1).any():
        raise ValueError("documents must be nonempty")
    fe = np.atleast_1d(free_energy(params, v, biases))
    lp = -fe - np.array([log_z(int(d)) for d in lengths])
    return lp[0] if single else lp


def exact_log_prob(params: RsmParams, counts: np.ndarray,
                   biases: SliceBiases | None = None) -> float:
    return float(exact_log_probs(params, counts, biases))


def exact_rsm_gradient(params: RsmParams, counts: np.ndarray,
                       biases: SliceBiases | None = None) -> RsmGradient:
    """Exact gradient of sum_n -ln P(v_n) w.r.t. weights and biases.

    The model expectation comes from the same 2^F factorization as the
    partition function, so no document enumeration is needed: given a
    hidden state the D positions are i.i.d. softmax draws.
    """
    vb, hb = _effective_biases(params, biases)
    v, _ = _as_counts(counts, params.n_terms)
    lengths = v.sum(axis=1)
    if (lengths < 1).any():
        raise ValueError("documents must be nonempty")

    # data-dependent part: derivatives of the summed free energy
    h_data = expit(_hidden_input(params, v, hb))
    d_weights = -(v.T @ h_data)
    d_vbias = -v.sum(axis=0)
    d_hbias = -(lengths @ h_data)

    # model part, grouped by distinct document length
    hbias_dot, log_norm = _hidden_terms(params, biases)
    for d in np.unique(lengths):
        n_docs = int((lengths == d).sum())
        log_post = d * (hbias_dot + log_norm)
        log_post -= logsumexp(log_post)
        scale = n_docs * float(d)
        for codes, states in _iter_state_blocks(params.n_topics):
            post = np.exp(log_post[codes])                           # (B,)
            word_probs = softmax(vb[None, :] + states @ params.weights.T, axis=1)
            d_vbias += scale * (post @ word_probs)
            d_hbias += scale * (post @ states)
            d_weights += scale * np.einsum("h,hk,hj->kj", post, word_probs, states)
    return RsmGradient(weights=d_weights, vbias=d_vbias, hbias=d_hbias)


def sequence_count_vectors(n_terms: int, n_words: int):
    """Yield the count vector of every length-D word sequence (K^D of them)."""
    for seq in itertools.product(range(n_terms), repeat=n_words):
        v = np.zeros(n_terms, dtype=np.float64)
        for k in seq:
            v[k] += 1.0
        yield v


def brute_force_log_z(params: RsmParams, n_words: int,
                      biases: SliceBiases | None = None) -> float:
    """log Z by direct enumeration of all K^D word sequences.

    Independent of the closed 2^F form; only feasible for tiny K and D.
    """
    fes = [free_energy(params, v, biases)
           for v in sequence_count_vectors(params.n_terms, n_words)]
    return float(logsumexp(-np.array(fes)))


def estimate_log_z(params: RsmParams, n_words: int,
                   biases: SliceBiases | None = None, *,
                   n_temps: int = 1000, n_chains: int = 100,
                   rng: np.random.Generator | None = None) -> float:
    """Annealed-importance-sampling estimate of log Z(n_words).

    Anneals the weight matrix from 0 to its full value over ``n_temps``
    evenly spaced temperatures, keeping the biases fixed; the base model
    (W = 0) has a closed-form partition function.  Approximate; use
    :func:`exact_log_z` whenever the hidden layer is small enough.
    """
    if n_words < 1:
        raise ValueError(f"document length must be >= 1, got {n_words}")
    if n_temps < 2:
        raise ValueError("n_temps must be >= 2")
    if rng is None:
        rng = np.random.default_rng()
    vb, hb = _effective_biases(params, biases)
    n_hidden = params.n_topics

    log_z0 = float(np.logaddexp(0.0, n_words * hb).sum() + n_words * logsumexp(vb))

    def free_energy_at(beta: float, v: np.ndarray) -> np.ndarray:
        pre = beta * (v @ params.weights) + n_words * hb[None, :]
        return -(v @ vb) - np.logaddexp(0.0, pre).sum(axis=1)

    base_word_probs = softmax(vb)
    v = rng.multinomial(n_words, base_word_probs, size=n_chains).astype(np.float64)
    log_w = np.zeros(n_chains)
    betas = np.linspace(0.0, 1.0, n_temps)
    lengths = np.full(n_chains, n_words, dtype=np.int64)
    for prev, beta in zip(betas[:-1], betas[1:]):
        log_w += free_energy_at(prev, v) - free_energy_at(beta, v)
        # one Gibbs sweep at the new temperature
        h_prob = expit(beta * (v @ params.weights) + n_words * hb[None, :])
        h = (rng.random((n_chains, n_hidden)) < h_prob).astype(np.float64)
        p_v = softmax(vb[None, :] + beta * (h @ params.weights.T), axis=1)
        v = rng.multinomial(lengths, p_v).astype(np.float64)
    return float(log_z0 + logsumexp(log_w) - np.log(n_chains))


@dataclass
class GradientCheck:
    """Worst-coordinate comparison of an analytic gradient to central differences."""

    max_rel: float
    worst: str
    analytic_value: float
    numeric_value: float


def finite_difference_check(cost, params, analytic, epsilon: float = 1e-5
                            ) -> GradientCheck:
    """Central-difference check of ``analytic`` against ``cost``.

    ``params`` and ``analytic`` are matching dicts of arrays (a bare
    array is treated as a one-entry dict).  ``cost`` is called with the
    perturbed dict and must return a finite scalar.  The relative
    deviation uses a floor tied to the gradient's overall scale so that
    exactly-zero coordinates do not blow up the ratio.
    """
    if not (1e-7 <= epsilon <= 1e-3):
        raise ValueError(f"epsilon must be in [1e-7, 1e-3], got {epsilon}")
    bare = not isinstance(params, dict)
    if bare:
        params = {"x": params}
        analytic = {"x": analytic}
    work = {name: np.array(arr, dtype=np.float64) for name, arr in params.items()}

    grad_scale = max(
        (float(np.max(np.abs(arr))) for arr in analytic.values() if np.size(arr)),
        default=0.0,
    )
    floor = 1e-6 * max(1.0, grad_scale)

    worst = GradientCheck(max_rel=0.0, worst="", analytic_value=0.0, numeric_value=0.0)
    for name, arr in work.items():
        flat = arr.reshape(-1)
        an_flat = np.asarray(analytic[name], dtype=np.float64).reshape(-1)
        if an_flat.shape != flat.shape:
            raise ValueError(f"analytic gradient for {name!r} has wrong shape")
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            f_plus = float(cost(work["x"] if bare else work))
            flat[idx] = orig - epsilon
            f_minus = float(cost(work["x"] if bare else work))
            flat[idx] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise ValueError(f"cost is non-finite near coordinate {name}[{idx}]")
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            an = float(an_flat[idx])
            rel = abs(numeric - an) / max(abs(numeric), abs(an), floor)
            if rel > worst.max_rel:
                worst = GradientCheck(rel, f"{name}[{idx}]", an, numeric)
    return worst
