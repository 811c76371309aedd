"""Static replicated-softmax model over word-count documents.

A document of D words is modeled as D softmax visible units tied to one
weight matrix and F binary hidden units.  Because the visible units share
weights, a document reduces to its count vector and the hidden bias is
scaled by the document length.  Energy of a (document, hidden) pair::

    E(v, h) = - v . (vbias + W h) - D * (hbias . h)

with ``v`` the count vector, ``D = v.sum()``.  Summing out ``h`` gives the
free energy used everywhere below::

    F(v) = - v . vbias - sum_j softplus(D * hbias_j + (W^T v)_j)

Learning uses k-step contrastive divergence: a Gibbs chain is started at
the data (hidden Bernoulli step, then one multinomial redraw of all D
words), and the gradient of the negative log-likelihood is estimated from
the chain's end point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

__all__ = [
    "RsmParams",
    "SliceBiases",
    "RsmGradient",
    "hidden_activation",
    "visible_distribution",
    "sample_document",
    "free_energy",
    "cd_gradient",
    "gibbs_negatives",
]


@dataclass
class RsmParams:
    """Weights and base biases of one replicated-softmax model.

    weights: (n_terms, n_topics); vbias: (n_terms,); hbias: (n_topics,).
    """

    weights: np.ndarray
    vbias: np.ndarray
    hbias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.vbias = np.asarray(self.vbias, dtype=np.float64)
        self.hbias = np.asarray(self.hbias, dtype=np.float64)
        k, f = self.weights.shape
        if self.vbias.shape != (k,) or self.hbias.shape != (f,):
            raise ValueError(
                f"inconsistent shapes: weights {self.weights.shape}, "
                f"vbias {self.vbias.shape}, hbias {self.hbias.shape}"
            )

    @property
    def n_terms(self) -> int:
        return self.weights.shape[0]

    @property
    def n_topics(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def init_random(cls, n_terms: int, n_topics: int, rng: np.random.Generator,
                    sigma: float = 0.01) -> "RsmParams":
        """Gaussian(0, sigma) weights, zero biases."""
        return cls(
            weights=rng.normal(0.0, sigma, size=(n_terms, n_topics)),
            vbias=np.zeros(n_terms),
            hbias=np.zeros(n_topics),
        )

    def copy(self) -> "RsmParams":
        return RsmParams(self.weights.copy(), self.vbias.copy(), self.hbias.copy())


@dataclass(frozen=True)
class SliceBiases:
    """Per-time-step bias override; replaces the base biases when present."""

    vbias: np.ndarray
    hbias: np.ndarray


@dataclass
class RsmGradient:
    """Gradient of the summed negative log-likelihood w.r.t. RsmParams.

    Sign convention: this is the gradient of the cost, to be *subtracted*
    scaled by the learning rate.
    """

    weights: np.ndarray
    vbias: np.ndarray
    hbias: np.ndarray


def _effective_biases(params: RsmParams, biases: SliceBiases | None
                      ) -> tuple[np.ndarray, np.ndarray]:
    if biases is None:
        return params.vbias, params.hbias
    vb = np.asarray(biases.vbias, dtype=np.float64)
    hb = np.asarray(biases.hbias, dtype=np.float64)
    if vb.shape != (params.n_terms,) or hb.shape != (params.n_topics,):
        raise ValueError(
            f"bias override shapes {vb.shape}/{hb.shape} do not match "
            f"model ({params.n_terms},)/({params.n_topics},)"
        )
    return vb, hb


def _as_counts(counts: np.ndarray, n_terms: int) -> tuple[np.ndarray, bool]:
    v = np.asarray(counts, dtype=np.float64)
    single = v.ndim == 1
    if single:
        v = v[None, :]
    if v.ndim != 2 or v.shape[1] != n_terms:
        raise ValueError(f"count array of shape {np.shape(counts)} does not match "
                         f"vocabulary size {n_terms}")
    return v, single


def _hidden_input(params, counts2d, hbias_eff):
    lengths = counts2d.sum(axis=1)
    return counts2d @ params.weights + lengths[:, None] * hbias_eff[None, :]


def hidden_activation(params: RsmParams, counts: np.ndarray,
                      biases: SliceBiases | None = None) -> np.ndarray:
    """P(h_j = 1 | document) for each hidden unit.

    ``sigmoid(D * hbias_j + (W^T v)_j)``; the hidden bias is scaled by the
    document length so differently sized documents stay comparable.
    Accepts a single count vector or an (n_docs, n_terms) batch.
    """
    _, hb = _effective_biases(params, biases)
    v, single = _as_counts(counts, params.n_terms)
    probs = expit(_hidden_input(params, v, hb))
    return probs[0] if single else probs


def visible_distribution(params: RsmParams, hidden: np.ndarray,
                         biases: SliceBiases | None = None) -> np.ndarray:
    """Softmax word distribution given a hidden configuration.

    ``softmax_k(vbias_k + (W h)_k)``; accepts a single hidden vector or an
    (n, n_topics) batch and returns matching probability rows.
    """
    vb, _ = _effective_biases(params, biases)
    h = np.asarray(hidden, dtype=np.float64)
    single = h.ndim == 1
    if single:
        h = h[None, :]
    if h.shape[1] != params.n_topics:
        raise ValueError(f"hidden vector of shape {np.shape(hidden)} does not match "
                         f"{params.n_topics} hidden units")
    logits = vb[None, :] + h @ params.weights.T
    probs = softmax(logits, axis=1)
    return probs[0] if single else probs


def sample_document(params: RsmParams, hidden: np.ndarray, n_words: int,
                    biases: SliceBiases | None = None,
                    rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw ``n_words`` i.i.d. words from the visible softmax; returns counts."""
    if n_words < 1:
        raise ValueError(f"document length must be >= 1, got {n_words}")
    if rng is None:
        rng = np.random.default_rng()
    p = visible_distribution(params, hidden, biases)
    return rng.multinomial(n_words, p).astype(np.float64)


def free_energy(params: RsmParams, counts: np.ndarray,
                biases: SliceBiases | None = None) -> np.ndarray | float:
    """Free energy F(v); exp(-F(v)) / Z is the document probability."""
    vb, hb = _effective_biases(params, biases)
    v, single = _as_counts(counts, params.n_terms)
    # log(1 + exp(x)) via logaddexp keeps large positive inputs finite
    softplus = np.logaddexp(0.0, _hidden_input(params, v, hb))
    fe = -(v @ vb) - softplus.sum(axis=1)
    return float(fe[0]) if single else fe


def gibbs_negatives(params: RsmParams, counts: np.ndarray, k_steps: int,
                    biases: SliceBiases | None, rng: np.random.Generator
                    ) -> np.ndarray:
    """Run k alternating Gibbs steps from the data; returns negative counts.

    Each step samples the binary hidden layer, then redraws every
    document as one multinomial of its own length.  Lengths are therefore
    preserved along the chain.
    """
    if k_steps < 1:
        raise ValueError(f"k_steps must be >= 1, got {k_steps}")
    v, single = _as_counts(counts, params.n_terms)
    lengths = v.sum(axis=1).astype(np.int64)
    vb, hb = _effective_biases(params, biases)
    neg = v
    for _ in range(k_steps):
        h_prob = expit(_hidden_input(params, neg, hb))
        h = (rng.random(h_prob.shape) < h_prob).astype(np.float64)
        p_v = softmax(vb[None, :] + h @ params.weights.T, axis=1)
        neg = rng.multinomial(lengths, p_v).astype(np.float64)
    return neg[0] if single else neg


def _gradient_from_negatives(params: RsmParams, counts: np.ndarray,
                             negatives: np.ndarray,
                             biases: SliceBiases | None = None,
                             mean_field_final: bool = True,
                             rng: np.random.Generator | None = None
                             ) -> RsmGradient:
    """Cost gradient given data and matching negative-phase counts.

    The hidden statistics for both phases are the activation
    probabilities (variance reduction); with ``mean_field_final=False``
    the negative phase uses a Bernoulli sample instead.  The hidden-bias
    component carries the document-length factor so that, in expectation
    over exact negatives, this is the true gradient of the summed
    negative log-likelihood.
    """
    _, hb = _effective_biases(params, biases)
    v, _ = _as_counts(counts, params.n_terms)
    neg, _ = _as_counts(negatives, params.n_terms)
    if v.shape != neg.shape:
        raise ValueError("negatives must match the data batch shape")
    lengths = v.sum(axis=1)
    h_data = expit(_hidden_input(params, v, hb))
    h_neg = expit(_hidden_input(params, neg, hb))
    if not mean_field_final:
        if rng is None:
            rng = np.random.default_rng()
        h_neg = (rng.random(h_neg.shape) < h_neg).astype(np.float64)
    d_weights = neg.T @ h_neg - v.T @ h_data
    d_vbias = (neg - v).sum(axis=0)
    d_hbias = lengths @ (h_neg - h_data)
    return RsmGradient(weights=d_weights, vbias=d_vbias, hbias=d_hbias)


def cd_gradient(params: RsmParams, counts: np.ndarray, k_steps: int,
                biases: SliceBiases | None = None,
                rng: np.random.Generator | None = None,
                mean_field_final: bool = True) -> RsmGradient:
    """k-step contrastive-divergence estimate of the cost gradient.

    ``counts`` is an (n_docs, n_terms) batch (a single vector is also
    accepted).  Gradients are *summed* over documents; the learning rate
    absorbs the scale.
    """
    if rng is None:
        rng = np.random.default_rng()
    negatives = gibbs_negatives(params, counts, k_steps, biases, rng)
    return _gradient_from_negatives(params, counts, negatives, biases,
                                    mean_field_final=mean_field_final, rng=rng)
