"""Scikit-learn style facade over the temporal topic model.

The estimator holds hyperparameters verbatim (so ``get_params`` /
``set_params`` and ``clone`` work) and delegates to the functional core.
``X`` is a :class:`~tempora.corpus.TemporalCorpus`; fitted state lives in
trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import metrics
from .corpus import split_held_out
from .replicated_softmax import hidden_activation
from .temporal_model import forward
from .training import TrainConfig, train
from .validation import as_count_matrix, check_corpus

__all__ = ["DynamicTopicModel"]


class DynamicTopicModel(BaseEstimator):
    """Temporal topic model trained with contrastive divergence and BPTT.

    Parameters mirror :class:`~tempora.training.TrainConfig`;
    ``held_out_per_slice > 0`` reserves that many documents per slice
    for early stopping.

    Attributes (after ``fit``)
    --------------------------
    params_ : TemporalModelParams
        Trained parameters (best early-stopping snapshot when held-out
        documents were reserved).
    checkpoint_ : Checkpoint
        Full reproducibility envelope around ``params_``.
    history_ : list of (epoch, recon_error, held_ppl)
        Per-epoch training log.
    labels_ : list of str
        Slice labels of the training corpus, indexable by ``predict``.
    """

    def __init__(self, n_topics=30, n_state=30, epochs=1000, cd_k=15,
                 learning_rate=0.001, seed=0, warm_start_init=False,
                 held_out_per_slice=0, early_stop_patience=25, eval_every=10,
                 momentum=0.0, weight_decay=0.0, clip_norm=100.0,
                 mean_field_final=True, activation="tanh",
                 scale_visible_sum=False, batch_docs=None):
        self.n_topics = n_topics
        self.n_state = n_state
        self.epochs = epochs
        self.cd_k = cd_k
        self.learning_rate = learning_rate
        self.seed = seed
        self.warm_start_init = warm_start_init
        self.held_out_per_slice = held_out_per_slice
        self.early_stop_patience = early_stop_patience
        self.eval_every = eval_every
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.clip_norm = clip_norm
        self.mean_field_final = mean_field_final
        self.activation = activation
        self.scale_visible_sum = scale_visible_sum
        self.batch_docs = batch_docs

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, cd_k=self.cd_k,
            learning_rate=self.learning_rate, n_topics=self.n_topics,
            n_state=self.n_state, seed=self.seed,
            early_stop_patience=self.early_stop_patience,
            eval_every=self.eval_every, warm_start=self.warm_start_init,
            momentum=self.momentum, weight_decay=self.weight_decay,
            clip_norm=self.clip_norm, mean_field_final=self.mean_field_final,
            activation=self.activation,
            scale_visible_sum=self.scale_visible_sum,
            batch_docs=self.batch_docs,
        ).validate()

    def fit(self, X, y=None):
        """Train on a :class:`TemporalCorpus`; ``y`` is ignored."""
        corpus = check_corpus(X)
        config = self._config()
        held = None
        if self.held_out_per_slice:
            corpus, held = split_held_out(corpus, self.held_out_per_slice,
                                          config.seed)
        history = []
        self.checkpoint_ = train(
            corpus, config, held,
            epoch_callback=lambda e, p, recon, ppl: history.append((e, recon, ppl)))
        self.params_ = self.checkpoint_.params
        self.history_ = history
        self.train_corpus_ = corpus
        self.held_corpus_ = held
        self.vocabulary_ = corpus.vocabulary
        self.labels_ = corpus.labels
        self.forward_ = forward(self.params_, corpus,
                                activation=self.activation,
                                scale_visible_sum=self.scale_visible_sum)
        return self

    def transform(self, X, t: int | None = None) -> np.ndarray:
        """Topic activation probabilities for documents.

        ``X`` is a count matrix or Document list; with ``t`` the
        activations use that slice's biases, otherwise the base biases.
        """
        check_is_fitted(self, "params_")
        counts = as_count_matrix(X, self.params_.n_terms)
        biases = None if t is None else self.forward_.slice_biases[t]
        return hidden_activation(self.params_.rsm, counts, biases)

    def predict(self, X, z_mode: str = "auto") -> np.ndarray:
        """Predicted slice index (document dating) for each document."""
        check_is_fitted(self, "params_")
        counts = as_count_matrix(X, self.params_.n_terms)
        rng = np.random.default_rng(self.seed)
        return metrics.predict_timestamp(self.params_, self.forward_, counts,
                                         z_mode, rng=rng)

    def perplexity(self, eval_corpus=None, z_mode: str = "auto") -> float:
        """Summed per-slice perplexity; defaults to the held-out split."""
        check_is_fitted(self, "params_")
        if eval_corpus is None:
            eval_corpus = self.held_corpus_
        if eval_corpus is None:
            raise ValueError("no held-out corpus; pass eval_corpus explicitly")
        return metrics.sum_perplexity(
            self.params_, self.train_corpus_, eval_corpus, z_mode,
            activation=self.activation,
            scale_visible_sum=self.scale_visible_sum,
            rng=np.random.default_rng(self.seed))

    def score(self, X=None, y=None) -> float:
        """Negated summed perplexity, so larger is better."""
        return -self.perplexity(X)

    def topics(self, top_n: int = 20) -> metrics.TopicSet:
        """Top terms of every topic at every slice."""
        check_is_fitted(self, "params_")
        return metrics.build_topic_set(
            self.params_, self.train_corpus_, top_n,
            activation=self.activation,
            scale_visible_sum=self.scale_visible_sum)
