"""Recurrent temporal extension of the replicated-softmax model.

One replicated-softmax model per time slice shares its weight matrix
across time; only the biases move.  A deterministic recurrent state
``u`` carries history::

    vbias_t = vbias + vbias_proj @ u[t-1]
    hbias_t = hbias + hbias_proj @ u[t-1]
    u[t]    = act(state_bias + state_rec @ u[t-1] + obs_to_state @ sum_n v_n[t])

with ``act`` = tanh (a logistic variant is available).  Training
estimates per-slice bias gradients with contrastive divergence and
chains them backward through time to all recurrent parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from .corpus import TemporalCorpus
from .replicated_softmax import RsmGradient, RsmParams, SliceBiases, cd_gradient

__all__ = [
    "TemporalModelParams",
    "TemporalGradient",
    "ForwardState",
    "forward",
    "tanh_backward",
    "sequence_gradient",
    "PARAM_NAMES",
]

# learned parameter set; the per-slice biases are derived, never stored
PARAM_NAMES = (
    "weights", "vbias", "hbias",
    "vbias_proj", "hbias_proj", "obs_to_state", "state_rec",
    "state_bias", "state0",
)


@dataclass
class TemporalModelParams:
    """All learned parameters of the temporal model.

    Shapes for K terms, F topics, U recurrent units:
    rsm.weights (K, F), rsm.vbias (K,), rsm.hbias (F,),
    vbias_proj (K, U), hbias_proj (F, U), obs_to_state (U, K),
    state_rec (U, U), state_bias (U,), state0 (U,).
    """

    rsm: RsmParams
    vbias_proj: np.ndarray
    hbias_proj: np.ndarray
    obs_to_state: np.ndarray
    state_rec: np.ndarray
    state_bias: np.ndarray
    state0: np.ndarray

    def __post_init__(self):
        k, f = self.rsm.n_terms, self.rsm.n_topics
        for name in PARAM_NAMES[3:]:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        u = self.state_bias.shape[0]
        expected = {
            "vbias_proj": (k, u), "hbias_proj": (f, u), "obs_to_state": (u, k),
            "state_rec": (u, u), "state_bias": (u,), "state0": (u,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")

    @property
    def n_terms(self) -> int:
        return self.rsm.n_terms

    @property
    def n_topics(self) -> int:
        return self.rsm.n_topics

    @property
    def n_state(self) -> int:
        return self.state_bias.shape[0]

    @classmethod
    def init_random(cls, n_terms: int, n_topics: int, n_state: int,
                    rng: np.random.Generator, sigma: float = 0.01
                    ) -> "TemporalModelParams":
        """Gaussian(0, sigma) weights everywhere, zero biases and zero u0."""
        return cls(
            rsm=RsmParams.init_random(n_terms, n_topics, rng, sigma),
            vbias_proj=rng.normal(0.0, sigma, size=(n_terms, n_state)),
            hbias_proj=rng.normal(0.0, sigma, size=(n_topics, n_state)),
            obs_to_state=rng.normal(0.0, sigma, size=(n_state, n_terms)),
            state_rec=rng.normal(0.0, sigma, size=(n_state, n_state)),
            state_bias=np.zeros(n_state),
            state0=np.zeros(n_state),
        )

    def as_dict(self) -> dict[str, np.ndarray]:
        d = {"weights": self.rsm.weights, "vbias": self.rsm.vbias, "hbias": self.rsm.hbias}
        for name in PARAM_NAMES[3:]:
            d[name] = getattr(self, name)
        return d

    @classmethod
    def from_dict(cls, arrays: dict[str, np.ndarray]) -> "TemporalModelParams":
        rsm = RsmParams(arrays["weights"], arrays["vbias"], arrays["hbias"])
        return cls(rsm=rsm, **{name: arrays[name] for name in PARAM_NAMES[3:]})

    def copy(self) -> "TemporalModelParams":
        return TemporalModelParams.from_dict(
            {name: arr.copy() for name, arr in self.as_dict().items()}
        )


@dataclass
class TemporalGradient:
    """Cost gradient for every learned parameter (same field names)."""

    weights: np.ndarray
    vbias: np.ndarray
    hbias: np.ndarray
    vbias_proj: np.ndarray
    hbias_proj: np.ndarray
    obs_to_state: np.ndarray
    state_rec: np.ndarray
    state_bias: np.ndarray
    state0: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def zeros_like(cls, params: TemporalModelParams) -> "TemporalGradient":
        return cls(**{name: np.zeros_like(arr) for name, arr in params.as_dict().items()})


@dataclass
class ForwardState:
    """Unrolled recurrent pass over a corpus.

    ``states`` has T+1 rows; row 0 is the learned initial state and row t
    the state after consuming slice t.  ``slice_biases[t]`` are the
    effective biases of slice t+1 (derived from states[t]).
    """

    states: np.ndarray
    slice_biases: list[SliceBiases]
    count_sums: np.ndarray
    activation: str = "tanh"


def _as_count_sums(params: TemporalModelParams, corpus) -> np.ndarray:
    if isinstance(corpus, TemporalCorpus):
        if corpus.n_terms != params.n_terms:
            raise ValueError(
                f"corpus vocabulary size {corpus.n_terms} does not match "
                f"model ({params.n_terms})"
            )
        return corpus.count_sums()
    sums = np.asarray(corpus, dtype=np.float64)
    if sums.ndim != 2 or sums.shape[1] != params.n_terms:
        raise ValueError(f"count sums of shape {sums.shape} do not match model")
    return sums


def _activate(x: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(x)
    if activation == "logistic":
        return expit(x)
    raise ValueError(f"unknown activation {activation!r}")


def _activation_deriv(u: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return 1.0 - u * u
    return u * (1.0 - u)


def forward(params: TemporalModelParams, corpus, *, activation: str = "tanh",
            scale_visible_sum: bool = False) -> ForwardState:
    """Propagate the recurrent state and derive every slice's biases.

    ``corpus`` may be a :class:`TemporalCorpus` or a precomputed
    (T, n_terms) matrix of per-slice summed count vectors.  With
    ``scale_visible_sum`` the summed counts are divided by the slice's
    document count before entering the recurrence (range control;
    zero-document slices contribute a zero input).
    """
    count_sums = _as_count_sums(params, corpus)
    drive = count_sums
    if scale_visible_sum:
        if not isinstance(corpus, TemporalCorpus):
            raise ValueError("scale_visible_sum needs a TemporalCorpus to know "
                             "per-slice document counts")
        n_docs = np.array([max(s.n_docs, 1) for s in corpus.slices], dtype=np.float64)
        drive = count_sums / n_docs[:, None]
    n_slices = count_sums.shape[0]
    states = np.empty((n_slices + 1, params.n_state))
    states[0] = params.state0
    slice_biases = []
    for t in range(n_slices):
        slice_biases.append(SliceBiases(
            vbias=params.rsm.vbias + params.vbias_proj @ states[t],
            hbias=params.rsm.hbias + params.hbias_proj @ states[t],
        ))
        states[t + 1] = _activate(
            params.state_bias + params.state_rec @ states[t] + params.obs_to_state @ drive[t],
            activation,
        )
    return ForwardState(states=states, slice_biases=slice_biases,
                        count_sums=drive, activation=activation)


def tanh_backward(u_next: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pull ``upstream`` back through tanh given the activation's output."""
    u_next = np.asarray(u_next, dtype=np.float64)
    return np.asarray(upstream, dtype=np.float64) * (1.0 - u_next * u_next)


def sequence_gradient(params: TemporalModelParams, corpus: TemporalCorpus, *,
                      k_steps: int = 15, rng: np.random.Generator | None = None,
                      slice_gradient=None, activation: str = "tanh",
                      scale_visible_sum: bool = False,
                      mean_field_final: bool = True,
                      return_slice_grads: bool = False):
    """Whole-sequence cost gradient: per-slice CD estimates plus BPTT.

    ``slice_gradient(rsm, counts, biases, rng) -> RsmGradient`` replaces
    the contrastive-divergence estimator when given (the exact oracle
    uses this to substitute exact model expectations).  Per-slice RNG
    streams are spawned in slice order so the whole pass is a pure
    function of the incoming generator state.
    """
    fwd = forward(params, corpus, activation=activation,
                  scale_visible_sum=scale_visible_sum)
    n_slices = corpus.n_slices
    if slice_gradient is None:
        if rng is None:
            rng = np.random.default_rng()
        streams = rng.spawn(n_slices)

        def slice_gradient(rsm, counts, biases, t):
            return cd_gradient(rsm, counts, k_steps, biases, streams[t],
                               mean_field_final=mean_field_final)
    else:
        _user_fn = slice_gradient

        def slice_gradient(rsm, counts, biases, t):
            return _user_fn(rsm, counts, biases, rng)

    # slice gradients in ascending time order (fixed for reproducibility)
    slice_grads: list[RsmGradient] = []
    for t, slice_ in enumerate(corpus.slices):
        counts = slice_.count_matrix(params.n_terms)
        if counts.shape[0] == 0:
            slice_grads.append(RsmGradient(
                weights=np.zeros_like(params.rsm.weights),
                vbias=np.zeros_like(params.rsm.vbias),
                hbias=np.zeros_like(params.rsm.hbias)))
            continue
        slice_grads.append(slice_gradient(params.rsm, counts, fwd.slice_biases[t], t))

    # backward recurrence: d_state[t] = dC/du^(t), with dC/du^(T) = 0
    u = fwd.states
    d_state = np.zeros((n_slices + 1, params.n_state))
    for t in range(n_slices, 0, -1):
        g = slice_grads[t - 1]
        s = d_state[t] * _activation_deriv(u[t], activation)
        d_state[t - 1] = (params.state_rec.T @ s
                          + params.hbias_proj.T @ g.hbias
                          + params.vbias_proj.T @ g.vbias)

    grad = TemporalGradient.zeros_like(params)
    for t in range(1, n_slices + 1):  # ascending accumulation
        g = slice_grads[t - 1]
        s = d_state[t] * _activation_deriv(u[t], activation)
        grad.weights += g.weights
        grad.vbias += g.vbias
        grad.hbias += g.hbias
        grad.vbias_proj += np.outer(g.vbias, u[t - 1])
        grad.hbias_proj += np.outer(g.hbias, u[t - 1])
        grad.state_rec += np.outer(s, u[t - 1])
        grad.obs_to_state += np.outer(s, fwd.count_sums[t - 1])
        grad.state_bias += s
    grad.state0 = d_state[0].copy()
    if return_slice_grads:
        return grad, slice_grads
    return grad
