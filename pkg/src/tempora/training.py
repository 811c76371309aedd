"""Training loop: full-sequence SGD with per-slice CD gradients and BPTT.

One epoch processes the whole time sequence: propagate the recurrent
state, estimate every slice's gradient with k-step contrastive
divergence, backpropagate through time, then take one plain SGD step
``theta <- theta - lr * grad``.  Optional extras (momentum, weight
decay, mini-batching) are off by default.

Randomness is derived from a single integer seed through keyed
SeedSequence spawns, so any epoch's draws are a pure function of
``(seed, epoch)`` and training can resume from a checkpoint bit-exactly.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import CorpusWarning, TemporalCorpus, TimeSlice
from .replicated_softmax import RsmParams, cd_gradient
from .temporal_model import PARAM_NAMES, TemporalModelParams, sequence_gradient

__all__ = [
    "TrainConfig",
    "Checkpoint",
    "TrainingDiverged",
    "VocabularyMismatchError",
    "warm_start",
    "train",
    "train_static_rsm",
]

CHECKPOINT_FORMAT_VERSION = 1

# spawn-key tags for the independent RNG streams derived from one seed
_STREAM_INIT = 0
_STREAM_WARM = 1
_STREAM_EPOCH = 2
_STREAM_EVAL = 3


class TrainingDiverged(RuntimeError):
    """A parameter became non-finite during training."""


class VocabularyMismatchError(ValueError):
    """Checkpoint and corpus were built over different vocabularies."""


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for one named stream of the run's root seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass
class TrainConfig:
    """Hyperparameters; the defaults are the tuned full-scale settings."""

    epochs: int = 1000
    cd_k: int = 15
    learning_rate: float = 0.001
    n_topics: int = 30
    n_state: int = 30
    seed: int = 0
    early_stop_patience: int = 25
    eval_every: int = 10
    warm_start: bool = False
    momentum: float = 0.0
    weight_decay: float = 0.0
    clip_norm: float | None = 100.0
    mean_field_final: bool = True
    activation: str = "tanh"
    scale_visible_sum: bool = False
    batch_docs: int | None = None

    def validate(self) -> "TrainConfig":
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.cd_k < 1:
            raise ValueError("cd_k must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.n_topics < 1 or self.n_state < 1:
            raise ValueError("n_topics and n_state must be >= 1")
        if self.early_stop_patience < 1 or self.eval_every < 1:
            raise ValueError("early_stop_patience and eval_every must be >= 1")
        if self.activation not in ("tanh", "logistic"):
            raise ValueError(f"unknown activation {self.activation!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d).validate()


@dataclass
class Checkpoint:
    """Trained parameters plus everything needed to reproduce the run."""

    params: TemporalModelParams
    epoch: int
    config: TrainConfig
    vocab_hash: str
    rng_state: dict = field(default_factory=dict)
    held_perplexity: float | None = None

    def check_vocabulary(self, vocabulary) -> None:
        if self.vocab_hash != vocabulary.hash_hex():
            raise VocabularyMismatchError(
                "checkpoint was trained on a different vocabulary "
                f"(hash {self.vocab_hash[:12]}... vs {vocabulary.hash_hex()[:12]}...)"
            )

    def save(self, path, binary: bool = False) -> Path:
        """Write a versioned JSON envelope; ``binary`` moves the matrices
        to a little-endian float64 sidecar next to the JSON file."""
        path = Path(path)
        arrays = self.params.as_dict()
        envelope = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "epoch": self.epoch,
            "config": self.config.to_dict(),
            "vocab_hash": self.vocab_hash,
            "rng_state": self.rng_state,
            "held_perplexity": self.held_perplexity,
        }
        if binary:
            sidecar = path.with_suffix(path.suffix + ".bin")
            with open(sidecar, "wb") as fh:
                for name in PARAM_NAMES:
                    arr = np.ascontiguousarray(arrays[name], dtype="<f8")
                    fh.write(struct.pack("<I", arr.ndim))
                    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
                    fh.write(arr.tobytes())
            envelope["params"] = {"sidecar": sidecar.name, "order": list(PARAM_NAMES)}
        else:
            envelope["params"] = {name: arrays[name].tolist() for name in PARAM_NAMES}
        path.write_text(json.dumps(envelope, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        envelope = json.loads(path.read_text(encoding="utf-8"))
        version = envelope.get("format_version")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format_version {version!r}")
        raw = envelope["params"]
        if "sidecar" in raw:
            arrays = {}
            with open(path.parent / raw["sidecar"], "rb") as fh:
                for name in raw["order"]:
                    (ndim,) = struct.unpack("<I", fh.read(4))
                    shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
                    n = int(np.prod(shape)) if ndim else 1
                    arrays[name] = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).copy()
        else:
            arrays = {name: np.asarray(vals, dtype=np.float64) for name, vals in raw.items()}
        return cls(
            params=TemporalModelParams.from_dict(arrays),
            epoch=envelope["epoch"],
            config=TrainConfig.from_dict(envelope["config"]),
            vocab_hash=envelope["vocab_hash"],
            rng_state=envelope.get("rng_state", {}),
            held_perplexity=envelope.get("held_perplexity"),
        )


def _global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


class _SgdState:
    """Plain SGD with optional momentum/weight-decay/clipping, shared by
    the static and temporal trainers."""

    def __init__(self, config: TrainConfig, arrays: dict[str, np.ndarray]):
        self.config = config
        self.velocity = ({name: np.zeros_like(a) for name, a in arrays.items()}
                         if config.momentum else None)

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             epoch: int) -> None:
        cfg = self.config
        if cfg.weight_decay:
            grads = {name: g + cfg.weight_decay * arrays[name]
                     for name, g in grads.items()}
        if cfg.clip_norm is not None:
            norm = _global_norm(grads)
            if norm > cfg.clip_norm:
                scale = cfg.clip_norm / norm
                grads = {name: g * scale for name, g in grads.items()}
        for name, g in grads.items():
            if self.velocity is not None:
                self.velocity[name] = cfg.momentum * self.velocity[name] + g
                g = self.velocity[name]
            arrays[name] -= cfg.learning_rate * g
            if not np.all(np.isfinite(arrays[name])):
                raise TrainingDiverged(
                    f"non-finite values in parameter {name!r} at epoch {epoch}"
                )


def train_static_rsm(counts: np.ndarray, config: TrainConfig,
                     rng: np.random.Generator,
                     params: RsmParams | None = None) -> RsmParams:
    """CD training of a standalone replicated-softmax model on one slice.

    ``counts`` is the slice's (n_docs, n_terms) count matrix; ``rng``
    drives both initialization and the Gibbs chains.
    """
    config.validate()
    counts = np.asarray(counts, dtype=np.float64)
    if params is None:
        params = RsmParams.init_random(counts.shape[1], config.n_topics, rng)
    arrays = {"weights": params.weights, "vbias": params.vbias, "hbias": params.hbias}
    sgd = _SgdState(config, arrays)
    for epoch in range(config.epochs):
        g = cd_gradient(params, counts, config.cd_k, None, rng,
                        mean_field_final=config.mean_field_final)
        sgd.step(arrays, {"weights": g.weights, "vbias": g.vbias, "hbias": g.hbias},
                 epoch)
    return params


def warm_start(corpus: TemporalCorpus, config: TrainConfig) -> TemporalModelParams:
    """Initialize the temporal model from an RSM trained on the last slice.

    The RSM's weights and base biases are copied in; recurrent weights
    are Gaussian(0, 0.01) and the state biases and initial state are
    zero.  An empty final slice falls back to random initialization.
    """
    config.validate()
    params = TemporalModelParams.init_random(
        corpus.n_terms, config.n_topics, config.n_state,
        stream_rng(config.seed, _STREAM_INIT))
    last = corpus.slices[-1]
    if last.n_docs == 0:
        warnings.warn("final slice is empty; warm start falls back to random "
                      "initialization", CorpusWarning)
        return params
    rsm = train_static_rsm(last.count_matrix(corpus.n_terms), config,
                           stream_rng(config.seed, _STREAM_WARM))
    params.rsm = rsm
    return params


def _subsample(corpus: TemporalCorpus, batch_docs: int,
               rng: np.random.Generator) -> TemporalCorpus:
    slices = []
    for s in corpus.slices:
        if s.n_docs <= batch_docs:
            slices.append(s)
            continue
        picked = np.sort(rng.choice(s.n_docs, size=batch_docs, replace=False))
        slices.append(TimeSlice(s.label, tuple(s.documents[i] for i in picked)))
    return TemporalCorpus(corpus.vocabulary, tuple(slices))


def train(corpus: TemporalCorpus, config: TrainConfig,
          held: TemporalCorpus | None = None, *,
          start: Checkpoint | None = None,
          epoch_callback=None) -> Checkpoint:
    """Run the epoch loop and return the best checkpoint.

    With a held-out corpus, its summed per-slice perplexity is evaluated
    every ``eval_every`` epochs; training stops early after
    ``early_stop_patience`` evaluations without improvement and the best
    snapshot is returned.  Without one, the final parameters are.

    ``start`` resumes a saved checkpoint: epoch numbering (and therefore
    every random draw) continues exactly where the checkpoint left off.
    ``epoch_callback(epoch, params, recon_error, held_ppl)`` observes
    each epoch, e.g. for logging.
    """
    from .metrics import sum_perplexity  # local import, metrics sits above training

    config.validate()
    if start is not None:
        params = start.params.copy()
        first_epoch = int(start.rng_state.get("next_epoch", start.epoch))
    else:
        params = (warm_start(corpus, config) if config.warm_start else
                  TemporalModelParams.init_random(
                      corpus.n_terms, config.n_topics, config.n_state,
                      stream_rng(config.seed, _STREAM_INIT)))
        first_epoch = 0

    total_tokens = max(corpus.total_tokens(), 1)
    arrays = params.as_dict()
    sgd = _SgdState(config, arrays)
    best_params = params.copy()
    best_epoch = first_epoch
    best_ppl = np.inf
    bad_evals = 0
    epochs_run = first_epoch

    for epoch in range(first_epoch, config.epochs):
        rng = stream_rng(config.seed, _STREAM_EPOCH, epoch)
        batch = (corpus if config.batch_docs is None
                 else _subsample(corpus, config.batch_docs, rng))
        grad, slice_grads = sequence_gradient(
            params, batch, k_steps=config.cd_k, rng=rng,
            activation=config.activation,
            scale_visible_sum=config.scale_visible_sum,
            mean_field_final=config.mean_field_final,
            return_slice_grads=True)
        sgd.step(arrays, grad.as_dict(), epoch)
        epochs_run = epoch + 1

        recon_error = sum(float(np.abs(g.vbias).sum()) for g in slice_grads) / total_tokens
        held_ppl = None
        if held is not None and (epoch + 1) % config.eval_every == 0:
            held_ppl = sum_perplexity(
                params, corpus, held,
                activation=config.activation,
                scale_visible_sum=config.scale_visible_sum,
                rng=stream_rng(config.seed, _STREAM_EVAL, epoch))
            if held_ppl < best_ppl:
                best_ppl = held_ppl
                best_params = params.copy()
                best_epoch = epoch + 1
                bad_evals = 0
            else:
                bad_evals += 1
        if epoch_callback is not None:
            epoch_callback(epoch, params, recon_error, held_ppl)
        if held is not None and bad_evals >= config.early_stop_patience:
            break

    if held is not None and np.isfinite(best_ppl):
        final_params, final_epoch = best_params, best_epoch
        held_value = float(best_ppl)
    else:
        final_params, final_epoch = params, epochs_run
        held_value = None
    return Checkpoint(
        params=final_params,
        epoch=final_epoch,
        config=config,
        vocab_hash=corpus.vocabulary.hash_hex(),
        rng_state={"scheme": "seed-spawn-v1", "seed": config.seed,
                   "next_epoch": epochs_run},
        held_perplexity=held_value,
    )
