"""Command-line entry point for reproducible batch runs.

Subcommands: ``ingest`` (corpus normalization + stats), ``train``
(checkpoint + training log), ``eval`` (metric CSVs from a checkpoint)
and ``oracle`` (exact-math verification battery).

Conventions: data goes to files or stdout, logs to stderr.  Every run
emits a JSON run manifest (resolved configuration, input hashes, output
paths) so identical manifests reproduce identical outputs.  Exit codes:
0 success, 1 failed verification/metric check, 2 input error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics
from .corpus import CorpusFormatError, ingest, serialize, split_held_out
from .exact import (
    EnumerationLimitError,
    brute_force_log_z,
    exact_log_prob,
    exact_log_probs,
    exact_log_z,
    exact_rsm_gradient,
    finite_difference_check,
    sequence_count_vectors,
)
from .replicated_softmax import RsmParams, free_energy
from .temporal_model import TemporalModelParams, forward, sequence_gradient
from .training import (
    Checkpoint,
    TrainConfig,
    TrainingDiverged,
    VocabularyMismatchError,
    train,
)

log = logging.getLogger("tempora")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------------------
# shared plumbing

def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("TEMPORA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CorpusFormatError(f"TEMPORA_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def _workdir_path(args, value) -> Path:
    path = Path(value)
    if not path.is_absolute():
        path = Path(args.workdir) / path
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_inputs(paths) -> dict[str, str]:
    return {str(p): _sha256(Path(p)) for p in paths if p is not None and Path(p).is_file()}


def write_run_manifest(args, command: str, config: dict, inputs, outputs) -> Path:
    """Record the resolved run so it can be replayed byte-for-byte."""
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "inputs": _hash_inputs(inputs),
        "outputs": [str(o) for o in outputs if o is not None],
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    out = getattr(args, "run_manifest", None)
    if out is None:
        primary = next((o for o in outputs if o is not None), None)
        out = (Path(str(primary) + ".manifest.json") if primary is not None
               else Path(args.workdir) / "run_manifest.json")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def write_csv(path, header, rows) -> None:
    """RFC-4180 CSV with a fixed column order; path=None writes stdout."""
    if path is None:
        writer = csv.writer(sys.stdout, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


# ---------------------------------------------------------------------------
# ingest

def cmd_ingest(args) -> int:
    manifest = _workdir_path(args, args.manifest)
    vocab = _workdir_path(args, args.vocab) if args.vocab else None
    out_dir = _workdir_path(args, args.out) if args.out else None
    corpus = ingest(manifest, vocabulary_path=vocab)
    inputs = [manifest, vocab]
    inputs += [manifest.parent / e["file"]
               for e in json.loads(manifest.read_text(encoding="utf-8"))["slices"]]
    outputs = [out_dir / "manifest.json"] if out_dir else []
    write_run_manifest(args, "ingest",
                       {"manifest": str(manifest), "vocab": str(vocab) if vocab else None,
                        "out": str(out_dir) if out_dir else None, "seed": None},
                       inputs, outputs)
    if out_dir:
        serialize(corpus, out_dir)
        log.info("wrote canonical corpus to %s", out_dir)

    print(f"{'slice':<12}{'docs':>8}{'tokens':>10}")
    for s in corpus.slices:
        tokens = sum(d.length for d in s.documents)
        print(f"{s.label:<12}{s.n_docs:>8}{tokens:>10}")
    print(f"{'total':<12}{corpus.total_docs():>8}{corpus.total_tokens():>10}")
    print(f"vocabulary: {corpus.n_terms} terms (sha256 {corpus.vocabulary.hash_hex()[:12]})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    manifest = _workdir_path(args, args.manifest)
    out = _workdir_path(args, args.out)
    log_path = _workdir_path(args, args.log) if args.log else None
    config = TrainConfig(
        epochs=args.epochs, cd_k=args.cd_k, learning_rate=args.lr,
        n_topics=args.hidden, n_state=args.recurrent, seed=args.seed,
        early_stop_patience=args.early_stop, eval_every=args.eval_every,
        warm_start=args.warm_start, momentum=args.momentum,
        weight_decay=args.weight_decay,
        clip_norm=None if args.no_clip else args.clip_norm,
        mean_field_final=args.cd_mean_field_final,
        activation=args.recurrent_activation,
        scale_visible_sum=args.scale_visible_sum,
        batch_docs=args.batch_docs,
    ).validate()
    full = ingest(manifest, vocabulary_path=_workdir_path(args, args.vocab) if args.vocab else None)
    held = None
    train_corpus = full
    if args.held_per_slice:
        train_corpus, held = split_held_out(full, args.held_per_slice, config.seed)

    inputs = [manifest] + [manifest.parent / e["file"]
                           for e in json.loads(manifest.read_text(encoding="utf-8"))["slices"]]
    write_run_manifest(args, "train", {**config.to_dict(),
                                       "manifest": str(manifest),
                                       "held_per_slice": args.held_per_slice},
                       inputs, [out, log_path])

    history = []

    def on_epoch(epoch, params, recon, ppl):
        history.append((epoch, recon, ppl))
        if (epoch + 1) % max(1, config.epochs // 20 if config.epochs else 1) == 0:
            log.info("epoch %d/%d recon_error=%.6f held_ppl=%s",
                     epoch + 1, config.epochs, recon,
                     f"{ppl:.4f}" if ppl is not None else "-")

    start = Checkpoint.load(_workdir_path(args, args.resume)) if args.resume else None
    if start is not None:
        start.check_vocabulary(train_corpus.vocabulary)
    checkpoint = train(train_corpus, config, held, start=start, epoch_callback=on_epoch)
    checkpoint.save(out, binary=args.binary)
    log.info("checkpoint written to %s (epoch %d)", out, checkpoint.epoch)
    if log_path:
        write_csv(log_path, ["epoch", "recon_error", "held_perplexity"],
                  [(e, _fmt(r), _fmt(p)) for e, r, p in history])
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval

def _load_eval_context(args):
    checkpoint = Checkpoint.load(_workdir_path(args, args.checkpoint))
    context = ingest(_workdir_path(args, args.manifest))
    checkpoint.check_vocabulary(context.vocabulary)
    eval_corpus = context
    if getattr(args, "eval_manifest", None):
        eval_corpus = ingest(_workdir_path(args, args.eval_manifest))
        checkpoint.check_vocabulary(eval_corpus.vocabulary)
    cfg = checkpoint.config
    fwd = forward(checkpoint.params, context, activation=cfg.activation,
                  scale_visible_sum=cfg.scale_visible_sum)
    return checkpoint, context, eval_corpus, fwd


def _eval_inputs(args):
    paths = [_workdir_path(args, args.checkpoint), _workdir_path(args, args.manifest)]
    if getattr(args, "eval_manifest", None):
        paths.append(_workdir_path(args, args.eval_manifest))
    return paths


def cmd_eval_perplexity(args) -> int:
    checkpoint, context, eval_corpus, fwd = _load_eval_context(args)
    out = _workdir_path(args, args.out) if args.out else None
    write_run_manifest(args, "eval perplexity",
                       {"z_mode": args.z_mode, "seed": args.seed}, _eval_inputs(args), [out])
    threads = _resolve_threads(args.threads)

    def one_slice(t):
        s = eval_corpus.slices[t]
        if s.n_docs == 0:
            return None
        counts = s.count_matrix(checkpoint.params.n_terms)
        ppl = metrics.slice_perplexity(
            checkpoint.params, fwd, counts, t, args.z_mode,
            rng=np.random.default_rng(np.random.SeedSequence(entropy=(args.seed, t))))
        return (s.label, s.n_docs, int(counts.sum()), ppl)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        per_slice = list(pool.map(one_slice, range(eval_corpus.n_slices)))
    rows = [("slice", label, n, tok, _fmt(ppl))
            for label, n, tok, ppl in (r for r in per_slice if r is not None)]
    total = sum(r[3] for r in per_slice if r is not None)
    rows.append(("sum", "", "", "", _fmt(total)))
    write_csv(out, ["scope", "label", "n_docs", "n_tokens", "perplexity"], rows)
    return EXIT_OK


def cmd_eval_timestamp(args) -> int:
    checkpoint, context, eval_corpus, fwd = _load_eval_context(args)
    out = _workdir_path(args, args.out) if args.out else None
    write_run_manifest(args, "eval timestamp",
                       {"z_mode": args.z_mode, "seed": args.seed}, _eval_inputs(args), [out])
    rows = []
    pred_labels, true_labels = [], []
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(args.seed, 0x54)))
    doc_index = 0
    for t, s in enumerate(eval_corpus.slices):
        if s.n_docs == 0:
            continue
        counts = s.count_matrix(checkpoint.params.n_terms)
        pred = metrics.predict_timestamp(checkpoint.params, fwd, counts,
                                         args.z_mode, rng=rng)
        for p in pred:
            rows.append((doc_index, t, s.label, int(p), context.labels[int(p)]))
            pred_labels.append(context.labels[int(p)])
            true_labels.append(s.label)
            doc_index += 1
    write_csv(out, ["doc", "true_slice", "true_label", "predicted_slice",
                    "predicted_label"], rows)
    try:
        err = metrics.mean_absolute_error_years(pred_labels, true_labels)
        print(f"mean_absolute_error_years,{_fmt(err)}")
    except ValueError:
        log.warning("slice labels are not integer years; skipping Err")
    return EXIT_OK


def cmd_eval_topics(args) -> int:
    checkpoint, context, _, fwd = _load_eval_context(args)
    out = _workdir_path(args, args.out) if args.out else None
    write_run_manifest(args, "eval topics", {"top": args.top, "seed": None},
                       _eval_inputs(args), [out])
    rows = []
    for t in range(context.n_slices):
        topics, probs = metrics.extract_topics(
            checkpoint.params, fwd, context.vocabulary, t, args.top, with_probs=True)
        for j, (terms, ps) in enumerate(zip(topics, probs)):
            for rank, (term, p) in enumerate(zip(terms, ps)):
                rows.append((context.labels[t], j, rank, term, _fmt(float(p))))
    write_csv(out, ["label", "topic", "rank", "term", "probability"], rows)
    return EXIT_OK


def cmd_eval_popularity(args) -> int:
    checkpoint, context, _, fwd = _load_eval_context(args)
    out = _workdir_path(args, args.out) if args.out else None
    key_path = _workdir_path(args, args.key_terms)
    write_run_manifest(args, "eval popularity", {"top": args.top, "seed": None},
                       _eval_inputs(args) + [key_path], [out])
    key_sets = json.loads(key_path.read_text(encoding="utf-8"))
    topic_set = metrics.build_topic_set(checkpoint.params, context, args.top,
                                        activation=checkpoint.config.activation,
                                        scale_visible_sum=checkpoint.config.scale_visible_sum)
    rows = []
    for name in sorted(key_sets):
        sims = metrics.topic_popularity(topic_set, key_sets[name])
        for label, sim in zip(context.labels, sims):
            rows.append((name, label, _fmt(sim)))
    write_csv(out, ["topic_name", "label", "similarity"], rows)
    return EXIT_OK


def cmd_eval_drift(args) -> int:
    checkpoint, context, _, fwd = _load_eval_context(args)
    out = _workdir_path(args, args.out) if args.out else None
    write_run_manifest(args, "eval drift", {"top": args.top, "seed": None},
                       _eval_inputs(args), [out])
    topic_set = metrics.build_topic_set(checkpoint.params, context, args.top,
                                        activation=checkpoint.config.activation,
                                        scale_visible_sum=checkpoint.config.scale_visible_sum)
    labels = list(context.labels)
    from_label = args.from_label or labels[0]
    to_label = args.to_label or labels[-1]
    for lbl in (from_label, to_label):
        if lbl not in labels:
            raise CorpusFormatError(f"unknown slice label {lbl!r}")
    ttd = metrics.topic_term_drift(topic_set.slice_terms(labels.index(from_label)),
                                   topic_set.slice_terms(labels.index(to_label)))
    write_csv(out, ["from_label", "to_label", "ttd"],
              [(from_label, to_label, _fmt(ttd))])
    return EXIT_OK


def cmd_eval_trend(args) -> int:
    checkpoint, context, _, fwd = _load_eval_context(args)
    out = _workdir_path(args, args.out) if args.out else None
    write_run_manifest(args, "eval trend",
                       {"top": args.top, "keywords": args.keyword, "seed": None},
                       _eval_inputs(args), [out])
    topic_set = metrics.build_topic_set(checkpoint.params, context, args.top,
                                        activation=checkpoint.config.activation,
                                        scale_visible_sum=checkpoint.config.scale_visible_sum)
    totals = context.term_totals()
    rows = []
    for keyword in args.keyword:
        count = int(totals[context.vocabulary.id(keyword)]) if keyword in context.vocabulary else 0
        trend = metrics.keyword_trend(topic_set, keyword, count)
        rows.append((keyword, trend.count, trend.span, _fmt(trend.span_dict),
                     "".join(map(str, trend.bits))))
    write_csv(out, ["keyword", "corpus_count", "span", "span_dict", "trend"], rows)
    return EXIT_OK


def cmd_eval_span(args) -> int:
    checkpoint, context, _, fwd = _load_eval_context(args)
    out = _workdir_path(args, args.out) if args.out else None
    write_run_manifest(args, "eval span", {"top": args.top, "seed": None},
                       _eval_inputs(args), [out])
    topic_set = metrics.build_topic_set(checkpoint.params, context, args.top,
                                        activation=checkpoint.config.activation,
                                        scale_visible_sum=checkpoint.config.scale_visible_sum)
    totals = context.term_totals()
    rows = []
    for term in sorted(topic_set.all_terms()):
        count = int(totals[context.vocabulary.id(term)]) if term in context.vocabulary else 0
        trend = metrics.keyword_trend(topic_set, term, count)
        rows.append((term, count, trend.span, _fmt(trend.span_dict)))
    write_csv(out, ["term", "corpus_count", "span", "span_dict"], rows)
    avg = metrics.avg_span(topic_set, context)
    print(f"avg_span,{_fmt(avg)}")
    print(f"unique_topic_terms,{len(topic_set.all_terms())}")
    return EXIT_OK


def cmd_eval_coherence(args) -> int:
    checkpoint, context, _, fwd = _load_eval_context(args)
    out = _workdir_path(args, args.out) if args.out else None
    if args.cooccurrence:
        table_path = _workdir_path(args, args.cooccurrence)
        table = metrics.CooccurrenceTable.load(table_path)
        extra_inputs = [table_path]
    elif args.reference_corpus:
        ref = _workdir_path(args, args.reference_corpus)
        table = metrics.build_cooccurrence(ref, args.window)
        extra_inputs = [ref]
    else:
        raise CorpusFormatError("need --cooccurrence or --reference-corpus")
    write_run_manifest(args, "eval coherence",
                       {"top": args.top, "window": args.window, "seed": None},
                       _eval_inputs(args) + extra_inputs, [out])
    topic_set = metrics.build_topic_set(checkpoint.params, context, args.top,
                                        activation=checkpoint.config.activation,
                                        scale_visible_sum=checkpoint.config.scale_visible_sum)
    threads = _resolve_threads(args.threads)

    def one_slice(t):
        return [metrics.coherence(topic, table) for topic in topic_set.topics[t]]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        by_slice = list(pool.map(one_slice, range(context.n_slices)))
    rows = []
    for label, cohs in zip(context.labels, by_slice):
        for j, c in enumerate(cohs):
            rows.append((label, str(j), _fmt(c)))
        finite = [c for c in cohs if np.isfinite(c)]
        rows.append((label, "mean", _fmt(float(np.mean(finite)) if finite else None)))
        rows.append((label, "median", _fmt(float(np.median(finite)) if finite else None)))
    write_csv(out, ["label", "topic", "coherence"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle

def _oracle_checks(seed: int, fd_epsilon: float, checkpoint: Checkpoint | None):
    """Yield (name, passed, detail) for each verification check."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x0AC1E)))

    if checkpoint is None:
        n_terms, n_topics = 3, 2
        params = RsmParams(rng.normal(0, 0.5, (n_terms, n_topics)),
                           rng.normal(0, 0.3, n_terms), rng.normal(0, 0.3, n_topics))
    else:
        params = checkpoint.params.rsm
        n_terms, n_topics = params.n_terms, params.n_topics
        finite = all(np.all(np.isfinite(a)) for a in checkpoint.params.as_dict().values())
        yield ("checkpoint-finite", finite,
               "all parameters finite" if finite else "non-finite parameter values")
        if not finite:
            return
        if n_topics > 12:
            yield ("enumeration-skipped", True,
                   f"n_topics={n_topics} too wide for the exact battery; "
                   "structural checks only")
            return

    # normalization: sum of sequence probabilities is 1
    n_words = 2
    if n_terms ** n_words <= 4096:
        from scipy.special import logsumexp
        fes = np.array([free_energy(params, v)
                        for v in sequence_count_vectors(n_terms, n_words)])
        total = float(np.exp(logsumexp(-fes) - exact_log_z(params, n_words)))
        yield ("normalization", abs(total - 1.0) < 1e-9,
               f"sum P over sequences = {total!r}")
        brute = brute_force_log_z(params, n_words)
        closed = exact_log_z(params, n_words)
        rel = abs(brute - closed) / max(abs(brute), 1e-12)
        yield "partition-closed-form", rel < 1e-10, f"rel deviation {rel:.3e}"

    # exact gradient vs finite differences
    docs = rng.multinomial(3, np.ones(n_terms) / n_terms, size=2).astype(float)
    g = exact_rsm_gradient(params, docs)

    def cost(d):
        return -float(exact_log_probs(RsmParams(d["weights"], d["vbias"], d["hbias"]),
                                      docs).sum())

    chk = finite_difference_check(
        cost, {"weights": params.weights, "vbias": params.vbias, "hbias": params.hbias},
        {"weights": g.weights, "vbias": g.vbias, "hbias": g.hbias}, epsilon=fd_epsilon)
    yield ("rsm-gradient-fd", chk.max_rel < 1e-6,
           f"max rel {chk.max_rel:.3e} at {chk.worst}")

    # free-energy path equals direct enumeration path
    doc = docs[0]
    lp_free = exact_log_prob(params, doc)
    from scipy.special import logsumexp
    direct = -free_energy(params, doc) - logsumexp(
        [-free_energy(params, v) for v in sequence_count_vectors(n_terms, int(doc.sum()))])
    rel = abs(lp_free - direct) / max(abs(direct), 1e-12)
    yield "free-energy-identity", rel < 1e-10, f"rel deviation {rel:.3e}"

    # BPTT against finite differences on a tiny sequence (fresh instance only)
    if checkpoint is None:
        from .corpus import Document, TemporalCorpus, TimeSlice, Vocabulary
        vocab = Vocabulary.from_terms([f"w{i}" for i in range(n_terms)])
        slices = []
        for t in range(2):
            counts = rng.multinomial(2, np.ones(n_terms) / n_terms, size=2)
            docs_t = tuple(Document.from_counts(
                {i: int(c) for i, c in enumerate(row) if c}) for row in counts)
            slices.append(TimeSlice(str(t), docs_t))
        tiny = TemporalCorpus(vocab, tuple(slices))
        tiny_params = TemporalModelParams.init_random(n_terms, n_topics, 2, rng, sigma=0.4)
        grad = sequence_gradient(
            tiny_params, tiny,
            slice_gradient=lambda rsm, counts, biases, _rng:
                exact_rsm_gradient(rsm, counts, biases))

        def seq_cost(arrays):
            p = TemporalModelParams.from_dict(arrays)
            fwd = forward(p, tiny)
            return -sum(exact_log_probs(p.rsm, s.count_matrix(n_terms),
                                        fwd.slice_biases[t]).sum()
                        for t, s in enumerate(tiny.slices))

        chk = finite_difference_check(seq_cost, tiny_params.as_dict(),
                                      grad.as_dict(), epsilon=fd_epsilon)
        yield ("bptt-gradient-fd", chk.max_rel < 1e-4,
               f"max rel {chk.max_rel:.3e} at {chk.worst}")


def cmd_oracle(args) -> int:
    checkpoint = None
    inputs = []
    if args.checkpoint:
        path = _workdir_path(args, args.checkpoint)
        checkpoint = Checkpoint.load(path)
        inputs.append(path)
    write_run_manifest(args, "oracle",
                       {"seed": args.seed, "fd_epsilon": args.fd_epsilon},
                       inputs, [])
    failed = 0
    for name, passed, detail in _oracle_checks(args.seed, args.fd_epsilon, checkpoint):
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        failed += 0 if passed else 1
    if failed:
        log.error("%d oracle check(s) failed", failed)
        return EXIT_CHECK_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workdir", default=".", help="base directory for relative paths")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: TEMPORA_THREADS or logical cores)")
    p.add_argument("--run-manifest", default=None,
                   help="where to write the run manifest JSON")


def _add_eval_common(p: argparse.ArgumentParser) -> None:
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True,
                   help="corpus manifest that drives the recurrent state")
    p.add_argument("--eval-manifest", default=None,
                   help="separate corpus to score (defaults to --manifest)")
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top", type=int, default=20, help="terms per topic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempora",
        description="temporal topic modeling: train, evaluate, verify")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a corpus and print per-slice stats")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", default=None, help="pre-supplied vocabulary file")
    p.add_argument("--out", default=None, help="directory for the canonical corpus")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", default=None)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="training log CSV path")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--cd-k", type=int, default=15)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--hidden", type=int, default=30)
    p.add_argument("--recurrent", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--early-stop", type=int, default=25,
                   help="patience in evaluations without improvement")
    p.add_argument("--eval-every", type=int, default=10)
    p.add_argument("--held-per-slice", type=int, default=0,
                   help="documents per slice reserved for early stopping")
    p.add_argument("--warm-start", action="store_true",
                   help="initialize from an RSM trained on the final slice")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--binary", action="store_true",
                   help="store matrices in a binary sidecar")
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--clip-norm", type=float, default=100.0)
    p.add_argument("--no-clip", action="store_true", help="disable gradient clipping")
    p.add_argument("--cd-mean-field-final", action=argparse.BooleanOptionalAction,
                   default=True,
                   help="use probabilities for the final negative hidden statistics")
    p.add_argument("--recurrent-activation", choices=["tanh", "logistic"],
                   default="tanh")
    p.add_argument("--scale-visible-sum", action="store_true",
                   help="divide the recurrent drive by each slice's document count")
    p.add_argument("--batch-docs", type=int, default=None,
                   help="opt-in mini-batch size per slice (default full batch)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="compute metric CSVs from a checkpoint")
    esub = p.add_subparsers(dest="metric", required=True)

    ep = esub.add_parser("perplexity")
    _add_eval_common(ep)
    ep.add_argument("--z-mode", choices=["exact", "ais", "auto"], default="auto")
    ep.set_defaults(func=cmd_eval_perplexity)

    ep = esub.add_parser("timestamp")
    _add_eval_common(ep)
    ep.add_argument("--z-mode", choices=["exact", "ais", "auto"], default="auto")
    ep.set_defaults(func=cmd_eval_timestamp)

    ep = esub.add_parser("topics")
    _add_eval_common(ep)
    ep.set_defaults(func=cmd_eval_topics)

    ep = esub.add_parser("popularity")
    _add_eval_common(ep)
    ep.add_argument("--key-terms", required=True,
                    help='JSON file {"topic name": ["term", ...]}')
    ep.set_defaults(func=cmd_eval_popularity)

    ep = esub.add_parser("drift")
    _add_eval_common(ep)
    ep.add_argument("--from-label", default=None)
    ep.add_argument("--to-label", default=None)
    ep.set_defaults(func=cmd_eval_drift)

    ep = esub.add_parser("trend")
    _add_eval_common(ep)
    ep.add_argument("--keyword", action="append", required=True,
                    help="may be given multiple times")
    ep.set_defaults(func=cmd_eval_trend)

    ep = esub.add_parser("span")
    _add_eval_common(ep)
    ep.set_defaults(func=cmd_eval_span)

    ep = esub.add_parser("coherence")
    _add_eval_common(ep)
    ep.add_argument("--cooccurrence", default=None,
                    help="saved co-occurrence table JSON")
    ep.add_argument("--reference-corpus", default=None,
                    help="plain-text file to build the table from")
    ep.add_argument("--window", type=int, default=5)
    ep.set_defaults(func=cmd_eval_coherence)

    p = sub.add_parser("oracle", help="run the exact-math verification battery")
    _add_common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fd-epsilon", type=float, default=1e-5)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusFormatError, VocabularyMismatchError, EnumerationLimitError,
            FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT_ERROR
    except TrainingDiverged as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
