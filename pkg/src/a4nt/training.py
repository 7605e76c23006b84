"""Pretraining (classifier, autoencoder, language models, embedder) and the
alternating adversarial training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import autograd as ag
from . import evaluation, nn
from .autograd import NonFiniteGradient, RmspropState, Tape, Tensor
from .classifier import ClassifierModel
from .data import Batch, Corpus, batch_iterator, pack_batch
from .losses import (LanguageModel, LossReport, LossWeights, SemanticEmbedder,
                     cycle_ml_loss, discriminator_loss, language_loss,
                     semantic_embedding_loss, style_loss, total_loss)
from .translator import GumbelConfig, TranslatorModel

log = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    lr_classifier: float = 0.005
    lr_translator: float = 0.001
    lr_autoencoder: float = 0.005
    lr_discriminator: float = 0.002
    lr_lm: float = 0.005
    lr_embedder: float = 0.005
    batch_size: int = 32
    max_epochs: int = 20
    ae_epochs: int = 250
    ae_min_epochs: int = 30
    temperature: float = 0.5
    weights: Optional[LossWeights] = None     # None -> auto-calibrate
    seed: int = 0
    max_len: int = 20
    d_emb: int = 32
    d_h: int = 64
    clip_norm: float = 5.0
    gan_iterations: int = 1500
    validate_every: int = 200
    val_docs: int = 40                        # cap for periodic validation
    semantic_variant: str = "cycle"           # or "embedding"
    use_language_loss: bool = True
    normalize_lengths: bool = True

    def __post_init__(self):
        for name in ("lr_classifier", "lr_translator", "lr_discriminator",
                     "lr_lm", "lr_embedder"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TraceRow:
    iteration: int
    style: float = float("nan")
    semantic: float = float("nan")
    language: float = float("nan")
    total: float = float("nan")
    disc_loss_xy: float = float("nan")
    disc_loss_yx: float = float("nan")
    val_f1: Optional[float] = None
    val_meteor: Optional[float] = None


class TrainingTrace:
    """Append-only per-iteration record with strictly increasing indices."""

    def __init__(self):
        self.rows: list[TraceRow] = []
        self.reports: list[LossReport] = []

    def append(self, row: TraceRow, report: Optional[LossReport] = None):
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ValueError("trace iterations must be strictly increasing")
        self.rows.append(row)
        if report is not None:
            self.reports.append(report)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "style", "semantic", "language", "total",
                        "disc_loss_xy", "disc_loss_yx", "val_f1", "val_meteor"])
            for r in self.rows:
                w.writerow([r.iteration, r.style, r.semantic, r.language,
                            r.total, r.disc_loss_xy, r.disc_loss_yx,
                            "" if r.val_f1 is None else r.val_f1,
                            "" if r.val_meteor is None else r.val_meteor])


def snapshot(params: Sequence[Tensor]) -> list[np.ndarray]:
    return [p.data.copy() for p in params]


def restore(params: Sequence[Tensor], snap: Sequence[np.ndarray]):
    for p, s in zip(params, snap):
        p.data = s.copy()


def _train_step(loss: Tensor, tape: Tape, params: list[Tensor],
                state: RmspropState, clip_norm: float):
    ag.zero_grads(params)
    ag.backward(tape, loss)
    ag.clip_global_norm(params, clip_norm)
    ag.rmsprop_step(params, None, state)


# ---------------------------------------------------------------------------
# pretraining

def pretrain_classifier(model: ClassifierModel, train: Corpus, val: Corpus,
                        config: TrainingConfig) -> TrainingTrace:
    """Cross-entropy training, selecting the epoch with best validation
    document F1."""
    params = model.params()
    state = RmspropState(params, config.lr_classifier)
    trace = TrainingTrace()
    best_f1, best_snap = -1.0, snapshot(params)
    it = 0
    for epoch in range(config.max_epochs):
        for batch in batch_iterator(train, config.batch_size, config.max_len,
                                    config.seed + epoch):
            with Tape() as tape:
                loss = model.training_loss(batch)
            _train_step(loss, tape, params, state, config.clip_norm)
            it += 1
        metrics = evaluation.corpus_metrics(model, val)
        trace.append(TraceRow(iteration=it, total=float("nan"),
                              val_f1=metrics.document_f1))
        if metrics.document_f1 > best_f1:
            best_f1 = metrics.document_f1
            best_snap = snapshot(params)
        if best_f1 >= 1.0:
            break
    restore(params, best_snap)
    return trace


def pretrain_language_model(lm: LanguageModel, corpus: Corpus,
                            config: TrainingConfig) -> TrainingTrace:
    """NLL training on the model's own class text; frozen afterwards."""
    params = lm.params()
    state = RmspropState(params, config.lr_lm)
    trace = TrainingTrace()
    it = 0
    for epoch in range(config.max_epochs):
        losses = []
        for batch in batch_iterator(corpus, config.batch_size, config.max_len,
                                    config.seed + 31 * epoch,
                                    class_filter=lm.class_name):
            with Tape() as tape:
                loss = lm.nll_batch(batch.ids, batch.lengths)
            _train_step(loss, tape, params, state, config.clip_norm)
            losses.append(float(loss.data))
            it += 1
        trace.append(TraceRow(iteration=it, total=float(np.mean(losses))))
    lm.freeze()
    return trace


def pretrain_embedder(embedder: SemanticEmbedder, corpus: Corpus,
                      config: TrainingConfig) -> TrainingTrace:
    """Autoencoder training on the pooled corpus; the encoder is then frozen
    and used as the fixed semantic embedding."""
    params = embedder.params()
    state = RmspropState(params, config.lr_embedder)
    trace = TrainingTrace()
    it = 0
    for epoch in range(config.max_epochs):
        losses = []
        for batch in batch_iterator(corpus, config.batch_size, config.max_len,
                                    config.seed + 47 * epoch):
            with Tape() as tape:
                loss = embedder.reconstruction_nll(batch.ids, batch.lengths)
            _train_step(loss, tape, params, state, config.clip_norm)
            losses.append(float(loss.data))
            it += 1
        trace.append(TraceRow(iteration=it, total=float(np.mean(losses))))
    embedder.freeze()
    return trace


def token_reconstruction_accuracy(translator: TranslatorModel, corpus: Corpus,
                                  max_len: int, sample: int = 200,
                                  seed: int = 0) -> float:
    """Greedy free-running reconstruction accuracy of each class through its
    own-source decoder."""
    rng = np.random.default_rng(seed)
    matched = total = 0
    for cls in corpus.class_names:
        direction = (cls, _other(corpus.class_names, cls))
        sentences = corpus.sentences_of(cls)
        if len(sentences) > sample:
            idx = rng.choice(len(sentences), size=sample, replace=False)
            sentences = [sentences[i] for i in idx]
        for sent in sentences:
            out = translator.translate_hard(sent, direction, rng, max_len,
                                            greedy=True)
            ref = sent.ids[:-1]
            got = out.ids[:-1]
            total += len(ref)
            matched += sum(1 for a, b in zip(ref, got) if a == b)
    return matched / max(total, 1)


def pretrain_autoencoder(translator: TranslatorModel, corpus: Corpus,
                         config: TrainingConfig) -> TrainingTrace:
    """Teacher-forced reconstruction training of both decoders on their own
    source class; stops when validation token accuracy plateaus."""
    params = translator.params()
    state = RmspropState(params, config.lr_autoencoder)
    trace = TrainingTrace()
    accs: list[float] = []
    last_good = snapshot(params)
    it = 0
    for epoch in range(config.ae_epochs):
        for cls in corpus.class_names:
            direction = (cls, _other(corpus.class_names, cls))
            for batch in batch_iterator(corpus, config.batch_size, config.max_len,
                                        config.seed + 13 * epoch,
                                        class_filter=cls):
                with Tape() as tape:
                    loss = translator.teacher_forced_nll(
                        direction, batch.ids, batch.lengths,
                        batch.ids, batch.lengths)
                if not np.isfinite(float(loss.data)):
                    log.warning("autoencoder diverged; restoring last checkpoint")
                    restore(params, last_good)
                    return trace
                _train_step(loss, tape, params, state, config.clip_norm)
                it += 1
        acc = token_reconstruction_accuracy(translator, corpus, config.max_len,
                                            seed=config.seed)
        trace.append(TraceRow(iteration=it, total=acc))
        accs.append(acc)
        last_good = snapshot(params)
        # plateau: < 0.1% improvement over the last 3 epochs
        if (epoch + 1 >= config.ae_min_epochs and len(accs) >= 4
                and max(accs[-3:]) - max(accs[:-3]) < 0.001):
            break
    return trace


# ---------------------------------------------------------------------------
# loss-weight calibration

def calibrate_loss_weights(report: LossReport) -> LossWeights:
    """Set weights so every weighted term initially matches the largest
    unweighted one, then normalize so w_sty = 1."""
    comps = {"style": report.style, "semantic": report.semantic,
             "language": report.language}
    biggest = max(comps.values())
    raw = {}
    for name, c in comps.items():
        if c == 0:
            log.warning("calibrate_loss_weights: %s component is zero; weight 1", name)
            raw[name] = 1.0
        else:
            raw[name] = biggest / c
    scale = raw["style"] if raw["style"] > 0 else 1.0
    return LossWeights(w_sty=raw["style"] / scale, w_sem=raw["semantic"] / scale,
                       w_l=raw["language"] / scale)


# ---------------------------------------------------------------------------
# GAN training

def _other(class_names: Sequence[str], value: str) -> str:
    a, b = class_names
    return b if value == a else a


class _BatchStream:
    """Endless seeded stream of same-class sentence batches."""

    def __init__(self, corpus: Corpus, cls: str, batch_size: int, max_len: int,
                 seed: int):
        self.corpus = corpus
        self.cls = cls
        self.batch_size = batch_size
        self.max_len = max_len
        self.seed = seed
        self.epoch = 0
        self._iter = self._fresh()

    def _fresh(self):
        return batch_iterator(self.corpus, self.batch_size, self.max_len,
                              self.seed + self.epoch, class_filter=self.cls)

    def next(self) -> Batch:
        try:
            return next(self._iter)
        except StopIteration:
            self.epoch += 1
            self._iter = self._fresh()
            return next(self._iter)


def _generator_losses(translator, discriminators, lms, embedder, batch, src,
                      tgt, weights, config, rng) -> tuple[Tensor, LossReport]:
    cfg = GumbelConfig(temperature=config.temperature, seed=config.seed)
    fake = translator.translate_soft_batch(batch.ids, batch.lengths, (src, tgt),
                                           cfg, rng, config.max_len)
    sty = style_loss(discriminators[tgt], tgt, fake)
    if config.semantic_variant == "embedding":
        sem = semantic_embedding_loss(embedder, fake, (batch.ids, batch.lengths))
    else:
        sem = cycle_ml_loss(translator, (tgt, src), fake,
                            (batch.ids, batch.lengths),
                            normalize=config.normalize_lengths)
    if config.use_language_loss and lms is not None:
        lang = language_loss(lms[tgt], fake, normalize=config.normalize_lengths)
    else:
        lang = Tensor(np.asarray(0.0, dtype=np.float32))
    return total_loss(weights, sty, sem, lang,
                      semantic_variant=config.semantic_variant)


def train_gan(translator: TranslatorModel,
              discriminators: dict[str, ClassifierModel],
              lms: Optional[dict[str, LanguageModel]],
              embedder: Optional[SemanticEmbedder],
              train: Corpus, val: Corpus,
              eval_classifier: ClassifierModel,
              config: TrainingConfig) -> TrainingTrace:
    """Alternating minibatch updates: one discriminator step then one
    generator step, both directions each time.  Diverging runs roll back to
    the last validation checkpoint with a halved generator learning rate."""
    a, b = train.class_names
    rng = np.random.default_rng(config.seed)
    gen_params = translator.params()
    gen_state = RmspropState(gen_params, config.lr_translator)
    disc_states = {c: RmspropState(discriminators[c].params(),
                                   config.lr_discriminator)
                   for c in (a, b)}
    streams = {c: _BatchStream(train, c, config.batch_size, config.max_len,
                               config.seed + 1000 * i)
               for i, c in enumerate((a, b))}
    per_class = max(1, config.val_docs // 2)
    subset_docs = []
    for c in (a, b):
        subset_docs.extend([d for d in val.documents
                            if d.attribute.value == c][:per_class])
    val_subset = Corpus(task=val.task, class_names=val.class_names,
                        documents=subset_docs)

    weights = config.weights
    if weights is None:
        probe = streams[a].next()
        _, probe_report = _generator_losses(
            translator, discriminators, lms, embedder, probe, a, b,
            LossWeights(1.0, 1.0, 1.0 if config.use_language_loss else 0.0),
            config, np.random.default_rng(config.seed))
        weights = calibrate_loss_weights(probe_report)
        if not config.use_language_loss:
            weights = LossWeights(weights.w_sty, weights.w_sem, 0.0)
        log.info("calibrated loss weights: %s", weights)

    trace = TrainingTrace()
    checkpoint = snapshot(gen_params)
    rollbacks = 0
    gcfg = GumbelConfig(temperature=config.temperature, seed=config.seed)

    for it in range(1, config.gan_iterations + 1):
        batches = {c: streams[c].next() for c in (a, b)}

        # discriminator updates (fakes generated off-tape)
        disc_losses = {}
        for src, tgt in ((a, b), (b, a)):
            fake = translator.translate_soft_batch(
                batches[src].ids, batches[src].lengths, (src, tgt), gcfg, rng,
                config.max_len)
            disc = discriminators[tgt]
            with Tape() as tape:
                d_loss = discriminator_loss(
                    disc, tgt, (batches[tgt].ids, batches[tgt].lengths), fake)
            _train_step(d_loss, tape, disc.params(), disc_states[tgt],
                        config.clip_norm)
            disc_losses[(src, tgt)] = float(d_loss.data)

        # generator update, both directions jointly
        try:
            with Tape() as tape:
                total_ab, rep_ab = _generator_losses(
                    translator, discriminators, lms, embedder, batches[a],
                    a, b, weights, config, rng)
                total_ba, rep_ba = _generator_losses(
                    translator, discriminators, lms, embedder, batches[b],
                    b, a, weights, config, rng)
                total = ag.scale(ag.add(total_ab, total_ba), 0.5)
            if not np.isfinite(float(total.data)):
                raise NonFiniteGradient("generator loss is non-finite")
            _train_step(total, tape, gen_params, gen_state, config.clip_norm)
        except NonFiniteGradient:
            rollbacks += 1
            if rollbacks > 3:
                raise RuntimeError("GAN training diverged 4 times; aborting")
            log.warning("divergence at iteration %d; rolling back, lr -> %g",
                        it, gen_state.learning_rate / 2)
            restore(gen_params, checkpoint)
            gen_state = RmspropState(gen_params, gen_state.learning_rate / 2)
            continue

        report = LossReport(
            style=(rep_ab.style + rep_ba.style) / 2,
            semantic=(rep_ab.semantic + rep_ba.semantic) / 2,
            language=(rep_ab.language + rep_ba.language) / 2,
            total=float(total.data),
            semantic_variant=config.semantic_variant)
        row = TraceRow(iteration=it, style=report.style,
                       semantic=report.semantic, language=report.language,
                       total=report.total,
                       disc_loss_xy=disc_losses[(a, b)],
                       disc_loss_yx=disc_losses[(b, a)])

        if it % config.validate_every == 0 or it == config.gan_iterations:
            metrics = evaluation.evaluate_transfer(
                translator, eval_classifier, val_subset,
                seed=config.seed + it, max_len=config.max_len)
            row.val_f1 = metrics.document_f1
            row.val_meteor = metrics.meteor
            checkpoint = snapshot(gen_params)
        trace.append(row, report)
    return trace
