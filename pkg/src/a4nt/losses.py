"""Training objectives: discriminator and generator style losses,
cycle-reconstruction and embedding semantic losses, language-smoothness loss,
and their weighted total.  Also hosts the frozen auxiliaries those losses
need (per-class language models and the substitute sentence embedder)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .classifier import ClassifierModel
from .data import Sentence, Vocabulary
from .translator import SoftSentence, TranslatorModel

CLAMP = 1e-7


@dataclass
class LossWeights:
    w_sty: float = 1.0
    w_sem: float = 1.0
    w_l: float = 0.0

    def __post_init__(self):
        if self.w_sty < 0 or self.w_sem < 0 or self.w_l < 0:
            raise ValueError("loss weights must be non-negative")
        if self.w_sty == 0 and self.w_sem == 0 and self.w_l == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass
class LossReport:
    style: float
    semantic: float
    language: float
    total: float
    semantic_variant: str = "cycle"


# ---------------------------------------------------------------------------
# helpers

def _scalarize(x) -> float:
    return float(x.data) if isinstance(x, Tensor) else float(x)


def _as_batch(sentence: Sentence) -> tuple[np.ndarray, np.ndarray]:
    ids = np.asarray([sentence.ids], dtype=np.int64)
    lengths = np.asarray([len(sentence.ids)], dtype=np.int64)
    return ids, lengths


def _neg_log(p: Tensor) -> Tensor:
    return ag.scale(ag.log(ag.clamp(p, CLAMP, 1.0 - CLAMP)), -1.0)


# ---------------------------------------------------------------------------
# GAN losses

def discriminator_loss(classifier: ClassifierModel, target_class: str,
                       real, fake: SoftSentence) -> Tensor:
    """-log p(y|real) - log(1 - p(y|fake)); train the discriminator only, so
    the fake should be generated outside of the active tape."""
    idx = classifier.class_index(target_class)
    if isinstance(real, Sentence):
        real_ids, real_lengths = _as_batch(real)
    else:
        real_ids, real_lengths = real
    p_real = nn.pick(ag.softmax(classifier.logits_batch(real_ids, real_lengths)),
                     np.full(real_ids.shape[0], idx))
    p_fake = nn.pick(ag.softmax(classifier.logits_soft(fake)),
                     np.full(len(fake.lengths), idx))
    one = Tensor(np.ones_like(p_fake.data))
    return ag.add(ag.mean_all(_neg_log(p_real)),
                  ag.mean_all(_neg_log(ag.sub(one, p_fake))))


def style_loss(classifier: ClassifierModel, target_class: str,
               fake: SoftSentence) -> Tensor:
    """-log p(y|fake); gradients reach the generator through the soft rows."""
    idx = classifier.class_index(target_class)
    p_fake = nn.pick(ag.softmax(classifier.logits_soft(fake)),
                     np.full(len(fake.lengths), idx))
    return ag.mean_all(_neg_log(p_fake))


# ---------------------------------------------------------------------------
# semantic losses

def cycle_ml_loss(translator: TranslatorModel, reverse_direction,
                  fake: SoftSentence, original,
                  normalize: bool = True) -> Tensor:
    """Negative reconstruction log-probability of the original through the
    reverse decoder, per-token normalized by default."""
    if isinstance(original, Sentence):
        orig_ids, orig_lengths = _as_batch(original)
    else:
        orig_ids, orig_lengths = original
    logprob = translator.reconstruction_logprob_batch(
        reverse_direction, fake, orig_ids, orig_lengths)
    if normalize:
        logprob = ag.mul(logprob, Tensor((1.0 / np.maximum(orig_lengths, 1))
                                         .astype(logprob.data.dtype)))
    return ag.scale(ag.mean_all(logprob), -1.0)


class SemanticEmbedder:
    """Frozen sentence embedder: a classifier-style encoder pretrained inside
    an autoencoder on the pooled corpus, encoder kept, decoder discarded."""

    KIND = "embedder"

    def __init__(self, vocab: Vocabulary, d_emb: int = 32, d_h: int = 64,
                 seed: int = 0):
        from .translator import _Decoder
        rng = np.random.default_rng(seed)
        self.vocab = vocab
        self.d_emb = d_emb
        self.d_h = d_h
        self.emb = nn.uniform_init(rng, (len(vocab), d_emb))
        self.cell = nn.LstmCell(d_emb, d_h, rng)
        self.dec = _Decoder(2 * d_h + d_emb, d_h, len(vocab), rng)
        self.frozen = False

    def params(self) -> list[Tensor]:
        return [self.emb, *self.cell.params(), *self.dec.params()]

    def encoder_params(self) -> list[Tensor]:
        return [self.emb, *self.cell.params()]

    def named_params(self) -> dict[str, Tensor]:
        out = {"emb": self.emb}
        out.update(self.cell.named_params("enc"))
        out.update(self.dec.named_params("dec"))
        return out

    def config(self) -> dict:
        return {"d_emb": self.d_emb, "d_h": self.d_h}

    def freeze(self):
        self.frozen = True
        for p in self.params():
            p.requires_grad = False

    def embed_batch(self, ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        steps = nn.embed_ids(self.emb, ids)
        return nn.encode_sequence(self.cell, steps, lengths)

    def embed_soft(self, soft: SoftSentence) -> Tensor:
        steps = [ag.matmul(row, self.emb) for row in soft.steps]
        return nn.encode_sequence(self.cell, steps, soft.lengths)

    def embed_sentence(self, sentence: Sentence) -> np.ndarray:
        ids, lengths = _as_batch(sentence)
        return self.embed_batch(ids, lengths).data[0]

    def reconstruction_nll(self, ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        """Autoencoder pretraining objective."""
        batch = ids.shape[0]
        e = self.embed_batch(ids, lengths)
        prev = ag.rows(self.emb, np.full(batch, self.vocab.start_id, dtype=np.int64))
        state = self.dec.cell.zeros(batch, dtype=e.data.dtype)
        total = Tensor(np.zeros(batch, dtype=e.data.dtype))
        for t in range(ids.shape[1]):
            h, c = self.dec.cell.step(ag.concat([e, prev], axis=1), *state)
            state = (h, c)
            dist = ag.softmax(ag.add(ag.matmul(h, self.dec.w), self.dec.b))
            p_t = nn.pick(ag.clamp(dist, 1e-12, 1.0), ids[:, t])
            mask = Tensor((t < lengths).astype(e.data.dtype))
            total = ag.add(total, ag.mul(ag.log(p_t), mask))
            prev = ag.rows(self.emb, ids[:, t])
        per_token = ag.mul(total, Tensor((1.0 / np.maximum(lengths, 1))
                                         .astype(e.data.dtype)))
        return ag.scale(ag.mean_all(per_token), -1.0)


def semantic_embedding_loss(embedder: SemanticEmbedder, fake,
                            original) -> Tensor:
    """Sum over embedding dimensions of |F(original) - F(fake)|, batch-meaned."""
    def embed(x):
        if isinstance(x, SoftSentence):
            return embedder.embed_soft(x)
        if isinstance(x, Sentence):
            ids, lengths = _as_batch(x)
            return embedder.embed_batch(ids, lengths)
        ids, lengths = x
        return embedder.embed_batch(ids, lengths)

    diff = ag.abs_(ag.sub(embed(original), embed(fake)))
    return ag.mean_all(ag.sum_axis(diff, axis=1))


# ---------------------------------------------------------------------------
# language-smoothness loss

class LanguageModel:
    """Unconditional per-class LSTM language model, frozen during GAN training."""

    KIND = "lm"

    def __init__(self, vocab: Vocabulary, class_name: str, d_emb: int = 32,
                 d_h: int = 64, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.vocab = vocab
        self.class_name = class_name
        self.d_emb = d_emb
        self.d_h = d_h
        self.emb = nn.uniform_init(rng, (len(vocab), d_emb))
        self.cell = nn.LstmCell(d_emb, d_h, rng)
        self.w = nn.uniform_init(rng, (d_h, len(vocab)))
        self.b = Tensor(np.zeros(len(vocab), dtype=np.float32), requires_grad=True)
        self.frozen = False

    def params(self) -> list[Tensor]:
        return [self.emb, *self.cell.params(), self.w, self.b]

    def named_params(self) -> dict[str, Tensor]:
        out = {"emb": self.emb, "w": self.w, "b": self.b}
        out.update(self.cell.named_params("lstm"))
        return out

    def config(self) -> dict:
        return {"class_name": self.class_name, "d_emb": self.d_emb, "d_h": self.d_h}

    def freeze(self):
        self.frozen = True
        for p in self.params():
            p.requires_grad = False

    def _step_dist(self, prev: Tensor, state):
        h, c = self.cell.step(prev, *state)
        dist = ag.softmax(ag.add(ag.matmul(h, self.w), self.b))
        return dist, (h, c)

    def nll_batch(self, ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        """Mean per-token NLL of hard sequences (pretraining objective)."""
        batch = ids.shape[0]
        dtype = self.emb.data.dtype
        prev = ag.rows(self.emb, np.full(batch, self.vocab.start_id, dtype=np.int64))
        state = self.cell.zeros(batch, dtype=dtype)
        total = Tensor(np.zeros(batch, dtype=dtype))
        for t in range(ids.shape[1]):
            dist, state = self._step_dist(prev, state)
            p_t = nn.pick(ag.clamp(dist, 1e-12, 1.0), ids[:, t])
            mask = Tensor((t < lengths).astype(dtype))
            total = ag.add(total, ag.mul(ag.log(p_t), mask))
            prev = ag.rows(self.emb, ids[:, t])
        per_token = ag.mul(total, Tensor((1.0 / np.maximum(lengths, 1)).astype(dtype)))
        return ag.scale(ag.mean_all(per_token), -1.0)


def language_loss(lm: LanguageModel, fake: SoftSentence,
                  normalize: bool = True) -> Tensor:
    """Teacher-forced soft NLL of the transfer under the frozen target-class
    language model; padding past END is masked out."""
    batch = len(fake.lengths)
    dtype = fake.steps[0].data.dtype
    prev = ag.rows(lm.emb, np.full(batch, lm.vocab.start_id, dtype=np.int64))
    state = lm.cell.zeros(batch, dtype=dtype)
    total = Tensor(np.zeros(batch, dtype=dtype))
    for t, row in enumerate(fake.steps):
        dist, state = lm._step_dist(prev, state)
        logp = ag.log(ag.clamp(dist, 1e-12, 1.0))
        step_ll = ag.sum_axis(ag.mul(row, logp), axis=1)
        mask = Tensor((t < fake.lengths).astype(dtype))
        total = ag.add(total, ag.mul(step_ll, mask))
        prev = ag.matmul(row, lm.emb)
    if normalize:
        total = ag.mul(total, Tensor((1.0 / np.maximum(fake.lengths, 1)).astype(dtype)))
    return ag.scale(ag.mean_all(total), -1.0)


# ---------------------------------------------------------------------------
# total

def total_loss(weights: LossWeights, style, semantic, language,
               semantic_variant: str = "cycle"):
    """Weighted combination; returns (total, report).  The total is a Tensor
    whenever any component is, so it can drive a backward pass."""
    for name, value in (("style", style), ("semantic", semantic),
                        ("language", language)):
        if not np.isfinite(_scalarize(value)):
            raise ValueError(f"total_loss: non-finite component {name!r}")
    tensors = any(isinstance(v, Tensor) for v in (style, semantic, language))
    if tensors:
        def as_tensor(v):
            return v if isinstance(v, Tensor) else Tensor(np.asarray(float(v)))
        total = ag.add(ag.add(ag.scale(as_tensor(style), weights.w_sty),
                              ag.scale(as_tensor(semantic), weights.w_sem)),
                       ag.scale(as_tensor(language), weights.w_l))
        total_val = float(total.data)
    else:
        total = (weights.w_sty * style + weights.w_sem * semantic
                 + weights.w_l * language)
        total_val = total
    report = LossReport(style=_scalarize(style), semantic=_scalarize(semantic),
                        language=_scalarize(language), total=total_val,
                        semantic_variant=semantic_variant)
    return total, report
