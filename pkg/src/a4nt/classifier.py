"""Word-level LSTM attribute classifier.

Serves both as the standalone adversary scored in evaluation and as the
discriminator during adversarial training.  The sentence encoding is the
concatenation of the final LSTM output with the mean of the earlier step
outputs; a "final"-pooling variant (last output only) exists for the
holdout ensemble.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .data import Batch, Document, Sentence, Vocabulary, pack_batch


class ClassifierModel:
    KIND = "classifier"

    def __init__(self, vocab: Vocabulary, class_names: Sequence[str],
                 d_emb: int = 32, d_h: int = 64, seed: int = 0,
                 pooling: str = "concat"):
        if len(class_names) != 2:
            raise ValueError("classifier is binary: exactly two class names")
        if pooling not in ("concat", "final"):
            raise ValueError(f"unknown pooling {pooling!r}")
        rng = np.random.default_rng(seed)
        self.vocab = vocab
        self.class_names = tuple(class_names)
        self.d_emb = d_emb
        self.d_h = d_h
        self.pooling = pooling
        self.emb = nn.uniform_init(rng, (len(vocab), d_emb))
        self.cell = nn.LstmCell(d_emb, d_h, rng)
        enc_dim = 2 * d_h if pooling == "concat" else d_h
        self.w = nn.uniform_init(rng, (enc_dim, 2))
        self.b = Tensor(np.zeros(2, dtype=np.float32), requires_grad=True)

    # ------------------------------------------------------------------
    def params(self) -> list[Tensor]:
        return [self.emb, *self.cell.params(), self.w, self.b]

    def named_params(self) -> dict[str, Tensor]:
        out = {"emb": self.emb, "w": self.w, "b": self.b}
        out.update(self.cell.named_params("lstm"))
        return out

    def config(self) -> dict:
        return {"class_names": list(self.class_names), "d_emb": self.d_emb,
                "d_h": self.d_h, "pooling": self.pooling}

    def class_index(self, name: str) -> int:
        return self.class_names.index(name)

    # ------------------------------------------------------------------
    def _pool(self, encoding: Tensor) -> Tensor:
        if self.pooling == "concat":
            return encoding
        return ag.narrow(encoding, 1, 0, self.d_h)

    def encode_batch(self, ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        steps = nn.embed_ids(self.emb, ids)
        return self._pool(nn.encode_sequence(self.cell, steps, lengths))

    def encode_soft(self, soft) -> Tensor:
        steps = [ag.matmul(row, self.emb) for row in soft.steps]
        return self._pool(nn.encode_sequence(self.cell, steps, soft.lengths))

    def logits_batch(self, ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        return ag.add(ag.matmul(self.encode_batch(ids, lengths), self.w), self.b)

    def logits_soft(self, soft) -> Tensor:
        return ag.add(ag.matmul(self.encode_soft(soft), self.w), self.b)

    def training_loss(self, batch: Batch) -> Tensor:
        return nn.cross_entropy(self.logits_batch(batch.ids, batch.lengths),
                                batch.labels)

    # ------------------------------------------------------------------
    # single-sentence convenience surface

    def encode_features(self, sentence: Sentence) -> np.ndarray:
        if len(sentence.ids) == 0:
            raise ValueError("encode_features: empty sentence")
        ids = np.asarray([sentence.ids], dtype=np.int64)
        lengths = np.asarray([len(sentence.ids)], dtype=np.int64)
        return self.encode_batch(ids, lengths).data[0]

    def classify_sentence(self, sentence: Sentence) -> np.ndarray:
        ids = np.asarray([sentence.ids], dtype=np.int64)
        lengths = np.asarray([len(sentence.ids)], dtype=np.int64)
        logits = self.logits_batch(ids, lengths)
        return ag.softmax(logits).data[0]

    def classify_soft(self, soft_sentence) -> Union[Tensor, np.ndarray]:
        """Class probabilities for a soft sentence (rows over the vocabulary).

        Accepts a SoftSentence or a raw (T, V) array of rows; rows must be
        normalized within 1e-4.  Differentiable when called under a tape.
        """
        soft = _as_soft(soft_sentence, len(self.vocab))
        for row in soft.steps:
            sums = row.data.sum(axis=-1)
            if np.any(np.abs(sums - 1.0) > 1e-4):
                raise ValueError("classify_soft: rows must sum to 1 within 1e-4")
        probs = ag.softmax(self.logits_soft(soft))
        if isinstance(soft, _RawSoft) and not any(r.requires_grad for r in soft.steps):
            return probs.data[0]
        return probs

    def classify_document(self, document: Document,
                          hard_voting: bool = False) -> tuple[str, np.ndarray]:
        """Document label by per-class sums of sentence log-probabilities
        (ties go to the lexicographically smaller class name)."""
        batch = pack_batch([(s, 0, document.doc_id) for s in document.sentences],
                           max_len=10_000)
        logp = ag.log_softmax(self.logits_batch(batch.ids, batch.lengths)).data
        if hard_voting:
            votes = np.bincount(logp.argmax(axis=1), minlength=2).astype(np.float64)
            scores = votes
        else:
            scores = logp.sum(axis=0)
        best = _argmax_lexicographic(scores, self.class_names)
        return self.class_names[best], logp.sum(axis=0)

    def document_scores(self, documents: Sequence[Document]) -> list[str]:
        return [self.classify_document(d)[0] for d in documents]


def _argmax_lexicographic(scores: np.ndarray, class_names: Sequence[str]) -> int:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], class_names[i]))
    return order[0]


class _RawSoft:
    def __init__(self, steps, lengths):
        self.steps = steps
        self.lengths = lengths


def _as_soft(soft_sentence, vocab_size: int):
    if hasattr(soft_sentence, "steps"):
        return soft_sentence
    if isinstance(soft_sentence, (list, tuple)) and \
            all(isinstance(r, Tensor) for r in soft_sentence):
        steps = [r if r.data.ndim == 2 else ag.reshape(r, (1, -1)) for r in soft_sentence]
        return _RawSoft(steps, np.asarray([len(steps)], dtype=np.int64))
    rows = np.asarray(soft_sentence, dtype=np.float64) \
        if not isinstance(soft_sentence, Tensor) else soft_sentence.data
    if rows.ndim != 2 or rows.shape[1] != vocab_size:
        raise ValueError(f"classify_soft: expected (T, {vocab_size}) rows, got {rows.shape}")
    steps = [Tensor(rows[t:t + 1]) for t in range(rows.shape[0])]
    return _RawSoft(steps, np.asarray([rows.shape[0]], dtype=np.int64))
