"""Style-transfer network: shared LSTM encoder, one LSTM decoder per ordered
attribute pair, hard sampling for inference and Gumbel-softmax soft sampling
for adversarial training."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .data import Sentence, Vocabulary


@dataclass
class GumbelConfig:
    temperature: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


class SoftSentence:
    """Sequence of soft token rows (distributions over V) with the realized
    hard ids.  Holds a whole batch; single-sentence use is batch size 1."""

    def __init__(self, steps: list[Tensor], hard_ids: np.ndarray,
                 lengths: np.ndarray):
        self.steps = steps          # T tensors of shape (B, V)
        self.hard_ids = hard_ids    # (B, T)
        self.lengths = lengths      # (B,) position of END + 1, capped at T

    @property
    def rows(self) -> list[np.ndarray]:
        """Soft rows of the first (or only) sentence, trimmed to its length."""
        n = int(self.lengths[0])
        return [self.steps[t].data[0] for t in range(n)]

    def sentence(self, end_id: int, index: int = 0) -> Sentence:
        n = int(self.lengths[index])
        ids = [int(i) for i in self.hard_ids[index, :n]]
        if not ids or ids[-1] != end_id:
            ids.append(end_id)
        if len(ids) < 2:
            ids = [ids[0] if ids else end_id, end_id]
        return Sentence(ids)


class _Decoder:
    def __init__(self, d_in: int, d_h: int, vocab_size: int,
                 rng: np.random.Generator):
        self.cell = nn.LstmCell(d_in, d_h, rng)
        self.w = nn.uniform_init(rng, (d_h, vocab_size))
        self.b = Tensor(np.zeros(vocab_size, dtype=np.float32), requires_grad=True)

    def params(self) -> list[Tensor]:
        return [*self.cell.params(), self.w, self.b]

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        out = {f"{prefix}.w": self.w, f"{prefix}.b": self.b}
        out.update(self.cell.named_params(f"{prefix}.lstm"))
        return out


class TranslatorModel:
    KIND = "translator"

    def __init__(self, vocab: Vocabulary, class_names: Sequence[str],
                 d_emb: int = 32, d_h: int = 64, seed: int = 0):
        if len(class_names) != 2:
            raise ValueError("translator handles a binary task: two class names")
        rng = np.random.default_rng(seed)
        self.vocab = vocab
        self.class_names = tuple(class_names)
        self.d_emb = d_emb
        self.d_h = d_h
        self.emb = nn.uniform_init(rng, (len(vocab), d_emb))
        self.enc_cell = nn.LstmCell(d_emb, d_h, rng)
        a, b = self.class_names
        dec_in = 2 * d_h + d_emb      # [E_G(s); prev word embedding]
        self.decoders = {
            (a, b): _Decoder(dec_in, d_h, len(vocab), rng),
            (b, a): _Decoder(dec_in, d_h, len(vocab), rng),
        }

    # ------------------------------------------------------------------
    def directions(self) -> list[tuple[str, str]]:
        return list(self.decoders)

    def direction(self, src: str, tgt: Optional[str] = None) -> tuple[str, str]:
        if tgt is None:
            if "->" not in src:
                raise KeyError(f"unknown direction {src!r}")
            src, tgt = src.split("->", 1)
        key = (src, tgt)
        if key not in self.decoders:
            raise KeyError(f"unknown direction {src}->{tgt}; have "
                           + ", ".join(f"{s}->{t}" for s, t in self.decoders))
        return key

    def shared_params(self) -> list[Tensor]:
        return [self.emb, *self.enc_cell.params()]

    def params(self) -> list[Tensor]:
        out = self.shared_params()
        for dec in self.decoders.values():
            out.extend(dec.params())
        return out

    def named_params(self) -> dict[str, Tensor]:
        out = {"emb": self.emb}
        out.update(self.enc_cell.named_params("enc"))
        for (src, tgt), dec in self.decoders.items():
            out.update(dec.named_params(f"dec.{src}->{tgt}"))
        return out

    def config(self) -> dict:
        return {"class_names": list(self.class_names), "d_emb": self.d_emb,
                "d_h": self.d_h}

    # ------------------------------------------------------------------
    # encoding

    def encode_batch(self, ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        steps = nn.embed_ids(self.emb, ids)
        return nn.encode_sequence(self.enc_cell, steps, lengths)

    def encode_soft(self, soft: SoftSentence) -> Tensor:
        steps = [ag.matmul(row, self.emb) for row in soft.steps]
        return nn.encode_sequence(self.enc_cell, steps, soft.lengths)

    def encode(self, sentence: Sentence) -> np.ndarray:
        if len(sentence.ids) == 0:
            raise ValueError("encode: empty sentence")
        ids = np.asarray([sentence.ids], dtype=np.int64)
        lengths = np.asarray([len(sentence.ids)], dtype=np.int64)
        return self.encode_batch(ids, lengths).data[0]

    # ------------------------------------------------------------------
    # decoding

    def decode_step(self, direction, e_g: Tensor, prev_emb: Tensor,
                    state: Optional[tuple[Tensor, Tensor]]):
        """One decoder step: returns the next-token distribution and the new
        recurrent state.  The LSTM input is [E_G(s); previous word embedding]."""
        dec = self.decoders[self.direction(*direction) if isinstance(direction, tuple)
                            else self.direction(direction)]
        if state is None:
            state = dec.cell.zeros(e_g.data.shape[0], dtype=e_g.data.dtype)
        h, c = dec.cell.step(ag.concat([e_g, prev_emb], axis=1), *state)
        dist = ag.softmax(ag.add(ag.matmul(h, dec.w), dec.b))
        return dist, (h, c)

    def translate_soft_batch(self, ids: np.ndarray, lengths: np.ndarray,
                             direction, cfg: GumbelConfig,
                             rng: np.random.Generator,
                             max_len: int) -> SoftSentence:
        """Soft-sample a batch of transfers; feedback is the expected embedding
        of each soft row."""
        key = self.direction(*direction) if isinstance(direction, tuple) \
            else self.direction(direction)
        batch = ids.shape[0]
        e_g = self.encode_batch(ids, lengths)
        prev = ag.rows(self.emb, np.full(batch, self.vocab.start_id, dtype=np.int64))
        state = None
        steps: list[Tensor] = []
        hard = np.zeros((batch, max_len), dtype=np.int64)
        done = np.zeros(batch, dtype=bool)
        out_lengths = np.full(batch, max_len, dtype=np.int64)
        for t in range(max_len):
            dist, state = self.decode_step(key, e_g, prev, state)
            row = sample_gumbel_soft(dist, cfg, rng)
            steps.append(row)
            ids_t = row.data.argmax(axis=1)
            hard[:, t] = ids_t
            newly_done = (~done) & (ids_t == self.vocab.end_id)
            out_lengths[newly_done] = t + 1
            done |= newly_done
            prev = ag.matmul(row, self.emb)
        return SoftSentence(steps, hard, out_lengths)

    def translate_hard(self, sentence: Sentence, direction,
                       rng: np.random.Generator, max_len: int,
                       greedy: bool = False) -> Sentence:
        key = self.direction(*direction) if isinstance(direction, tuple) \
            else self.direction(direction)
        ids = np.asarray([sentence.ids], dtype=np.int64)
        lengths = np.asarray([len(sentence.ids)], dtype=np.int64)
        e_g = self.encode_batch(ids, lengths)
        prev = ag.rows(self.emb, np.asarray([self.vocab.start_id], dtype=np.int64))
        state = None
        out: list[int] = []
        for _ in range(max_len):
            dist, state = self.decode_step(key, e_g, prev, state)
            p = dist.data[0].astype(np.float64)
            p /= p.sum()
            next_id = int(p.argmax()) if greedy else int(rng.choice(len(p), p=p))
            out.append(next_id)
            if next_id == self.vocab.end_id:
                break
            prev = ag.rows(self.emb, np.asarray([next_id], dtype=np.int64))
        if not out or out[-1] != self.vocab.end_id:
            out.append(self.vocab.end_id)
        if len(out) < 2:
            out = [self.vocab.unk_id, self.vocab.end_id]
        return Sentence(out)

    def translate(self, sentence: Sentence, direction, mode: str = "hard",
                  max_len: int = 20, seed: int = 0, greedy: bool = False,
                  temperature: float = 0.5):
        """Unified entry point: hard sampling (or greedy) for inference,
        Gumbel-softmax soft sampling for training."""
        rng = np.random.default_rng(seed)
        if mode == "hard":
            return self.translate_hard(sentence, direction, rng, max_len, greedy)
        if mode == "soft":
            ids = np.asarray([sentence.ids], dtype=np.int64)
            lengths = np.asarray([len(sentence.ids)], dtype=np.int64)
            cfg = GumbelConfig(temperature=temperature, seed=seed)
            return self.translate_soft_batch(ids, lengths, direction, cfg, rng, max_len)
        raise ValueError(f"unknown mode {mode!r}")

    # ------------------------------------------------------------------
    # teacher-forced scoring

    def reconstruction_logprob_batch(self, direction, soft: SoftSentence,
                                     orig_ids: np.ndarray,
                                     orig_lengths: np.ndarray) -> Tensor:
        """Per-sentence sum of log-probabilities of reconstructing the original
        tokens from the soft transfer through the reverse decoder."""
        key = self.direction(*direction) if isinstance(direction, tuple) \
            else self.direction(direction)
        batch = orig_ids.shape[0]
        e_g = self.encode_soft(soft)
        prev = ag.rows(self.emb, np.full(batch, self.vocab.start_id, dtype=np.int64))
        state = None
        total = Tensor(np.zeros(batch, dtype=e_g.data.dtype))
        for t in range(orig_ids.shape[1]):
            dist, state = self.decode_step(key, e_g, prev, state)
            p_t = nn.pick(ag.clamp(dist, 1e-12, 1.0), orig_ids[:, t])
            mask = Tensor((t < orig_lengths).astype(e_g.data.dtype))
            total = ag.add(total, ag.mul(ag.log(p_t), mask))
            prev = ag.rows(self.emb, orig_ids[:, t])
        return total

    def reconstruction_logprob(self, reverse_direction, soft: SoftSentence,
                               original: Sentence) -> Tensor:
        ids = np.asarray([original.ids], dtype=np.int64)
        lengths = np.asarray([len(original.ids)], dtype=np.int64)
        total = self.reconstruction_logprob_batch(reverse_direction, soft, ids, lengths)
        return ag.sum_all(total)

    def teacher_forced_nll(self, direction, src_ids: np.ndarray,
                           src_lengths: np.ndarray, tgt_ids: np.ndarray,
                           tgt_lengths: np.ndarray) -> Tensor:
        """Mean per-token NLL of teacher-forced decoding (autoencoder training)."""
        key = self.direction(*direction) if isinstance(direction, tuple) \
            else self.direction(direction)
        batch = src_ids.shape[0]
        e_g = self.encode_batch(src_ids, src_lengths)
        prev = ag.rows(self.emb, np.full(batch, self.vocab.start_id, dtype=np.int64))
        state = None
        total = Tensor(np.zeros(batch, dtype=e_g.data.dtype))
        for t in range(tgt_ids.shape[1]):
            dist, state = self.decode_step(key, e_g, prev, state)
            p_t = nn.pick(ag.clamp(dist, 1e-12, 1.0), tgt_ids[:, t])
            mask = Tensor((t < tgt_lengths).astype(e_g.data.dtype))
            total = ag.add(total, ag.mul(ag.log(p_t), mask))
            prev = ag.rows(self.emb, tgt_ids[:, t])
        per_token = ag.mul(total, Tensor((1.0 / np.maximum(tgt_lengths, 1))
                                         .astype(e_g.data.dtype)))
        return ag.scale(ag.mean_all(per_token), -1.0)


def sample_gumbel_soft(dist: Tensor, cfg: GumbelConfig,
                       rng: np.random.Generator) -> Tensor:
    """softmax((log p + g) / tau) with g = -log(-log U); differentiable in p."""
    u = rng.uniform(1e-12, 1.0, size=dist.data.shape)
    gumbel = -np.log(-np.log(u)).astype(dist.data.dtype)
    logd = ag.log(ag.clamp(dist, 1e-12, 1.0))
    return ag.softmax(ag.scale(ag.add(logd, Tensor(gumbel)), 1.0 / cfg.temperature))
