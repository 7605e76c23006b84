"""LSTM cell and the shared sentence-encoding recipe built on the autograd core."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import autograd as ag
from .autograd import Tensor


def uniform_init(rng: np.random.Generator, shape, bound: float = 0.1) -> Tensor:
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(np.float32),
                  requires_grad=True)


class LstmCell:
    """Single LSTM layer with fused gate weights (i, f, o, g column blocks)."""

    def __init__(self, d_in: int, d_h: int, rng: np.random.Generator):
        self.d_in = d_in
        self.d_h = d_h
        self.wx = uniform_init(rng, (d_in, 4 * d_h))
        self.wh = uniform_init(rng, (d_h, 4 * d_h))
        b = np.zeros(4 * d_h, dtype=np.float32)
        b[d_h:2 * d_h] = 1.0          # forget-gate bias
        self.b = Tensor(b, requires_grad=True)

    def params(self) -> list[Tensor]:
        return [self.wx, self.wh, self.b]

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.wx": self.wx, f"{prefix}.wh": self.wh, f"{prefix}.b": self.b}

    def zeros(self, batch: int, dtype=np.float32) -> tuple[Tensor, Tensor]:
        z = np.zeros((batch, self.d_h), dtype=dtype)
        return Tensor(z.copy()), Tensor(z.copy())

    def step(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        z = ag.add(ag.add(ag.matmul(x, self.wx), ag.matmul(h, self.wh)), self.b)
        d = self.d_h
        i = ag.sigmoid(ag.narrow(z, 1, 0, d))
        f = ag.sigmoid(ag.narrow(z, 1, d, d))
        o = ag.sigmoid(ag.narrow(z, 1, 2 * d, d))
        g = ag.tanh(ag.narrow(z, 1, 3 * d, d))
        c_new = ag.add(ag.mul(f, c), ag.mul(i, g))
        h_new = ag.mul(o, ag.tanh(c_new))
        return h_new, c_new


def masked_step(cell: LstmCell, x: Tensor, h: Tensor, c: Tensor,
                mask: np.ndarray) -> tuple[Tensor, Tensor]:
    """LSTM step that freezes state for rows whose mask is 0 (past length)."""
    h_new, c_new = cell.step(x, h, c)
    m = Tensor(mask.reshape(-1, 1).astype(x.data.dtype))
    inv = Tensor((1.0 - mask.reshape(-1, 1)).astype(x.data.dtype))
    h_out = ag.add(ag.mul(h_new, m), ag.mul(h, inv))
    c_out = ag.add(ag.mul(c_new, m), ag.mul(c, inv))
    return h_out, c_out


def encode_sequence(cell: LstmCell, step_inputs: Sequence[Tensor],
                    lengths: np.ndarray) -> Tensor:
    """Concatenation of the final-step output with the mean of the outputs of
    all earlier steps (a length-1 sequence uses its only output for both
    halves).  Rows are masked by their true lengths."""
    batch = step_inputs[0].data.shape[0]
    dtype = step_inputs[0].data.dtype
    h, c = cell.zeros(batch, dtype=dtype)
    mean_counts = np.maximum(lengths - 1, 1).astype(dtype)
    mean_sum = Tensor(np.zeros((batch, cell.d_h), dtype=dtype))
    for t, x in enumerate(step_inputs):
        mask = (t < lengths).astype(dtype)
        h, c = masked_step(cell, x, h, c, mask)
        # steps contributing to the mean: 0..len-2, or step 0 when len == 1
        mmask = ((t < lengths - 1) | ((lengths == 1) & (t == 0))).astype(dtype)
        if mmask.any():
            mean_sum = ag.add(mean_sum, ag.mul(h, Tensor(mmask.reshape(-1, 1))))
    mean = ag.mul(mean_sum, Tensor((1.0 / mean_counts).reshape(-1, 1).astype(dtype)))
    return ag.concat([h, mean], axis=1)


def embed_ids(table: Tensor, ids: np.ndarray) -> list[Tensor]:
    """Per-step embedding lookups for an (B, T) id matrix."""
    return [ag.rows(table, ids[:, t]) for t in range(ids.shape[1])]


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer targets under softmax(logits)."""
    logp = ag.log_softmax(logits)
    onehot = np.zeros(logits.data.shape, dtype=logits.data.dtype)
    onehot[np.arange(len(targets)), targets] = 1.0
    picked = ag.sum_axis(ag.mul(logp, Tensor(onehot)), axis=1)
    return ag.scale(mean_vec(picked), -1.0)


def mean_vec(v: Tensor) -> Tensor:
    return ag.mean_all(v)


def pick(probabilities: Tensor, index: np.ndarray) -> Tensor:
    """Select one column per row of a (B, K) tensor -> (B,) tensor."""
    onehot = np.zeros(probabilities.data.shape, dtype=probabilities.data.dtype)
    onehot[np.arange(len(index)), index] = 1.0
    return ag.sum_axis(ag.mul(probabilities, Tensor(onehot)), axis=1)
