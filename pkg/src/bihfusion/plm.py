"""Sequence branch: a small pre-norm transformer over residue tokens."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensorcore as tc
from .constants import VOCAB_SIZE
from .protein.dataset import read_embeddings
from .tensorcore.nn import LayerNorm, Linear, MLP, Module, MultiheadAttention, uniform_weight


class SequenceTooLong(ValueError):
    pass


@dataclass
class PlmConfig:
    vocab_size: int = VOCAB_SIZE
    d_model: int = 32
    num_layers: int = 2
    num_heads: int = 4
    ffn_dim: int = 64
    max_len: int = 1024
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.d_model % self.num_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by num_heads {self.num_heads}")


@dataclass
class PlmState:
    """Token representations after each layer; ``layers[0]`` is the embedding."""

    layers: list[tc.Tensor] = field(default_factory=list)

    @property
    def final(self) -> tc.Tensor:
        return self.layers[-1]


class TransformerBlock(Module):
    def __init__(self, cfg: PlmConfig, rng: np.random.Generator):
        self.ln1 = LayerNorm(cfg.d_model)
        self.attn = MultiheadAttention(cfg.d_model, cfg.num_heads, rng)
        self.ln2 = LayerNorm(cfg.d_model)
        self.ffn = MLP([cfg.d_model, cfg.ffn_dim, cfg.d_model], rng)
        self.dropout_p = cfg.dropout_p

    def __call__(self, h: tc.Tensor, training: bool = False, rng=None) -> tc.Tensor:
        a = self.attn(self.ln1(h))
        h = tc.add(h, tc.dropout(a, self.dropout_p, training, rng))
        f = self.ffn(self.ln2(h))
        return tc.add(h, tc.dropout(f, self.dropout_p, training, rng))


class ProteinLM(Module):
    """Token + learned absolute position embeddings followed by transformer blocks.

    There are no special tokens, so token ``i`` is residue ``i``.
    """

    def __init__(self, cfg: PlmConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.tok_emb = uniform_weight(rng, cfg.vocab_size, cfg.d_model)
        self.pos_emb = uniform_weight(rng, cfg.max_len, cfg.d_model)
        self.blocks = [TransformerBlock(cfg, rng) for _ in range(cfg.num_layers)]

    @property
    def num_layers(self) -> int:
        return len(self.blocks)

    def embed(self, tokens) -> tc.Tensor:
        tokens = np.asarray(tokens, dtype=np.int64)
        n = len(tokens)
        if n > self.cfg.max_len:
            raise SequenceTooLong(f"sequence of {n} tokens exceeds max_len {self.cfg.max_len}")
        if n and (tokens.min() < 0 or tokens.max() >= self.cfg.vocab_size):
            raise ValueError("token index outside the vocabulary")
        return tc.add(tc.embedding_lookup(self.tok_emb, tokens),
                      tc.embedding_lookup(self.pos_emb, np.arange(n)))

    def layer(self, l: int, h: tc.Tensor, training: bool = False, rng=None) -> tc.Tensor:
        """Apply block ``l`` (1-based) to the previous layer's output."""
        return self.blocks[l - 1](h, training, rng)

    def encode(self, tokens, training: bool = False, rng=None) -> PlmState:
        h = self.embed(tokens)
        state = PlmState([h])
        for l in range(1, self.num_layers + 1):
            h = self.layer(l, h, training, rng)
            state.layers.append(h)
        return state


def load_precomputed(path) -> PlmState:
    """Frozen single-layer state from a BHEM embedding file."""
    emb = read_embeddings(path).astype(np.float64)
    h = tc.Tensor(emb)
    return PlmState([h, h])


class EmbeddingAdapter(Module):
    """Trainable map from precomputed embeddings to ``d_model`` when widths differ."""

    def __init__(self, d_in: int, d_model: int, rng: np.random.Generator):
        self.proj = Linear(d_in, d_model, rng) if d_in != d_model else None

    def __call__(self, state: PlmState) -> PlmState:
        if self.proj is None:
            return state
        h = self.proj(state.final)
        return PlmState([h, h])
