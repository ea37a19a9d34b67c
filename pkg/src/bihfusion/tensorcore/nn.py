"""Parameter containers and the layers shared by both branches."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import ops
from .ops import MASK_VALUE
from .tensor import Tensor


def uniform_weight(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)


def zeros_param(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class Module:
    """Base class that discovers parameters from instance attributes.

    Parameters are ``Tensor`` attributes with ``requires_grad``; children are
    ``Module`` attributes or lists of modules. Names are dotted paths in
    attribute-definition order, which makes checkpoints stable.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        params = dict(self.named_parameters())
        if strict:
            missing = set(params) - set(state)
            extra = set(state) - set(params)
            if missing or extra:
                raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for k, p in params.items():
            if k not in state:
                continue
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {p.shape}")
            p.data = arr.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


class Linear(Module):
    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator,
                 bias: bool = True, zero: bool = False):
        self.weight = zeros_param(fan_in, fan_out) if zero else uniform_weight(rng, fan_in, fan_out)
        self.bias = zeros_param(fan_out) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = ops.matmul(x, self.weight)
        return y if self.bias is None else ops.add(y, self.bias)


class MLP(Module):
    """Linear layers with ReLU between them (none after the last)."""

    def __init__(self, dims: list[int], rng: np.random.Generator, zero_last: bool = False):
        self.layers = [
            Linear(dims[i], dims[i + 1], rng, zero=zero_last and i == len(dims) - 2)
            for i in range(len(dims) - 1)
        ]

    def __call__(self, x: Tensor, dropout_p: float = 0.0, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ops.relu(x)
                x = ops.dropout(x, dropout_p, training, rng)
        return x


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = zeros_param(dim)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


class MultiheadAttention(Module):
    """Query/key/value/output projections for self-attention."""

    def __init__(self, dim: int, num_heads: int, rng: np.random.Generator, zero_output: bool = False):
        if dim % num_heads:
            raise ValueError(f"dim {dim} is not divisible by num_heads {num_heads}")
        self.num_heads = num_heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng, zero=zero_output)

    def __call__(self, x: Tensor, mask=None, return_weights: bool = False):
        return multihead_self_attention(x, self, self.num_heads, mask, return_weights)


def canonical_row_order(a: np.ndarray) -> np.ndarray:
    """Lexicographic order of the rows of ``a`` (first column most significant)."""
    if a.shape[0] <= 1:
        return np.arange(a.shape[0])
    return np.lexsort(a.T[::-1])


def multihead_self_attention(x: Tensor, params: MultiheadAttention, num_heads: int,
                             mask=None, return_weights: bool = False):
    """Scaled dot-product self-attention over the rows of ``x``.

    ``mask`` is a length-n boolean vector of valid positions. Invalid keys get
    zero weight and invalid query rows are zeroed in the output.

    Keys and values are reduced in the lexicographic order of the input rows
    rather than their storage order, so relabelling the rows permutes the
    output bit for bit.
    """
    n, d = x.shape
    if d % num_heads:
        raise ValueError(f"d={d} is not divisible by num_heads={num_heads}")
    dh = d // num_heads
    scale = 1.0 / math.sqrt(dh)
    keep = None
    bias = None
    order = canonical_row_order(x.data)
    if mask is not None:
        keep = np.asarray(mask, dtype=bool)
        if keep.shape != (n,):
            raise ValueError(f"mask must have shape ({n},), got {keep.shape}")
        bias = np.where(keep, 0.0, MASK_VALUE)[None, order]

    q = params.q(x)
    k = ops.gather_rows(params.k(x), order)
    v = ops.gather_rows(params.v(x), order)
    if num_heads == 1:
        qs, ks, vs = [q], [k], [v]
    else:
        sizes = [dh] * num_heads
        qs, ks, vs = ops.split(q, sizes, 1), ops.split(k, sizes, 1), ops.split(v, sizes, 1)
    heads = []
    weights = []
    for qh, kh, vh in zip(qs, ks, vs):
        scores = ops.mul(ops.matmul(qh, ops.transpose(kh)), scale)
        if bias is not None:
            scores = ops.add(scores, bias)
        w = ops.softmax(scores, axis=1)
        weights.append(w)
        heads.append(ops.matmul(w, vh))
    o = heads[0] if num_heads == 1 else ops.concat(heads, axis=1)
    out = params.out(o)
    if keep is not None and not keep.all():
        out = ops.mul(out, keep.astype(np.float64)[:, None])
    if return_weights:
        # report weights with keys in storage order
        inv = np.argsort(order)
        return out, [ops.transpose(ops.gather_rows(ops.transpose(w), inv)) for w in weights]
    return out
