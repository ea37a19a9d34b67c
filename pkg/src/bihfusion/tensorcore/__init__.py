from .tensor import NumericError, Tensor, as_tensor, backward, grad_enabled, no_grad, zero_grads
from .ops import (
    add,
    binary_cross_entropy_loss,
    concat,
    cross_entropy_loss,
    dropout,
    embedding_lookup,
    exp,
    gather_rows,
    layer_norm,
    matmul,
    mean_pool,
    mse_loss,
    mul,
    relu,
    reshape,
    segment_sum,
    softmax,
    split,
    sub,
    total,
    transpose,
)
from .nn import MLP, LayerNorm, Linear, Module, MultiheadAttention, multihead_self_attention
from .rng import make_rng
from . import serialize
from .serialize import FormatError, dumps, load, loads, save

__all__ = [
    "NumericError", "Tensor", "as_tensor", "backward", "grad_enabled", "no_grad", "zero_grads",
    "add", "binary_cross_entropy_loss", "concat", "cross_entropy_loss", "dropout",
    "embedding_lookup", "exp", "gather_rows", "layer_norm", "matmul", "mean_pool", "mse_loss",
    "mul", "relu", "reshape", "segment_sum", "softmax", "split", "sub", "total", "transpose",
    "MLP", "LayerNorm", "Linear", "Module", "MultiheadAttention", "multihead_self_attention",
    "make_rng", "serialize", "FormatError", "dumps", "loads", "save", "load",
]
