"""Exchange operators between the structure and sequence branches.

Both bidirectional operators work on a projected pair ``(x1, x2)`` of
``[n, C]`` tensors (structure, sequence) whose rows are aligned residue by
residue. Results are written back into each branch residually through
zero-initialized output projections, so a fresh fused model computes exactly
what its unfused branches would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensorcore as tc
from .tensorcore.nn import Linear, MLP, Module, MultiheadAttention, multihead_self_attention, zeros_param

MODES = ("none", "serial", "local_gated", "global_attention")


class ScheduleError(ValueError):
    pass


@dataclass
class FusionConfig:
    mode: str = "local_gated"
    shared_dim: int = 32
    num_heads: int = 4
    schedule: list[tuple[int, int]] | None = None  # None -> default_schedule
    freeze_plm: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown fusion mode {self.mode!r}; expected one of {MODES}")
        if self.shared_dim % self.num_heads:
            raise ValueError("shared_dim must be divisible by num_heads")


def default_schedule(gnn_layers: int, plm_layers: int) -> list[tuple[int, int]]:
    """Fuse after every GNN block, pairing GNN layer l with pLM layer ceil(l * L_s / L_g)."""
    return [(l, math.ceil(l * plm_layers / gnn_layers)) for l in range(1, gnn_layers + 1)]


def validate_schedule(schedule, gnn_layers: int, plm_layers: int) -> list[tuple[int, int]]:
    sched = [(int(g), int(p)) for g, p in schedule]
    prev_g, prev_p = -1, 0
    for g, p in sched:
        if not 0 <= g <= gnn_layers:
            raise ScheduleError(f"GNN layer {g} outside 0..{gnn_layers}")
        if not 0 <= p <= plm_layers:
            raise ScheduleError(f"pLM layer {p} outside 0..{plm_layers}")
        if g <= prev_g:
            raise ScheduleError("GNN layers in the schedule must be strictly increasing")
        if p < prev_p:
            raise ScheduleError("pLM layers in the schedule must be non-decreasing")
        prev_g, prev_p = g, p
    return sched


def parse_schedule(text: str) -> list[tuple[int, int]] | None:
    """``"auto"`` -> None, ``""`` -> [], ``"1:1,3:2"`` -> [(1, 1), (3, 2)]."""
    text = text.strip()
    if text == "auto":
        return None
    if not text:
        return []
    out = []
    for item in text.split(","):
        g, _, p = item.partition(":")
        out.append((int(g), int(p)))
    return out


def format_schedule(schedule) -> str:
    if schedule is None:
        return "auto"
    return ",".join(f"{g}:{p}" for g, p in schedule)


# --- operators ---------------------------------------------------------------

def gate_weights(x1: tc.Tensor, x2: tc.Tensor, vote: MLP) -> tc.Tensor:
    """Per-node softmax over the summed two-way votes, shape [n, 2]."""
    return tc.softmax(tc.add(vote(x1), vote(x2)), axis=1)


def local_gated_fuse(x1: tc.Tensor, x2: tc.Tensor, vote: MLP) -> tc.Tensor:
    """Convex per-node blend g1 * x1 + g2 * x2, shared by both branches."""
    if x1.shape != x2.shape:
        raise ValueError(f"branch pair is not aligned: {x1.shape} vs {x2.shape}")
    g = gate_weights(x1, x2, vote)
    g1, g2 = tc.split(g, [1, 1], axis=1)
    return tc.add(tc.mul(g1, x1), tc.mul(g2, x2))


def global_attention_fuse(x1: tc.Tensor, x2: tc.Tensor, mha: MultiheadAttention, num_heads: int,
                          tags: tc.Tensor | None = None):
    """Self-attention over the 2n concatenated nodes and tokens, plus a residual per branch."""
    if x1.shape != x2.shape:
        raise ValueError(f"branch pair is not aligned: {x1.shape} vs {x2.shape}")
    n = x1.shape[0]
    a1, a2 = x1, x2
    if tags is not None:
        t1, t2 = tc.split(tags, [1, 1], axis=0)
        a1, a2 = tc.add(x1, t1), tc.add(x2, t2)
    x = tc.concat([a1, a2], axis=0)
    xhat = multihead_self_attention(x, mha, num_heads)
    h1, h2 = tc.split(xhat, [n, n], axis=0)
    return tc.add(h1, x1), tc.add(h2, x2)


# --- parameterized fusion points ---------------------------------------------

class _FusionPoint(Module):
    def __init__(self, gnn_dim: int, plm_dim: int, shared: int, rng: np.random.Generator):
        self.in_gnn = Linear(gnn_dim, shared, rng) if gnn_dim != shared else None
        self.in_plm = Linear(plm_dim, shared, rng) if plm_dim != shared else None
        self.out_gnn = Linear(shared, gnn_dim, rng, zero=True)
        self.out_plm = Linear(shared, plm_dim, rng, zero=True)

    def pair(self, u: tc.Tensor, h: tc.Tensor):
        x1 = u if self.in_gnn is None else self.in_gnn(u)
        x2 = h if self.in_plm is None else self.in_plm(h)
        return x1, x2

    def write_back(self, u, h, y1, y2):
        return tc.add(u, self.out_gnn(y1)), tc.add(h, self.out_plm(y2))


class LocalGatedFusion(_FusionPoint):
    def __init__(self, gnn_dim: int, plm_dim: int, shared: int, rng: np.random.Generator):
        super().__init__(gnn_dim, plm_dim, shared, rng)
        self.vote = MLP([shared, shared, 2], rng)

    def __call__(self, u: tc.Tensor, h: tc.Tensor):
        x1, x2 = self.pair(u, h)
        fused = local_gated_fuse(x1, x2, self.vote)
        return self.write_back(u, h, fused, fused)


class GlobalAttentionFusion(_FusionPoint):
    def __init__(self, gnn_dim: int, plm_dim: int, shared: int, num_heads: int, rng: np.random.Generator):
        super().__init__(gnn_dim, plm_dim, shared, rng)
        self.num_heads = num_heads
        self.tags = zeros_param(2, shared)
        self.mha = MultiheadAttention(shared, num_heads, rng)

    def __call__(self, u: tc.Tensor, h: tc.Tensor):
        x1, x2 = self.pair(u, h)
        y1, y2 = global_attention_fuse(x1, x2, self.mha, self.num_heads, self.tags)
        return self.write_back(u, h, y1, y2)


class SerialFusion(Module):
    """Projects final sequence representations to initial GNN node features."""

    def __init__(self, plm_dim: int, gnn_dim: int, rng: np.random.Generator):
        self.proj = Linear(plm_dim, gnn_dim, rng)

    def __call__(self, h_final: tc.Tensor) -> tc.Tensor:
        return self.proj(h_final)


def serial_fuse(plm_state, graph, fusion: SerialFusion) -> tc.Tensor:
    h = plm_state.final
    if h.shape[0] != graph.n:
        raise ValueError(f"pLM has {h.shape[0]} tokens but the graph has {graph.n} nodes")
    return fusion(h)


@dataclass
class FusionTrace:
    """Every intermediate state of a fused forward pass."""

    gnn_layers: list[tc.Tensor] = field(default_factory=list)
    plm_layers: list[tc.Tensor] = field(default_factory=list)
    exchanges: list[tuple[int, int]] = field(default_factory=list)
    gnn_final: tc.Tensor | None = None
    plm_final: tc.Tensor | None = None
