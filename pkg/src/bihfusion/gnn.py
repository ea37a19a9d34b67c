"""Structure branch: message passing over residue graphs with invariant geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensorcore as tc
from .constants import NUM_AA_TYPES
from .protein.graph import SEQDIST_CLAMP, SEQDIST_VOCAB, ProteinGraph
from .tensorcore.nn import Linear, MLP, Module, uniform_weight

TORSION_FEATURES = 12  # sin/cos of chi1..4 (masked) + the mask itself


class LevelMismatch(ValueError):
    pass


@dataclass
class GnnConfig:
    hidden_dim: int = 32
    num_layers: int = 3
    rbf_count: int = 16
    cutoff: float = 10.0
    level: str = "base"
    gaussian_noise: bool = False
    euler_noise: bool = False
    noise_sigma: float = 0.02
    seqdist_dim: int = 8
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.hidden_dim <= 0:
            raise ValueError("hidden_dim must be positive")
        if self.rbf_count < 4:
            raise ValueError("rbf_count must be at least 4")

    @property
    def angle_count(self) -> int:
        return 3 if self.level == "base" else 6

    @property
    def edge_dim(self) -> int:
        return self.rbf_count + 2 * self.angle_count + self.seqdist_dim


@dataclass
class GnnState:
    layers: list[tc.Tensor] = field(default_factory=list)

    @property
    def final(self) -> tc.Tensor:
        return self.layers[-1]


def rbf_expand(d, count: int, cutoff: float) -> np.ndarray:
    """Gaussian radial basis with centers evenly spaced on [0, cutoff]."""
    d = np.asarray(d, dtype=np.float64).reshape(-1, 1)
    centers = np.linspace(0.0, cutoff, count)
    width = cutoff / count
    return np.exp(-(((d - centers) / width) ** 2))


def fourier(angles) -> np.ndarray:
    """Interleaved (sin, cos) columns for each angle column."""
    a = np.asarray(angles, dtype=np.float64)
    a = a.reshape(a.shape[0], -1)
    out = np.empty((a.shape[0], 2 * a.shape[1]))
    out[:, 0::2] = np.sin(a)
    out[:, 1::2] = np.cos(a)
    return out


def seqdist_index(seqdist) -> np.ndarray:
    return np.clip(np.asarray(seqdist, dtype=np.int64), -SEQDIST_CLAMP, SEQDIST_CLAMP) + SEQDIST_CLAMP


def geometric_edge_features(d, theta, phi, tau, euler, level: str, rbf_count: int, cutoff: float) -> np.ndarray:
    """Fixed (non-learned) part of the edge encoding: RBF(d) and angle Fourier features."""
    angles = [np.asarray(theta), np.asarray(phi), np.asarray(tau)]
    if level != "base":
        if euler is None:
            raise LevelMismatch(f"level {level!r} needs Euler angles but the geometry has none")
        angles.append(np.asarray(euler).reshape(-1, 3))
    ang = np.column_stack([a.reshape(len(np.atleast_1d(d)), -1) for a in angles])
    return np.concatenate([rbf_expand(d, rbf_count, cutoff), fourier(ang)], axis=1)


def encode_edge_geometry(geom: dict, seqdist: int, level: str, seqdist_table: tc.Tensor,
                         rbf_count: int, cutoff: float) -> tc.Tensor:
    """Feature vector for a single edge (see :func:`geometric_edge_features`)."""
    euler = geom.get("euler")
    fixed = geometric_edge_features([geom["d"]], [geom["theta"]], [geom["phi"]], [geom["tau"]],
                                    None if euler is None else [euler], level, rbf_count, cutoff)
    emb = tc.embedding_lookup(seqdist_table, seqdist_index([seqdist]))
    return tc.reshape(tc.concat([tc.Tensor(fixed), emb], axis=1), (-1,))


def torsion_node_features(graph: ProteinGraph) -> np.ndarray:
    mask = graph.chi_mask.astype(np.float64)
    chi = np.nan_to_num(graph.chi)
    return np.concatenate([np.sin(chi) * mask, np.cos(chi) * mask, mask], axis=1)


class InteractionBlock(Module):
    """u_i <- u_i + UPD([u_i, sum_j MSG([u_j, e_ji])])."""

    def __init__(self, hidden: int, edge_dim: int, rng: np.random.Generator):
        self.msg = MLP([hidden + edge_dim, hidden, hidden], rng)
        self.upd = MLP([2 * hidden, hidden, hidden], rng)

    def __call__(self, u: tc.Tensor, edges: np.ndarray, edge_feat: tc.Tensor,
                 dropout_p: float = 0.0, training: bool = False, rng=None) -> tc.Tensor:
        n = u.shape[0]
        src = tc.gather_rows(u, edges[:, 1])
        m = self.msg(tc.concat([src, edge_feat], axis=1))
        # edges arrive in message_order, so each per-node sum runs in a fixed, label-free order
        agg = tc.segment_sum(m, edges[:, 0], n)
        delta = self.upd(tc.concat([u, agg], axis=1))
        return tc.add(u, tc.dropout(delta, dropout_p, training, rng))


def message_order(edges: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Canonical edge order: by receiver, then by distance, then by sender.

    Each node's incoming messages are summed in order of increasing distance,
    which does not depend on how nodes are numbered; so the aggregation is
    bit-identical under both edge-list shuffles and node relabelling.
    """
    return np.lexsort((edges[:, 1], d, edges[:, 0]))


def interaction_block(u_prev, graph, params: InteractionBlock, edge_feat, training=False, rng=None):
    """One block with ``edge_feat`` rows aligned to ``graph.edges`` in storage order."""
    order = message_order(graph.edges, graph.d)
    ef = edge_feat if np.array_equal(order, np.arange(len(order))) else tc.gather_rows(edge_feat, order)
    return params(u_prev, graph.edges[order], ef, training=training, rng=rng)


class GnnBranch(Module):
    def __init__(self, cfg: GnnConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.node_emb = uniform_weight(rng, NUM_AA_TYPES, cfg.hidden_dim)
        self.seqdist_emb = uniform_weight(rng, SEQDIST_VOCAB, cfg.seqdist_dim)
        self.torsion = (Linear(TORSION_FEATURES, cfg.hidden_dim, rng, bias=False)
                        if cfg.level == "all_atom" else None)
        self.blocks = [InteractionBlock(cfg.hidden_dim, cfg.edge_dim, rng) for _ in range(cfg.num_layers)]

    @property
    def num_layers(self) -> int:
        return len(self.blocks)

    def embed_nodes(self, graph: ProteinGraph, u0: tc.Tensor | None = None) -> tc.Tensor:
        """Residue-type embedding (or a supplied override) plus side-chain torsion features."""
        if u0 is None:
            u0 = tc.embedding_lookup(self.node_emb, graph.aa)
        if self.torsion is not None:
            if graph.chi is None:
                raise LevelMismatch("all-atom branch needs side-chain torsions in the graph")
            u0 = tc.add(u0, self.torsion(tc.Tensor(torsion_node_features(graph))))
        return u0

    def prepare_edges(self, graph: ProteinGraph, training: bool = False, rng=None):
        """Canonically ordered edges and their feature tensor."""
        if graph.level != self.cfg.level:
            raise LevelMismatch(f"graph level {graph.level!r} does not match branch level {self.cfg.level!r}")
        edges = graph.edges.reshape(-1, 2)
        order = message_order(edges, graph.d)
        edges = edges[order]
        euler = None if graph.euler is None else graph.euler[order]
        if euler is not None and self.cfg.euler_noise and training:
            euler = euler + rng.normal(0.0, self.cfg.noise_sigma, size=euler.shape)
        fixed = geometric_edge_features(graph.d[order], graph.theta[order], graph.phi[order],
                                        graph.tau[order], euler, self.cfg.level,
                                        self.cfg.rbf_count, self.cfg.cutoff)
        emb = tc.embedding_lookup(self.seqdist_emb, seqdist_index(graph.edge_seqdist[order]))
        return edges, tc.concat([tc.Tensor(fixed), emb], axis=1)

    def layer(self, l: int, u: tc.Tensor, edges, edge_feat, training: bool = False, rng=None) -> tc.Tensor:
        """Interaction block ``l`` (1-based), with optional node noise during training."""
        if self.cfg.gaussian_noise and training:
            u = tc.add(u, rng.normal(0.0, self.cfg.noise_sigma, size=u.shape))
        return self.blocks[l - 1](u, edges, edge_feat, self.cfg.dropout_p, training, rng)

    def encode_structure(self, graph: ProteinGraph, training: bool = False, rng=None,
                         u0: tc.Tensor | None = None) -> GnnState:
        edges, ef = self.prepare_edges(graph, training, rng)
        u = self.embed_nodes(graph, u0)
        state = GnnState([u])
        for l in range(1, self.num_layers + 1):
            u = self.layer(l, u, edges, ef, training, rng)
            state.layers.append(u)
        return state
