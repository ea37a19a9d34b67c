"""Two-branch model: structure GNN, sequence transformer, fusion points and a task head."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import tensorcore as tc
from .fusion import (
    FusionConfig,
    FusionTrace,
    GlobalAttentionFusion,
    LocalGatedFusion,
    SerialFusion,
    default_schedule,
    serial_fuse,
    validate_schedule,
)
from .gnn import GnnBranch, GnnConfig
from .heads import LigandEncoder, TaskHead, head_kind, predict
from .plm import EmbeddingAdapter, PlmConfig, PlmState, ProteinLM
from .protein.graph import ProteinGraph
from .tensorcore.nn import Module
from .tensorcore.rng import make_rng


@dataclass
class ModelConfig:
    task: str = "lba"
    num_classes: int = 8
    gnn: GnnConfig = field(default_factory=GnnConfig)
    plm: PlmConfig = field(default_factory=PlmConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    ligand_elements: int = 10
    ligand_dim: int = 16
    precomputed_dim: int | None = None  # width of BHEM embeddings replacing the transformer

    @property
    def mode(self) -> str:
        return self.fusion.mode


class FusionModel(Module):
    """Parameters for every component a given fusion mode needs.

    Each component draws its initial weights from its own named random
    stream, so e.g. the GNN of a fused model starts identical to the GNN of
    an unfused model built with the same seed.
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        mode = cfg.mode
        g, p = cfg.gnn, cfg.plm
        self.gnn = GnnBranch(g, make_rng(seed, "gnn"))
        self.plm = None
        self.adapter = None
        if mode != "none":
            if cfg.precomputed_dim is not None:
                self.adapter = EmbeddingAdapter(cfg.precomputed_dim, p.d_model, make_rng(seed, "adapter"))
            else:
                self.plm = ProteinLM(p, make_rng(seed, "plm"))
        self.serial = SerialFusion(p.d_model, g.hidden_dim, make_rng(seed, "serial")) if mode == "serial" else None
        self.schedule: list[tuple[int, int]] = []
        self.fusers = []
        if mode in ("local_gated", "global_attention"):
            sched = cfg.fusion.schedule
            if sched is None:
                sched = default_schedule(g.num_layers, self.plm_layers)
            self.schedule = validate_schedule(sched, g.num_layers, self.plm_layers)
            for k in range(len(self.schedule)):
                rng = make_rng(seed, "fusion", k)
                if mode == "local_gated":
                    self.fusers.append(LocalGatedFusion(g.hidden_dim, p.d_model, cfg.fusion.shared_dim, rng))
                else:
                    self.fusers.append(GlobalAttentionFusion(g.hidden_dim, p.d_model, cfg.fusion.shared_dim,
                                                             cfg.fusion.num_heads, rng))
        self.ligand = (LigandEncoder(cfg.ligand_elements, cfg.ligand_dim, make_rng(seed, "ligand"))
                       if cfg.task == "lba" else None)
        in_dim = g.hidden_dim + (p.d_model if mode in ("local_gated", "global_attention") else 0)
        if cfg.task == "lba":
            in_dim += cfg.ligand_dim
        self.head = TaskHead(head_kind(cfg.task), in_dim, make_rng(seed, "head"), cfg.num_classes)

    @property
    def mode(self) -> str:
        return self.cfg.mode

    @property
    def plm_layers(self) -> int:
        if self.cfg.precomputed_dim is not None:
            return 1
        return self.cfg.plm.num_layers

    def plm_parameter_names(self) -> set[str]:
        return {k for k, _ in self.named_parameters() if k.startswith(("plm.", "adapter."))}

    def trainable_parameters(self) -> list[tuple[str, tc.Tensor]]:
        frozen = self.plm_parameter_names() if self.cfg.fusion.freeze_plm else set()
        return [(k, v) for k, v in self.named_parameters() if k not in frozen]

    # -- forward -----------------------------------------------------------

    def _plm_start(self, tokens, precomputed: PlmState | None) -> tc.Tensor:
        if self.adapter is not None:
            if precomputed is None:
                raise ValueError("model was built for precomputed embeddings but none were given")
            return self.adapter(precomputed).final
        return self.plm.embed(tokens)

    def _plm_layer(self, l: int, h, training, rng):
        if self.plm is None:
            return h  # precomputed: the single pseudo-layer is the embedding itself
        return self.plm.layer(l, h, training, rng)

    def trace(self, graph: ProteinGraph, tokens, training: bool = False, rng=None,
              precomputed: PlmState | None = None):
        """Run both branches; returns ``(z, per_node, FusionTrace)``."""
        if training and rng is None:
            rng = make_rng(0, "forward")
        mode = self.mode
        n = graph.n
        if mode != "none" and self.adapter is None and len(tokens) != n:
            raise ValueError(f"{len(tokens)} tokens for a graph of {n} nodes")
        tr = FusionTrace()
        edges, ef = self.gnn.prepare_edges(graph, training, rng)
        L_g = self.gnn.num_layers

        if mode in ("none", "serial"):
            u0 = None
            if mode == "serial":
                h = self._plm_start(tokens, precomputed)
                tr.plm_layers.append(h)
                for l in range(1, self.plm_layers + 1):
                    h = self._plm_layer(l, h, training, rng)
                    tr.plm_layers.append(h)
                u0 = serial_fuse(PlmState(tr.plm_layers), graph, self.serial)
            u = self.gnn.embed_nodes(graph, u0)
            tr.gnn_layers.append(u)
            for l in range(1, L_g + 1):
                u = self.gnn.layer(l, u, edges, ef, training, rng)
                tr.gnn_layers.append(u)
            tr.gnn_final = u
            return tc.mean_pool(u, axis=0), u, tr

        u = self.gnn.embed_nodes(graph)
        h = self._plm_start(tokens, precomputed)
        if h.shape[0] != n:
            raise ValueError(f"sequence branch has {h.shape[0]} rows for a graph of {n} nodes")
        tr.gnn_layers.append(u)
        tr.plm_layers.append(h)
        g_done = p_done = 0
        for k, (g, p) in enumerate(self.schedule):
            while g_done < g:
                g_done += 1
                u = self.gnn.layer(g_done, u, edges, ef, training, rng)
                tr.gnn_layers.append(u)
            while p_done < p:
                p_done += 1
                h = self._plm_layer(p_done, h, training, rng)
                tr.plm_layers.append(h)
            u, h = self.fusers[k](u, h)
            tr.exchanges.append((g, p))
        while g_done < L_g:
            g_done += 1
            u = self.gnn.layer(g_done, u, edges, ef, training, rng)
            tr.gnn_layers.append(u)
        while p_done < self.plm_layers:
            p_done += 1
            h = self._plm_layer(p_done, h, training, rng)
            tr.plm_layers.append(h)
        tr.gnn_final, tr.plm_final = u, h
        z = tc.concat([tc.mean_pool(u, axis=0), tc.mean_pool(h, axis=0)], axis=0)
        return z, tc.concat([u, h], axis=1), tr

    def forward(self, graph: ProteinGraph, tokens, ligand=None, training: bool = False, rng=None,
                precomputed: PlmState | None = None) -> tc.Tensor:
        z, per_node, _ = self.trace(graph, tokens, training, rng, precomputed)
        lig = self.ligand(ligand) if self.ligand is not None else None
        return predict(self.cfg.task, self.head, z, per_node, lig)

    __call__ = forward


def run_fused_model(graph: ProteinGraph, tokens, model: FusionModel, training: bool = False, rng=None,
                    precomputed: PlmState | None = None):
    """Graph-level and per-node representations ``(z, per_node)``."""
    z, per_node, _ = model.trace(graph, tokens, training, rng, precomputed)
    return z, per_node
