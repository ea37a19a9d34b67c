"""Task heads, losses and the small ligand encoder used for binding affinity."""

from __future__ import annotations

import numpy as np

from . import tensorcore as tc
from .protein.dataset import CLASSIFICATION_TASKS, PER_RESIDUE_TASKS, REGRESSION_TASKS, TASKS
from .protein.structure import LigandGraph
from .tensorcore.nn import Linear, MLP, Module, uniform_weight

LIGAND_ROUNDS = 3


class EmptyLigand(ValueError):
    pass


def head_kind(task: str) -> str:
    if task in REGRESSION_TASKS:
        return "regression"
    if task in CLASSIFICATION_TASKS:
        return "classification"
    if task in PER_RESIDUE_TASKS:
        return "per_residue_binary"
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


class LigandEncoder(Module):
    """Embedded atom types, three rounds of bond message passing, mean pool.

    Each round is h <- h + relu(sum_{bonded j} W h_j); an atom without bonds
    passes through unchanged.
    """

    def __init__(self, num_elements: int, dim: int, rng: np.random.Generator):
        self.num_elements = num_elements
        self.atom_emb = uniform_weight(rng, num_elements, dim)
        self.rounds = [Linear(dim, dim, rng, bias=False) for _ in range(LIGAND_ROUNDS)]

    def __call__(self, lig: LigandGraph) -> tc.Tensor:
        if len(lig) == 0:
            raise EmptyLigand("ligand has no atoms")
        if lig.atom_types.max() >= self.num_elements:
            raise ValueError("ligand element index outside the encoder vocabulary")
        h = tc.embedding_lookup(self.atom_emb, lig.atom_types)
        n = len(lig)
        if lig.bonds.size:
            both = np.concatenate([lig.bonds, lig.bonds[:, ::-1]], axis=0)
            both = both[np.lexsort((both[:, 1], both[:, 0]))]
        else:
            both = np.zeros((0, 2), dtype=np.int64)
        for layer in self.rounds:
            msg = layer(tc.gather_rows(h, both[:, 1]))
            h = tc.add(h, tc.relu(tc.segment_sum(msg, both[:, 0], n)))
        return tc.mean_pool(h, axis=0)


def encode_ligand(lig: LigandGraph, params: LigandEncoder) -> tc.Tensor:
    return params(lig)


class TaskHead(Module):
    """MLP with two hidden layers as wide as its input."""

    def __init__(self, kind: str, in_dim: int, rng: np.random.Generator,
                 num_classes: int = 1, zero: bool = False):
        self.kind = kind
        out = num_classes if kind == "classification" else 1
        self.mlp = MLP([in_dim, in_dim, in_dim, out], rng)
        if zero:
            for layer in self.mlp.layers:
                layer.weight.data[...] = 0.0

    def __call__(self, x: tc.Tensor) -> tc.Tensor:
        if self.kind == "per_residue_binary":
            y = self.mlp(x)
            return tc.reshape(y, (x.shape[0],))
        y = self.mlp(tc.reshape(x, (1, -1)))
        if self.kind == "regression":
            return tc.reshape(y, ())
        return tc.reshape(y, (y.shape[1],))


def predict(task: str, head: TaskHead, protein_repr: tc.Tensor, per_node_repr: tc.Tensor,
            ligand_repr: tc.Tensor | None = None) -> tc.Tensor:
    """Scalar for mqa/lba, class logits for reaction, one logit per residue for ppbs/bce."""
    if task == "lba":
        if ligand_repr is None:
            raise ValueError("lba prediction needs a ligand representation")
        return head(tc.concat([protein_repr, ligand_repr], axis=0))
    if ligand_repr is not None:
        raise ValueError(f"task {task} takes no ligand")
    if task in PER_RESIDUE_TASKS:
        return head(per_node_repr)
    return head(protein_repr)


def loss_for(task: str, prediction: tc.Tensor, label) -> tc.Tensor:
    kind = head_kind(task)
    if kind == "regression":
        return tc.mse_loss(prediction, np.asarray(label, dtype=np.float64).reshape(prediction.shape))
    if kind == "classification":
        if prediction.ndim != 1:
            raise ValueError("classification prediction must be a logit vector")
        return tc.cross_entropy_loss(prediction, int(label))
    lab = np.asarray(label, dtype=np.float64)
    if lab.shape != prediction.shape:
        raise ValueError(f"per-residue labels {lab.shape} do not match prediction {prediction.shape}")
    return tc.binary_cross_entropy_loss(prediction, lab)
