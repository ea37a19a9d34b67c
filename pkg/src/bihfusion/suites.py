"""Self-checks run from the command line: finite-difference gradients and
rigid-motion / permutation invariance of features and GNN layers."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensorcore as tc
from .fusion import FusionConfig
from .geometry import SE3Transform
from .gnn import GnnBranch, GnnConfig
from .heads import loss_for
from .model import FusionModel, ModelConfig
from .plm import PlmConfig
from .protein.graph import build_graph
from .protein.structure import ProteinStructure, Residue
from .synth import generate_synthetic
from .tensorcore.rng import make_rng

GRADCHECK_TOL = 1e-4
FLOOR_FRACTION = 1e-3
INVARIANCE_TOL = 1e-8


# --- finite differences ------------------------------------------------------

def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def finite_difference_grads(loss_fn, params: list[tuple[str, tc.Tensor]], h: float = 1e-6) -> dict[str, np.ndarray]:
    """Central differences of ``loss_fn()`` for every entry of every parameter."""
    out = {}
    with tc.no_grad():
        for name, p in params:
            g = np.zeros_like(p.data)
            flat, gflat = p.data.reshape(-1), g.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                up = loss_fn().item()
                flat[k] = orig - h
                down = loss_fn().item()
                flat[k] = orig
                gflat[k] = (up - down) / (2 * h)
            out[name] = g
    return out


def check_gradients(loss_fn, params: list[tuple[str, tc.Tensor]], h: float = 1e-6) -> dict[str, float]:
    """Relative error between autodiff and central differences, per parameter tensor.

    The denominator is floored at ``FLOOR_FRACTION`` of the whole-model gradient
    norm: some groups (attention key biases) have an exactly zero gradient, and
    the ratio of two rounding residues carries no information.
    """
    params = list(params)
    for _, p in params:
        p.zero_grad()
    tc.backward(loss_fn())
    analytic = {name: p.grad.copy() for name, p in params}
    numeric = finite_difference_grads(loss_fn, params, h)
    floor = FLOOR_FRACTION * float(np.sqrt(sum(np.sum(g * g) for g in analytic.values())))
    return {name: relative_error(analytic[name], numeric[name], floor) for name, _ in params}


def tiny_model_config(task: str, mode: str, level: str) -> ModelConfig:
    return ModelConfig(
        task=task, num_classes=3,
        gnn=GnnConfig(hidden_dim=8, num_layers=2, rbf_count=4, cutoff=10.0, level=level, seqdist_dim=4),
        plm=PlmConfig(d_model=8, num_layers=2, num_heads=2, ffn_dim=16, max_len=16),
        fusion=FusionConfig(mode=mode, shared_dim=8, num_heads=2),
        ligand_elements=5, ligand_dim=4,
    )


GRADCHECK_CASES = [
    ("none", "lba", "all_atom"),
    ("serial", "lba", "all_atom"),
    ("local_gated", "lba", "all_atom"),
    ("global_attention", "lba", "all_atom"),
    ("local_gated", "reaction", "backbone"),
    ("global_attention", "ppbs", "base"),
]


@dataclass
class GradcheckResult:
    mode: str
    task: str
    level: str
    errors: dict[str, float]

    @property
    def max_error(self) -> float:
        return max(self.errors.values())


def gradcheck_case(mode: str, task: str, level: str, seed: int = 0) -> GradcheckResult:
    cfg = tiny_model_config(task, mode, level)
    model = FusionModel(cfg, seed)
    rng = make_rng(seed, "gradcheck", mode, task)
    # move every parameter off its (often zero) initial value so gradients are generic
    for _, p in model.named_parameters():
        p.data += rng.normal(0.0, 0.3, size=p.shape)
    ds = generate_synthetic(task, 1, (6, 6), seed, num_classes=3, ligand_elements=5)
    rec = ds[0]
    graph = build_graph(rec.structure, cfg.gnn.cutoff, level)
    tokens = rec.structure.tokens
    label = rec.residue_labels if rec.residue_labels is not None else rec.label
    lig = rec.ligand if task == "lba" else None

    def loss_fn():
        return loss_for(task, model(graph, tokens, lig), label)

    return GradcheckResult(mode, task, level, check_gradients(loss_fn, model.named_parameters()))


def gradcheck_suite(seed: int = 0, cases=GRADCHECK_CASES) -> list[GradcheckResult]:
    return [gradcheck_case(m, t, l, seed) for m, t, l in cases]


# --- invariance --------------------------------------------------------------

@dataclass
class InvarianceReport:
    n_proteins: int = 0
    n_transforms: int = 0
    max_feature_dev: float = 0.0
    max_layer_dev: float = 0.0
    edge_sets_equal: bool = True
    mirror_ok: bool = True
    max_permutation_dev: float = 0.0
    seconds: float = 0.0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.edge_sets_equal and self.mirror_ok and self.max_feature_dev < INVARIANCE_TOL
                and self.max_layer_dev < INVARIANCE_TOL and self.max_permutation_dev < INVARIANCE_TOL)

    def to_text(self) -> str:
        rows = [("n_proteins", self.n_proteins), ("n_transforms", self.n_transforms),
                ("max_feature_dev", self.max_feature_dev), ("max_layer_dev", self.max_layer_dev),
                ("edge_sets_equal", self.edge_sets_equal), ("mirror_ok", self.mirror_ok),
                ("max_permutation_dev", self.max_permutation_dev), ("seconds", round(self.seconds, 3)),
                ("passed", self.passed)]
        return "".join(f"{k}={v}\n" for k, v in rows)


def _angle_dev(a, b) -> float:
    if a.size == 0:
        return 0.0
    d = np.remainder(np.asarray(a) - np.asarray(b) + np.pi, 2.0 * np.pi) - np.pi
    return float(np.max(np.abs(d)))


def feature_deviation(g0, g1) -> float:
    """Largest difference over distances and (wrapped) angles of two graphs with equal edges."""
    dev = float(np.max(np.abs(g0.d - g1.d))) if g0.num_edges else 0.0
    for name in ("theta", "phi", "tau"):
        dev = max(dev, _angle_dev(getattr(g0, name), getattr(g1, name)))
    if g0.euler is not None:
        dev = max(dev, _angle_dev(g0.euler, g1.euler))
    if g0.chi is not None:
        if not np.array_equal(g0.chi_mask, g1.chi_mask):
            return float("inf")
        dev = max(dev, _angle_dev(g0.chi[g0.chi_mask], g1.chi[g1.chi_mask]))
    return dev


def mirrored(s: ProteinStructure) -> ProteinStructure:
    flip = np.array([-1.0, 1.0, 1.0])
    res = [Residue(r.aa_type, r.seq_index, {k: v * flip for k, v in r.atoms.items()}) for r in s.residues]
    return ProteinStructure(s.id, res, s.dropped_residues)


def mirror_flips_signs(s: ProteinStructure, cutoff: float, tol: float = 1e-9) -> bool:
    g0 = build_graph(s, cutoff, "all_atom")
    g1 = build_graph(mirrored(s), cutoff, "all_atom")
    if not np.array_equal(g0.edges, g1.edges):
        return False
    ok = _angle_dev(g0.tau, -g1.tau) < tol
    m = g0.chi_mask
    return ok and np.array_equal(m, g1.chi_mask) and _angle_dev(g0.chi[m], -g1.chi[m]) < tol


def invariance_suite(n_proteins: int = 100, n_transforms: int = 10, seed: int = 0,
                     len_range=(8, 24), cutoff: float = 10.0) -> InvarianceReport:
    t0 = time.perf_counter()
    rep = InvarianceReport(n_proteins, n_transforms)
    ds = generate_synthetic("mqa", n_proteins, len_range, seed)
    gnn = GnnBranch(GnnConfig(hidden_dim=16, num_layers=3, rbf_count=8, cutoff=cutoff, level="all_atom"),
                    make_rng(seed, "invariance", "gnn"))
    rng = make_rng(seed, "invariance", "transforms")
    with tc.no_grad():
        for rec in ds:
            s = rec.structure
            g0 = build_graph(s, cutoff, "all_atom")
            ref = [u.data for u in gnn.encode_structure(g0).layers]
            for _ in range(n_transforms):
                g1 = build_graph(s.transformed(SE3Transform.random(rng)), cutoff, "all_atom")
                if not np.array_equal(g0.edges, g1.edges):
                    rep.edge_sets_equal = False
                    rep.failures.append(f"{s.id}: edge set changed under a rigid motion")
                    continue
                rep.max_feature_dev = max(rep.max_feature_dev, feature_deviation(g0, g1))
                out = gnn.encode_structure(g1).layers
                for a, b in zip(ref, out):
                    rep.max_layer_dev = max(rep.max_layer_dev, float(np.max(np.abs(a - b.data))))
            if not mirror_flips_signs(s, cutoff):
                rep.mirror_ok = False
                rep.failures.append(f"{s.id}: mirror image did not negate signed angles")
            perm = rng.permutation(g0.n)
            out = gnn.encode_structure(g0.permuted(perm)).layers[-1].data
            rep.max_permutation_dev = max(rep.max_permutation_dev, float(np.max(np.abs(out - ref[-1][perm]))))
    rep.seconds = time.perf_counter() - t0
    return rep


__all__ = ["check_gradients", "finite_difference_grads", "relative_error", "gradcheck_case",
           "gradcheck_suite", "GradcheckResult", "GRADCHECK_CASES", "GRADCHECK_TOL",
           "invariance_suite", "InvarianceReport", "INVARIANCE_TOL", "mirrored", "mirror_flips_signs",
           "feature_deviation"]
