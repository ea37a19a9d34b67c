"""Cutoff-radius residue graphs with geometric edge and node features."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import geometry as geo
from ..constants import NUM_AA_TYPES
from .structure import ProteinStructure

LEVELS = ("base", "backbone", "all_atom")
SEQDIST_CLAMP = 32
SEQDIST_VOCAB = 2 * SEQDIST_CLAMP + 1


class EmptyStructure(ValueError):
    pass


class MissingBackboneAtoms(ValueError):
    def __init__(self, residue_index: int, missing: list[str]):
        super().__init__(f"residue {residue_index} lacks backbone atom(s) {', '.join(missing)}")
        self.residue_index = residue_index


@dataclass
class ProteinGraph:
    """Residue graph. Edge ``(i, j)`` carries node ``j``'s geometry seen from node ``i``'s frame."""

    n: int
    aa: np.ndarray               # (n,) residue type indices
    node_features: np.ndarray    # (n, 21) one-hot
    edges: np.ndarray            # (E, 2), sorted by (i, j)
    edge_seqdist: np.ndarray     # (E,) clamp(j - i)
    positions: list[dict[str, np.ndarray]]
    level: str
    d: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    euler: np.ndarray | None = None       # (E, 3) at backbone / all_atom
    chi: np.ndarray | None = None         # (n, 4), NaN where masked
    chi_mask: np.ndarray | None = None    # (n, 4) bool
    cutoff: float = 0.0

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def permuted(self, perm) -> "ProteinGraph":
        """Relabel nodes so that new node ``k`` is old node ``perm[k]``.

        Edge features travel with their edges; the edge list is re-sorted.
        """
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        new_edges = inv[self.edges] if self.num_edges else self.edges
        order = np.lexsort((new_edges[:, 1], new_edges[:, 0])) if self.num_edges else np.arange(0)
        pick = lambda a: None if a is None else a[order]  # noqa: E731
        node = lambda a: None if a is None else a[perm]  # noqa: E731
        return replace(
            self,
            aa=self.aa[perm], node_features=self.node_features[perm],
            edges=new_edges[order], edge_seqdist=self.edge_seqdist[order],
            positions=[self.positions[k] for k in perm],
            d=self.d[order], theta=self.theta[order], phi=self.phi[order], tau=self.tau[order],
            euler=pick(self.euler), chi=node(self.chi), chi_mask=node(self.chi_mask),
        )

    def edge_geometry(self, k: int) -> dict:
        g = {"d": float(self.d[k]), "theta": float(self.theta[k]),
             "phi": float(self.phi[k]), "tau": float(self.tau[k])}
        if self.euler is not None:
            g["euler"] = tuple(float(x) for x in self.euler[k])
        return g


def cutoff_edges(ca: np.ndarray, cutoff: float) -> np.ndarray:
    """All ordered pairs (i, j), i != j, with |ca_i - ca_j| < cutoff, sorted by (i, j)."""
    diff = ca[:, None, :] - ca[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    adj = dist < cutoff
    np.fill_diagonal(adj, False)
    i, j = np.nonzero(adj)  # row-major: already sorted by (i, j)
    return np.stack([i, j], axis=1).astype(np.int64)


def _pseudo_frames(ca: np.ndarray):
    """Frames from neighbouring CA atoms (amino-acid level, CA only)."""
    n = len(ca)
    if n < 3:
        return ca.copy(), np.tile(np.eye(3), (n, 1, 1)), np.zeros(n, dtype=bool)
    idx = np.arange(n)
    prev = np.where(idx > 0, idx - 1, 2)
    nxt = np.where(idx < n - 1, idx + 1, n - 3)
    return geo.frames_many(ca[prev], ca, ca[nxt])


def build_graph(s: ProteinStructure, cutoff: float, level: str = "base") -> ProteinGraph:
    """Build the residue graph and its geometric features at ``level``.

    Frames come from (N, CA, C) at backbone/all-atom level and from the
    neighbouring CA atoms at base level. Angles that depend on a degenerate
    frame are set to 0.
    """
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}; expected one of {LEVELS}")
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    n = len(s.residues)
    if n == 0:
        raise EmptyStructure(f"structure {s.id!r} has no residues")
    ca = s.ca_coords()
    if level == "base":
        origins, axes, valid = _pseudo_frames(ca)
    else:
        for k, r in enumerate(s.residues):
            missing = [a for a in ("N", "C") if a not in r.atoms]
            if missing:
                raise MissingBackboneAtoms(k, missing)
        nat = np.array([r.atoms["N"] for r in s.residues])
        cat = np.array([r.atoms["C"] for r in s.residues])
        origins, axes, valid = geo.frames_many(nat, ca, cat)

    edges = cutoff_edges(ca, cutoff)
    I, J = edges[:, 0], edges[:, 1]
    seqdist = np.clip(J - I, -SEQDIST_CLAMP, SEQDIST_CLAMP)
    d, theta, phi = geo.spherical_many(origins[I], axes[I], ca[J])
    ok_i = valid[I]
    ok_ij = ok_i & valid[J] & (d > 0)
    theta = np.where(ok_i, theta, 0.0)
    phi = np.where(ok_i, phi, 0.0)
    tau = np.zeros(len(edges))
    if ok_ij.any():
        tau[ok_ij] = geo.edge_rotation_many(origins[I][ok_ij], axes[I][ok_ij],
                                            origins[J][ok_ij], axes[J][ok_ij])
    euler = None
    if level != "base":
        t1, t2, t3 = geo.euler_many(axes[I], axes[J])
        euler = np.stack([t1, t2, t3], axis=1)
        euler[~(valid[I] & valid[J])] = 0.0
    chi = chi_mask = None
    if level == "all_atom":
        tors = [geo.side_chain_torsions(r.aa_type, r.atoms) for r in s.residues]
        chi = np.stack([t.chi for t in tors])
        chi_mask = np.stack([t.defined_mask for t in tors])

    aa = np.array(s.tokens, dtype=np.int64)
    onehot = np.zeros((n, NUM_AA_TYPES))
    onehot[np.arange(n), aa] = 1.0
    return ProteinGraph(
        n=n, aa=aa, node_features=onehot, edges=edges, edge_seqdist=seqdist,
        positions=[dict(r.atoms) for r in s.residues], level=level,
        d=d, theta=theta, phi=phi, tau=tau, euler=euler, chi=chi, chi_mask=chi_mask,
        cutoff=float(cutoff),
    )


def graph_to_dict(g: ProteinGraph) -> dict:
    """JSON-ready dump of the graph and its geometric features."""
    out = {
        "n": g.n, "level": g.level, "cutoff": g.cutoff,
        "aa": g.aa.tolist(),
        "edges": g.edges.tolist(),
        "edge_seqdist": g.edge_seqdist.tolist(),
        "d": g.d.tolist(), "theta": g.theta.tolist(), "phi": g.phi.tolist(), "tau": g.tau.tolist(),
    }
    if g.euler is not None:
        out["euler"] = g.euler.tolist()
    if g.chi is not None:
        out["chi"] = [[None if not m else float(c) for c, m in zip(row, mrow)]
                      for row, mrow in zip(g.chi, g.chi_mask)]
    return out
