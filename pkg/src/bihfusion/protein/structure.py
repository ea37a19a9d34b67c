from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..constants import aa_letter


@dataclass
class Residue:
    aa_type: int
    seq_index: int
    atoms: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def letter(self) -> str:
        return aa_letter(self.aa_type)


@dataclass
class ProteinStructure:
    id: str
    residues: list[Residue]
    dropped_residues: int = 0

    def __post_init__(self):
        for k, r in enumerate(self.residues):
            if "CA" not in r.atoms:
                raise ValueError(f"residue {k} of {self.id!r} has no CA atom")
            if k and r.seq_index <= self.residues[k - 1].seq_index:
                raise ValueError(f"seq_index not strictly increasing at residue {k}")

    @property
    def sequence(self) -> str:
        return "".join(r.letter for r in self.residues)

    @property
    def tokens(self) -> list[int]:
        return [r.aa_type for r in self.residues]

    def __len__(self) -> int:
        return len(self.residues)

    def ca_coords(self) -> np.ndarray:
        return np.array([r.atoms["CA"] for r in self.residues], dtype=np.float64).reshape(-1, 3)

    def transformed(self, t) -> "ProteinStructure":
        """Copy with every atom moved by the rigid transform ``t``."""
        res = [Residue(r.aa_type, r.seq_index, {k: t(v) for k, v in r.atoms.items()})
               for r in self.residues]
        return ProteinStructure(self.id, res, self.dropped_residues)


@dataclass
class LigandGraph:
    """Small-molecule graph: element indices and undirected bonds."""

    atom_types: np.ndarray
    bonds: np.ndarray  # (m, 2)
    coords: np.ndarray | None = None

    def __post_init__(self):
        self.atom_types = np.asarray(self.atom_types, dtype=np.int64).reshape(-1)
        self.bonds = np.asarray(self.bonds, dtype=np.int64).reshape(-1, 2)
        n = len(self.atom_types)
        if self.bonds.size:
            if self.bonds.min() < 0 or self.bonds.max() >= n:
                raise ValueError("ligand bond endpoint out of range")
            if np.any(self.bonds[:, 0] == self.bonds[:, 1]):
                raise ValueError("ligand self-bond")

    def __len__(self) -> int:
        return len(self.atom_types)

    def permuted(self, perm) -> "LigandGraph":
        """Relabel atoms so that new atom ``k`` is old atom ``perm[k]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        return LigandGraph(self.atom_types[perm], inv[self.bonds] if self.bonds.size else self.bonds)
