"""Synthetic protein datasets whose labels need both sequence and structure.

Chains are self-avoiding C-alpha random walks with 3.8 A steps. N and C sit at
fixed offsets in a frame built from the neighbouring C-alphas, CB and one
gamma atom are placed by internal coordinates, so chi1 is defined wherever
the residue type has one.
"""

from __future__ import annotations

import math

import numpy as np

from .constants import AA_ORDER, CHI_ATOMS, HYDROPHOBIC, aa_index
from .protein.dataset import (
    CLASSIFICATION_TASKS,
    PER_RESIDUE_TASKS,
    TASKS,
    Dataset,
    Record,
)
from .protein.structure import LigandGraph, ProteinStructure, Residue
from .tensorcore.rng import make_rng

CA_STEP = 3.8
MIN_BEND = math.radians(80.0)
MAX_BEND = math.radians(150.0)
MIN_SEPARATION = 4.0
STEP_RETRIES = 200
WALK_RESTARTS = 50

# label = ALPHA * mean pairwise CA distance + BETA * hydrophobic fraction (+ LIGAND_GAMMA * ligand atoms)
ALPHA = 0.1
BETA = 1.0
LIGAND_GAMMA = 0.05
CONTACT_RADIUS = 8.0
CLASS_LO, CLASS_HI = 1.0, 1.8

# fixed offsets of N and C in the residue frame (e1 toward C, N in the e1/e2 plane)
N_LOCAL = 1.458 * np.array([math.cos(math.radians(111.0)), math.sin(math.radians(111.0)), 0.0])
C_LOCAL = np.array([1.523, 0.0, 0.0])


class WalkFailed(RuntimeError):
    pass


def place_atom(a, b, c, bond: float, angle: float, torsion: float) -> np.ndarray:
    """Position d with |cd| = bond, angle(b, c, d) = angle, dihedral(a, b, c, d) = torsion."""
    bc = c - b
    bc = bc / np.linalg.norm(bc)
    n = np.cross(b - a, bc)
    n = n / np.linalg.norm(n)
    m = np.stack([bc, np.cross(n, bc), n], axis=1)
    d2 = np.array([-bond * math.cos(angle),
                   bond * math.sin(angle) * math.cos(torsion),
                   bond * math.sin(angle) * math.sin(torsion)])
    return c + m @ d2


def _unit(v):
    return v / np.linalg.norm(v)


def self_avoiding_walk(n: int, rng: np.random.Generator) -> np.ndarray:
    """C-alpha trace with exact 3.8 A steps and bend angles in [80, 150] degrees."""
    pts = [np.zeros(3)]
    for i in range(1, n):
        for _ in range(STEP_RETRIES):
            d = _unit(rng.normal(size=3))
            if i >= 2:
                back = _unit(pts[i - 2] - pts[i - 1])
                bend = math.acos(max(-1.0, min(1.0, float(back @ d))))
                if not MIN_BEND <= bend <= MAX_BEND:
                    continue
            cand = pts[i - 1] + CA_STEP * d
            if i >= 2:
                prior = np.asarray(pts[:-1])
                if np.min(np.linalg.norm(prior - cand, axis=1)) < MIN_SEPARATION:
                    continue
            pts.append(cand)
            break
        else:
            raise WalkFailed(f"no admissible step at residue {i}")
    return np.asarray(pts)


def _residue_frames(ca: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal axes (rows) per residue from the neighbouring C-alphas."""
    n = len(ca)
    axes = np.zeros((n, 3, 3))
    for i in range(n):
        nxt = ca[i + 1] if i + 1 < n else None
        prv = ca[i - 1] if i > 0 else None
        if nxt is None and prv is None:
            e1 = _unit(rng.normal(size=3))
            other = _unit(rng.normal(size=3))
        elif nxt is None:
            e1 = _unit(ca[i] - prv)
            other = ca[i - 2] - ca[i] if i >= 2 else _unit(rng.normal(size=3))
        else:
            e1 = _unit(nxt - ca[i])
            other = prv - ca[i] if prv is not None else (
                ca[i + 2] - ca[i] if i + 2 < n else _unit(rng.normal(size=3)))
        e2 = other - (other @ e1) * e1
        if np.linalg.norm(e2) < 1e-6:
            e2 = np.cross(e1, [1.0, 0.0, 0.0])
            if np.linalg.norm(e2) < 1e-6:
                e2 = np.cross(e1, [0.0, 1.0, 0.0])
        e2 = _unit(e2)
        axes[i] = np.stack([e1, e2, np.cross(e1, e2)])
    return axes


def build_residue_atoms(letter: str, ca: np.ndarray, axes: np.ndarray, chi1: float) -> dict[str, np.ndarray]:
    atoms = {"N": ca + N_LOCAL @ axes, "CA": ca.copy(), "C": ca + C_LOCAL @ axes}
    if letter == "G":
        return atoms
    atoms["CB"] = place_atom(atoms["C"], atoms["N"], ca, 1.53, math.radians(110.5), math.radians(122.6))
    chis = CHI_ATOMS.get(letter, [])
    if chis:
        gamma = chis[0][3]
        atoms[gamma] = place_atom(atoms["N"], ca, atoms["CB"], 1.52, math.radians(114.0), chi1)
    return atoms


def mean_pairwise_distance(ca: np.ndarray) -> float:
    n = len(ca)
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, k=1)
    d = np.linalg.norm(ca[iu[0]] - ca[iu[1]], axis=1)
    return math.fsum(d.tolist()) / len(d)


def hydrophobic_fraction(seq: str) -> float:
    return sum(c in HYDROPHOBIC for c in seq) / len(seq)


def mixed_score(ca: np.ndarray, seq: str) -> float:
    return ALPHA * mean_pairwise_distance(ca) + BETA * hydrophobic_fraction(seq)


def score_class(score: float, num_classes: int) -> int:
    k = math.floor((score - CLASS_LO) / (CLASS_HI - CLASS_LO) * num_classes)
    return min(max(k, 0), num_classes - 1)


def contact_counts(ca: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(ca[:, None, :] - ca[None, :, :], axis=2)
    close = d < CONTACT_RADIUS
    np.fill_diagonal(close, False)
    return close.sum(axis=1)


def residue_labels(ca: np.ndarray, seq: str) -> np.ndarray:
    counts = contact_counts(ca)
    med = np.median(counts)
    hyd = np.array([c in HYDROPHOBIC for c in seq])
    return ((counts > med) & hyd).astype(np.int64)


def random_ligand(rng: np.random.Generator, num_elements: int, size_range=(3, 10)) -> LigandGraph:
    n = int(rng.integers(size_range[0], size_range[1] + 1))
    types = rng.integers(0, num_elements, size=n)
    bonds = [(int(rng.integers(0, k)), k) for k in range(1, n)]
    if n >= 4 and rng.random() < 0.5:
        i, j = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
        if (i, j) not in bonds:
            bonds.append((i, j))
    return LigandGraph(types, np.array(bonds, dtype=np.int64).reshape(-1, 2))


def synthetic_protein(pid: str, length: int, seed: int, index: int) -> ProteinStructure:
    for attempt in range(WALK_RESTARTS):
        rng = make_rng(seed, "protein", index, attempt)
        try:
            ca = self_avoiding_walk(length, rng)
        except WalkFailed:
            continue
        seq = "".join(AA_ORDER[k] for k in rng.integers(0, len(AA_ORDER), size=length))
        axes = _residue_frames(ca, rng)
        chi1 = rng.uniform(-math.pi, math.pi, size=length)
        residues = [Residue(aa_index(seq[i]), i, build_residue_atoms(seq[i], ca[i], axes[i], chi1[i]))
                    for i in range(length)]
        return ProteinStructure(pid, residues)
    raise WalkFailed(f"{pid}: self-avoiding walk infeasible after {WALK_RESTARTS} restarts")


def label_record(task: str, s: ProteinStructure, ligand: LigandGraph | None, num_classes: int) -> Record:
    ca, seq = s.ca_coords(), s.sequence
    if task in PER_RESIDUE_TASKS:
        return Record(s, None, None, residue_labels(ca, seq))
    score = mixed_score(ca, seq)
    if task in CLASSIFICATION_TASKS:
        return Record(s, score_class(score, num_classes))
    if task == "lba":
        return Record(s, score + LIGAND_GAMMA * len(ligand), ligand)
    return Record(s, score)


def generate_synthetic(task: str, n_proteins: int, len_range=(8, 16), seed: int = 0,
                       level: str = "all_atom", num_classes: int = 8, ligand_elements: int = 10) -> Dataset:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if n_proteins < 1:
        raise ValueError("n_proteins must be >= 1")
    lo, hi = int(len_range[0]), int(len_range[1])
    if not 1 <= lo <= hi:
        raise ValueError(f"bad length range {len_range}")
    rng = make_rng(seed, "lengths")
    lengths = rng.integers(lo, hi + 1, size=n_proteins)
    records = []
    for k in range(n_proteins):
        s = synthetic_protein(f"syn{k:04d}", int(lengths[k]), seed, k)
        lig = random_ligand(make_rng(seed, "ligand", k), ligand_elements) if task == "lba" else None
        records.append(label_record(task, s, lig, num_classes))
    return Dataset(task, level, records)
