import math

import numpy as np
import pytest

from bihfusion.constants import HYDROPHOBIC
from bihfusion.geometry import torsion_angle
from bihfusion.protein import read_dataset, write_dataset
from bihfusion.synth import (
    CLASS_HI,
    CLASS_LO,
    MIN_SEPARATION,
    generate_synthetic,
    place_atom,
    self_avoiding_walk,
    synthetic_protein,
)
from bihfusion.tensorcore import make_rng

# Label constants restated independently of the generator.
ALPHA, BETA, GAMMA, RADIUS = 0.1, 1.0, 0.05, 8.0
HYDRO = set("AVILMFWC")


def oracle_score(ca, seq):
    n = len(ca)
    ds = [math.sqrt(sum((ca[i][c] - ca[j][c]) ** 2 for c in range(3))) for i in range(n) for j in range(i + 1, n)]
    mean = math.fsum(ds) / len(ds) if ds else 0.0
    return ALPHA * mean + BETA * (sum(ch in HYDRO for ch in seq) / len(seq))


def oracle_residue_labels(ca, seq):
    n = len(ca)
    counts = [sum(1 for j in range(n) if j != i and math.dist(ca[i], ca[j]) < RADIUS) for i in range(n)]
    med = sorted(counts)[n // 2] if n % 2 else (sorted(counts)[n // 2 - 1] + sorted(counts)[n // 2]) / 2
    return [int(counts[i] > med and seq[i] in HYDRO) for i in range(n)]


def oracle_class(score, k):
    return min(max(math.floor((score - CLASS_LO) / (CLASS_HI - CLASS_LO) * k), 0), k - 1)


class TestWalk:
    def test_one_record_five_residues(self):
        ds = generate_synthetic("mqa", 1, (5, 5))
        assert len(ds) == 1 and len(ds[0].structure) == 5
        ca = ds[0].structure.ca_coords()
        steps = np.linalg.norm(np.diff(ca, axis=0), axis=1)
        assert np.all(np.abs(steps - 3.8) <= 1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_self_avoiding(self, seed):
        ca = self_avoiding_walk(40, make_rng(seed, "walk"))
        d = np.linalg.norm(ca[:, None] - ca[None], axis=2)
        iu = np.triu_indices(40, k=2)
        assert d[iu].min() >= MIN_SEPARATION

    def test_place_atom_geometry(self):
        a, b, c = np.array([1.0, 1, 0]), np.array([0.0, 0, 0]), np.array([1.5, 0, 0])
        d = place_atom(a, b, c, 1.52, math.radians(114), 1.0)
        assert np.linalg.norm(d - c) == pytest.approx(1.52, abs=1e-12)
        v1, v2 = b - c, d - c
        ang = math.acos(np.dot(v1, v2) / (np.linalg.norm(v1) * np.linalg.norm(v2)))
        assert ang == pytest.approx(math.radians(114), abs=1e-12)
        assert torsion_angle(a, b, c, d) == pytest.approx(1.0, abs=1e-12)

    def test_backbone_atoms_present(self):
        s = synthetic_protein("x", 10, 0, 0)
        for r in s.residues:
            assert {"N", "CA", "C"} <= set(r.atoms)
            assert np.linalg.norm(r.atoms["N"] - r.atoms["CA"]) == pytest.approx(1.458, abs=1e-12)
            assert np.linalg.norm(r.atoms["C"] - r.atoms["CA"]) == pytest.approx(1.523, abs=1e-12)
            if r.letter != "G":
                assert "CB" in r.atoms


class TestDeterminism:
    def test_same_seed_identical_files(self, tmp_path):
        for name in ("a", "b"):
            write_dataset(tmp_path / name, generate_synthetic("lba", 6, seed=11))
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_different_seed_differs(self, tmp_path):
        write_dataset(tmp_path / "a", generate_synthetic("mqa", 3, seed=1))
        write_dataset(tmp_path / "b", generate_synthetic("mqa", 3, seed=2))
        assert (tmp_path / "a").read_bytes() != (tmp_path / "b").read_bytes()

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_synthetic("mqa", 0)
        with pytest.raises(ValueError):
            generate_synthetic("fold", 2)
        with pytest.raises(ValueError):
            generate_synthetic("mqa", 2, (9, 8))


class TestLabelOracle:
    def reload(self, tmp_path, task, **kw):
        write_dataset(tmp_path / "d.txt", generate_synthetic(task, 20, seed=7, **kw))
        return read_dataset(tmp_path / "d.txt")

    def test_regression(self, tmp_path):
        for rec in self.reload(tmp_path, "mqa"):
            s = rec.structure
            assert rec.label == oracle_score(s.ca_coords().tolist(), s.sequence)

    def test_lba(self, tmp_path):
        for rec in self.reload(tmp_path, "lba"):
            s = rec.structure
            assert rec.label == oracle_score(s.ca_coords().tolist(), s.sequence) + GAMMA * len(rec.ligand)

    def test_classification(self, tmp_path):
        labels = []
        for rec in self.reload(tmp_path, "reaction", num_classes=4):
            s = rec.structure
            assert rec.label == oracle_class(oracle_score(s.ca_coords().tolist(), s.sequence), 4)
            labels.append(rec.label)
        assert set(labels) == {0, 1, 2, 3}

    @pytest.mark.parametrize("task", ["ppbs", "bce"])
    def test_per_residue(self, tmp_path, task):
        positives = 0
        for rec in self.reload(tmp_path, task):
            s = rec.structure
            expect = oracle_residue_labels(s.ca_coords().tolist(), s.sequence)
            assert rec.residue_labels.tolist() == expect
            positives += sum(expect)
        assert positives > 0

    def test_labels_need_both_modalities(self):
        ds = generate_synthetic("mqa", 30, seed=3)
        seq_part = [BETA * sum(c in HYDRO for c in r.structure.sequence) / len(r.structure) for r in ds]
        struct_part = [r.label - s for r, s in zip(ds, seq_part)]
        assert np.std(seq_part) > 0.01 and np.std(struct_part) > 0.01

    def test_hydrophobic_set_matches(self):
        assert set(HYDROPHOBIC) == HYDRO
