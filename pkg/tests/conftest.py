import numpy as np
import pytest

from bihfusion.protein.pdb import format_atom_line
from bihfusion.synth import synthetic_protein

ALA_ATOMS = [
    ("N", (-0.966, 0.493, 1.500)),
    ("CA", (0.257, 0.418, 0.692)),
    ("C", (-0.094, 0.017, -0.716)),
    ("O", (-1.056, -0.682, -0.923)),
    ("CB", (1.204, -0.620, 1.296)),
]


@pytest.fixture
def ala_pdb() -> str:
    lines = [format_atom_line(k + 1, name, "ALA", "A", 1, xyz) for k, (name, xyz) in enumerate(ALA_ATOMS)]
    return "\n".join(lines + ["END"]) + "\n"


@pytest.fixture
def ala_pdb_path(tmp_path, ala_pdb):
    p = tmp_path / "ala.pdb"
    p.write_text(ala_pdb)
    return p


@pytest.fixture(scope="session")
def protein12():
    return synthetic_protein("p12", 12, seed=3, index=0)


def random_perm(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n)
