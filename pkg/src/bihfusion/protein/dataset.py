"""Line-oriented dataset records and the BHEM embedding file.

Dataset layout (UTF-8)::

    #task <reaction|mqa|lba|ppbs|bce> level <base|backbone|all_atom>
    >id <label | @labelfile | ->
    SEQ <one-letter sequence>
    ATOM <res_index> <atom_name> <x> <y> <z>      (one per atom)
    RLAB <0/1 string>                             (per-residue tasks)
    LIG <natoms>                                  (lba)
    LATOM <elem_index>                            (natoms lines)
    LBOND <i> <j>
    <blank line>
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..constants import aa_index
from .graph import LEVELS
from .structure import LigandGraph, ProteinStructure, Residue

log = logging.getLogger(__name__)

TASKS = ("reaction", "mqa", "lba", "ppbs", "bce")
REGRESSION_TASKS = ("mqa", "lba")
CLASSIFICATION_TASKS = ("reaction",)
PER_RESIDUE_TASKS = ("ppbs", "bce")


class DatasetFormatError(ValueError):
    pass


@dataclass
class Record:
    structure: ProteinStructure
    label: float | int | None = None
    ligand: LigandGraph | None = None
    residue_labels: np.ndarray | None = None

    @property
    def id(self) -> str:
        return self.structure.id


@dataclass
class Dataset:
    task: str
    level: str
    records: list[Record] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, k):
        return self.records[k]


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_label(task: str, token: str, where: str):
    try:
        if task in CLASSIFICATION_TASKS:
            return int(token)
        return float(token)
    except ValueError:
        raise DatasetFormatError(f"{where}: bad label {token!r} for task {task}") from None


def _residue_labels(s: str, where: str) -> np.ndarray:
    s = s.strip()
    if not s or set(s) - {"0", "1"}:
        raise DatasetFormatError(f"{where}: per-residue labels must be a 0/1 string")
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8).astype(np.int64) - ord("0")


def parse_dataset(text: str, base_dir: Path | None = None) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        return Dataset(task="", level="", records=[])
    head = lines[0].split()
    if len(head) != 4 or head[0] != "#task" or head[2] != "level":
        raise DatasetFormatError("line 1: expected '#task <task> level <level>'")
    task, level = head[1], head[3]
    if task not in TASKS:
        raise DatasetFormatError(f"line 1: unknown task tag {task!r}")
    if level not in LEVELS:
        raise DatasetFormatError(f"line 1: unknown level {level!r}")

    records: list[Record] = []
    cur: dict | None = None

    def finish(lineno: int):
        nonlocal cur
        if cur is None:
            return
        records.append(_build_record(task, cur, lineno))
        cur = None

    for lineno, line in enumerate(lines[1:], start=2):
        where = f"line {lineno}"
        if not line.strip():
            finish(lineno)
            continue
        parts = line.split()
        tag = parts[0]
        if tag.startswith(">"):
            finish(lineno)
            rid = tag[1:]
            if not rid or len(parts) != 2:
                raise DatasetFormatError(f"{where}: expected '>id <label>'")
            cur = {"id": rid, "label_token": parts[1], "seq": None, "atoms": [],
                   "rlab": None, "lig_n": None, "latoms": [], "lbonds": [], "line": lineno}
            tok = parts[1]
            if tok.startswith("@"):
                ref = Path(tok[1:])
                if base_dir is not None and not ref.is_absolute():
                    ref = base_dir / ref
                try:
                    cur["label_token"] = ref.read_text(encoding="utf-8").strip()
                except OSError as e:
                    raise DatasetFormatError(f"{where}: cannot read label file {ref}: {e}") from None
                if task in PER_RESIDUE_TASKS:
                    cur["rlab"] = _residue_labels(cur["label_token"], where)
                    cur["label_token"] = "-"
            continue
        if cur is None:
            raise DatasetFormatError(f"{where}: content outside a record")
        try:
            if tag == "SEQ":
                cur["seq"] = parts[1] if len(parts) > 1 else ""
            elif tag == "ATOM":
                cur["atoms"].append((int(parts[1]), parts[2],
                                     np.array([float(parts[3]), float(parts[4]), float(parts[5])])))
            elif tag == "RLAB":
                cur["rlab"] = _residue_labels(parts[1] if len(parts) > 1 else "", where)
            elif tag == "LIG":
                cur["lig_n"] = int(parts[1])
            elif tag == "LATOM":
                cur["latoms"].append(int(parts[1]))
            elif tag == "LBOND":
                cur["lbonds"].append((int(parts[1]), int(parts[2])))
            else:
                raise DatasetFormatError(f"{where}: unknown tag {tag!r}")
        except (IndexError, ValueError) as e:
            if isinstance(e, DatasetFormatError):
                raise
            raise DatasetFormatError(f"{where}: malformed {tag} line") from None
    finish(len(lines) + 1)
    return Dataset(task, level, records)


def _build_record(task: str, cur: dict, lineno: int) -> Record:
    where = f"record {cur['id']!r} (line {cur['line']})"
    seq = cur["seq"]
    if seq is None:
        raise DatasetFormatError(f"{where}: missing SEQ line")
    atoms: list[dict[str, np.ndarray]] = [dict() for _ in seq]
    for idx, name, xyz in cur["atoms"]:
        if not 0 <= idx < len(seq):
            raise DatasetFormatError(f"{where}: ATOM residue index {idx} out of range")
        atoms[idx].setdefault(name, xyz)
    for k, a in enumerate(atoms):
        if "CA" not in a:
            raise DatasetFormatError(f"{where}: residue {k} has no CA atom")
    residues = [Residue(aa_index(ch), k, a) for k, (ch, a) in enumerate(zip(seq, atoms))]
    structure = ProteinStructure(cur["id"], residues)

    label = None
    rlab = None
    if task in PER_RESIDUE_TASKS:
        rlab = cur["rlab"]
        if rlab is None:
            raise DatasetFormatError(f"{where}: per-residue task needs RLAB labels")
        if len(rlab) != len(seq):
            raise DatasetFormatError(
                f"{where}: {len(rlab)} residue labels for {len(seq)} residues")
    else:
        label = _parse_label(task, cur["label_token"], where)

    ligand = None
    if cur["lig_n"] is not None:
        if len(cur["latoms"]) != cur["lig_n"]:
            raise DatasetFormatError(f"{where}: LIG declares {cur['lig_n']} atoms, got {len(cur['latoms'])}")
        try:
            ligand = LigandGraph(cur["latoms"], cur["lbonds"])
        except ValueError as e:
            raise DatasetFormatError(f"{where}: {e}") from None
    elif task == "lba":
        raise DatasetFormatError(f"{where}: lba record without ligand")
    return Record(structure, label, ligand, rlab)


def read_dataset(path) -> Dataset:
    path = Path(path)
    return parse_dataset(path.read_text(encoding="utf-8"), base_dir=path.parent)


def format_dataset(ds: Dataset) -> str:
    out = [f"#task {ds.task} level {ds.level}"]
    for rec in ds.records:
        s = rec.structure
        if ds.task in PER_RESIDUE_TASKS:
            tok = "-"
        elif ds.task in CLASSIFICATION_TASKS:
            tok = str(int(rec.label))
        else:
            tok = _fmt(rec.label)
        out.append(f">{s.id} {tok}")
        out.append(f"SEQ {s.sequence}")
        for k, r in enumerate(s.residues):
            for name, xyz in r.atoms.items():
                out.append(f"ATOM {k} {name} {_fmt(xyz[0])} {_fmt(xyz[1])} {_fmt(xyz[2])}")
        if rec.residue_labels is not None:
            out.append("RLAB " + "".join(str(int(v)) for v in rec.residue_labels))
        if rec.ligand is not None:
            out.append(f"LIG {len(rec.ligand)}")
            out.extend(f"LATOM {int(t)}" for t in rec.ligand.atom_types)
            out.extend(f"LBOND {int(i)} {int(j)}" for i, j in rec.ligand.bonds)
        out.append("")
    return "\n".join(out) + "\n"


def write_dataset(path, ds: Dataset) -> None:
    Path(path).write_text(format_dataset(ds), encoding="utf-8")


def filter_max_length(records, max_len: int = 1024):
    """Drop records longer than ``max_len`` residues; returns ``(kept, n_dropped)``."""
    kept = [r for r in records if len(r.structure) <= max_len]
    dropped = len(records) - len(kept)
    if dropped:
        log.info("dropped %d record(s) longer than %d residues", dropped, max_len)
    return kept, dropped


# --- BHEM precomputed embeddings -------------------------------------------

BHEM_MAGIC = b"BHEM"
BHEM_VERSION = 1


def write_embeddings(path, emb: np.ndarray) -> None:
    emb = np.asarray(emb, dtype="<f4")
    if emb.ndim != 2:
        raise ValueError("embeddings must be a 2-D (n_residues, dim) array")
    header = BHEM_MAGIC + struct.pack("<III", BHEM_VERSION, emb.shape[0], emb.shape[1])
    Path(path).write_bytes(header + np.ascontiguousarray(emb).tobytes())


def read_embeddings(path) -> np.ndarray:
    from ..tensorcore.serialize import FormatError

    buf = Path(path).read_bytes()
    if len(buf) < 16 or buf[:4] != BHEM_MAGIC:
        raise FormatError(f"{path}: not a BHEM file")
    version, n, dim = struct.unpack("<III", buf[4:16])
    if version != BHEM_VERSION:
        raise FormatError(f"{path}: unsupported BHEM version {version}")
    need = 16 + 4 * n * dim
    if len(buf) != need:
        raise FormatError(f"{path}: payload is {len(buf) - 16} bytes, expected {need - 16}")
    return np.frombuffer(buf[16:], dtype="<f4").reshape(n, dim).copy()
