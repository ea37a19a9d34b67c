"""Fixed-column PDB ATOM record reader."""

from __future__ import annotations

import logging
from typing import Iterable

import numpy as np

from ..constants import THREE_TO_ONE, UNKNOWN_AA, aa_index
from .structure import ProteinStructure, Residue

log = logging.getLogger(__name__)


class PdbError(ValueError):
    pass


class NoAtomsError(PdbError):
    pass


def _float_field(line: str, lo: int, hi: int, lineno: int, what: str) -> float:
    raw = line[lo:hi]
    try:
        return float(raw)
    except ValueError:
        raise PdbError(f"line {lineno}: malformed {what} field {raw!r}") from None


def parse_pdb(text: str, chains: Iterable[str] | None = None, id: str = "") -> ProteinStructure:
    """Read ATOM records into a single-chain (or concatenated) structure.

    Only the first model is read. By default the first chain encountered is
    kept; pass ``chains`` to concatenate several chains in file order.
    Alternate locations other than blank or ``A`` are skipped, and residues
    without a CA atom are dropped (counted in ``dropped_residues``).
    """
    wanted = None if chains is None else set(chains)
    residues: dict[tuple[str, int, str], tuple[str, dict[str, np.ndarray]]] = {}
    first_chain = None
    seen_atom = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("ENDMDL"):
            break
        if not line.startswith("ATOM  "):
            continue
        seen_atom = True
        if len(line) < 54:
            raise PdbError(f"line {lineno}: ATOM record shorter than 54 columns")
        chain = line[21]
        if wanted is None:
            if first_chain is None:
                first_chain = chain
            if chain != first_chain:
                continue
        elif chain not in wanted:
            continue
        alt = line[16]
        if alt not in (" ", "A"):
            continue
        name = line[12:16].strip()
        resname = line[17:20].strip()
        try:
            resseq = int(line[22:26])
        except ValueError:
            raise PdbError(f"line {lineno}: malformed residue number {line[22:26]!r}") from None
        icode = line[26] if len(line) > 26 else " "
        xyz = np.array([
            _float_field(line, 30, 38, lineno, "x"),
            _float_field(line, 38, 46, lineno, "y"),
            _float_field(line, 46, 54, lineno, "z"),
        ])
        key = (chain, resseq, icode)
        if key not in residues:
            residues[key] = (resname, {})
        atoms = residues[key][1]
        atoms.setdefault(name, xyz)
    if not seen_atom:
        raise NoAtomsError("no ATOM records found")
    if not residues:
        raise NoAtomsError("no ATOM records in the requested chain(s)")

    out: list[Residue] = []
    dropped = 0
    for resname, atoms in residues.values():
        if "CA" not in atoms:
            dropped += 1
            continue
        letter = THREE_TO_ONE.get(resname)
        aa = aa_index(letter) if letter else UNKNOWN_AA
        out.append(Residue(aa, len(out), atoms))
    if dropped:
        log.warning("dropped %d residue(s) without CA", dropped)
    if not out:
        raise NoAtomsError("no residue with a CA atom")
    return ProteinStructure(id, out, dropped)


def format_atom_line(serial: int, name: str, resname: str, chain: str, resseq: int, xyz) -> str:
    """One ATOM record in the fixed-column layout (used for fixtures and export)."""
    padded = f" {name:<3}" if len(name) < 4 else name
    return (f"ATOM  {serial:5d} {padded:<4} {resname:>3} {chain}{resseq:4d}    "
            f"{xyz[0]:8.3f}{xyz[1]:8.3f}{xyz[2]:8.3f}  1.00  0.00")
