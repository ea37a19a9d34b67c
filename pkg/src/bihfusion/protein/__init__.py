from .structure import LigandGraph, ProteinStructure, Residue
from .pdb import NoAtomsError, PdbError, parse_pdb
from .graph import (
    LEVELS,
    SEQDIST_CLAMP,
    SEQDIST_VOCAB,
    EmptyStructure,
    MissingBackboneAtoms,
    ProteinGraph,
    build_graph,
    graph_to_dict,
)
from .dataset import (
    PER_RESIDUE_TASKS,
    REGRESSION_TASKS,
    TASKS,
    Dataset,
    DatasetFormatError,
    Record,
    filter_max_length,
    read_dataset,
    read_embeddings,
    write_dataset,
    write_embeddings,
)

__all__ = [
    "LigandGraph", "ProteinStructure", "Residue", "NoAtomsError", "PdbError", "parse_pdb",
    "LEVELS", "SEQDIST_CLAMP", "SEQDIST_VOCAB", "EmptyStructure", "MissingBackboneAtoms",
    "ProteinGraph", "build_graph", "graph_to_dict", "PER_RESIDUE_TASKS", "REGRESSION_TASKS",
    "TASKS", "Dataset", "DatasetFormatError", "Record", "filter_max_length", "read_dataset",
    "read_embeddings", "write_dataset", "write_embeddings",
]
