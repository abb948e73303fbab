"""Cycle-level simulator of a tiled SRAM spatial accelerator.

The compiled core exposes the metadata codec, the assembler, matrix
ingestion, reference kernels and the device runners.
"""

from ._tilesim import (  # noqa: F401
    CsrMatrix,
    SimulatorError,
    assemble,
    compute_levels,
    csr_from_mm,
    disassemble,
    pack_metadata,
    run_pcg,
    run_spmv,
    run_sptrsv,
    spmv_ref,
    sptrsv_ref,
    unpack_metadata,
)

__all__ = [
    "CsrMatrix",
    "SimulatorError",
    "assemble",
    "compute_levels",
    "csr_from_mm",
    "disassemble",
    "pack_metadata",
    "run_pcg",
    "run_spmv",
    "run_sptrsv",
    "spmv_ref",
    "sptrsv_ref",
    "unpack_metadata",
]
