"""Countermeasures for the amplification-matrix tampering attacks.

Two hardened variants of the protocol are modeled. In matrix_in_log mode
the full amplification matrix is embedded in the authenticated protocol-log
extract, so any in-flight modification of the matrix shows up as a digest
mismatch. In derived_matrix mode the matrix never crosses the channel at
all: both parties expand it locally from previously authenticated shared
secret material, which removes the tampering surface entirely.
"""

from __future__ import annotations

import dataclasses
import hashlib
import struct
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from .gf2 import BitMatrix

if TYPE_CHECKING:  # pragma: no cover
    from .pipeline import ProtocolLogExtract


class HardeningKind(str, Enum):
    BASELINE = "baseline"
    MATRIX_IN_LOG = "matrix_in_log"
    DERIVED_MATRIX = "derived_matrix"


@dataclass(frozen=True)
class HardeningMode:
    kind: HardeningKind = HardeningKind.BASELINE
    # Shared secret the matrix is expanded from in derived_matrix mode.
    # When None, sessions fall back to per-session pre-provisioned material.
    derivation_seed_source: bytes | None = None

    @classmethod
    def parse(cls, name: str, derivation_seed_source: bytes | None = None) -> "HardeningMode":
        try:
            kind = HardeningKind(name)
        except ValueError:
            valid = ", ".join(k.value for k in HardeningKind)
            raise ValueError(f"unknown hardening mode {name!r}, expected one of: {valid}") from None
        return cls(kind, derivation_seed_source)


def embed_matrix_in_log(
    log: "ProtocolLogExtract", matrix: BitMatrix, mode: HardeningMode
) -> "ProtocolLogExtract":
    """Return a copy of the log extract with the matrix embedded."""
    if mode.kind is not HardeningKind.MATRIX_IN_LOG:
        raise ValueError(
            f"matrix embedding requires matrix_in_log mode, session is in {mode.kind.value}"
        )
    return dataclasses.replace(log, matrix_included=matrix)


def derive_matrix(shared_secret: bytes, rows: int, cols: int) -> BitMatrix:
    """Expand an amplification matrix from shared secret material.

    The expansion is a keyed pseudo-random stream (SHAKE-256 over a domain
    tag, the secret and the dimensions), so equal inputs give bit-identical
    matrices on both sides and nothing about the matrix travels on the wire.
    """
    if not shared_secret:
        raise ValueError("empty shared secret")
    if rows < 0 or cols < 0:
        raise ValueError("matrix dimensions must be nonnegative")
    row_bytes = (cols + 7) // 8
    mask = (1 << cols) - 1
    h = hashlib.shake_256()
    h.update(b"qkdsim.derive-matrix|")
    h.update(struct.pack(">III", len(shared_secret), rows, cols))
    h.update(shared_secret)
    stream = h.digest(rows * row_bytes)
    values = [
        int.from_bytes(stream[i * row_bytes : (i + 1) * row_bytes], "little") & mask
        for i in range(rows)
    ]
    return BitMatrix(values, cols)
