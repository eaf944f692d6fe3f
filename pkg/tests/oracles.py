"""Independent reference implementations used to check the fast paths.

These deliberately avoid the packed-int code paths in qkdsim.gf2: the bit
loop works entry by entry through the public accessors, and the numpy
oracle goes through the byte serialization and an integer matmul.
"""

from __future__ import annotations

import numpy as np

from qkdsim.gf2 import BitMatrix, BitVector


def oracle_matvec_bitloop(m: BitMatrix, v: BitVector) -> list[int]:
    """Entry-by-entry parity accumulation, no packed arithmetic."""
    out = []
    for i in range(m.rows):
        acc = 0
        for j in range(m.cols):
            acc ^= m.get(i, j) & v[j]
        out.append(acc)
    return out


def unpack_msb(data: bytes, nbits: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="big")
    return bits[:nbits]


def oracle_matvec_numpy(m: BitMatrix, v: BitVector) -> list[int]:
    """Unpacked 0/1 matmul mod 2, fed from the byte serialization."""
    rows = np.stack([unpack_msb(m.row(i).to_bytes_msb(), m.cols) for i in range(m.rows)])
    vec = unpack_msb(v.to_bytes_msb(), v.n)
    return list((rows.astype(np.int64) @ vec.astype(np.int64)) % 2)
