"""Packed bit vectors and bit matrices over GF(2).

Bit i of a vector lives at bit position i of a Python int (LSB first), so
XOR, AND and popcount run word-parallel on arbitrary lengths. Values are
kept canonical: bits at positions >= len are always zero, which makes
equality and hashing plain int comparisons. Matrices are row-major tuples
of such ints and are treated as immutable; mutating operations return new
matrices that share unchanged rows.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

# Byte-level bit reversal table. Serialization is most-significant-bit
# first (vector bit 0 maps to bit 7 of byte 0), while storage is LSB
# first, so packing is a byte reversal, done at C speed by bytes.translate.
_REV8 = bytes(int(format(i, "08b")[::-1], 2) for i in range(256))


def pack_bits_msb(value: int, nbits: int) -> bytes:
    """Pack an LSB-first bit integer into MSB-first bytes.

    Bit i of value maps to bit 7 - (i % 8) of byte i // 8. Trailing pad
    bits in the final byte are zero because value is canonical.
    """
    nbytes = (nbits + 7) // 8
    return value.to_bytes(nbytes, "little").translate(_REV8)


def unpack_bits_msb(data: bytes, nbits: int) -> int:
    """Inverse of pack_bits_msb. Rejects nonzero padding bits."""
    if len(data) != (nbits + 7) // 8:
        raise ValueError(f"expected {(nbits + 7) // 8} bytes for {nbits} bits, got {len(data)}")
    value = int.from_bytes(data.translate(_REV8), "little")
    if value >> nbits:
        raise ValueError("nonzero padding bits in serialized bit string")
    return value


def random_bits(nbits: int, rng: np.random.Generator) -> int:
    """nbits independent fair bits from rng, as an LSB-first int."""
    if nbits == 0:
        return 0
    nbytes = (nbits + 7) // 8
    return int.from_bytes(rng.bytes(nbytes), "little") & ((1 << nbits) - 1)


class BitVector:
    """Immutable fixed-length bit string over GF(2)."""

    __slots__ = ("n", "value")

    def __init__(self, n: int, value: int = 0):
        if n < 0:
            raise ValueError("length must be nonnegative")
        if value < 0 or value >> n:
            raise ValueError("value has bits outside the vector length")
        self.n = n
        self.value = value

    @classmethod
    def zeros(cls, n: int) -> "BitVector":
        return cls(n, 0)

    @classmethod
    def ones(cls, n: int) -> "BitVector":
        return cls(n, (1 << n) - 1)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BitVector":
        return cls(n, random_bits(n, rng))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVector":
        value = 0
        n = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError("bits must be 0 or 1")
            value |= b << n
            n += 1
        return cls(n, value)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BitVector":
        """Build from a numpy 0/1 array (uint8 or bool)."""
        packed = np.packbits(arr.astype(np.uint8, copy=False), bitorder="little")
        return cls(len(arr), int.from_bytes(packed.tobytes(), "little"))

    @classmethod
    def from_positions(cls, n: int, positions: Iterable[int]) -> "BitVector":
        """Indicator vector: ones exactly at the given positions."""
        value = 0
        for p in positions:
            if not 0 <= p < n:
                raise IndexError(f"position {p} out of range for length {n}")
            value |= 1 << p
        return cls(n, value)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range for length {self.n}")
        return (self.value >> i) & 1

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")
        return BitVector(self.n, self.value ^ other.value)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BitVector) and self.n == other.n and self.value == other.value
        )

    def __hash__(self) -> int:
        return hash((self.n, self.value))

    def __repr__(self) -> str:
        shown = "".join(str(self[i]) for i in range(min(self.n, 64)))
        tail = "..." if self.n > 64 else ""
        return f"BitVector({self.n}, bits={shown}{tail})"

    def popcount(self) -> int:
        return self.value.bit_count()

    def flip(self, i: int) -> "BitVector":
        if not 0 <= i < self.n:
            raise IndexError(f"position {i} out of range for length {self.n}")
        return BitVector(self.n, self.value ^ (1 << i))

    def first(self, k: int) -> "BitVector":
        if not 0 <= k <= self.n:
            raise ValueError(f"cannot take first {k} of {self.n} bits")
        return BitVector(k, self.value & ((1 << k) - 1))

    def last(self, k: int) -> "BitVector":
        if not 0 <= k <= self.n:
            raise ValueError(f"cannot take last {k} of {self.n} bits")
        return BitVector(k, self.value >> (self.n - k))

    def to_array(self) -> np.ndarray:
        """Bits as a numpy uint8 array, index i = bit i."""
        raw = self.value.to_bytes((self.n + 7) // 8, "little")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
        return bits[: self.n]

    def to_bytes_msb(self) -> bytes:
        return pack_bits_msb(self.value, self.n)

    def to_hex(self) -> str:
        """Length-prefixed MSB-first hex, e.g. '12:ab30'."""
        return f"{self.n}:{self.to_bytes_msb().hex()}"

    @classmethod
    def from_hex(cls, text: str) -> "BitVector":
        head, _, body = text.partition(":")
        try:
            n = int(head)
        except ValueError:
            raise ValueError(f"bad bit vector literal {text!r}") from None
        return cls(n, unpack_bits_msb(bytes.fromhex(body), n))


class BitMatrix:
    """Immutable rectangular bit matrix, rows stored as canonical ints."""

    __slots__ = ("rows", "cols", "row_values")

    def __init__(self, row_values: Sequence[int], cols: int):
        if cols < 0:
            raise ValueError("cols must be nonnegative")
        for r in row_values:
            if r < 0 or r >> cols:
                raise ValueError("row value has bits outside cols")
        self.rows = len(row_values)
        self.cols = cols
        self.row_values = tuple(row_values)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls((0,) * rows, cols)

    @classmethod
    def from_rows(cls, rows: Sequence[BitVector]) -> "BitMatrix":
        if not rows:
            raise ValueError("need at least one row to infer cols")
        cols = rows[0].n
        for r in rows:
            if r.n != cols:
                raise ValueError(f"length mismatch: row of {r.n} in matrix of cols {cols}")
        return cls(tuple(r.value for r in rows), cols)

    def row(self, i: int) -> BitVector:
        return BitVector(self.cols, self.row_values[i])

    def get(self, i: int, j: int) -> int:
        if not 0 <= j < self.cols:
            raise IndexError(f"column {j} out of range for cols {self.cols}")
        return (self.row_values[i] >> j) & 1

    def with_row(self, i: int, row: BitVector) -> "BitMatrix":
        if row.n != self.cols:
            raise ValueError(f"length mismatch: row of {row.n} vs cols {self.cols}")
        values = list(self.row_values)
        values[i] = row.value
        return BitMatrix(values, self.cols)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BitMatrix)
            and self.cols == other.cols
            and self.row_values == other.row_values
        )

    def __hash__(self) -> int:
        return hash((self.cols, self.row_values))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"

    def density(self) -> float:
        if self.rows * self.cols == 0:
            return 0.0
        ones = sum(r.bit_count() for r in self.row_values)
        return ones / (self.rows * self.cols)

    def to_bytes_msb(self) -> bytes:
        """Rows concatenated, each packed MSB-first and byte-padded."""
        return b"".join(pack_bits_msb(r, self.cols) for r in self.row_values)

    def to_hex(self) -> str:
        """Dimension header line, then one length-prefixed hex row per line."""
        lines = [f"{self.rows}x{self.cols}"]
        lines.extend(self.row(i).to_hex() for i in range(self.rows))
        return "\n".join(lines)

    @classmethod
    def from_hex(cls, text: str) -> "BitMatrix":
        lines = text.strip().splitlines()
        try:
            rows_s, cols_s = lines[0].split("x")
            rows, cols = int(rows_s), int(cols_s)
        except (IndexError, ValueError):
            raise ValueError("bad matrix literal: missing RxC header") from None
        if len(lines) != rows + 1:
            raise ValueError(f"expected {rows} row lines, got {len(lines) - 1}")
        values = []
        for line in lines[1:]:
            v = BitVector.from_hex(line)
            if v.n != cols:
                raise ValueError(f"length mismatch: row of {v.n} in matrix of cols {cols}")
            values.append(v.value)
        return cls(values, cols)


def matvec(m: BitMatrix, v: BitVector) -> BitVector:
    """Matrix-vector product over GF(2): out[i] = parity(row_i AND v)."""
    if m.cols != v.n:
        raise ValueError(f"dimension mismatch: matrix cols {m.cols} vs vector length {v.n}")
    x = v.value
    out = 0
    for i, r in enumerate(m.row_values):
        out |= ((r & x).bit_count() & 1) << i
    return BitVector(m.rows, out)


def random_matrix(rows: int, cols: int, rng: np.random.Generator) -> BitMatrix:
    """Uniform random matrix, each entry an independent fair bit from rng."""
    nbytes = (cols + 7) // 8
    mask = (1 << cols) - 1
    if rows == 0 or nbytes == 0:
        return BitMatrix((0,) * rows, cols)
    buf = rng.bytes(rows * nbytes)
    values = [
        int.from_bytes(buf[i * nbytes : (i + 1) * nbytes], "little") & mask
        for i in range(rows)
    ]
    return BitMatrix(values, cols)


def replace_rows(
    m: BitMatrix, start: int, stop: int, row_factory: Callable[[], BitVector]
) -> BitMatrix:
    """Replace rows [start, stop) with rows produced by row_factory.

    The factory is called once per replaced row, in row order. Rows outside
    the interval are shared with the input matrix.
    """
    if not (0 <= start <= stop <= m.rows):
        raise ValueError(
            f"row interval [{start}, {stop}) out of range for {m.rows} rows"
        )
    values = list(m.row_values)
    for i in range(start, stop):
        row = row_factory()
        if row.n != m.cols:
            raise ValueError(f"length mismatch: row of {row.n} vs cols {m.cols}")
        values[i] = row.value
    return BitMatrix(values, m.cols)


def flip_entry(m: BitMatrix, i: int, j: int) -> BitMatrix:
    """Flip the single entry (i, j)."""
    if not 0 <= i < m.rows:
        raise IndexError(f"row {i} out of range for {m.rows} rows")
    if not 0 <= j < m.cols:
        raise IndexError(f"column {j} out of range for cols {m.cols}")
    values = list(m.row_values)
    values[i] ^= 1 << j
    return BitMatrix(values, m.cols)
