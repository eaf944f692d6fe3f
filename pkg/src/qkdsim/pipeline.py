"""Classical post-processing pipeline for an entanglement-based QKD session.

The stages run in a fixed order: correlated raw bits, sifting on matching
bases, error-rate estimation on a disclosed sample (with an abort
threshold), idealized reconciliation that corrects Bob's key exactly, and
privacy amplification by a random GF(2) matrix. Afterwards each party
authenticates a short extract of its protocol log (hash, then MAC) and
releases its final key only if the peer's extract digest matches its own.

Channel message order in run_session: BASES (A->B), BASES (B->A),
EST_POSITIONS (A->B), EST_VALUES (A->B), EST_RATE (B->A),
CORRECTIONS (A->B), PA_MATRIX (A->B, omitted in derived_matrix mode),
AUTH_TAG_A (A->B), AUTH_TAG_B (B->A).
"""

from __future__ import annotations

import hashlib
import hmac as hmac_mod
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from .channel import A_TO_B, B_TO_A, Channel, Frame, FrameType
from .gf2 import BitMatrix, BitVector, matvec, random_matrix
from .hardening import HardeningKind, HardeningMode, derive_matrix, embed_matrix_in_log
from .seeding import derive_bytes, make_rng


class ProtocolError(RuntimeError):
    """A pipeline stage was invoked out of order or on unusable state."""


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    ABORT = "abort"


@dataclass(frozen=True)
class SessionParams:
    """Session-wide constants. All randomness derives from master_seed."""

    n_raw: int = 8192
    qber: float = 0.03
    sample_fraction: float = 0.125
    abort_threshold: float = 0.11
    key_len: int = 256  # rows of the amplification matrix
    tail_len: int = 128  # disclosed tail bits of the amplified key
    hash_width: int = 128  # truncated digest width in bits
    master_seed: int = 0

    def __post_init__(self):
        if self.n_raw < 1:
            raise ValueError("n_raw must be at least 1")
        if not 0.0 <= self.qber <= 1.0:
            raise ValueError("qber must lie in [0, 1]")
        if not 0.0 < self.sample_fraction < 1.0:
            raise ValueError("sample_fraction must lie strictly between 0 and 1")
        if not 0.0 <= self.abort_threshold <= 1.0:
            raise ValueError("abort_threshold must lie in [0, 1]")
        if not 0 <= self.tail_len < self.key_len:
            raise ValueError("tail_len must satisfy 0 <= tail_len < key_len")
        if not 1 <= self.hash_width <= 256:
            raise ValueError("hash_width must lie in [1, 256]")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")


@dataclass
class PartyState:
    """Everything one party accumulates over a session.

    sifted starts as the key after basis reconciliation and, once error
    estimation has run, has the disclosed sample positions removed.
    sifted_bases keeps the basis of every sifted bit (pre-removal), which
    is what the protocol-log extract discloses; est_positions index into
    that pre-removal sequence, corrected_positions into the post-removal
    one.
    """

    role: str
    raw_bits: BitVector
    bases: BitVector
    sifted: BitVector | None = None
    sifted_bases: BitVector | None = None
    est_positions: list[int] | None = None
    est_rate: Fraction | None = None
    corrected_positions: list[int] | None = None
    reconciled: BitVector | None = None
    pa_matrix: BitMatrix | None = None
    full_key: BitVector | None = None
    final_key: BitVector | None = None
    key_tail: BitVector | None = None

    def to_json_dict(self) -> dict:
        def vec(v):
            return None if v is None else v.to_hex()

        return {
            "role": self.role,
            "raw_bits": vec(self.raw_bits),
            "bases": vec(self.bases),
            "sifted": vec(self.sifted),
            "sifted_bases": vec(self.sifted_bases),
            "est_positions": self.est_positions,
            "est_rate": None
            if self.est_rate is None
            else f"{self.est_rate.numerator}/{self.est_rate.denominator}",
            "corrected_positions": self.corrected_positions,
            "reconciled": vec(self.reconciled),
            "pa_matrix": None if self.pa_matrix is None else self.pa_matrix.to_hex().split("\n"),
            "full_key": vec(self.full_key),
            "final_key": vec(self.final_key),
            "key_tail": vec(self.key_tail),
        }


@dataclass(frozen=True)
class ProtocolLogExtract:
    """The authenticated extract of a party's protocol log.

    Contains the basis of each sifted bit, the positions disclosed during
    error estimation, the estimated error rate, the positions corrected by
    reconciliation and the tail of the amplified key (which both parties
    subsequently discard). The amplification matrix itself is embedded only
    in matrix_in_log mode.
    """

    sifted_bases: BitVector
    est_positions: tuple[int, ...]
    est_rate: Fraction
    corrected_positions: tuple[int, ...]
    key_tail: BitVector
    matrix_included: BitMatrix | None = None


@dataclass(frozen=True)
class AuthTag:
    digest: bytes  # truncated hash of the serialized log extract
    mac: bytes  # binds digest under the pre-shared authentication key

    def to_json_dict(self) -> dict:
        return {"digest": self.digest.hex(), "mac": self.mac.hex()}


@dataclass(frozen=True)
class EstimationResult:
    rate: Fraction
    positions: tuple[int, ...]
    disclosed_values: BitVector  # Alice's bits at the disclosed positions
    abort: bool


@dataclass(frozen=True)
class PartyOutcome:
    verdict: Verdict
    released_key: BitVector | None  # populated only on ACCEPT
    state: PartyState  # ground truth, for analysis only


@dataclass(frozen=True)
class SessionResult:
    alice: PartyOutcome
    bob: PartyOutcome
    channel: Channel


# ------------------------------------------------------------------ stages


def source_correlated(params: SessionParams, rng: np.random.Generator) -> tuple[PartyState, PartyState]:
    """Model the quantum phase: correlated raw bits plus random bases.

    Where the bases match, Bob's bit equals Alice's flipped with
    probability qber; elsewhere his outcome is an independent fair bit.
    """
    n = params.n_raw
    alice_bits = BitVector.random(n, rng)
    alice_bases = BitVector.random(n, rng)
    bob_bases = BitVector.random(n, rng)
    matched = alice_bases.to_array() == bob_bases.to_array()
    noise = (rng.random(n) < params.qber).astype(np.uint8)
    fresh = rng.integers(0, 2, n, dtype=np.uint8)
    bob_arr = np.where(matched, alice_bits.to_array() ^ noise, fresh)
    alice = PartyState(role="A", raw_bits=alice_bits, bases=alice_bases)
    bob = PartyState(role="B", raw_bits=BitVector.from_array(bob_arr), bases=bob_bases)
    return alice, bob


def sift(state: PartyState, peer_bases: BitVector) -> None:
    """Keep exactly the positions where both parties measured in the same basis."""
    if len(peer_bases) != len(state.bases):
        raise ValueError(
            f"length mismatch: peer bases {len(peer_bases)} vs own {len(state.bases)}"
        )
    own = state.bases.to_array()
    keep = own == peer_bases.to_array()
    state.sifted = BitVector.from_array(state.raw_bits.to_array()[keep])
    state.sifted_bases = BitVector.from_array(own[keep])


def estimate_error(
    alice: PartyState, bob: PartyState, params: SessionParams, rng: np.random.Generator
) -> EstimationResult:
    """Disclose a random sample of the sifted key and estimate the error rate.

    ceil(sample_fraction * len) positions are drawn without replacement,
    compared, removed from both parties' working keys, and recorded. The
    session aborts iff the observed rate exceeds abort_threshold.
    """
    if alice.sifted is None or bob.sifted is None:
        raise ProtocolError("missing pipeline stage: sift before error estimation")
    n = len(alice.sifted)
    if n == 0:
        raise ValueError("empty sifted key: no matching-basis positions to sample")
    k = math.ceil(params.sample_fraction * n)
    positions = np.sort(rng.choice(n, size=k, replace=False))
    a = alice.sifted.to_array()
    b = bob.sifted.to_array()
    mismatches = int((a[positions] != b[positions]).sum())
    rate = Fraction(mismatches, k)
    disclosed = BitVector.from_array(a[positions])
    keep = np.ones(n, dtype=bool)
    keep[positions] = False
    pos_list = [int(p) for p in positions]
    for state, arr in ((alice, a), (bob, b)):
        state.est_positions = pos_list
        state.est_rate = rate
        state.sifted = BitVector.from_array(arr[keep])
    return EstimationResult(
        rate=rate,
        positions=tuple(pos_list),
        disclosed_values=disclosed,
        abort=rate > params.abort_threshold,
    )


def reconcile(alice: PartyState, bob: PartyState) -> list[int]:
    """Idealized error correction: flip exactly Bob's differing bits.

    Stands in for a real reconciliation protocol; the corrected positions
    are exact and end up in both protocol logs.
    """
    if alice.est_rate is None or bob.est_rate is None:
        raise ProtocolError("missing pipeline stage: error estimation before reconciliation")
    a = alice.sifted.to_array()
    b = bob.sifted.to_array()
    diff = np.nonzero(a != b)[0]
    positions = [int(p) for p in diff]
    b[diff] ^= 1
    alice.reconciled = alice.sifted
    bob.reconciled = BitVector.from_array(b)
    alice.corrected_positions = positions
    bob.corrected_positions = positions
    return positions


def privacy_amplify(state: PartyState, matrix: BitMatrix, params: SessionParams) -> None:
    """Amplify: full_key = matrix * reconciled, then split off the tail.

    The first key_len - tail_len bits form the final key; the last
    tail_len bits are the disclosed tail that goes into the protocol log.
    """
    if state.reconciled is None:
        raise ProtocolError("missing pipeline stage: reconciliation before amplification")
    if matrix.rows != params.key_len:
        raise ValueError(
            f"dimension mismatch: matrix has {matrix.rows} rows, key_len is {params.key_len}"
        )
    full = matvec(matrix, state.reconciled)
    state.pa_matrix = matrix
    state.full_key = full
    state.final_key = full.first(params.key_len - params.tail_len)
    state.key_tail = full.last(params.tail_len)


def build_log_extract(state: PartyState, hardening: HardeningMode | None = None) -> ProtocolLogExtract:
    """Assemble the party's protocol-log extract from its state."""
    missing = [
        name
        for name, value in (
            ("sift", state.sifted_bases),
            ("error estimation", state.est_rate),
            ("reconciliation", state.corrected_positions),
            ("privacy amplification", state.key_tail),
        )
        if value is None
    ]
    if missing:
        raise ProtocolError(f"missing pipeline stage: {missing[0]} before log extraction")
    log = ProtocolLogExtract(
        sifted_bases=state.sifted_bases,
        est_positions=tuple(state.est_positions),
        est_rate=state.est_rate,
        corrected_positions=tuple(state.corrected_positions),
        key_tail=state.key_tail,
    )
    if hardening is not None and hardening.kind is HardeningKind.MATRIX_IN_LOG:
        log = embed_matrix_in_log(log, state.pa_matrix, hardening)
    return log


# ------------------------------------------------- serialization and auth


def _u32(x: int) -> bytes:
    return struct.pack(">I", x)


def vec_field(v: BitVector) -> bytes:
    return _u32(v.n) + v.to_bytes_msb()


def pos_field(positions: Sequence[int]) -> bytes:
    return _u32(len(positions)) + b"".join(_u32(p) for p in positions)


def rate_field(rate: Fraction) -> bytes:
    return _u32(rate.numerator) + _u32(rate.denominator)


def matrix_field(matrix: BitMatrix | None) -> bytes:
    if matrix is None:
        return b"\x00"
    return b"\x01" + _u32(matrix.rows) + _u32(matrix.cols) + matrix.to_bytes_msb()


def serialize_log(log: ProtocolLogExtract) -> bytes:
    """Canonical byte serialization: fixed field order, big-endian counts."""
    return b"".join(
        (
            vec_field(log.sifted_bases),
            pos_field(log.est_positions),
            rate_field(log.est_rate),
            pos_field(log.corrected_positions),
            vec_field(log.key_tail),
            matrix_field(log.matrix_included),
        )
    )


def truncate_digest(digest: bytes, width: int) -> bytes:
    """First `width` bits of a digest, zero-padded to whole bytes."""
    nbytes = (width + 7) // 8
    out = bytearray(digest[:nbytes])
    if width % 8:
        out[-1] &= 0xFF << (8 - width % 8) & 0xFF
    return bytes(out)


def log_digest(log: ProtocolLogExtract, hash_width: int) -> bytes:
    return truncate_digest(hashlib.sha256(serialize_log(log)).digest(), hash_width)


def mac_digest(auth_key: bytes, digest: bytes) -> bytes:
    return hmac_mod.new(auth_key, digest, hashlib.sha256).digest()


def authenticate(log: ProtocolLogExtract, auth_key: bytes, hash_width: int) -> AuthTag:
    """Hash the serialized log extract, truncate, MAC the digest.

    The MAC is unforgeable for fresh digests, but a captured (digest, mac)
    pair verifies against any log whose extract hashes to the same digest.
    """
    digest = log_digest(log, hash_width)
    return AuthTag(digest=digest, mac=mac_digest(auth_key, digest))


def verify(log: ProtocolLogExtract, tag: AuthTag, auth_key: bytes, hash_width: int) -> bool:
    """Accept iff the recomputed digest matches and the MAC binds it."""
    if not hmac_mod.compare_digest(mac_digest(auth_key, tag.digest), tag.mac):
        return False
    return hmac_mod.compare_digest(log_digest(log, hash_width), tag.digest)


# ----------------------------------------------------------------- session


def session_auth_key(params: SessionParams) -> bytes:
    """Pre-shared authentication key, provisioned before the session."""
    return derive_bytes(params.master_seed, "auth-key", n=32)


def session_derivation_secret(params: SessionParams) -> bytes:
    """Pre-provisioned shared secret for derived_matrix mode."""
    return derive_bytes(params.master_seed, "pa-derivation-secret", n=32)


def run_session(
    params: SessionParams,
    channel: Channel | None = None,
    hardening: HardeningMode | None = None,
    auth_key: bytes | None = None,
) -> SessionResult:
    """Run one full session between honest parties over the given channel.

    Every classical message passes through the channel in the fixed order
    documented in the module docstring; the installed strategy may tamper
    with frames in flight. Final keys are released only on ACCEPT.
    auth_key overrides the pre-shared authentication key (by default it is
    provisioned deterministically from the master seed).
    """
    if channel is None:
        channel = Channel()
    if hardening is None:
        hardening = HardeningMode()
    rng = make_rng(params.master_seed, "session")

    alice, bob = source_correlated(params, rng)

    bases_ab = channel.deliver(A_TO_B, Frame(FrameType.BASES, alice.bases)).payload
    bases_ba = channel.deliver(B_TO_A, Frame(FrameType.BASES, bob.bases)).payload
    sift(alice, bases_ba)
    sift(bob, bases_ab)

    est = estimate_error(alice, bob, params, rng)
    channel.deliver(A_TO_B, Frame(FrameType.EST_POSITIONS, list(est.positions)))
    channel.deliver(A_TO_B, Frame(FrameType.EST_VALUES, est.disclosed_values))
    channel.deliver(B_TO_A, Frame(FrameType.EST_RATE, est.rate))
    if est.abort:
        return SessionResult(
            alice=PartyOutcome(Verdict.ABORT, None, alice),
            bob=PartyOutcome(Verdict.ABORT, None, bob),
            channel=channel,
        )

    corrected = reconcile(alice, bob)
    channel.deliver(A_TO_B, Frame(FrameType.CORRECTIONS, corrected))
    channel.notify_reconciled(alice.reconciled)

    key_len_in = len(alice.reconciled)
    if hardening.kind is HardeningKind.DERIVED_MATRIX:
        secret = hardening.derivation_seed_source or session_derivation_secret(params)
        matrix_a = derive_matrix(secret, params.key_len, key_len_in)
        matrix_b = derive_matrix(secret, params.key_len, key_len_in)
    else:
        matrix_a = random_matrix(params.key_len, key_len_in, rng)
        matrix_b = channel.deliver(A_TO_B, Frame(FrameType.PA_MATRIX, matrix_a)).payload
    privacy_amplify(alice, matrix_a, params)
    privacy_amplify(bob, matrix_b, params)

    log_a = build_log_extract(alice, hardening)
    log_b = build_log_extract(bob, hardening)
    if auth_key is None:
        auth_key = session_auth_key(params)
    tag_a = channel.deliver(
        A_TO_B, Frame(FrameType.AUTH_TAG_A, authenticate(log_a, auth_key, params.hash_width))
    ).payload
    tag_b = channel.deliver(
        B_TO_A, Frame(FrameType.AUTH_TAG_B, authenticate(log_b, auth_key, params.hash_width))
    ).payload
    bob_ok = verify(log_b, tag_a, auth_key, params.hash_width)
    alice_ok = verify(log_a, tag_b, auth_key, params.hash_width)

    def outcome(ok: bool, state: PartyState) -> PartyOutcome:
        return PartyOutcome(
            verdict=Verdict.ACCEPT if ok else Verdict.REJECT,
            released_key=state.final_key if ok else None,
            state=state,
        )

    return SessionResult(alice=outcome(alice_ok, alice), bob=outcome(bob_ok, bob), channel=channel)
