"""Attacks against the post-processing authentication layer.

The frame attacks all exploit the same blind spot: the baseline
protocol-log extract sees the amplification matrix only through the key
tail, i.e. through its last tail_len rows. Tampering with any earlier row
changes the distributed keys without changing either party's log, so
authentication cannot notice it.

The collision attack targets the matrix_in_log hardened variant instead:
a captured (digest, mac) pair is replayed after searching for a matrix
whose induced log extract hashes to the captured digest.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace as dc_replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .channel import A_TO_B, AttackStrategy, Channel, Frame, FrameType
from .gf2 import BitMatrix, BitVector, matvec, pack_bits_msb, replace_rows
from .gf2 import flip_entry as gf2_flip_entry
from .hardening import HardeningKind, HardeningMode
from .pipeline import (
    AuthTag,
    PartyState,
    SessionParams,
    SessionResult,
    Verdict,
    build_log_extract,
    estimate_error,
    matrix_field,
    pos_field,
    privacy_amplify,
    rate_field,
    reconcile,
    run_session,
    serialize_log,
    session_auth_key,
    sift,
    source_correlated,
    vec_field,
    verify,
)
from .seeding import derive_bytes, make_rng


@dataclass
class AttackOutcome:
    """Raw facts about one attacked session, used to judge success.

    learned_bits holds (key index, predicted bit, actual bit) triples for
    attacks that extract key material. Fields that do not apply to a given
    strategy stay None.
    """

    keys_differ: bool | None = None
    alice_verdict: Verdict | None = None
    bob_verdict: Verdict | None = None
    learned_bits: list[tuple[int, int, int]] | None = None
    impersonation_accepted: bool | None = None
    plaintext_tamper_effect: tuple[BitVector, BitVector] | None = None


# ------------------------------------------------------------- frame attacks


def _require_matrix(frame: Frame) -> BitMatrix:
    if frame.kind is not FrameType.PA_MATRIX:
        raise ValueError(f"attack operates on PA_MATRIX frames, got {frame.kind.value}")
    return frame.payload


def attack_randomize_rows(frame: Frame, r: int, tail_len: int, rng: np.random.Generator) -> Frame:
    """Replace the first r non-tail rows with fresh random rows.

    r=0 is a no-op: the frame passes through untouched (honest outcome).
    """
    m = _require_matrix(frame)
    if not 0 <= r <= m.rows - tail_len:
        raise ValueError(
            f"can randomize at most {m.rows - tail_len} rows without touching the tail, got {r}"
        )
    if r == 0:
        return frame
    tampered = replace_rows(m, 0, r, lambda: BitVector.random(m.cols, rng))
    return Frame(frame.kind, tampered)


def attack_flip_entry(frame: Frame, i: int, j: int, tail_len: int) -> Frame:
    """Flip matrix entry (i, j); the row must lie outside the logged tail."""
    m = _require_matrix(frame)
    if not 0 <= i < m.rows - tail_len:
        raise ValueError(
            f"flip row must lie in [0, {m.rows - tail_len}), row {i} would perturb the "
            "authenticated tail and be detected"
        )
    return Frame(frame.kind, gf2_flip_entry(m, i, j))


def attack_zero_rows(frame: Frame, tail_len: int) -> Frame:
    """Zero every non-tail row, forcing the receiver's final key to all-zero."""
    m = _require_matrix(frame)
    tampered = replace_rows(m, 0, m.rows - tail_len, lambda: BitVector.zeros(m.cols))
    return Frame(frame.kind, tampered)


def attack_extract_bits(
    frame: Frame, known: Sequence[tuple[int, int]], target_row: int, tail_len: int
) -> tuple[Frame, int]:
    """Overwrite one non-tail row with the indicator of known key positions.

    The receiver's key bit target_row becomes the parity of the known
    reconciled-key bits, so the attacker predicts it exactly.
    """
    m = _require_matrix(frame)
    if not 0 <= target_row < m.rows - tail_len:
        raise ValueError(
            f"target row must lie in [0, {m.rows - tail_len}), row {target_row} is in the tail"
        )
    if not known:
        raise ValueError("need at least one known (position, bit) pair")
    indicator = BitVector.from_positions(m.cols, [p for p, _ in known])
    prediction = 0
    for _, bit in known:
        prediction ^= bit
    return Frame(frame.kind, m.with_row(target_row, indicator)), prediction


class RandomizeRowsStrategy(AttackStrategy):
    name = "randomize-rows"

    def __init__(self, r: int, tail_len: int, rng: np.random.Generator):
        self.r = r
        self.tail_len = tail_len
        self.rng = rng

    def tamper(self, direction: str, frame: Frame) -> Frame:
        if direction == A_TO_B and frame.kind is FrameType.PA_MATRIX:
            return attack_randomize_rows(frame, self.r, self.tail_len, self.rng)
        return frame


class FlipEntryStrategy(AttackStrategy):
    name = "flip-entry"

    def __init__(self, i: int, j: int, tail_len: int):
        self.i = i
        self.j = j
        self.tail_len = tail_len

    def tamper(self, direction: str, frame: Frame) -> Frame:
        if direction == A_TO_B and frame.kind is FrameType.PA_MATRIX:
            return attack_flip_entry(frame, self.i, self.j, self.tail_len)
        return frame


class ZeroRowsStrategy(AttackStrategy):
    name = "zero-rows"

    def __init__(self, tail_len: int):
        self.tail_len = tail_len

    def tamper(self, direction: str, frame: Frame) -> Frame:
        if direction == A_TO_B and frame.kind is FrameType.PA_MATRIX:
            return attack_zero_rows(frame, self.tail_len)
        return frame


class ExtractBitsStrategy(AttackStrategy):
    """Learn one bit of the receiver's key from known reconciled-key bits.

    known_positions may be given explicitly; otherwise num_known positions
    are drawn once the reconciled key length is known. The simulation
    injects the actual bit values through observe_reconciled, standing in
    for whatever side channel gave the attacker that partial knowledge.
    """

    name = "extract-bits"

    def __init__(
        self,
        target_row: int,
        tail_len: int,
        rng: np.random.Generator,
        known_positions: Sequence[int] | None = None,
        num_known: int | None = None,
    ):
        if (known_positions is None) == (num_known is None):
            raise ValueError("give exactly one of known_positions or num_known")
        if num_known is not None and num_known < 1:
            raise ValueError("num_known must be at least 1")
        self.target_row = target_row
        self.tail_len = tail_len
        self.rng = rng
        self.known_positions = None if known_positions is None else sorted(known_positions)
        self.num_known = num_known
        self.known: list[tuple[int, int]] | None = None
        self.prediction: int | None = None

    def observe_reconciled(self, reconciled: BitVector) -> None:
        if self.known_positions is not None:
            positions = self.known_positions
        else:
            if self.num_known > len(reconciled):
                raise ValueError(
                    f"cannot know {self.num_known} bits of a {len(reconciled)}-bit key"
                )
            positions = sorted(
                int(p) for p in self.rng.choice(len(reconciled), self.num_known, replace=False)
            )
        self.known = [(p, reconciled[p]) for p in positions]

    def tamper(self, direction: str, frame: Frame) -> Frame:
        if direction == A_TO_B and frame.kind is FrameType.PA_MATRIX:
            if self.known is None:
                raise RuntimeError("reconciled-key knowledge not injected before matrix frame")
            out, self.prediction = attack_extract_bits(
                frame, self.known, self.target_row, self.tail_len
            )
            return out
        return frame


# ------------------------------------------------------ collision/replay


@dataclass(frozen=True)
class CollisionSearchView:
    """The attacker's view of the Bob-facing session before the matrix is sent.

    Impersonating Alice, the attacker has taken part in sifting, estimation
    and reconciliation, so every log-extract field except the key tail and
    the embedded matrix is already fixed and known, as is Bob's reconciled
    key (it equals the attacker's own).
    """

    sifted_bases: BitVector
    est_positions: tuple[int, ...]
    est_rate: Fraction
    corrected_positions: tuple[int, ...]
    reconciled: BitVector
    key_len: int
    tail_len: int
    hash_width: int

    @classmethod
    def from_state(cls, state: PartyState, params: SessionParams) -> "CollisionSearchView":
        return cls(
            sifted_bases=state.sifted_bases,
            est_positions=tuple(state.est_positions),
            est_rate=state.est_rate,
            corrected_positions=tuple(state.corrected_positions),
            reconciled=state.reconciled,
            key_len=params.key_len,
            tail_len=params.tail_len,
            hash_width=params.hash_width,
        )


@dataclass(frozen=True)
class CollisionSearchResult:
    matrix: BitMatrix | None
    candidates_examined: int


_SEARCH_CHUNK = 4096  # candidates drawn per rng.bytes call


def attack_collision_impersonate(
    captured_digest: bytes,
    view: CollisionSearchView,
    budget: int,
    rng: np.random.Generator,
) -> CollisionSearchResult:
    """Search for a matrix whose induced log extract hashes to captured_digest.

    Only the tail rows and the embedded matrix bytes influence the digest,
    so candidates keep every row except the last at zero and vary 128
    pseudo-random bits of the last row. The hash state over all fixed bytes
    is computed once per possible tail value and per-candidate work is a
    small incremental update, which keeps million-candidate budgets cheap.
    """
    if budget < 1:
        raise ValueError("search budget must be at least 1")
    l, t, w = view.key_len, view.tail_len, view.hash_width
    if t < 1:
        raise ValueError("collision search requires at least one tail row in the log")
    cols = len(view.reconciled)
    if cols < 1:
        raise ValueError("empty reconciled key")
    row_bytes = (cols + 7) // 8

    var_bits = min(128, cols)
    shift = cols - var_bits
    p0 = (shift // 8) * 8  # candidate-dependent suffix of the row starts here
    suffix_bits = cols - p0
    sub_shift = shift - p0
    var_mask = (1 << var_bits) - 1

    head = (
        vec_field(view.sifted_bases)
        + pos_field(view.est_positions)
        + rate_field(view.est_rate)
        + pos_field(view.corrected_positions)
    )
    matrix_head = b"\x01" + l.to_bytes(4, "big") + cols.to_bytes(4, "big")
    fixed_matrix_bytes = bytes(row_bytes * (l - 1) + (p0 // 8))

    # With rows 0..l-2 all zero the only live tail bit is the last one,
    # whose value is the candidate row's parity against the reconciled key.
    states = []
    for bit in (0, 1):
        tail_vec = BitVector(t, bit << (t - 1))
        h = hashlib.sha256()
        h.update(head)
        h.update(vec_field(tail_vec))
        h.update(matrix_head)
        h.update(fixed_matrix_bytes)
        states.append(h)

    ktop = view.reconciled.value >> shift
    nb = (w + 7) // 8
    rem = w % 8
    if rem:
        last_mask = (0xFF << (8 - rem)) & 0xFF
        target_head, target_last = captured_digest[: nb - 1], captured_digest[nb - 1]
    examined = 0
    while examined < budget:
        todo = min(_SEARCH_CHUNK, budget - examined)
        buf = rng.bytes(16 * todo)
        for o in range(0, 16 * todo, 16):
            r = int.from_bytes(buf[o : o + 16], "big") & var_mask
            parity = (r & ktop).bit_count() & 1
            h = states[parity].copy()
            h.update(pack_bits_msb(r << sub_shift, suffix_bits))
            d = h.digest()
            examined += 1
            if rem:
                hit = d[: nb - 1] == target_head and (d[nb - 1] & last_mask) == target_last
            else:
                hit = d[:nb] == captured_digest[:nb]
            if hit:
                matrix = BitMatrix((0,) * (l - 1) + (r << shift,), cols)
                return CollisionSearchResult(matrix, examined)
    return CollisionSearchResult(None, examined)


@dataclass(frozen=True)
class CollisionTrialOutcome:
    """One full impersonation attempt: capture, search, replay."""

    found: bool
    candidates_examined: int
    bob_verdict: Verdict
    impersonation_accepted: bool
    attacker_key: BitVector | None  # key the attacker shares with Bob on success
    bob_key: BitVector | None
    aborted: bool = False


def run_collision_impersonation(
    params: SessionParams, hardening: HardeningMode, budget: int
) -> CollisionTrialOutcome:
    """Play the full replay attack against the matrix_in_log variant.

    First the attacker completes an exchange with Alice in Bob's role and
    captures her authentication tag (that session is then dropped, so Alice
    never accepts). Then the attacker starts a fresh exchange with Bob in
    Alice's role, runs it honestly up to the matrix message, searches for a
    matrix that reproduces the captured digest over Bob's log extract, and
    replays the captured tag with it.
    """
    if hardening.kind is not HardeningKind.MATRIX_IN_LOG:
        raise ValueError("the replay attack targets the matrix_in_log variant")
    # Pre-shared Alice/Bob authentication key, common to both exchanges.
    auth_key = session_auth_key(params)

    capture_seed = int.from_bytes(derive_bytes(params.master_seed, "capture-session", n=8), "big")
    capture = run_session(
        dc_replace(params, master_seed=capture_seed), hardening=hardening, auth_key=auth_key
    )
    if capture.alice.verdict is Verdict.ABORT:
        return CollisionTrialOutcome(False, 0, Verdict.ABORT, False, None, None, aborted=True)
    captured_tag: AuthTag = capture.channel.frames(FrameType.AUTH_TAG_A)[0].frame.payload

    # Fresh exchange with the real Bob, attacker in Alice's role.
    session_seed = int.from_bytes(
        derive_bytes(params.master_seed, "impersonation-session", n=8), "big"
    )
    rng = make_rng(session_seed, "session")
    attacker, bob = source_correlated(params, rng)
    sift(attacker, bob.bases)
    sift(bob, attacker.bases)
    est = estimate_error(attacker, bob, params, rng)
    if est.abort:
        return CollisionTrialOutcome(False, 0, Verdict.ABORT, False, None, None, aborted=True)
    reconcile(attacker, bob)

    view = CollisionSearchView.from_state(attacker, params)
    search_rng = make_rng(params.master_seed, "collision-search")
    search = attack_collision_impersonate(captured_tag.digest, view, budget, search_rng)
    if search.matrix is None:
        # Nothing to send that Bob would accept; the attacker gives up.
        return CollisionTrialOutcome(False, search.candidates_examined, Verdict.REJECT, False, None, None)

    privacy_amplify(bob, search.matrix, params)
    log_b = build_log_extract(bob, hardening)
    accepted = verify(log_b, captured_tag, auth_key, params.hash_width)
    bob_verdict = Verdict.ACCEPT if accepted else Verdict.REJECT
    attacker_key = matvec(search.matrix, attacker.reconciled).first(params.key_len - params.tail_len)
    return CollisionTrialOutcome(
        found=True,
        candidates_examined=search.candidates_examined,
        bob_verdict=bob_verdict,
        impersonation_accepted=accepted,
        attacker_key=attacker_key,
        bob_key=bob.final_key,
    )


# ------------------------------------------------------------ one-time pad


def otp_encrypt(plaintext: BitVector, pad: BitVector) -> BitVector:
    """One-time-pad encryption; the pad is key material of equal length."""
    if len(pad) != len(plaintext):
        raise ValueError(f"length mismatch: plaintext {len(plaintext)} vs pad {len(pad)}")
    return plaintext ^ pad


otp_decrypt = otp_encrypt  # XOR is its own inverse


def demo_otp_malleability(ciphertext: BitVector, bit_positions: Sequence[int]) -> BitVector:
    """Flip the given ciphertext bits; decryption flips exactly those
    plaintext bits, without the attacker touching the key."""
    indicator = BitVector.from_positions(len(ciphertext), bit_positions)
    return ciphertext ^ indicator
