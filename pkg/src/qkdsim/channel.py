"""Classical channel between the two parties.

Every message of the post-processing phase crosses this channel as a tagged
frame. The channel records each delivered frame in an ordered transcript
together with a flag saying whether the installed strategy modified it in
flight, which is what the analysis code and the attacks operate on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .gf2 import BitMatrix, BitVector

A_TO_B = "A->B"
B_TO_A = "B->A"


class FrameType(str, Enum):
    BASES = "BASES"
    EST_POSITIONS = "EST_POSITIONS"
    EST_VALUES = "EST_VALUES"
    EST_RATE = "EST_RATE"
    CORRECTIONS = "CORRECTIONS"
    PA_MATRIX = "PA_MATRIX"
    AUTH_TAG_A = "AUTH_TAG_A"
    AUTH_TAG_B = "AUTH_TAG_B"


@dataclass(frozen=True)
class Frame:
    kind: FrameType
    payload: object


@dataclass(frozen=True)
class TranscriptEntry:
    direction: str
    frame: Frame
    tampered: bool


class AttackStrategy:
    """Base strategy: forward every frame untouched (a passive wiretap).

    Active strategies override tamper and must return either the original
    frame object (meaning "not modified") or a new Frame. observe_reconciled
    is the simulation's knowledge-injection hook: it hands the strategy the
    ground-truth reconciled key at the moment a real attacker sitting on the
    channel would know the corresponding side information.
    """

    name = "passive"

    def tamper(self, direction: str, frame: Frame) -> Frame:
        return frame

    def observe_reconciled(self, reconciled: BitVector) -> None:
        pass


class Channel:
    def __init__(self, strategy: AttackStrategy | None = None):
        self.strategy = strategy if strategy is not None else AttackStrategy()
        self.transcript: list[TranscriptEntry] = []

    def deliver(self, direction: str, frame: Frame) -> Frame:
        """Pass a frame through the strategy and record what came out."""
        out = self.strategy.tamper(direction, frame)
        self.transcript.append(TranscriptEntry(direction, out, out is not frame))
        return out

    def notify_reconciled(self, reconciled: BitVector) -> None:
        self.strategy.observe_reconciled(reconciled)

    def frames(self, kind: FrameType) -> list[TranscriptEntry]:
        return [e for e in self.transcript if e.frame.kind is kind]

    def count(self, kind: FrameType) -> int:
        return sum(1 for e in self.transcript if e.frame.kind is kind)

    def transcript_json(self) -> str:
        entries = [
            {
                "direction": e.direction,
                "kind": e.frame.kind.value,
                "tampered": e.tampered,
                "payload": render_payload(e.frame.payload),
            }
            for e in self.transcript
        ]
        return json.dumps(entries, indent=2)


def render_payload(payload: object) -> object:
    """JSON-friendly view of a frame payload."""
    if isinstance(payload, BitVector):
        return payload.to_hex()
    if isinstance(payload, BitMatrix):
        return payload.to_hex().split("\n")
    if isinstance(payload, Fraction):
        return f"{payload.numerator}/{payload.denominator}"
    if isinstance(payload, (list, tuple)):
        return [render_payload(p) for p in payload]
    if isinstance(payload, bytes):
        return payload.hex()
    if hasattr(payload, "to_json_dict"):
        return payload.to_json_dict()
    return payload
