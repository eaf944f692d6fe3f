"""Simulator for QKD classical post-processing and attacks on its authentication layer."""

from .adversary import (
    AttackOutcome,
    CollisionTrialOutcome,
    ExtractBitsStrategy,
    FlipEntryStrategy,
    RandomizeRowsStrategy,
    ZeroRowsStrategy,
    attack_collision_impersonate,
    demo_otp_malleability,
    otp_decrypt,
    otp_encrypt,
    run_collision_impersonation,
)
from .channel import AttackStrategy, Channel, Frame, FrameType
from .gf2 import BitMatrix, BitVector, flip_entry, matvec, random_matrix, replace_rows
from .hardening import HardeningKind, HardeningMode, derive_matrix
from .pipeline import (
    ProtocolError,
    SessionParams,
    SessionResult,
    Verdict,
    run_session,
)
from .scenarios import (
    AttackSpec,
    BatchSummary,
    BUILTIN_SCENARIOS,
    Check,
    ConfigError,
    ScenarioConfig,
    TrialReport,
    builtin_scenario,
    run_scenario,
    sweep,
)

__all__ = [
    "AttackOutcome",
    "AttackSpec",
    "AttackStrategy",
    "BatchSummary",
    "BitMatrix",
    "BitVector",
    "BUILTIN_SCENARIOS",
    "Channel",
    "Check",
    "CollisionTrialOutcome",
    "ConfigError",
    "ExtractBitsStrategy",
    "FlipEntryStrategy",
    "Frame",
    "FrameType",
    "HardeningKind",
    "HardeningMode",
    "ProtocolError",
    "RandomizeRowsStrategy",
    "ScenarioConfig",
    "SessionParams",
    "SessionResult",
    "TrialReport",
    "Verdict",
    "ZeroRowsStrategy",
    "attack_collision_impersonate",
    "builtin_scenario",
    "demo_otp_malleability",
    "derive_matrix",
    "flip_entry",
    "matvec",
    "otp_decrypt",
    "otp_encrypt",
    "random_matrix",
    "replace_rows",
    "run_collision_impersonation",
    "run_scenario",
    "run_session",
    "sweep",
]
