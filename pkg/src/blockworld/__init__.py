"""Voxel building-game platform: deterministic world, action tapes, dataset
tools, evaluation metrics, and a turn-based game server with an agent
toolkit."""

from .world import (
    Avatar,
    BlockGrid,
    BreakBlock,
    Coord,
    GridDelta,
    Jump,
    Move,
    PlaceBlock,
    SetLook,
    WorldState,
    apply_action,
    diff,
    in_bounds,
    place_block,
    remove_block,
)
from .tape import Tape, parse_tape, replay, serialize_tape, verify_builder_record
from .metrics import (
    BinaryOutcome,
    GameOutcome,
    RankedPool,
    ScoreReport,
    argmax_intersection,
    grid_f1,
    macro_f1,
    mrr,
    tally_human_eval,
    weighted_average,
)
from .taxonomy import StructureLabels, classify
from .palette import Palette

__all__ = [
    "Avatar",
    "BinaryOutcome",
    "BlockGrid",
    "BreakBlock",
    "Coord",
    "GameOutcome",
    "GridDelta",
    "Jump",
    "Move",
    "Palette",
    "PlaceBlock",
    "RankedPool",
    "ScoreReport",
    "SetLook",
    "StructureLabels",
    "Tape",
    "WorldState",
    "apply_action",
    "argmax_intersection",
    "classify",
    "diff",
    "grid_f1",
    "in_bounds",
    "macro_f1",
    "mrr",
    "parse_tape",
    "place_block",
    "remove_block",
    "replay",
    "serialize_tape",
    "tally_human_eval",
    "verify_builder_record",
    "weighted_average",
]
