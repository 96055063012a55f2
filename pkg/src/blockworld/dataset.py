"""Record ingestion, cleaning, corpus statistics, and clarifying-question
categorization.

Input files follow the collection schemas: field names are bit-exact
(gameId, stepId, avatarInfo, worldEndingState, tape, clarification_question,
command). A file may hold a single record object, a JSON array, or JSON
lines. Records may carry optional enrichment fields this module understands:
annotatorId, timestamp (epoch seconds), split ("train"/"test"), structureId,
completed, and clear (builder-side "was the instruction clear" mark).
"""
from __future__ import annotations

import json
import statistics
import string
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from . import tape as tapemod
from .world import GROUND_Y, Avatar, BlockGrid, RuleViolation

PERSPECTIVES = ("north", "south", "east", "west", "top")

ARCHITECT = "architect"
BUILDER = "builder"


class SchemaError(Exception):
    def __init__(self, index: int, field_name: str, reason: str = ""):
        detail = f"record {index}: bad field {field_name!r}"
        if reason:
            detail += f" ({reason})"
        super().__init__(detail)
        self.index = index
        self.field = field_name


@dataclass(frozen=True)
class ArchitectRecord:
    game_id: int
    step_id: int
    perspective: str
    command: str
    annotator_id: str | None = None
    timestamp: float | None = None
    split: str | None = None
    structure_id: str | None = None
    completed: bool = False

    def to_json(self) -> dict:
        out = {
            "gameId": self.game_id,
            "stepId": self.step_id,
            "avatarInfo": {"perspective": self.perspective},
            "command": self.command,
        }
        if self.annotator_id is not None:
            out["annotatorId"] = self.annotator_id
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        if self.split is not None:
            out["split"] = self.split
        if self.structure_id is not None:
            out["structureId"] = self.structure_id
        if self.completed:
            out["completed"] = True
        return out


@dataclass(frozen=True)
class BuilderRecord:
    game_id: int
    step_id: int
    avatar: Avatar
    world_ending_state: BlockGrid
    tape: tapemod.Tape
    clarification_question: str | None = None
    clear: bool | None = None
    annotator_id: str | None = None
    timestamp: float | None = None
    split: str | None = None
    structure_id: str | None = None

    @property
    def marked_ambiguous(self) -> bool:
        return self.clear is False or self.clarification_question is not None

    def to_json(self) -> dict:
        x, y, z = self.avatar.pos
        out = {
            "gameId": self.game_id,
            "stepId": self.step_id,
            "avatarInfo": {
                "pos": [x, y + GROUND_Y, z],
                "look": [self.avatar.pitch, self.avatar.yaw],
            },
            "worldEndingState": {"blocks": self.world_ending_state.to_blocks()},
            "tape": self.tape.lines(),
            "clarification_question": self.clarification_question,
        }
        if self.clear is not None:
            out["clear"] = self.clear
        if self.annotator_id is not None:
            out["annotatorId"] = self.annotator_id
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        if self.split is not None:
            out["split"] = self.split
        if self.structure_id is not None:
            out["structureId"] = self.structure_id
        return out


Record = Union[ArchitectRecord, BuilderRecord]


def _require(entry: dict, key: str, index: int):
    if key not in entry:
        raise SchemaError(index, key, "missing")
    return entry[key]


def _as_int(value, key: str, index: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(index, key, f"expected integer, got {value!r}")
    return value


def _parse_architect(entry: dict, index: int) -> ArchitectRecord:
    game_id = _as_int(_require(entry, "gameId", index), "gameId", index)
    step_id = _as_int(_require(entry, "stepId", index), "stepId", index)
    if step_id < 0:
        raise SchemaError(index, "stepId", "negative")
    avatar_info = _require(entry, "avatarInfo", index)
    if not isinstance(avatar_info, dict):
        raise SchemaError(index, "avatarInfo", "expected object")
    perspective = avatar_info.get("perspective")
    if perspective not in PERSPECTIVES:
        raise SchemaError(index, "avatarInfo.perspective", f"got {perspective!r}")
    command = _require(entry, "command", index)
    if not isinstance(command, str) or not command.strip():
        raise SchemaError(index, "command", "expected non-empty string")
    return ArchitectRecord(
        game_id=game_id,
        step_id=step_id,
        perspective=perspective,
        command=command,
        annotator_id=entry.get("annotatorId"),
        timestamp=entry.get("timestamp"),
        split=entry.get("split"),
        structure_id=entry.get("structureId"),
        completed=bool(entry.get("completed", False)),
    )


def _parse_question(raw) -> str | None:
    # collected exports encode an absent question as null or the string "null"
    if raw is None or raw == "null" or raw == "":
        return None
    return str(raw)


def _parse_builder(entry: dict, index: int) -> BuilderRecord:
    game_id = _as_int(_require(entry, "gameId", index), "gameId", index)
    step_id = _as_int(_require(entry, "stepId", index), "stepId", index)
    if step_id < 0:
        raise SchemaError(index, "stepId", "negative")
    avatar_info = _require(entry, "avatarInfo", index)
    try:
        px, py, pz = avatar_info["pos"]
        pitch, yaw = avatar_info["look"]
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(index, "avatarInfo", str(e)) from None
    avatar = Avatar(pos=(px, py - GROUND_Y, pz), pitch=pitch, yaw=yaw)
    ending = _require(entry, "worldEndingState", index)
    try:
        grid = BlockGrid.from_blocks(ending["blocks"])
    except (KeyError, TypeError, ValueError, RuleViolation) as e:
        raise SchemaError(index, "worldEndingState.blocks", str(e)) from None
    raw_tape = _require(entry, "tape", index)
    lines = raw_tape.splitlines() if isinstance(raw_tape, str) else list(raw_tape)
    try:
        parsed = tapemod.parse_tape(lines)
    except tapemod.ParseError as e:
        raise SchemaError(index, "tape", str(e)) from None
    return BuilderRecord(
        game_id=game_id,
        step_id=step_id,
        avatar=avatar,
        world_ending_state=grid,
        tape=parsed,
        clarification_question=_parse_question(entry.get("clarification_question")),
        clear=entry.get("clear"),
        annotator_id=entry.get("annotatorId"),
        timestamp=entry.get("timestamp"),
        split=entry.get("split"),
        structure_id=entry.get("structureId"),
    )


def parse_records(entries: Iterable[dict], role: str) -> list[Record]:
    parser = {ARCHITECT: _parse_architect, BUILDER: _parse_builder}[role]
    records = []
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise SchemaError(index, "<record>", "expected object")
        records.append(parser(entry, index))
    return records


def load_records(path: str | Path, role: str) -> list[Record]:
    """Load one file of records. Raises SchemaError with the offending index
    and field; malformed entries never vanish silently."""
    text = Path(path).read_text()
    if not text.strip():
        return []
    stripped = text.lstrip()
    if stripped.startswith("["):
        entries = json.loads(text)
    elif stripped.startswith("{"):
        try:
            entries = [json.loads(text)]
        except json.JSONDecodeError:
            entries = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        raise ValueError(f"{path}: not a JSON record file")
    return parse_records(entries, role)


def tokenize(text: str) -> list[str]:
    """Whitespace tokens with punctuation stripped at the edges."""
    tokens = []
    for raw in text.split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def word_count(text: str) -> int:
    return len(tokenize(text))


class RejectReason(str, Enum):
    SHORT_INSTRUCTION = "ShortInstruction"
    REPEATED_INSTRUCTION = "RepeatedInstruction"
    MISSING_QUESTION = "MissingQuestion"


@dataclass(frozen=True)
class Rejection:
    record: Record
    reason: RejectReason
    detail: str = ""


@dataclass
class CleanResult:
    kept: list[Record]
    rejected: list[Rejection]


MIN_INSTRUCTION_WORDS = 5
REPETITION_THRESHOLD = 3


def clean(
    records: Sequence[Record], repetition_threshold: int = REPETITION_THRESHOLD
) -> CleanResult:
    """Apply the corpus cleaning rules.

    Rejects: instructions shorter than five words; every record from an
    annotator who submitted the same instruction text ``repetition_threshold``
    or more times; builder submissions marked unclear without a clarifying
    question. Rejections are data, not errors. Idempotent over its kept set.
    """
    counts: dict[tuple[str, str], int] = {}
    for r in records:
        if isinstance(r, ArchitectRecord) and r.annotator_id:
            key = (r.annotator_id, r.command.strip())
            counts[key] = counts.get(key, 0) + 1
    blacklisted = {a for (a, _), n in counts.items() if n >= repetition_threshold}

    kept: list[Record] = []
    rejected: list[Rejection] = []
    for r in records:
        if r.annotator_id and r.annotator_id in blacklisted:
            rejected.append(
                Rejection(r, RejectReason.REPEATED_INSTRUCTION,
                          f"annotator {r.annotator_id} repeats an instruction")
            )
            continue
        if isinstance(r, ArchitectRecord) and word_count(r.command) < MIN_INSTRUCTION_WORDS:
            rejected.append(
                Rejection(r, RejectReason.SHORT_INSTRUCTION,
                          f"{word_count(r.command)} words < {MIN_INSTRUCTION_WORDS}")
            )
            continue
        if (
            isinstance(r, BuilderRecord)
            and r.clear is False
            and r.clarification_question is None
        ):
            rejected.append(
                Rejection(r, RejectReason.MISSING_QUESTION,
                          "marked unclear without a clarifying question")
            )
            continue
        kept.append(r)
    return CleanResult(kept=kept, rejected=rejected)


@dataclass
class SplitCounts:
    instructions: int = 0
    clear: int = 0
    ambiguous: int = 0

    def to_json(self) -> dict:
        return {"instructions": self.instructions, "clear": self.clear,
                "ambiguous": self.ambiguous}


@dataclass
class DatasetStats:
    target_structures: int = 0
    completed_games: int = 0
    instruction_count: int = 0
    clarifying_question_count: int = 0
    median_game_duration_minutes: float = 0.0
    avg_turns_per_game: float = 0.0
    avg_instruction_words: float = 0.0
    avg_question_words: float = 0.0
    avg_questions_per_game: float = 0.0
    clear_count: int = 0
    ambiguous_count: int = 0
    split: dict[str, SplitCounts] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "targetStructures": self.target_structures,
            "completedGames": self.completed_games,
            "instructionCount": self.instruction_count,
            "clarifyingQuestionCount": self.clarifying_question_count,
            "medianGameDurationMinutes": self.median_game_duration_minutes,
            "avgTurnsPerGame": self.avg_turns_per_game,
            "avgInstructionWords": self.avg_instruction_words,
            "avgQuestionWords": self.avg_question_words,
            "avgQuestionsPerGame": self.avg_questions_per_game,
            "clearCount": self.clear_count,
            "ambiguousCount": self.ambiguous_count,
            "split": {k: v.to_json() for k, v in sorted(self.split.items())},
        }


def _game_durations(records: Sequence[Record]) -> dict[int, float]:
    stamps: dict[int, list[float]] = {}
    for r in records:
        if r.timestamp is not None:
            stamps.setdefault(r.game_id, []).append(float(r.timestamp))
    return {
        g: (max(ts) - min(ts)) / 60.0 for g, ts in stamps.items() if len(ts) >= 2
    }


def compute_stats(
    records: Sequence[Record],
    game_durations: Mapping[int, float] | None = None,
) -> DatasetStats:
    """Corpus statistics over cleaned records.

    An instruction counts as ambiguous when the builder record that answers
    it (the next builder step in the same game) is marked unclear or carries
    a clarifying question, so clear + ambiguous == instructions always.
    Durations come from record timestamps unless passed explicitly; games
    without timestamps stay out of the median.
    """
    architects = sorted(
        (r for r in records if isinstance(r, ArchitectRecord)),
        key=lambda r: (r.game_id, r.step_id),
    )
    builders = sorted(
        (r for r in records if isinstance(r, BuilderRecord)),
        key=lambda r: (r.game_id, r.step_id),
    )
    stats = DatasetStats()
    stats.instruction_count = len(architects)
    stats.clarifying_question_count = sum(
        1 for b in builders if b.clarification_question is not None
    )

    games = {r.game_id for r in records}
    structures = {r.structure_id for r in records if r.structure_id is not None}
    stats.target_structures = len(structures)
    flagged = {r.game_id for r in architects if r.completed}
    has_flags = any(r.completed for r in architects)
    completed = flagged if has_flags else games
    stats.completed_games = len(completed)

    if completed:
        turns = [sum(1 for r in records if r.game_id == g) for g in completed]
        stats.avg_turns_per_game = sum(turns) / len(turns)

    durations = dict(game_durations) if game_durations else _game_durations(records)
    if durations:
        stats.median_game_duration_minutes = float(statistics.median(durations.values()))

    if architects:
        stats.avg_instruction_words = sum(
            word_count(a.command) for a in architects
        ) / len(architects)
    questions = [b.clarification_question for b in builders
                 if b.clarification_question is not None]
    if questions:
        stats.avg_question_words = sum(word_count(q) for q in questions) / len(questions)
    if games:
        stats.avg_questions_per_game = stats.clarifying_question_count / len(games)

    # pair each instruction with the next builder step in its game
    ambiguous_keys = set()
    for b in builders:
        if not b.marked_ambiguous:
            continue
        preceding = [a for a in architects
                     if a.game_id == b.game_id and a.step_id < b.step_id]
        if preceding:
            a = preceding[-1]
            ambiguous_keys.add((a.game_id, a.step_id))
    stats.ambiguous_count = len(ambiguous_keys)
    stats.clear_count = stats.instruction_count - stats.ambiguous_count

    for a in architects:
        if a.split is None:
            continue
        bucket = stats.split.setdefault(a.split, SplitCounts())
        bucket.instructions += 1
        if (a.game_id, a.step_id) in ambiguous_keys:
            bucket.ambiguous += 1
        else:
            bucket.clear += 1
    return stats


class CQCategory(str, Enum):
    COLOR = "Color"
    DIRECTION_ORIENTATION = "DirectionOrientation"
    NUMBER_OF_BLOCKS = "NumberOfBlocks"
    IDENTIFY_BLOCKS = "IdentifyBlocks"
    OTHER = "Other"


def _default_category_config() -> dict:
    text = resources.files("blockworld.data").joinpath("question_categories.json").read_text()
    return json.loads(text)


_category_config: dict | None = None


def categorize_question(question: str, config: dict | None = None) -> CQCategory:
    """Rule-based category tag; the first keyword family that matches wins.

    The keyword lists live in a config file so the heuristic stays auditable
    and replaceable.
    """
    global _category_config
    if config is None:
        if _category_config is None:
            _category_config = _default_category_config()
        config = _category_config
    if not question.strip():
        raise ValueError("question text is empty")
    lowered = question.lower()
    for family in config["order"]:
        if any(kw in lowered for kw in config["keywords"][family]):
            return CQCategory(family)
    return CQCategory.OTHER


def category_counts(questions: Iterable[str], config: dict | None = None) -> dict[str, int]:
    counts = {c.value: 0 for c in CQCategory}
    for q in questions:
        counts[categorize_question(q, config).value] += 1
    return counts
