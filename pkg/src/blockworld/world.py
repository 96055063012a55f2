"""Deterministic voxel world: build region geometry, avatar state, and the
legal place/remove/move action semantics everything else replays or scores
against.

Two coordinate frames appear in the wild: collected data uses absolute world
coordinates with the ground layer at y=63, while everything in this module
works in the build frame (ground at y=0). ``GROUND_Y`` is the offset between
them; conversion happens at ingestion/serialization boundaries only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping, NamedTuple, Union

GROUND_Y = 63  # world-frame y of the ground layer in collected data

X_MIN, X_MAX = -5, 5
Z_MIN, Z_MAX = -5, 5
Y_MIN, Y_MAX = 0, 8  # 11 x 11 x 9 build region

WALK_MARGIN = 2.0  # avatar may roam this far outside the region footprint
REACH_RADIUS = 3.0  # max Euclidean distance avatar -> block for place/remove
STEP_LENGTH = 0.5  # world units per Move action

# Yaw follows the Minecraft convention: 0 faces south (+z), 90 west (-x).
# The eight step kinds: four yaw-relative, four absolute compass.
RELATIVE_MOVES = ("step_forward", "step_backward", "step_left", "step_right")
COMPASS_MOVES = ("step_north", "step_south", "step_east", "step_west")
MOVE_DIRECTIONS = RELATIVE_MOVES + COMPASS_MOVES

_COMPASS_VECTORS = {
    "step_north": (0.0, -1.0),
    "step_south": (0.0, 1.0),
    "step_east": (1.0, 0.0),
    "step_west": (-1.0, 0.0),
}


class Coord(NamedTuple):
    """Integer cell position: x east, y up, z south (build frame)."""

    x: int
    y: int
    z: int


class RuleViolation(Exception):
    """Base class for illegal world mutations."""


class OutOfBounds(RuleViolation):
    pass


class Occupied(RuleViolation):
    pass


class OutOfReach(RuleViolation):
    pass


class NotPresent(RuleViolation):
    pass


def in_bounds(c: Coord) -> bool:
    x, y, z = c
    return X_MIN <= x <= X_MAX and Z_MIN <= z <= Z_MAX and Y_MIN <= y <= Y_MAX


def normalize_yaw(yaw: float) -> float:
    """Map yaw into [-180, 180); in-range values pass through untouched."""
    if -180.0 <= yaw < 180.0:
        return yaw
    yaw = math.fmod(yaw + 180.0, 360.0)
    if yaw < 0:
        yaw += 360.0
    return yaw - 180.0


class BlockGrid:
    """Sparse voxel occupancy inside the build region.

    Immutable: mutating operations return a new grid. Keys are in-bounds
    ``Coord``s and values are nonzero block ids (air is absence).
    """

    __slots__ = ("_cells",)

    def __init__(self, cells: Mapping[tuple, int] | Iterable[tuple] = ()):
        items = cells.items() if isinstance(cells, Mapping) else cells
        store: dict[Coord, int] = {}
        for raw, block_id in items:
            c = Coord(*raw)
            if not in_bounds(c):
                raise OutOfBounds(f"cell {tuple(c)} outside build region")
            if block_id == 0:
                raise ValueError(f"cell {tuple(c)} stores air (block id 0)")
            store[c] = int(block_id)
        self._cells = store

    @classmethod
    def from_blocks(cls, rows: Iterable[Iterable[int]], frame: str = "world") -> "BlockGrid":
        """Build a grid from ``[x, y, z, blockId]`` quadruples."""
        dy = GROUND_Y if frame == "world" else 0
        cells = {}
        for row in rows:
            x, y, z, block_id = row
            cells[Coord(int(x), int(y) - dy, int(z))] = int(block_id)
        return cls(cells)

    def to_blocks(self, frame: str = "world") -> list[list[int]]:
        """Serialize to sorted ``[x, y, z, blockId]`` quadruples."""
        dy = GROUND_Y if frame == "world" else 0
        return [[c.x, c.y + dy, c.z, b] for c, b in sorted(self._cells.items())]

    def get(self, c: tuple, default: int = 0) -> int:
        return self._cells.get(Coord(*c), default)

    def with_block(self, c: tuple, block_id: int) -> "BlockGrid":
        coord = Coord(*c)
        if not in_bounds(coord):
            raise OutOfBounds(f"cell {tuple(coord)} outside build region")
        if block_id == 0:
            raise ValueError("block id 0 denotes air; use without_block")
        grid = BlockGrid()
        grid._cells = {**self._cells, coord: int(block_id)}
        return grid

    def without_block(self, c: tuple) -> "BlockGrid":
        coord = Coord(*c)
        grid = BlockGrid()
        grid._cells = {k: v for k, v in self._cells.items() if k != coord}
        return grid

    def column_top(self, x: int, z: int) -> int | None:
        """Highest occupied y in the (x, z) column, or None if empty."""
        ys = [c.y for c in self._cells if c.x == x and c.z == z]
        return max(ys) if ys else None

    def items(self) -> Iterator[tuple[Coord, int]]:
        return iter(self._cells.items())

    def coords(self) -> Iterator[Coord]:
        return iter(self._cells)

    def __contains__(self, c: tuple) -> bool:
        return Coord(*c) in self._cells

    def __len__(self) -> int:
        return len(self._cells)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockGrid):
            return NotImplemented
        return self._cells == other._cells

    def __hash__(self) -> int:
        return hash(frozenset(self._cells.items()))

    def __repr__(self) -> str:
        return f"BlockGrid({len(self._cells)} blocks)"


class DeltaEntry(NamedTuple):
    """One signed modification: op is 'add' or 'remove'."""

    op: str
    coord: Coord
    block_id: int


class GridDelta:
    """Signed set of additions/removals between two grids.

    At most one entry per coordinate. Unlike grids, deltas may hold
    out-of-region coordinates: shifted copies appear during intersection
    search.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Iterable[DeltaEntry] = ()):
        frozen = frozenset(
            DeltaEntry(e[0], Coord(*e[1]), int(e[2])) for e in entries
        )
        coords = [e.coord for e in frozen]
        if len(coords) != len(set(coords)):
            raise ValueError("delta holds multiple entries for one coordinate")
        for e in frozen:
            if e.op not in ("add", "remove"):
                raise ValueError(f"unknown delta op {e.op!r}")
        self._entries = frozen

    @property
    def entries(self) -> frozenset[DeltaEntry]:
        return self._entries

    def shifted(self, dx: int, dz: int) -> "GridDelta":
        moved = GridDelta()
        moved._entries = frozenset(
            DeltaEntry(e.op, Coord(e.coord.x + dx, e.coord.y, e.coord.z + dz), e.block_id)
            for e in self._entries
        )
        return moved

    def apply(self, grid: BlockGrid) -> BlockGrid:
        cells = dict(grid.items())
        for e in self._entries:
            if e.op == "add":
                cells[e.coord] = e.block_id
            else:
                cells.pop(e.coord, None)
        return BlockGrid(cells)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridDelta):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        return f"GridDelta({len(self._entries)} entries)"


def diff(g0: BlockGrid, g: BlockGrid) -> GridDelta:
    """Modifications turning g0 into g: adds for new/changed cells, removes
    for vanished cells. ``diff(g0, g).apply(g0) == g`` always holds."""
    entries = []
    for c, b in g.items():
        if g0.get(c) != b:
            entries.append(DeltaEntry("add", c, b))
    for c, b in g0.items():
        if c not in g:
            entries.append(DeltaEntry("remove", c, b))
    return GridDelta(entries)


@dataclass(frozen=True)
class Avatar:
    """Builder avatar: position in world units (build frame), look angles."""

    pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pos", tuple(float(v) for v in self.pos))
        object.__setattr__(self, "pitch", max(-90.0, min(90.0, float(self.pitch))))
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))


@dataclass(frozen=True)
class Move:
    direction: str

    def __post_init__(self):
        if self.direction not in MOVE_DIRECTIONS:
            raise ValueError(f"unknown move direction {self.direction!r}")


@dataclass(frozen=True)
class SetLook:
    pitch: float
    yaw: float


@dataclass(frozen=True)
class Jump:
    pass


@dataclass(frozen=True)
class PlaceBlock:
    coord: Coord
    block_id: int

    def __post_init__(self):
        object.__setattr__(self, "coord", Coord(*self.coord))
        if self.block_id == 0:
            raise ValueError("cannot place air (block id 0)")


@dataclass(frozen=True)
class BreakBlock:
    coord: Coord

    def __post_init__(self):
        object.__setattr__(self, "coord", Coord(*self.coord))


BuildAction = Union[Move, SetLook, Jump, PlaceBlock, BreakBlock]


@dataclass(frozen=True)
class WorldState:
    """Immutable world snapshot: sparse grid plus avatar."""

    grid: BlockGrid
    avatar: Avatar

    @classmethod
    def empty(cls) -> "WorldState":
        return cls(grid=BlockGrid(), avatar=Avatar())


def reach_distance(avatar: Avatar, c: Coord) -> float:
    return math.dist(avatar.pos, (c.x, c.y, c.z))


def _check_reach(avatar: Avatar, c: Coord) -> None:
    d = reach_distance(avatar, c)
    if d > REACH_RADIUS:
        raise OutOfReach(
            f"cell {tuple(c)} at distance {d:.3f} exceeds reach {REACH_RADIUS}"
        )


def place_block(s: WorldState, c: tuple, block_id: int) -> WorldState:
    """Place a block; the cell must be empty, in bounds, and within reach."""
    coord = Coord(*c)
    if block_id == 0:
        raise ValueError("cannot place air (block id 0)")
    if not in_bounds(coord):
        raise OutOfBounds(f"cell {tuple(coord)} outside build region")
    if coord in s.grid:
        raise Occupied(f"cell {tuple(coord)} already holds a block")
    _check_reach(s.avatar, coord)
    return replace(s, grid=s.grid.with_block(coord, block_id))


def remove_block(s: WorldState, c: tuple) -> WorldState:
    """Remove a block; the cell must be occupied and within reach."""
    coord = Coord(*c)
    if coord not in s.grid:
        raise NotPresent(f"no block at cell {tuple(coord)}")
    _check_reach(s.avatar, coord)
    return replace(s, grid=s.grid.without_block(coord))


def standing_height(grid: BlockGrid, x: float, z: float) -> float:
    """Feet height when standing at (x, z): top of the block column there."""
    top = grid.column_top(math.floor(x), math.floor(z))
    return 0.0 if top is None else float(top + 1)


def settle(s: WorldState) -> WorldState:
    """Drop (or lift) the avatar onto the column below its feet."""
    x, _, z = s.avatar.pos
    y = standing_height(s.grid, x, z)
    if y == s.avatar.pos[1]:
        return s
    return replace(s, avatar=replace(s.avatar, pos=(x, y, z)))


def _clamp_walkable(x: float, z: float) -> tuple[float, float]:
    lo_x, hi_x = X_MIN - WALK_MARGIN, X_MAX + 1 + WALK_MARGIN
    lo_z, hi_z = Z_MIN - WALK_MARGIN, Z_MAX + 1 + WALK_MARGIN
    return max(lo_x, min(hi_x, x)), max(lo_z, min(hi_z, z))


def move_vector(direction: str, yaw: float) -> tuple[float, float]:
    """Unit (dx, dz) for a step kind given the avatar yaw."""
    if direction in _COMPASS_VECTORS:
        return _COMPASS_VECTORS[direction]
    rad = math.radians(yaw)
    fx, fz = -math.sin(rad), math.cos(rad)
    if direction == "step_forward":
        return fx, fz
    if direction == "step_backward":
        return -fx, -fz
    if direction == "step_left":
        return fz, -fx
    if direction == "step_right":
        return -fz, fx
    raise ValueError(f"unknown move direction {direction!r}")


def apply_action(s: WorldState, a: BuildAction) -> WorldState:
    """Deterministic successor state for one action.

    Moves translate by STEP_LENGTH and clamp to the walkable volume; after
    every action except Jump the avatar settles onto the column below it.
    Jump lifts the avatar one unit above its column for exactly one
    follow-up action, which is what lets a builder place a block beneath
    its own feet or one unit higher on a wall.
    """
    if isinstance(a, Move):
        x, y, z = s.avatar.pos
        dx, dz = move_vector(a.direction, s.avatar.yaw)
        nx, nz = _clamp_walkable(x + dx * STEP_LENGTH, z + dz * STEP_LENGTH)
        moved = replace(s, avatar=replace(s.avatar, pos=(nx, y, nz)))
        return settle(moved)
    if isinstance(a, SetLook):
        return settle(replace(s, avatar=replace(s.avatar, pitch=a.pitch, yaw=a.yaw)))
    if isinstance(a, Jump):
        x, _, z = s.avatar.pos
        y = standing_height(s.grid, x, z) + 1.0
        return replace(s, avatar=replace(s.avatar, pos=(x, y, z)))
    if isinstance(a, PlaceBlock):
        return settle(place_block(s, a.coord, a.block_id))
    if isinstance(a, BreakBlock):
        return settle(remove_block(s, a.coord))
    raise TypeError(f"unknown action {a!r}")
