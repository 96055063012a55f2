"""Structure taxonomy: geometric predicates over a target grid.

Labels are not mutually exclusive. "Tricky" is approximated by hidden-block
detection; order-dependent builds with no hidden block are not detected.
"""
from __future__ import annotations

from dataclasses import dataclass

from .world import BlockGrid, Coord

FACE_NEIGHBORS = (
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
)

# A ground-standing builder with reach 3 and the one-block jump boost tops
# out at y=3, so anything at y >= 4 needs climbing.
TALL_THRESHOLD = 4


class EmptyStructure(Exception):
    pass


@dataclass(frozen=True)
class StructureLabels:
    flat: bool
    flying: bool
    diagonal: bool
    tricky: bool
    tall: bool

    def names(self) -> list[str]:
        return [k for k in ("flat", "flying", "diagonal", "tricky", "tall") if getattr(self, k)]

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("flat", "flying", "diagonal", "tricky", "tall")}


def _require_blocks(g: BlockGrid) -> None:
    if len(g) == 0:
        raise EmptyStructure("structure has no blocks")


def is_flat(g: BlockGrid) -> bool:
    """All blocks on the ground layer."""
    _require_blocks(g)
    return all(c.y == 0 for c in g.coords())


def _components(g: BlockGrid) -> list[set[Coord]]:
    unvisited = set(g.coords())
    components = []
    while unvisited:
        seed = unvisited.pop()
        component = {seed}
        frontier = [seed]
        while frontier:
            c = frontier.pop()
            for dx, dy, dz in FACE_NEIGHBORS:
                n = Coord(c.x + dx, c.y + dy, c.z + dz)
                if n in unvisited:
                    unvisited.remove(n)
                    component.add(n)
                    frontier.append(n)
        components.append(component)
    return components


def is_flying(g: BlockGrid) -> bool:
    """Some face-connected component never touches the ground, so it cannot
    be built bottom-up without scaffolding blocks that are later removed."""
    _require_blocks(g)
    return any(all(c.y > 0 for c in comp) for comp in _components(g))


def is_diagonal(g: BlockGrid) -> bool:
    """Some block touches the rest only via edges/corners (no face contact)."""
    _require_blocks(g)
    for c in g.coords():
        has_face = any(
            Coord(c.x + dx, c.y + dy, c.z + dz) in g for dx, dy, dz in FACE_NEIGHBORS
        )
        if has_face:
            continue
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    if (dx, dy, dz) == (0, 0, 0):
                        continue
                    if Coord(c.x + dx, c.y + dy, c.z + dz) in g:
                        return True
    return False


def is_tall(g: BlockGrid, threshold: int = TALL_THRESHOLD) -> bool:
    """Reaches above what a ground-standing builder can place."""
    _require_blocks(g)
    return max(c.y for c in g.coords()) >= threshold


def has_hidden_blocks(g: BlockGrid) -> bool:
    """Some block has all six faces covered (ground covers the downward face
    of layer-0 blocks), so it must be placed before its neighbors."""
    _require_blocks(g)
    for c in g.coords():
        covered = True
        for dx, dy, dz in FACE_NEIGHBORS:
            n = Coord(c.x + dx, c.y + dy, c.z + dz)
            if n in g:
                continue
            if n.y < 0:
                continue  # ground plane seals the downward face
            covered = False
            break
        if covered:
            return True
    return False


def classify(g: BlockGrid, tall_threshold: int = TALL_THRESHOLD) -> StructureLabels:
    """All five labels for one structure."""
    _require_blocks(g)
    return StructureLabels(
        flat=is_flat(g),
        flying=is_flying(g),
        diagonal=is_diagonal(g),
        tricky=has_hidden_blocks(g),
        tall=is_tall(g, threshold=tall_threshold),
    )
