"""Block color palette: name <-> id mapping.

The collected data only pins two ids (50 and 57 appear in recorded blocks),
so the full six-color table ships as a config file users can replace.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path


class Palette:
    """Bidirectional color-name/block-id table."""

    def __init__(self, colors: dict[str, int]):
        if len(set(colors.values())) != len(colors):
            raise ValueError("palette block ids must be unique")
        if any(v == 0 for v in colors.values()):
            raise ValueError("block id 0 is reserved for air")
        self._by_name = {k.lower(): int(v) for k, v in colors.items()}
        self._by_id = {v: k for k, v in self._by_name.items()}

    @classmethod
    def default(cls) -> "Palette":
        text = resources.files("blockworld.data").joinpath("palette.json").read_text()
        return cls(json.loads(text))

    @classmethod
    def from_file(cls, path: str | Path) -> "Palette":
        return cls(json.loads(Path(path).read_text()))

    def id_of(self, name: str) -> int:
        try:
            return self._by_name[name.lower()]
        except KeyError:
            raise KeyError(f"unknown color {name!r}") from None

    def name_of(self, block_id: int) -> str:
        try:
            return self._by_id[block_id]
        except KeyError:
            raise KeyError(f"unknown block id {block_id}") from None

    def __contains__(self, block_id: int) -> bool:
        return block_id in self._by_id

    @property
    def names(self) -> list[str]:
        return sorted(self._by_name)

    @property
    def ids(self) -> list[int]:
        return sorted(self._by_id)
