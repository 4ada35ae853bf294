"""Typed AST for block programs, plus the block catalog.

A program is a set of named procedures and a main statement chain. All AST
nodes are immutable; structural equality is plain dataclass equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union


@dataclass(frozen=True)
class Move:
    direction: str  # forward / backward / left / right
    speed: float  # mm/s, > 0
    duration: float  # s, > 0


@dataclass(frozen=True)
class Turn:
    side: str  # left / right
    degrees: int  # 90 or 180


@dataclass(frozen=True)
class KnightMove:
    """L-shaped move given as two robot-relative components.

    The lateral component (dir_x) and the longitudinal component (dir_y)
    are merged into one global displacement before any legality check;
    leg_order says which component's leg executes first.
    """

    dir_x: str  # left / right
    x_cells: int
    dir_y: str  # forward / backward
    y_cells: int
    leg_order: str = "x-first"  # x-first / y-first


@dataclass(frozen=True)
class Pick:
    item: str


@dataclass(frozen=True)
class Place:
    pass


@dataclass(frozen=True)
class RepeatLoop:
    times: int
    body: tuple = ()


@dataclass(frozen=True)
class ProcCall:
    name: str


Statement = Union[Move, Turn, KnightMove, Pick, Place, RepeatLoop, ProcCall]


@dataclass(frozen=True)
class BlockProgram:
    """Parsed program: procedure bodies by name plus the main chain."""

    procedures: Mapping[str, tuple] = field(default_factory=dict)
    main: tuple = ()

    def all_chains(self) -> Iterator[tuple]:
        yield self.main
        yield from self.procedures.values()


def block_type_of(stmt: Statement) -> str:
    """Block type name a statement serializes to."""
    if isinstance(stmt, Move):
        return f"move_{stmt.direction}"
    if isinstance(stmt, Turn):
        return f"turn_{stmt.side}"
    if isinstance(stmt, KnightMove):
        return "move_knight"
    if isinstance(stmt, Pick):
        return "pick_item"
    if isinstance(stmt, Place):
        return "place_item"
    if isinstance(stmt, RepeatLoop):
        return "controls_repeat"
    if isinstance(stmt, ProcCall):
        return "procedures_callnoreturn"
    raise TypeError(f"not a statement: {stmt!r}")


def iter_statements(chain: tuple) -> Iterator[Statement]:
    """Depth-first walk of a chain, loop bodies included."""
    for stmt in chain:
        yield stmt
        if isinstance(stmt, RepeatLoop):
            yield from iter_statements(stmt.body)


def count_statements(program: BlockProgram) -> int:
    return sum(len(list(iter_statements(chain))) for chain in program.all_chains())


# --- catalog ------------------------------------------------------------

# Required field names per block type. LEG_ORDER on move_knight is optional.
REQUIRED_FIELDS = {
    "move_forward": ("SPEED", "DURATION"),
    "move_backward": ("SPEED", "DURATION"),
    "move_left": ("SPEED", "DURATION"),
    "move_right": ("SPEED", "DURATION"),
    "turn_left": ("DEGREES",),
    "turn_right": ("DEGREES",),
    "move_knight": ("DIR_X", "DIR_Y"),
    "pick_item": ("ITEM",),
    "place_item": (),
    "controls_repeat": ("TIMES",),
    "procedures_defnoreturn": ("NAME",),
    "procedures_callnoreturn": (),
}


@dataclass(frozen=True)
class BlockCatalog:
    """Admissible block type names with their required fields."""

    blocks: Mapping[str, tuple]

    def __contains__(self, block_type: str) -> bool:
        return block_type in self.blocks

    def required_fields(self, block_type: str) -> tuple:
        return self.blocks[block_type]

    def types(self) -> tuple:
        return tuple(sorted(self.blocks))


def catalog_for(block_types) -> BlockCatalog:
    unknown = [t for t in block_types if t not in REQUIRED_FIELDS]
    if unknown:
        raise ValueError(f"unknown block types in catalog: {unknown}")
    return BlockCatalog({t: REQUIRED_FIELDS[t] for t in sorted(block_types)})


UNIVERSAL_CATALOG = catalog_for(REQUIRED_FIELDS)
