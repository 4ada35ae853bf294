"""Kinematics of the 5x5 cell grid.

Coordinates are (x, y) with the origin at the bottom-left corner: x grows
to the right, y grows upward. The robot occupies one cell and faces one of
the four cardinal orientations. All functions here are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import NonPositiveInput, OutOfBounds, UnsupportedAngle

GRID_SIZE = 5
CELL_SIZE_MM = 300

NORTH = "North"
EAST = "East"
SOUTH = "South"
WEST = "West"
ORIENTATIONS = (NORTH, EAST, SOUTH, WEST)  # clockwise ring

FORWARD = "forward"
BACKWARD = "backward"
LEFT = "left"
RIGHT = "right"
DIRECTIONS = (FORWARD, BACKWARD, LEFT, RIGHT)

# Unit heading vector per orientation.
_HEADING = {NORTH: (0, 1), EAST: (1, 0), SOUTH: (0, -1), WEST: (-1, 0)}

Cell = tuple  # (x, y) int pair


@dataclass(frozen=True)
class Delta:
    """Signed cell displacement."""

    dx: int
    dy: int

    def __neg__(self) -> "Delta":
        return Delta(-self.dx, -self.dy)

    def __add__(self, other: "Delta") -> "Delta":
        return Delta(self.dx + other.dx, self.dy + other.dy)


@dataclass(frozen=True)
class Pose:
    """Robot cell coordinates plus cardinal orientation."""

    x: int
    y: int
    orientation: str

    @property
    def cell(self) -> Cell:
        return (self.x, self.y)

    def facing(self, orientation: str) -> "Pose":
        return replace(self, orientation=orientation)

    def at(self, cell: Cell) -> "Pose":
        return replace(self, x=cell[0], y=cell[1])


def on_grid(cell: Cell) -> bool:
    x, y = cell
    return 0 <= x < GRID_SIZE and 0 <= y < GRID_SIZE


def displacement_cells(speed: float, duration: float) -> int:
    """Number of cells covered by one move block: round(duration*speed/300).

    Rounding is half-away-from-zero, so 0.5 becomes 1. Inputs must be
    strictly positive finite numbers.
    """
    if not (math.isfinite(speed) and math.isfinite(duration)):
        raise NonPositiveInput(f"speed/duration must be finite, got {speed}, {duration}")
    if speed <= 0 or duration <= 0:
        raise NonPositiveInput(f"speed/duration must be > 0, got {speed}, {duration}")
    return math.floor(duration * speed / CELL_SIZE_MM + 0.5)


def relative_to_global(orientation: str, direction: str, n: int) -> Delta:
    """Resolve a robot-relative direction into a global displacement.

    Translations never change the facing direction; left is 90 degrees
    counterclockwise of forward (with North up, left of North is West).
    """
    if n < 0:
        raise ValueError(f"cell count must be >= 0, got {n}")
    hx, hy = _HEADING[orientation]
    if direction == FORWARD:
        ux, uy = hx, hy
    elif direction == BACKWARD:
        ux, uy = -hx, -hy
    elif direction == LEFT:
        ux, uy = -hy, hx
    elif direction == RIGHT:
        ux, uy = hy, -hx
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return Delta(ux * n, uy * n)


def apply_delta(pose: Pose, delta: Delta) -> Pose:
    """Translate a pose, walking one cell at a time along each axis.

    Raises OutOfBounds carrying the first off-grid cell; the caller's pose
    is untouched in that case (no partial motion is committed).
    """
    x, y = pose.x, pose.y
    for _ in range(abs(delta.dx)):
        x += 1 if delta.dx > 0 else -1
        if not on_grid((x, y)):
            raise OutOfBounds((x, y))
    for _ in range(abs(delta.dy)):
        y += 1 if delta.dy > 0 else -1
        if not on_grid((x, y)):
            raise OutOfBounds((x, y))
    return replace(pose, x=x, y=y)


def rotate(orientation: str, side: str, degrees: int) -> str:
    """Cardinal rotation; 180 degrees is side-independent."""
    if degrees not in (90, 180):
        raise UnsupportedAngle(f"turn angle must be 90 or 180, got {degrees}")
    if side not in (LEFT, RIGHT):
        raise ValueError(f"unknown turn side {side!r}")
    steps = 1 if degrees == 90 else 2
    if side == LEFT:
        steps = -steps
    idx = ORIENTATIONS.index(orientation)
    return ORIENTATIONS[(idx + steps) % 4]
