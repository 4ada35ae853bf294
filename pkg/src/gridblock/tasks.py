"""Declarative task specifications: built-in tasks and the task-file loader.

A task file is one JSON document; cells are encoded as [x, y] pairs. Only
``id``, ``start`` and ``success`` are required, everything else defaults to
empty. Every built-in task round-trips unchanged through this format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import blocks
from .errors import GeometryInvalid, SchemaViolation
from .grid import EAST, GRID_SIZE, NORTH, ORIENTATIONS, WEST, Pose, on_grid


@dataclass(frozen=True)
class StructuralChecks:
    """Program-shape requirements for the tile-cleaning task."""

    body_step_count: int = 4
    loop_times: int = 2


@dataclass(frozen=True)
class CoverAllCells:
    kind = "cover_all_cells"
    exceptions: frozenset = frozenset()
    structural: Optional[StructuralChecks] = None


@dataclass(frozen=True)
class FollowExactCellPath:
    kind = "follow_exact_cell_path"
    path: tuple = ()


@dataclass(frozen=True)
class CollectAllMinerals:
    kind = "collect_all_minerals"
    # Final energy must be strictly greater than this bound.
    min_final_energy: int = 0


@dataclass(frozen=True)
class TransportAllItems:
    kind = "transport_all_items"
    to: tuple = (0, 0)
    safety: bool = True


@dataclass(frozen=True)
class KnightFullCover:
    kind = "knight_full_cover"
    goal: tuple = (0, 0)
    exceptions: frozenset = frozenset()


SuccessRule = Union[
    CoverAllCells, FollowExactCellPath, CollectAllMinerals, TransportAllItems, KnightFullCover
]


@dataclass(frozen=True)
class Policies:
    """Task-level switches for the contested simulation rules."""

    knight_intermediates_count: bool = True
    safety_rules_on: bool = True
    halt_on_oob: bool = True
    knight_obstacles_block_intermediates: bool = False


@dataclass(frozen=True)
class TaskSpec:
    id: str
    title: str
    start: Pose
    success_rule: SuccessRule
    obstacles: frozenset = frozenset()
    minerals: frozenset = frozenset()
    swamps: frozenset = frozenset()
    triggers: tuple = ()  # ordered (label, cell) pairs
    river_cells: frozenset = frozenset()
    left_bank_items: tuple = ()
    right_bank_cell: Optional[tuple] = None
    forbidden_cells: frozenset = frozenset()
    initial_energy: Optional[int] = None
    catalog: blocks.BlockCatalog = blocks.UNIVERSAL_CATALOG
    policies: Policies = field(default_factory=Policies)

    @property
    def tracks_revisits(self) -> bool:
        return isinstance(self.success_rule, KnightFullCover)

    def bank_place_cell(self) -> Optional[tuple]:
        """River cell adjacent to the far bank; place/pick point for it."""
        if self.right_bank_cell is None:
            return None
        bx, by = self.right_bank_cell
        for cell in self.river_cells:
            if abs(cell[0] - bx) + abs(cell[1] - by) == 1:
                return cell
        return None

    def bank_pick_cell(self) -> Optional[tuple]:
        """River cell farthest from the far bank; pick point for the store."""
        if not self.river_cells:
            return None
        if self.right_bank_cell is None:
            return min(self.river_cells)
        bx, by = self.right_bank_cell
        return max(self.river_cells, key=lambda c: (abs(c[0] - bx) + abs(c[1] - by), c))


def _check_cells(cells, what: str) -> None:
    for cell in cells:
        if not on_grid(cell):
            raise GeometryInvalid(f"{what} cell {cell} is off the {GRID_SIZE}x{GRID_SIZE} grid")


def validate_task(task: TaskSpec) -> TaskSpec:
    """Raise GeometryInvalid unless every referenced cell is consistent."""
    _check_cells([task.start.cell], "start")
    _check_cells(task.obstacles, "obstacle")
    _check_cells(task.minerals, "mineral")
    _check_cells(task.swamps, "swamp")
    _check_cells([cell for _, cell in task.triggers], "trigger")
    _check_cells(task.river_cells, "river")
    _check_cells(task.forbidden_cells, "forbidden")
    if task.right_bank_cell is not None:
        _check_cells([task.right_bank_cell], "right bank")
    if task.start.orientation not in ORIENTATIONS:
        raise GeometryInvalid(f"unknown orientation {task.start.orientation!r}")
    if task.start.cell in task.obstacles:
        raise GeometryInvalid("start cell lies on an obstacle")
    for cell in task.minerals | frozenset(c for _, c in task.triggers):
        if cell in task.obstacles:
            raise GeometryInvalid(f"cell {cell} is both an obstacle and a mineral/trigger")
    if task.initial_energy is not None and task.initial_energy < 0:
        raise GeometryInvalid("initial energy must be >= 0")
    rule = task.success_rule
    if isinstance(rule, FollowExactCellPath):
        _check_cells(rule.path, "path")
        for a, b in zip(rule.path, rule.path[1:]):
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise GeometryInvalid(f"path cells {a} and {b} are not adjacent")
    elif isinstance(rule, KnightFullCover):
        _check_cells([rule.goal], "goal")
        _check_cells(rule.exceptions, "exception")
    elif isinstance(rule, CoverAllCells):
        _check_cells(rule.exceptions, "exception")
    elif isinstance(rule, TransportAllItems):
        _check_cells([rule.to], "transport target")
        if task.right_bank_cell is not None and rule.to != task.right_bank_cell:
            raise GeometryInvalid("transport target must match the right bank cell")
    return task


# --- built-in tasks -------------------------------------------------------

_BASIC_BLOCKS = (
    "move_forward",
    "move_backward",
    "move_left",
    "move_right",
    "turn_left",
    "turn_right",
    "controls_repeat",
    "procedures_defnoreturn",
    "procedures_callnoreturn",
)

CATALOG_BASIC = blocks.catalog_for(_BASIC_BLOCKS)
CATALOG_RIVER = blocks.catalog_for(_BASIC_BLOCKS + ("pick_item", "place_item"))
CATALOG_KNIGHT = blocks.catalog_for(_BASIC_BLOCKS + ("move_knight",))

# The one exact cell sequence accepted for the secret-realm task, waypoints
# (1,1) -> (1,2) -> (4,2) -> (4,3) -> (4,1) expanded cell by cell.
SECRET_REALM_PATH = (
    (1, 1),
    (1, 2),
    (2, 2),
    (3, 2),
    (4, 2),
    (4, 3),
    (4, 2),
    (4, 1),
)

_ALL_CELLS = frozenset((x, y) for x in range(GRID_SIZE) for y in range(GRID_SIZE))


def builtin_tasks() -> tuple:
    """The five built-in tasks, beginner to advanced."""
    tile = TaskSpec(
        id="tile-cleaning",
        title="Tile Cleaning",
        start=Pose(0, 0, EAST),
        success_rule=CoverAllCells(exceptions=frozenset(), structural=StructuralChecks()),
        catalog=CATALOG_BASIC,
    )
    realm = TaskSpec(
        id="secret-realm",
        title="Adventure in the Secret Realm",
        start=Pose(1, 1, NORTH),
        success_rule=FollowExactCellPath(path=SECRET_REALM_PATH),
        obstacles=frozenset({(0, 4), (0, 2), (1, 3), (2, 1), (3, 1), (3, 3)}),
        triggers=(("A", (4, 3)), ("B", (4, 1)), ("C", (4, 2))),
        catalog=CATALOG_BASIC,
    )
    mineral = TaskSpec(
        id="mineral-collection",
        title="Mineral Collection",
        start=Pose(0, 0, NORTH),
        success_rule=CollectAllMinerals(),
        minerals=frozenset({(1, 0), (1, 3), (3, 3)}),
        swamps=frozenset({(0, 2), (2, 2), (2, 3), (2, 4)}),
        initial_energy=6,
        catalog=CATALOG_BASIC,
    )
    river = TaskSpec(
        id="river-crossing",
        title="Wolf, Goat and Cabbage",
        start=Pose(0, 0, WEST),
        success_rule=TransportAllItems(to=(3, 0), safety=True),
        river_cells=frozenset({(0, 0), (1, 0), (2, 0)}),
        left_bank_items=("wolf", "goat", "cabbage"),
        right_bank_cell=(3, 0),
        forbidden_cells=frozenset({(3, 0)}),
        catalog=CATALOG_RIVER,
    )
    knight = TaskSpec(
        id="knights-tour",
        title="Knight's Tour",
        start=Pose(0, 0, NORTH),
        success_rule=KnightFullCover(goal=(3, 0), exceptions=frozenset({(3, 1), (4, 3), (4, 4)})),
        obstacles=frozenset({(3, 1), (4, 3), (4, 4)}),
        catalog=CATALOG_KNIGHT,
    )
    return tuple(validate_task(t) for t in (tile, realm, mineral, river, knight))


def required_cells(rule: SuccessRule) -> frozenset:
    """Cells a coverage-style rule demands; empty for the other rules."""
    if isinstance(rule, (CoverAllCells, KnightFullCover)):
        return _ALL_CELLS - rule.exceptions
    return frozenset()


# --- task-file format -----------------------------------------------------


def _cell_to_json(cell) -> list:
    return [cell[0], cell[1]]


def _cells_to_json(cells) -> list:
    return [_cell_to_json(c) for c in sorted(cells)]


def _rule_to_json(rule: SuccessRule) -> dict:
    if isinstance(rule, CoverAllCells):
        out = {"kind": rule.kind, "exceptions": _cells_to_json(rule.exceptions)}
        if rule.structural is not None:
            out["structural"] = {
                "bodyStepCount": rule.structural.body_step_count,
                "loopTimes": rule.structural.loop_times,
            }
        return out
    if isinstance(rule, FollowExactCellPath):
        return {"kind": rule.kind, "path": [_cell_to_json(c) for c in rule.path]}
    if isinstance(rule, CollectAllMinerals):
        return {"kind": rule.kind, "minFinalEnergy": rule.min_final_energy}
    if isinstance(rule, TransportAllItems):
        return {"kind": rule.kind, "to": _cell_to_json(rule.to), "safety": rule.safety}
    if isinstance(rule, KnightFullCover):
        return {
            "kind": rule.kind,
            "goal": _cell_to_json(rule.goal),
            "exceptions": _cells_to_json(rule.exceptions),
        }
    raise TypeError(f"not a success rule: {rule!r}")


def task_to_json(task: TaskSpec) -> dict:
    """Canonical task-file dict; stable key and cell ordering."""
    out = {
        "id": task.id,
        "title": task.title,
        "start": {"x": task.start.x, "y": task.start.y, "orientation": task.start.orientation},
        "success": _rule_to_json(task.success_rule),
    }
    if task.obstacles:
        out["obstacles"] = _cells_to_json(task.obstacles)
    if task.minerals:
        out["minerals"] = _cells_to_json(task.minerals)
    if task.swamps:
        out["swamps"] = _cells_to_json(task.swamps)
    if task.triggers:
        out["triggers"] = [{"label": label, "cell": _cell_to_json(cell)} for label, cell in task.triggers]
    if task.river_cells:
        out["river"] = _cells_to_json(task.river_cells)
    if task.left_bank_items:
        out["items"] = list(task.left_bank_items)
    if task.right_bank_cell is not None:
        out["rightBank"] = _cell_to_json(task.right_bank_cell)
    if task.forbidden_cells:
        out["forbidden"] = _cells_to_json(task.forbidden_cells)
    if task.initial_energy is not None:
        out["energy"] = task.initial_energy
    out["policies"] = {
        "knightIntermediatesCount": task.policies.knight_intermediates_count,
        "safetyRulesOn": task.policies.safety_rules_on,
        "haltOnOOB": task.policies.halt_on_oob,
        "knightObstaclesBlockIntermediates": task.policies.knight_obstacles_block_intermediates,
    }
    out["catalog"] = list(task.catalog.types())
    return out


def serialize_task(task: TaskSpec) -> str:
    return json.dumps(task_to_json(task), indent=2)


def _want(doc: dict, key: str, kind, required: bool = False, default=None):
    if key not in doc:
        if required:
            raise SchemaViolation(f"task document is missing required key {key!r}")
        return default
    value = doc[key]
    if not isinstance(value, kind):
        raise SchemaViolation(f"key {key!r} must be {kind}, got {type(value).__name__}")
    return value


def _cell_from_json(value, what: str) -> tuple:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise SchemaViolation(f"{what} must be an [x, y] integer pair, got {value!r}")
    return (value[0], value[1])


def _cells_from_json(value, what: str) -> frozenset:
    if not isinstance(value, list):
        raise SchemaViolation(f"{what} must be a list of cells")
    return frozenset(_cell_from_json(v, what) for v in value)


def _rule_from_json(doc) -> SuccessRule:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SchemaViolation("success must be an object with a kind")
    kind = doc["kind"]
    if kind == "cover_all_cells":
        structural = None
        if "structural" in doc and doc["structural"] is not None:
            sdoc = _want(doc, "structural", dict)
            structural = StructuralChecks(
                body_step_count=_want(sdoc, "bodyStepCount", int, default=4),
                loop_times=_want(sdoc, "loopTimes", int, default=2),
            )
        return CoverAllCells(
            exceptions=_cells_from_json(doc.get("exceptions", []), "exceptions"),
            structural=structural,
        )
    if kind == "follow_exact_cell_path":
        path = doc.get("path")
        if not isinstance(path, list) or not path:
            raise SchemaViolation("follow_exact_cell_path requires a non-empty path")
        return FollowExactCellPath(path=tuple(_cell_from_json(c, "path cell") for c in path))
    if kind == "collect_all_minerals":
        return CollectAllMinerals(min_final_energy=_want(doc, "minFinalEnergy", int, default=0))
    if kind == "transport_all_items":
        if "to" not in doc:
            raise SchemaViolation("transport_all_items requires a target cell")
        return TransportAllItems(
            to=_cell_from_json(doc["to"], "transport target"),
            safety=_want(doc, "safety", bool, default=True),
        )
    if kind == "knight_full_cover":
        if "goal" not in doc:
            raise SchemaViolation("knight_full_cover requires a goal cell")
        return KnightFullCover(
            goal=_cell_from_json(doc["goal"], "goal"),
            exceptions=_cells_from_json(doc.get("exceptions", []), "exceptions"),
        )
    raise SchemaViolation(f"unknown success rule kind {kind!r}")


def _policies_from_json(doc) -> Policies:
    if doc is None:
        return Policies()
    if not isinstance(doc, dict):
        raise SchemaViolation("policies must be an object")
    return Policies(
        knight_intermediates_count=_want(doc, "knightIntermediatesCount", bool, default=True),
        safety_rules_on=_want(doc, "safetyRulesOn", bool, default=True),
        halt_on_oob=_want(doc, "haltOnOOB", bool, default=True),
        knight_obstacles_block_intermediates=_want(
            doc, "knightObstaclesBlockIntermediates", bool, default=False
        ),
    )


def load_task(document) -> TaskSpec:
    """Build a TaskSpec from a task-file JSON document (text or dict).

    Raises SchemaViolation for shape problems and GeometryInvalid for
    off-grid or conflicting cells.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"task document is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise SchemaViolation("task document must be a JSON object")

    task_id = _want(document, "id", str, required=True)
    start_doc = _want(document, "start", dict, required=True)
    success_doc = document.get("success")
    if success_doc is None:
        raise SchemaViolation("task document is missing required key 'success'")

    start = Pose(
        x=_want(start_doc, "x", int, required=True),
        y=_want(start_doc, "y", int, required=True),
        orientation=_want(start_doc, "orientation", str, default=NORTH),
    )

    catalog = blocks.UNIVERSAL_CATALOG
    if "catalog" in document:
        types = _want(document, "catalog", list)
        try:
            catalog = blocks.catalog_for(types)
        except ValueError as exc:
            raise SchemaViolation(str(exc)) from None

    triggers = []
    for entry in _want(document, "triggers", list, default=[]):
        if not isinstance(entry, dict) or "label" not in entry or "cell" not in entry:
            raise SchemaViolation("each trigger needs a label and a cell")
        triggers.append((entry["label"], _cell_from_json(entry["cell"], "trigger cell")))

    right_bank = document.get("rightBank")
    task = TaskSpec(
        id=task_id,
        title=_want(document, "title", str, default=task_id),
        start=start,
        success_rule=_rule_from_json(success_doc),
        obstacles=_cells_from_json(document.get("obstacles", []), "obstacles"),
        minerals=_cells_from_json(document.get("minerals", []), "minerals"),
        swamps=_cells_from_json(document.get("swamps", []), "swamps"),
        triggers=tuple(triggers),
        river_cells=_cells_from_json(document.get("river", []), "river"),
        left_bank_items=tuple(_want(document, "items", list, default=[])),
        right_bank_cell=None if right_bank is None else _cell_from_json(right_bank, "rightBank"),
        forbidden_cells=_cells_from_json(document.get("forbidden", []), "forbidden"),
        initial_energy=_want(document, "energy", int),
        catalog=catalog,
        policies=_policies_from_json(document.get("policies")),
    )
    return validate_task(task)


def with_policies(task: TaskSpec, **kwargs) -> TaskSpec:
    """Copy of a task with some policy switches replaced."""
    return replace(task, policies=replace(task.policies, **kwargs))
