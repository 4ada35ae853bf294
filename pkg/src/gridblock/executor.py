"""Lower block programs to primitive actions and simulate them on a task world.

Simulation is unit-step based: every Translate is walked one cell at a
time and every legal knight move is expanded into its traversed cells, so
boundaries, obstacles and world events are evaluated per cell entered.
Failures never raise; they are recorded as Faults in the trace, and a
halting fault stops all further motion.

Per entered cell the world reacts in a fixed order: movement energy cost,
swamp penalty, mineral auto-collect attempt, trigger activation. Collecting
a mineral needs at least 1 energy after the movement and swamp costs; it
costs 1 and restores 3. A robot without energy for the next move cost stays
put and the run halts with EnergyDepleted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .blocks import (
    BlockProgram,
    KnightMove,
    Move,
    Pick,
    Place,
    ProcCall,
    RepeatLoop,
    Turn,
)
from .errors import UnrollBudgetExceeded
from .grid import Delta, Pose, displacement_cells, on_grid, relative_to_global, rotate
from .tasks import TaskSpec

UNROLL_BUDGET = 10_000

# Fault kinds (closed set; checker dispatch relies on these exact strings).
OUT_OF_BOUNDS = "OutOfBounds"
OBSTACLE_COLLISION = "ObstacleCollision"
ILLEGAL_KNIGHT_MOVE = "IllegalKnightMove"
REVISIT_VIOLATION = "RevisitViolation"
ENERGY_DEPLETED = "EnergyDepleted"
FORBIDDEN_CELL = "ForbiddenCell"
PICK_WITHOUT_ITEM = "PickWithoutItem"
PLACE_WITHOUT_CARRY = "PlaceWithoutCarry"
WRONG_BANK_ACTION = "WrongBankAction"

FAULT_KINDS = frozenset(
    {
        OUT_OF_BOUNDS,
        OBSTACLE_COLLISION,
        ILLEGAL_KNIGHT_MOVE,
        REVISIT_VIOLATION,
        ENERGY_DEPLETED,
        FORBIDDEN_CELL,
        PICK_WITHOUT_ITEM,
        PLACE_WITHOUT_CARRY,
        WRONG_BANK_ACTION,
    }
)

# Faults that stop all motion; the rest record and continue.
HALTING_FAULTS = frozenset({OUT_OF_BOUNDS, OBSTACLE_COLLISION, FORBIDDEN_CELL, ENERGY_DEPLETED})

# Event kinds.
MINERAL_COLLECTED = "MineralCollected"
MINERAL_SKIPPED_NO_ENERGY = "MineralSkippedNoEnergy"
SWAMP_ENTERED = "SwampEntered"
TRIGGER_ACTIVATED = "TriggerActivated"
ITEM_PICKED = "ItemPicked"
ITEM_PLACED = "ItemPlaced"

# Item pairs that must never be left on a bank without the robot attending.
UNSAFE_PAIRS = (frozenset({"wolf", "goat"}), frozenset({"goat", "cabbage"}))


# --- primitive actions ----------------------------------------------------


@dataclass(frozen=True)
class Translate:
    direction: str
    cells: int


@dataclass(frozen=True)
class Rotate:
    side: str
    degrees: int


@dataclass(frozen=True)
class KnightStep:
    dir_x: str
    x_cells: int
    dir_y: str
    y_cells: int
    leg_order: str = "x-first"


@dataclass(frozen=True)
class PickAction:
    item: str


@dataclass(frozen=True)
class PlaceAction:
    pass


def lower(program: BlockProgram) -> tuple:
    """Flatten a program into primitives: loops unrolled, calls inlined.

    Move blocks become Translate with their cell count already computed
    from speed and duration. Raises UnrollBudgetExceeded past 10,000
    primitives.
    """
    out: list = []

    def emit(primitive) -> None:
        if len(out) >= UNROLL_BUDGET:
            raise UnrollBudgetExceeded(f"program expands past {UNROLL_BUDGET} primitives")
        out.append(primitive)

    def walk(chain: tuple) -> None:
        for stmt in chain:
            if isinstance(stmt, Move):
                emit(Translate(stmt.direction, displacement_cells(stmt.speed, stmt.duration)))
            elif isinstance(stmt, Turn):
                emit(Rotate(stmt.side, stmt.degrees))
            elif isinstance(stmt, KnightMove):
                emit(KnightStep(stmt.dir_x, stmt.x_cells, stmt.dir_y, stmt.y_cells, stmt.leg_order))
            elif isinstance(stmt, Pick):
                emit(PickAction(stmt.item))
            elif isinstance(stmt, Place):
                emit(PlaceAction())
            elif isinstance(stmt, RepeatLoop):
                for _ in range(stmt.times):
                    walk(stmt.body)
            elif isinstance(stmt, ProcCall):
                walk(program.procedures[stmt.name])
            else:
                raise TypeError(f"not a statement: {stmt!r}")

    walk(program.main)
    return tuple(out)


# --- trace records ----------------------------------------------------------


@dataclass(frozen=True)
class Event:
    kind: str
    primitive: int
    step: int
    cell: Optional[tuple] = None
    label: Optional[str] = None
    item: Optional[str] = None


@dataclass(frozen=True)
class Fault:
    kind: str
    primitive: int
    step: int
    cell: Optional[tuple]
    detail: str


@dataclass(frozen=True)
class ExecutionTrace:
    """Complete record of one simulated run.

    ``states`` holds the start pose and the pose after every pose change
    (unit steps and turns); ``visited`` holds the cells entered, start cell
    included; ``energy`` is the ledger of values after each entered cell,
    or None for tasks without an energy model.
    """

    states: tuple
    visited: tuple
    events: tuple
    faults: tuple
    energy: Optional[tuple]

    @property
    def final_pose(self) -> Pose:
        return self.states[-1]

    @property
    def final_energy(self) -> Optional[int]:
        return self.energy[-1] if self.energy else None

    def has_fault(self, kind: str) -> bool:
        return any(f.kind == kind for f in self.faults)


# --- knight expansion -------------------------------------------------------


@dataclass(frozen=True)
class KnightExpansion:
    """Outcome of resolving one knight step from a pose.

    For a legal shape, ``cells`` lists the three traversed cells in leg
    order (the last one is the landing) and ``end_pose`` keeps the original
    orientation. ``off_grid`` flags any traversed cell outside the grid.
    """

    legal: bool
    reason: str = ""
    cells: tuple = ()
    end_pose: Optional[Pose] = None
    off_grid: tuple = ()
    first_leg_len: int = 0

    def leg_endpoints(self) -> tuple:
        """The corner (first leg's end) and the landing cell."""
        if not self.cells:
            return ()
        return (self.cells[self.first_leg_len - 1], self.cells[-1])


def expand_knight(pose: Pose, step: KnightStep) -> KnightExpansion:
    """Resolve a knight step: merge components, check shape, expand legs.

    Both relative components are converted to one global displacement
    before the legality check; a move is legal iff the merged magnitudes
    are (1,2) or (2,1). Legal moves expand into the two axis legs in the
    requested order, yielding exactly three traversed cells.
    """
    dx_part = relative_to_global(pose.orientation, step.dir_x, step.x_cells)
    dy_part = relative_to_global(pose.orientation, step.dir_y, step.y_cells)
    merged = dx_part + dy_part
    shape = (abs(merged.dx), abs(merged.dy))
    if shape not in ((1, 2), (2, 1)):
        return KnightExpansion(
            legal=False,
            reason=f"merged displacement ({merged.dx},{merged.dy}) is not a knight shape",
        )

    legs = [dx_part, dy_part] if step.leg_order == "x-first" else [dy_part, dx_part]
    cells = []
    x, y = pose.x, pose.y
    for leg in legs:
        for _ in range(abs(leg.dx)):
            x += 1 if leg.dx > 0 else -1
            cells.append((x, y))
        for _ in range(abs(leg.dy)):
            y += 1 if leg.dy > 0 else -1
            cells.append((x, y))
    off = tuple(c for c in cells if not on_grid(c))
    end = pose.at(cells[-1]) if not off else None
    first_len = abs(legs[0].dx) + abs(legs[0].dy)
    return KnightExpansion(
        legal=True, cells=tuple(cells), end_pose=end, off_grid=off, first_leg_len=first_len
    )


# --- execution ---------------------------------------------------------------


class _Run:
    """Mutable state of one simulation; builds the immutable trace."""

    def __init__(self, task: TaskSpec):
        self.task = task
        self.pose = task.start
        self.energy = task.initial_energy
        self.states = [task.start]
        self.visited = [task.start.cell]
        self.events: list = []
        self.faults: list = []
        self.ledger = [task.initial_energy] if task.initial_energy is not None else None
        self.collected: set = set()
        self.activated: set = set()
        self.left_bank = list(task.left_bank_items)
        self.right_bank: list = []
        self.carried: Optional[str] = None
        self.seen = {task.start.cell}
        self.halted = False
        self.prim = 0

    # step index: position the entered cell has (or would have) in `visited`
    @property
    def next_step(self) -> int:
        return len(self.visited)

    def fault(
        self, kind: str, cell, detail: str, halting: Optional[bool] = None, step: Optional[int] = None
    ) -> None:
        # step defaults to the index the offending cell would have in visited
        self.faults.append(
            Fault(kind, self.prim, self.next_step if step is None else step, cell, detail)
        )
        if halting is None:
            halting = kind in HALTING_FAULTS
        if halting:
            self.halted = True

    def event(self, kind: str, **payload) -> None:
        self.events.append(Event(kind, self.prim, len(self.visited) - 1, **payload))

    # -- world reactions per entered cell --

    def enter_cell(self, cell: tuple) -> None:
        task = self.task
        self.pose = self.pose.at(cell)
        self.states.append(self.pose)
        self.visited.append(cell)
        here = len(self.visited) - 1
        if task.tracks_revisits and cell in self.seen:
            self.fault(REVISIT_VIOLATION, cell, f"cell {cell} was already visited", step=here)
        self.seen.add(cell)

        if self.energy is not None:
            self.energy -= 1  # movement cost
            if cell in task.swamps:
                self.energy -= 2
                self.event(SWAMP_ENTERED, cell=cell)
            if self.energy < 0:
                self.ledger.append(self.energy)
                self.fault(ENERGY_DEPLETED, cell, "energy dropped below zero", step=here)
                return
            if cell in task.minerals and cell not in self.collected:
                if self.energy >= 1:
                    self.energy += 2  # collect: -1 cost, +3 restored
                    self.collected.add(cell)
                    self.event(MINERAL_COLLECTED, cell=cell)
                else:
                    self.event(MINERAL_SKIPPED_NO_ENERGY, cell=cell)
            self.ledger.append(self.energy)
        else:
            if cell in task.swamps:
                self.event(SWAMP_ENTERED, cell=cell)
            if cell in task.minerals and cell not in self.collected:
                self.collected.add(cell)
                self.event(MINERAL_COLLECTED, cell=cell)

        for label, trigger_cell in task.triggers:
            if trigger_cell == cell and label not in self.activated:
                self.activated.add(label)
                self.event(TRIGGER_ACTIVATED, label=label, cell=cell)

        self.check_bank_safety()

    def check_bank_safety(self) -> None:
        """Unattended-bank rule: the robot attends the bank end it occupies."""
        task = self.task
        if not task.policies.safety_rules_on or not task.left_bank_items:
            return
        rule_on = getattr(task.success_rule, "safety", True)
        if not rule_on:
            return
        cell = self.pose.cell
        unattended = None
        side = ""
        if cell == task.bank_place_cell():
            unattended, side = self.left_bank, "left"
        elif cell == task.bank_pick_cell():
            unattended, side = self.right_bank, "right"
        if unattended is None:
            return
        bank = set(unattended)
        for pair in UNSAFE_PAIRS:
            if pair <= bank:
                self.fault(
                    WRONG_BANK_ACTION,
                    cell,
                    f"{' and '.join(sorted(pair))} left together on the {side} bank",
                    step=len(self.visited) - 1,
                )
                return

    # -- motion --

    def unit_step(self, delta: Delta) -> bool:
        """Move one cell; returns False if motion was refused."""
        task = self.task
        target = (self.pose.x + delta.dx, self.pose.y + delta.dy)
        if not on_grid(target):
            self.fault(OUT_OF_BOUNDS, target, f"move leaves the grid at {target}", halting=task.policies.halt_on_oob)
            return False
        if target in task.forbidden_cells:
            self.fault(FORBIDDEN_CELL, target, f"the robot may not enter {target}")
            return False
        if target in task.obstacles:
            self.fault(OBSTACLE_COLLISION, target, f"obstacle at {target}")
            return False
        if self.energy is not None and self.energy < 1:
            self.fault(ENERGY_DEPLETED, target, "no energy left to move")
            return False
        self.enter_cell(target)
        return True

    def run_translate(self, action: Translate) -> None:
        delta = relative_to_global(self.pose.orientation, action.direction, 1)
        for _ in range(action.cells):
            if self.halted or not self.unit_step(delta):
                break

    def run_rotate(self, action: Rotate) -> None:
        self.pose = self.pose.facing(rotate(self.pose.orientation, action.side, action.degrees))
        self.states.append(self.pose)

    def run_knight(self, action: KnightStep) -> None:
        """Atomic jump: either the whole expansion commits or none of it."""
        task = self.task
        expansion = expand_knight(self.pose, action)
        if not expansion.legal:
            self.fault(ILLEGAL_KNIGHT_MOVE, self.pose.cell, expansion.reason)
            return
        if expansion.off_grid:
            self.fault(
                OUT_OF_BOUNDS,
                expansion.off_grid[0],
                f"knight move leaves the grid at {expansion.off_grid[0]}",
                halting=task.policies.halt_on_oob,
            )
            return
        landing = expansion.cells[-1]
        jumped = expansion.cells[:-1]
        blocked = [landing] if not task.policies.knight_obstacles_block_intermediates else list(expansion.cells)
        for cell in blocked:
            if cell in task.obstacles:
                self.fault(OBSTACLE_COLLISION, cell, f"obstacle at {cell}")
                return
            if cell in task.forbidden_cells:
                self.fault(FORBIDDEN_CELL, cell, f"the robot may not enter {cell}")
                return
        if task.policies.knight_intermediates_count:
            entered = expansion.cells
        else:
            # Only the two leg endpoints count as visited; the mid cell of
            # the long leg is jumped over without being recorded.
            entered = expansion.leg_endpoints()
        for cell in entered:
            self.enter_cell(cell)
            if self.halted:
                return

    def run_pick(self, action: PickAction) -> None:
        task = self.task
        here = len(self.visited) - 1
        if not task.river_cells:
            self.fault(
                WRONG_BANK_ACTION, self.pose.cell, "there is nothing to pick up in this task", step=here
            )
            return
        cell = self.pose.cell
        if cell == task.bank_pick_cell() and self.pose.orientation == _store_facing(task):
            source, side = self.left_bank, "left"
        elif cell == task.bank_place_cell() and self.pose.orientation == _bank_facing(task):
            source, side = self.right_bank, "right"
        else:
            self.fault(
                WRONG_BANK_ACTION,
                cell,
                "picking requires standing at a bank end, facing the bank",
                step=here,
            )
            return
        if self.carried is not None:
            self.fault(PICK_WITHOUT_ITEM, cell, f"already carrying {self.carried}", step=here)
            return
        if action.item not in source:
            self.fault(PICK_WITHOUT_ITEM, cell, f"{action.item} is not on the {side} bank", step=here)
            return
        source.remove(action.item)
        self.carried = action.item
        self.event(ITEM_PICKED, item=action.item)
        self.check_bank_safety()

    def run_place(self, action: PlaceAction) -> None:
        task = self.task
        here = len(self.visited) - 1
        if not task.river_cells:
            self.fault(
                WRONG_BANK_ACTION, self.pose.cell, "there is nowhere to place items in this task", step=here
            )
            return
        cell = self.pose.cell
        if cell == task.bank_place_cell():
            target, target_cell = self.right_bank, task.right_bank_cell
        elif cell == task.bank_pick_cell():
            target, target_cell = self.left_bank, None  # store is off-grid
        else:
            self.fault(WRONG_BANK_ACTION, cell, "placing requires standing at a bank end", step=here)
            return
        if self.carried is None:
            self.fault(PLACE_WITHOUT_CARRY, cell, "nothing is being carried", step=here)
            return
        target.append(self.carried)
        self.event(ITEM_PLACED, item=self.carried, cell=target_cell)
        self.carried = None
        self.check_bank_safety()

    def finish(self) -> ExecutionTrace:
        return ExecutionTrace(
            states=tuple(self.states),
            visited=tuple(self.visited),
            events=tuple(self.events),
            faults=tuple(self.faults),
            energy=tuple(self.ledger) if self.ledger is not None else None,
        )


def _store_facing(task: TaskSpec) -> str:
    """Orientation that faces the off-grid item store from the pick cell."""
    pick = task.bank_pick_cell()
    place = task.bank_place_cell()
    if pick is None:
        return "West"
    if place is None or pick == place:
        return "West"
    dx = pick[0] - place[0]
    dy = pick[1] - place[1]
    if abs(dx) >= abs(dy):
        return "East" if dx > 0 else "West"
    return "North" if dy > 0 else "South"


def _bank_facing(task: TaskSpec) -> str:
    """Orientation that faces the far bank from the place cell."""
    place = task.bank_place_cell()
    bank = task.right_bank_cell
    if place is None or bank is None:
        return "East"
    dx = bank[0] - place[0]
    dy = bank[1] - place[1]
    if abs(dx) >= abs(dy):
        return "East" if dx > 0 else "West"
    return "North" if dy > 0 else "South"


def execute(actions: tuple, task: TaskSpec) -> ExecutionTrace:
    """Simulate an action sequence from the task's start pose.

    Deterministic: identical inputs produce the identical trace. All
    failures are recorded Faults; a halting fault stops every primitive
    after it.
    """
    run = _Run(task)
    for index, action in enumerate(actions):
        if run.halted:
            break
        run.prim = index
        if isinstance(action, Translate):
            run.run_translate(action)
        elif isinstance(action, Rotate):
            run.run_rotate(action)
        elif isinstance(action, KnightStep):
            run.run_knight(action)
        elif isinstance(action, PickAction):
            run.run_pick(action)
        elif isinstance(action, PlaceAction):
            run.run_place(action)
        else:
            raise TypeError(f"not a primitive action: {action!r}")
    return run.finish()


def run_program(program: BlockProgram, task: TaskSpec) -> ExecutionTrace:
    return execute(lower(program), task)


# --- canonical serialization -------------------------------------------------

_EVENT_CELL_KINDS = frozenset(
    {MINERAL_COLLECTED, MINERAL_SKIPPED_NO_ENERGY, SWAMP_ENTERED, TRIGGER_ACTIVATED, ITEM_PLACED}
)


def event_to_json(event: Event) -> dict:
    out: dict = {"type": event.kind}
    if event.label is not None:
        out["label"] = event.label
    if event.item is not None:
        out["item"] = event.item
    if event.kind in _EVENT_CELL_KINDS:
        out["cell"] = None if event.cell is None else [event.cell[0], event.cell[1]]
    out["primitive"] = event.primitive
    out["step"] = event.step
    return out


def fault_to_json(fault: Fault) -> dict:
    return {
        "kind": fault.kind,
        "primitive": fault.primitive,
        "step": fault.step,
        "cell": None if fault.cell is None else [fault.cell[0], fault.cell[1]],
        "detail": fault.detail,
    }


def trace_to_json(trace: ExecutionTrace) -> dict:
    """Canonical trace dict: states, visited, events, faults, energy."""
    return {
        "states": [[p.x, p.y, p.orientation] for p in trace.states],
        "visited": [[c[0], c[1]] for c in trace.visited],
        "events": [event_to_json(e) for e in trace.events],
        "faults": [fault_to_json(f) for f in trace.faults],
        "energy": list(trace.energy) if trace.energy is not None else None,
    }


def canonical_trace(trace: ExecutionTrace) -> str:
    return json.dumps(trace_to_json(trace))
