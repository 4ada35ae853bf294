"""Brute-force oracles: BFS path lengths, river crossing plans, and a replay
of the published knight tour used to pin down the coverage rules.

These are independent of the simulation path they are used to validate:
the river solver searches bank states, not robot motion, and the knight
check replays a fixed move list and counts cells by hand.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Optional

from .blocks import BlockProgram, Move, Pick, Place, Turn
from .errors import Unreachable, Unsolvable
from .executor import KnightStep, execute
from .grid import GRID_SIZE, on_grid
from .tasks import TaskSpec, TransportAllItems, builtin_tasks, with_policies

# Unattended pairs, same rule the executor enforces.
_UNSAFE = (frozenset({"wolf", "goat"}), frozenset({"goat", "cabbage"}))


def shortest_path_len(task: TaskSpec, start: tuple, goal: tuple) -> int:
    """Exact minimum number of 4-neighbor steps avoiding obstacles."""
    for cell in (start, goal):
        if not on_grid(cell):
            raise Unreachable(f"cell {cell} is off the grid")
    if goal in task.obstacles:
        raise Unreachable(f"goal {goal} is inside an obstacle")
    if start == goal:
        return 0
    frontier = deque([(start, 0)])
    seen = {start}
    while frontier:
        (x, y), dist = frontier.popleft()
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if not on_grid(nxt) or nxt in task.obstacles or nxt in seen:
                continue
            if nxt == goal:
                return dist + 1
            seen.add(nxt)
            frontier.append((nxt, dist + 1))
    raise Unreachable(f"no path from {start} to {goal}")


# --- river crossing ---------------------------------------------------------


@dataclass(frozen=True)
class Crossing:
    direction: str  # "L->R" or "R->L"
    item: Optional[str] = None


def _bank_safe(bank: frozenset, safety: bool) -> bool:
    if not safety:
        return True
    return not any(pair <= bank for pair in _UNSAFE)


def river_solver(task: TaskSpec) -> tuple:
    """Minimum-crossing plan ferrying every item to the far bank.

    Breadth-first search over (items on the left bank, robot bank); one
    crossing moves the robot and at most one item. The bank the robot is
    not on must stay safe after every crossing. Returns a tuple of
    Crossing records; raises Unsolvable when no plan exists.
    """
    if not isinstance(task.success_rule, TransportAllItems):
        raise Unsolvable(f"task {task.id!r} is not a river-crossing task")
    items = frozenset(task.left_bank_items)
    safety = task.success_rule.safety and task.policies.safety_rules_on
    start = (items, "L")
    if not items:
        return ()

    def moves(state):
        left, bank = state
        here = left if bank == "L" else items - left
        for cargo in sorted(here) + [None]:
            if cargo is None:
                new_left = left
            elif bank == "L":
                new_left = left - {cargo}
            else:
                new_left = left | {cargo}
            new_bank = "R" if bank == "L" else "L"
            unattended = new_left if new_bank == "R" else items - new_left
            if _bank_safe(unattended, safety):
                direction = "L->R" if bank == "L" else "R->L"
                yield (new_left, new_bank), Crossing(direction, cargo)

    frontier = deque([start])
    parent = {start: None}
    while frontier:
        state = frontier.popleft()
        left, bank = state
        if not left and bank == "R":
            plan = []
            while parent[state] is not None:
                state, crossing = parent[state]
                plan.append(crossing)
            return tuple(reversed(plan))
        for nxt, crossing in moves(state):
            if nxt not in parent:
                parent[nxt] = (state, crossing)
                frontier.append(nxt)
    raise Unsolvable("no safe crossing plan exists")


def plan_to_program(plan: tuple, crossing_cells: int = 2) -> BlockProgram:
    """Hand-lower a crossing plan into move/turn/pick/place blocks.

    Each crossing turns the robot around and drives the length of the
    river; loaded crossings pick before departing and place on arrival.
    The robot is assumed to start at the pick cell facing the item store.
    """
    stmts = []
    for crossing in plan:
        if crossing.item is not None:
            stmts.append(Pick(crossing.item))
        stmts.append(Turn("left", 180))
        stmts.append(Move("forward", 300, crossing_cells))
        if crossing.item is not None:
            stmts.append(Place())
    return BlockProgram(main=tuple(stmts))


# --- knight tour reference ---------------------------------------------------

# The published seven-move tour of the knight task, as knight steps relative
# to a North-facing robot, with the leg order that reproduces its cell pairs.
REFERENCE_KNIGHT_STEPS = (
    KnightStep("right", 2, "forward", 1, "x-first"),
    KnightStep("left", 2, "forward", 1, "x-first"),
    KnightStep("right", 1, "forward", 2, "y-first"),
    KnightStep("right", 1, "backward", 2, "y-first"),
    KnightStep("right", 1, "forward", 2, "y-first"),
    KnightStep("right", 1, "backward", 2, "y-first"),
    KnightStep("left", 1, "backward", 2, "y-first"),
)


@dataclass(frozen=True)
class KnightReferenceReport:
    assertions: tuple  # (name, ok, detail) triples
    covered_cells: int
    final_cell: tuple

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.assertions)


def knight_reference_check(task: TaskSpec = None) -> KnightReferenceReport:
    """Replay the reference knight tour and audit the coverage rules.

    Under default policies all assertions hold: 22 distinct cells (the grid
    minus three obstacles), each visited exactly once, no obstacle landed
    on, final cell equal to the goal.
    """
    if task is None:
        task = builtin_tasks()[4]
    trace = execute(REFERENCE_KNIGHT_STEPS, task)
    rule = task.success_rule
    free_cells = GRID_SIZE * GRID_SIZE - len(rule.exceptions)
    counts = Counter(trace.visited)
    distinct = len(counts)
    assertions = (
        (
            "covers-all-free-cells",
            distinct == free_cells,
            f"{distinct} distinct cells visited, expected {free_cells}",
        ),
        (
            "each-cell-once",
            all(n == 1 for n in counts.values()) and not trace.has_fault("RevisitViolation"),
            f"max visit count {max(counts.values())}",
        ),
        (
            "no-obstacle-landed",
            all(cell not in task.obstacles for cell in trace.visited) and not trace.has_fault("ObstacleCollision"),
            "obstacle cells stayed untouched",
        ),
        (
            "ends-on-goal",
            trace.visited[-1] == rule.goal,
            f"final cell {trace.visited[-1]}, goal {rule.goal}",
        ),
        (
            "no-faults",
            not trace.faults,
            f"{len(trace.faults)} faults recorded",
        ),
    )
    return KnightReferenceReport(assertions, distinct, trace.visited[-1])


def knight_reference_check_variant(
    intermediates_count: bool = True, obstacles_block_intermediates: bool = False
) -> KnightReferenceReport:
    """Reference replay under flipped coverage policies."""
    task = with_policies(
        builtin_tasks()[4],
        knight_intermediates_count=intermediates_count,
        knight_obstacles_block_intermediates=obstacles_block_intermediates,
    )
    return knight_reference_check(task)
