"""Decide task success from a trace and render the four-key verdict JSON.

The verdict shape on the wire is exactly ``{"text", "xml", "is_correct",
"return_button"}`` in that key order, and the two flags always agree:
success both true, failure both false. Feedback text comes from fixed
templates, one per failure kind, so the engine stays deterministic.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Optional

from . import executor as ex
from .blocks import BlockProgram, Move, ProcCall, RepeatLoop, iter_statements
from .executor import ExecutionTrace
from .grid import displacement_cells
from .tasks import (
    CollectAllMinerals,
    CoverAllCells,
    FollowExactCellPath,
    KnightFullCover,
    StructuralChecks,
    TaskSpec,
    TransportAllItems,
    required_cells,
)


@dataclass(frozen=True)
class FaultReport:
    """Localized first cause of a failed run."""

    kind: str
    primitive: int
    step: int
    cell: Optional[tuple]
    detail: str = ""

    @property
    def template(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Verdict:
    is_correct: bool
    return_button: bool
    feedback_text: str
    echo_xml: Optional[str] = None
    fault_report: Optional[FaultReport] = None


# One fixed feedback template per fault/diagnosis kind, plus success.
_CELL = "({0}, {1})"

TEMPLATES = {
    "success": "Well done! The robot completed the task. You can return to the task menu.",
    ex.OUT_OF_BOUNDS: "The robot would leave the grid at {cell}. Every move must stay inside the 5x5 area.",
    ex.OBSTACLE_COLLISION: "The robot ran into the obstacle at {cell}. Plan the route around blocked cells.",
    ex.ILLEGAL_KNIGHT_MOVE: "The move at block {primitive} is not a knight move: {detail}.",
    ex.REVISIT_VIOLATION: "The robot returned to {cell}, but each cell may be visited only once.",
    ex.ENERGY_DEPLETED: "The robot ran out of energy at {cell}. Watch the energy cost of each move.",
    ex.FORBIDDEN_CELL: "The robot may not enter {cell}; items can be placed there, but the robot stays out.",
    ex.PICK_WITHOUT_ITEM: "That pick-up failed: {detail}.",
    ex.PLACE_WITHOUT_CARRY: "There is nothing to place: the robot is not carrying anything.",
    ex.WRONG_BANK_ACTION: "Unsafe or misplaced bank action at {cell}: {detail}.",
    ex.MINERAL_SKIPPED_NO_ENERGY: "The robot reached the mineral at {cell} without energy left to collect it.",
    "structural-procedure": "The helper function is not defined correctly: it needs exactly {steps} movement steps that sweep two rows.",
    "structural-loop": "The helper function looks right, but the loop count is wrong: call it {times} times.",
    "path-divergence": "The route is wrong from step {step}: expected the robot at {expected}, but it went to {actual}.",
    "path-incomplete": "The route stops too early: only {got} of {want} cells of the required path were walked.",
    "path-overrun": "The route is longer than the required path: {got} cells walked, {want} expected.",
    "coverage-incomplete": "Not every tile was covered: {missing} cells are still unvisited, for example {example}.",
    "minerals-missing": "Not all minerals were collected: {missing} remain, for example the one at {example}.",
    "energy-final": "All minerals need to be collected with energy left over, but the run ends at {energy}.",
    "items-missing": "Not every item reached the far bank: {missing} still waiting, for example the {example}.",
    "knight-coverage": "The tour must visit every free cell exactly once; {missing} cells were never reached.",
    "wrong-goal": "The tour must end on the goal cell {goal}, but the robot stopped at {actual}.",
    "no-motion": "The program produced no movement, so the task cannot be complete.",
}


def _cell_text(cell) -> str:
    return _CELL.format(cell[0], cell[1]) if cell is not None else "(?)"


def _fill(template_id: str, **values) -> str:
    text = TEMPLATES[template_id]
    if "cell" in values:
        values["cell"] = _cell_text(values["cell"])
    return text.format(**values)


def first_fault(trace: ExecutionTrace, task: TaskSpec = None) -> Optional[FaultReport]:
    """Earliest recorded fault by (primitive, step); None for clean traces."""
    if not trace.faults:
        return None
    fault = min(trace.faults, key=lambda f: (f.primitive, f.step))
    return FaultReport(fault.kind, fault.primitive, fault.step, fault.cell, fault.detail)


def _report_from_fault(fault: ex.Fault) -> FaultReport:
    return FaultReport(fault.kind, fault.primitive, fault.step, fault.cell, fault.detail)


def _report_from_event(event: ex.Event) -> FaultReport:
    return FaultReport(event.kind, event.primitive, event.step, event.cell)


def _fault_text(report: FaultReport) -> str:
    return _fill(report.kind, cell=report.cell, detail=report.detail, primitive=report.primitive)


def _failure(text: str, echo_xml, report: Optional[FaultReport] = None) -> Verdict:
    return Verdict(False, False, text, echo_xml, report)


def _success(echo_xml) -> Verdict:
    return Verdict(True, True, _fill("success"), echo_xml, None)


# --- structural checks (tile-cleaning) -------------------------------------

_SWEEP_PATTERN = (("forward", 4), ("left", 1), ("backward", 4), ("left", 1))


def _body_matches_sweep(body: tuple, checks: StructuralChecks) -> bool:
    if len(body) != checks.body_step_count:
        return False
    if not all(isinstance(s, Move) for s in body):
        return False
    steps = tuple((s.direction, displacement_cells(s.speed, s.duration)) for s in body)
    return steps == _SWEEP_PATTERN


def _loop_calls(program: BlockProgram, name: str, times: int) -> bool:
    for chain in program.all_chains():
        for stmt in iter_statements(chain):
            if isinstance(stmt, RepeatLoop) and stmt.times == times:
                if any(isinstance(s, ProcCall) and s.name == name for s in iter_statements(stmt.body)):
                    return True
    return False


def _structural_failure(program: BlockProgram, checks: StructuralChecks) -> Optional[str]:
    """None if the program shape passes; else the failing template id."""
    matching = [n for n, body in program.procedures.items() if _body_matches_sweep(body, checks)]
    if not matching:
        return "structural-procedure"
    if not any(_loop_calls(program, name, checks.loop_times) for name in matching):
        return "structural-loop"
    return None


# --- rule dispatch ----------------------------------------------------------


def _check_cover(trace, program, rule: CoverAllCells, task, echo_xml) -> Verdict:
    if rule.structural is not None:
        failed = _structural_failure(program, rule.structural)
        if failed == "structural-procedure":
            return _failure(_fill(failed, steps=rule.structural.body_step_count), echo_xml)
        if failed == "structural-loop":
            return _failure(_fill(failed, times=rule.structural.loop_times), echo_xml)
    required = required_cells(rule)
    missing = required - set(trace.visited)
    if missing:
        report = first_fault(trace)
        text = (
            _fault_text(report)
            if report is not None
            else _fill("coverage-incomplete", missing=len(missing), example=_cell_text(min(missing)))
        )
        return _failure(text, echo_xml, report)
    return _success(echo_xml)


def _check_path(trace, rule: FollowExactCellPath, echo_xml) -> Verdict:
    visited = trace.visited
    path = rule.path
    if visited == path:
        return _success(echo_xml)
    report = first_fault(trace)
    if report is not None:
        return _failure(_fault_text(report), echo_xml, report)
    for i, (got, want) in enumerate(zip(visited, path)):
        if got != want:
            text = _fill("path-divergence", step=i, expected=_cell_text(want), actual=_cell_text(got))
            return _failure(text, echo_xml)
    if len(visited) < len(path):
        return _failure(_fill("path-incomplete", got=len(visited), want=len(path)), echo_xml)
    return _failure(_fill("path-overrun", got=len(visited), want=len(path)), echo_xml)


def _check_minerals(trace, rule: CollectAllMinerals, task: TaskSpec, echo_xml) -> Verdict:
    collected = {e.cell for e in trace.events if e.kind == ex.MINERAL_COLLECTED}
    missing = task.minerals - collected
    halting = [f for f in trace.faults if f.kind in ex.HALTING_FAULTS]
    final = trace.final_energy
    if not missing and final is not None and final > rule.min_final_energy and not halting:
        return _success(echo_xml)
    skipped = [e for e in trace.events if e.kind == ex.MINERAL_SKIPPED_NO_ENERGY]
    if skipped:
        report = _report_from_event(skipped[0])
        return _failure(_fill(ex.MINERAL_SKIPPED_NO_ENERGY, cell=report.cell), echo_xml, report)
    if halting:
        report = _report_from_fault(min(halting, key=lambda f: (f.primitive, f.step)))
        return _failure(_fault_text(report), echo_xml, report)
    if missing:
        text = _fill("minerals-missing", missing=len(missing), example=_cell_text(min(missing)))
        return _failure(text, echo_xml)
    return _failure(_fill("energy-final", energy=final), echo_xml)


def _check_transport(trace, rule: TransportAllItems, task: TaskSpec, echo_xml) -> Verdict:
    # Final item locations are replayed from the pick/place event sequence.
    location = {item: "left" for item in task.left_bank_items}
    for event in trace.events:
        if event.kind == ex.ITEM_PICKED:
            location[event.item] = "carried"
        elif event.kind == ex.ITEM_PLACED:
            location[event.item] = event.cell  # None means back on the left store
    bad = [f for f in trace.faults if f.kind in (ex.WRONG_BANK_ACTION, ex.FORBIDDEN_CELL)]
    if bad:
        report = _report_from_fault(min(bad, key=lambda f: (f.primitive, f.step)))
        return _failure(_fault_text(report), echo_xml, report)
    not_delivered = sorted(item for item, loc in location.items() if loc != rule.to)
    if not_delivered:
        text = _fill("items-missing", missing=len(not_delivered), example=not_delivered[0])
        report = first_fault(trace)
        return _failure(_fault_text(report) if report else text, echo_xml, report)
    return _success(echo_xml)


def _check_knight(trace, rule: KnightFullCover, task: TaskSpec, echo_xml) -> Verdict:
    illegal = [f for f in trace.faults if f.kind == ex.ILLEGAL_KNIGHT_MOVE]
    if illegal:
        report = _report_from_fault(min(illegal, key=lambda f: (f.primitive, f.step)))
        return _failure(_fault_text(report), echo_xml, report)
    report = first_fault(trace)
    if report is not None:
        return _failure(_fault_text(report), echo_xml, report)
    counts = Counter(trace.visited)
    required = required_cells(rule)
    missing = [c for c in required if counts[c] != 1]
    if missing:
        return _failure(_fill("knight-coverage", missing=len(missing)), echo_xml)
    if trace.visited[-1] != rule.goal:
        text = _fill("wrong-goal", goal=_cell_text(rule.goal), actual=_cell_text(trace.visited[-1]))
        return _failure(text, echo_xml)
    return _success(echo_xml)


def check(
    trace: ExecutionTrace,
    program: BlockProgram,
    task: TaskSpec,
    echo_xml: Optional[str] = None,
) -> Verdict:
    """Judge one executed run against a task's success rule."""
    rule = task.success_rule
    if isinstance(rule, CoverAllCells):
        return _check_cover(trace, program, rule, task, echo_xml)
    if isinstance(rule, FollowExactCellPath):
        return _check_path(trace, rule, echo_xml)
    if isinstance(rule, CollectAllMinerals):
        return _check_minerals(trace, rule, task, echo_xml)
    if isinstance(rule, TransportAllItems):
        return _check_transport(trace, rule, task, echo_xml)
    if isinstance(rule, KnightFullCover):
        return _check_knight(trace, rule, task, echo_xml)
    raise TypeError(f"not a success rule: {rule!r}")


def verdict_to_json(verdict: Verdict) -> dict:
    """The four wire keys, in the fixed order."""
    return {
        "text": verdict.feedback_text,
        "xml": verdict.echo_xml,
        "is_correct": verdict.is_correct,
        "return_button": verdict.return_button,
    }


def render_feedback(verdict: Verdict) -> str:
    return json.dumps(verdict_to_json(verdict))
