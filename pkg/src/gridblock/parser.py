"""Blockly-XML subset: parse to AST, serialize back, validate against a catalog.

Only the elements ``xml``, ``block``, ``field``, ``next``, ``statement`` and
``mutation`` are interpreted; unknown attributes are ignored, unknown
elements are rejected. The Blockly namespace is accepted but not required.

Statement order follows the ``<next>`` chains; ``<statement name="DO">``
nests loop bodies and procedure bodies use ``<statement name="STACK">``
(``DO`` is accepted there too). Procedure calls carry the callee name in
``<mutation name="...">`` or, as a fallback, a ``NAME`` field.

Knight-move components encode direction and magnitude in one field value:
``DIR_X``/``DIR_Y`` accept ``right``, ``left:2``, ``forward:1`` and so on;
a bare direction means one cell.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .blocks import (
    UNIVERSAL_CATALOG,
    BlockCatalog,
    BlockProgram,
    KnightMove,
    Move,
    Pick,
    Place,
    ProcCall,
    RepeatLoop,
    Statement,
    Turn,
    block_type_of,
)
from .errors import (
    DanglingCall,
    MissingField,
    RecursiveProcedure,
    UnknownBlockType,
    XmlMalformed,
)

BLOCKLY_NS = "https://developers.google.com/blockly/xml"

_MOVE_TYPES = {"move_forward", "move_backward", "move_left", "move_right"}
_TURN_TYPES = {"turn_left", "turn_right"}
_KNIGHT_DIR_X = ("left", "right")
_KNIGHT_DIR_Y = ("forward", "backward")
_LEG_ORDERS = ("x-first", "y-first")
_SUBSET_ELEMENTS = {"xml", "block", "field", "next", "statement", "mutation"}


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _children(elem) -> list:
    out = []
    for child in elem:
        name = _localname(child.tag)
        if name not in _SUBSET_ELEMENTS:
            raise XmlMalformed(f"element <{name}> is outside the supported subset")
        out.append((name, child))
    return out


def _fields_of(block) -> dict:
    fields = {}
    for name, child in _children(block):
        if name == "field":
            fname = child.get("name")
            if not fname:
                raise XmlMalformed("<field> without a name attribute")
            fields[fname] = (child.text or "").strip()
    return fields


def _statement_child(block, accepted_names) -> "ET.Element | None":
    for name, child in _children(block):
        if name == "statement" and child.get("name") in accepted_names:
            return child
    return None


def _next_block(block):
    for name, child in _children(block):
        if name == "next":
            blocks = [c for n, c in _children(child) if n == "block"]
            if len(blocks) != 1:
                raise XmlMalformed("<next> must contain exactly one <block>")
            return blocks[0]
    return None


def _mutation_name(block) -> "str | None":
    for name, child in _children(block):
        if name == "mutation":
            return child.get("name")
    return None


def _require(fields: dict, fname: str, btype: str) -> str:
    if fname not in fields or fields[fname] == "":
        raise MissingField(f"block {btype} is missing field {fname}")
    return fields[fname]


def _parse_number(value: str, fname: str, btype: str) -> float:
    try:
        num = float(value)
    except ValueError:
        raise MissingField(f"field {fname} of {btype} is not numeric: {value!r}") from None
    if not math.isfinite(num):
        raise MissingField(f"field {fname} of {btype} must be finite, got {value!r}")
    return num


def _parse_positive(value: str, fname: str, btype: str) -> float:
    num = _parse_number(value, fname, btype)
    if num <= 0:
        raise MissingField(f"field {fname} of {btype} must be > 0, got {value!r}")
    return num


def _parse_int(value: str, fname: str, btype: str) -> int:
    num = _parse_number(value, fname, btype)
    if num != int(num):
        raise MissingField(f"field {fname} of {btype} must be an integer, got {value!r}")
    return int(num)


def _parse_knight_component(value: str, fname: str, btype: str, allowed) -> tuple:
    """Split ``dir[:count]`` into (direction, cells); bare direction = 1."""
    direction, _, count_text = value.partition(":")
    direction = direction.strip()
    if direction not in allowed:
        raise MissingField(
            f"field {fname} of {btype} must start with one of {allowed}, got {value!r}"
        )
    if not count_text:
        return direction, 1
    cells = _parse_int(count_text.strip(), fname, btype)
    if cells < 0:
        raise MissingField(f"field {fname} of {btype} must not be negative, got {value!r}")
    return direction, cells


def _parse_statement_block(block, catalog: BlockCatalog) -> Statement:
    btype = block.get("type")
    if not btype:
        raise XmlMalformed("<block> without a type attribute")
    if btype not in catalog:
        raise UnknownBlockType(f"unknown block type {btype!r}")
    fields = _fields_of(block)

    if btype in _MOVE_TYPES:
        speed = _parse_positive(_require(fields, "SPEED", btype), "SPEED", btype)
        duration = _parse_positive(_require(fields, "DURATION", btype), "DURATION", btype)
        return Move(btype.removeprefix("move_"), speed, duration)

    if btype in _TURN_TYPES:
        degrees = _parse_int(_require(fields, "DEGREES", btype), "DEGREES", btype)
        if degrees not in (90, 180):
            raise MissingField(f"field DEGREES of {btype} must be 90 or 180, got {degrees}")
        return Turn(btype.removeprefix("turn_"), degrees)

    if btype == "move_knight":
        dir_x, x_cells = _parse_knight_component(
            _require(fields, "DIR_X", btype), "DIR_X", btype, _KNIGHT_DIR_X
        )
        dir_y, y_cells = _parse_knight_component(
            _require(fields, "DIR_Y", btype), "DIR_Y", btype, _KNIGHT_DIR_Y
        )
        leg_order = fields.get("LEG_ORDER", "") or "x-first"
        if leg_order not in _LEG_ORDERS:
            raise MissingField(f"field LEG_ORDER of {btype} must be x-first or y-first")
        return KnightMove(dir_x, x_cells, dir_y, y_cells, leg_order)

    if btype == "pick_item":
        return Pick(_require(fields, "ITEM", btype))

    if btype == "place_item":
        return Place()

    if btype == "controls_repeat":
        times = _parse_int(_require(fields, "TIMES", btype), "TIMES", btype)
        if times < 0:
            raise MissingField(f"field TIMES of controls_repeat must be >= 0, got {times}")
        body_elem = _statement_child(block, ("DO",))
        body = _parse_chain_elem(body_elem, catalog) if body_elem is not None else ()
        return RepeatLoop(times, body)

    if btype == "procedures_callnoreturn":
        name = _mutation_name(block) or fields.get("NAME")
        if not name:
            raise MissingField("procedures_callnoreturn without a procedure name")
        return ProcCall(name)

    if btype == "procedures_defnoreturn":
        raise XmlMalformed("procedure definitions must be top-level blocks")

    raise UnknownBlockType(f"unknown block type {btype!r}")


def _parse_chain(block, catalog: BlockCatalog) -> tuple:
    """Follow a block's <next> chain into a statement tuple."""
    out = []
    while block is not None:
        out.append(_parse_statement_block(block, catalog))
        block = _next_block(block)
    return tuple(out)


def _parse_chain_elem(statement_elem, catalog: BlockCatalog) -> tuple:
    blocks = [c for n, c in _children(statement_elem) if n == "block"]
    if not blocks:
        return ()
    if len(blocks) > 1:
        raise XmlMalformed("<statement> must contain at most one chain head")
    return _parse_chain(blocks[0], catalog)


def _check_recursion(procedures: dict) -> None:
    # Depth-first search over the call graph; any back edge is a cycle.
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {name: WHITE for name in procedures}

    def visit(name: str) -> None:
        color[name] = GRAY
        for stmt in _calls_in(procedures[name]):
            callee = stmt.name
            if color.get(callee) == GRAY:
                raise RecursiveProcedure(f"procedure {callee!r} calls itself (possibly indirectly)")
            if color.get(callee) == WHITE:
                visit(callee)
        color[name] = BLACK

    for name in procedures:
        if color[name] == WHITE:
            visit(name)


def _calls_in(chain: tuple):
    for stmt in chain:
        if isinstance(stmt, ProcCall):
            yield stmt
        elif isinstance(stmt, RepeatLoop):
            yield from _calls_in(stmt.body)


def _check_calls_defined(program: BlockProgram) -> None:
    for chain in program.all_chains():
        for call in _calls_in(chain):
            if call.name not in program.procedures:
                raise DanglingCall(f"call to undefined procedure {call.name!r}")


def parse_program(xml_text: str, catalog: "BlockCatalog | None" = None) -> BlockProgram:
    """Parse Blockly-XML text into a BlockProgram.

    Top-level procedure definitions populate the procedures map; every
    other top-level chain is appended, in document order, to main.
    """
    if catalog is None:
        catalog = UNIVERSAL_CATALOG
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise XmlMalformed(f"not well-formed XML: {exc}") from None
    if _localname(root.tag) != "xml":
        raise XmlMalformed(f"root element must be <xml>, got <{_localname(root.tag)}>")

    procedures: dict = {}
    main: list = []
    for name, child in _children(root):
        if name != "block":
            raise XmlMalformed(f"unexpected top-level element <{name}>")
        btype = child.get("type")
        if btype == "procedures_defnoreturn":
            if btype not in catalog:
                raise UnknownBlockType(f"unknown block type {btype!r}")
            fields = _fields_of(child)
            pname = _require(fields, "NAME", btype)
            if pname in procedures:
                raise XmlMalformed(f"procedure {pname!r} defined twice")
            body_elem = _statement_child(child, ("STACK", "DO"))
            body = _parse_chain_elem(body_elem, catalog) if body_elem is not None else ()
            procedures[pname] = body
            if _next_block(child) is not None:
                raise XmlMalformed("procedure definitions cannot have a <next> chain")
        else:
            main.extend(_parse_chain(child, catalog))

    program = BlockProgram(procedures=procedures, main=tuple(main))
    _check_calls_defined(program)
    _check_recursion(procedures)
    return program


# --- serialization ------------------------------------------------------


def _format_number(value) -> str:
    if float(value) == int(value):
        return str(int(value))
    return repr(float(value))


def _fields_for(stmt: Statement) -> list:
    if isinstance(stmt, Move):
        return [("SPEED", _format_number(stmt.speed)), ("DURATION", _format_number(stmt.duration))]
    if isinstance(stmt, Turn):
        return [("DEGREES", str(stmt.degrees))]
    if isinstance(stmt, KnightMove):
        return [
            ("DIR_X", f"{stmt.dir_x}:{stmt.x_cells}"),
            ("DIR_Y", f"{stmt.dir_y}:{stmt.y_cells}"),
            ("LEG_ORDER", stmt.leg_order),
        ]
    if isinstance(stmt, Pick):
        return [("ITEM", stmt.item)]
    if isinstance(stmt, RepeatLoop):
        return [("TIMES", str(stmt.times))]
    return []


def _emit_block(stmt: Statement, rest: tuple, out: list) -> None:
    btype = block_type_of(stmt)
    out.append(f'<block type="{btype}">')
    if isinstance(stmt, ProcCall):
        out.append(f'<mutation name="{escape(stmt.name)}"/>')
    for fname, value in _fields_for(stmt):
        out.append(f'<field name="{fname}">{escape(value)}</field>')
    if isinstance(stmt, RepeatLoop) and stmt.body:
        out.append('<statement name="DO">')
        _emit_chain(stmt.body, out)
        out.append("</statement>")
    if rest:
        out.append("<next>")
        _emit_block(rest[0], rest[1:], out)
        out.append("</next>")
    out.append("</block>")


def _emit_chain(chain: tuple, out: list) -> None:
    if chain:
        _emit_block(chain[0], chain[1:], out)


def serialize_program(program: BlockProgram) -> str:
    """Emit Blockly-XML such that parse_program round-trips the AST."""
    out = [f'<xml xmlns="{BLOCKLY_NS}">']
    for name, body in program.procedures.items():
        out.append('<block type="procedures_defnoreturn">')
        out.append(f'<field name="NAME">{escape(name)}</field>')
        if body:
            out.append('<statement name="STACK">')
            _emit_chain(body, out)
            out.append("</statement>")
        out.append("</block>")
    _emit_chain(program.main, out)
    out.append("</xml>")
    return "".join(out)


# --- validation ---------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    path: str  # e.g. "main[2]" or "proc clean_2_rows[0].body[1]"
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.issues


def _validate_chain(chain, path: str, program: BlockProgram, catalog: BlockCatalog, issues: list):
    for i, stmt in enumerate(chain):
        where = f"{path}[{i}]"
        btype = block_type_of(stmt)
        if btype not in catalog:
            issues.append(ValidationIssue(where, "unknown-block", f"block {btype} not in task catalog"))
        if isinstance(stmt, Move):
            if not (math.isfinite(stmt.speed) and stmt.speed > 0):
                issues.append(ValidationIssue(where, "bad-speed", f"speed must be > 0, got {stmt.speed}"))
            if not (math.isfinite(stmt.duration) and stmt.duration > 0):
                issues.append(
                    ValidationIssue(where, "bad-duration", f"duration must be > 0, got {stmt.duration}")
                )
        elif isinstance(stmt, Turn):
            if stmt.degrees not in (90, 180):
                issues.append(ValidationIssue(where, "bad-degrees", f"degrees must be 90 or 180, got {stmt.degrees}"))
        elif isinstance(stmt, KnightMove):
            if stmt.dir_x not in _KNIGHT_DIR_X or stmt.dir_y not in _KNIGHT_DIR_Y:
                issues.append(ValidationIssue(where, "bad-knight", "knight directions must be left/right and forward/backward"))
            if stmt.x_cells < 0 or stmt.y_cells < 0:
                issues.append(ValidationIssue(where, "bad-knight", "knight leg lengths must be >= 0"))
            if stmt.leg_order not in _LEG_ORDERS:
                issues.append(ValidationIssue(where, "bad-leg-order", f"leg order must be x-first or y-first, got {stmt.leg_order!r}"))
        elif isinstance(stmt, RepeatLoop):
            if not isinstance(stmt.times, int) or stmt.times < 0:
                issues.append(ValidationIssue(where, "bad-times", f"repeat count must be an integer >= 0, got {stmt.times!r}"))
            _validate_chain(stmt.body, f"{where}.body", program, catalog, issues)
        elif isinstance(stmt, ProcCall):
            if stmt.name not in program.procedures:
                issues.append(ValidationIssue(where, "missing-procedure", f"call to undefined procedure {stmt.name!r}"))


def validate_program(program: BlockProgram, catalog: BlockCatalog) -> ValidationReport:
    """Pre-flight check of a program against a task's block catalog.

    Violations are report entries, never exceptions; an empty report means
    the program is admissible for the catalog.
    """
    issues: list = []
    if "procedures_defnoreturn" not in catalog:
        for name in program.procedures:
            issues.append(
                ValidationIssue(f"proc {name}", "unknown-block", "block procedures_defnoreturn not in task catalog")
            )
    _validate_chain(program.main, "main", program, catalog, issues)
    for name, body in program.procedures.items():
        _validate_chain(body, f"proc {name}", program, catalog, issues)
    try:
        _check_recursion(dict(program.procedures))
    except RecursiveProcedure as exc:
        issues.append(ValidationIssue("procedures", "recursive-procedure", str(exc)))
    return ValidationReport(tuple(issues))
