"""
Reading and writing footprint geometry.

Three formats cross this boundary, all in millimeters:

* the EDA pad-list XML dialect (see ``docs/eda-xml.md``),
* the canonical geometry JSON document,
* KiCad footprint s-expressions (export, plus a small reader for checking).
"""

from __future__ import annotations

import json
import logging
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .geometry import (
    AS_DRAWN,
    DEFAULT_REGISTRY,
    LAYOUT_CENTER,
    ORIGINS,
    FootprintGeometry,
    GeometryValidationError,
    PackageRegistry,
    Pin,
    Shape,
    errors,
    recenter,
    validate,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
SUPPORTED_SCHEMA_VERSIONS = ("1.0",)


class InterchangeError(ValueError):
    pass


class EDAParseError(InterchangeError):
    """Malformed XML. ``offset`` is the byte offset of the failure."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")


class EDASchemaError(InterchangeError):
    pass


class SchemaVersionError(InterchangeError):
    def __init__(self, version):
        self.version = version
        super().__init__(f"unsupported schema_version {version!r}; supported: {', '.join(SUPPORTED_SCHEMA_VERSIONS)}")


class GeometryFormatError(InterchangeError):
    pass


# ---------------------------------------------------------------------------
# EDA XML dialect

PAD_REQUIRED = ("x", "y", "w", "h")
SHAPE_ALIASES = {
    "rectangle": Shape.RECTANGLE,
    "rect": Shape.RECTANGLE,
    "square": Shape.RECTANGLE,
    "circle": Shape.CIRCLE,
    "round": Shape.CIRCLE,
    "stadium": Shape.STADIUM,
    "oval": Shape.STADIUM,
    "oblong": Shape.STADIUM,
}
# elements that carry pads or wrap them; everything else is skipped
STRUCTURAL = {"footprint", "pads", "pad"}


def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    return sum(len(x) + 1 for x in lines[: max(0, line - 1)]) + column


def _number(raw: str, where: str, attr: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise EDASchemaError(f"{where} attribute '{attr}' is not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise EDASchemaError(f"{where} attribute '{attr}' is not finite: {raw!r}")
    return value


def parse_eda_xml(
    data: bytes | str,
    *,
    source_id: str = "",
    registry: PackageRegistry = DEFAULT_REGISTRY,
) -> FootprintGeometry:
    """Parse a pad-list XML document into a recentered geometry.

    Pads get ordinals in document order. Unknown elements are skipped with a
    logged warning.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position
        raise EDAParseError(f"malformed XML: {exc}", _byte_offset(data, line, column)) from None

    if root.tag != "footprint":
        raise EDASchemaError(f"root element must be <footprint>, got <{root.tag}>")
    units = root.get("units", "mm")
    if units != "mm":
        raise EDASchemaError(f"unsupported units {units!r}; only 'mm' is accepted")
    package = root.get("package")
    if package is None:
        raise EDASchemaError("footprint missing 'package'")
    try:
        pclass = registry[package]
    except KeyError as exc:
        raise EDASchemaError(str(exc.args[0])) from None

    skipped: dict[str, int] = {}
    pads = []
    for el in root.iter():
        if el is root:
            continue
        if el.tag not in STRUCTURAL:
            skipped[el.tag] = skipped.get(el.tag, 0) + 1
            continue
        if el.tag == "pad":
            pads.append(el)
    if skipped:
        logger.warning("skipped unknown elements: %s", ", ".join(f"{k} x{v}" for k, v in sorted(skipped.items())))

    pins = []
    for k, el in enumerate(pads, start=1):
        where = f"pad[{k}]"
        for attr in PAD_REQUIRED:
            if el.get(attr) is None:
                raise EDASchemaError(f"{where} missing '{attr}'")
        shape_raw = el.get("shape", "rectangle").strip().lower()
        if shape_raw not in SHAPE_ALIASES:
            raise EDASchemaError(f"{where} has unknown shape {shape_raw!r}")
        x, y, w, h = (_number(el.get(a), where, a) for a in PAD_REQUIRED)
        pins.append(
            Pin(
                designator=el.get("number", str(k)),
                ordinal=k,
                cx=x,
                cy=y,
                shape=SHAPE_ALIASES[shape_raw],
                w=w,
                h=h,
            )
        )
    geometry = FootprintGeometry(pclass, pins, AS_DRAWN, source_id or root.get("name", ""))
    if pins:
        geometry = recenter(geometry)
    bad = errors(validate(geometry))
    if bad:
        raise GeometryValidationError(bad)
    return geometry


def write_eda_xml(geometry: FootprintGeometry, name: str | None = None) -> bytes:
    root = ET.Element(
        "footprint",
        {"name": name or geometry.source_id or "footprint", "package": geometry.package_class.name, "units": "mm"},
    )
    pads = ET.SubElement(root, "pads")
    for p in geometry.by_ordinal():
        ET.SubElement(
            pads,
            "pad",
            {"number": p.designator, "x": _fmt(p.cx), "y": _fmt(p.cy), "w": _fmt(p.w), "h": _fmt(p.h), "shape": p.shape.value},
        )
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


# ---------------------------------------------------------------------------
# canonical JSON


@dataclass(frozen=True)
class CanonicalGeometryDocument:
    geometry: FootprintGeometry
    source_format: str = "synthetic"
    schema_version: str = SCHEMA_VERSION

    @property
    def provenance(self) -> dict:
        return {"source_format": self.source_format, "source_id": self.geometry.source_id}


def geometry_to_dict(geometry: FootprintGeometry, source_format: str = "synthetic") -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "package_class": geometry.package_class.name,
        "origin": geometry.origin,
        "source_id": geometry.source_id,
        "provenance": {"source_format": source_format, "source_id": geometry.source_id},
        "pins": [
            {
                "designator": p.designator,
                "ordinal": p.ordinal,
                "cx": round(p.cx, 6),
                "cy": round(p.cy, 6),
                "shape": p.shape.value,
                "w": round(p.w, 6),
                "h": round(p.h, 6),
            }
            for p in geometry.pins
        ],
    }


def write_geometry_json(geometry: FootprintGeometry, source_format: str = "synthetic", indent: int | None = 2) -> bytes:
    bad = errors(validate(geometry))
    if bad:
        raise GeometryValidationError(bad)
    doc = geometry_to_dict(geometry, source_format)
    return json.dumps(doc, indent=indent, allow_nan=False).encode("utf-8") + (b"\n" if indent else b"")


def _reject_constant(name):
    raise GeometryFormatError(f"non-finite number {name} in geometry document")


def _finite(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GeometryFormatError(f"{what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise GeometryFormatError(f"{what} is not finite")
    return float(value)


def geometry_from_dict(doc: dict, *, check: bool = True, registry: PackageRegistry = DEFAULT_REGISTRY) -> FootprintGeometry:
    if not isinstance(doc, dict):
        raise GeometryFormatError("geometry document must be a JSON object")
    version = doc.get("schema_version")
    if version not in SUPPORTED_SCHEMA_VERSIONS:
        raise SchemaVersionError(version)
    try:
        pclass = registry[doc["package_class"]]
        origin = doc.get("origin", LAYOUT_CENTER)
        raw_pins = doc["pins"]
    except KeyError as exc:
        raise GeometryFormatError(f"missing or unknown field: {exc.args[0]}") from None
    if origin not in ORIGINS:
        raise GeometryFormatError(f"unknown origin {origin!r}")
    if not isinstance(raw_pins, list):
        raise GeometryFormatError("'pins' must be a list")
    pins = []
    for k, rp in enumerate(raw_pins, start=1):
        if not isinstance(rp, dict):
            raise GeometryFormatError(f"pins[{k}] must be an object")
        try:
            pins.append(
                Pin(
                    designator=str(rp["designator"]),
                    ordinal=int(rp["ordinal"]),
                    cx=_finite(rp["cx"], f"pins[{k}].cx"),
                    cy=_finite(rp["cy"], f"pins[{k}].cy"),
                    shape=Shape(rp.get("shape", "rectangle")),
                    w=_finite(rp["w"], f"pins[{k}].w"),
                    h=_finite(rp["h"], f"pins[{k}].h"),
                )
            )
        except KeyError as exc:
            raise GeometryFormatError(f"pins[{k}] missing {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InterchangeError):
                raise
            raise GeometryFormatError(f"pins[{k}]: {exc}") from None
    source_id = doc.get("source_id") or (doc.get("provenance") or {}).get("source_id", "")
    geometry = FootprintGeometry(pclass, pins, origin, str(source_id))
    if check:
        bad = errors(validate(geometry))
        if bad:
            raise GeometryValidationError(bad)
    return geometry


def parse_geometry_json(data: bytes | str, *, check: bool = True) -> FootprintGeometry:
    try:
        doc = json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise GeometryFormatError(f"malformed JSON: {exc}") from None
    return geometry_from_dict(doc, check=check)


# ---------------------------------------------------------------------------
# KiCad

KICAD_SHAPES = {Shape.RECTANGLE: "rect", Shape.CIRCLE: "circle", Shape.STADIUM: "oval"}
KICAD_SHAPES_BACK = {v: k for k, v in KICAD_SHAPES.items()}


def _fmt(value: float) -> str:
    """Shortest fixed-point rendering with at least one decimal ('1.0', '-2.5')."""
    text = f"{value:.6f}".rstrip("0")
    if text.endswith("."):
        text += "0"
    return "0.0" if text == "-0.0" else text


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_kicad(geometry: FootprintGeometry, name: str) -> str:
    """KiCad footprint text. KiCad's y axis points down, so ``cy`` is negated."""
    bad = errors(validate(geometry))
    if bad:
        raise GeometryValidationError(bad)
    lines = [
        f"(footprint {_quote(name)}",
        '  (layer "F.Cu")',
        f"  (tags {_quote(geometry.package_class.name)})",
        "  (attr smd)",
    ]
    for p in geometry.by_ordinal():
        lines.append(
            f"  (pad {_quote(p.designator)} smd {KICAD_SHAPES[p.shape]} "
            f"(at {_fmt(p.cx)} {_fmt(-p.cy)}) (size {_fmt(p.w)} {_fmt(p.h)}) "
            '(layers "F.Cu" "F.Paste" "F.Mask"))'
        )
    lines.append(")")
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r'\s*(?:(\()|(\))|"((?:[^"\\]|\\.)*)"|([^\s()"]+))')


def parse_sexpr(text: str):
    """Parse one s-expression into nested lists; quoted strings stay ``str``."""
    stack: list[list] = [[]]
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise InterchangeError(f"bad s-expression token at offset {pos}")
            break
        pos = m.end()
        opening, closing, quoted, atom = m.groups()
        if opening:
            stack.append([])
        elif closing:
            if len(stack) < 2:
                raise InterchangeError(f"unbalanced ')' at offset {pos - 1}")
            done = stack.pop()
            stack[-1].append(done)
        elif quoted is not None:
            stack[-1].append(re.sub(r"\\(.)", r"\1", quoted))
        elif atom is not None:
            stack[-1].append(atom)
    if len(stack) != 1 or len(stack[0]) != 1:
        raise InterchangeError("expected exactly one balanced s-expression")
    return stack[0][0]


def _child(node: list, key: str):
    for item in node[1:]:
        if isinstance(item, list) and item and item[0] == key:
            return item
    return None


def read_kicad(text: str, package: str | None = None) -> FootprintGeometry:
    """Read pads back from :func:`export_kicad` output (y flipped back to up)."""
    tree = parse_sexpr(text)
    if not tree or tree[0] not in ("footprint", "module"):
        raise InterchangeError("not a footprint s-expression")
    tags = _child(tree, "tags")
    if package is None:
        package = tags[1] if tags and len(tags) > 1 and tags[1] in DEFAULT_REGISTRY else None
    if package is None:
        raise InterchangeError("package class not recorded in footprint tags; pass package=")
    pins = []
    for item in tree[1:]:
        if not (isinstance(item, list) and item and item[0] == "pad"):
            continue
        at, size = _child(item, "at"), _child(item, "size")
        pins.append(
            Pin(
                designator=item[1],
                ordinal=len(pins) + 1,
                cx=float(at[1]),
                cy=-float(at[2]),
                shape=KICAD_SHAPES_BACK[item[3]],
                w=float(size[1]),
                h=float(size[2]),
            )
        )
    return FootprintGeometry(package, pins, LAYOUT_CENTER, str(tree[1]))
