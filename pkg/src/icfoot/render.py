"""
Datasheet-style SVG footprint diagrams.

The renderer is a pure function of (geometry, RenderSpec): no fonts are
measured (text boxes use a fixed per-character advance) and every number
is printed with fixed precision, so output is byte-stable.

Dimension annotations measuring along x sit in stacked lanes above the
layout; those measuring along y sit in lanes to its left. Each lane holds
one annotation, which is what keeps label boxes from colliding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

from .geometry import (
    EPS,
    FootprintGeometry,
    Pin,
    Shape,
    Topology,
    bounding_box,
    layout_iou,
)
from .synth import (
    LayoutTopology,
    build_dual_row,
    build_grid,
    build_quad,
    build_single_row,
    build_two_pad,
    make_rng,
)

PT_TO_MM = 25.4 / 72
CHAR_ADVANCE = 0.6  # em
ELLIPSIS = "…"


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class RenderSpec:
    px_per_mm: float = 40.0
    margin_mm: float = 1.0
    pad_stroke_mm: float = 0.03
    dim_stroke_mm: float = 0.02
    font_size_pt: float = 3.5
    arrow_mm: float = 0.2
    gap_mm: float = 0.15
    lane_gap_mm: float = 0.8
    # rows longer than this are drawn with an ellipsis; None disables
    omission_threshold: int | None = 20
    show_pin_numbers: bool = True
    show_pitch: bool = True
    show_pad_dims: bool = True
    show_span: bool = True
    show_pin1_marker: bool = True
    jitter_mm: float = 0.0
    seed: int = 0
    font_family: str = "sans-serif"

    def __post_init__(self):
        if self.omission_threshold is not None and self.omission_threshold < 4:
            raise ValueError("omission_threshold must be >= 4 or None")

    @property
    def font_mm(self) -> float:
        return self.font_size_pt * PT_TO_MM

    def text_size(self, text: str) -> tuple[float, float]:
        return len(text) * CHAR_ADVANCE * self.font_mm, self.font_mm


def format_dim(value: float) -> str:
    """Two decimals, trailing zeros trimmed: 1.27, 0.6, 5.4, 2."""
    text = f"{value:.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


# ---------------------------------------------------------------------------
# annotation planning


@dataclass(frozen=True)
class Leader:
    start: tuple[float, float]
    end: tuple[float, float]
    extensions: tuple[tuple[tuple[float, float], tuple[float, float]], ...] = ()


@dataclass(frozen=True)
class Annotation:
    kind: str  # pitch | pad-width | pad-height | row-span | grid-pitch
    value: float
    anchors: tuple[int, ...]
    label: str
    axis: str  # x, y or xy (grid pitch shared by both axes)
    leaders: tuple[Leader, ...] = ()
    text_at: tuple[float, float] = (0.0, 0.0)

    def text_box(self, spec: RenderSpec) -> tuple[float, float, float, float]:
        tw, th = spec.text_size(self.label)
        x, y = self.text_at
        return (x - tw / 2, y - th / 2, x + tw / 2, y + th / 2)


@dataclass(frozen=True)
class AnnotationPlan:
    annotations: tuple[Annotation, ...] = ()

    def labels(self) -> list[str]:
        return [a.label for a in self.annotations]

    def of_kind(self, kind: str) -> list[Annotation]:
        return [a for a in self.annotations if a.kind == kind]


def boxes_overlap(a, b) -> bool:
    return min(a[2], b[2]) - max(a[0], b[0]) > 1e-9 and min(a[3], b[3]) - max(a[1], b[1]) > 1e-9


@dataclass
class _Row:
    pins: list[Pin]
    axis: str  # direction along which the row advances


def _colinear(pins: Sequence[Pin]) -> str | None:
    if len(pins) < 2:
        return None
    if all(abs(p.cx - pins[0].cx) <= EPS for p in pins):
        return "y"
    if all(abs(p.cy - pins[0].cy) <= EPS for p in pins):
        return "x"
    return None


def infer_rows(geometry: FootprintGeometry) -> list[_Row] | None:
    """Pin rows by ordinal, per package topology; None when the layout is irregular."""
    pins = geometry.by_ordinal()
    kind = geometry.package_class.pin_topology
    n = len(pins)
    if kind is Topology.DUAL_ROW and n >= 2 and n % 2 == 0:
        chunks = [pins[: n // 2], pins[n // 2 :]]
    elif kind is Topology.QUAD_PERIMETER and n >= 4 and n % 4 == 0:
        q = n // 4
        chunks = [pins[i * q : (i + 1) * q] for i in range(4)]
    elif kind is Topology.SINGLE_ROW and n >= 2:
        chunks = [pins]
    else:
        return None
    rows = []
    for chunk in chunks:
        axis = _colinear(chunk)
        if axis is None:
            if len(chunk) == 1:
                axis = "y" if kind is not Topology.SINGLE_ROW else "x"
            else:
                return None
        rows.append(_Row(chunk, axis))
    if kind is Topology.QUAD_PERIMETER and [r.axis for r in rows] != ["y", "x", "y", "x"]:
        return None
    return rows


def _along(p: Pin, axis: str) -> tuple[float, float]:
    """(extent along axis, extent across)."""
    return (p.w, p.h) if axis == "x" else (p.h, p.w)


def _key(v: float) -> float:
    return round(v, 6)


def _measures(geometry: FootprintGeometry):
    """Yield (kind, value, anchors, axis, leader_specs) in a stable order.

    A leader spec is (axis, lo, hi, anchor pins) with lo/hi the measured
    coordinates along ``axis``.
    """
    pins = geometry.by_ordinal()
    kind = geometry.package_class.pin_topology
    rows = infer_rows(geometry)
    out = []

    # pitches
    if kind is Topology.FULL_GRID:
        out.extend(_grid_pitch_measures(pins))
    elif rows:
        seen = {}
        for row in rows:
            coord = (lambda p: p.cx) if row.axis == "x" else (lambda p: p.cy)
            for a, b in zip(row.pins, row.pins[1:]):
                d = _key(abs(coord(b) - coord(a)))
                if d > 0 and d not in seen:
                    seen[d] = (a, b, row.axis)
        for d, (a, b, axis) in seen.items():
            lo, hi = sorted((coord_of(a, axis), coord_of(b, axis)))
            out.append(("pitch", d, (a.ordinal, b.ordinal), axis, [(axis, lo, hi, (a, b))]))

    # pad sizes
    sizes = {}
    if rows:
        oriented = [(p, r.axis) for r in rows for p in r.pins]
    else:
        oriented = [(p, "x") for p in pins]
    for p, axis in oriented:
        circle = p.shape is Shape.CIRCLE
        along, across = _along(p, axis)
        sizes.setdefault((circle, _key(along), _key(across)), (p, "x" if circle else axis))
    for (circle, along, across), (p, axis) in sizes.items():
        other = "y" if axis == "x" else "x"
        lo, hi = p_bounds(p, axis)
        out.append(("pad-width", along, (p.ordinal,), axis, [(axis, lo, hi, (p,))]))
        if not circle:
            lo, hi = p_bounds(p, other)
            out.append(("pad-height", across, (p.ordinal,), other, [(other, lo, hi, (p,))]))

    # spans between opposing rows
    if rows and kind is Topology.DUAL_ROW:
        out.append(_span(rows[0].pins[0], rows[1].pins[-1], rows[0].axis))
    elif rows and kind is Topology.QUAD_PERIMETER:
        out.append(_span(rows[0].pins[0], rows[2].pins[-1], "y"))
        out.append(_span(rows[1].pins[0], rows[3].pins[-1], "x"))
    elif kind is Topology.TWO_PAD and len(pins) == 2:
        a, b = pins
        axis = "x" if abs(a.cx - b.cx) >= abs(a.cy - b.cy) else "y"
        lo, hi = sorted((coord_of(a, axis), coord_of(b, axis)))
        out.append(("row-span", _key(hi - lo), (a.ordinal, b.ordinal), axis, [(axis, lo, hi, (a, b))]))
    return out


def coord_of(p: Pin, axis: str) -> float:
    return p.cx if axis == "x" else p.cy


def p_bounds(p: Pin, axis: str) -> tuple[float, float]:
    return (p.cx - p.w / 2, p.cx + p.w / 2) if axis == "x" else (p.cy - p.h / 2, p.cy + p.h / 2)


def _span(a: Pin, b: Pin, row_axis: str):
    across = "x" if row_axis == "y" else "y"
    lo, hi = sorted((coord_of(a, across), coord_of(b, across)))
    return ("row-span", _key(hi - lo), (a.ordinal, b.ordinal), across, [(across, lo, hi, (a, b))])


def _grid_pitch_measures(pins: list[Pin]):
    xs = sorted({_key(p.cx) for p in pins})
    ys = sorted({_key(p.cy) for p in pins}, reverse=True)
    first = pins[0]

    def at(x, y):
        for p in pins:
            if abs(p.cx - x) <= EPS and abs(p.cy - y) <= EPS:
                return p
        return None

    per_axis = {}
    for axis, values in (("x", xs), ("y", ys)):
        seen = {}
        for u, v in zip(values, values[1:]):
            d = _key(abs(v - u))
            if d in seen:
                continue
            a = at(u, first.cy) if axis == "x" else at(first.cx, u)
            b = at(v, first.cy) if axis == "x" else at(first.cx, v)
            if a is None or b is None:
                a = b = None
            seen[d] = (u, v, a, b)
        per_axis[axis] = seen
    out = []
    dx, dy = list(per_axis["x"]), list(per_axis["y"])
    if len(dx) == 1 and len(dy) == 1 and dx[0] == dy[0]:
        specs = []
        anchors = []
        for axis in ("x", "y"):
            u, v, a, b = per_axis[axis][dx[0]]
            lo, hi = sorted((u, v))
            specs.append((axis, lo, hi, tuple(p for p in (a, b) if p)))
            anchors.extend(p.ordinal for p in (a, b) if p and p.ordinal not in anchors)
        out.append(("grid-pitch", dx[0], tuple(anchors), "xy", specs))
        return out
    for axis in ("x", "y"):
        for d, (u, v, a, b) in per_axis[axis].items():
            lo, hi = sorted((u, v))
            anchors = tuple(p.ordinal for p in (a, b) if p)
            out.append(("grid-pitch", d, anchors, axis, [(axis, lo, hi, tuple(p for p in (a, b) if p))]))
    return out


def plan_annotations(geometry: FootprintGeometry, spec: RenderSpec | None = None) -> AnnotationPlan:
    """Which dimensions the diagram labels, and where."""
    spec = spec or RenderSpec()
    if not geometry.pins:
        return AnnotationPlan()
    show = {
        "pitch": spec.show_pitch,
        "grid-pitch": spec.show_pitch,
        "pad-width": spec.show_pad_dims,
        "pad-height": spec.show_pad_dims,
        "row-span": spec.show_span,
    }
    measures = [m for m in _measures(geometry) if show[m[0]]]
    box = bounding_box(geometry)
    fh = spec.font_mm
    g = spec.gap_mm
    lane0 = max(spec.lane_gap_mm, fh)
    left_labels = [format_dim(m[1]) for m in measures if "y" in m[3] and m[3] != "xy"]
    left_step = max([spec.text_size(t)[0] for t in left_labels] + [0.0]) + 2 * g + spec.arrow_mm
    top_step = fh + 2 * g + spec.arrow_mm
    rng = make_rng(spec.seed) if spec.jitter_mm > 0 else None
    top_lane = left_lane = 0

    annotations = []
    for kind, value, anchors, axis, leader_specs in measures:
        label = format_dim(value)
        leaders = []
        text_at = None
        for laxis, lo, hi, anchor_pins in leader_specs:
            if laxis == "x":
                y = box.ymax + lane0 + top_lane * top_step
                top_lane += 1
                ext = tuple(
                    ((c, p.cy + p.h / 2 + g), (c, y + g))
                    for c, p in _ext_points(lo, hi, anchor_pins, "x")
                )
                leaders.append(Leader((lo, y), (hi, y), ext))
                if text_at is None:
                    tx = (lo + hi) / 2
                    if rng is not None:
                        tx += float(rng.uniform(-spec.jitter_mm, spec.jitter_mm))
                    text_at = (tx, y + g + fh / 2)
            else:
                x = box.xmin - lane0 - left_lane * left_step
                left_lane += 1
                ext = tuple(
                    ((p.cx - p.w / 2 - g, c), (x - g, c))
                    for c, p in _ext_points(lo, hi, anchor_pins, "y")
                )
                leaders.append(Leader((x, lo), (x, hi), ext))
                if text_at is None:
                    tw = spec.text_size(label)[0]
                    ty = (lo + hi) / 2
                    if rng is not None:
                        ty += float(rng.uniform(-spec.jitter_mm, spec.jitter_mm))
                    text_at = (x - g - spec.arrow_mm / 2 - tw / 2, ty)
        annotations.append(Annotation(kind, value, anchors, label, axis, tuple(leaders), text_at))
    return AnnotationPlan(tuple(annotations))


def _ext_points(lo, hi, anchor_pins, axis):
    """Pair each measured coordinate with the pin whose edge the extension line leaves."""
    if not anchor_pins:
        return []
    pts = []
    for c in (lo, hi):
        best = min(anchor_pins, key=lambda p: min(abs(coord_of(p, axis) - c), *(abs(b - c) for b in p_bounds(p, axis))))
        pts.append((c, best))
    return pts


# ---------------------------------------------------------------------------
# reconstruction from labels


class ReconstructionError(ValueError):
    pass


def _read(plan: AnnotationPlan, kind: str, axis: str | None = None) -> list[float]:
    return [float(a.label) for a in plan.annotations if a.kind == kind and (axis is None or axis in a.axis)]


def _one(values: list[float], what: str, default: float | None = None) -> float:
    distinct = sorted(set(values))
    if not distinct:
        if default is None:
            raise ReconstructionError(f"plan carries no {what} label")
        return default
    if len(distinct) > 1:
        raise ReconstructionError(f"plan carries several {what} values: {distinct}")
    return distinct[0]


def reconstruct_geometry(plan: AnnotationPlan, topology: LayoutTopology) -> FootprintGeometry:
    """Rebuild a layout from the label texts of ``plan`` plus pin counts and shape only."""
    shape = topology.shape
    pad_w = _one(_read(plan, "pad-width"), "pad width")
    pad_h = pad_w if shape is Shape.CIRCLE else _one(_read(plan, "pad-height"), "pad height")
    kind = topology.kind
    if kind is Topology.DUAL_ROW:
        n = topology.counts[0]
        pitch = _one(_read(plan, "pitch"), "pitch", pad_w if n == 1 else None)
        return build_dual_row(topology.package, 2 * n, pitch, pad_w, pad_h, _one(_read(plan, "row-span"), "row span"), shape)
    if kind is Topology.QUAD_PERIMETER:
        n = topology.counts[0]
        pitch = _one(_read(plan, "pitch"), "pitch", pad_w if n == 1 else None)
        span_x = _one(_read(plan, "row-span", "x"), "horizontal span")
        span_y = _one(_read(plan, "row-span", "y"), "vertical span")
        return build_quad(topology.package, 4 * n, pitch, pad_w, pad_h, span_x, span_y, shape)
    if kind is Topology.FULL_GRID:
        rows, cols = topology.counts
        px = _one(_read(plan, "grid-pitch", "x"), "grid pitch", pad_w if cols == 1 else None)
        py = _one(_read(plan, "grid-pitch", "y"), "grid pitch", px if rows == 1 else None)
        return build_grid(topology.package, rows, cols, px, pad_w, py, shape)
    if kind is Topology.SINGLE_ROW:
        n = topology.counts[0]
        pitch = _one(_read(plan, "pitch"), "pitch", pad_w if n == 1 else None)
        return build_single_row(topology.package, n, pitch, pad_w, pad_h, shape)
    return build_two_pad(topology.package, _one(_read(plan, "row-span"), "span"), pad_w, pad_h, shape)


# ---------------------------------------------------------------------------
# SVG output


def _n(v: float) -> str:
    text = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


class _Canvas:
    """Collects elements in mm and emits them once the viewport is known."""

    def __init__(self, spec: RenderSpec):
        self.spec = spec
        self.groups: dict[str, list] = {}
        self.group_attrs: dict[str, str] = {}
        self.xmin = self.ymin = math.inf
        self.xmax = self.ymax = -math.inf

    def grow(self, x0, y0, x1, y1):
        self.xmin, self.ymin = min(self.xmin, x0), min(self.ymin, y0)
        self.xmax, self.ymax = max(self.xmax, x1), max(self.ymax, y1)

    def group(self, name: str, attrs: str = ""):
        self.groups.setdefault(name, [])
        if attrs:
            self.group_attrs[name] = attrs
        return self.groups[name]

    def emit(self, extra_top: Sequence = ()) -> str:
        s = self.spec.px_per_mm
        m = self.spec.margin_mm
        if not all(map(math.isfinite, (self.xmin, self.ymin, self.xmax, self.ymax))):
            raise RenderError("nothing to draw: viewport is empty or non-finite")
        x0, y1 = self.xmin - m, self.ymax + m
        width = (self.xmax - self.xmin + 2 * m) * s
        height = (self.ymax - self.ymin + 2 * m) * s
        if not (width > 0 and height > 0):
            raise RenderError("zero-area viewport")

        def X(x):
            return _n((x - x0) * s)

        def Y(y):
            return _n((y1 - y) * s)

        def L(v):
            return _n(v * s)

        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_n(width)}" height="{_n(height)}" viewBox="0 0 {_n(width)} {_n(height)}">',
            f'<rect class="background" x="0" y="0" width="{_n(width)}" height="{_n(height)}" fill="#ffffff"/>',
        ]
        for name, items in self.groups.items():
            attrs = self.group_attrs.get(name, "")
            out.append(f'<g id="{name}"{(" " + attrs) if attrs else ""}>')
            for item in items:
                out.append("  " + item(X, Y, L) if callable(item) else item)
            out.append("</g>")
        out.extend(extra_top)
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _pad_element(p: Pin, css: str):
    def draw(X, Y, L):
        attrs = f'class="{css}" data-pin="{escape(p.designator)}"'
        if p.shape is Shape.CIRCLE:
            return f'<circle {attrs} cx="{X(p.cx)}" cy="{Y(p.cy)}" r="{L(p.w / 2)}"/>'
        rx = ""
        if p.shape is Shape.STADIUM:
            r = L(p.corner_radius)
            rx = f' rx="{r}" ry="{r}"'
        return (
            f'<rect {attrs} x="{X(p.cx - p.w / 2)}" y="{Y(p.cy + p.h / 2)}" '
            f'width="{L(p.w)}" height="{L(p.h)}"{rx}/>'
        )

    return draw


def _text(x, y, text, css, size_mm, anchor="middle"):
    def draw(X, Y, L):
        # baseline sits ~0.35 em below the visual center
        return (
            f'<text class="{css}" x="{X(x)}" y="{Y(y - 0.35 * size_mm)}" font-size="{L(size_mm)}" '
            f'text-anchor="{anchor}">{escape(text)}</text>'
        )

    return draw


def _line(p0, p1, css):
    def draw(X, Y, L):
        return f'<line class="{css}" x1="{X(p0[0])}" y1="{Y(p0[1])}" x2="{X(p1[0])}" y2="{Y(p1[1])}"/>'

    return draw


def _polygon(points, css):
    def draw(X, Y, L):
        pts = " ".join(f"{X(x)},{Y(y)}" for x, y in points)
        return f'<polygon class="{css}" points="{pts}"/>'

    return draw


def _arrow(tip, direction, size):
    dx, dy = direction
    bx, by = tip[0] - dx * size, tip[1] - dy * size
    nx, ny = -dy * size * 0.35, dx * size * 0.35
    return [tip, (bx + nx, by + ny), (bx - nx, by - ny)]


def elided_runs(geometry: FootprintGeometry, spec: RenderSpec, keep_ordinals=()) -> list[tuple[list[Pin], list[Pin]]]:
    """(row, elided run) pairs for rows longer than the omission threshold."""
    if spec.omission_threshold is None:
        return []
    rows = infer_rows(geometry) or []
    keep_n = min(3, spec.omission_threshold // 2)
    out = []
    for row in rows:
        if len(row.pins) <= spec.omission_threshold:
            continue
        run: list[Pin] = []
        for k, p in enumerate(row.pins):
            hidden = keep_n <= k < len(row.pins) - keep_n and p.ordinal not in keep_ordinals
            if hidden:
                run.append(p)
            elif run:
                out.append((row.pins, run))
                run = []
        if run:
            out.append((row.pins, run))
    return out


def render_svg(geometry: FootprintGeometry, spec: RenderSpec | None = None) -> str:
    """SVG 1.1 document for ``geometry``."""
    spec = spec or RenderSpec()
    if not (spec.px_per_mm > 0 and math.isfinite(spec.px_per_mm)):
        raise RenderError(f"px_per_mm must be positive and finite, got {spec.px_per_mm}")
    if not geometry.pins:
        raise RenderError("empty geometry")
    plan = plan_annotations(geometry, spec)
    anchors = {o for a in plan.annotations for o in a.anchors}
    runs = elided_runs(geometry, spec, anchors)
    hidden = {p.ordinal for _, run in runs for p in run}

    c = _Canvas(spec)
    fh = spec.font_mm
    pads = c.group("pads", f'fill="#c8c8c8" stroke="#000000" stroke-width="{_n(spec.pad_stroke_mm * spec.px_per_mm)}"')
    numbers = c.group("pin-numbers", f'font-family="{escape(spec.font_family)}" fill="#000000"') if spec.show_pin_numbers else None
    for p in geometry.by_ordinal():
        c.grow(*p.bounds)
        if p.ordinal in hidden:
            continue
        pads.append(_pad_element(p, "pad"))
        if numbers is not None:
            size = min(fh * 0.8, 0.45 * min(p.w, p.h) * 2 / max(1, len(p.designator)) + 0.05)
            numbers.append(_text(p.cx, p.cy, p.designator, "pin-number", size))

    if runs:
        el = c.group("elisions", 'fill="#000000"')
        for row, run in runs:
            el.append(_ellipsis(row, run, fh, c))

    dims = c.group("dimensions", f'stroke="#000000" stroke-width="{_n(spec.dim_stroke_mm * spec.px_per_mm)}" fill="#000000" font-family="{escape(spec.font_family)}"')
    for a in plan.annotations:
        dims.append(_dimension(a, spec, c))

    if spec.show_pin1_marker:
        p1 = geometry.by_ordinal()[0]
        size = max(0.2, min(0.6, min(p1.w, p1.h)))
        tip = (p1.cx - p1.w / 2 - spec.gap_mm, p1.cy)
        tri = [tip, (tip[0] - size, tip[1] + size / 2), (tip[0] - size, tip[1] - size / 2)]
        for x, y in tri:
            c.grow(x, y, x, y)
        c.group("pin1", 'fill="#000000"').append(_polygon(tri, "pin1-marker"))
    return c.emit()


def _ellipsis(row: list[Pin], run: list[Pin], fh: float, c: _Canvas):
    mid_x = (run[0].cx + run[-1].cx) / 2
    mid_y = (run[0].cy + run[-1].cy) / 2
    horizontal = abs(run[-1].cx - run[0].cx) >= abs(run[-1].cy - run[0].cy)
    step = max(0.15, min(0.6, abs((run[-1].cx - run[0].cx) if horizontal else (run[-1].cy - run[0].cy)) / 6))
    r = min(step / 4, 0.12)
    dots = [(mid_x + k * step, mid_y) if horizontal else (mid_x, mid_y + k * step) for k in (-1, 0, 1)]
    callout = f"{row[0].designator} {ELLIPSIS} {row[-1].designator}"
    # callout goes on the outside of the row, away from the layout center
    pad = run[0]
    if horizontal:
        sign = 1 if mid_y >= 0 else -1
        tx, ty = mid_x, mid_y + sign * (pad.h / 2 + fh)
    else:
        sign = 1 if mid_x >= 0 else -1
        tw = len(callout) * CHAR_ADVANCE * fh
        tx, ty = mid_x + sign * (pad.w / 2 + tw / 2 + fh / 2), mid_y
    tw = len(callout) * CHAR_ADVANCE * fh
    c.grow(tx - tw / 2, ty - fh / 2, tx + tw / 2, ty + fh / 2)

    def draw(X, Y, L):
        parts = [f'<g class="ellipsis" data-first="{escape(row[0].designator)}" data-last="{escape(row[-1].designator)}">']
        for x, y in dots:
            parts.append(f'<circle class="ellipsis-dot" cx="{X(x)}" cy="{Y(y)}" r="{L(r)}"/>')
        parts.append(_text(tx, ty, callout, "elision-callout", fh)(X, Y, L))
        parts.append("</g>")
        return "".join(parts)

    return draw


def _dimension(a: Annotation, spec: RenderSpec, c: _Canvas):
    items = []
    for leader in a.leaders:
        for p0, p1 in leader.extensions:
            items.append(_line(p0, p1, "extension"))
            c.grow(min(p0[0], p1[0]), min(p0[1], p1[1]), max(p0[0], p1[0]), max(p0[1], p1[1]))
        s, e = leader.start, leader.end
        items.append(_line(s, e, "dim-line"))
        length = math.hypot(e[0] - s[0], e[1] - s[1])
        if length > 0:
            ux, uy = (e[0] - s[0]) / length, (e[1] - s[1]) / length
            size = min(spec.arrow_mm, length / 2)
            for tip, d in ((e, (ux, uy)), (s, (-ux, -uy))):
                pts = _arrow(tip, d, size)
                items.append(_polygon(pts, "arrow"))
        c.grow(min(s[0], e[0]) - spec.arrow_mm, min(s[1], e[1]) - spec.arrow_mm, max(s[0], e[0]) + spec.arrow_mm, max(s[1], e[1]) + spec.arrow_mm)
    box = a.text_box(spec)
    c.grow(*box)
    label = _text(a.text_at[0], a.text_at[1], a.label, "dim-label", spec.font_mm)

    def draw(X, Y, L):
        anchors = " ".join(map(str, a.anchors))
        inner = "".join(item(X, Y, L) for item in items)
        text = label(X, Y, L).replace("<text ", '<text stroke="none" ', 1)
        return f'<g class="dimension" data-kind="{a.kind}" data-anchors="{anchors}">{inner}{text}</g>'

    return draw


def _drawable(p: Pin) -> bool:
    return p.w > 0 and p.h > 0 and all(math.isfinite(v) for v in (p.cx, p.cy, p.w, p.h))


def render_overlay(pred: FootprintGeometry, truth: FootprintGeometry, spec: RenderSpec | None = None, iou: float | None = None) -> str:
    """Predicted pads (blue) over ground-truth pads (red) in one frame, with an IoU legend."""
    spec = spec or RenderSpec()
    if not (spec.px_per_mm > 0 and math.isfinite(spec.px_per_mm)):
        raise RenderError(f"px_per_mm must be positive and finite, got {spec.px_per_mm}")
    if iou is None:
        iou = layout_iou(pred, truth)
    c = _Canvas(spec)
    t_pins = [p for p in truth.by_ordinal() if _drawable(p)]
    p_pins = [p for p in pred.by_ordinal() if _drawable(p)]
    sw = _n(spec.pad_stroke_mm * spec.px_per_mm)
    tg = c.group("truth", f'fill="#d62728" fill-opacity="0.45" stroke="#d62728" stroke-width="{sw}"')
    pg = c.group("pred", f'fill="#1f77b4" fill-opacity="0.45" stroke="#1f77b4" stroke-width="{sw}"')
    for p in t_pins:
        c.grow(*p.bounds)
        tg.append(_pad_element(p, "pad truth"))
    for p in p_pins:
        c.grow(*p.bounds)
        pg.append(_pad_element(p, "pad pred"))
    if not math.isfinite(c.xmin):
        c.grow(-1, -1, 1, 1)

    fh = spec.font_mm
    x0, y0 = c.xmin, c.ymin - spec.gap_mm - fh
    legend = c.group("legend", f'font-family="{escape(spec.font_family)}" fill="#000000"')
    entries = [
        (f"IoU={iou:.3f}", None),
        ("ground truth", "#d62728"),
        ("prediction", "#1f77b4"),
    ]
    y = y0
    for text, colour in entries:
        tw = len(text) * CHAR_ADVANCE * fh
        if colour:
            sq = fh * 0.8
            legend.append(_swatch(x0, y, sq, colour))
            legend.append(_text(x0 + sq + spec.gap_mm, y, text, "legend-label", fh, "start"))
            c.grow(x0, y - fh / 2, x0 + sq + spec.gap_mm + tw, y + fh / 2)
        else:
            legend.append(_text(x0, y, text, "legend-iou", fh, "start"))
            c.grow(x0, y - fh / 2, x0 + tw, y + fh / 2)
        y -= fh * 1.3
    return c.emit()


def _swatch(x, y, size, colour):
    def draw(X, Y, L):
        return f'<rect class="swatch" x="{X(x)}" y="{Y(y + size / 2)}" width="{L(size)}" height="{L(size)}" fill="{colour}" fill-opacity="0.45"/>'

    return draw
