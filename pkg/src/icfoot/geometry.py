"""
Footprint geometry types and area/distance mathematics.

All coordinates are millimeters, +x right, +y up. A footprint's canonical
origin ("layout-center") is the center of the bounding box of all pads.

Area-of-union has two routes:

- rectangles only: exact coordinate-compression over the distinct pad edges;
- any circle/stadium pad: horizontal scanline integration. Rows are placed
  between every pad's y-breakpoints (top/bottom edges and the start of any
  rounded cap), so the per-row chord set is analytic and only the curved
  caps carry discretisation error. Row height is
  ``min(smallest pad dimension / 64, 0.01 mm)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

LAYOUT_CENTER = "layout-center"
AS_DRAWN = "as-drawn"
ORIGINS = (LAYOUT_CENTER, AS_DRAWN)

# geometric equality tolerance (mm)
EPS = 1e-6
MAX_PINS = 800
# pin fields are stored on a 1 nm lattice so text round trips are exact
COORD_DECIMALS = 6


class Shape(str, Enum):
    RECTANGLE = "rectangle"
    CIRCLE = "circle"
    STADIUM = "stadium"


class Topology(str, Enum):
    DUAL_ROW = "dual-row"
    QUAD_PERIMETER = "quad-perimeter"
    FULL_GRID = "full-grid"
    SINGLE_ROW = "single-row"
    TWO_PAD = "two-pad"


@dataclass(frozen=True)
class PackageClass:
    name: str
    pin_topology: Topology


class PackageRegistry:
    """A fixed set of exactly ten package classes, looked up by name."""

    SIZE = 10

    def __init__(self, classes: Iterable[PackageClass]):
        classes = list(classes)
        names = [c.name for c in classes]
        if len(classes) != self.SIZE:
            raise ValueError(f"registry must hold exactly {self.SIZE} classes, got {len(classes)}")
        if len(set(names)) != len(names):
            raise ValueError("package class names must be unique")
        self._by_name = {c.name: c for c in classes}

    def __getitem__(self, name: str) -> PackageClass:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown package class {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self._by_name.values())

    def __len__(self) -> int:
        return len(self._by_name)

    def names(self) -> list[str]:
        return list(self._by_name)


DEFAULT_REGISTRY = PackageRegistry(
    [
        PackageClass("SOIC", Topology.DUAL_ROW),
        PackageClass("QFP", Topology.QUAD_PERIMETER),
        PackageClass("QFN", Topology.QUAD_PERIMETER),
        PackageClass("BGA", Topology.FULL_GRID),
        PackageClass("DIP", Topology.DUAL_ROW),
        PackageClass("SOT", Topology.DUAL_ROW),
        PackageClass("SON", Topology.DUAL_ROW),
        PackageClass("PLCC", Topology.QUAD_PERIMETER),
        PackageClass("CHIP2", Topology.TWO_PAD),
        PackageClass("SIP", Topology.SINGLE_ROW),
    ]
)


def package_class(name: str | PackageClass, registry: PackageRegistry | None = None) -> PackageClass:
    if isinstance(name, PackageClass):
        return name
    return (registry or DEFAULT_REGISTRY)[name]


def _q(value) -> float:
    return round(float(value), COORD_DECIMALS)


@dataclass(frozen=True)
class Pin:
    """One pad. ``w``/``h`` are the x/y extents; circles use w == h == diameter.

    Construction never rejects bad values (model predictions are often
    nonsense); :func:`validate` reports them.
    """

    designator: str
    ordinal: int
    cx: float
    cy: float
    shape: Shape = Shape.RECTANGLE
    w: float = 1.0
    h: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "designator", str(self.designator))
        object.__setattr__(self, "ordinal", int(self.ordinal))
        object.__setattr__(self, "shape", Shape(self.shape))
        for name in ("cx", "cy", "w", "h"):
            object.__setattr__(self, name, _q(getattr(self, name)))

    @property
    def corner_radius(self) -> float:
        if self.shape is Shape.RECTANGLE:
            return 0.0
        return min(self.w, self.h) / 2

    @property
    def area(self) -> float:
        r = self.corner_radius
        return self.w * self.h - (4 - math.pi) * r * r

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)

    def moved(self, dx: float, dy: float) -> "Pin":
        return replace(self, cx=self.cx + dx, cy=self.cy + dy)


@dataclass(frozen=True)
class FootprintGeometry:
    package_class: PackageClass
    pins: tuple[Pin, ...]
    origin: str = LAYOUT_CENTER
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "package_class", package_class(self.package_class))
        object.__setattr__(self, "pins", tuple(self.pins))

    def __len__(self) -> int:
        return len(self.pins)

    def pin(self, ordinal: int) -> Pin:
        for p in self.pins:
            if p.ordinal == ordinal:
                return p
        raise KeyError(ordinal)

    def by_ordinal(self) -> list[Pin]:
        return sorted(self.pins, key=lambda p: p.ordinal)

    @property
    def is_rectilinear(self) -> bool:
        return all(p.shape is Shape.RECTANGLE for p in self.pins)


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> tuple[float, float]:
        return ((self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


class GeometryError(ValueError):
    pass


def bounding_box(geometry: FootprintGeometry | Sequence[Pin]) -> Rect:
    pins = geometry.pins if isinstance(geometry, FootprintGeometry) else geometry
    if not pins:
        raise GeometryError("empty geometry")
    b = np.array([p.bounds for p in pins])
    return Rect(float(b[:, 0].min()), float(b[:, 1].min()), float(b[:, 2].max()), float(b[:, 3].max()))


def translate(geometry: FootprintGeometry, dx: float, dy: float) -> FootprintGeometry:
    return replace(geometry, pins=tuple(p.moved(dx, dy) for p in geometry.pins))


def recenter(geometry: FootprintGeometry) -> FootprintGeometry:
    """Shift pins so the pad bounding box is centered on (0, 0)."""
    if not geometry.pins:
        return replace(geometry, origin=LAYOUT_CENTER)
    cx, cy = bounding_box(geometry).center
    if abs(cx) <= EPS / 2 and abs(cy) <= EPS / 2:
        return replace(geometry, origin=LAYOUT_CENTER)
    return replace(translate(geometry, -cx, -cy), origin=LAYOUT_CENTER)


# --------------------------------------------------------------------------
# area machinery


def _pad_arrays(pins: Sequence[Pin]):
    cx = np.array([p.cx for p in pins], dtype=float)
    cy = np.array([p.cy for p in pins], dtype=float)
    w = np.array([p.w for p in pins], dtype=float)
    h = np.array([p.h for p in pins], dtype=float)
    r = np.array([p.corner_radius for p in pins], dtype=float)
    return cx, cy, w, h, r


def _rect_union_area(x0, y0, x1, y1) -> float:
    """Exact area of a union of axis-aligned rectangles by coordinate compression."""
    xs = np.unique(np.concatenate([x0, x1]))
    ys = np.unique(np.concatenate([y0, y1]))
    covered = np.zeros((len(ys) - 1, len(xs) - 1), dtype=bool)
    i0 = np.searchsorted(xs, x0)
    i1 = np.searchsorted(xs, x1)
    j0 = np.searchsorted(ys, y0)
    j1 = np.searchsorted(ys, y1)
    for a, b, c, d in zip(j0, j1, i0, i1):
        covered[a:b, c:d] = True
    return float(np.diff(ys) @ covered @ np.diff(xs))


def raster_resolution(pins: Sequence[Pin]) -> float:
    smallest = min(min(p.w, p.h) for p in pins)
    return min(smallest / 64.0, 0.01)


def _scan_rows(cy, h, r, step):
    """Row mid-heights and row heights covering every pad's y-extent."""
    b = h / 2 - r
    breaks = np.unique(np.concatenate([cy - h / 2, cy + h / 2, cy - b, cy + b]))
    lo, hi = breaks[:-1], breaks[1:]
    length = hi - lo
    mid = (lo + hi) / 2
    # strips with no pad get a single row; it contributes nothing
    active = ((mid[:, None] > cy - h / 2) & (mid[:, None] < cy + h / 2)).any(axis=1)
    n = np.where(active, np.maximum(1, np.ceil(length / step - 1e-9)), 1).astype(int)
    strip = np.repeat(np.arange(len(n)), n)
    k = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    # cosine-graded rows: chords have square-root behaviour at cap tips,
    # which always sit on a strip boundary
    theta = (k + 0.5) * np.pi / n[strip]
    ys = lo[strip] + length[strip] * (1 - np.cos(theta)) / 2
    wt = np.sin(theta)
    norm = np.bincount(strip, weights=wt, minlength=len(n))
    dy = wt * (length / np.where(norm > 0, norm, 1))[strip]
    keep = active[strip] & (dy > 0)
    return ys[keep], dy[keep]


def _chords(ys, cx, cy, w, h, r):
    """Left/right x of every pad on every row; rows missing a pad get (+inf, -inf)."""
    d = np.abs(ys[:, None] - cy[None, :])
    inside = d < h[None, :] / 2
    a = w / 2 - r
    b = h / 2 - r
    t = np.maximum(0.0, d - b[None, :])
    half = a[None, :] + np.sqrt(np.maximum(0.0, r[None, :] ** 2 - t * t))
    left = np.where(inside, cx[None, :] - half, np.inf)
    right = np.where(inside, cx[None, :] + half, -np.inf)
    return left, right


def _row_union_lengths(left, right):
    order = np.argsort(left, axis=1, kind="stable")
    left = np.take_along_axis(left, order, axis=1)
    right = np.take_along_axis(right, order, axis=1)
    reach = np.maximum.accumulate(right, axis=1)
    prev = np.concatenate([np.full((left.shape[0], 1), -np.inf), reach[:, :-1]], axis=1)
    with np.errstate(invalid="ignore"):
        seg = right - np.maximum(left, prev)
    return np.where(seg > 0, seg, 0.0).sum(axis=1)


def _raster_union_area(pins: Sequence[Pin], step: float, chunk: int = 256) -> float:
    cx, cy, w, h, r = _pad_arrays(pins)
    ys, dy = _scan_rows(cy, h, r, step)
    ylo, yhi = cy - h / 2, cy + h / 2
    total = 0.0
    for s in range(0, len(ys), chunk):
        rows, heights = ys[s : s + chunk], dy[s : s + chunk]
        sel = (yhi > rows[0]) & (ylo < rows[-1])
        if not sel.any():
            continue
        left, right = _chords(rows, cx[sel], cy[sel], w[sel], h[sel], r[sel])
        total += float(_row_union_lengths(left, right) @ heights)
    return total


def layout_union_area(pins: Sequence[Pin], step: float | None = None) -> float:
    """Area (mm^2) covered by the union of pad outlines.

    Exact when every pad is a rectangle. Otherwise scanline-integrated with
    row height ``step`` (default :func:`raster_resolution`), relative error
    below 1e-3.
    """
    pins = list(pins)
    if not pins:
        return 0.0
    if all(p.shape is Shape.RECTANGLE for p in pins) and step is None:
        cx, cy, w, h, _ = _pad_arrays(pins)
        return _rect_union_area(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
    return _raster_union_area(pins, step or raster_resolution(pins))


def _rect_overlap(a: Pin, b: Pin) -> tuple[float, float]:
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    return min(ax1, bx1) - max(ax0, bx0), min(ay1, by1) - max(ay0, by0)


def pad_intersection_area(a: Pin, b: Pin, step: float | None = None) -> float:
    ox, oy = _rect_overlap(a, b)
    if ox <= 0 or oy <= 0:
        return 0.0
    if a.shape is Shape.RECTANGLE and b.shape is Shape.RECTANGLE:
        return ox * oy
    step = step or raster_resolution([a, b])
    cx, cy, w, h, r = _pad_arrays([a, b])
    ys, dy = _scan_rows(cy, h, r, step)
    left, right = _chords(ys, cx, cy, w, h, r)
    seg = right.min(axis=1) - left.max(axis=1)
    return float(np.where(seg > 0, seg, 0.0) @ dy)


def pad_iou(a: Pin, b: Pin) -> float:
    """IoU of two pad outlines at their stated centers."""
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        return 0.0
    if a.shape == b.shape and (a.cx, a.cy, a.w, a.h) == (b.cx, b.cy, b.w, b.h):
        return 1.0
    inter = pad_intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def _outline_key(p: Pin):
    return (p.shape.value, p.cx, p.cy, p.w, p.h)


def layout_iou(pred: FootprintGeometry | Sequence[Pin], truth: FootprintGeometry | Sequence[Pin]) -> float:
    """Intersection-over-union of the two pad-set regions.

    Intersection is ``U(pred) + U(truth) - U(pred + truth)``. An empty side
    scores 0.0.
    """
    p = list(pred.pins if isinstance(pred, FootprintGeometry) else pred)
    t = list(truth.pins if isinstance(truth, FootprintGeometry) else truth)
    p = [x for x in p if x.w > 0 and x.h > 0 and math.isfinite(x.cx + x.cy + x.w + x.h)]
    if not p or not t:
        return 0.0
    if sorted(map(_outline_key, p)) == sorted(map(_outline_key, t)):
        return 1.0
    both = p + t
    if all(x.shape is Shape.RECTANGLE for x in both):
        step = None
    else:
        step = raster_resolution(both)
    u_both = layout_union_area(both, step)
    if u_both <= 0:
        return 0.0
    inter = layout_union_area(p, step) + layout_union_area(t, step) - u_both
    return min(1.0, max(0.0, inter / u_both))


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    severity: str = "error"
    ordinals: tuple[int, ...] = field(default=())

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


def pads_overlap(a: Pin, b: Pin, tol: float = EPS) -> bool:
    """True when two pads share positive area; touching edges do not count."""
    ox, oy = _rect_overlap(a, b)
    if ox <= tol or oy <= tol:
        return False
    if a.shape is Shape.RECTANGLE and b.shape is Shape.RECTANGLE:
        return True
    if a.shape is not Shape.RECTANGLE and b.shape is not Shape.RECTANGLE:
        return _segment_distance(*_core_segment(a), *_core_segment(b)) < a.corner_radius + b.corner_radius - tol
    return pad_intersection_area(a, b) > tol * tol


def _core_segment(p: Pin):
    r = p.corner_radius
    a, b = p.w / 2 - r, p.h / 2 - r
    return (p.cx - a, p.cy - b), (p.cx + a, p.cy + b)


def _point_segment(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    n = dx * dx + dy * dy
    t = 0.0 if n == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / n))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def _segment_distance(a0, a1, b0, b1) -> float:
    # core segments of axis-aligned stadiums are axis-parallel, so they only
    # cross when perpendicular; endpoint distances cover every other case
    for (v0, v1), (h0, h1) in (((a0, a1), (b0, b1)), ((b0, b1), (a0, a1))):
        if v0[0] == v1[0] and h0[1] == h1[1]:
            x, y = v0[0], h0[1]
            if min(h0[0], h1[0]) <= x <= max(h0[0], h1[0]) and min(v0[1], v1[1]) <= y <= max(v0[1], v1[1]):
                return 0.0
    return min(
        _point_segment(a0, b0, b1),
        _point_segment(a1, b0, b1),
        _point_segment(b0, a0, a1),
        _point_segment(b1, a0, a1),
    )


def _overlapping_pairs(pins: Sequence[Pin]) -> list[tuple[int, int]]:
    if len(pins) < 2:
        return []
    b = np.array([p.bounds for p in pins])
    order = np.argsort(b[:, 0], kind="stable")
    b = b[order]
    pairs = []
    for k in range(len(b)):
        # sweep along x: candidates start before this pad ends
        stop = np.searchsorted(b[:, 0], b[k, 2] - EPS, side="left")
        if stop <= k + 1:
            continue
        cand = np.arange(k + 1, stop)
        hit = (np.minimum(b[cand, 3], b[k, 3]) - np.maximum(b[cand, 1], b[k, 1])) > EPS
        for j in cand[hit]:
            i1, i2 = int(order[k]), int(order[j])
            if pads_overlap(pins[i1], pins[i2]):
                pairs.append((min(i1, i2), max(i1, i2)))
    return sorted(pairs)


def validate(geometry: FootprintGeometry) -> list[Violation]:
    """Every invariant violation in ``geometry``; an empty list means valid."""
    out: list[Violation] = []
    pins = geometry.pins
    if not pins:
        return [Violation("empty-geometry", "footprint has no pins")]
    if len(pins) > MAX_PINS:
        out.append(Violation("too-many-pins", f"{len(pins)} pins exceeds {MAX_PINS}", "warning"))
    if geometry.origin not in ORIGINS:
        out.append(Violation("unknown-origin", f"origin tag {geometry.origin!r}"))

    seen: dict[str, int] = {}
    for p in pins:
        if p.designator in seen:
            out.append(Violation("duplicate-designator", f"designator {p.designator!r} repeated", ordinals=(seen[p.designator], p.ordinal)))
        else:
            seen[p.designator] = p.ordinal

    ordinals = sorted(p.ordinal for p in pins)
    dupes = sorted({o for o in ordinals if ordinals.count(o) > 1}) if len(set(ordinals)) != len(ordinals) else []
    for o in dupes:
        out.append(Violation("duplicate-ordinal", f"ordinal {o} repeated", ordinals=(o,)))
    if set(ordinals) != set(range(1, len(pins) + 1)):
        missing = sorted(set(range(1, len(pins) + 1)) - set(ordinals))
        out.append(Violation("ordinal-gap", f"ordinals are not 1..{len(pins)}; missing {missing[:5]}"))

    finite = True
    for p in pins:
        if not all(math.isfinite(v) for v in (p.cx, p.cy, p.w, p.h)):
            out.append(Violation("non-finite", f"pin {p.designator!r} has a non-finite field", ordinals=(p.ordinal,)))
            finite = False
            continue
        if p.w <= 0 or p.h <= 0:
            out.append(Violation("non-positive-dimension", f"pin {p.designator!r} is {p.w} x {p.h}", ordinals=(p.ordinal,)))
        elif p.shape is Shape.CIRCLE and abs(p.w - p.h) > EPS:
            out.append(Violation("circle-not-round", f"pin {p.designator!r} circle is {p.w} x {p.h}", ordinals=(p.ordinal,)))

    if not finite or any(v.kind == "non-positive-dimension" for v in out):
        return out

    for i, j in _overlapping_pairs(pins):
        out.append(Violation("pad-overlap", f"pins {pins[i].designator!r} and {pins[j].designator!r} overlap", ordinals=(pins[i].ordinal, pins[j].ordinal)))

    if geometry.origin == LAYOUT_CENTER:
        cx, cy = bounding_box(pins).center
        if abs(cx) > EPS or abs(cy) > EPS:
            out.append(Violation("not-centered", f"bounding box center is ({cx:.6f}, {cy:.6f})"))
    return out


def errors(violations: Iterable[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity == "error"]


class GeometryValidationError(GeometryError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]
