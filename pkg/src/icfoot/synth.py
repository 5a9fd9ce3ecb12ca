"""
Parametric sampling of valid footprints per package class.

Conventions: pin 1 is top-left; dual-row and quad packages number pins
counter-clockwise (down the left side first); grids are row-major from the
top-left ball with JEDEC row letters. Every layout is built centered on the
origin.

Randomness: a corpus seed is expanded into one 64-bit seed per sample with
splitmix64, and each sample draws from its own ``numpy.random.PCG64``
stream. Sampled lengths are snapped to 0.01 mm.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .geometry import (
    DEFAULT_REGISTRY,
    LAYOUT_CENTER,
    MAX_PINS,
    FootprintGeometry,
    PackageClass,
    Pin,
    Shape,
    Topology,
    errors,
    package_class,
    validate,
)

MASK64 = (1 << 64) - 1
GRID_ROW_LETTERS = "ABCDEFGHJKLMNPRTUVWY"  # I O Q S X Z are skipped
GRID_STEP = 0.01


class GenerationError(ValueError):
    pass


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Seed for sample ``index`` of a corpus seeded with ``seed``."""
    state = (seed & MASK64) ^ ((index * 0xD1B54A32D192ED03) & MASK64)
    _, out = splitmix64(state)
    _, out = splitmix64(out)
    return out


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & MASK64))


def grid_row_label(index: int) -> str:
    n = len(GRID_ROW_LETTERS)
    if index < n:
        return GRID_ROW_LETTERS[index]
    return GRID_ROW_LETTERS[index // n - 1] + GRID_ROW_LETTERS[index % n]


def _snap(value: float, step: float = GRID_STEP) -> float:
    return round(round(value / step) * step, 6)


# ---------------------------------------------------------------------------
# layout builders


def _pad(ordinal, cx, cy, shape, w, h, designator=None) -> Pin:
    return Pin(designator or str(ordinal), ordinal, cx, cy, shape, w, h)


def _row_offsets(n: int, pitch: float) -> list[float]:
    return [((n - 1) / 2 - k) * pitch for k in range(n)]


def _check_row(pitch: float, pad_width: float):
    if pitch < pad_width:
        raise GenerationError(f"pad width {pad_width:g} exceeds pitch {pitch:g}: adjacent pads in a row would overlap")


def _sized(shape: Shape, along_x: float, along_y: float) -> tuple[float, float]:
    if shape is Shape.CIRCLE:
        d = min(along_x, along_y)
        return d, d
    return along_x, along_y


def build_dual_row(pclass, pins: int, pitch: float, pad_width: float, pad_length: float, span: float, shape=Shape.RECTANGLE) -> FootprintGeometry:
    """Two vertical rows at x = -span/2 (pins 1..n/2, top down) and +span/2 (bottom up)."""
    shape = Shape(shape)
    if pins < 2 or pins % 2:
        raise GenerationError(f"dual-row packages need an even pin count >= 2, got {pins}")
    _check_row(pitch, pad_width)
    if span < pad_length:
        raise GenerationError(f"row span {span:g} is smaller than pad length {pad_length:g}: opposing rows would overlap")
    n = pins // 2
    w, h = _sized(shape, pad_length, pad_width)
    out = []
    for k, y in enumerate(_row_offsets(n, pitch)):
        out.append(_pad(k + 1, -span / 2, y, shape, w, h))
    for k, y in enumerate(reversed(_row_offsets(n, pitch))):
        out.append(_pad(n + k + 1, span / 2, y, shape, w, h))
    return FootprintGeometry(pclass, out, LAYOUT_CENTER)


def build_quad(pclass, pins: int, pitch: float, pad_width: float, pad_length: float, span: float, span_y: float | None = None, shape=Shape.RECTANGLE) -> FootprintGeometry:
    """Four sides of pins/4 each: left (down), bottom (right), right (up), top (left)."""
    shape = Shape(shape)
    span_y = span if span_y is None else span_y
    if pins < 4 or pins % 4:
        raise GenerationError(f"quad packages need a pin count divisible by 4, got {pins}")
    _check_row(pitch, pad_width)
    n = pins // 4
    reach = (n - 1) * pitch / 2 + pad_width / 2
    if span_y / 2 - pad_length / 2 < reach - 1e-9 and span / 2 - pad_length / 2 < reach - 1e-9:
        raise GenerationError(
            f"spans {span:g}/{span_y:g} too small for {n} pins per side at pitch {pitch:g}: corner pads would overlap"
        )
    vw, vh = _sized(shape, pad_length, pad_width)
    hw, hh = _sized(shape, pad_width, pad_length)
    offs = _row_offsets(n, pitch)
    out = []
    for y in offs:
        out.append(_pad(len(out) + 1, -span / 2, y, shape, vw, vh))
    for x in reversed(offs):
        out.append(_pad(len(out) + 1, x, -span_y / 2, shape, hw, hh))
    for y in reversed(offs):
        out.append(_pad(len(out) + 1, span / 2, y, shape, vw, vh))
    for x in offs:
        out.append(_pad(len(out) + 1, x, span_y / 2, shape, hw, hh))
    return FootprintGeometry(pclass, out, LAYOUT_CENTER)


def build_grid(pclass, rows: int, cols: int, pitch: float, diameter: float, pitch_y: float | None = None, shape=Shape.CIRCLE) -> FootprintGeometry:
    shape = Shape(shape)
    pitch_y = pitch if pitch_y is None else pitch_y
    if rows < 1 or cols < 1:
        raise GenerationError(f"grid needs at least one row and column, got {rows}x{cols}")
    if min(pitch, pitch_y) < diameter and rows * cols > 1:
        raise GenerationError(f"ball diameter {diameter:g} exceeds grid pitch {min(pitch, pitch_y):g}: balls would overlap")
    xs = list(reversed(_row_offsets(cols, pitch)))
    ys = _row_offsets(rows, pitch_y)
    out = []
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            out.append(_pad(len(out) + 1, x, y, shape, diameter, diameter, f"{grid_row_label(i)}{j + 1}"))
    return FootprintGeometry(pclass, out, LAYOUT_CENTER)


def build_single_row(pclass, pins: int, pitch: float, pad_width: float, pad_length: float, shape=Shape.CIRCLE) -> FootprintGeometry:
    """One horizontal row, pin 1 leftmost."""
    shape = Shape(shape)
    if pins < 1:
        raise GenerationError(f"single-row package needs at least one pin, got {pins}")
    if pins > 1:
        _check_row(pitch, pad_width)
    w, h = _sized(shape, pad_width, pad_length)
    xs = list(reversed(_row_offsets(pins, pitch)))
    return FootprintGeometry(pclass, [_pad(k + 1, x, 0.0, shape, w, h) for k, x in enumerate(xs)], LAYOUT_CENTER)


def build_two_pad(pclass, span: float, pad_width: float, pad_length: float, shape=Shape.RECTANGLE) -> FootprintGeometry:
    """Two pads on the x axis at -span/2 and +span/2; pad_width is the x extent."""
    shape = Shape(shape)
    if span < pad_width:
        raise GenerationError(f"pad span {span:g} is smaller than pad width {pad_width:g}: the two pads would overlap")
    w, h = _sized(shape, pad_width, pad_length)
    return FootprintGeometry(pclass, [_pad(1, -span / 2, 0.0, shape, w, h), _pad(2, span / 2, 0.0, shape, w, h)], LAYOUT_CENTER)


# ---------------------------------------------------------------------------
# topology descriptor (counts and shape, no dimensions)


@dataclass(frozen=True)
class LayoutTopology:
    package: str
    kind: Topology
    counts: tuple[int, ...]
    shape: Shape


def describe_topology(geometry: FootprintGeometry) -> LayoutTopology:
    pins = geometry.pins
    kind = geometry.package_class.pin_topology
    shapes = {p.shape for p in pins}
    if len(shapes) != 1:
        raise GenerationError("mixed pad shapes have no regular topology")
    n = len(pins)
    if kind is Topology.DUAL_ROW:
        counts = (n // 2,)
    elif kind is Topology.QUAD_PERIMETER:
        counts = (n // 4,)
    elif kind is Topology.FULL_GRID:
        counts = (len({p.cy for p in pins}), len({p.cx for p in pins}))
    else:
        counts = (n,)
    return LayoutTopology(geometry.package_class.name, kind, counts, shapes.pop())


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class FootprintParams:
    """Explicit footprint dimensions; unset fields are sampled from the class ranges.

    ``pad_width`` is the pad extent along the pitch direction, ``pad_length``
    the extent across it; ``span`` is the center distance between opposing
    rows (x axis; quads also use it for y unless ``span_y`` is set).
    """

    pins: int | None = None
    pitch: float | None = None
    pad_width: float | None = None
    pad_length: float | None = None
    span: float | None = None
    span_y: float | None = None
    rows: int | None = None
    cols: int | None = None
    shape: Shape | None = None


@dataclass(frozen=True)
class ClassRanges:
    """Sampling ranges for one package class (lengths in mm, ranges inclusive)."""

    pins: tuple[int, int]
    pitch: tuple[float, float]
    pad_width: tuple[float, float]
    pad_length: tuple[float, float]
    clearance: tuple[float, float]
    shape: Shape = Shape.RECTANGLE
    pin_step: int = 1

    def check(self, name: str):
        lo, hi = self.pins
        if not (1 <= lo <= hi <= MAX_PINS):
            raise ValueError(f"{name}: pin range {self.pins} must lie within [1, {MAX_PINS}]")
        for f in ("pitch", "pad_width", "pad_length", "clearance"):
            a, b = getattr(self, f)
            if not (0 < a <= b):
                raise ValueError(f"{name}: {f} range {(a, b)} must be positive and ordered")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassRanges":
        kw = dict(d)
        for key in ("pins", "pitch", "pad_width", "pad_length", "clearance"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "shape" in kw:
            kw["shape"] = Shape(kw["shape"])
        return cls(**kw)


DEFAULT_RANGES: dict[str, ClassRanges] = {
    "SOIC": ClassRanges((4, 32), (1.0, 1.27), (0.4, 0.65), (1.2, 2.2), (2.0, 4.5), Shape.RECTANGLE, 2),
    "QFP": ClassRanges((32, 256), (0.4, 0.8), (0.2, 0.45), (1.0, 2.0), (1.0, 4.0), Shape.RECTANGLE, 4),
    "QFN": ClassRanges((12, 72), (0.4, 0.65), (0.2, 0.35), (0.5, 1.0), (0.4, 2.0), Shape.RECTANGLE, 4),
    "BGA": ClassRanges((4, 784), (0.5, 1.27), (0.25, 0.6), (0.25, 0.6), (0.1, 0.1), Shape.CIRCLE, 1),
    "DIP": ClassRanges((4, 40), (2.54, 2.54), (1.0, 1.6), (1.6, 2.4), (4.5, 13.0), Shape.STADIUM, 2),
    "SOT": ClassRanges((4, 8), (0.5, 0.95), (0.3, 0.6), (0.8, 1.3), (0.8, 2.0), Shape.RECTANGLE, 2),
    "SON": ClassRanges((6, 16), (0.4, 0.65), (0.2, 0.35), (0.5, 0.9), (0.6, 2.0), Shape.RECTANGLE, 2),
    "PLCC": ClassRanges((20, 84), (1.27, 1.27), (0.5, 0.65), (1.5, 2.2), (2.0, 5.0), Shape.RECTANGLE, 4),
    "CHIP2": ClassRanges((2, 2), (1.0, 1.0), (0.4, 1.6), (0.5, 3.2), (0.3, 2.5), Shape.RECTANGLE, 2),
    "SIP": ClassRanges((1, 40), (1.27, 2.54), (0.8, 1.2), (0.8, 1.2), (0.1, 0.1), Shape.CIRCLE, 1),
}


def _draw(rng: np.random.Generator, lo: float, hi: float) -> float:
    return _snap(rng.uniform(lo, hi)) if hi > lo else _snap(lo)


def _draw_count(rng: np.random.Generator, lo: int, hi: int, step: int) -> int:
    first = -(-lo // step) * step
    choices = np.arange(first, hi + 1, step)
    if len(choices) == 0:
        raise GenerationError(f"no pin count in [{lo}, {hi}] is a multiple of {step}")
    return int(rng.choice(choices))


def _grid_shape(rng: np.random.Generator, lo: int, hi: int, params: FootprintParams) -> tuple[int, int]:
    if params.rows and params.cols:
        return params.rows, params.cols
    side_max = int(math.isqrt(hi))
    for _ in range(1000):
        rows = params.rows or int(rng.integers(1, side_max + 1))
        cols = params.cols or int(rng.integers(max(1, rows - 4), min(side_max, rows + 4) + 1))
        if lo <= rows * cols <= hi:
            return rows, cols
    raise GenerationError(f"no grid shape with pin count in [{lo}, {hi}]")


def sample_footprint(
    pclass: str | PackageClass,
    seed: int,
    params: FootprintParams | None = None,
    ranges: ClassRanges | None = None,
) -> FootprintGeometry:
    """A validate()-clean footprint; deterministic in (class, seed, params)."""
    pclass = package_class(pclass)
    params = params or FootprintParams()
    ranges = ranges or DEFAULT_RANGES[pclass.name]
    rng = make_rng(seed)
    shape = Shape(params.shape or ranges.shape)
    kind = pclass.pin_topology

    pitch = params.pitch if params.pitch is not None else _draw(rng, *ranges.pitch)
    if params.pad_width is not None:
        pad_width = params.pad_width
    else:
        # keep adjacent pads apart: at most 80% of pitch
        hi = min(ranges.pad_width[1], pitch * 0.8) if kind is not Topology.TWO_PAD else ranges.pad_width[1]
        if hi < ranges.pad_width[0]:
            raise GenerationError(
                f"{pclass.name}: pad width range {ranges.pad_width} cannot fit pitch {pitch:g}"
            )
        pad_width = _draw(rng, ranges.pad_width[0], hi)
    pad_length = params.pad_length if params.pad_length is not None else _draw(rng, *ranges.pad_length)
    if shape is Shape.CIRCLE:
        pad_length = pad_width

    if kind is Topology.FULL_GRID:
        rows, cols = _grid_shape(rng, *ranges.pins, params)
        geometry = build_grid(pclass, rows, cols, pitch, pad_width, shape=shape)
    elif kind is Topology.TWO_PAD:
        span = params.span if params.span is not None else _snap(pad_width + _draw(rng, *ranges.clearance))
        geometry = build_two_pad(pclass, span, pad_width, pad_length, shape)
    else:
        pins = params.pins if params.pins is not None else _draw_count(rng, *ranges.pins, ranges.pin_step)
        if kind is Topology.SINGLE_ROW:
            geometry = build_single_row(pclass, pins, pitch, pad_width, pad_length, shape)
        elif kind is Topology.DUAL_ROW:
            span = params.span if params.span is not None else _snap(pad_length + _draw(rng, *ranges.clearance))
            geometry = build_dual_row(pclass, pins, pitch, pad_width, pad_length, span, shape)
        else:
            n = pins // 4
            if params.span is not None:
                span = params.span
            else:
                span = _snap((n - 1) * pitch + pad_width + pad_length + _draw(rng, *ranges.clearance))
            geometry = build_quad(pclass, pins, pitch, pad_width, pad_length, span, params.span_y, shape)

    if len(geometry.pins) > MAX_PINS:
        raise GenerationError(f"{len(geometry.pins)} pins exceeds the {MAX_PINS}-pin limit")
    bad = errors(validate(geometry))
    if bad:
        raise GenerationError(f"{pclass.name}: generated layout is invalid: " + "; ".join(map(str, bad)))
    return geometry


@dataclass(frozen=True)
class CorpusSpec:
    count: int
    seed: int = 0
    class_weights: Mapping[str, float] = field(default_factory=lambda: {n: 1.0 for n in DEFAULT_REGISTRY.names()})
    ranges: Mapping[str, ClassRanges] = field(default_factory=lambda: dict(DEFAULT_RANGES))
    id_prefix: str = "syn"

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be >= 0, got {self.count}")
        for name, weight in self.class_weights.items():
            if name not in DEFAULT_REGISTRY:
                raise ValueError(f"unknown package class {name!r} in class_weights")
            if not (weight >= 0 and math.isfinite(weight)):
                raise ValueError(f"class weight for {name} must be a finite non-negative number")
        if sum(self.class_weights.values()) <= 0:
            raise ValueError("class weights must sum to a positive value")
        for name, r in self.ranges.items():
            if name not in DEFAULT_REGISTRY:
                raise ValueError(f"unknown package class {name!r} in ranges")
            r.check(name)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CorpusSpec":
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown corpus spec fields: {sorted(extra)}")
        kw = dict(doc)
        if "class_weights" in kw:
            kw["class_weights"] = {str(k): float(v) for k, v in kw["class_weights"].items()}
        if "ranges" in kw:
            merged = dict(DEFAULT_RANGES)
            for name, r in kw["ranges"].items():
                if name not in DEFAULT_REGISTRY:
                    raise ValueError(f"unknown package class {name!r} in ranges")
                base = {f.name: getattr(merged[name], f.name) for f in fields(ClassRanges)}
                base.update(r)
                merged[name] = ClassRanges.from_dict(base)
            kw["ranges"] = merged
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "CorpusSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def sample_id(self, index: int) -> str:
        return f"{self.id_prefix}-{index:06d}"


def choose_class(spec: CorpusSpec, index: int) -> str:
    names = [n for n in DEFAULT_REGISTRY.names() if spec.class_weights.get(n, 0) > 0]
    weights = np.array([spec.class_weights[n] for n in names], dtype=float)
    rng = make_rng(derive_seed(spec.seed, index))
    return names[int(rng.choice(len(names), p=weights / weights.sum()))]


def sample_one(spec: CorpusSpec, index: int) -> FootprintGeometry:
    name = choose_class(spec, index)
    # the class draw and the layout draw use different derived streams
    seed = derive_seed(spec.seed ^ 0x5851F42D4C957F2D, index)
    try:
        geometry = sample_footprint(name, seed, ranges=spec.ranges[name])
    except GenerationError as exc:
        raise GenerationError(f"sample {index} ({name}): {exc}") from None
    return replace(geometry, source_id=spec.sample_id(index))


def _sample_star(args):
    return sample_one(*args)


def sample_corpus(spec: CorpusSpec, workers: int = 1) -> list[FootprintGeometry]:
    """``spec.count`` geometries; identical for any ``workers`` value."""
    if workers <= 1 or spec.count < 2:
        return [sample_one(spec, i) for i in range(spec.count)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sample_star, [(spec, i) for i in range(spec.count)], chunksize=16))
