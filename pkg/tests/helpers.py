"""Shared builders and hypothesis strategies."""

from hypothesis import strategies as st

from icfoot.geometry import DEFAULT_REGISTRY, FootprintGeometry, Pin, Shape, recenter


def squares(centers, size=1.0, package="SOIC", shape=Shape.RECTANGLE):
    pins = [Pin(str(i + 1), i + 1, x, y, shape, size, size) for i, (x, y) in enumerate(centers)]
    return FootprintGeometry(package, pins)


def rect_pins(rects):
    """Rectangle pins from (xmin, ymin, xmax, ymax) tuples."""
    return [
        Pin(str(i + 1), i + 1, (a + c) / 2, (b + d) / 2, Shape.RECTANGLE, c - a, d - b)
        for i, (a, b, c, d) in enumerate(rects)
    ]


@st.composite
def geometries(draw, shapes=tuple(Shape), max_pins=40, centered=True):
    """Valid footprints: at most one pad per lattice cell, each pad inside its cell."""
    pitch = draw(st.sampled_from([0.5, 1.0, 1.27, 2.54]))
    cols = draw(st.integers(1, 8))
    rows = draw(st.integers(1, 6))
    cells = draw(
        st.lists(st.tuples(st.integers(0, cols - 1), st.integers(0, rows - 1)), min_size=1, max_size=max_pins, unique=True)
    )
    pins = []
    for k, (i, j) in enumerate(cells, 1):
        shape = draw(st.sampled_from(shapes))
        w = draw(st.integers(10, 90)) / 100 * pitch
        h = w if shape is Shape.CIRCLE else draw(st.integers(10, 90)) / 100 * pitch
        jx = draw(st.integers(-4, 4)) / 100 * pitch
        jy = draw(st.integers(-4, 4)) / 100 * pitch
        pins.append(Pin(f"P{k}", k, i * pitch + jx, j * pitch + jy, shape, w, h))
    name = draw(st.sampled_from(DEFAULT_REGISTRY.names()))
    g = FootprintGeometry(name, pins, "as-drawn", source_id=f"h{len(pins)}")
    return recenter(g) if centered else g
