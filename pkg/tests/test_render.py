import xml.etree.ElementTree as ET
from collections import Counter
from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from icfoot.geometry import FootprintGeometry, Pin, Shape, translate
from icfoot.render import (
    RenderError,
    RenderSpec,
    boxes_overlap,
    format_dim,
    plan_annotations,
    reconstruct_geometry,
    render_overlay,
    render_svg,
)
from icfoot.synth import CorpusSpec, build_dual_row, describe_topology, sample_footprint, sample_one

NS = {"s": "http://www.w3.org/2000/svg"}


def svg_tree(text):
    return ET.fromstring(text.encode())


def pads_in(root, cls="pad"):
    return [el for el in root.iter() if cls in (el.get("class") or "").split()]


@pytest.mark.parametrize("value,text", [(1.27, "1.27"), (0.6, "0.6"), (5.4, "5.4"), (2.0, "2"), (0.125, "0.12"), (-0.001, "0")])
def test_format_dim(value, text):
    assert format_dim(value) == text


class TestPlan:
    def test_soic8(self, soic8):
        plan = plan_annotations(soic8)
        assert Counter(plan.labels()) == Counter(["1.27", "0.6", "1.5", "5.4"])
        assert len(plan.annotations) == 4

    def test_single_pad(self):
        g = FootprintGeometry("CHIP2", [Pin("1", 1, 0, 0, Shape.RECTANGLE, 2, 2)])
        plan = plan_annotations(g)
        assert sorted(plan.labels()) == ["2", "2"]
        assert {a.kind for a in plan.annotations} == {"pad-width", "pad-height"}

    def test_bga(self, bga16):
        plan = plan_annotations(bga16)
        assert sorted(plan.labels()) == ["0.5", "1"]
        (grid,) = plan.of_kind("grid-pitch")
        assert grid.axis == "xy" and len(grid.leaders) == 2

    def test_anchors_exist(self, soic8):
        ordinals = {p.ordinal for p in soic8.pins}
        for a in plan_annotations(soic8).annotations:
            assert set(a.anchors) <= ordinals
            assert a.label == format_dim(a.value)

    @given(st.integers(0, 2**32), st.integers(0, 10_000))
    def test_labels_never_overlap(self, seed, index):
        g = sample_one(CorpusSpec(count=index + 1, seed=seed), index)
        spec = RenderSpec()
        boxes = [a.text_box(spec) for a in plan_annotations(g, spec).annotations]
        assert not any(boxes_overlap(a, b) for a, b in combinations(boxes, 2))

    @given(st.integers(0, 2**32), st.integers(0, 10_000))
    def test_reconstruction(self, seed, index):
        g = sample_one(CorpusSpec(count=index + 1, seed=seed), index)
        rebuilt = reconstruct_geometry(plan_annotations(g), describe_topology(g))
        assert len(rebuilt.pins) == len(g.pins)
        for a, b in zip(rebuilt.by_ordinal(), g.by_ordinal()):
            assert a.designator == b.designator
            assert max(abs(a.cx - b.cx), abs(a.cy - b.cy), abs(a.w - b.w), abs(a.h - b.h)) <= 1e-6


class TestSvg:
    def test_soic8(self, soic8):
        root = svg_tree(render_svg(soic8))
        assert len(pads_in(root)) == 8
        assert all(el.tag.endswith("rect") for el in pads_in(root))
        assert len([el for el in root.iter() if el.get("class") == "dimension"]) == 4

    def test_bga(self, bga16):
        root = svg_tree(render_svg(bga16))
        pads = pads_in(root)
        assert len(pads) == 16 and all(el.tag.endswith("circle") for el in pads)
        numbers = sorted(el.text for el in root.iter() if el.get("class") == "pin-number")
        assert numbers == sorted(f"{r}{c}" for r in "ABCD" for c in range(1, 5))

    def test_elision(self):
        g = build_dual_row("SOIC", 100, 0.5, 0.3, 1.5, 5.4)
        root = svg_tree(render_svg(g, RenderSpec(omission_threshold=20)))
        assert len(pads_in(root)) < 100
        groups = [el for el in root.iter() if el.get("class") == "ellipsis"]
        assert len(groups) == 2
        callouts = [el.text for el in root.iter() if el.get("class") == "elision-callout"]
        assert any("50" in c for c in callouts)

    def test_elision_disabled(self):
        g = build_dual_row("SOIC", 100, 0.5, 0.3, 1.5, 5.4)
        assert len(pads_in(svg_tree(render_svg(g, RenderSpec(omission_threshold=None))))) == 100

    def test_deterministic(self, soic8):
        assert render_svg(soic8) == render_svg(soic8)

    def test_pin_numbers_optional(self, soic8):
        root = svg_tree(render_svg(soic8, RenderSpec(show_pin_numbers=False)))
        assert not [el for el in root.iter() if el.get("class") == "pin-number"]

    @pytest.mark.parametrize("scale", [0, -1, float("nan"), float("inf")])
    def test_bad_scale(self, soic8, scale):
        with pytest.raises(RenderError):
            render_svg(soic8, RenderSpec(px_per_mm=scale))

    def test_empty(self):
        with pytest.raises(RenderError):
            render_svg(FootprintGeometry("SOIC", []))

    def test_threshold_validated(self):
        with pytest.raises(ValueError):
            RenderSpec(omission_threshold=3)

    @given(st.integers(0, 2**32))
    def test_pads_inside_viewbox(self, seed):
        g = sample_one(CorpusSpec(count=1, seed=seed), 0)
        root = svg_tree(render_svg(g))
        _, _, vw, vh = map(float, root.get("viewBox").split())
        for el in pads_in(root):
            if el.tag.endswith("circle"):
                cx, cy, r = (float(el.get(k)) for k in ("cx", "cy", "r"))
                box = (cx - r, cy - r, cx + r, cy + r)
            else:
                x, y, w, h = (float(el.get(k)) for k in ("x", "y", "width", "height"))
                box = (x, y, x + w, y + h)
            assert box[0] >= 0 and box[1] >= 0 and box[2] <= vw + 1e-6 and box[3] <= vh + 1e-6

    def test_y_axis_points_up(self, soic8):
        root = svg_tree(render_svg(soic8))
        by_pin = {el.get("data-pin"): float(el.get("y")) for el in pads_in(root)}
        # pin 1 is the top of the left row, so it has the smallest SVG y
        assert by_pin["1"] < by_pin["2"] < by_pin["3"] < by_pin["4"]

    def test_jitter_is_seeded(self, soic8):
        a = render_svg(soic8, RenderSpec(jitter_mm=0.05, seed=1))
        assert a == render_svg(soic8, RenderSpec(jitter_mm=0.05, seed=1))
        assert a != render_svg(soic8, RenderSpec(jitter_mm=0.05, seed=2))


class TestOverlay:
    def test_identical(self, soic8):
        root = svg_tree(render_overlay(soic8, soic8))
        truth = [(el.get("x"), el.get("y")) for el in pads_in(root, "truth")]
        pred = [(el.get("x"), el.get("y")) for el in pads_in(root, "pred")]
        assert truth == pred and len(truth) == 8
        legend = [el.text for el in root.iter() if el.get("class") == "legend-iou"]
        assert legend == ["IoU=1.000"]

    def test_shifted(self, soic8):
        root = svg_tree(render_overlay(translate(soic8, 1, 0), soic8))
        (legend,) = [el.text for el in root.iter() if el.get("class") == "legend-iou"]
        assert float(legend.split("=")[1]) < 1
        assert pads_in(root, "truth")[0].get("x") != pads_in(root, "pred")[0].get("x")

    def test_wrong_count(self, soic8):
        pred = FootprintGeometry("SOIC", soic8.by_ordinal()[:6])
        root = svg_tree(render_overlay(pred, soic8))
        assert len(pads_in(root, "pred")) == 6 and len(pads_in(root, "truth")) == 8

    def test_empty_prediction(self, soic8):
        root = svg_tree(render_overlay(FootprintGeometry("SOIC", []), soic8))
        assert len(pads_in(root, "pred")) == 0
