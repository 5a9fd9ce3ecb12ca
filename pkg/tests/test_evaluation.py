import csv
import io
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import geometries, squares
from icfoot.evaluation import (
    EvaluationError,
    SampleReport,
    aggregate,
    count_errors,
    match_pins,
    pin_dim_iou,
    pin_distance,
    report_csv,
    report_json,
    report_table,
    score_sample,
)
from icfoot.geometry import FootprintGeometry, Pin, translate
from icfoot.synth import CorpusSpec, sample_one
from oracles import sampled_iou


def scaled(g, s):
    return FootprintGeometry(g.package_class, [Pin(p.designator, p.ordinal, p.cx * s, p.cy * s, p.shape, p.w * s, p.h * s) for p in g.pins])


def report(sid="a", iou=1.0, pred=8, truth=8, d=0.0, pin=1.0, cls="SOIC"):
    return SampleReport(sid, iou, pred, truth, d, pin, cls)


class TestCountErrors:
    def test_mixed(self):
        r = count_errors([(8, 8), (16, 14)])
        assert r["MAE"] == 1.0 and r["RMSE"] == pytest.approx(1.414214, abs=1e-6)

    def test_exact(self):
        assert count_errors([(4, 4), (9, 9)]) == {"MAE": 0.0, "RMSE": 0.0}

    def test_failed_parse(self):
        assert count_errors([(0, 8)]) == {"MAE": 8.0, "RMSE": 8.0}

    def test_empty(self):
        with pytest.raises(EvaluationError):
            count_errors([])


class TestPinDistance:
    def test_identity(self, soic8):
        assert pin_distance(soic8, soic8).value == 0.0

    def test_three_four_five(self, soic8):
        assert pin_distance(translate(soic8, 0.3, 0.4), soic8).value == pytest.approx(0.5, abs=1e-9)

    def test_partial(self, soic8):
        pred = soic8.by_ordinal()[:6]
        d = pin_distance(pred, soic8)
        assert d.value == 0.0 and d.n_matched == 6 and d.count_mismatch

    def test_undefined(self, soic8):
        d = pin_distance([], soic8)
        assert d.value is None and not d.defined


class TestPinDimIoU:
    def test_identity(self, soic8):
        assert pin_dim_iou(soic8, soic8) == 1.0

    def test_full_pad_shift(self):
        truth = squares([(0, 0), (3, 0)], size=0.8)
        assert pin_dim_iou(translate(truth, 0.8, 0), truth) == 0.0

    def test_half_omitted(self, soic8):
        assert pin_dim_iou(soic8.by_ordinal()[:4], soic8) == 0.5

    def test_empty(self, soic8):
        assert pin_dim_iou([], soic8) == 0.0


class TestScoreSample:
    def test_perfect(self, soic8):
        r = score_sample(soic8, soic8)
        assert (r.iou_ic, r.d_pin, r.iou_pin, r.count_abs_error) == (1.0, 0.0, 1.0, 0)
        assert r.flags == ()

    def test_empty(self, soic8):
        r = score_sample(None, soic8)
        assert (r.iou_ic, r.iou_pin, r.count_abs_error) == (0.0, 0.0, 8)
        assert r.d_pin is None
        assert "empty-prediction" in r.flags and "d_pin-undefined" in r.flags

    def test_half_pad_shift(self):
        truth = squares([(0, 0), (5, 0), (10, 0), (15, 0)], size=1.0)
        pred = translate(truth, 0.5, 0)
        r = score_sample(pred, truth)
        oracle = sampled_iou([(p.cx, p.cy, "rectangle", 1, 1) for p in pred.pins], [(p.cx, p.cy, "rectangle", 1, 1) for p in truth.pins], cell=2e-3)
        assert r.iou_ic == pytest.approx(1 / 3, abs=1e-9)
        assert r.iou_ic == pytest.approx(oracle, rel=1e-3)
        assert r.iou_pin == pytest.approx(1 / 3, abs=1e-9)
        assert r.d_pin == pytest.approx(0.5, abs=1e-9)

    def test_invalid_prediction_still_scored(self, soic8):
        pred = list(soic8.pins) + [Pin("9", 9, 0, 0, w=-1)]
        r = score_sample(pred, soic8)
        assert r.iou_ic == 1.0 and "count-mismatch" in r.flags

    def test_count_override(self, soic8):
        assert score_sample(soic8, soic8, count_pred=6).count_abs_error == 2

    def test_nearest_mode_forgives_reordering(self, soic8):
        pins = soic8.by_ordinal()
        shuffled = [Pin(str(k + 1), k + 1, p.cx, p.cy, p.shape, p.w, p.h) for k, p in enumerate(reversed(pins))]
        assert score_sample(shuffled, soic8).d_pin > 0
        assert score_sample(shuffled, soic8, mode="nearest").d_pin == 0.0
        assert len(match_pins(shuffled, soic8, "nearest")) == 8

    @given(geometries())
    def test_self_score(self, g):
        r = score_sample(g, g)
        assert (r.iou_ic, r.d_pin, r.iou_pin, r.count_abs_error) == (1.0, 0.0, 1.0, 0)

    @given(geometries(max_pins=12), st.sampled_from([0.5, 2.0, 3.0]))
    def test_scale_consistency(self, g, s):
        pred = translate(g, 0.21, -0.13)
        a = score_sample(pred, g)
        b = score_sample(scaled(pred, s), scaled(g, s))
        assert b.iou_ic == pytest.approx(a.iou_ic, abs=2e-3)
        assert b.iou_pin == pytest.approx(a.iou_pin, abs=2e-3)
        assert b.d_pin == pytest.approx(a.d_pin * s, rel=1e-5, abs=1e-5)

    @given(geometries(max_pins=12))
    def test_spurious_pad_lowers_iou(self, g):
        pred = translate(g, min(p.w for p in g.pins) / 4, 0)
        box_right = max(p.cx + p.w / 2 for p in g.pins) + 5
        extra = Pin("X", len(g.pins) + 1, box_right, 0)
        assert score_sample(list(pred.pins) + [extra], g).iou_ic < score_sample(pred, g).iou_ic


class TestAggregate:
    def test_single_run_identical(self):
        rep = aggregate([report(iou=0.716), report(iou=0.716)])
        assert "71.6 ± 0.0" in report_table(rep)

    def test_run_std(self):
        reports, runs = [], []
        for run, mean in enumerate([0.711, 0.716, 0.721]):
            for k in range(4):
                reports.append(report(f"s{k}", iou=mean))
                runs.append(run)
        rep = aggregate(reports, runs=runs)
        assert rep.std_over == "runs" and rep.n_runs == 3
        assert rep.metrics["iou_ic"].mean == pytest.approx(0.716)
        assert rep.metrics["iou_ic"].std == pytest.approx(0.005)
        assert "71.6 ± 0.5" in report_table(rep)

    def test_sample_std(self):
        rep = aggregate([report(iou=0.5), report(iou=1.0)])
        assert rep.std_over == "samples"
        assert rep.metrics["iou_ic"].std == pytest.approx(math.sqrt(0.125))

    def test_undefined_distance_excluded(self):
        rep = aggregate([report(d=1.0), report(d=None), report(d=3.0)])
        assert rep.n == 3
        assert rep.metrics["d_pin"].n == 2 and rep.metrics["d_pin"].mean == 2.0

    def test_count_metrics(self):
        rep = aggregate([report(pred=8, truth=8), report(pred=16, truth=14)])
        assert rep.metrics["count_abs_error"].mean == 1.0
        assert rep.metrics["count_rmse"].mean == pytest.approx(math.sqrt(2))

    def test_per_class(self):
        rep = aggregate([report(cls="SOIC", iou=1.0), report(cls="BGA", iou=0.5), report(cls="BGA", iou=0.7)])
        assert rep.per_class["BGA"]["iou_ic"].mean == pytest.approx(0.6)
        assert rep.per_class["BGA"]["iou_ic"].n == 2

    def test_empty(self):
        with pytest.raises(EvaluationError):
            aggregate([])

    def test_run_label_length(self):
        with pytest.raises(EvaluationError):
            aggregate([report()], runs=[1, 2])

    @given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 50), st.floats(0, 5)), min_size=1, max_size=20), st.randoms())
    def test_permutation_invariant(self, rows, rnd):
        reps = [report(f"s{k}", iou=i, pred=c, d=d, pin=i) for k, (i, c, d) in enumerate(rows)]
        shuffled = reps[:]
        rnd.shuffle(shuffled)
        a, b = aggregate(reps).metrics, aggregate(shuffled).metrics
        for key in a:
            assert a[key].mean == pytest.approx(b[key].mean, abs=1e-12)
            assert a[key].std == pytest.approx(b[key].std, abs=1e-12)
            assert a[key].std >= 0

    def test_renderers(self, soic8):
        reps = [score_sample(soic8, soic8, sample_id="a"), score_sample(None, soic8, sample_id="b")]
        rep = aggregate(reps, seed=3)
        doc = json.loads(report_json(rep, reps))
        assert doc["n"] == 2 and doc["meta"]["seed"] == 3 and len(doc["samples"]) == 2
        assert doc["meta"]["std_over"] == "samples"
        rows = list(csv.DictReader(io.StringIO(report_csv(rep))))
        assert {"subset", "metric", "mean", "std", "n"} == set(rows[0])
        table = report_table(rep)
        assert "IoU_IC (%)" in table and "50.0" in table and "d_pin averaged over 1 of 2" in table

    def test_json_without_defined_distances(self, soic8):
        rep = aggregate([score_sample(None, soic8)])
        assert json.loads(report_json(rep))["metrics"]["d_pin"]["mean"] is None
        assert "n/a" in report_table(rep)


def test_corpus_self_scores_perfect():
    spec = CorpusSpec(count=60, seed=5)
    reps = [score_sample(g, g) for g in (sample_one(spec, i) for i in range(60))]
    m = aggregate(reps).metrics
    assert (m["iou_ic"].mean, m["d_pin"].mean, m["iou_pin"].mean, m["count_abs_error"].mean) == (1.0, 0.0, 1.0, 0.0)
