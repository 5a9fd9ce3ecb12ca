"""Per-sample footprint metrics and benchmark aggregation.

Four metrics per sample: layout IoU over the whole pad region, the pin
count error, the mean center distance of index-matched pins, and the mean
per-pin outline IoU.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .geometry import FootprintGeometry, Pin, layout_iou, pad_iou

METRICS = ("iou_ic", "count_abs_error", "d_pin", "iou_pin")
INDEX, NEAREST = "index", "nearest"


class EvaluationError(ValueError):
    pass


def count_errors(pairs: Iterable[tuple[int, int]]) -> dict[str, float]:
    diffs = np.array([p - t for p, t in pairs], dtype=float)
    if diffs.size == 0:
        raise EvaluationError("count_errors needs at least one (pred, truth) pair")
    return {"MAE": float(np.mean(np.abs(diffs))), "RMSE": float(np.sqrt(np.mean(diffs**2)))}


def _pins(g) -> list[Pin]:
    if g is None:
        return []
    if isinstance(g, FootprintGeometry):
        return g.by_ordinal()
    return sorted(g, key=lambda p: p.ordinal)


def match_pins(pred, truth, mode: str = INDEX) -> list[tuple[int, int]]:
    """(pred index, truth index) pairs.

    ``index`` pairs the i-th pins in ordinal order over the shorter list.
    ``nearest`` solves a minimum total distance assignment; it is meant
    for analysis and is not the reported metric.
    """
    p, t = _pins(pred), _pins(truth)
    n = min(len(p), len(t))
    if mode == INDEX:
        return [(i, i) for i in range(n)]
    if mode == NEAREST:
        if n == 0:
            return []
        from scipy.optimize import linear_sum_assignment

        a = np.array([(q.cx, q.cy) for q in p])
        b = np.array([(q.cx, q.cy) for q in t])
        cost = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
        rows, cols = linear_sum_assignment(cost)
        return sorted(zip(rows.tolist(), cols.tolist()), key=lambda rc: rc[1])
    raise EvaluationError(f"unknown matching mode {mode!r}")


@dataclass(frozen=True)
class PinDistance:
    value: float | None
    n_matched: int
    count_mismatch: bool

    @property
    def defined(self) -> bool:
        return self.value is not None


def pin_distance(pred, truth, mode: str = INDEX) -> PinDistance:
    p, t = _pins(pred), _pins(truth)
    pairs = match_pins(p, t, mode)
    mismatch = len(p) != len(t)
    if not pairs:
        return PinDistance(None, 0, mismatch)
    d = [math.hypot(p[i].cx - t[j].cx, p[i].cy - t[j].cy) for i, j in pairs]
    return PinDistance(float(np.mean(d)), len(pairs), mismatch)


def pin_dim_iou(pred, truth, mode: str = INDEX) -> float:
    """Mean outline IoU per truth pin; unmatched truth pins count 0."""
    p, t = _pins(pred), _pins(truth)
    if not t:
        return 0.0
    total = sum(pad_iou(p[i], t[j]) for i, j in match_pins(p, t, mode))
    return total / len(t)


@dataclass(frozen=True)
class SampleReport:
    sample_id: str
    iou_ic: float
    count_pred: int
    count_truth: int
    d_pin: float | None
    iou_pin: float
    package_class: str = ""
    count_mismatch: bool = False
    parse: Mapping[str, str] = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    @property
    def count_abs_error(self) -> int:
        return abs(self.count_pred - self.count_truth)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["parse"] = dict(self.parse)
        d["flags"] = list(self.flags)
        return d


def score_sample(
    pred: FootprintGeometry | Sequence[Pin] | None,
    truth: FootprintGeometry,
    sample_id: str = "",
    count_pred: int | None = None,
    parse: Mapping[str, str] | None = None,
    flags: Sequence[str] = (),
    mode: str = INDEX,
) -> SampleReport:
    """All four metrics for one sample.

    ``count_pred`` is the task-1 answer when it was asked separately;
    otherwise the number of predicted pins is used. A missing or failed
    prediction scores as empty.
    """
    p = _pins(pred)
    t = truth.by_ordinal()
    dist = pin_distance(p, t, mode)
    flags = list(flags)
    if not p:
        flags.append("empty-prediction")
    if dist.count_mismatch:
        flags.append("count-mismatch")
    if not dist.defined:
        flags.append("d_pin-undefined")
    return SampleReport(
        sample_id=sample_id or truth.source_id,
        iou_ic=layout_iou(p, t),
        count_pred=len(p) if count_pred is None else int(count_pred),
        count_truth=len(t),
        d_pin=dist.value,
        iou_pin=pin_dim_iou(p, t, mode),
        package_class=truth.package_class.name,
        count_mismatch=dist.count_mismatch,
        parse=dict(parse or {}),
        flags=tuple(dict.fromkeys(flags)),
    )


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class BenchmarkReport:
    metrics: Mapping[str, MetricSummary]
    per_class: Mapping[str, Mapping[str, MetricSummary]]
    n: int
    std_over: str
    d_pin_averaging: str = "per-sample mean, then mean over samples with a defined value"
    seed: int | None = None
    version: str = __version__
    n_runs: int = 1
    flags: Mapping[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def summ(m):
            return {k: {"mean": _finite_or_none(v.mean), "std": _finite_or_none(v.std), "n": v.n} for k, v in m.items()}

        return {
            "n": self.n,
            "metrics": summ(self.metrics),
            "per_class": {c: summ(m) for c, m in self.per_class.items()},
            "meta": {
                "std_over": self.std_over,
                "n_runs": self.n_runs,
                "d_pin_averaging": self.d_pin_averaging,
                "seed": self.seed,
                "version": self.version,
                "flags": dict(self.flags),
            },
        }


def _finite_or_none(v: float) -> float | None:
    return v if math.isfinite(v) else None


def _summary(values: list[float], run_ids: list | None) -> MetricSummary:
    vals = np.asarray(values, dtype=float)
    n = len(vals)
    if n == 0:
        return MetricSummary(math.nan, math.nan, 0)
    mean = float(np.mean(vals))
    if run_ids is not None:
        groups = defaultdict(list)
        for v, r in zip(vals, run_ids):
            groups[r].append(v)
        means = [np.mean(groups[r]) for r in sorted(groups, key=str)]
        mean = float(np.mean(means))
        std = float(np.std(means, ddof=1)) if len(means) > 1 else 0.0
    else:
        std = float(np.std(vals, ddof=1)) if n > 1 else 0.0
    return MetricSummary(mean, std, n)


def _metric_values(reports, run_ids):
    """metric -> (values, run ids), dropping undefined distances."""
    out = {}
    for m in METRICS:
        vals, ids = [], []
        for k, r in enumerate(reports):
            v = getattr(r, m)
            if v is None:
                continue
            vals.append(float(v))
            if run_ids is not None:
                ids.append(run_ids[k])
        out[m] = (vals, ids if run_ids is not None else None)
    return out


def aggregate(
    reports: Sequence[SampleReport],
    runs: Sequence | None = None,
    seed: int | None = None,
) -> BenchmarkReport:
    """Mean and spread per metric.

    With ``runs`` (one run label per report) covering at least two runs, the
    mean is the mean of run means and the spread is their standard deviation.
    Otherwise the spread is the sample standard deviation over reports.
    """
    reports = list(reports)
    if not reports:
        raise EvaluationError("aggregate needs at least one sample report")
    run_ids = None
    if runs is not None:
        runs = list(runs)
        if len(runs) != len(reports):
            raise EvaluationError(f"got {len(runs)} run labels for {len(reports)} reports")
        if len(set(runs)) >= 2:
            run_ids = runs
    n_runs = len(set(runs)) if runs is not None else 1

    def summarise(rs, ids):
        vals = _metric_values(rs, ids)
        out = {m: _summary(v, i) for m, (v, i) in vals.items()}
        diffs = [r.count_pred - r.count_truth for r in rs]
        out["count_rmse"] = MetricSummary(float(np.sqrt(np.mean(np.square(diffs)))), 0.0, len(rs))
        return out

    by_class = defaultdict(list)
    for k, r in enumerate(reports):
        by_class[r.package_class].append(k)
    per_class = {}
    for c in sorted(by_class):
        idx = by_class[c]
        per_class[c] = summarise([reports[k] for k in idx], [run_ids[k] for k in idx] if run_ids else None)

    flag_counts: dict[str, int] = defaultdict(int)
    for r in reports:
        for f in r.flags:
            flag_counts[f] += 1
    return BenchmarkReport(
        metrics=summarise(reports, run_ids),
        per_class=per_class,
        n=len(reports),
        std_over="runs" if run_ids else "samples",
        seed=seed,
        n_runs=n_runs,
        flags=dict(sorted(flag_counts.items())),
    )


# rendering

COLUMNS = [
    ("IoU_IC (%)", "iou_ic", "pct"),
    ("MAE", "count_abs_error", "dist"),
    ("RMSE", "count_rmse", "rmse"),
    ("d_pin (mm)", "d_pin", "dist"),
    ("IoU_pin (%)", "iou_pin", "pct"),
]


def format_cell(s: MetricSummary, kind: str) -> str:
    if s.n == 0 or math.isnan(s.mean):
        return "n/a"
    if kind == "pct":
        return f"{100 * s.mean:.1f} ± {100 * s.std:.1f}"
    if kind == "rmse":
        return f"{s.mean:.2f}"
    return f"{s.mean:.2f} ± {s.std:.2f}"


def _rows(report: BenchmarkReport):
    yield "overall", report.n, report.metrics
    for c, m in report.per_class.items():
        yield c, m["iou_ic"].n, m


def report_table(report: BenchmarkReport) -> str:
    header = ["subset", "n"] + [c[0] for c in COLUMNS]
    rows = [[name, str(n)] + [format_cell(m[key], kind) for _, key, kind in COLUMNS] for name, n, m in _rows(report)]
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    out = [line(header), line(["-" * w for w in widths])] + [line(r) for r in rows]
    d_pin_n = report.metrics["d_pin"].n
    out.append("")
    out.append(f"± is std over {report.std_over}; d_pin averaged over {d_pin_n} of {report.n} samples")
    return "\n".join(out) + "\n"


def report_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subset", "metric", "mean", "std", "n"])
    for name, _, m in _rows(report):
        for key, s in m.items():
            w.writerow([name, key, repr(s.mean), repr(s.std), s.n])
    return buf.getvalue()


def report_json(report: BenchmarkReport, samples: Sequence[SampleReport] = ()) -> str:
    doc = report.to_dict()
    if samples:
        doc["samples"] = [s.to_dict() for s in samples]
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"
