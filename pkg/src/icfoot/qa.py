"""
Chain-of-thought QA samples, training-stage manifests and answer parsing.

Task 1 is the pin count, task 2 the pin centers relative to the layout
center, task 3 the pin dimensions (mm). Answers are JSON fragments:
``{"count": 8}``, ``{"centers": [[x, y], ...]}``, ``{"dims": [[w, h], ...]}``,
listed in ordinal order with at most four decimals.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Sequence

from .geometry import LAYOUT_CENTER, FootprintGeometry, Pin, Shape, recenter
from .synth import make_rng

QUESTIONS = {
    1: "How many pins does the IC footprint in this diagram have? Reply in JSON as {\"count\": N}.",
    2: "Give the center coordinates (x, y) of each pin, in pin-number order, relative to the center of the footprint diagram, in millimeters. Reply in JSON as {\"centers\": [[x, y], ...]}.",
    3: "Give the size (width, height) of each pin, in pin-number order, in millimeters. Reply in JSON as {\"dims\": [[w, h], ...]}.",
}
ANSWER_KEYS = {1: "count", 2: "centers", 3: "dims"}

# task partition of each dialogue strategy: one entry per sample, with its round
DIALOGUE_STRATEGIES: dict[str, list[tuple[int, tuple[int, ...]]]] = {
    "S1": [(1, (1, 2, 3))],
    "S2": [(1, (1,)), (1, (2,)), (1, (3,))],
    "S3": [(1, (1,)), (2, (2, 3))],
    "S4": [(1, (1, 2)), (2, (1, 3))],
    "S5": [(1, (1,)), (2, (2,)), (3, (3,))],
}
DATASET_STRATEGIES = {
    "T1": [("real-world",)],
    "T2": [("real-world", "synthetic")],
    "T3": [("real-world",), ("synthetic",)],
    "T4": [("synthetic",), ("real-world",)],
}
SOURCES = ("synthetic", "real-world")
ANSWER_DECIMALS = 4


class StrategyError(ValueError):
    pass


def fmt_number(value: float) -> str:
    text = f"{round(float(value), ANSWER_DECIMALS):.{ANSWER_DECIMALS}f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _pairs(values) -> str:
    return "[" + ", ".join(f"[{fmt_number(a)}, {fmt_number(b)}]" for a, b in values) + "]"


def canonical_answers(geometry: FootprintGeometry) -> dict[str, Any]:
    """Ground-truth answers for the three tasks, ordered by ordinal."""
    if geometry.origin != LAYOUT_CENTER:
        geometry = recenter(geometry)
    pins = geometry.by_ordinal()
    r = lambda v: float(fmt_number(v))  # noqa: E731
    return {
        "count": len(pins),
        "centers": [[r(p.cx), r(p.cy)] for p in pins],
        "dims": [[r(p.w), r(p.h)] for p in pins],
    }


def answer_text(answers: dict[str, Any], task: int) -> str:
    if task == 1:
        return json.dumps({"count": int(answers["count"])})
    key = ANSWER_KEYS[task]
    return '{"' + key + '": ' + _pairs(answers[key]) + "}"


@dataclass(frozen=True)
class Turn:
    task: int
    question: str
    answer: str


@dataclass(frozen=True)
class ConversationSample:
    sample_id: str
    image_ref: str
    turns: tuple[Turn, ...]
    strategy: str
    round: int
    group_id: str
    source: str = "synthetic"

    @property
    def tasks(self) -> tuple[int, ...]:
        return tuple(t.task for t in self.turns)

    def to_record(self) -> dict:
        return {
            "id": self.sample_id,
            "image": self.image_ref,
            "turns": [{"task": t.task, "q": t.question, "a": t.answer} for t in self.turns],
            "strategy": self.strategy,
            "round": self.round,
            "group_id": self.group_id,
            "source": self.source,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ConversationSample":
        return cls(
            sample_id=rec["id"],
            image_ref=rec["image"],
            turns=tuple(Turn(int(t["task"]), t["q"], t["a"]) for t in rec["turns"]),
            strategy=rec["strategy"],
            round=int(rec["round"]),
            group_id=rec["group_id"],
            source=rec["source"],
        )


def build_conversation(
    geometry: FootprintGeometry,
    image_ref: str,
    strategy: str = "S1",
    source: str = "synthetic",
    group_id: str | None = None,
) -> list[ConversationSample]:
    """QA samples for one footprint, split according to a dialogue strategy."""
    if strategy not in DIALOGUE_STRATEGIES:
        raise StrategyError(f"unknown dialogue strategy {strategy!r}; expected one of {', '.join(DIALOGUE_STRATEGIES)}")
    if source not in SOURCES:
        raise ValueError(f"source must be one of {SOURCES}, got {source!r}")
    answers = canonical_answers(geometry)
    group_id = group_id or geometry.source_id or image_ref
    out = []
    for k, (rnd, tasks) in enumerate(DIALOGUE_STRATEGIES[strategy]):
        turns = tuple(Turn(t, QUESTIONS[t], answer_text(answers, t)) for t in tasks)
        out.append(ConversationSample(f"{group_id}-{strategy}-{k + 1}", image_ref, turns, strategy, rnd, group_id, source))
    return out


@lru_cache(maxsize=None)
def conversation_schema() -> dict:
    text = resources.files("icfoot").joinpath("schemas/conversation.schema.json").read_text()
    return json.loads(text)


def validate_record(record: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if a JSONL record breaks the shipped schema."""
    import jsonschema

    jsonschema.validate(record, conversation_schema())


# ---------------------------------------------------------------------------
# stage manifests


@dataclass(frozen=True)
class Stage:
    name: str
    sample_refs: tuple[str, ...]


@dataclass(frozen=True)
class StageManifest:
    strategy: str
    stages: tuple[Stage, ...]
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "stages": [{"name": s.name, "samples": list(s.sample_refs)} for s in self.stages],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StageManifest":
        return cls(doc["strategy"], tuple(Stage(s["name"], tuple(s["samples"])) for s in doc["stages"]), doc.get("seed", 0))


def build_manifest(
    synthetic: Sequence[str],
    realworld: Sequence[str],
    strategy: str = "T4",
    seed: int = 0,
) -> StageManifest:
    """Training stages per a dataset strategy; order within a stage is a seeded shuffle."""
    if strategy not in DATASET_STRATEGIES:
        raise StrategyError(f"unknown dataset strategy {strategy!r}; expected one of {', '.join(DATASET_STRATEGIES)}")
    pools = {"synthetic": list(synthetic), "real-world": list(realworld)}
    needed = {src for stage in DATASET_STRATEGIES[strategy] for src in stage}
    for src in sorted(needed):
        if not pools[src]:
            raise StrategyError(f"{strategy} needs a non-empty {src} corpus")
    rng = make_rng(seed)
    stages = []
    for k, sources in enumerate(DATASET_STRATEGIES[strategy], start=1):
        refs = [r for src in sources for r in pools[src]]
        if len(set(refs)) != len(refs):
            raise StrategyError(f"stage {k} of {strategy} lists a sample more than once")
        order = rng.permutation(len(refs))
        stages.append(Stage("+".join(sources), tuple(refs[i] for i in order)))
    return StageManifest(strategy, tuple(stages), seed)


# ---------------------------------------------------------------------------
# parsing model output

STRICT, LENIENT, FAILED = "strict", "lenient", "failed"

_FENCE = re.compile(r"```(?:json|JSON)?\s*(.*?)```", re.S)
_INT = re.compile(r"(?<![\w.-])\d+(?:\.0+)?(?![\w.]|\.\d)")
_NUM = r"-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PAIR_LIST = re.compile(r"\[\s*\[\s*" + _NUM + r"\s*,\s*" + _NUM + r"\s*\](?:\s*,\s*\[\s*" + _NUM + r"\s*,\s*" + _NUM + r"\s*\])*\s*\]")


@dataclass(frozen=True)
class ParsedAnswer:
    task: int
    value: Any
    outcome: str

    @property
    def failed(self) -> bool:
        return self.outcome == FAILED


def _coerce(obj, task: int):
    """Task-shaped value from decoded JSON, or None."""
    key = ANSWER_KEYS[task]
    if isinstance(obj, dict):
        if key not in obj:
            return None
        obj = obj[key]
    if task == 1:
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            return None
        if not math.isfinite(obj) or obj < 0 or obj != int(obj):
            return None
        return int(obj)
    if not isinstance(obj, list):
        return None
    out = []
    for item in obj:
        if not (isinstance(item, list) and len(item) == 2):
            return None
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) for v in item):
            return None
        out.append([float(item[0]), float(item[1])])
    return out


def _loads(text: str):
    try:
        return json.loads(text, parse_constant=lambda c: math.nan)
    except (ValueError, RecursionError):
        return None


def parse_prediction(text: str, task: int) -> ParsedAnswer:
    """Extract a task answer from free-form model output.

    Tries strict JSON, then a fenced code block, then the first well-formed
    number / list of pairs in the text. Never raises on bad input.
    """
    if task not in ANSWER_KEYS:
        raise ValueError(f"task must be 1, 2 or 3, got {task!r}")
    if not isinstance(text, str):
        return ParsedAnswer(task, None, FAILED)
    try:
        value = _coerce(_loads(text.strip()), task)
        if value is not None:
            return ParsedAnswer(task, value, STRICT)
        for block in _FENCE.findall(text):
            value = _coerce(_loads(block.strip()), task)
            if value is not None:
                return ParsedAnswer(task, value, LENIENT)
        if task == 1:
            m = _INT.search(text)
            if m:
                return ParsedAnswer(task, int(float(m.group())), LENIENT)
        else:
            key_pat = re.compile(r'"?' + ANSWER_KEYS[task] + r'"?\s*:\s*(\[)')
            m = key_pat.search(text)
            start = m.start(1) if m else 0
            found = _PAIR_LIST.search(text, start) or _PAIR_LIST.search(text)
            if found:
                value = _coerce(_loads(found.group()), task)
                if value is not None:
                    return ParsedAnswer(task, value, LENIENT)
    except (ValueError, TypeError, OverflowError, RecursionError):
        pass
    return ParsedAnswer(task, None, FAILED)


def answers_to_geometry(
    centers: Sequence[Sequence[float]] | None,
    dims: Sequence[Sequence[float]] | None,
    truth: FootprintGeometry,
    source_id: str = "",
) -> FootprintGeometry:
    """Predicted layout from task-2/3 answers, index-matched to ``truth``.

    Answers carry no pad shape, so pin i borrows the shape family of truth
    pin i; surplus pins use the truth's first pin. A circle with unequal
    sides becomes a stadium. The result stays in the layout-center frame
    the question asked for and is not recentered.
    """
    centers = list(centers or [])
    dims = list(dims or [])
    truth_pins = truth.by_ordinal()
    n = min(len(centers), len(dims))
    pins = []
    for i in range(n):
        ref = truth_pins[i] if i < len(truth_pins) else (truth_pins[0] if truth_pins else None)
        w, h = dims[i]
        shape = ref.shape if ref is not None else Shape.RECTANGLE
        if shape is Shape.CIRCLE and abs(w - h) > 1e-9:
            shape = Shape.STADIUM
        designator = ref.designator if (ref is not None and i < len(truth_pins)) else str(i + 1)
        pins.append(Pin(designator, i + 1, centers[i][0], centers[i][1], shape, w, h))
    return FootprintGeometry(truth.package_class, pins, LAYOUT_CENTER, source_id or truth.source_id)
