"""Benchmark scoring: response times, judged text quality, and reports.

Timing: a question counts as timely when the first proactive response
lands inside the closed interval [t1, t2 + margin]; per-subtask time
accuracy is the fraction of timely questions. Text quality: open-ended
responses are scored 0-5 by a judge endpoint fed a fixed prompt
template; multi-choice questions score 5 per correct answer and their
time accuracy is 1 by definition. The overall score averages, across
the seven subtasks, the product of time accuracy and text score.

Also here: the two-step offline protocol (poll "is now the moment?"
per timestamp over a growing prefix, then ask for the response) and the
interruption probe (force-feed a long reply and watch for the stop
glyph at segment marks).
"""

from __future__ import annotations

import csv
import io
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .context import Channel, SegmentEvent
from .data import (
    ALL_SUBTASKS,
    DEFAULT_MARGIN,
    TEXT_SUBTASKS,
    TIMED_SUBTASKS,
    Annotation,
    Subtask,
)
from .engine import STOP_TEXT, SessionTranscript
from .errors import RejectedInput
from .gating import GatingConfig, should_speak
from .judges import (
    GPT_TEXT_LABEL,
    GROUND_TRUTH_LABEL,
    REFERENCE_LABEL,
    Judge,
)
from .protocol import Backend

PARSE_FAILURE_REASON = "judge_parse_failure"
NO_RESPONSE_REASON = "no_response"
TWO_COMPONENT_SUBTASKS = (Subtask.ANOMALY_WARNING, Subtask.GESTURE_UNDERSTANDING)
COMPONENT_CAPS = {"description": 3.0, "advice": 2.0}
VR_POINTS = 5.0
_STOP_PREFIX = f"{Channel.VISUAL.glyph} {STOP_TEXT}"


# ---------------------------------------------------------------------------
# prompt plumbing

def _prompt_text(kind: str, name: str) -> str:
    ref = resources.files("vistream.prompts").joinpath(kind).joinpath(name)
    return ref.read_text(encoding="utf-8")


def load_judge_template(subtask: Subtask) -> str:
    if subtask is Subtask.VISUAL_REFERENCE:
        raise RejectedInput("multi-choice questions are scored exactly, not judged")
    return _prompt_text("judge", f"{subtask.value.lower()}.txt")


def load_twostep_prompts(subtask: Subtask) -> tuple[str, str]:
    if subtask is Subtask.VISUAL_REFERENCE:
        raise RejectedInput("multi-choice questions have no two-step protocol")
    code = subtask.value.lower()
    return (
        _prompt_text("twostep", f"{code}_step1.txt").strip(),
        _prompt_text("twostep", f"{code}_step2.txt").strip(),
    )


def _history_lines(annotation: Annotation) -> str:
    if not annotation.context:
        return "(none)"
    return "\n".join(
        f"{turn.role} ({turn.channel}) at {turn.time:.1f}s: {turn.text}"
        for turn in annotation.context
    )


def build_judge_prompt(annotation: Annotation, response_text: str) -> str:
    """Template verbatim, then labeled context/ground-truth/response blocks."""
    template = load_judge_template(annotation.subtask)
    parts = [template.rstrip(), "", "[Dialogue History]", _history_lines(annotation), ""]
    if annotation.subtask is Subtask.GESTURE_UNDERSTANDING:
        parts += ["[Gesture]", annotation.action or "(unknown)", "",
                  REFERENCE_LABEL, annotation.reference, ""]
    else:
        parts += [GROUND_TRUTH_LABEL, annotation.reference, ""]
    parts += [GPT_TEXT_LABEL, response_text]
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# judge verdicts

@dataclass(frozen=True)
class JudgeVerdict:
    total: float
    reason: str
    components: dict = field(default_factory=dict)
    raw: str = ""


def _clamp(value: float, low: float, high: float) -> float:
    return min(high, max(low, value))


def parse_judge_reply(raw: str, two_component: bool) -> JudgeVerdict | None:
    """Lift a raw judge reply into a verdict; None when unparsable."""
    match = re.search(r"\{.*\}", raw, flags=re.DOTALL)
    if not match:
        return None
    try:
        obj = json.loads(match.group(0))
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict):
        return None
    reason = str(obj.get("reason", ""))
    if two_component:
        try:
            description = float(obj["description"])
            advice = float(obj["advice"])
        except (KeyError, TypeError, ValueError):
            return None
        components = {
            "description": _clamp(description, 0.0, COMPONENT_CAPS["description"]),
            "advice": _clamp(advice, 0.0, COMPONENT_CAPS["advice"]),
        }
        total = _clamp(components["description"] + components["advice"], 0.0, 5.0)
        return JudgeVerdict(total=total, reason=reason, components=components, raw=raw)
    try:
        score = float(obj["score"])
    except (KeyError, TypeError, ValueError):
        return None
    return JudgeVerdict(total=_clamp(score, 0.0, 5.0), reason=reason, raw=raw)


def judge_text(response_text: str, annotation: Annotation, judge: Judge) -> JudgeVerdict:
    """Score one response with the judge; one retry, then a zero verdict."""
    prompt = build_judge_prompt(annotation, response_text)
    two_component = annotation.subtask in TWO_COMPONENT_SUBTASKS
    raw = ""
    for _ in range(2):
        raw = judge.reply_to(prompt)
        verdict = parse_judge_reply(raw, two_component)
        if verdict is not None:
            return verdict
    return JudgeVerdict(total=0.0, reason=PARSE_FAILURE_REASON, raw=raw)


# ---------------------------------------------------------------------------
# timing

def response_time(transcript: SessionTranscript, annotation: Annotation) -> float | None:
    """First proactive response time; for interruptions, the stop emission."""
    for entry in transcript.entries:
        if entry.channel is not Channel.VISUAL:
            continue
        if annotation.subtask is Subtask.VISUAL_INTERRUPTION:
            if entry.text.startswith(_STOP_PREFIX):
                return entry.time
            continue
        return entry.time
    return None


def is_timely(t_res: float | None, annotation: Annotation, default_margin: float = DEFAULT_MARGIN) -> bool:
    """Closed-interval membership test: t1 <= t_res <= t2 + margin."""
    if t_res is None:
        return False
    margin = annotation.margin if annotation.margin is not None else default_margin
    return annotation.t1 <= t_res <= annotation.t2 + margin


def time_accuracy(
    pairs: list[tuple[Annotation, float | None]],
    default_margin: float = DEFAULT_MARGIN,
) -> float:
    """Fraction of timely responses over (annotation, response time) pairs."""
    if not pairs:
        raise RejectedInput("time_accuracy needs at least one question")
    hits = sum(1 for ann, t_res in pairs if is_timely(t_res, ann, default_margin))
    return hits / len(pairs)


# ---------------------------------------------------------------------------
# multi-choice

def strip_glyph(text: str) -> str:
    for channel in Channel:
        prefix = channel.glyph
        if text.startswith(prefix):
            return text[len(prefix):].lstrip()
    return text


def extract_choice(transcript: SessionTranscript, annotation: Annotation) -> int | None:
    """Match any transcript entry's text against the four choices."""
    if annotation.choices is None:
        raise RejectedInput(f"{annotation.id} is not a multi-choice question")
    for entry in transcript.entries:
        text = strip_glyph(entry.text).strip()
        for i, choice in enumerate(annotation.choices):
            if text == choice.strip():
                return i
    return None


def score_choice(prediction: int | None, annotation: Annotation) -> float:
    """All-or-nothing points for a multi-choice answer."""
    if annotation.answer_index is None:
        raise RejectedInput(f"{annotation.id} has no answer_index")
    if prediction is None or not (0 <= prediction < len(annotation.choices or [])):
        return 0.0
    return VR_POINTS if prediction == annotation.answer_index else 0.0


# ---------------------------------------------------------------------------
# reports

@dataclass
class QuestionDetail:
    question_id: str
    t_res: float | None
    timely: bool | None  # None for multi-choice (always counted timely)
    score: float
    reason: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "t_res": self.t_res,
            "timely": self.timely,
            "score": self.score,
            "reason": self.reason,
        }


@dataclass
class SubtaskReport:
    subtask: Subtask
    n_questions: int
    time_accuracy: float
    text_score: float
    details: list[QuestionDetail] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "subtask": self.subtask.value,
            "n_questions": self.n_questions,
            "time_accuracy": self.time_accuracy,
            "text_score": self.text_score,
            "details": [d.to_dict() for d in self.details],
        }


@dataclass
class BenchReport:
    subtasks: dict[str, SubtaskReport]
    time_all: float  # percent
    text_all: float
    overall: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "subtasks": {code: self.subtasks[code].to_dict()
                         for code in (s.value for s in TEXT_SUBTASKS) if code in self.subtasks},
            "time_all": self.time_all,
            "text_all": self.text_all,
            "overall": self.overall,
        }


def overall(per_subtask: dict[Subtask, tuple[float, float]]) -> tuple[float, float, float]:
    """(overall, time_all_percent, text_all) from per-subtask (t_acc, score).

    Multi-choice time accuracy must be supplied as 1.0; every one of the
    seven subtasks must be present.
    """
    for subtask in ALL_SUBTASKS:
        if subtask not in per_subtask:
            raise RejectedInput(f"missing subtask {subtask.value}")
    score = sum(t_acc * text for t_acc, text in per_subtask.values()) / len(ALL_SUBTASKS)
    time_all = 100.0 * sum(per_subtask[s][0] for s in TIMED_SUBTASKS) / len(TIMED_SUBTASKS)
    text_all = sum(per_subtask[s][1] for s in TEXT_SUBTASKS) / len(TEXT_SUBTASKS)
    return score, time_all, text_all


def _judged_entry_text(transcript: SessionTranscript, annotation: Annotation) -> str | None:
    for entry in transcript.entries:
        if entry.channel is Channel.VISUAL:
            if annotation.subtask is Subtask.VISUAL_INTERRUPTION and not entry.text.startswith(_STOP_PREFIX):
                continue
            return strip_glyph(entry.text)
    return None


def evaluate(
    annotations: list[Annotation],
    transcripts: list[SessionTranscript],
    judge: Judge,
    default_margin: float = DEFAULT_MARGIN,
    jobs: int = 1,
    config: dict | None = None,
) -> BenchReport:
    """Score transcripts against annotations into a full report.

    Questions without a transcript count as silent misses. Transcripts
    without a matching annotation are rejected. Judge calls may run on a
    small thread pool; results are ordered by question id either way.
    """
    by_id = {ann.id: ann for ann in annotations}
    tr_by_id: dict[str, SessionTranscript] = {}
    for tr in transcripts:
        if tr.question_id not in by_id:
            raise RejectedInput(f"transcript '{tr.question_id}' has no annotation")
        tr_by_id[tr.question_id] = tr

    empty = SessionTranscript(question_id="")
    judge_jobs: list[tuple[int, str, Annotation]] = []  # (slot, text, annotation)
    details: list[QuestionDetail] = []

    ordered = sorted(annotations, key=lambda a: (a.subtask.value, a.id))
    for ann in ordered:
        tr = tr_by_id.get(ann.id, empty)
        if ann.subtask is Subtask.VISUAL_REFERENCE:
            prediction = extract_choice(tr, ann)
            points = score_choice(prediction, ann)
            reason = "choice matched" if points else (
                "no choice recognized" if prediction is None else "wrong choice"
            )
            details.append(QuestionDetail(ann.id, None, None, points, reason))
            continue
        t_res = response_time(tr, ann)
        timely = is_timely(t_res, ann, default_margin)
        judged = _judged_entry_text(tr, ann)
        detail = QuestionDetail(ann.id, t_res, timely, 0.0, NO_RESPONSE_REASON)
        details.append(detail)
        if judged is not None:
            judge_jobs.append((len(details) - 1, judged, ann))

    def run_job(job: tuple[int, str, Annotation]) -> tuple[int, JudgeVerdict]:
        slot, text, ann = job
        return slot, judge_text(text, ann, judge)

    if jobs > 1 and len(judge_jobs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_job, judge_jobs))
    else:
        results = [run_job(job) for job in judge_jobs]
    for slot, verdict in results:
        details[slot].score = verdict.total
        details[slot].reason = verdict.reason

    reports: dict[str, SubtaskReport] = {}
    per_subtask: dict[Subtask, tuple[float, float]] = {}
    for subtask in TEXT_SUBTASKS:
        subtask_details = [d for a, d in zip(ordered, details) if a.subtask is subtask]
        if not subtask_details:
            continue
        n = len(subtask_details)
        mean_score = sum(d.score for d in subtask_details) / n
        if subtask is Subtask.VISUAL_REFERENCE:
            t_acc = 1.0
        else:
            t_acc = sum(1 for d in subtask_details if d.timely) / n
        reports[subtask.value] = SubtaskReport(
            subtask=subtask, n_questions=n, time_accuracy=t_acc,
            text_score=mean_score, details=subtask_details,
        )
        per_subtask[subtask] = (t_acc, mean_score)

    score, time_all, text_all = overall(per_subtask)
    return BenchReport(
        subtasks=reports, time_all=time_all, text_all=text_all,
        overall=score, config=config or {},
    )


def save_report(report: BenchReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# report rendering

def _report_columns(report: BenchReport) -> tuple[list[str], list[str]]:
    headers: list[str] = []
    values: list[str] = []
    for subtask in TIMED_SUBTASKS:
        headers.append(f"time_{subtask.value.lower()}")
        values.append(f"{100.0 * report.subtasks[subtask.value].time_accuracy:.2f}")
    headers.append("time_all")
    values.append(f"{report.time_all:.2f}")
    for subtask in TEXT_SUBTASKS:
        headers.append(f"text_{subtask.value.lower()}")
        values.append(f"{report.subtasks[subtask.value].text_score:.2f}")
    headers.append("text_all")
    values.append(f"{report.text_all:.2f}")
    headers.append("overall")
    values.append(f"{report.overall:.2f}")
    return headers, values


def emit_report(report: BenchReport, fmt: str = "markdown") -> str:
    """Render a report as json, markdown, or csv (same numbers in each)."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"
    headers, values = _report_columns(report)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(headers)
        writer.writerow(values)
        return buf.getvalue()
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(headers) + " |",
            "| " + " | ".join("---" for _ in headers) + " |",
            "| " + " | ".join(values) + " |",
        ]
        return "\n".join(lines) + "\n"
    raise RejectedInput(f"unknown report format '{fmt}'")


# ---------------------------------------------------------------------------
# published-table aggregation

_TIME_COLUMNS = [f"time_{s.value.lower()}" for s in TIMED_SUBTASKS]
_TEXT_COLUMNS = [f"text_{s.value.lower()}" for s in TEXT_SUBTASKS]


def aggregate_rows(path: str | Path) -> list[dict]:
    """Recompute overall and the All columns for a per-subtask CSV.

    The CSV carries one row per model: time accuracies in percent for
    the six timed subtasks and judged text scores for all seven.
    """
    rows: list[dict] = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ["model", *_TIME_COLUMNS, *_TEXT_COLUMNS]
                   if c not in (reader.fieldnames or [])]
        if missing:
            raise RejectedInput(f"aggregate CSV missing columns: {', '.join(missing)}")
        for raw in reader:
            per_subtask: dict[Subtask, tuple[float, float]] = {
                Subtask.VISUAL_REFERENCE: (1.0, float(raw["text_vr"]))
            }
            for subtask in TIMED_SUBTASKS:
                code = subtask.value.lower()
                per_subtask[subtask] = (
                    float(raw[f"time_{code}"]) / 100.0,
                    float(raw[f"text_{code}"]),
                )
            score, time_all, text_all = overall(per_subtask)
            row = {"model": raw["model"]}
            row.update({c: float(raw[c]) for c in _TIME_COLUMNS})
            row["time_all"] = time_all
            row.update({c: float(raw[c]) for c in _TEXT_COLUMNS})
            row["text_all"] = text_all
            row["overall"] = score
            rows.append(row)
    if not rows:
        raise RejectedInput("aggregate CSV has no data rows")
    return rows


def render_aggregate(rows: list[dict], fmt: str = "markdown") -> str:
    headers = ["model", *_TIME_COLUMNS, "time_all", *_TEXT_COLUMNS, "text_all", "overall"]

    def fmt_cell(name: str, value) -> str:
        return value if name == "model" else f"{value:.2f}"

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(headers)
        for row in rows:
            writer.writerow([fmt_cell(h, row[h]) for h in headers])
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(headers) + " |",
                 "| " + " | ".join("---" for _ in headers) + " |"]
        for row in rows:
            lines.append("| " + " | ".join(fmt_cell(h, row[h]) for h in headers) + " |")
        return "\n".join(lines) + "\n"
    raise RejectedInput(f"unknown aggregate format '{fmt}'")


# ---------------------------------------------------------------------------
# offline protocols

class OfflineModel:
    """Offline video QA interface: free-text answer about a video prefix."""

    def answer(self, prompt: str, prefix_seconds: float) -> str:
        raise NotImplementedError


_YES = re.compile(r"^\W*yes\b", flags=re.IGNORECASE)


def two_step_offline(
    model: OfflineModel,
    annotation: Annotation,
    duration: float,
    step: float = 1.0,
) -> tuple[float | None, str | None]:
    """Poll for the response moment, then ask for the response.

    The step-1 prompt is asked over growing prefixes at fixed
    granularity until the model says yes; that timestamp is frozen as
    the response time and the step-2 prompt produces the response text.
    All-no means a miss: no step-2 call, (None, None).
    """
    if step <= 0:
        raise RejectedInput(f"polling step must be positive, got {step}")
    step1, step2 = load_twostep_prompts(annotation.subtask)
    t = step
    while t <= duration + 1e-9:
        if _YES.match(model.answer(step1, t)):
            return t, model.answer(step2, t)
        t += step
    return None, None


def interruption_probe(
    backend: Backend,
    events: list[SegmentEvent],
    long_reply: str,
    gating: GatingConfig | None = None,
    question_id: str = "probe",
) -> float | None:
    """Force-feed a long reply and report when the backend cuts it.

    One forced token is consumed per segment mark; at each mark the
    backend's segment reply is checked for a recognized stop with an
    open gate. Returns the mark time of the first stop, or None when
    the reply runs out (or the trace ends) uninterrupted.
    """
    gating = gating or GatingConfig()
    tokens = long_reply.split()
    backend.init(question_id, {"dim": 0, "threshold": gating.threshold,
                               "score_position": gating.score_position.value})
    try:
        for ev in events:
            if not tokens:
                return None
            tokens.pop(0)
            reply = backend.on_segment(ev)
            if reply.recognized_action == "stop" and should_speak(
                reply.score_at(gating.score_position.value), gating
            ):
                return ev.time
    finally:
        backend.close()
    return None
