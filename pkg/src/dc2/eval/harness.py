"""Run a benchmark through a runner and aggregate the scores."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Callable, Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

from ..backend import AuthenticationError, SystemClock
from .dataset import CATEGORIES, BenchmarkSample
from .metrics import cyclic_permutations, miou, parse_choice, recall_at_k, rotated_gold, uncertainty
from .runners import RunnerOutput

log = logging.getLogger(__name__)

REPORT_SCHEMA = "dc2-report/1"


class Runner(Protocol):
    name: str

    def __call__(self, sample: BenchmarkSample, options: Sequence[str]) -> RunnerOutput: ...


@dataclass
class SampleResult:
    id: str
    category: str
    correct: List[int] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    uncertainty: Optional[float] = None
    recall_at_2: Optional[int] = None
    iou: Optional[float] = None
    failed: bool = False
    error: Optional[str] = None

    @property
    def accuracy(self) -> float:
        return fmean(self.correct) if self.correct else 0.0

    def row(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "accuracy": self.accuracy,
            "correct": "".join(map(str, self.correct)),
            "uncertainty": "" if self.uncertainty is None else self.uncertainty,
            "recall_at_2": "" if self.recall_at_2 is None else self.recall_at_2,
            "iou": "" if self.iou is None else self.iou,
            "failed": int(self.failed),
            "error": self.error or "",
        }


def score_sample(sample: BenchmarkSample, runner: Runner) -> SampleResult:
    """Ask every rotation of the options and score each answer 0/1."""
    result = SampleResult(sample.id, sample.category)
    n = len(sample.options)
    unc = []
    hits = None
    for r, options in enumerate(cyclic_permutations(sample.options)):
        try:
            out = runner(sample, options)
        except AuthenticationError:
            raise
        except Exception as exc:
            log.warning("sample %s rotation %d failed: %s", sample.id, r, exc)
            result.correct.append(0)
            result.outputs.append("")
            continue
        gold = rotated_gold(sample.gold_index, r, n)
        result.correct.append(int(parse_choice(out.text, options) == gold))
        result.outputs.append(out.text)
        u = uncertainty(out.token_logprobs or [])
        if u is not None:
            unc.append(u)
        if hits is None:
            hits = out.hits
    if unc:
        result.uncertainty = fmean(unc)
    if hits is not None and getattr(runner, "name", "") == "dc2":
        if sample.target_objects:
            result.recall_at_2 = recall_at_k([h.name for h in hits], sample.target_objects, 2)
        if sample.target_bbox is not None:
            result.iou = miou([h.region for h in hits], sample.target_bbox)
    return result


def sample_accuracy(sample: BenchmarkSample, runner: Runner) -> float:
    return score_sample(sample, runner).accuracy


def _mean(values: Iterable[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return fmean(vals) if vals else None


@dataclass
class EvalReport:
    runner: str
    per_category: Dict[str, float]
    fsp: Optional[float]
    fcp: Optional[float]
    overall: float
    throughput: float
    n_samples: int
    n_failed: int
    elapsed_seconds: float
    mean_uncertainty: Optional[float] = None
    recall_at_2: Optional[float] = None
    miou: Optional[float] = None
    backend_calls: Optional[int] = None
    config: dict = field(default_factory=dict)
    samples: List[SampleResult] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "runner": self.runner,
            "accuracy": {
                "per_category": self.per_category,
                "FSP": self.fsp,
                "FCP": self.fcp,
                "overall": self.overall,
            },
            "throughput_samples_per_minute": self.throughput,
            "n_samples": self.n_samples,
            "n_failed": self.n_failed,
            "elapsed_seconds": self.elapsed_seconds,
            "mean_uncertainty": self.mean_uncertainty,
            "recall_at_2": self.recall_at_2,
            "miou": self.miou,
            "backend_calls": self.backend_calls,
            "config": self.config,
        }

    def write_json(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)

    def write_csv(self, path: Path | str) -> None:
        rows = [s.row() for s in self.samples]
        fieldnames = list(SampleResult("", "").row())
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)


def aggregate(results: Sequence[SampleResult]) -> Tuple[Dict[str, float], Optional[float], Optional[float], float]:
    """Per-category accuracy, FSP and FCP as the mean of their category
    accuracies, and overall as the mean over samples."""
    by_cat: Dict[str, List[float]] = {}
    for r in results:
        by_cat.setdefault(r.category, []).append(r.accuracy)
    per_category = {c: fmean(by_cat[c]) for c in CATEGORIES if c in by_cat}

    def split_mean(split: str) -> Optional[float]:
        vals = [v for c, v in per_category.items() if c.split(":")[0] == split]
        return fmean(vals) if vals else None

    overall = fmean([r.accuracy for r in results]) if results else 0.0
    return per_category, split_mean("FSP"), split_mean("FCP"), overall


def evaluate(
    samples: Sequence[BenchmarkSample],
    runner: Runner,
    config: Optional[dict] = None,
    clock=None,
    workers: int = 1,
    backend_calls: Optional[Callable[[], int]] = None,
) -> EvalReport:
    """Score every sample; the report is ordered by sample id whatever the
    completion order.

    A sample whose image cannot be prepared is scored 0, marked failed and
    left out of the throughput numerator.
    """
    clock = clock or SystemClock()
    start = clock.now()

    def run(sample: BenchmarkSample) -> SampleResult:
        prepare = getattr(runner, "prepare", None)
        try:
            if prepare is not None:
                prepare(sample)
        except AuthenticationError:
            raise
        except Exception as exc:
            log.error("sample %s unusable: %s", sample.id, exc)
            n = len(sample.options)
            return SampleResult(sample.id, sample.category, [0] * n, [""] * n, failed=True, error=str(exc))
        try:
            return score_sample(sample, runner)
        finally:
            finish = getattr(runner, "finish", None)
            if finish is not None:
                finish(sample)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, samples))
    else:
        results = [run(s) for s in samples]
    elapsed = clock.now() - start
    results.sort(key=lambda r: r.id)

    per_category, fsp, fcp, overall = aggregate(results)
    completed = sum(1 for r in results if not r.failed)
    throughput = completed / (elapsed / 60.0) if elapsed > 0 else float("inf")
    return EvalReport(
        runner=getattr(runner, "name", type(runner).__name__),
        per_category=per_category,
        fsp=fsp,
        fcp=fcp,
        overall=overall,
        throughput=throughput,
        n_samples=len(results),
        n_failed=len(results) - completed,
        elapsed_seconds=elapsed,
        mean_uncertainty=_mean(r.uncertainty for r in results),
        recall_at_2=_mean(r.recall_at_2 for r in results),
        miou=_mean(r.iou for r in results),
        backend_calls=backend_calls() if backend_calls else None,
        config=dict(config or {}),
        samples=results,
    )


@dataclass
class SweepPoint:
    theta: float
    throughput: float
    accuracy: float
    backend_calls: int


def throughput_sweep(
    samples: Sequence[BenchmarkSample],
    thetas: Sequence[float],
    make_runner: Callable[[float], Tuple[Runner, Callable[[], int]]],
    clock=None,
    config: Optional[dict] = None,
) -> List[SweepPoint]:
    """Evaluate once per ``theta``; ``make_runner`` builds a fresh runner
    and a backend-call counter for each value."""
    points = []
    for theta in thetas:
        runner, calls = make_runner(theta)
        report = evaluate(samples, runner, config=dict(config or {}, theta=theta), clock=clock)
        points.append(SweepPoint(theta, report.throughput, report.overall, calls()))
    return points


def write_sweep_csv(points: Sequence[SweepPoint], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "throughput", "accuracy", "backend_calls"])
        for p in points:
            writer.writerow([p.theta, p.throughput, p.accuracy, p.backend_calls])
