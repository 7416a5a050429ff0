"""Benchmark harness: cyclic-permutation accuracy and retrieval metrics."""
from .dataset import CATEGORIES, BenchmarkSample, DatasetError, load_dataset
from .harness import (
    REPORT_SCHEMA,
    EvalReport,
    SampleResult,
    SweepPoint,
    aggregate,
    evaluate,
    sample_accuracy,
    score_sample,
    throughput_sweep,
    write_sweep_csv,
)
from .metrics import (
    cyclic_permutations,
    letter,
    mg,
    miou,
    ml,
    parse_choice,
    recall_at_k,
    rotated_gold,
    uncertainty,
)
from .runners import BaselineRunner, DC2Runner, RunnerOutput, TextOnlyRunner

__all__ = [
    "BaselineRunner", "BenchmarkSample", "CATEGORIES", "DC2Runner", "DatasetError",
    "EvalReport", "REPORT_SCHEMA", "RunnerOutput", "SampleResult", "SweepPoint",
    "TextOnlyRunner", "aggregate", "cyclic_permutations", "evaluate", "letter",
    "load_dataset", "mg", "miou", "ml", "parse_choice", "recall_at_k", "rotated_gold",
    "sample_accuracy", "score_sample", "throughput_sweep", "uncertainty", "write_sweep_csv",
]
