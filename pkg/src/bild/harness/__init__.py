"""Desk-scale distillation experiments: corpus, toy models, training, bench.

Everything runs in numpy on a single thread and is exactly reproducible:
all randomness in a run derives from the corpus/model/config seeds.
"""

from .bench import BenchResult, bench_losses, fit_power_law, time_pairwise_construction
from .corpus import Corpus, generate_corpus
from .model import ToyModel, ToyModelConfig
from .training import (
    CompareRow,
    CompareTable,
    SweepRow,
    SweepTable,
    TrainLog,
    TrainingError,
    distill_student,
    evaluate_accuracy,
    evaluate_overlap,
    model_trace,
    run_comparison,
    run_sweep,
    split_corpus,
    train_teacher,
    unigram_accuracy,
)

__all__ = [
    "BenchResult",
    "bench_losses",
    "fit_power_law",
    "time_pairwise_construction",
    "Corpus",
    "generate_corpus",
    "ToyModel",
    "ToyModelConfig",
    "CompareRow",
    "CompareTable",
    "SweepRow",
    "SweepTable",
    "TrainLog",
    "TrainingError",
    "distill_student",
    "evaluate_accuracy",
    "evaluate_overlap",
    "model_trace",
    "run_comparison",
    "run_sweep",
    "split_corpus",
    "train_teacher",
    "unigram_accuracy",
]
