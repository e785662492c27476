"""Training loops: teacher fitting, student distillation, comparisons, sweeps.

All loops are plain SGD over shuffled minibatches. Random streams are
namespaced per role (``default_rng([seed, stream])``) so adding one stage
never perturbs another, and reruns with the same config are bit-identical.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ..config import DistillConfig
from ..losses import (
    LossParams,
    Method,
    bild_loss,
    reverse_kl_loss,
    sld_loss,
    tld_loss,
    topk_kl_loss,
    vanilla_kl_loss,
)
from ..metrics import overlap_at_k
from ..trace import LogitsTrace
from .corpus import Corpus, generate_corpus
from .model import ToyModel, ToyModelConfig

__all__ = [
    "TrainingError",
    "TrainLog",
    "CompareRow",
    "CompareTable",
    "SweepRow",
    "SweepTable",
    "DEFAULT_N_SEQUENCES",
    "SFT_EPOCHS",
    "split_corpus",
    "train_teacher",
    "distill_student",
    "evaluate_accuracy",
    "unigram_accuracy",
    "model_trace",
    "evaluate_overlap",
    "run_comparison",
    "run_sweep",
]

DEFAULT_N_SEQUENCES = 512
SFT_EPOCHS = 16
# Tempered-softmax gradients shrink like 1/T^2, so distillation steps are
# rescaled by T^2 (plus a constant tuned for the toy problem) to keep their
# effective size comparable to the cross-entropy phase.
_DISTILL_STEP_BOOST = 3.0
_HOLDOUT_FRAC = 0.125

# Random-stream ids, one per pipeline stage.
_STREAM_TEACHER = 1
_STREAM_DISTILL = 2
_STREAM_SFT = 3


class TrainingError(RuntimeError):
    """Optimization produced a non-finite loss."""


@dataclass(frozen=True)
class TrainLog:
    """Per-step losses plus final held-out evaluation of one training run."""

    step_losses: np.ndarray
    steps_per_epoch: int
    overlap_at_1: float
    overlap_at_8: float
    accuracy: float

    def epoch_means(self) -> np.ndarray:
        """Mean loss per epoch, in training order."""
        return self.step_losses.reshape(-1, self.steps_per_epoch).mean(axis=1)


@dataclass(frozen=True)
class CompareRow:
    label: str
    accuracy: float
    overlap_at_1: float
    overlap_at_8: float
    first_epoch_loss: float | None
    last_epoch_loss: float | None
    seconds: float


@dataclass(frozen=True)
class CompareTable:
    """One row per training recipe, all evaluated on the same held-out split."""

    rows: list[CompareRow]
    teacher_accuracy: float

    def row(self, label: str) -> CompareRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


@dataclass(frozen=True)
class SweepRow:
    value: float
    accuracy: float
    overlap_at_1: float
    overlap_at_8: float
    last_epoch_loss: float
    diverged: bool = False


@dataclass(frozen=True)
class SweepTable:
    param: str
    method: str
    rows: list[SweepRow]


def split_corpus(corpus: Corpus, holdout_frac: float = _HOLDOUT_FRAC) -> tuple[Corpus, Corpus]:
    """Deterministic train/held-out split: the last rows are held out."""
    n_hold = max(1, round(holdout_frac * corpus.n_sequences))
    if n_hold >= corpus.n_sequences:
        raise ValueError("holdout would consume the entire corpus")
    cut = corpus.n_sequences - n_hold
    return (
        Corpus(corpus.tokens[:cut], corpus.role_mask[:cut], corpus.vocab_size),
        Corpus(corpus.tokens[cut:], corpus.role_mask[cut:], corpus.vocab_size),
    )


def _batches(rng: np.random.Generator, n: int, batch_size: int):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _ce_step(model: ToyModel, tokens: np.ndarray, learning_rate: float) -> float:
    inputs, targets = tokens[:, :-1], tokens[:, 1:]
    logits, cache = model.forward_with_cache(inputs)
    shifted = logits - logits.max(-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(-1, keepdims=True))
    b, t = targets.shape
    rows = np.arange(b)[:, None], np.arange(t)[None, :]
    loss = float(-logp[rows[0], rows[1], targets].mean())
    dlogits = np.exp(logp)
    dlogits[rows[0], rows[1], targets] -= 1.0
    dlogits /= b * t
    model.sgd_step(model.backward(cache, dlogits), learning_rate)
    return loss


def _train_ce(model: ToyModel, tokens: np.ndarray, *, epochs: int, learning_rate: float,
              batch_size: int, rng: np.random.Generator) -> list[float]:
    losses = []
    for _ in range(epochs):
        for batch in _batches(rng, tokens.shape[0], batch_size):
            loss = _ce_step(model, tokens[batch], learning_rate)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"cross-entropy loss became non-finite at step {len(losses)}")
            losses.append(loss)
    return losses


def train_teacher(model_config: ToyModelConfig, corpus: Corpus, *, epochs: int = 8,
                  learning_rate: float = 0.5, batch_size: int = 16,
                  seed: int | None = None) -> ToyModel:
    """Fit a model to the train split of ``corpus`` by cross-entropy."""
    if model_config.vocab_size != corpus.vocab_size:
        raise ValueError("model and corpus vocab sizes differ")
    train, _ = split_corpus(corpus)
    model = ToyModel(model_config)
    rng = np.random.default_rng([seed if seed is not None else model_config.seed,
                                 _STREAM_TEACHER])
    _train_ce(model, train.tokens, epochs=epochs, learning_rate=learning_rate,
              batch_size=batch_size, rng=rng)
    return model


def evaluate_accuracy(model: ToyModel, corpus: Corpus) -> float:
    """Argmax next-token accuracy over every predictable position."""
    logits = _forward_chunked(model, corpus.tokens[:, :-1])
    predictions = logits.argmax(-1)
    return float((predictions == corpus.tokens[:, 1:]).mean())


def unigram_accuracy(train: Corpus, heldout: Corpus) -> float:
    """Accuracy of always predicting the train corpus's most frequent token."""
    counts = np.bincount(train.tokens.ravel(), minlength=train.vocab_size)
    top = int(counts.argmax())
    return float((heldout.tokens[:, 1:] == top).mean())


def _forward_chunked(model: ToyModel, inputs: np.ndarray, chunk: int = 128) -> np.ndarray:
    parts = [model.forward(inputs[i:i + chunk]) for i in range(0, inputs.shape[0], chunk)]
    return np.concatenate(parts, axis=0)


def model_trace(model: ToyModel, corpus: Corpus) -> LogitsTrace:
    """Flatten a model's next-token logits over a corpus into a trace.

    Position (s, i) predicts token i+1 of sequence s, so the trace's role
    mask is the corpus mask shifted by one: each row is labeled by the role
    of the token being predicted.
    """
    logits = _forward_chunked(model, corpus.tokens[:, :-1])
    m = logits.shape[0] * logits.shape[1]
    return LogitsTrace(values=logits.reshape(m, -1).astype(np.float32),
                       role_mask=corpus.role_mask[:, 1:].reshape(m))


def evaluate_overlap(teacher: ToyModel, student: ToyModel, corpus: Corpus, k: int) -> float:
    return overlap_at_k(model_trace(teacher, corpus), model_trace(student, corpus), k).mean


_POSITION_LOSSES = {
    Method.VANILLA_KL: lambda zt, zs, t, k: vanilla_kl_loss(zt, zs, t, want_gradient=True),
    Method.REVERSE_KL: lambda zt, zs, t, k: reverse_kl_loss(zt, zs, t, want_gradient=True),
    Method.TOPK_KL: lambda zt, zs, t, k: topk_kl_loss(zt, zs, t, k, want_gradient=True),
    Method.TLD: lambda zt, zs, t, k: tld_loss(zt, zs, t, k, want_gradient=True),
    Method.SLD: lambda zt, zs, t, k: sld_loss(zt, zs, t, k, want_gradient=True),
    Method.BILD: lambda zt, zs, t, k: bild_loss(zt, zs, t, k, want_gradient=True),
}


def _distill_step(teacher: ToyModel, student: ToyModel, tokens: np.ndarray,
                  roles: np.ndarray, params: LossParams, k_eff: int | None,
                  learning_rate: float) -> float:
    inputs = tokens[:, :-1]
    teacher_logits = teacher.forward(inputs)
    student_logits, cache = student.forward_with_cache(inputs)
    if not np.all(np.isfinite(student_logits)):
        raise TrainingError("student logits became non-finite")
    response_fn = _POSITION_LOSSES[params.method]
    b, t = inputs.shape
    positions = b * t
    dlogits = np.zeros_like(student_logits)
    total = 0.0
    for i in range(b):
        for j in range(t):
            zt = teacher_logits[i, j]
            zs = student_logits[i, j]
            if roles[i, j + 1]:
                lv = response_fn(zt, zs, params.temperature, k_eff)
            else:
                lv = vanilla_kl_loss(zt, zs, params.temperature, want_gradient=True)
            total += lv.value
            dlogits[i, j] = lv.gradient
    dlogits /= positions
    student.sgd_step(student.backward(cache, dlogits), learning_rate)
    return total / positions


def _sft_student(student_config: ToyModelConfig, config: DistillConfig,
                 train: Corpus) -> ToyModel:
    """The shared SFT checkpoint every distilled student starts from."""
    model = ToyModel(student_config)
    _train_ce(model, train.tokens, epochs=SFT_EPOCHS,
              learning_rate=config.learning_rate, batch_size=config.batch_size,
              rng=np.random.default_rng([config.seed, _STREAM_SFT]))
    return model


def distill_student(teacher: ToyModel, student_config: ToyModelConfig,
                    config: DistillConfig, corpus: Corpus, *,
                    init_student: ToyModel | None = None) -> tuple[ToyModel, TrainLog]:
    """Distill a student from a trained teacher on the corpus's train split.

    The student starts from ``init_student`` when given, otherwise from a
    fresh SFT checkpoint reproducible from the config seed. Response
    positions use the configured method; instruction positions always use
    vanilla KL. k larger than the vocabulary is clamped to it.
    """
    if teacher.config.vocab_size != corpus.vocab_size:
        raise ValueError("teacher and corpus vocab sizes differ")
    if student_config.vocab_size != corpus.vocab_size:
        raise ValueError("student and corpus vocab sizes differ")
    train, heldout = split_corpus(corpus)
    student = init_student.copy() if init_student is not None \
        else _sft_student(student_config, config, train)
    params = config.loss
    k_eff = params.resolved_k
    if k_eff is not None:
        k_eff = min(k_eff, corpus.vocab_size)
    step = config.learning_rate * _DISTILL_STEP_BOOST * params.temperature ** 2
    rng = np.random.default_rng([config.seed, _STREAM_DISTILL])
    step_losses = []
    for _ in range(config.epochs):
        for batch in _batches(rng, train.n_sequences, config.batch_size):
            try:
                loss = _distill_step(teacher, student, train.tokens[batch],
                                     train.role_mask[batch], params, k_eff, step)
            except TrainingError as exc:
                raise TrainingError(f"{exc} at step {len(step_losses)}") from None
            if not np.isfinite(loss):
                raise TrainingError(
                    f"distillation loss became non-finite at step {len(step_losses)}")
            step_losses.append(loss)
    steps_per_epoch = len(step_losses) // config.epochs
    log = TrainLog(
        step_losses=np.asarray(step_losses),
        steps_per_epoch=steps_per_epoch,
        overlap_at_1=evaluate_overlap(teacher, student, heldout, 1),
        overlap_at_8=evaluate_overlap(teacher, student, heldout, min(8, corpus.vocab_size)),
        accuracy=evaluate_accuracy(student, heldout),
    )
    return student, log


def _student_config(config: DistillConfig) -> ToyModelConfig:
    # Student: fewer layers at half width, distinct init stream.
    return ToyModelConfig(vocab_size=config.vocab_size, layers=config.student_layers,
                          hidden_dim=max(1, config.hidden_dim // 2),
                          context_len=config.context_len, seed=config.seed + 1)


def _teacher_config(config: DistillConfig) -> ToyModelConfig:
    return ToyModelConfig(vocab_size=config.vocab_size, layers=config.teacher_layers,
                          hidden_dim=config.hidden_dim, context_len=config.context_len,
                          seed=config.seed)


def run_comparison(methods, config: DistillConfig, *,
                   n_sequences: int = DEFAULT_N_SEQUENCES) -> CompareTable:
    """Train one teacher, then one student per method plus an SFT-only row.

    All distilled students start from the same SFT checkpoint; the SFT row
    reports that checkpoint itself, so each method row shows what its
    distillation epochs add on top of plain fine-tuning. All metrics are
    computed on the shared held-out split (overlaps against the teacher).
    """
    methods = [Method(m) for m in methods]
    if not methods:
        raise ValueError("methods must be non-empty")
    corpus = generate_corpus(config.seed, config.vocab_size, n_sequences,
                             config.context_len, config.instruction_frac)
    train, heldout = split_corpus(corpus)
    teacher = train_teacher(_teacher_config(config), corpus,
                            learning_rate=config.learning_rate,
                            batch_size=config.batch_size, seed=config.seed)
    student_cfg = _student_config(config)

    rows = []
    t0 = time.perf_counter()
    sft = _sft_student(student_cfg, config, train)
    rows.append(CompareRow(
        label="sft",
        accuracy=evaluate_accuracy(sft, heldout),
        overlap_at_1=evaluate_overlap(teacher, sft, heldout, 1),
        overlap_at_8=evaluate_overlap(teacher, sft, heldout, min(8, corpus.vocab_size)),
        first_epoch_loss=None,
        last_epoch_loss=None,
        seconds=time.perf_counter() - t0,
    ))
    for method in methods:
        cfg = replace(config, loss=replace(config.loss, method=method))
        t0 = time.perf_counter()
        _, log = distill_student(teacher, student_cfg, cfg, corpus, init_student=sft)
        epoch_means = log.epoch_means()
        rows.append(CompareRow(
            label=method.value,
            accuracy=log.accuracy,
            overlap_at_1=log.overlap_at_1,
            overlap_at_8=log.overlap_at_8,
            first_epoch_loss=float(epoch_means[0]),
            last_epoch_loss=float(epoch_means[-1]),
            seconds=time.perf_counter() - t0,
        ))
    return CompareTable(rows=rows, teacher_accuracy=evaluate_accuracy(teacher, heldout))


def run_sweep(param: str, values, config: DistillConfig, *,
              n_sequences: int = DEFAULT_N_SEQUENCES) -> SweepTable:
    """Re-distill the same warm student while varying temperature or k.

    A grid value whose run blows up (non-finite loss) is recorded as a row
    with ``diverged=True`` and NaN metrics instead of aborting the sweep, so
    one unstable cell does not discard the rest of the table.
    """
    if param not in ("temperature", "k"):
        raise ValueError(f"param must be 'temperature' or 'k', got {param!r}")
    values = list(values)
    if not values:
        raise ValueError("values must be non-empty")
    corpus = generate_corpus(config.seed, config.vocab_size, n_sequences,
                             config.context_len, config.instruction_frac)
    train, _ = split_corpus(corpus)
    teacher = train_teacher(_teacher_config(config), corpus,
                            learning_rate=config.learning_rate,
                            batch_size=config.batch_size, seed=config.seed)
    student_cfg = _student_config(config)
    sft = _sft_student(student_cfg, config, train)
    rows = []
    for value in values:
        if param == "temperature":
            loss = replace(config.loss, temperature=float(value))
        else:
            loss = replace(config.loss, k=int(value))
        cfg = replace(config, loss=loss)
        try:
            _, log = distill_student(teacher, student_cfg, cfg, corpus, init_student=sft)
        except TrainingError:
            nan = float("nan")
            rows.append(SweepRow(value=float(value), accuracy=nan, overlap_at_1=nan,
                                 overlap_at_8=nan, last_epoch_loss=nan, diverged=True))
            continue
        rows.append(SweepRow(
            value=float(value),
            accuracy=log.accuracy,
            overlap_at_1=log.overlap_at_1,
            overlap_at_8=log.overlap_at_8,
            last_epoch_loss=float(log.epoch_means()[-1]),
        ))
    return SweepTable(param=param, method=config.loss.method.value, rows=rows)
