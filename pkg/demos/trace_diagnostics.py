"""
Dumping logits traces and reading the concentration diagnostics
===============================================================

Trains a small teacher on the synthetic corpus, flattens its next-token
logits into a trace, round-trips the trace through the binary dump format,
and then looks at how training concentrates probability mass: kurtosis and
top-k mass both rise sharply once the model has learned the suffix rule.

    python3 demos/trace_diagnostics.py
"""

import tempfile
from pathlib import Path

import numpy as np

from bild import kurtosis, overlap_at_k, read_dump, tail_stats, topk_mass, write_dump
from bild.harness import ToyModel, ToyModelConfig, generate_corpus, model_trace, train_teacher

VOCAB = 64
corpus = generate_corpus(seed=0, vocab_size=VOCAB, n_sequences=64, context_len=32)
config = ToyModelConfig(vocab_size=VOCAB, layers=2, hidden_dim=32, context_len=32)

print(f"corpus: {corpus.n_sequences} sequences, vocab {corpus.vocab_size}, "
      f"context {corpus.context_len}")

# An untrained model next to a well-trained one, over the same corpus.
fresh = ToyModel(config)
teacher = train_teacher(config, corpus, epochs=96, seed=0)
fresh_trace = model_trace(fresh, corpus)
teacher_trace = model_trace(teacher, corpus)
n_rows = teacher_trace.values.shape[0]
print(f"trace: {n_rows} positions x {VOCAB} logits "
      f"({int(teacher_trace.role_mask.sum())} response positions)")

# --- binary round trip ------------------------------------------------------
# Dumps are float32 rows plus a per-position response mask; reading one back
# reproduces the written trace bit for bit.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "teacher.lgts"
    write_dump(teacher_trace, path)
    again = read_dump(path)
    print(f"\ndump size: {path.stat().st_size} bytes")
    print("round trip bitwise equal:",
          np.array_equal(teacher_trace.values, again.values)
          and np.array_equal(teacher_trace.role_mask, again.role_mask))

# --- concentration diagnostics ----------------------------------------------
# topk_mass is the share of softmax probability on the k largest logits,
# averaged here over response positions. Learning the suffix rule pushes
# nearly all the mass into a few tokens out of 64.
response = teacher_trace.role_mask.astype(bool)


def mean_mass(trace, k):
    return float(np.mean([topk_mass(row, k) for row in trace.values[response]]))


print("\n                 mass@1     mass@8")
for label, trace in (("untrained", fresh_trace), ("trained", teacher_trace)):
    print(f"  {label:<12}  {mean_mass(trace, 1):>8.2f}%  {mean_mass(trace, 8):>8.2f}%")

# Per-position view of one response row, at several k:
row = teacher_trace.values[response][0]
stats = tail_stats(row, ks=(1, 8, 16, 64))
print("\none response position:", {k: round(v, 2) for k, v in stats.topk_mass.items()},
      f"kurtosis {stats.kurtosis:.2f}")

# Kurtosis measures outliers in the *raw logits*, not in the softmax: this
# toy teacher concentrates mass through modest logit gaps, so its kurtosis
# stays near the gaussian value of 3. A genuinely spiky vector is different:
spike = np.zeros(VOCAB)
spike[13] = 10.0
trained_kurt = float(np.mean([kurtosis(r) for r in teacher_trace.values[response]]))
print(f"\nmean kurtosis of trained logits: {trained_kurt:.2f}")
print(f"kurtosis of one spike among {VOCAB} flat logits: {kurtosis(spike):.2f}")

# --- overlap between two traces ----------------------------------------------
# overlap@k is the fraction of top-k tokens two traces share, averaged over
# response positions — the agreement metric the distillation harness reports.
for k in (1, 8):
    report = overlap_at_k(teacher_trace, fresh_trace, k)
    print(f"\noverlap@{k} teacher vs untrained: {report.mean:.4f} "
          f"({len(report.per_position)} positions)")
print("overlap@8 teacher vs itself:  ",
      overlap_at_k(teacher_trace, teacher_trace, 8).mean)
