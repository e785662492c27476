"""
Distilling a toy transformer: method comparison and a k sweep
=============================================================

Trains a 2-layer teacher on the synthetic instruction corpus, fine-tunes a
half-width student, then re-distills that same student once per method and
reports teacher agreement (overlap@k on held-out data). Runs at a reduced
scale; the comparison takes about half a minute and the closing k sweep
another minute:

    python3 demos/distillation_comparison.py

The calibrated full-scale table (epochs = 32, 512 sequences) is what the
command-line tool reproduces:

    bild compare --methods vanilla_kl,reverse_kl,topk_kl,tld,sld,bild
"""

from dataclasses import replace

from bild import DistillConfig, Method
from bild.harness import run_comparison, run_sweep

# Reduced scale: half the default epochs and half the default corpus.
config = replace(DistillConfig(), epochs=16)
N_SEQUENCES = 256

print("distilling with every method (about half a minute)...")
table = run_comparison(
    [Method.VANILLA_KL, Method.REVERSE_KL, Method.TOPK_KL,
     Method.TLD, Method.SLD, Method.BILD],
    config, n_sequences=N_SEQUENCES)

# Every distilled row starts from the same fine-tuned checkpoint, so the
# "sft" row is the shared baseline: overlap gains below are what the extra
# distillation epochs buy over plain fine-tuning.
print(f"\nteacher accuracy: {table.teacher_accuracy:.4f}")
print(f"{'method':<12} {'acc':>8} {'ov@1':>8} {'ov@8':>8} {'seconds':>8}")
for r in table.rows:
    print(f"{r.label:<12} {r.accuracy:>8.4f} {r.overlap_at_1:>8.4f} "
          f"{r.overlap_at_8:>8.4f} {r.seconds:>8.1f}")

sft = table.row("sft")
print("\noverlap@1 gain over the fine-tuned baseline:")
for r in table.rows[1:]:
    print(f"  {r.label:<12} {r.overlap_at_1 - sft.overlap_at_1:+.4f}")

# --- sweeping k ---------------------------------------------------------------
# Same protocol, varying only the top-k of the pair losses. k = 2 is the
# degenerate case — a single pairwise difference carries no information, so
# response positions contribute zero loss and only the instruction positions
# (always vanilla KL) still train.
print("\nsweeping k for bild (three more runs, the slow part)...")
sweep = run_sweep("k", [2, 8, 32], config, n_sequences=N_SEQUENCES)
print(f"{'k':<6} {'acc':>8} {'ov@1':>8} {'ov@8':>8} {'last-epoch loss':>16}")
for r in sweep.rows:
    print(f"{r.value:<6g} {r.accuracy:>8.4f} {r.overlap_at_1:>8.4f} "
          f"{r.overlap_at_8:>8.4f} {r.last_epoch_loss:>16.4f}")
