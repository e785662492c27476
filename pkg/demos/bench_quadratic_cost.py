"""
Measuring the quadratic cost of the pair losses
===============================================

The pair losses build all k*(k-1)/2 pairwise differences of the selected
logits, so their cost grows roughly quadratically in k while the plain KL
losses are flat in k. This script times the losses across a k grid and fits
log-log slopes:

    python3 demos/bench_quadratic_cost.py
"""

from bild import Method
from bild.harness import bench_losses, fit_power_law, time_pairwise_construction

K_VALUES = (8, 16, 32, 64, 128)

# --- the primitive itself ------------------------------------------------------
# Timing just the pairwise-difference construction isolates the quadratic
# term from softmax/KL overhead.
per_k = time_pairwise_construction(K_VALUES, repeats=50)
print("pairwise-difference construction:")
print(f"{'k':>6} {'microseconds':>14}")
for k, seconds in per_k.items():
    print(f"{k:>6} {seconds * 1e6:>14.1f}")
print(f"fitted exponent: {fit_power_law(list(per_k), list(per_k.values())):.2f}")

# --- full losses ----------------------------------------------------------------
# The same grid through the public loss functions (value + gradient) over
# 128-token vocabularies. The pair losses inherit the quadratic growth;
# vanilla KL ignores k entirely.
result = bench_losses(sizes=(128,), k_values=K_VALUES,
                      methods=(Method.VANILLA_KL, Method.TLD, Method.BILD),
                      repeats=20)

print("\nper-call seconds, vocab 128:")
header = "".join(f"{f'k={k}':>12}" for k in result.k_values)
print(f"{'method':<12}{header}")
for method in result.methods:
    cells = "".join(f"{result.seconds[(method, 128, k)] * 1e6:>11.1f}u"
                    for k in result.k_values)
    print(f"{method:<12}{cells}")

print("\nfitted k exponents (log-log slope):")
for method, exponent in result.exponents.items():
    note = "flat in k" if exponent < 0.5 else "roughly quadratic in k"
    print(f"  {method:<12} {exponent:>5.2f}  ({note})")
