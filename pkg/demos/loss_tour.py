"""
A tour of the distillation losses on one worked example
========================================================

Six losses over a single teacher/student logit pair, built up from the
primitives they share: deterministic top-k selection, lexicographic pairwise
differences, tempered softmax, and KL divergence. Run from the repo root
after ``pip install -e . --no-build-isolation``:

    python3 demos/loss_tour.py
"""

import numpy as np

from bild import (
    bild_loss,
    pair_order,
    pairwise_differences,
    reverse_kl_loss,
    sld_loss,
    softmax_with_temperature,
    tld_loss,
    top_k_select,
    topk_kl_loss,
    vanilla_kl_loss,
)

# A tiny "vocabulary" of eight tokens. The teacher is confident about token 0;
# the student agrees on the top token but ranks the runners-up differently.
teacher = np.array([4.0, 2.5, 2.0, 0.5, 0.0, -1.0, -3.0, -6.0])
student = np.array([3.5, 1.0, 2.8, 1.5, 0.2, -0.5, -2.0, -7.0])
T, K = 2.0, 4

print("teacher logits:", teacher)
print("student logits:", student)
print(f"temperature T = {T}, top-k = {K}")

# --- step 1: top-k selection -------------------------------------------------
# Selection is deterministic: logits sort descending, ties break toward the
# smaller index. The teacher's top-k drives the t-LD term, the student's
# drives the s-LD term.
t_sel = top_k_select(teacher, K)
s_sel = top_k_select(student, K)
print("\nteacher top-k indices:", t_sel.indices, "values:", t_sel.values)
print("student top-k indices:", s_sel.indices, "values:", s_sel.values)

# --- step 2: pairwise differences --------------------------------------------
# k logits give k*(k-1)/2 ordered differences z[m] - z[n] for m < n, in
# lexicographic pair order. These differences are what get softmaxed, which
# is why every loss below is invariant to adding a constant to all logits.
print("\npair order for k = 3:", pair_order(3))
print("teacher pairwise diffs (its own top-k):", pairwise_differences(t_sel.values))

# The induced distribution over pairs, tempered:
probs = softmax_with_temperature(pairwise_differences(t_sel.values), T)
print("teacher pair distribution:", np.round(probs, 4))

# --- step 3: the six losses ---------------------------------------------------
# vanilla_kl – KL(teacher || student) over the full vocabulary
# reverse_kl – KL(student || teacher) over the full vocabulary
# topk_kl    – KL over the teacher's top-k slice only
# tld        – KL between pair distributions at the *teacher's* top-k
# sld        – KL between pair distributions at the *student's* top-k
# bild       – tld + sld
# The teacher-derived distribution is always the KL reference.
rows = [
    ("vanilla_kl", vanilla_kl_loss(teacher, student, T)),
    ("reverse_kl", reverse_kl_loss(teacher, student, T)),
    ("topk_kl", topk_kl_loss(teacher, student, T, K)),
    ("tld", tld_loss(teacher, student, T, K)),
    ("sld", sld_loss(teacher, student, T, K)),
    ("bild", bild_loss(teacher, student, T, K)),
]
print("\nloss values:")
for name, lv in rows:
    print(f"  {name:<10} {lv.value:.6f}")

tld = tld_loss(teacher, student, T, K)
sld = sld_loss(teacher, student, T, K)
bild = bild_loss(teacher, student, T, K)
print(f"\nbild == tld + sld: {bild.value:.6f} == {tld.value:.6f} + {sld.value:.6f}")

# --- gradients ------------------------------------------------------------
# Every loss can return d(loss)/d(student logits). Note the BiLD gradient
# is zero outside the union of the two top-k index sets.
grad = bild_loss(teacher, student, T, K, want_gradient=True).gradient
print("\nbild gradient w.r.t. student logits:", np.round(grad, 4))
print("nonzero entries:", np.flatnonzero(grad != 0.0))

# --- degenerate k --------------------------------------------------------
# One logit has no pairs and two logits give a single difference, whose
# softmax is the constant [1.0]; either way the pair KL is identically zero.
for k in (1, 2):
    lv = bild_loss(teacher, student, T, k)
    print(f"\nk = {k}: bild = {lv.value} (degenerate = {lv.degenerate})")

# --- invariances ----------------------------------------------------------
# Shifting either side by a constant changes nothing: softmax of logits and
# pairwise differences both cancel a common offset.
shifted = bild_loss(teacher + 500.0, student - 250.0, T, K)
print(f"\nbild after shifting teacher +500, student -250: {shifted.value:.6f}")

# With k equal to the full vocabulary, the top-k KL degenerates to vanilla KL.
full = topk_kl_loss(teacher, student, T, teacher.size)
vanilla = vanilla_kl_loss(teacher, student, T)
print(f"topk_kl at k = vocab: {full.value:.15f}")
print(f"vanilla_kl:           {vanilla.value:.15f}")
