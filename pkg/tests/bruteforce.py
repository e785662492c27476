"""Straight-line reference implementations used as oracles in tests.

Everything here is written in plain Python floats off the definitions, with
no shortcuts, no log-domain tricks, and no shared code with the library.
Top-k uses explicit sorting with index tiebreaks; softmax divides raw
exponentials; KL sums p*log(p/q) termwise. Deliberately slow and boring.
"""

import math


def softmax(xs, temperature):
    scaled = [x / temperature for x in xs]
    m = max(scaled)
    exps = [math.exp(s - m) for s in scaled]
    total = sum(exps)
    return [e / total for e in exps]


def kl(ps, qs):
    total = 0.0
    for p, q in zip(ps, qs):
        if p > 0.0:
            total += p * math.log(p / q)
    return total


def top_k_indices(xs, k):
    order = sorted(range(len(xs)), key=lambda i: (-xs[i], i))
    return order[:k]


def pairwise_diffs(vals):
    out = []
    for m in range(len(vals)):
        for n in range(m + 1, len(vals)):
            out.append(vals[m] - vals[n])
    return out


def vanilla_kl(zt, zs, temperature):
    return kl(softmax(zt, temperature), softmax(zs, temperature))


def reverse_kl(zt, zs, temperature):
    return kl(softmax(zs, temperature), softmax(zt, temperature))


def topk_kl(zt, zs, temperature, k):
    idx = top_k_indices(zt, k)
    a = [zt[i] for i in idx]
    b = [zs[i] for i in idx]
    return kl(softmax(a, temperature), softmax(b, temperature))


def tld(zt, zs, temperature, k):
    if k <= 2:
        return 0.0
    idx = top_k_indices(zt, k)
    dt = pairwise_diffs([zt[i] for i in idx])
    ds = pairwise_diffs([zs[i] for i in idx])
    return kl(softmax(dt, temperature), softmax(ds, temperature))


def sld(zt, zs, temperature, k):
    if k <= 2:
        return 0.0
    idx = top_k_indices(zs, k)
    dt = pairwise_diffs([zt[i] for i in idx])
    ds = pairwise_diffs([zs[i] for i in idx])
    # Teacher's difference distribution stays in the reference slot even
    # though the student chose the indices.
    return kl(softmax(dt, temperature), softmax(ds, temperature))


def bild(zt, zs, temperature, k):
    return tld(zt, zs, temperature, k) + sld(zt, zs, temperature, k)


def kurtosis(xs):
    n = len(xs)
    mean = sum(xs) / n
    m2 = sum((x - mean) ** 2 for x in xs) / n
    m4 = sum((x - mean) ** 4 for x in xs) / n
    return m4 / (m2 * m2)


def topk_mass(xs, k):
    probs = softmax(xs, 1.0)
    return 100.0 * sum(probs[i] for i in top_k_indices(xs, k))


def overlap(zt_rows, zs_rows, mask, k):
    fracs = []
    for zt, zs, keep in zip(zt_rows, zs_rows, mask):
        if keep:
            a = set(top_k_indices(zt, k))
            b = set(top_k_indices(zs, k))
            fracs.append(len(a & b) / k)
    return sum(fracs) / len(fracs)
