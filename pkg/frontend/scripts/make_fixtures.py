"""Generate the frozen parity fixtures for the binding tests.

Every fixture's logits are float32-representable, so the values the bindings
ship through the 32-bit dump format are bit-identical to the values the
native library computed on here. Expected outputs are serialized with full
round-trip precision. Regenerate with:

    python3 scripts/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from bild import (
    LogitsTrace,
    LossParams,
    Method,
    bild_loss,
    kurtosis,
    overlap_at_k,
    sequence_loss,
    topk_mass,
)

SEED = 20240815
N_PER_OP = 20
OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures.json"


def f32_logits(rng, *shape, scale=3.0):
    """Random logits rounded to float32 so the dump transport is lossless."""
    z = rng.standard_normal(shape) * scale
    return np.asarray(z, dtype=np.float32).astype(np.float64)


def floats(a):
    return [float(x) for x in np.asarray(a).ravel()]


def matrix(a):
    return [[float(x) for x in row] for row in np.asarray(a)]


def bild_fixtures(rng):
    out = []
    # The worked single-pair example, plus an identical-buffers zero.
    named = [
        ([2.0, 1.0, 0.0, -5.0], [0.0, 1.0, 2.0, -5.0], 1.0, 3),
        ([1.5, -0.5, 3.0, 0.25], [1.5, -0.5, 3.0, 0.25], 2.0, 3),
    ]
    for zt, zs, t, k in named:
        out.append((np.array(zt), np.array(zs), t, k))
    while len(out) < N_PER_OP:
        n = int(rng.integers(4, 33))
        k = int(rng.integers(1, min(n, 8) + 1))  # includes degenerate k in {1, 2}
        t = round(float(rng.uniform(0.5, 5.0)), 2)
        out.append((f32_logits(rng, n), f32_logits(rng, n), t, k))
    fixtures = []
    for zt, zs, t, k in out:
        lv = bild_loss(zt, zs, t, k, want_gradient=True)
        fixtures.append({
            "zt": floats(zt), "zs": floats(zs), "temperature": t, "k": k,
            "value": lv.value, "degenerate": lv.degenerate,
            "gradient": floats(lv.gradient),
        })
    return fixtures


def sequence_fixtures(rng):
    methods = [m.value for m in Method]
    fixtures = []
    for i in range(N_PER_OP):
        m = int(rng.integers(2, 6))
        n = int(rng.integers(6, 17))
        method = Method(methods[i % len(methods)])
        t = round(float(rng.uniform(0.5, 4.0)), 2)
        k = None if method in (Method.VANILLA_KL, Method.REVERSE_KL) \
            else int(rng.integers(1, n + 1))
        mask = (rng.random(m) < 0.6).astype(np.uint8)
        teacher = LogitsTrace(values=f32_logits(rng, m, n), role_mask=mask)
        student = LogitsTrace(values=f32_logits(rng, m, n), role_mask=mask)
        kwargs = {"method": method, "temperature": t}
        if k is not None:
            kwargs["k"] = k
        result = sequence_loss(teacher, student, LossParams(**kwargs), want_gradient=True)
        fixtures.append({
            "teacher": matrix(teacher.values), "student": matrix(student.values),
            "mask": [int(b) for b in mask],
            "method": method.value, "temperature": t, "k": k,
            "mean": result.mean, "per_position": floats(result.per_position),
            "gradient": matrix(result.gradient),
        })
    return fixtures


def overlap_fixtures(rng):
    fixtures = []
    for i in range(N_PER_OP):
        m = int(rng.integers(2, 7))
        n = int(rng.integers(8, 33))
        k = int(rng.integers(1, n + 1))
        mask = (rng.random(m) < 0.7).astype(np.uint8)
        mask[int(rng.integers(0, m))] = 1  # overlap needs a response position
        tv = f32_logits(rng, m, n)
        # Student shares the teacher's logits on some rows so overlap varies.
        sv = np.where(rng.random((m, 1)) < 0.5, tv, f32_logits(rng, m, n))
        if i == 0:
            sv = tv.copy()  # identical traces: overlap must be exactly 1.0
        teacher = LogitsTrace(values=tv, role_mask=mask)
        student = LogitsTrace(values=np.asarray(sv, dtype=np.float32), role_mask=mask)
        report = overlap_at_k(teacher, student, k)
        fixtures.append({
            "teacher": matrix(teacher.values), "student": matrix(student.values),
            "mask": [int(b) for b in mask], "k": k,
            "mean": report.mean, "per_position": floats(report.per_position),
        })
    return fixtures


def kurtosis_fixtures(rng):
    one_hot = np.zeros(1000)
    one_hot[123] = 1.0
    rows = [one_hot]
    while len(rows) < N_PER_OP:
        rows.append(f32_logits(rng, int(rng.integers(4, 65))))
    return [{"z": floats(z), "value": kurtosis(z)} for z in rows]


def topk_mass_fixtures(rng):
    fixtures = []
    for _ in range(N_PER_OP):
        n = int(rng.integers(4, 65))
        k = int(rng.integers(1, n + 1))
        z = f32_logits(rng, n)
        fixtures.append({"z": floats(z), "k": k, "value": topk_mass(z, k)})
    return fixtures


def main():
    rng = np.random.default_rng(SEED)
    payload = {
        "seed": SEED,
        "bild_loss": bild_fixtures(rng),
        "sequence_loss": sequence_fixtures(rng),
        "overlap": overlap_fixtures(rng),
        "kurtosis": kurtosis_fixtures(rng),
        "topk_mass": topk_mass_fixtures(rng),
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(payload, indent=1) + "\n")
    counts = {op: len(v) for op, v in payload.items() if isinstance(v, list)}
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes): {counts}")


if __name__ == "__main__":
    main()
