"""Property-based tests: invariants that must hold on arbitrary inputs."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bild import (
    DistillConfig,
    LogitsTrace,
    LossParams,
    Method,
    bild_loss,
    kurtosis,
    pairwise_differences,
    parse_config,
    read_dump,
    reverse_kl_loss,
    sld_loss,
    softmax_with_temperature,
    tld_loss,
    top_k_select,
    topk_kl_loss,
    topk_mass,
    vanilla_kl_loss,
    write_dump,
)

import bruteforce

settings.register_profile("suite", max_examples=50, deadline=None)
settings.load_profile("suite")

# Bounded, well-separated-from-overflow logits.
logit = st.floats(min_value=-50.0, max_value=50.0,
                  allow_nan=False, allow_infinity=False)
logits_list = st.lists(logit, min_size=1, max_size=12)
# Integer-valued logits on a tiny grid force ties constantly.
tied_logits = st.lists(st.integers(min_value=-3, max_value=3).map(float),
                       min_size=1, max_size=10)
temperature = st.floats(min_value=0.25, max_value=10.0,
                        allow_nan=False, allow_infinity=False)

LOSSES = {
    Method.VANILLA_KL: lambda zt, zs, t, k: vanilla_kl_loss(zt, zs, t),
    Method.REVERSE_KL: lambda zt, zs, t, k: reverse_kl_loss(zt, zs, t),
    Method.TOPK_KL: topk_kl_loss,
    Method.TLD: tld_loss,
    Method.SLD: sld_loss,
    Method.BILD: bild_loss,
}
ORACLES = {
    Method.VANILLA_KL: lambda zt, zs, t, k: bruteforce.vanilla_kl(zt, zs, t),
    Method.REVERSE_KL: lambda zt, zs, t, k: bruteforce.reverse_kl(zt, zs, t),
    Method.TOPK_KL: bruteforce.topk_kl,
    Method.TLD: bruteforce.tld,
    Method.SLD: bruteforce.sld,
    Method.BILD: bruteforce.bild,
}


@st.composite
def logit_pairs(draw, tied=False):
    """Two same-length logit vectors plus a valid k."""
    base = tied_logits if tied else logits_list
    zt = draw(base)
    n = len(zt)
    zs = draw(st.lists(st.integers(-3, 3).map(float) if tied else logit,
                       min_size=n, max_size=n))
    k = draw(st.integers(min_value=1, max_value=n))
    return zt, zs, k


class TestSoftmaxProperties:
    @given(z=logits_list, t=temperature)
    def test_lies_on_the_simplex(self, z, t):
        p = softmax_with_temperature(z, t)
        assert np.all(p >= 0.0)
        assert abs(p.sum() - 1.0) < 1e-12

    @given(z=logits_list, t=temperature, shift=st.floats(-100.0, 100.0))
    def test_shift_invariance(self, z, t, shift):
        a = softmax_with_temperature(z, t)
        b = softmax_with_temperature(np.asarray(z) + shift, t)
        assert np.max(np.abs(a - b)) < 1e-12


class TestTopKProperties:
    @given(pair=logit_pairs(tied=True))
    def test_matches_bruteforce_under_ties(self, pair):
        z, _, k = pair
        selected = top_k_select(z, k)
        assert selected.indices.tolist() == bruteforce.top_k_indices(z, k)
        assert selected.values.tolist() == [z[i] for i in selected.indices]

    @given(pair=logit_pairs())
    def test_values_are_sorted_and_indices_unique(self, pair):
        z, _, k = pair
        selected = top_k_select(z, k)
        assert len(set(selected.indices.tolist())) == k
        values = selected.values
        assert np.all(values[:-1] >= values[1:])


class TestPairwiseProperties:
    @given(v=logits_list)
    def test_matches_bruteforce(self, v):
        got = pairwise_differences(v)
        assert got.tolist() == pytest.approx(bruteforce.pairwise_diffs(v), abs=1e-12)

    @given(v=st.lists(st.integers(-1000, 1000).map(lambda i: float(i) / 16),
                      min_size=2, max_size=8),
           shift=st.integers(-1000, 1000).map(lambda i: float(i) / 16))
    def test_shift_cancels_exactly(self, v, shift):
        # Sixteenths are dyadic, so the subtraction is exact in binary.
        base = pairwise_differences(v)
        shifted = pairwise_differences(np.asarray(v) + shift)
        assert np.array_equal(base, shifted)


class TestLossProperties:
    @given(pair=logit_pairs(), t=temperature, method=st.sampled_from(list(Method)))
    def test_matches_bruteforce(self, pair, t, method):
        zt, zs, k = pair
        got = LOSSES[method](zt, zs, t, k).value
        want = ORACLES[method](zt, zs, t, k)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-10)

    @given(pair=logit_pairs(), t=temperature, method=st.sampled_from(list(Method)))
    def test_non_negative(self, pair, t, method):
        zt, zs, k = pair
        assert LOSSES[method](zt, zs, t, k).value >= -1e-12

    @given(z=logits_list, t=temperature, method=st.sampled_from(list(Method)))
    def test_self_distillation_is_zero(self, z, t, method):
        k = max(1, len(z) // 2)
        assert LOSSES[method](z, z, t, k).value < 1e-12

    @given(data=st.data(), t=temperature, method=st.sampled_from(list(Method)),
           shift=st.integers(-1600, 1600).map(lambda i: i / 16))
    def test_shift_invariance(self, data, t, method, shift):
        # Sixteenth-grid logits and shifts add exactly in binary, so the
        # shift cannot perturb the top-k selection through rounding.
        sixteenth = st.integers(-160, 160).map(lambda i: i / 16)
        zt = data.draw(st.lists(sixteenth, min_size=1, max_size=10))
        zs = data.draw(st.lists(sixteenth, min_size=len(zt), max_size=len(zt)))
        k = data.draw(st.integers(1, len(zt)))
        base = LOSSES[method](zt, zs, t, k).value
        moved = LOSSES[method](np.asarray(zt) + shift, np.asarray(zs) - shift,
                               t, k).value
        assert abs(base - moved) < 1e-9

    @given(pair=logit_pairs(), t=temperature)
    def test_reverse_is_swapped_vanilla(self, pair, t):
        zt, zs, _ = pair
        assert reverse_kl_loss(zt, zs, t).value == vanilla_kl_loss(zs, zt, t).value

    @given(pair=logit_pairs(), t=temperature)
    def test_topk_at_full_vocab_is_vanilla(self, pair, t):
        zt, zs, _ = pair
        full = topk_kl_loss(zt, zs, t, len(zt)).value
        assert abs(full - vanilla_kl_loss(zt, zs, t).value) < 1e-12

    @given(pair=logit_pairs(), t=temperature)
    def test_bild_is_tld_plus_sld(self, pair, t):
        zt, zs, k = pair
        total = bild_loss(zt, zs, t, k).value
        assert total == tld_loss(zt, zs, t, k).value + sld_loss(zt, zs, t, k).value


class TestMetricProperties:
    @given(z=st.lists(logit, min_size=2, max_size=20))
    def test_kurtosis_at_least_one(self, z):
        arr = np.asarray(z)
        assume(np.ptp(arr) > 1e-6)
        assert kurtosis(arr) >= 1.0 - 1e-12

    @given(z=st.lists(logit, min_size=2, max_size=20),
           scale=st.floats(0.5, 4.0), shift=st.floats(-10.0, 10.0))
    def test_kurtosis_affine_invariant(self, z, scale, shift):
        arr = np.asarray(z)
        assume(np.ptp(arr) > 1e-3)
        base = kurtosis(arr)
        moved = kurtosis(scale * arr + shift)
        assert moved == pytest.approx(base, rel=1e-6)

    @given(z=logits_list)
    def test_topk_mass_monotone_in_k(self, z):
        masses = [topk_mass(z, k) for k in range(1, len(z) + 1)]
        assert all(a <= b + 1e-12 for a, b in zip(masses, masses[1:]))
        assert masses[-1] == pytest.approx(100.0, abs=1e-9)


finite_f32 = st.floats(allow_nan=False, allow_infinity=False, width=32)


@pytest.fixture(scope="module")
def scratch_dir(tmp_path_factory):
    # Module-scoped on purpose: hypothesis reuses it across examples, and the
    # tests overwrite one file per example rather than accumulating files.
    return tmp_path_factory.mktemp("properties")


class TestTraceRoundTrip:
    @given(rows=st.integers(1, 5), cols=st.integers(1, 6), data=st.data())
    def test_bitwise_round_trip(self, scratch_dir, rows, cols, data):
        flat = data.draw(st.lists(finite_f32, min_size=rows * cols,
                                  max_size=rows * cols))
        mask = data.draw(st.lists(st.integers(0, 1), min_size=rows, max_size=rows))
        trace = LogitsTrace(
            values=np.asarray(flat, dtype=np.float32).reshape(rows, cols),
            role_mask=np.asarray(mask, dtype=np.uint8))
        path = scratch_dir / "roundtrip.lgts"
        write_dump(trace, path)
        back = read_dump(path)
        assert back == trace
        assert back.values.tobytes() == trace.values.tobytes()


config_floats = st.floats(min_value=0.01, max_value=100.0,
                          allow_nan=False, allow_infinity=False)


class TestConfigRoundTrip:
    @given(method=st.sampled_from(list(Method)),
           temperature=config_floats,
           k=st.integers(1, 4096),
           epochs=st.integers(1, 100),
           batch_size=st.integers(1, 256),
           learning_rate=config_floats,
           instruction_frac=st.floats(0.0, 0.99),
           seed=st.integers(0, 2 ** 31 - 1),
           vocab_size=st.integers(4, 4096),
           context_len=st.integers(2, 512))
    def test_write_then_parse_recovers_values(self, scratch_dir, method, temperature,
                                              k, epochs, batch_size, learning_rate,
                                              instruction_frac, seed, vocab_size,
                                              context_len):
        expected = DistillConfig(
            loss=LossParams(method=method, temperature=temperature, k=k),
            epochs=epochs, batch_size=batch_size, learning_rate=learning_rate,
            instruction_frac=instruction_frac, seed=seed, vocab_size=vocab_size,
            context_len=context_len)
        path = scratch_dir / "round.cfg"
        path.write_text(
            f"method = {method.value}\n"
            f"temperature = {temperature!r}\n"
            f"k = {k}\n"
            f"epochs = {epochs}\n"
            f"batch_size = {batch_size}\n"
            f"learning_rate = {learning_rate!r}\n"
            f"instruction_frac = {instruction_frac!r}\n"
            f"seed = {seed}\n"
            f"vocab_size = {vocab_size}\n"
            f"context_len = {context_len}\n")
        parsed = parse_config(path)
        assert parsed == expected
        if method in (Method.VANILLA_KL, Method.REVERSE_KL):
            # The dense KLs carry the parsed k but never resolve one.
            assert parsed.loss.resolved_k is None
