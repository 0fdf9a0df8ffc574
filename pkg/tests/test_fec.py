import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fecsim.fec import (FecBlock, ProtectionDecision, RsParams, Unrecoverable, build_ffblocks, gf_invert,
                        gf_matmul, gf_mul, recovery_rate, rs_decode, rs_encode)


# independent field arithmetic: shift-and-add multiply, Lagrange interpolation
def slow_mul(a, b):
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11D
        b >>= 1
    return out


def slow_inv(a):
    for x in range(1, 256):
        if slow_mul(a, x) == 1:
            return x
    raise ZeroDivisionError


def lagrange_eval(xs, ys, x):
    total = 0
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if j != i:
                num = slow_mul(num, x ^ xj)
                den = slow_mul(den, xi ^ xj)
        total ^= slow_mul(yi, slow_mul(num, slow_inv(den)))
    return total


def shards(rng, k, length=6):
    return [rng.integers(0, 256, length, dtype=np.uint8).tobytes() for _ in range(k)]


def test_field_mul_matches_slow_reference():
    for a in range(0, 256, 7):
        for b in range(256):
            assert gf_mul(a, b) == slow_mul(a, b)


def test_invert_roundtrip(rng):
    m = rng.integers(0, 256, (5, 5), dtype=np.uint8)
    m[np.diag_indices(5)] |= 1
    try:
        inv = gf_invert(m)
    except ValueError:
        pytest.skip("random matrix singular")
    assert np.array_equal(gf_matmul(m, inv), np.eye(5, dtype=np.uint8))


def test_singular_matrix_rejected():
    with pytest.raises(ValueError):
        gf_invert(np.array([[1, 2], [1, 2]], dtype=np.uint8))


def test_parity_matches_interpolation_oracle(rng):
    k, h = 5, 3
    src = shards(rng, k, 4)
    out = rs_encode(src, h)
    for col in range(4):
        ys = [s[col] for s in src]
        for p in range(h):
            assert out[k + p][col] == lagrange_eval(list(range(k)), ys, k + p)


def test_h_zero_is_identity(rng):
    src = shards(rng, 4)
    assert rs_encode(src, 0) == src


def test_systematic_prefix(rng):
    src = shards(rng, 7)
    assert rs_encode(src, 3)[:7] == src


def test_all_two_erasures_k4_h2(rng):
    src = shards(rng, 4)
    enc = rs_encode(src, 2)
    block = FecBlock(RsParams(6, 4), tuple(enc))
    patterns = list(itertools.combinations(range(6), 2))
    assert len(patterns) == 15
    for pat in patterns:
        assert rs_decode(block.erase(pat)) == src


def test_exactly_n_minus_h_recovers(rng):
    src = shards(rng, 8)
    block = FecBlock(RsParams(10, 8), tuple(rs_encode(src, 2)))
    assert rs_decode(block.erase([0, 5])) == src


def test_three_erasures_unrecoverable(rng):
    block = FecBlock(RsParams(6, 4), tuple(rs_encode(shards(rng, 4), 2)))
    with pytest.raises(Unrecoverable) as exc:
        rs_decode(block.erase([0, 1, 2]))
    assert exc.value.present == 3 and exc.value.k == 4


def test_erasing_parity_only(rng):
    src = shards(rng, 4)
    block = FecBlock(RsParams(7, 4), tuple(rs_encode(src, 3)))
    assert rs_decode(block.erase([4, 5, 6])) == src
    assert rs_decode(block) == src


def test_shard_length_mismatch():
    with pytest.raises(ValueError):
        rs_encode([b"abc", b"ab"], 1)


def test_too_many_shards():
    with pytest.raises(ValueError):
        rs_encode([b"x"] * 250, 10)


def test_packets_roundtrip(rng):
    src = shards(rng, 3)
    block = FecBlock(RsParams(5, 3), tuple(rs_encode(src, 2))).erase([1])
    back = FecBlock.from_packets(block.params, block.to_packets())
    assert back.shards == block.shards
    assert rs_decode(back) == src


def test_block_validation():
    with pytest.raises(ValueError):
        FecBlock(RsParams(3, 2), (b"a", b"b"))
    with pytest.raises(ValueError):
        FecBlock(RsParams(2, 1), (b"a", b"bb"))


def test_rs_params():
    assert RsParams.from_kh(8, 2) == RsParams(10, 8)
    for bad in [(0, 0), (5, 6), (256, 10)]:
        with pytest.raises(ValueError):
            RsParams(*bad)


@pytest.mark.parametrize("n,h,expected", [(10, 2, 0.2), (10, 0, 0.0), (6, 2, 1 / 3)])
def test_recovery_rate(n, h, expected):
    assert recovery_rate(RsParams(n, n - h)) == pytest.approx(expected, abs=1e-15)


def test_ffblocks_examples():
    blocks = build_ffblocks(23, 10, 0.2)
    assert [b.k for b in blocks] == [10, 10, 3]
    assert [b.h for b in blocks] == [2, 2, 1]
    assert all(b.h == 0 for b in build_ffblocks(37, 10, 0.0))
    assert build_ffblocks(10, 10, 0.38) == [RsParams(14, 10)]


def test_ffblocks_float_product_does_not_tip_ceiling():
    # 0.3 * 10 evaluates to 3.0000000000000004
    assert build_ffblocks(10, 10, 0.3)[0].h == 3


def test_ffblocks_nearest():
    assert build_ffblocks(10, 10, 0.38, rounding="nearest")[0].h == 4
    assert build_ffblocks(10, 10, 0.34, rounding="nearest")[0].h == 3
    assert build_ffblocks(10, 10, 0.35, rounding="nearest")[0].h == 4


def test_ffblocks_errors():
    for args in [(0, 10, 0.2), (5, 0, 0.2), (5, 10, 1.2)]:
        with pytest.raises(ValueError):
            build_ffblocks(*args)
    with pytest.raises(ValueError):
        build_ffblocks(5, 10, 0.2, rounding="floor")


@given(st.integers(1, 200), st.integers(1, 20), st.floats(0, 1))
def test_ffblocks_partition_and_bound(count, size, ratio):
    blocks = build_ffblocks(count, size, ratio)
    assert sum(b.k for b in blocks) == count
    assert all(b.k == size for b in blocks[:-1])
    for b in blocks:
        # per block the ceiling adds less than one shard
        assert -1e-8 <= b.h - ratio * b.k < 1 + 1e-9
    full = [b for b in blocks if b.k == size]
    if full:
        assert sum(b.h for b in full) / sum(b.k for b in full) - ratio < 1 / size + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 16), st.integers(0, 8), st.data())
def test_roundtrip_property(k, h, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    src = shards(rng, k, 5)
    enc = rs_encode(src, h)
    lost = data.draw(st.sets(st.integers(0, k + h - 1), max_size=h))
    assert rs_decode(FecBlock(RsParams(k + h, k), tuple(enc)).erase(lost)) == src


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 6), st.data())
def test_anti_recovery_property(k, h, data):
    n = k + h
    extra = data.draw(st.integers(h + 1, n))
    lost = data.draw(st.sets(st.integers(0, n - 1), min_size=extra, max_size=extra))
    block = FecBlock(RsParams(n, k), tuple(rs_encode([bytes([i]) * 3 for i in range(k)], h)))
    with pytest.raises(Unrecoverable):
        rs_decode(block.erase(lost))


def test_protection_decision():
    d = ProtectionDecision.of(3, 1.4)
    assert d.ratio == 1.0 and d.protect
    assert not ProtectionDecision.of(4, 0.0).protect
    with pytest.raises(ValueError):
        ProtectionDecision(1, 0.2, False)
    with pytest.raises(ValueError):
        ProtectionDecision(1, -0.1, True)
