import numpy as np
import pytest

from latcodec.entropy import PmfTable, normalize_fixed_point, rate_lower_bound, table_pool_hash
from latcodec.rans import CoderError, RansDecoder, rans_decode, rans_encode


def random_table(rng, m=None):
    m = m or int(rng.integers(1, 400))
    return normalize_fixed_point(rng.random(m) ** 3 + 1e-9)


def test_empty_stream_is_flush_only():
    t = random_table(np.random.default_rng(0), m=8)
    payload = rans_encode([], t)
    assert len(payload) == 4
    assert rans_decode(payload, 0, t).size == 0


def test_thousand_randomized_roundtrips():
    rng = np.random.default_rng(1)
    for trial in range(1000):
        if trial == 0:
            t = normalize_fixed_point(np.ones(1))
        elif trial == 1:
            t = normalize_fixed_point(np.ones(1 << 16))
        else:
            t = random_table(rng)
        n = int(rng.integers(0, 200))
        codes = rng.integers(0, len(t), n)
        assert np.array_equal(rans_decode(rans_encode(codes, t), n, t), codes)


def test_two_symbol_stream_near_thousand_bytes():
    t = normalize_fixed_point(np.array([1.0, 1.0]))
    codes = np.random.default_rng(2).integers(0, 2, 8000)
    payload = rans_encode(codes, t)
    assert abs(len(payload) - 1004) <= 3  # 8000 bits + 4-byte flush


def test_compression_efficiency_bounds():
    rng = np.random.default_rng(3)
    t = normalize_fixed_point(rng.random(64) ** 4 + 1e-6)
    codes = rng.choice(64, size=200_000, p=t.probs)
    payload = rans_encode(codes, t)
    xent = rate_lower_bound(codes, t)
    assert len(payload) * 8 <= xent * 1.005 + 32 * 8
    assert len(payload) * 8 >= xent  # cannot beat entropy


def test_multi_table_stream_roundtrip():
    rng = np.random.default_rng(4)
    pool = [random_table(rng) for _ in range(5)]
    refs = rng.integers(0, 5, 3000)
    codes = np.array([rng.integers(0, len(pool[r])) for r in refs])
    payload = rans_encode(codes, pool, refs)
    assert np.array_equal(rans_decode(payload, 3000, pool, refs), codes)


def test_streaming_decoder_two_phases():
    rng = np.random.default_rng(5)
    t1, t2 = random_table(rng, 16), random_table(rng, 64)
    a = rng.integers(0, 16, 100)
    b = rng.integers(0, 64, 100)
    payload = rans_encode(
        np.concatenate([a, b]), [t1, t2],
        np.concatenate([np.zeros(100, int), np.ones(100, int)]),
    )
    dec = RansDecoder(payload)
    assert np.array_equal(dec.decode(100, [t1]), a)
    assert np.array_equal(dec.decode(100, [t2]), b)


def test_code_out_of_range_rejected_before_output():
    t = normalize_fixed_point(np.ones(4))
    with pytest.raises(CoderError, match="code out of range"):
        rans_encode([0, 4], t)


def test_hash_mismatch_is_model_mismatch():
    t = random_table(np.random.default_rng(6), 8)
    payload = rans_encode([1, 2, 3], t)
    with pytest.raises(CoderError, match="model mismatch"):
        rans_decode(payload, 3, t, expected_hash=b"\x00" * 32)
    assert np.array_equal(
        rans_decode(payload, 3, t, expected_hash=table_pool_hash([t])), [1, 2, 3]
    )


def test_flipped_byte_never_crashes():
    rng = np.random.default_rng(7)
    t = random_table(rng, 50)
    codes = rng.integers(0, 50, 500)
    payload = bytearray(rans_encode(codes, t))
    for pos in range(0, len(payload), max(1, len(payload) // 17)):
        corrupted = bytes(payload[:pos]) + bytes([payload[pos] ^ 0xFF]) + bytes(payload[pos + 1 :])
        try:
            out = rans_decode(corrupted, 500, t)
            assert out.shape == (500,)  # wrong output is acceptable
        except CoderError:
            pass  # clean error is acceptable


def test_truncated_payload_underflows():
    rng = np.random.default_rng(8)
    t = random_table(rng, 200)
    codes = rng.integers(0, 200, 2000)
    payload = rans_encode(codes, t)
    with pytest.raises(CoderError, match="underflow"):
        rans_decode(payload[: len(payload) // 2], 2000, t)
    with pytest.raises(CoderError, match="underflow"):
        RansDecoder(b"\x01\x02")
