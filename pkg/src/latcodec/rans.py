"""Byte-wise range Asymmetric Numeral System coder over fixed-point tables.

32-bit state, 8-bit renormalization, LIFO symbol order: the encoder walks
the code sequence in reverse so the decoder reads it forward.  Symbols may
reference different tables from a shared pool, which is how per-element
Gaussian tables and shared factorized tables go through one code path.
"""

from __future__ import annotations

import numpy as np

from latcodec.entropy import PmfTable, table_pool_hash

RANS_L = 1 << 23  # lower bound of the normalization interval


class CoderError(ValueError):
    pass


def _as_pool(tables):
    if isinstance(tables, PmfTable):
        return [tables]
    return list(tables)


def _refs_for(codes, pool, refs):
    if refs is None:
        refs = np.zeros(len(codes), dtype=np.int64)
    refs = np.asarray(refs, dtype=np.int64)
    if refs.shape != (len(codes),):
        raise CoderError("refs length mismatch")
    if len(refs) and (refs.min() < 0 or refs.max() >= len(pool)):
        raise CoderError("table ref out of range")
    return refs


def rans_encode(codes, tables, refs=None) -> bytes:
    """Encode code indices into a byte payload.

    Validates every code against its table before emitting anything.
    """
    codes = np.asarray(codes, dtype=np.int64)
    pool = _as_pool(tables)
    refs = _refs_for(codes, pool, refs)
    precision = pool[0].precision
    for t in pool:
        if t.precision != precision:
            raise CoderError("mixed table precision")
    for ti in np.unique(refs) if len(codes) else []:
        sel = codes[refs == ti]
        if sel.min() < 0 or sel.max() >= pool[int(ti)].code_count:
            raise CoderError("code out of range")

    freqs = [t.freqs for t in pool]
    cums = [t.cum for t in pool]
    out = bytearray()
    x = RANS_L
    shift = precision
    for i in range(len(codes) - 1, -1, -1):
        t = refs[i]
        c = codes[i]
        f = int(freqs[t][c])
        s = int(cums[t][c])
        x_max = ((RANS_L >> shift) << 8) * f
        while x >= x_max:
            out.append(x & 0xFF)
            x >>= 8
        x = ((x // f) << shift) + (x % f) + s
    flush = bytes(((x >> (8 * k)) & 0xFF) for k in range(4))
    return flush + bytes(reversed(out))


class RansDecoder:
    """Streaming decoder; decode() may be called repeatedly with new tables."""

    def __init__(self, payload: bytes):
        if len(payload) < 4:
            raise CoderError("underflow")
        self._data = payload
        self._pos = 4
        self._x = int.from_bytes(payload[:4], "little")

    def decode(self, count, tables, refs=None) -> np.ndarray:
        pool = _as_pool(tables)
        refs = _refs_for(np.zeros(count), pool, refs)
        precision = pool[0].precision
        mask = (1 << precision) - 1
        slot_maps = [None] * len(pool)
        freqs = [t.freqs for t in pool]
        cums = [t.cum for t in pool]
        data = self._data
        pos = self._pos
        x = self._x
        out = np.empty(count, dtype=np.int64)
        for i in range(count):
            t = refs[i]
            sm = slot_maps[t]
            if sm is None:
                sm = np.repeat(
                    np.arange(pool[t].code_count, dtype=np.int64), freqs[t]
                )
                slot_maps[t] = sm
            cf = x & mask
            c = int(sm[cf])
            out[i] = c
            x = int(freqs[t][c]) * (x >> precision) + cf - int(cums[t][c])
            while x < RANS_L:
                if pos >= len(data):
                    raise CoderError("underflow")
                x = (x << 8) | data[pos]
                pos += 1
        self._pos = pos
        self._x = x
        return out


def rans_decode(payload, count, tables, refs=None, expected_hash=None) -> np.ndarray:
    """Decode ``count`` symbols; inverse of :func:`rans_encode`.

    When ``expected_hash`` is given it must equal the SHA-256 of the table
    pool used at encode time ("model mismatch" otherwise).
    """
    pool = _as_pool(tables)
    if expected_hash is not None and table_pool_hash(pool) != expected_hash:
        raise CoderError("model mismatch")
    return RansDecoder(payload).decode(count, pool, refs)
