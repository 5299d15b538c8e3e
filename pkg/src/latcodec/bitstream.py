"""Bitstream container: header with lattice/table identity and step codes."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from latcodec.lattice import LatticeKind

MAGIC = b"LTC1"
VERSION = 1

_KIND_CODE = {LatticeKind.INTEGER: 0, LatticeKind.HEX: 1, LatticeKind.TRUNC_OCT: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


class FormatError(ValueError):
    pass


@dataclass
class BitstreamHeader:
    lattice_kind: LatticeKind
    volume: float
    bounds: np.ndarray  # (v, 2) per-axis dictionary bounds
    table_hash: bytes  # SHA-256 of the table pool the payload was coded with
    step_code_side: int = 0  # rho_f index, 3 bits
    step_code_main: int = 0  # rho_h index, 3 bits
    shifts_enabled: bool = False
    code_count: int = 0

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if len(self.table_hash) != 32:
            raise FormatError("table hash must be 32 bytes")
        if not (0 <= self.step_code_side < 8 and 0 <= self.step_code_main < 8):
            raise FormatError("step codes are 3-bit values")


def write_bitstream(header: BitstreamHeader, payload: bytes) -> bytes:
    v = header.bounds.shape[0]
    step_byte = (
        (header.step_code_side & 0x7)
        | ((header.step_code_main & 0x7) << 3)
        | ((1 << 6) if header.shifts_enabled else 0)
    )
    parts = [
        MAGIC,
        struct.pack("<BB", VERSION, _KIND_CODE[header.lattice_kind]),
        struct.pack("<d", header.volume),
        struct.pack(f"<{2 * v}d", *header.bounds.reshape(-1)),
        header.table_hash,
        struct.pack("<B", step_byte),
        struct.pack("<II", header.code_count, len(payload)),
        payload,
    ]
    return b"".join(parts)


def read_bitstream(data: bytes):
    if data[:4] != MAGIC:
        raise FormatError("bad magic")
    version, kind_code = struct.unpack_from("<BB", data, 4)
    if version != VERSION:
        raise FormatError("unsupported version")
    if kind_code not in _CODE_KIND:
        raise FormatError("unknown lattice kind")
    kind = _CODE_KIND[kind_code]
    v = {LatticeKind.INTEGER: 1, LatticeKind.HEX: 2, LatticeKind.TRUNC_OCT: 3}[kind]
    off = 6
    (volume,) = struct.unpack_from("<d", data, off)
    off += 8
    bounds = np.array(struct.unpack_from(f"<{2 * v}d", data, off)).reshape(v, 2)
    off += 16 * v
    table_hash = data[off : off + 32]
    if len(table_hash) != 32:
        raise FormatError("truncated header")
    off += 32
    (step_byte,) = struct.unpack_from("<B", data, off)
    off += 1
    code_count, payload_len = struct.unpack_from("<II", data, off)
    off += 8
    payload = data[off : off + payload_len]
    if len(payload) != payload_len:
        raise FormatError("truncated payload")
    header = BitstreamHeader(
        lattice_kind=kind,
        volume=volume,
        bounds=bounds,
        table_hash=table_hash,
        step_code_side=step_byte & 0x7,
        step_code_main=(step_byte >> 3) & 0x7,
        shifts_enabled=bool(step_byte & (1 << 6)),
        code_count=code_count,
    )
    return header, payload
