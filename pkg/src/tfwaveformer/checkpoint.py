"""Binary checkpoint serialization.

Layout: the magic bytes ``TFWF``, one format version byte, then a record
per array: name length (u32 LE), UTF-8 name, rank (u32 LE), each dim
(u32 LE), then the payload as little-endian float32. Records are written
in sorted name order so identical states produce identical bytes.

Generator states are carried losslessly by splitting them into 16-bit
chunks, each exactly representable in float32.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import CheckpointVersionError, DataFormatError

MAGIC = b"TFWF"
FORMAT_VERSION = 1

_MAX_NAME = 4096
_MAX_RANK = 32


def save_arrays(path, arrays):
    """Write ``{name: ndarray}`` in the binary record format."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([FORMAT_VERSION]))
        for name in sorted(arrays):
            arr = np.asarray(arrays[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def _read_exact(fh, count, path, what):
    data = fh.read(count)
    if len(data) != count:
        raise DataFormatError(
            f"{path}: truncated checkpoint while reading {what} "
            f"({len(data)} of {count} bytes)"
        )
    return data


def load_arrays(path):
    """Read a checkpoint back into ``{name: float32 ndarray}``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        version_byte = _read_exact(fh, 1, path, "format version")
        version = version_byte[0]
        if version != FORMAT_VERSION:
            raise CheckpointVersionError(
                f"{path}: checkpoint format version {version} is not supported "
                f"(this build reads version {FORMAT_VERSION})"
            )
        out = {}
        while True:
            head = fh.read(4)
            if len(head) == 0:
                break
            if len(head) != 4:
                raise DataFormatError(f"{path}: truncated record header")
            (name_len,) = struct.unpack("<I", head)
            if not 0 < name_len <= _MAX_NAME:
                raise DataFormatError(f"{path}: implausible name length {name_len}")
            name = _read_exact(fh, name_len, path, "record name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, path, f"{name} rank"))
            if rank > _MAX_RANK:
                raise DataFormatError(f"{path}: implausible rank {rank} for {name}")
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4, path, f"{name} dim"))[0]
                for _ in range(rank)
            )
            count = int(np.prod(shape, dtype=np.int64)) if rank else 1
            payload = _read_exact(fh, 4 * count, path, f"{name} payload")
            out[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
        return out


def encode_generator(rng):
    """A generator's full state as exact 16-bit chunks in float32."""
    state = rng.bit_generator.state
    if state["bit_generator"] != "PCG64":
        raise DataFormatError(
            f"only PCG64 generators are supported, got {state['bit_generator']}"
        )
    words = []
    for value, chunks in (
        (state["state"]["state"], 8),
        (state["state"]["inc"], 8),
        (state["has_uint32"], 1),
        (state["uinteger"], 2),
    ):
        v = int(value)
        for _ in range(chunks):
            words.append(v & 0xFFFF)
            v >>= 16
    return np.array(words, dtype=np.float32)


def decode_generator(arr):
    """Rebuild the generator encoded by :func:`encode_generator`."""
    words = [int(round(float(x))) for x in np.asarray(arr).reshape(-1)]
    if len(words) != 19:
        raise DataFormatError(f"generator state needs 19 chunks, got {len(words)}")

    def join(ws):
        v = 0
        for i, w in enumerate(ws):
            v |= w << (16 * i)
        return v

    rng = np.random.default_rng(0)
    rng.bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": join(words[0:8]), "inc": join(words[8:16])},
        "has_uint32": words[16],
        "uinteger": join(words[17:19]),
    }
    return rng
