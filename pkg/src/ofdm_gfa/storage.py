"""Binary container for pilot sets and scenes.

Layout (all integers little-endian)::

    magic      8 bytes   b"OFDMGFA1"
    kind       uint32    1 = PilotSet, 2 = Scene
    count      uint32    number of arrays that follow
    per array:
      name_len uint16, name (utf-8)
      dtype    uint8     1 = float64, 2 = complex128, 3 = int64
      ndim     uint8
      dims     ndim x uint64
      data     row-major (C order); complex entries as (re, im) pairs of
               little-endian float64

A PilotSet stores ``freq_pilots`` (L x N) and ``P``; the effective blocks
are rebuilt on load.  A Scene stores ``activities`` (N), ``taps``
(N x M x P, index order device, antenna, tap) and ``seed``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .signal_model import ChannelRealization, PilotSet, Scene

MAGIC = b"OFDMGFA1"
KIND_PILOTS = 1
KIND_SCENE = 2
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<c16"), 3: np.dtype("<i8")}
_CODES = {"f": 1, "c": 2, "i": 3, "u": 3, "b": 3}


class FormatError(ValueError):
    pass


def _encode(kind: int, arrays: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", kind, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        code = _CODES[arr.dtype.kind]
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(parts)


def _decode(blob: bytes, expect_kind: int) -> dict[str, np.ndarray]:
    if blob[:8] != MAGIC:
        raise FormatError("bad magic; not an OFDMGFA1 file")
    kind, count = struct.unpack_from("<II", blob, 8)
    if kind != expect_kind:
        raise FormatError(f"file holds kind {kind}, expected {expect_kind}")
    pos = 16
    out = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos: pos + nlen].decode()
            pos += nlen
            code, ndim = struct.unpack_from("<BB", blob, pos)
            pos += 2
            dims = struct.unpack_from(f"<{ndim}Q", blob, pos)
            pos += 8 * ndim
            dt = _DTYPES[code]
            nbytes = dt.itemsize * int(np.prod(dims, dtype=np.int64))
            if pos + nbytes > len(blob):
                raise FormatError(f"truncated data for array {name!r}")
            out[name] = np.frombuffer(blob, dtype=dt, count=nbytes // dt.itemsize,
                                      offset=pos).reshape(dims).copy()
            pos += nbytes
    except (struct.error, KeyError) as exc:
        raise FormatError(f"corrupt file: {exc}") from exc
    return out


def dumps_pilots(pilots: PilotSet) -> bytes:
    return _encode(KIND_PILOTS, {"freq_pilots": pilots.freq_pilots,
                                 "P": np.array([pilots.P])})


def loads_pilots(blob: bytes) -> PilotSet:
    arr = _decode(blob, KIND_PILOTS)
    return PilotSet.from_freq(arr["freq_pilots"], int(arr["P"][0]))


def dumps_scene(scene: Scene) -> bytes:
    return _encode(KIND_SCENE, {"activities": np.asarray(scene.activities, dtype=np.int64),
                                "taps": scene.channel.taps,
                                "seed": np.array([scene.seed])})


def loads_scene(blob: bytes) -> Scene:
    arr = _decode(blob, KIND_SCENE)
    return Scene(arr["activities"].astype(np.int8), ChannelRealization(arr["taps"]),
                 int(arr["seed"][0]))


def save_pilots(path, pilots: PilotSet) -> None:
    Path(path).write_bytes(dumps_pilots(pilots))


def load_pilots(path) -> PilotSet:
    return loads_pilots(Path(path).read_bytes())


def save_scene(path, scene: Scene) -> None:
    Path(path).write_bytes(dumps_scene(scene))


def load_scene(path) -> Scene:
    return loads_scene(Path(path).read_bytes())
