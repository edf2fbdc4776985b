import struct

import numpy as np
import pytest

from ofdm_gfa import storage
from ofdm_gfa.signal_model import SystemConfig, generate_pilots, generate_scene


@pytest.fixture
def objects():
    cfg = SystemConfig(N=7, M=3, L=12, P=4)
    rng = np.random.default_rng(3)
    return generate_pilots(cfg, rng), generate_scene(cfg, rng, rng, seed=41)


class TestRoundTrip:
    def test_pilots(self, objects, tmp_path):
        pilots, _ = objects
        path = tmp_path / "pilots.bin"
        storage.save_pilots(path, pilots)
        back = storage.load_pilots(path)
        np.testing.assert_array_equal(back.freq_pilots, pilots.freq_pilots)
        np.testing.assert_array_equal(back.effective_pilots, pilots.effective_pilots)

    def test_scene(self, objects, tmp_path):
        _, scene = objects
        path = tmp_path / "scene.bin"
        storage.save_scene(path, scene)
        back = storage.load_scene(path)
        np.testing.assert_array_equal(back.activities, scene.activities)
        np.testing.assert_array_equal(back.channel.taps, scene.channel.taps)
        assert back.seed == 41


class TestLayout:
    def test_header_and_row_major_pairs(self, objects):
        pilots, _ = objects
        blob = storage.dumps_pilots(pilots)
        assert blob[:8] == b"OFDMGFA1"
        kind, count = struct.unpack_from("<II", blob, 8)
        assert (kind, count) == (1, 2)
        (nlen,) = struct.unpack_from("<H", blob, 16)
        assert blob[18:18 + nlen] == b"freq_pilots"
        pos = 18 + nlen
        code, ndim = struct.unpack_from("<BB", blob, pos)
        dims = struct.unpack_from("<2Q", blob, pos + 2)
        assert (code, ndim, dims) == (2, 2, (12, 7))
        data = np.frombuffer(blob, "<f8", count=2 * 12 * 7, offset=pos + 18)
        # first entries: re, im of element [0, 0], then element [0, 1]
        f = pilots.freq_pilots
        np.testing.assert_array_equal(data[:4], [f[0, 0].real, f[0, 0].imag, f[0, 1].real,
                                                 f[0, 1].imag])

    def test_bad_magic(self):
        with pytest.raises(storage.FormatError, match="bad magic"):
            storage.loads_scene(b"NOTMAGIC" + bytes(8))

    def test_wrong_kind(self, objects):
        with pytest.raises(storage.FormatError, match="kind"):
            storage.loads_scene(storage.dumps_pilots(objects[0]))

    def test_truncated(self, objects):
        blob = storage.dumps_scene(objects[1])
        with pytest.raises(storage.FormatError):
            storage.loads_scene(blob[:-10])
