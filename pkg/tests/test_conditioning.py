"""Tests for conditioning volumes and the training corpus."""

import numpy as np
import pytest

from reenact.conditioning import (
    CHANNELS_PER_FRAME,
    WINDOW_SIZE,
    CorpusPair,
    assemble_window,
    build_corpus,
    denormalize,
    frame_channels,
    inference_windows,
    load_corpus,
    load_pair,
    normalize,
    pair_path,
    save_corpus,
    save_pair,
    sliding_windows,
)
from reenact.formats import FormatError
from reenact.render import ConditioningFrame, RasterImage, default_intrinsics
from reenact.synth import SyntheticScene, render_scene


def small_cam(size=16):
    return default_intrinsics(size, size)


def random_cond_frame(rng, size=8):
    def img():
        return RasterImage(size, size, np.rint(rng.uniform(0, 255, (size, size, 3))),
                           "raw")

    return ConditioningFrame(color=img(), correspondence=img(), gaze=img())


class TestNormalization:
    def test_endpoints(self):
        np.testing.assert_allclose(normalize(np.array([0.0, 127.5, 255.0])),
                                   [-1.0, 0.0, 1.0], atol=1e-15)

    def test_eight_bit_round_trip_exact(self):
        levels = np.arange(256, dtype=np.float64)
        back = denormalize(normalize(levels))
        np.testing.assert_allclose(back, levels, atol=1e-12)

    def test_denormalize_clips(self):
        out = denormalize(np.array([-2.0, 2.0]))
        np.testing.assert_array_equal(out, [0.0, 255.0])


class TestWindows:
    def test_frame_channel_layout(self, rng):
        frame = random_cond_frame(rng)
        ch = frame_channels(frame)
        assert ch.shape == (CHANNELS_PER_FRAME, 8, 8)
        np.testing.assert_allclose(ch[0], normalize(frame.color.data[:, :, 0]))
        np.testing.assert_allclose(ch[3], normalize(frame.correspondence.data[:, :, 0]))
        np.testing.assert_allclose(ch[8], normalize(frame.gaze.data[:, :, 2]))

    def test_window_channel_count_and_order(self, rng):
        frames = [random_cond_frame(rng) for _ in range(WINDOW_SIZE)]
        vol = assemble_window(frames)
        assert vol.shape == (CHANNELS_PER_FRAME * WINDOW_SIZE, 8, 8)
        # oldest frame occupies the leading channels, newest the trailing ones
        np.testing.assert_allclose(vol[:9], frame_channels(frames[0]))
        np.testing.assert_allclose(vol[-9:], frame_channels(frames[-1]))

    def test_empty_window_raises(self):
        with pytest.raises(ValueError):
            assemble_window([])

    def test_sliding_none_padding_count(self):
        wins = sliding_windows(list(range(20)), window=5, padding="none")
        assert len(wins) == 20 - (5 - 1)
        assert wins[0] == [0, 1, 2, 3, 4]
        assert wins[-1] == [15, 16, 17, 18, 19]

    def test_sliding_replicate_padding(self):
        wins = sliding_windows(list(range(4)), window=3, padding="replicate")
        assert len(wins) == 4
        assert wins[0] == [0, 0, 0]
        assert wins[1] == [0, 0, 1]
        assert wins[-1] == [1, 2, 3]

    def test_short_sequence_raises(self):
        with pytest.raises(ValueError):
            sliding_windows([1, 2], window=5, padding="none")

    def test_unknown_padding_raises(self):
        with pytest.raises(ValueError):
            sliding_windows([1, 2, 3], window=2, padding="wrap")


@pytest.fixture(scope="module")
def scene_data(small_basis):
    cam = small_cam()
    scene = SyntheticScene(seed=3, n_frames=7)
    frames, params, _ = render_scene(small_basis, scene, cam)
    return small_basis, params, frames, cam


class TestCorpus:
    def test_corpus_size(self, scene_data):
        basis, params, frames, cam = scene_data
        pairs = build_corpus(basis, params, frames, cam, window=3)
        assert len(pairs) == len(params) - (3 - 1)

    def test_pair_shapes_and_range(self, scene_data):
        basis, params, frames, cam = scene_data
        pairs = build_corpus(basis, params, frames, cam, window=3)
        for pair in pairs:
            assert pair.conditioning.shape == (CHANNELS_PER_FRAME * 3, 16, 16)
            assert pair.target.shape == (3, 16, 16)
            assert np.all(np.abs(pair.conditioning) <= 1.0)
            assert np.all(np.abs(pair.target) <= 1.0)

    def test_target_matches_frame(self, scene_data):
        basis, params, frames, cam = scene_data
        pairs = build_corpus(basis, params, frames, cam, window=3)
        want = np.transpose(normalize(frames[2].data), (2, 0, 1))
        np.testing.assert_allclose(pairs[0].target, want, atol=1e-15)

    def test_inference_windows_cover_all_frames(self, scene_data):
        basis, params, _, cam = scene_data
        vols = inference_windows(basis, params, cam, window=3)
        assert len(vols) == len(params)
        # replicated history: the first volume repeats frame 0's channels
        np.testing.assert_allclose(vols[0][:9], vols[0][9:18])

    def test_mismatched_lengths_raise(self, scene_data):
        basis, params, frames, cam = scene_data
        with pytest.raises(ValueError):
            build_corpus(basis, params[:-1], frames, cam, window=3)


class TestCorpusCache:
    def _pair(self, rng, size=8, window=2):
        return CorpusPair(
            conditioning=rng.uniform(-1, 1, (CHANNELS_PER_FRAME * window, size, size))
            .astype(np.float32).astype(np.float64),
            target=rng.uniform(-1, 1, (3, size, size))
            .astype(np.float32).astype(np.float64))

    def test_pair_round_trip_bit_exact(self, rng, tmp_path):
        pair = self._pair(rng)
        path = tmp_path / "pair.dvpc"
        save_pair(pair, path)
        loaded = load_pair(path)
        np.testing.assert_array_equal(loaded.conditioning, pair.conditioning)
        np.testing.assert_array_equal(loaded.target, pair.target)

    def test_corpus_directory_round_trip(self, rng, tmp_path):
        pairs = [self._pair(rng) for _ in range(3)]
        d = tmp_path / "corpus"
        save_corpus(pairs, d)
        assert pair_path(d, 0).exists()
        loaded = load_corpus(d)
        assert len(loaded) == 3
        for got, want in zip(loaded, pairs):
            np.testing.assert_array_equal(got.conditioning, want.conditioning)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.dvpc"
        path.write_bytes(b"XXXX" + b"\x00" * 64)
        with pytest.raises(FormatError):
            load_pair(path)

    def test_empty_directory_raises(self, tmp_path):
        (tmp_path / "none").mkdir()
        with pytest.raises(FormatError):
            load_corpus(tmp_path / "none")
