"""Tests for relative parameter transfer and interactive edits."""

import numpy as np
import pytest

from reenact.facemodel import (
    GAZE_BOUND,
    FaceParameters,
    quat_from_axis_angle,
    quat_to_axis_angle,
    quat_conjugate,
    quat_multiply,
)
from reenact.transfer import (
    EditDeltas,
    TransferSpec,
    apply_relative,
    apply_transfer,
    edit_parameters,
    make_relative,
)


def random_params(rng, dims=(8, 8, 6)):
    n_alpha, n_beta, n_delta = dims
    return FaceParameters(
        rotation=quat_from_axis_angle(rng.normal(0.0, 0.2, 3)),
        translation=rng.normal([0.0, 0.0, 3.0], 0.1),
        alpha=rng.normal(0.0, 0.02, n_alpha),
        beta=rng.normal(0.0, 0.02, n_beta),
        delta=rng.normal(0.0, 0.01, n_delta),
        gaze=rng.uniform(-0.3, 0.3, 4),
        sh_coeffs=rng.normal(0.0, 0.1, 27),
    )


def random_sequence(rng, n, dims=(8, 8, 6)):
    return [random_params(rng, dims) for _ in range(n)]


def angle_between(q1, q2):
    aa = quat_to_axis_angle(quat_multiply(quat_conjugate(q1), q2))
    return np.linalg.norm(aa)


class TestRelativeDeltas:
    def test_round_trip(self, rng):
        ref = random_params(rng)
        frame = random_params(rng)
        back = apply_relative(ref, make_relative(frame, ref))
        assert angle_between(back.rotation, frame.rotation) < 1e-12
        np.testing.assert_allclose(back.translation, frame.translation, atol=1e-12)
        np.testing.assert_allclose(back.delta, frame.delta, atol=1e-12)
        np.testing.assert_allclose(back.gaze, frame.gaze, atol=1e-12)

    def test_self_relative_is_identity(self, rng):
        p = random_params(rng)
        d = make_relative(p, p)
        assert abs(abs(d.rotation[0]) - 1.0) < 1e-12
        assert np.linalg.norm(d.rotation[1:]) < 1e-12
        assert np.all(d.translation == 0) and np.all(d.expression == 0)

    def test_dimension_mismatch_raises(self, rng):
        with pytest.raises(ValueError):
            make_relative(random_params(rng, (8, 8, 6)), random_params(rng, (8, 8, 4)))


class TestTransferSpec:
    def test_rejects_empty_selection(self):
        with pytest.raises(ValueError):
            TransferSpec(pose=False, expression=False, gaze=False,
                         identity_geometry=False)

    def test_rejects_bad_scale(self):
        with pytest.raises(ValueError):
            TransferSpec(rotation_scale=1.5)
        with pytest.raises(ValueError):
            TransferSpec(translation_scale=-0.1)

    def test_dict_round_trip(self):
        spec = TransferSpec(rotation_scale=0.5, translation_axes=(True, False, True),
                            source_reference_frame=2)
        assert TransferSpec.from_dict(spec.to_dict()) == spec


class TestApplyTransfer:
    def test_self_transfer_recovers_source_motion(self, rng):
        """Source onto itself with full transfer reproduces the source frames."""
        seq = random_sequence(rng, 5)
        out, meta = apply_transfer(seq, seq, TransferSpec())
        assert not meta["target_frames_repeated"]
        for got, want in zip(out, seq):
            assert angle_between(got.rotation, want.rotation) < 1e-10
            np.testing.assert_allclose(got.translation, want.translation, atol=1e-12)
            np.testing.assert_allclose(got.delta, want.delta, atol=1e-12)
            np.testing.assert_allclose(got.gaze, want.gaze, atol=1e-12)

    def test_identity_and_illumination_stay_target(self, rng):
        src = random_sequence(rng, 4)
        tgt = random_sequence(rng, 4)
        out, _ = apply_transfer(src, tgt, TransferSpec())
        for got, t in zip(out, tgt):
            assert np.all(got.alpha == t.alpha)
            assert np.all(got.beta == t.beta)
            assert np.all(got.sh_coeffs == t.sh_coeffs)

    def test_half_rotation_scale_halves_angle(self, rng):
        src = random_sequence(rng, 3)
        tgt = random_sequence(rng, 3)
        full, _ = apply_transfer(src, tgt, TransferSpec(rotation_scale=1.0))
        half, _ = apply_transfer(src, tgt, TransferSpec(rotation_scale=0.5))
        tgt_ref_q = tgt[0].rotation
        for f_full, f_half in zip(full, half):
            a_full = angle_between(tgt_ref_q, f_full.rotation)
            a_half = angle_between(tgt_ref_q, f_half.rotation)
            assert abs(a_half - 0.5 * a_full) < 1e-9

    def test_half_translation_scale_halves_delta(self, rng):
        src = random_sequence(rng, 3)
        tgt = random_sequence(rng, 3)
        full, _ = apply_transfer(src, tgt, TransferSpec(translation_scale=1.0))
        half, _ = apply_transfer(src, tgt, TransferSpec(translation_scale=0.5))
        t_ref = tgt[0].translation
        for f_full, f_half in zip(full, half):
            np.testing.assert_allclose(f_half.translation - t_ref,
                                       0.5 * (f_full.translation - t_ref), atol=1e-12)

    def test_translation_axis_mask(self, rng):
        src = random_sequence(rng, 3)
        tgt = random_sequence(rng, 3)
        out, _ = apply_transfer(src, tgt,
                                TransferSpec(translation_axes=(True, False, True)))
        t_ref = tgt[0].translation
        for got in out:
            assert got.translation[1] == t_ref[1]

    def test_disabled_components_bit_preserved(self, rng):
        src = random_sequence(rng, 4)
        tgt = random_sequence(rng, 4)
        out, _ = apply_transfer(src, tgt, TransferSpec(pose=False, gaze=False))
        for got, t in zip(out, tgt):
            assert np.all(got.rotation == t.rotation)
            assert np.all(got.translation == t.translation)
            assert np.all(got.gaze == t.gaze)
        # expression still moved with the source (frame 0 coincides by construction)
        for got, t in zip(out[1:], tgt[1:]):
            assert not np.all(got.delta == t.delta)

    def test_shorter_target_repeats_last_frame(self, rng):
        src = random_sequence(rng, 6)
        tgt = random_sequence(rng, 3)
        out, meta = apply_transfer(src, tgt, TransferSpec(expression=False))
        assert meta["target_frames_repeated"]
        assert len(out) == 6
        for got in out[3:]:
            assert np.all(got.delta == tgt[-1].delta)

    def test_gaze_clamped_to_bounds(self, rng):
        src = random_sequence(rng, 2)
        tgt = random_sequence(rng, 2)
        src[1].gaze = np.full(4, GAZE_BOUND)
        src[0].gaze = np.full(4, -GAZE_BOUND)
        tgt[0].gaze = np.full(4, GAZE_BOUND)
        out, _ = apply_transfer(src, tgt, TransferSpec())
        assert np.all(np.abs(out[1].gaze) <= GAZE_BOUND)

    def test_identity_geometry_transfer(self, rng):
        src = random_sequence(rng, 2)
        tgt = random_sequence(rng, 2)
        out, _ = apply_transfer(src, tgt, TransferSpec(identity_geometry=True))
        want = tgt[0].alpha + (src[1].alpha - src[0].alpha)
        np.testing.assert_allclose(out[1].alpha, want, atol=1e-12)

    def test_reference_frame_out_of_range(self, rng):
        seq = random_sequence(rng, 2)
        with pytest.raises(ValueError):
            apply_transfer(seq, seq, TransferSpec(source_reference_frame=5))


class TestEditParameters:
    def test_additive_translation_and_expression(self, rng):
        p = random_params(rng)
        dt = np.array([0.01, -0.02, 0.03])
        de = rng.normal(0.0, 0.01, p.delta.size)
        out, warnings = edit_parameters(p, EditDeltas(translation=dt, expression=de))
        assert warnings == []
        np.testing.assert_allclose(out.translation, p.translation + dt, atol=1e-15)
        np.testing.assert_allclose(out.delta, p.delta + de, atol=1e-15)
        assert np.all(out.rotation == p.rotation)

    def test_rotation_composes(self, rng):
        p = random_params(rng)
        inc = np.array([0.0, 0.1, 0.0])
        out, _ = edit_parameters(p, EditDeltas(rotation=inc))
        want = quat_multiply(quat_from_axis_angle(inc), p.rotation)
        assert angle_between(out.rotation, want) < 1e-12

    def test_gaze_clamp_reports(self, rng):
        p = random_params(rng)
        out, warnings = edit_parameters(p, EditDeltas(gaze=np.full(4, 2.0)))
        assert warnings and "clamped" in warnings[0]
        assert np.all(out.gaze == GAZE_BOUND)

    def test_alpha_replaces(self, rng):
        p = random_params(rng)
        new_alpha = rng.normal(0.0, 0.05, p.alpha.size)
        out, _ = edit_parameters(p, EditDeltas(alpha=new_alpha))
        assert np.all(out.alpha == new_alpha)
        assert np.all(out.beta == p.beta)

    def test_wrong_dimension_raises(self, rng):
        p = random_params(rng)
        with pytest.raises(ValueError):
            edit_parameters(p, EditDeltas(expression=np.zeros(3)))

    def test_from_dict(self):
        d = EditDeltas.from_dict({"translation": [1.0, 0.0, 0.0], "gaze": None})
        np.testing.assert_array_equal(d.translation, [1.0, 0.0, 0.0])
        assert d.gaze is None and d.rotation is None
