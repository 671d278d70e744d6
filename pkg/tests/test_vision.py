"""Vision: gaze clamping and vergence, projection correctness against the
analytic oracle, acuity post-processing, gaze error."""

import math

import numpy as np
import pytest

from conftest import make_scene, static_sphere
from cribsim.curriculum import AcuityProfile, BLACKOUT, FULL_ACUITY
from cribsim.errors import SceneError
from cribsim.vision import (CENTRAL_FOV, EyeState, PERIPHERAL_FOV,
                            RETINA_SIZE, apply_acuity, blur_radius_map,
                            box_blur, eye_geometry, gaze_error_to,
                            render_frame, set_gaze, zero_frame)
from cribsim.world import EntitySpec, sphere

HEAD_POS = np.array([0.0, 0.0, 0.0])
HEAD_QUAT = np.array([1.0, 0.0, 0.0, 0.0])
BG = (0.03, 0.03, 0.05)


def scene_with(entities):
    s = make_scene(entities=entities)
    s.background = np.asarray(BG)
    return s


class TestGaze:
    def test_vergence_geometry(self):
        eyes = set_gaze(EyeState(), 0.0, 0.0, 1.0)
        expected = 2.0 * math.degrees(math.atan(0.02 / 1.0))
        assert eyes.vergence_deg() == pytest.approx(expected)
        assert expected == pytest.approx(2.29, abs=0.01)
        # the two per-eye axes meet at the fixation point
        per_eye, _, cyclo_d, _ = eye_geometry(eyes, HEAD_POS, HEAD_QUAT)
        ang = math.degrees(math.acos(np.clip(
            per_eye["left"][1] @ per_eye["right"][1], -1, 1)))
        assert ang == pytest.approx(expected, abs=1e-9)

    def test_pan_clamped(self):
        assert set_gaze(EyeState(), 90.0, 0.0, 1.0).pan == 45.0

    def test_focal_clamped(self):
        assert set_gaze(EyeState(), 0.0, 0.0, 0.01).focal == 0.1


class TestRender:
    def test_empty_scene_uniform_background(self):
        s = scene_with([])
        frame = render_frame(s, EyeState(focal=1.0), HEAD_POS, HEAD_QUAT)
        for name, img in frame.retinas():
            assert img.pixels.shape == (32, 32, 3)
            np.testing.assert_allclose(img.pixels, np.broadcast_to(BG, (32, 32, 3)))
        assert frame.fixated_entity is None

    def test_four_retinas_plus_optional_debug(self):
        s = scene_with([])
        frame = render_frame(s, EyeState(), HEAD_POS, HEAD_QUAT, with_debug=True)
        assert len(frame.retinas()) == 4
        assert frame.debug_view is not None
        assert frame.debug_view.pixels.shape == (128, 128, 3)
        assert frame.left_central.fov_deg == 8.0
        assert frame.left_peripheral.fov_deg == 100.0

    def test_foveation_resolution_ordering(self):
        s = scene_with([])
        frame = render_frame(s, EyeState(), HEAD_POS, HEAD_QUAT)
        assert (frame.left_central.degrees_per_pixel()
                < frame.left_peripheral.degrees_per_pixel())

    def test_on_axis_sphere_pixel_coverage(self):
        """Sphere radius 0.1 on the gaze axis at 2 m: angular diameter
        2*asin(0.05) ~ 5.73 deg -> ~23 px of the 32-px/8-deg central image,
        ~1.8 px of the peripheral (barely resolved)."""
        ang_diam = 2.0 * math.degrees(math.asin(0.05))
        assert ang_diam == pytest.approx(5.73, abs=0.01)
        s = scene_with([static_sphere("ball", (0.0, 0.0, 2.0), 0.1,
                                      color=(1.0, 0.0, 0.0))])
        frame = render_frame(s, EyeState(focal=2.0), HEAD_POS, HEAD_QUAT)
        central_hit = np.any(frame.left_central.pixels != np.asarray(BG), axis=2)
        cols = np.flatnonzero(central_hit.any(axis=0))
        expected_px = ang_diam * (32 / 8.0)  # ~22.9
        assert abs(len(cols) - expected_px) <= 2
        peripheral_hit = np.any(frame.left_peripheral.pixels != np.asarray(BG),
                                axis=2)
        p_cols = np.flatnonzero(peripheral_hit.any(axis=0))
        assert 1 <= len(p_cols) <= 3  # ~1.8 px: present but barely resolved

    def test_off_axis_sphere_absent_from_central(self):
        # 10 deg off the gaze axis: outside the 8 deg central FOV,
        # inside the 100 deg peripheral
        ang = math.radians(10.0)
        pos = (2.0 * math.sin(ang), 0.0, 2.0 * math.cos(ang))
        s = scene_with([static_sphere("ball", pos, 0.1, color=(1.0, 0.0, 0.0))])
        frame = render_frame(s, EyeState(focal=2.0), HEAD_POS, HEAD_QUAT)
        central_hit = np.any(frame.left_central.pixels != np.asarray(BG))
        peripheral_hit = np.any(frame.left_peripheral.pixels != np.asarray(BG))
        assert not central_hit
        assert peripheral_hit

    def test_rendering_deterministic(self):
        s = scene_with([static_sphere("ball", (0.1, -0.05, 1.5), 0.2)])
        f1 = render_frame(s, EyeState(), HEAD_POS, HEAD_QUAT)
        f2 = render_frame(s, EyeState(), HEAD_POS, HEAD_QUAT)
        for (_, a), (_, b) in zip(f1.retinas(), f2.retinas()):
            np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_fixated_entity_from_central_ray(self):
        s = scene_with([static_sphere("ball", (0.0, 0.01, 1.5), 0.2)])
        frame = render_frame(s, EyeState(focal=1.5), HEAD_POS, HEAD_QUAT)
        assert frame.fixated_entity == s.id_of("ball")


class TestProjectionOracle:
    def test_randomized_sphere_coverage(self):
        """100 random sphere placements: horizontal pixel extent on the row
        through the projected center within +/-2 px of the analytic value."""
        rng = np.random.default_rng(2024)
        checked = 0
        for case in range(100):
            use_central = case % 2 == 0
            fov = CENTRAL_FOV if use_central else PERIPHERAL_FOV
            half_fov = math.radians(fov / 2.0)
            d = float(rng.uniform(0.8, 3.0))
            max_off = 0.25 * half_fov
            theta = float(rng.uniform(-max_off, max_off))  # azimuth offset
            alpha_max = 0.4 * half_fov
            alpha = float(rng.uniform(0.3 * alpha_max, alpha_max))
            r = d * math.sin(alpha)
            pos = (d * math.sin(theta), 0.0, d * math.cos(theta))
            s = scene_with([static_sphere("ball", pos, r, color=(1, 0, 0))])
            frame = render_frame(s, EyeState(focal=d), HEAD_POS, HEAD_QUAT)
            img = frame.left_central if use_central else frame.left_peripheral
            # analytic: the sphere's image spans tan(theta') +/- alpha' on the
            # image plane, seen from the left eye
            eye_x = -0.02
            dx = pos[0] - eye_x
            dz = pos[2]
            dist = math.hypot(dx, dz)
            if r >= dist:
                continue
            # left-eye gaze direction converges on the fixation point
            per_eye, _, _, _ = eye_geometry(EyeState(focal=d), HEAD_POS, HEAD_QUAT)
            fwd = per_eye["left"][1]
            theta_eye = math.atan2(dx, dz) - math.atan2(fwd[0], fwd[2])
            alpha_eye = math.asin(r / dist)
            t0 = math.tan(theta_eye - alpha_eye)
            t1 = math.tan(theta_eye + alpha_eye)
            half = math.tan(half_fov)
            px = 32 * (t1 - t0) / (2 * half)
            if abs(theta_eye) + alpha_eye > 0.9 * half_fov:
                continue  # keep fully inside the FOV
            hit = np.any(img.pixels != np.asarray(BG), axis=2)
            cols = np.flatnonzero(hit.any(axis=0))
            measured = len(cols)
            assert abs(measured - px) <= 2.0, (
                f"case {case}: measured {measured}, analytic {px:.2f}")
            checked += 1
        assert checked >= 80


class TestAcuity:
    def test_blackout_zeroes_everything(self):
        s = scene_with([static_sphere("ball", (0, 0, 1.0), 0.3)])
        frame = render_frame(s, EyeState(), HEAD_POS, HEAD_QUAT, acuity=BLACKOUT)
        for _, img in frame.retinas():
            assert np.all(img.pixels == 0.0)

    def test_full_acuity_identity(self):
        s = scene_with([static_sphere("ball", (0, 0, 1.0), 0.3)])
        raw = render_frame(s, EyeState(), HEAD_POS, HEAD_QUAT)
        out = apply_acuity(raw, FULL_ACUITY)
        for (_, a), (_, b) in zip(raw.retinas(), out.retinas()):
            np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_nearsighted_equals_bruteforce_blur(self):
        """10 randomized cases: far objects equal the independently
        computed per-pixel box blur of the raw render."""
        rng = np.random.default_rng(77)
        profile = AcuityProfile("nearsighted", d_clear=0.75, d_max=2.0)
        for case in range(10):
            n = int(rng.integers(1, 4))
            specs = []
            for i in range(n):
                specs.append(static_sphere(
                    f"s{i}",
                    (float(rng.uniform(-0.8, 0.8)), float(rng.uniform(-0.5, 0.5)),
                     float(rng.uniform(0.5, 4.0))),
                    float(rng.uniform(0.1, 0.4)),
                    color=tuple(rng.uniform(0.2, 1.0, 3))))
            s = scene_with(specs)
            raw = render_frame(s, EyeState(focal=1.0), HEAD_POS, HEAD_QUAT)
            blurred = apply_acuity(raw, profile)
            for name, img in raw.retinas():
                depth = raw.depths[name]
                radii = blur_radius_map(depth, profile)
                out = getattr(blurred, name).pixels
                h, w, _ = img.pixels.shape
                for i in range(h):
                    for j in range(w):
                        rr = int(radii[i, j])
                        y0, y1 = max(0, i - rr), min(h, i + rr + 1)
                        x0, x1 = max(0, j - rr), min(w, j + rr + 1)
                        expect = img.pixels[y0:y1, x0:x1].reshape(-1, 3).mean(axis=0)
                        np.testing.assert_allclose(out[i, j], expect, atol=1e-12)

    def test_object_beyond_dmax_fully_blurred(self):
        s = scene_with([static_sphere("far", (0, 0, 3.0), 0.5, color=(1, 0, 0))])
        profile = AcuityProfile("nearsighted", d_clear=0.75, d_max=2.0)
        raw = render_frame(s, EyeState(focal=1.0), HEAD_POS, HEAD_QUAT)
        out = apply_acuity(raw, profile)
        img = raw.left_central.pixels
        full = box_blur(img, 4)
        hit = raw.depths["left_central"] <= 3.5
        np.testing.assert_allclose(out.left_central.pixels[hit], full[hit],
                                   atol=1e-12)


class TestGazeError:
    def test_dead_ahead_zero(self):
        s = scene_with([static_sphere("t", (0.0, 0.01, 2.0), 0.1)])
        err = gaze_error_to(s, EyeState(), HEAD_POS, HEAD_QUAT, s.id_of("t"))
        assert err < 0.5

    def test_thirty_degrees_azimuth(self):
        # place the target at exactly 30 deg azimuth from the cyclopean origin
        _, origin, _, _ = eye_geometry(EyeState(), HEAD_POS, HEAD_QUAT)
        d = 2.0
        pos = origin + np.array([d * math.sin(math.radians(30)), 0.0,
                                 d * math.cos(math.radians(30))])
        s = scene_with([static_sphere("t", tuple(pos), 0.1)])
        err = gaze_error_to(s, EyeState(), HEAD_POS, HEAD_QUAT, s.id_of("t"))
        assert err == pytest.approx(30.0, abs=1e-6)

    def test_behind_head_over_90(self):
        s = scene_with([static_sphere("t", (0.0, 0.0, -2.0), 0.1)])
        err = gaze_error_to(s, EyeState(), HEAD_POS, HEAD_QUAT, s.id_of("t"))
        assert err > 90.0

    def test_unknown_entity_raises(self):
        s = scene_with([])
        with pytest.raises(SceneError):
            gaze_error_to(s, EyeState(), HEAD_POS, HEAD_QUAT, 999)


class TestZeroFrame:
    def test_shapes_constant_attention_live(self):
        s = scene_with([static_sphere("t", (0.0, 0.01, 1.0), 0.2)])
        frame = zero_frame(s, EyeState(focal=1.0), HEAD_POS, HEAD_QUAT)
        for _, img in frame.retinas():
            assert img.pixels.shape == (RETINA_SIZE, RETINA_SIZE, 3)
            assert np.all(img.pixels == 0.0)
        assert frame.fixated_entity == s.id_of("t")
