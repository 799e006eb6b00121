import dataclasses

import numpy as np
import pytest
from scipy import ndimage

from vidstereo.geometry import Pose, relative_pose, rotation_about_axis
from vidstereo.dataio import (FormatError, SceneSpec, Texture, TrajectoryParams, default_rig, frame_skip,
                              generate_scene, generate_sequence, generate_trajectory, pose_noise, read_image,
                              read_manifest, read_pfm, read_poses, render_frame, two_plane_spec, write_dataset,
                              write_image, write_pfm, write_poses)
from vidstereo.dataio.formats import parse_pose_line

RIG = default_rig(160, 120)


def rotation_angle_deg(R):
    return np.rad2deg(np.arccos(np.clip((np.trace(R) - 1) / 2, -1, 1)))


@pytest.fixture(scope="module")
def small_seq():
    return generate_sequence(3, 8, default_rig(96, 72))


class TestScene:
    def test_deterministic(self):
        a, b = generate_scene(5), generate_scene(5)
        fa = render_frame(a, RIG, Pose.identity())
        fb = render_frame(b, RIG, Pose.identity())
        assert np.array_equal(fa.left, fb.left) and np.array_equal(fa.disparity, fb.disparity)

    def test_single_fronto_plane(self):
        scene = generate_scene(0, SceneSpec(fronto=((1.0, 0.0, 0.0, 5.0, 5.0),)))
        fr = render_frame(scene, RIG, Pose.identity())
        np.testing.assert_allclose(fr.disparity, RIG.f * RIG.b / 1.0, rtol=1e-12)

    def test_integer_disparity_plane(self):
        z = RIG.f * RIG.b / 10
        scene = generate_scene(0, SceneSpec(fronto=((z, 0.0, 0.0, 5.0, 5.0),)))
        fr = render_frame(scene, RIG, Pose.identity())
        np.testing.assert_allclose(fr.disparity, 10.0, rtol=1e-12)
        # right pixel u - 10 sees the same surface point as left pixel u
        np.testing.assert_allclose(fr.right[:, :-10], fr.left[:, 10:], atol=1e-9)
        assert not fr.occluded[:, 10:].any() and fr.occluded[:, :10].all()

    def test_two_planes_bimodal(self):
        scene = generate_scene(1, two_plane_spec(0.8, 2.0))
        fr = render_frame(scene, RIG, Pose.identity())
        near, far = RIG.f * RIG.b / 0.8, RIG.f * RIG.b / 2.0
        on_near = np.isclose(fr.disparity, near, rtol=1e-9)
        on_far = np.isclose(fr.disparity, far, rtol=1e-9)
        assert (on_near | on_far).all() and on_near.mean() > 0.1 and on_far.mean() > 0.3
        # the near rectangle's right edge is a single vertical step
        cols = np.flatnonzero(on_near[RIG.height // 2])
        assert np.all(np.diff(cols) == 1)

    def test_occlusion_against_analytic_band(self):
        near_z, far_z = 0.8, 2.0
        scene = generate_scene(1, two_plane_spec(near_z, far_z))
        fr = render_frame(scene, RIG, Pose.identity())
        d_near = RIG.f * RIG.b / near_z
        on_near = np.isclose(fr.disparity, d_near)
        expect = np.zeros(RIG.shape, bool)
        uu = np.arange(RIG.width)
        for v in range(RIG.height):
            near_cols = np.flatnonzero(on_near[v])
            xr = uu - fr.disparity[v]
            expect[v] = (xr < 0) | (xr > RIG.width - 1)
            if near_cols.size:
                # a far point is hidden when its right-view column lands on the near rectangle
                lo, hi = near_cols.min() - d_near, near_cols.max() - d_near
                expect[v] |= ~on_near[v] & (xr >= lo - 0.5) & (xr <= hi + 0.5)
        assert np.mean(expect == fr.occluded) >= 0.99

    def test_photoconsistency(self):
        spec = SceneSpec(checker_amp=0.0, noise_freq_range=(2.0, 4.0), octaves=1)
        scene = generate_scene(7, spec)
        fr = render_frame(scene, RIG, Pose.identity())
        vv, uu = np.mgrid[0 : RIG.height, 0 : RIG.width]
        xr = uu - fr.disparity
        sampled = ndimage.map_coordinates(fr.right, [vv, xr], order=1, mode="nearest")
        ok = fr.valid & ~fr.occluded
        # keep away from silhouettes, where linear sampling mixes surfaces
        edges = ndimage.maximum_filter(np.abs(np.gradient(fr.disparity, axis=1)) > 0.5, 5)
        ok &= ~edges
        assert ok.mean() > 0.5
        assert np.mean(np.abs(sampled - fr.left)[ok] <= 2 / 255) >= 0.99

    def test_texture_in_range(self):
        t = Texture(albedo=(0.2, 0.7), seed=3)
        s = np.random.default_rng(0).uniform(-3, 3, (2, 1000))
        vals = t(s[0], s[1])
        assert vals.min() >= 0.2 - 1e-12 and vals.max() <= 0.7 + 1e-12


class TestTrajectory:
    def test_bounds(self):
        for seed in range(5):
            traj = generate_trajectory(seed, 60)
            assert np.all(np.diff(traj.timestamps) > 0)
            np.testing.assert_allclose(np.diff(traj.timestamps), 1 / 30)
            for a, b in zip(traj.poses, traj.poses[1:]):
                rel = relative_pose(a, b)
                assert np.linalg.norm(b.center - a.center) <= 0.03 + 1e-12
                assert rotation_angle_deg(rel.rotation) <= 2.0 + 1e-9

    @pytest.mark.parametrize("params", [TrajectoryParams(drive=0.0),
                                        TrajectoryParams(max_translation=0.0, max_rotation_deg=0.0)])
    def test_no_motion(self, params):
        traj = generate_trajectory(1, 10, params)
        for p in traj.poses:
            np.testing.assert_allclose(p.matrix(), np.eye(4), atol=1e-12)

    def test_seeds_differ_and_repeat(self):
        a, b, c = (generate_trajectory(s, 10) for s in (1, 2, 1))
        assert any(not np.allclose(p.matrix(), q.matrix()) for p, q in zip(a.poses, b.poses))
        assert all(np.array_equal(p.matrix(), q.matrix()) for p, q in zip(a.poses, c.poses))

    def test_needs_a_frame(self):
        with pytest.raises(ValueError):
            generate_trajectory(0, 0)


class TestSequenceTransforms:
    def test_generation_deterministic(self, small_seq):
        again = generate_sequence(3, 8, default_rig(96, 72))
        for i in range(len(small_seq)):
            assert np.array_equal(small_seq.left(i), again.left(i))
            assert np.array_equal(small_seq.gt(i), again.gt(i))
            assert np.array_equal(small_seq.frames[i].pose.matrix(), again.frames[i].pose.matrix())

    def test_frame_skip(self, small_seq):
        assert frame_skip(small_seq, 1).frames == small_seq.frames
        sk = frame_skip(small_seq, 3)
        assert [f.timestamp for f in sk.frames] == [small_seq.frames[i].timestamp for i in (0, 3, 6)]
        assert len(frame_skip(small_seq, 50)) == 1
        with pytest.raises(ValueError):
            frame_skip(small_seq, 0)

    def test_frame_skip_thirty_by_six(self, small_seq):
        thirty = dataclasses.replace(small_seq, frames=(small_seq.frames * 4)[:30])
        assert len(frame_skip(thirty, 6)) == 5

    def test_pose_noise_zero(self, small_seq):
        out = pose_noise(small_seq, 0, 9)
        assert all(a.pose is b.pose for a, b in zip(out.frames, small_seq.frames))

    def test_pose_noise_bounds(self, small_seq):
        for level in (1, 4):
            out = pose_noise(small_seq, level, 11)
            for a, b in zip(small_seq.frames, out.frames):
                assert rotation_angle_deg(b.pose.rotation @ a.pose.rotation.T) <= 0.3 * level + 1e-9
                assert np.all(np.abs(b.pose.translation - a.pose.translation) <= 0.001 * level + 1e-15)

    def test_pose_noise_deterministic(self, small_seq):
        a, b, c = pose_noise(small_seq, 3, 5), pose_noise(small_seq, 3, 5), pose_noise(small_seq, 3, 6)
        assert all(np.array_equal(x.pose.matrix(), y.pose.matrix()) for x, y in zip(a.frames, b.frames))
        assert any(not np.allclose(x.pose.matrix(), y.pose.matrix()) for x, y in zip(a.frames, c.frames))
        with pytest.raises(ValueError):
            pose_noise(small_seq, -1, 0)


class TestFormats:
    def test_pfm_round_trip(self, tmp_path):
        data = np.random.default_rng(0).uniform(0.1, 90, (7, 11)).astype(np.float32)
        write_pfm(tmp_path / "d.pfm", data)
        assert np.array_equal(read_pfm(tmp_path / "d.pfm"), data)

    def test_pfm_layout(self, tmp_path):
        data = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], np.float32)
        write_pfm(tmp_path / "d.pfm", data)
        raw = (tmp_path / "d.pfm").read_bytes()
        assert raw.startswith(b"Pf\n2 3\n-1.0\n")
        assert np.frombuffer(raw[-24:], "<f4").tolist() == [5, 6, 3, 4, 1, 2]

    def test_pfm_invalid_become_zero(self, tmp_path):
        write_pfm(tmp_path / "d.pfm", np.array([[np.nan, -1.0, 2.0]]))
        assert read_pfm(tmp_path / "d.pfm").tolist() == [[0.0, 0.0, 2.0]]

    def test_pfm_big_endian_and_errors(self, tmp_path):
        data = np.arange(6, dtype=">f4").reshape(2, 3)
        (tmp_path / "b.pfm").write_bytes(b"Pf\n3 2\n1.0\n" + data[::-1].tobytes())
        np.testing.assert_array_equal(read_pfm(tmp_path / "b.pfm"), data)
        (tmp_path / "x.pfm").write_bytes(b"PF\n3 2\n-1.0\n" + bytes(72))
        with pytest.raises(FormatError):
            read_pfm(tmp_path / "x.pfm")
        (tmp_path / "t.pfm").write_bytes(b"Pf\n3 2\n-1.0\n" + bytes(20))
        with pytest.raises(FormatError):
            read_pfm(tmp_path / "t.pfm")

    def test_identity_pose_line(self):
        ts, pose = parse_pose_line("0.0 0 0 0 0 0 0 1")
        assert ts == 0.0
        np.testing.assert_array_equal(pose.matrix(), np.eye(4))

    def test_bad_quaternion(self, tmp_path):
        (tmp_path / "p.txt").write_text("# header\n0.0 0 0 0 0 0 0 1\n0.1 0 0 0 0 0 0 0.9\n")
        with pytest.raises(FormatError, match="line 3"):
            read_poses(tmp_path / "p.txt")
        with pytest.raises(FormatError):
            parse_pose_line("0 1 2 3")

    def test_pose_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        poses = [Pose(rotation_about_axis(rng.normal(size=3), rng.uniform(-3, 3)), rng.normal(size=3))
                 for _ in range(20)]
        write_poses(tmp_path / "p.txt", np.arange(20) / 30, poses)
        ts, back = read_poses(tmp_path / "p.txt")
        np.testing.assert_array_equal(ts, np.arange(20) / 30)
        for a, b in zip(poses, back):
            np.testing.assert_allclose(b.rotation, a.rotation, atol=1e-6)
            np.testing.assert_array_equal(b.translation, a.translation)

    @pytest.mark.parametrize("ext", [".pgm", ".png"])
    def test_image_round_trip(self, tmp_path, ext):
        img = np.random.default_rng(2).integers(0, 256, (9, 13), dtype=np.uint8)
        write_image(tmp_path / f"i{ext}", img)
        assert np.array_equal(read_image(tmp_path / f"i{ext}"), img)

    def test_bad_pgm(self, tmp_path):
        (tmp_path / "i.pgm").write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(FormatError):
            read_image(tmp_path / "i.pgm")


class TestManifest:
    def test_dataset_round_trip(self, tmp_path, small_seq):
        path = write_dataset(small_seq, tmp_path / "ds")
        back = read_manifest(path)
        assert back.rig == small_seq.rig and len(back) == len(small_seq)
        for i in range(len(small_seq)):
            assert np.array_equal(back.left(i), small_seq.left(i))
            assert np.array_equal(back.gt(i), small_seq.gt(i))
            assert np.array_equal(back.occluded(i), small_seq.frames[i].occluded)
            np.testing.assert_allclose(back.frames[i].pose.matrix(), small_seq.frames[i].pose.matrix(), atol=1e-6)

    def test_missing_file_named(self, tmp_path, small_seq):
        path = write_dataset(small_seq, tmp_path / "ds")
        m = read_manifest(path)
        (m.root / m.frames[2].right).unlink()
        with pytest.raises(FileNotFoundError, match="frame 2"):
            read_manifest(path, check_files=False).right(2)
        with pytest.raises(FileNotFoundError):
            read_manifest(path)

    def test_malformed(self, tmp_path):
        (tmp_path / "m.txt").write_text("# vidstereo manifest v1\nrig f=1\n")
        with pytest.raises(FormatError):
            read_manifest(tmp_path / "m.txt")
