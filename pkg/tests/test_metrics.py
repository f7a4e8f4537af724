import numpy as np
import pytest

from zvrd.errors import ConfigurationError, ContractError
from zvrd.metrics import evaluate, psnr, ssim, warping_error
from zvrd.video import FixtureSpec, make_fixture

from conftest import random_frame


class TestPsnr:
    def test_identical_frames_capped(self, rng):
        a = random_frame(rng)
        assert psnr(a, a.copy()) == 99.0

    def test_known_mse_values(self):
        a = np.full((8, 8, 1), -1.0)  # 0.0 in display range
        b = np.full((8, 8, 1), -0.8)  # 0.1 in display range -> MSE 0.01
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)
        c = np.full((8, 8, 1), 1.0)  # unit error -> 0 dB
        assert psnr(a, c) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self, rng):
        a, b = random_frame(rng), random_frame(rng)
        assert psnr(a, b) == psnr(b, a)


class TestSsim:
    def test_identical_is_exactly_one(self, rng):
        a = random_frame(rng, 16, 16)
        assert ssim(a, a.copy()) == 1.0

    def test_inverted_checkerboard_strongly_negative(self):
        yy, xx = np.mgrid[:32, :32]
        board = np.where((yy + xx) % 2 == 0, 1.0, -1.0)[:, :, None]
        assert ssim(board, -board) < 0.1

    def test_constant_frames_closed_form(self):
        # variances vanish, leaving only the luminance term
        a = np.full((16, 16, 1), 0.2)
        b = np.full((16, 16, 1), 0.4)
        mu_a, mu_b = 0.6, 0.7  # display-range means
        c1 = 0.01**2
        expected = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
        assert ssim(a, b) == pytest.approx(expected, rel=1e-9)

    def test_window_size_guard(self):
        small = np.zeros((8, 8, 1))
        with pytest.raises(ConfigurationError):
            ssim(small, small)


class TestWarpingError:
    def test_static_video_zero(self):
        vid = make_fixture(FixtureSpec("static", (32, 32), 4, seed=1))
        assert warping_error(vid, vid) == 0.0

    def test_perfect_restoration_of_translation(self):
        vid = make_fixture(FixtureSpec("translating-texture", (64, 64), 3, (1.0, 0.0), seed=2))
        assert warping_error(vid, vid) < 1e-3

    def test_monotone_in_noise_level(self, rng):
        vid = make_fixture(FixtureSpec("static", (32, 32), 4, seed=5))
        values = []
        for sigma in (0.02, 0.06, 0.12):
            noisy = vid + sigma * rng.standard_normal(vid.shape)
            values.append(warping_error(noisy, vid))
        assert values[0] < values[1] < values[2]

    def test_duplicate_last_frame_bounded_effect(self):
        vid = make_fixture(FixtureSpec("translating-texture", (32, 32), 3, (1.0, 0.0), seed=3))
        base = warping_error(vid, vid)
        extended = np.concatenate([vid, vid[-1:]], axis=0)
        ext = warping_error(extended, extended)
        # averaging in one extra zero-residual pair can only shrink or match
        assert ext <= base + 1e-12

    def test_needs_two_frames(self):
        vid = make_fixture(FixtureSpec("static", (32, 32), 2, seed=1))
        with pytest.raises(ContractError):
            warping_error(vid[:1], vid[:1])

    def test_thread_cap_does_not_change_result(self, monkeypatch):
        vid = make_fixture(FixtureSpec("translating-texture", (32, 32), 4, (1.0, 0.5), seed=9))
        monkeypatch.setenv("ZVRD_THREADS", "1")
        serial = warping_error(vid, vid)
        monkeypatch.setenv("ZVRD_THREADS", "3")
        threaded = warping_error(vid, vid)
        assert serial == threaded

    def test_bad_thread_env_rejected(self, monkeypatch):
        vid = make_fixture(FixtureSpec("static", (32, 32), 2, seed=1))
        monkeypatch.setenv("ZVRD_THREADS", "many")
        with pytest.raises(ConfigurationError):
            warping_error(vid, vid)


class TestEvaluate:
    def test_report_fields_and_csv(self):
        vid = make_fixture(FixtureSpec("translating-texture", (32, 32), 3, (1.0, 0.0), seed=4))
        report = evaluate(vid, vid)
        assert report.mean_psnr == 99.0
        assert report.mean_ssim == 1.0
        assert report.warping_error < 5e-3  # 32px frames: proportionally larger border effects
        csv = report.to_csv()
        lines = csv.strip().splitlines()
        assert lines[0] == "frame,psnr,ssim"
        assert len(lines) == 1 + 3 + 3
        assert lines[-3].startswith("mean_psnr,")
        assert lines[-2].startswith("mean_ssim,")
        assert lines[-1].startswith("we_x100,")
        d = report.to_dict()
        assert d["we_x100"] == report.warping_error * 100.0

    def test_shape_mismatch_rejected(self, rng):
        a = np.zeros((2, 16, 16, 3))
        b = np.zeros((2, 16, 16, 1))
        with pytest.raises(ContractError):
            evaluate(a, b)
