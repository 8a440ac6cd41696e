import numpy as np
import pytest

from lowlight import imgcore


def test_ensure_image_converts_to_float64():
    img = np.zeros((4, 4, 3), dtype=np.float32)
    out = imgcore.ensure_image(img)
    assert out.dtype == np.float64


def test_ensure_image_rejects_wrong_rank_and_channels():
    with pytest.raises(ValueError):
        imgcore.ensure_image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        imgcore.ensure_image(np.zeros((4, 4, 4)))
    with pytest.raises(ValueError):
        imgcore.ensure_image(np.zeros((4, 4, 3)), channels=1)


def test_ensure_image_single_channel_squeezes():
    out = imgcore.ensure_image(np.zeros((4, 4, 1)), channels=1)
    assert out.shape == (4, 4)


# --- color transforms ---


def test_ycrcb_neutral_on_gray():
    gray = np.full((5, 5, 3), 0.25, dtype=np.float32)
    ycc = imgcore.to_ycrcb(gray)
    np.testing.assert_allclose(ycc[:, :, 0], 0.25, atol=1e-6)
    np.testing.assert_allclose(ycc[:, :, 1], 0.5, atol=1e-6)
    np.testing.assert_allclose(ycc[:, :, 2], 0.5, atol=1e-6)


def test_ycrcb_round_trip(rng):
    img = rng.random((16, 16, 3)).astype(np.float32)
    back = imgcore.from_ycrcb(imgcore.to_ycrcb(img))
    np.testing.assert_allclose(back, img, atol=1e-5)


def test_lab_neutral_on_gray():
    gray = np.full((4, 4, 3), 0.5, dtype=np.float32)
    lab = imgcore.to_lab(gray)
    np.testing.assert_allclose(lab[:, :, 1], 0.5, atol=1e-6)
    np.testing.assert_allclose(lab[:, :, 2], 0.5, atol=1e-6)
    assert 0.0 < float(lab[0, 0, 0]) < 1.0


def test_lab_white_and_black():
    white = imgcore.to_lab(np.ones((1, 1, 3), dtype=np.float32))
    black = imgcore.to_lab(np.zeros((1, 1, 3), dtype=np.float32))
    np.testing.assert_allclose(white[0, 0, 0], 1.0, atol=1e-5)
    np.testing.assert_allclose(black[0, 0, 0], 0.0, atol=1e-5)


def test_lab_round_trip(rng):
    img = (0.05 + 0.9 * rng.random((12, 12, 3))).astype(np.float32)
    back = imgcore.from_lab(imgcore.to_lab(img))
    np.testing.assert_allclose(back, img, atol=2e-4)


def test_hsv_known_values():
    red = np.zeros((1, 1, 3), dtype=np.float32)
    red[0, 0, 0] = 1.0
    hsv = imgcore.to_hsv(red)
    np.testing.assert_allclose(hsv[0, 0], [0.0, 1.0, 1.0], atol=1e-6)
    gray = np.full((1, 1, 3), 0.3, dtype=np.float32)
    hsv = imgcore.to_hsv(gray)
    np.testing.assert_allclose(hsv[0, 0, 1], 0.0, atol=1e-6)
    np.testing.assert_allclose(hsv[0, 0, 2], 0.3, atol=1e-6)


def test_hsv_round_trip(rng):
    img = rng.random((16, 16, 3)).astype(np.float32)
    back = imgcore.from_hsv(imgcore.to_hsv(img))
    np.testing.assert_allclose(back, img, atol=1e-5)


# --- patch planning and blending ---


def test_plan_patches_covers_and_steps():
    grid = imgcore.plan_patches(512, 512, 256, 64)
    assert grid.patch_size == 256
    assert grid.overlap == 64
    xs = sorted({x for x, _ in grid.origins})
    assert xs[0] == 0 and xs[-1] == 512 - 256
    # stride is patch - overlap except for the clamped final origin
    assert xs[1] - xs[0] == 192


def test_plan_patches_small_image_degrades():
    grid = imgcore.plan_patches(40, 30, 256, 64)
    assert grid.patch_size == 30
    assert grid.overlap < grid.patch_size
    assert (0, 0) in grid.origins


def test_plan_patches_rejects_bad_dims():
    with pytest.raises(ValueError):
        imgcore.plan_patches(0, 10, 8, 2)
    with pytest.raises(ValueError):
        imgcore.plan_patches(10, 10, 8, -1)


def test_hann_window_floor_and_degenerate():
    win = imgcore.hann_window(64)
    assert win.shape == (64, 64)
    assert float(win.min()) >= imgcore.HANN_FLOOR
    assert float(win.max()) <= 1.0
    np.testing.assert_allclose(imgcore.hann_window(1), np.ones((1, 1)))


def test_blend_patches_identity_on_shared_content(rng):
    # patches cut from one image must blend back into that image
    img = rng.random((96, 128, 3)).astype(np.float32)
    grid = imgcore.plan_patches(128, 96, 48, 16)
    patches = []
    ps = grid.patch_size
    for x, y in grid.origins:
        patches.append(((x, y), img[y : y + ps, x : x + ps]))
    out = imgcore.blend_patches(patches, 128, 96)
    np.testing.assert_allclose(out, img, atol=1e-6)


def test_blend_patches_rejects_uncovered_pixels():
    patch = np.zeros((8, 8, 3))
    with pytest.raises(ValueError):
        imgcore.blend_patches([((0, 0), patch)], 32, 32)


def test_blend_patches_rejects_empty():
    with pytest.raises(ValueError):
        imgcore.blend_patches([], 8, 8)


# --- raster I/O ---


def test_save_load_round_trip(tmp_path, rng):
    img = rng.random((20, 24, 3)).astype(np.float32)
    path = tmp_path / "x.png"
    imgcore.save_image(path, img)
    back = imgcore.load_image(path)
    assert back.dtype == np.float32
    assert back.shape == img.shape
    # 8-bit quantization bound
    np.testing.assert_allclose(back, img, atol=0.5 / 255.0 + 1e-6)


def test_save_image_gray_promotes_to_rgb(tmp_path):
    imgcore.save_image(tmp_path / "g.png", np.full((6, 6), 0.5, dtype=np.float32))
    back = imgcore.load_image(tmp_path / "g.png")
    assert back.shape == (6, 6, 3)


def test_load_image_missing_file(tmp_path):
    with pytest.raises(OSError):
        imgcore.load_image(tmp_path / "absent.png")
