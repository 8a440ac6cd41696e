import csv

import numpy as np
import pytest

from lowlight import imgcore, stats
from tests.conftest import write_uniform_pngs


# --- per-image metrics ---


def test_constant_gray_stats():
    img = np.full((32, 32, 3), 0.5)
    st = stats.compute_stats(img)
    assert st.mean_luminance == pytest.approx(0.5, abs=1e-12)
    assert st.contrast == 0.0
    assert st.entropy == 0.0
    assert st.sharpness == 0.0
    assert st.mean_lab[1] == pytest.approx(0.5, abs=1e-6)
    assert st.mean_lab[2] == pytest.approx(0.5, abs=1e-6)


def test_entropy_uniform_histogram_is_eight_bits():
    vals = (np.arange(256) + 0.5) / 256.0
    gray = np.tile(vals, 256).reshape(256, 256)
    assert stats.shannon_entropy(gray) == pytest.approx(8.0, abs=1e-12)


def test_entropy_never_exceeds_eight_bits(rng):
    for _ in range(5):
        assert stats.shannon_entropy(rng.random((50, 50))) <= 8.0 + 1e-12


def test_checkerboard_contrast_and_sharpness():
    board = np.indices((16, 16)).sum(axis=0) % 2
    st = stats.compute_stats(board.astype(np.float64))
    assert st.contrast == pytest.approx(0.5, abs=1e-12)
    assert st.sharpness > 0.0


def test_sharpness_constant_and_tiny_inputs():
    assert stats.laplacian_sharpness(np.full((8, 8), 0.3)) == 0.0
    assert stats.laplacian_sharpness(np.full((2, 5), 0.3)) == 0.0


def test_rotation_invariance(rng):
    img = rng.random((24, 36, 3))
    a = stats.compute_stats(img)
    b = stats.compute_stats(np.rot90(img).copy())
    assert b.mean_luminance == pytest.approx(a.mean_luminance, abs=1e-12)
    assert b.contrast == pytest.approx(a.contrast, abs=1e-12)
    assert b.entropy == pytest.approx(a.entropy, abs=1e-12)
    assert b.sharpness == pytest.approx(a.sharpness, abs=1e-6)


def test_stats_as_row_keys():
    st = stats.compute_stats(np.full((8, 8, 3), 0.4))
    assert tuple(st.as_row()) == stats.STATS_COLUMNS[1:]


# --- dataset report ---


def test_dataset_report_row_count_and_hists(tmp_path, rng):
    directory = tmp_path / "imgs"
    directory.mkdir()
    for i in range(5):
        imgcore.save_image(directory / f"im_{i}.png", rng.random((16, 16, 3), dtype=np.float32))
    rows, hists = stats.dataset_report(directory)
    assert len(rows) == 5
    assert [r["filename"] for r in rows] == sorted(r["filename"] for r in rows)
    assert set(hists) == set(stats.HIST_METRICS)
    for counts, edges in hists.values():
        assert len(counts) == stats.HIST_BINS
        assert len(edges) == stats.HIST_BINS + 1
        assert int(counts.sum()) == 5


def test_dataset_report_empty_directory(tmp_path):
    (tmp_path / "imgs").mkdir()
    with pytest.raises(ValueError, match="no images"):
        stats.dataset_report(tmp_path / "imgs")


def test_dataset_report_deterministic_across_copies(tmp_path, rng):
    imgs = [rng.random((12, 12, 3), dtype=np.float32) for _ in range(4)]
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        for i, img in enumerate(imgs):
            imgcore.save_image(d / f"x_{i}.png", img)
    _, ha = stats.dataset_report(tmp_path / "a")
    _, hb = stats.dataset_report(tmp_path / "b")
    for metric in stats.HIST_METRICS:
        np.testing.assert_array_equal(ha[metric][0], hb[metric][0])


def test_dataset_report_bimodal_luminance(tmp_path):
    d = tmp_path / "imgs"
    write_uniform_pngs(d, 3, 0.1, size=8, prefix="dark")
    write_uniform_pngs(d, 3, 0.9, size=8, prefix="bright")
    _, hists = stats.dataset_report(d)
    counts, edges = hists["mean_luminance"]
    occupied = np.nonzero(counts)[0]
    assert len(occupied) == 2
    assert edges[occupied[0]] < 0.2 and edges[occupied[-1]] > 0.8


def test_write_stats_and_hist_csv(tmp_path, rng):
    d = tmp_path / "imgs"
    d.mkdir()
    imgcore.save_image(d / "one.png", rng.random((8, 8, 3), dtype=np.float32))
    rows, hists = stats.dataset_report(d)
    stats.write_stats_csv(rows, tmp_path / "stats.csv")
    with open(tmp_path / "stats.csv", newline="") as fh:
        parsed = list(csv.reader(fh))
    assert tuple(parsed[0]) == stats.STATS_COLUMNS
    assert len(parsed) == 2
    stats.write_hist_csv(hists, tmp_path / "hist.csv")
    with open(tmp_path / "hist.csv", newline="") as fh:
        hist_rows = list(csv.reader(fh))
    assert hist_rows[0] == ["metric", "bin_left", "bin_right", "count"]
    assert len(hist_rows) == 1 + len(stats.HIST_METRICS) * stats.HIST_BINS


# --- splits ---


def make_names(directory, n):
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        (directory / f"f_{i:04d}.png").touch()


def test_make_splits_thousand_images(tmp_path):
    d = tmp_path / "imgs"
    make_names(d, 1000)
    splits = stats.make_splits(d)
    assert len(splits["train"]) == 800
    assert len(splits["val"]) == 100
    assert len(splits["test"]) == 100
    everything = splits["train"] + splits["val"] + splits["test"]
    assert len(set(everything)) == 1000


def test_make_splits_seed_stability(tmp_path):
    d = tmp_path / "imgs"
    make_names(d, 50)
    a = stats.make_splits(d, seed=7)
    b = stats.make_splits(d, seed=7)
    assert a == b
    c = stats.make_splits(d, seed=8)
    assert c != a  # 50 images make a collision vanishingly unlikely


def test_make_splits_partition_any_ratio(tmp_path):
    d = tmp_path / "imgs"
    make_names(d, 13)
    splits = stats.make_splits(d, ratios=(3, 1, 1))
    sizes = [len(splits[k]) for k in ("train", "val", "test")]
    assert sizes[0] == 7 and sizes[1] == 2 and sizes[2] == 4
    assert sum(sizes) == 13
    union = set(splits["train"]) | set(splits["val"]) | set(splits["test"])
    assert len(union) == 13


def test_make_splits_too_few_images(tmp_path):
    d = tmp_path / "imgs"
    make_names(d, 9)
    with pytest.raises(ValueError, match="at least"):
        stats.make_splits(d)


def test_make_splits_bad_ratios(tmp_path):
    d = tmp_path / "imgs"
    make_names(d, 20)
    with pytest.raises(ValueError, match="ratios"):
        stats.make_splits(d, ratios=(1, 2))
    with pytest.raises(ValueError, match="ratios"):
        stats.make_splits(d, ratios=(-1, 1, 1))
    with pytest.raises(ValueError, match="ratios"):
        stats.make_splits(d, ratios=(0, 0, 0))


def test_manifest_round_trip(tmp_path):
    splits = {
        "train": ["a.png", "b.png"],
        "val": ["c.png"],
        "test": ["d.png"],
    }
    path = tmp_path / "manifest.txt"
    stats.write_manifest(splits, path)
    assert stats.read_manifest(path) == splits


def test_manifest_errors(tmp_path):
    path = tmp_path / "manifest.txt"
    path.write_text("[bogus]\na.png\n")
    with pytest.raises(ValueError, match="unknown manifest section"):
        stats.read_manifest(path)
    path.write_text("a.png\n[train]\n")
    with pytest.raises(ValueError, match="before any"):
        stats.read_manifest(path)
