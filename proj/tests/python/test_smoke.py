import math

import numpy as np
import pytest

import sizeseg


def numeric_grad(f, z, h=1e-5):
    g = np.zeros_like(z)
    it = np.nditer(z, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (f(zp) - f(zm)) / (2 * h)
    return g


def rel_err(a, n):
    scale = max(np.abs(a).max(), np.abs(n).max())
    return 0.0 if scale == 0 else np.abs(a - n).max() / scale


def test_divergences():
    assert sizeseg.kl_forward([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)
    assert sizeseg.kl_forward([0.5, 0.5], [1, 0]) == math.inf
    assert sizeseg.kl_reverse([0.5, 0.5], [1, 0]) is None
    assert sizeseg.kl_reverse([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.510826, abs=1e-6)
    assert sizeseg.uniform_over([0, 1], 3) == [0.5, 0.5, 0.0]


def test_corruption_and_mre_law():
    assert sizeseg.sigma_for_mre(0.08) == pytest.approx(0.100265, abs=1e-6)
    assert sizeseg.corrupt_sizes([0.2, 0.8], 0.0, 3) == [0.2, 0.8]
    out = sizeseg.corrupt_sizes([0.2, 0.0, 0.8], 0.3, 5)
    assert out[1] == 0.0
    assert sum(out) == pytest.approx(1.0, abs=1e-12)


def test_loss_gradients():
    rng = np.random.default_rng(0)
    z = rng.normal(0, 2, size=(4, 4, 3))
    v = [0.2, 0.5, 0.3]
    value, grad = sizeseg.size_target_loss(z, v, log_floor=0.0)
    assert grad.shape == z.shape
    n = numeric_grad(lambda x: sizeseg.size_target_loss(x, v, log_floor=0.0)[0], z)
    assert rel_err(grad, n) < 1e-6

    image = rng.uniform(size=(4, 4, 3))
    _, g = sizeseg.crf_loss(z, image)
    n = numeric_grad(lambda x: sizeseg.crf_loss(x, image)[0], z)
    assert rel_err(g, n) < 1e-6


def test_loss_examples():
    onehot = np.log(np.array([[[1.0, 1e-300], [1e-300, 1.0]]]))
    assert sizeseg.size_target_loss(onehot, [1, 0], log_floor=0.0)[0] == pytest.approx(math.log(2), abs=1e-9)
    assert sizeseg.fairness_loss([[0.9, 0.1]]) == pytest.approx(-0.325083, abs=1e-6)
    assert sizeseg.balance_loss([[0.5, 0.5]], [1.0, 0.0]) is None
    w = sizeseg.class_weights([3, 1, 7])
    assert sum(w) == pytest.approx(3.0)


def test_metrics():
    assert sizeseg.miou([0, 0, 0, 1], [0, 0, 1, 1], 2) == pytest.approx(7 / 12)
    assert sizeseg.dice([1, 1, 0, 0], [1, 0, 1, 0], 2) == pytest.approx(0.5)
    assert sizeseg.relative_error(0.25, 0.2) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        sizeseg.relative_error(0.1, 0.0)


def test_generate_and_probe():
    samples = sizeseg.generate("medical-like", n=3, seed=2, scribble_ratio=0.0)
    assert len(samples) == 3
    for s in samples:
        assert s["image"].shape == (64, 64, 3)
        assert sum(s["exact_sizes"]) == pytest.approx(1.0)
        assert s["seeds"]
    rows = sizeseg.loss_probe(8, 8, 4, seed=1)
    assert len(rows) >= 12
    assert all(r["max_rel_error"] < 1e-4 for r in rows)


def test_train_tiny(tmp_path):
    sizeseg.write_dataset(str(tmp_path / "train"), n=6, classes=3, seed=1)
    sizeseg.write_dataset(str(tmp_path / "val"), n=2, classes=3, seed=2)
    report = sizeseg.train(str(tmp_path / "train"), str(tmp_path / "val"),
                           '{"epochs": 1, "batch_size": 3, "mode": "size-crf"}', hidden=[2])
    assert report["mode"] == "size-crf"
    assert math.isfinite(report["final_loss"])
    with pytest.raises(ValueError):
        sizeseg.train(str(tmp_path / "train"), "", '{"bogus": 1}')


def test_grid_conversion():
    assert sizeseg.rectangles_to_fraction(5, "5x4") == 0.25
    assert sizeseg.rectangles_to_fraction(2.5, "3x3") == pytest.approx(0.2778, abs=1e-4)
    assert "quad-barrier-seeds" in sizeseg.supervision_modes()
