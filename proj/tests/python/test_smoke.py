import math
import pathlib

import numpy as np
import pytest

import nlekit

ROOT = pathlib.Path(__file__).resolve().parents[2]


def test_divergence_pins():
    a, b = np.array([0.5, 0.5]), np.array([0.9, 0.1])
    assert nlekit.kld(a, b) == pytest.approx(0.510826, abs=5e-7)
    assert nlekit.skld(a, b) == pytest.approx(0.439445, abs=5e-7)
    assert nlekit.mutual_distance(np.stack([a, b])) == pytest.approx(0.219722, abs=5e-7)
    assert nlekit.smoothed_l1(0.6, 0.2) == pytest.approx(0.08)
    assert nlekit.smoothed_l1(2.3, 0.5) == pytest.approx(1.3)


def test_loss_components():
    targets = np.array([[0.5, 0.5], [0.9, 0.1]])
    student = np.full((2, 2), 0.5)
    value, parts = nlekit.nle_rtsl_loss(targets, student, 10.0)
    assert value == pytest.approx(parts["nle"] + 10.0 * parts["rtsl"])
    assert parts["rtsl"] == pytest.approx(0.5 * 0.219722**2, rel=1e-5)


def test_log_mel_shape():
    sr = 44100
    t = np.arange(sr // 2) / sr
    frames = nlekit.log_mel(np.sin(2 * math.pi * 440 * t), sr)
    win, hop = round(0.025 * sr), round(0.010 * sr)
    assert frames.shape == ((len(t) - win) // hop + 1, 128)
    assert np.isfinite(frames).all()


def test_embeddings():
    rng = np.random.default_rng(0)
    logits = np.concatenate([rng.normal(3, 0.3, (15, 3)) * [1, 0, 0], rng.normal(3, 0.3, (15, 3)) * [0, 0, 1]])
    p = np.exp(logits) / np.exp(logits).sum(1, keepdims=True)
    d = nlekit.pairwise_skld(p)
    assert np.array_equal(d, d.T) and np.all(np.diag(d) == 0)
    coords = nlekit.tsne(p, perplexity=10, iters=1000, seed=1)
    labels = ["a"] * 15 + ["b"] * 15
    assert nlekit.silhouette(coords, labels) > 0.5
    assert nlekit.pca(p, 2).shape == (30, 2)


def test_config_validation():
    cfg = nlekit.load_config(ROOT / "configs" / "tiny.json", ["train.nle_rtsl.lambda=-1"])
    problems = nlekit.validate_config(cfg)
    assert any(s.startswith("train.nle_rtsl.lambda") for s in problems)
    assert nlekit.validate_config(ROOT / "configs" / "default.json") == []


def test_tiny_pipeline(tmp_path):
    cfg = nlekit.load_config(ROOT / "configs" / "tiny.json", [f"workdir={tmp_path / 'run'}", "seeds=[1]"])
    p = nlekit.Pipeline(cfg)
    with pytest.raises(nlekit.NlekitError) as err:
        p.learn_nle(1)
    assert err.value.kind == "dependency"
    p.run_all()
    rows = {r["name"]: r for r in p.evaluate(1)}
    assert set(rows) == {"source-only", "all-devices", "one-hot", "ts-paired", "nle", "nle-rtsl"}
    seed_dir = pathlib.Path(p.workdir) / "seed-1"
    cols = nlekit.nle_columns(seed_dir / "nle_matrix.nlek")
    assert np.all(cols > 0) and np.allclose(cols.sum(0), 1, atol=1e-6)
    assert rows["nle-rtsl"]["model_digest"] == nlekit.model_digest(seed_dir / "nle_rtsl_model.nlek")
