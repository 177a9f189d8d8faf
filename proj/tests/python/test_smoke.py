# Copyright 2026  audioaffect authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Smoke tests for the Python bindings."""

import os
import subprocess

import numpy as np
import pytest

import audioaffect as aa


def test_tile_shape_and_range():
    t = np.arange(16000) / 16000.0
    chunk = (0.5 * np.sin(2 * np.pi * 500.0 * t)).astype(np.float32)
    floor, ceil = aa.compute_norm_stats([chunk])
    tile = aa.stft_tile(chunk, floor, ceil)
    assert tile.shape == (aa.TILE_BINS, aa.TILE_FRAMES) == (512, 32)
    assert tile.min() >= -1.0 and tile.max() <= 1.0
    # 500 Hz sits on bin 32.
    assert np.argmax(tile[:, 10]) == 32


def test_chunking_and_resampling():
    x = np.random.default_rng(1).uniform(-1, 1, 40000).astype(np.float32)
    # 16 kHz input passes through unchanged, element for element.
    np.testing.assert_array_equal(aa.resample_to_16k(x, 16000), x)
    np.testing.assert_array_equal(aa.chunk_1s(x)[1], x[16000:32000])
    assert len(aa.chunk_1s(np.zeros(40000, np.float32))) == 2
    assert len(aa.resample_to_16k(np.zeros(48000, np.float32), 48000)) == 16000
    with pytest.raises(aa.AudioAffectError):
        aa.stft_tile(np.zeros(100, np.float32), 0.0, 1.0)


def test_equilibrium_update():
    k, m = aa.update_equilibrium(0.0, 0.7, 0.001, 0.5, 0.2)
    assert k == pytest.approx(1.5e-4, abs=1e-15)
    assert m == pytest.approx(0.65, abs=1e-15)
    assert aa.update_equilibrium(1.0, 0.7, 0.001, 0.5, 0.2)[0] == 1.0


def test_ccc_against_numpy():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, 50)
    y = 0.6 * x + rng.uniform(-0.3, 0.3, 50) + 0.1
    cov = np.mean((x - x.mean()) * (y - y.mean()))
    want = 2 * cov / (x.var() + y.var() + (x.mean() - y.mean()) ** 2)
    assert aa.ccc(x, y) == pytest.approx(want, abs=1e-12)
    assert aa.ccc(x, x) == pytest.approx(1.0)


def test_median_and_boxplot():
    assert aa.aggregate_median([(0.1, 0.9), (0.5, -0.2), (0.3, 0.0)]) == (0.3, 0.0)
    assert aa.aggregate_median([(0.1, 0.2), (0.3, 0.4)]) == pytest.approx((0.2, 0.3))
    values = np.array([0.2, 0.5, 0.1, 0.9, 0.4])
    box = aa.boxplot_stats(values)
    assert box["median"] == np.median(values)
    assert box["q1"] == pytest.approx(np.quantile(values, 0.25))
    assert box["q3"] == pytest.approx(np.quantile(values, 0.75))


def test_synthetic_corpus_round_trip(tmp_path):
    manifest = aa.generate_synthetic_corpus(4, 9, tmp_path / "corpus")
    entries = aa.parse_manifest(manifest)
    assert len(entries) == 4
    for e in entries:
        assert -1.0 <= e["arousal"] <= 1.0 and -1.0 <= e["valence"] <= 1.0
        samples, rate = aa.read_wav(tmp_path / "corpus" / e["audio_path"])
        assert rate == 16000
        assert 2 <= len(samples) // 16000 <= 4
        assert np.abs(samples).max() > 0.01


@pytest.mark.skipif("AUDIOAFFECT_CLI" not in os.environ, reason="command-line tool not given")
def test_predict_after_tiny_training(tmp_path):
    cli = [os.environ["AUDIOAFFECT_CLI"], "--workdir", str(tmp_path)]
    quick = ["--seed", "2", "--began-epochs", "1", "--began-batch", "8", "--head-epochs", "2"]

    def run(*args):
        subprocess.run(cli + list(args), check=True, capture_output=True)

    run("synth-corpus", "-n", "3", "--corpus-seed", "2", "-o", "corpus")
    run("preprocess", "--manifest", "corpus/manifest.csv", "-o", "store")
    run("train-began", *quick, "--store", "store", "-o", "began")
    run("train-head", *quick, "--store", "store", "--manifest", "corpus/manifest.csv",
        "--began", "began", "-o", "head")

    wav = tmp_path / "corpus" / aa.parse_manifest(tmp_path / "corpus" / "manifest.csv")[0]["audio_path"]
    doc = aa.predict_wav(wav, tmp_path / "began", tmp_path / "head")
    arousal = sorted(c["arousal"] for c in doc["chunks"])
    assert doc["aggregator"] == "median"
    assert doc["arousal"] == pytest.approx(float(np.median(arousal)))

    predictor = aa.Predictor(tmp_path / "began", tmp_path / "head")
    samples, _ = aa.read_wav(wav)
    floor, ceil = predictor.stats
    tile = aa.stft_tile(aa.chunk_1s(samples)[0], floor, ceil)
    assert predictor.predict_tile(tile) == pytest.approx(
        (doc["chunks"][0]["arousal"], doc["chunks"][0]["valence"]), abs=1e-6)
