# tests/python/test_smoke.py

# Copyright 2026  The plcadapt Authors
#
# See ../../LICENSE for clarification regarding multiple authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
# WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
# MERCHANTABLITY OR NON-INFRINGEMENT.
# See the Apache 2 License for the specific language governing permissions and
# limitations under the License.

import os
import subprocess

import numpy as np
import pytest

import plcadapt

SMALL = {"n_levels": 2, "channel_multipliers": [1, 2], "base_channels": 3,
         "n_bottleneck_blocks": 1, "convs_per_level": 1}


def test_silence_maps_to_floor():
    mel = plcadapt.compute_logmel(np.zeros(16000))
    assert mel.shape == (100, 80)
    assert np.allclose(mel, plcadapt.silence_value())
    assert plcadapt.silence_value() == pytest.approx(-1.5)


def test_mask_is_deterministic_and_hits_the_rate():
    a = plcadapt.sample_loss_mask(3000, 0.3, 7, "utt")
    b = plcadapt.sample_loss_mask(3000, 0.3, 7, "utt")
    assert a == b
    assert sum(length for _, length in a) == 900
    assert plcadapt.sample_loss_mask(3000, 0.3, 8, "utt") != a


def test_apply_mask_zero_fills_lost_frames():
    rng = np.random.default_rng(0)
    mel = rng.normal(size=(20, 8))
    out = plcadapt.apply_mask(mel, [(2, 3), (10, 1)])
    lost = [2, 3, 4, 10]
    assert np.all(out[lost] == 0.0)
    kept = [t for t in range(20) if t not in lost]
    assert np.array_equal(out[kept], mel[kept])
    with pytest.raises(plcadapt.DataError):
        plcadapt.apply_mask(mel, [(5, 2), (7, 1)])  # adjacent spans


def test_adapter_preserves_shape_and_counts_params(tmp_path):
    adapter = plcadapt.create_adapter(SMALL, seed=1)
    assert adapter.num_params == plcadapt.count_params(SMALL)
    for frames in (1, 7, 33):
        mel = np.random.default_rng(frames).normal(size=(frames, 80))
        out = adapter.adapt(mel)
        assert out.shape == (frames, 80)
        assert np.isfinite(out).all()
    path = tmp_path / "a.ckpt"
    adapter.save(str(path))
    again = plcadapt.Adapter.load(str(path))
    assert again.fingerprint == adapter.fingerprint
    assert plcadapt.adapter_config(again)["base_channels"] == 3


def test_default_budget():
    assert 6_000_000 <= plcadapt.count_params() <= 9_000_000


def test_bad_adapter_config_is_a_config_error():
    with pytest.raises(plcadapt.ConfigError):
        plcadapt.create_adapter({"base_channels": 0})


def test_wer_and_schedule():
    w = plcadapt.wer("a b", "x y z w v")
    assert w["wer"] == pytest.approx(2.5)
    assert w["substitutions"] == 2 and w["insertions"] == 3
    assert plcadapt.lr_at_epoch(3) == pytest.approx(0.0005 * 0.9 ** 3)
    assert plcadapt.compose_loss(0.1, 0.65, 0.5) == pytest.approx(0.1 * 0.65 + 0.9 * 0.5)


def test_mel_file_round_trip(tmp_path):
    mel = np.random.default_rng(3).normal(size=(12, 80)).astype(np.float32).astype(np.float64)
    plcadapt.write_mel(str(tmp_path / "x.mel"), mel)
    assert np.array_equal(plcadapt.read_mel(str(tmp_path / "x.mel")), mel)


def test_cli_in_process_and_standalone(tmp_path):
    assert plcadapt.run_cli(["synth", "-o", str(tmp_path / "c"), "-n", "2", "--seed", "1"]) == 0
    assert (tmp_path / "c" / "manifest.jsonl").exists()
    assert plcadapt.run_cli(["evaluate"]) != 0
    exe = os.environ.get("PLCADAPT_CLI")
    if exe:
        done = subprocess.run([exe, "--help"], capture_output=True, text=True)
        assert done.returncode == 0
        for verb in ("corrupt", "train-backend", "train", "evaluate", "infer", "report"):
            assert verb in done.stdout
