# tests/data/make_fixtures.py

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

"""Regenerates the audio fixtures used by the decoder tests.

Each FLAC file has a WAV twin holding the same PCM samples, so the decoder
tests compare the two decoders against each other.
"""
import numpy as np
import soundfile as sf

rng = np.random.default_rng(7)
sr = 16000
t = np.arange(sr // 2) / sr


def tone(freqs, amp):
    x = sum(np.sin(2 * np.pi * f * t) for f in freqs) / len(freqs)
    return amp * x + 0.01 * rng.standard_normal(t.size)


mono = tone([440.0, 1210.0], 0.5)
sf.write("mono16.wav", mono, sr, subtype="PCM_16")
sf.write("mono16.flac", sf.read("mono16.wav", dtype="int16")[0], sr, subtype="PCM_16")

stereo = np.stack([tone([300.0], 0.4), tone([300.0, 2500.0], 0.4)], axis=1)
sf.write("stereo16.wav", stereo, sr, subtype="PCM_16")
sf.write("stereo16.flac", sf.read("stereo16.wav", dtype="int16")[0], sr, subtype="PCM_16")

sf.write("mono24.wav", mono, sr, subtype="PCM_24")
sf.write("mono24.flac", sf.read("mono24.wav", dtype="int32")[0], sr, subtype="PCM_24")

sf.write("silence16.flac", np.zeros(4000, dtype=np.int16), sr, subtype="PCM_16")
sf.write("float32.wav", mono.astype(np.float32), sr, subtype="FLOAT")
sf.write("rate8k.wav", mono[:4000], 8000, subtype="PCM_16")
