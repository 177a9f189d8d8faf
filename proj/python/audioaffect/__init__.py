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

"""Python bindings for the audioaffect pipeline."""

import json as _json

from ._core import (  # noqa: F401
    TILE_BINS,
    TILE_FRAMES,
    AudioAffectError,
    Predictor,
    aggregate_median,
    boxplot_stats,
    ccc,
    chunk_1s,
    compute_norm_stats,
    generate_synthetic_corpus,
    parse_manifest,
    pixel_loss,
    read_wav,
    resample_to_16k,
    stft_tile,
    update_equilibrium,
)
from ._core import predict_wav as _predict_wav


def predict_wav(wav, began_dir, head_dir):
    """Per-chunk and median-aggregated (arousal, valence) for one WAV file."""
    return _json.loads(_predict_wav(str(wav), str(began_dir), str(head_dir)))
