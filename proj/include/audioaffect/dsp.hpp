// Copyright 2026  audioaffect authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Signal chain from decoded audio to normalized spectrogram tiles:
// decode and mixdown, band-limited resampling to 16 kHz, non-overlapping
// one-second chunks, and a Hann-windowed STFT (1024-point FFT, hop 512)
// reduced to a 512 x 32 log-magnitude tile scaled into [-1, 1].

#ifndef AUDIOAFFECT_DSP_HPP_
#define AUDIOAFFECT_DSP_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace audioaffect::dsp {

inline constexpr int kTargetRate = 16000;
inline constexpr int kChunkSamples = 16000;
inline constexpr int kFftSize = 1024;
inline constexpr int kHop = 512;
inline constexpr int kPaddedSamples = 16896;  // (32 - 1) * 512 + 1024
inline constexpr int kBins = 512;             // one-sided spectrum without Nyquist
inline constexpr int kFrames = 32;
inline constexpr int kMinSourceRate = 8000;

struct AudioClip {
  std::vector<float> samples;  // mono, |x| <= 1
  int sample_rate = 0;
  std::string utterance_id;
};

/// Decodes a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples with
/// any channel count; channels are mean-mixed to mono.
AudioClip read_wav(const std::filesystem::path& path, std::string utterance_id = {});

/// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] before quantization.
void write_wav_pcm16(const std::filesystem::path& path, std::span<const float> samples,
                     int sample_rate);

/// Band-limited (Kaiser-windowed sinc) resampling to 16 kHz. Output length is
/// round(n * 16000 / rate). A 16 kHz clip is returned unchanged.
AudioClip resample_to_16k(const AudioClip& clip);

/// Splits a 16 kHz clip into consecutive 16000-sample chunks. A trailing
/// remainder shorter than one second is dropped.
std::vector<std::vector<float>> chunk_1s(const AudioClip& clip);

struct NormalizationStats {
  double log_floor = 0.0;
  double log_ceil = 1.0;
};

/// Row-major bins x frames grid; value(bin, frame) = values[bin * kFrames + frame].
struct SpectrogramTile {
  std::vector<float> values;
  std::string utterance_id;
  int chunk_index = 0;

  float at(int bin, int frame) const {
    return values[static_cast<std::size_t>(bin) * kFrames + frame];
  }
};

/// log(1 + |X|) for every (bin, frame) of one chunk, same layout as a tile.
std::vector<double> log_magnitude(std::span<const float> chunk);

/// Normalized tile: clamp(2 (log(1+|X|) - floor) / (ceil - floor) - 1, -1, 1).
SpectrogramTile stft_tile(std::span<const float> chunk, const NormalizationStats& stats);

/// Min and max of log(1+|X|) over all frames of all chunks; a degenerate
/// range is widened by 1e-6.
NormalizationStats compute_norm_stats(std::span<const std::vector<float>> chunks);

}  // namespace audioaffect::dsp

#endif  // AUDIOAFFECT_DSP_HPP_
