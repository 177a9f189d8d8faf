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

#include "audioaffect/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "audioaffect/error.hpp"

namespace audioaffect::dsp {

namespace {

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

// Resampler design. The cutoff sits at 0.46875 of the lower of the two rates
// (7.5 kHz for any downsampling to 16 kHz) and the Kaiser transition band
// ends just below the output Nyquist frequency.
constexpr double kCutoffRatio = 0.46875;
constexpr double kZeroCrossings = 48.0;
constexpr double kKaiserBeta = 8.6;

double kaiser(double r) {
  if (std::abs(r) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

class FftPlan {
 public:
  FftPlan() {
    std::vector<double> in(kFftSize);
    std::vector<fftw_complex> out(kFftSize / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(kFftSize, in.data(), out.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_PRESERVE_INPUT);
    if (plan_ == nullptr) throw Error("fftw plan creation failed");
  }
  ~FftPlan() { fftw_destroy_plan(plan_); }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  // fftw_execute_dft_r2c is re-entrant for a shared plan.
  void run(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(plan_, in, out); }

 private:
  fftw_plan plan_;
};

const FftPlan& fft_plan() {
  static const FftPlan plan;
  return plan;
}

const std::vector<double>& hann_window() {
  static const std::vector<double> window = [] {
    std::vector<double> w(kFftSize);
    for (int n = 0; n < kFftSize; ++n)
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / kFftSize);
    return w;
  }();
  return window;
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path, std::string utterance_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::size_t size = le32(hdr + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError("truncated fmt chunk: " + path.string());
      format = le16(hdr + 8);
      channels = le16(hdr + 10);
      rate = le32(hdr + 12);
      bits = le16(hdr + 22);
      if (format == kFormatExtensible) {
        if (avail < 26) throw FormatError("truncated extensible fmt chunk: " + path.string());
        format = le16(hdr + 8 + 24);
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (channels == 0 || rate == 0) throw FormatError("missing fmt chunk: " + path.string());
  if (data == nullptr) throw FormatError("missing data chunk: " + path.string());
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32)
    throw FormatError("unsupported wav encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits): " + path.string());

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw FormatError("wav has no samples: " + path.string());

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.utterance_id = std::move(utterance_id);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + c * (bits / 8);
      double v;
      if (pcm16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        float x;
        const std::uint32_t w = le32(p);
        std::memcpy(&x, &w, 4);
        v = std::isfinite(x) ? std::clamp(static_cast<double>(x), -1.0, 1.0) : 0.0;
      }
      acc += v;
    }
    clip.samples[f] = static_cast<float>(acc / channels);
  }
  return clip;
}

void write_wav_pcm16(const std::filesystem::path& path, std::span<const float> samples,
                     int sample_rate) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (float s : samples) {
    const double v = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(std::min(v * 32768.0, 32767.0)));
    put16(out, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

AudioClip resample_to_16k(const AudioClip& clip) {
  if (clip.sample_rate < kMinSourceRate)
    throw FormatError("sample rate " + std::to_string(clip.sample_rate) +
                      " Hz is below the supported minimum of 8000 Hz");
  if (clip.samples.empty()) throw FormatError("cannot resample an empty clip");
  if (clip.sample_rate == kTargetRate) return clip;

  const long long g = std::gcd(clip.sample_rate, kTargetRate);
  const long long up = kTargetRate / g;
  const long long down = clip.sample_rate / g;
  const auto n = static_cast<long long>(clip.samples.size());
  const long long out_len = (2 * n * up + down) / (2 * down);

  // Kernel in units of input samples.
  const double fc = kCutoffRatio * std::min(clip.sample_rate, kTargetRate) / clip.sample_rate;
  const double half = kZeroCrossings / (2.0 * fc);
  const int reach = static_cast<int>(std::ceil(half));
  const int taps = 2 * reach;

  // One tap set per fractional phase p/up; tap j multiplies x[i0 + j - reach + 1].
  std::vector<double> table(static_cast<std::size_t>(up) * taps);
  for (long long p = 0; p < up; ++p) {
    double* row = table.data() + p * taps;
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    double sum = 0.0;
    for (int j = 0; j < taps; ++j) {
      const double tau = frac - static_cast<double>(j - reach + 1);
      row[j] = 2.0 * fc * sinc(2.0 * fc * tau) * kaiser(tau / half);
      sum += row[j];
    }
    for (int j = 0; j < taps; ++j) row[j] /= sum;
  }

  AudioClip out;
  out.sample_rate = kTargetRate;
  out.utterance_id = clip.utterance_id;
  out.samples.resize(static_cast<std::size_t>(out_len));
  const float* x = clip.samples.data();
  for (long long m = 0; m < out_len; ++m) {
    const long long num = m * down;
    const long long i0 = num / up;
    const double* row = table.data() + (num % up) * taps;
    const long long first = i0 - reach + 1;
    const int j_lo = static_cast<int>(std::max<long long>(0, -first));
    const int j_hi = static_cast<int>(std::min<long long>(taps, n - first));
    double acc = 0.0;
    for (int j = j_lo; j < j_hi; ++j) acc += row[j] * x[first + j];
    out.samples[static_cast<std::size_t>(m)] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

std::vector<std::vector<float>> chunk_1s(const AudioClip& clip) {
  if (clip.sample_rate != kTargetRate)
    throw FormatError("chunking requires 16 kHz audio, got " +
                      std::to_string(clip.sample_rate) + " Hz");
  std::vector<std::vector<float>> chunks;
  const std::size_t count = clip.samples.size() / kChunkSamples;
  chunks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto begin = clip.samples.begin() + static_cast<std::ptrdiff_t>(i * kChunkSamples);
    chunks.emplace_back(begin, begin + kChunkSamples);
  }
  return chunks;
}

std::vector<double> log_magnitude(std::span<const float> chunk) {
  if (chunk.size() != static_cast<std::size_t>(kChunkSamples))
    throw ShapeError("stft expects a chunk of 16000 samples, got " +
                     std::to_string(chunk.size()));
  std::vector<double> padded(kPaddedSamples, 0.0);
  std::copy(chunk.begin(), chunk.end(), padded.begin());

  const auto& window = hann_window();
  std::vector<double> frame(kFftSize);
  std::vector<fftw_complex> spectrum(kFftSize / 2 + 1);
  std::vector<double> out(static_cast<std::size_t>(kBins) * kFrames);
  for (int f = 0; f < kFrames; ++f) {
    const double* src = padded.data() + static_cast<std::size_t>(f) * kHop;
    for (int i = 0; i < kFftSize; ++i) frame[i] = src[i] * window[i];
    fft_plan().run(frame.data(), spectrum.data());
    for (int b = 0; b < kBins; ++b)
      out[static_cast<std::size_t>(b) * kFrames + f] =
          std::log1p(std::hypot(spectrum[b][0], spectrum[b][1]));
  }
  return out;
}

SpectrogramTile stft_tile(std::span<const float> chunk, const NormalizationStats& stats) {
  if (!(stats.log_floor < stats.log_ceil))
    throw Error("normalization stats need log_floor < log_ceil");
  const auto mags = log_magnitude(chunk);
  const double range = stats.log_ceil - stats.log_floor;
  SpectrogramTile tile;
  tile.values.resize(mags.size());
  for (std::size_t i = 0; i < mags.size(); ++i) {
    const double v = 2.0 * (mags[i] - stats.log_floor) / range - 1.0;
    tile.values[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return tile;
}

NormalizationStats compute_norm_stats(std::span<const std::vector<float>> chunks) {
  if (chunks.empty()) throw Error("normalization stats need at least one chunk");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& chunk : chunks) {
    for (double v : log_magnitude(chunk)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo < hi)) hi = lo + 1e-6;
  return {lo, hi};
}

}  // namespace audioaffect::dsp
