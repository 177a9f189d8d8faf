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

#ifndef AUDIOAFFECT_DATASET_HPP_
#define AUDIOAFFECT_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "audioaffect/dsp.hpp"

namespace audioaffect::dataset {

inline constexpr const char* kManifestHeader = "utterance_id,audio_path,arousal,valence";

struct Label {
  double arousal = 0.0;
  double valence = 0.0;
  bool operator==(const Label&) const = default;
};

struct ManifestEntry {
  std::string utterance_id;
  std::filesystem::path audio_path;  // relative paths resolve against the manifest directory
  std::optional<Label> label;

  bool labeled() const { return label.has_value(); }
  bool operator==(const ManifestEntry&) const = default;
};

/// Reads a manifest CSV. Fields may not contain commas; labels are either both
/// present (and within [-1, 1]) or both empty.
std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
std::filesystem::path resolve_audio_path(const std::filesystem::path& manifest_path,
                                         const ManifestEntry& entry);

/// Deterministic shuffled split; the first round(fraction * n) entries of the
/// permutation form the training side.
std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split_manifest(
    std::span<const ManifestEntry> entries, double train_fraction, std::uint64_t seed);

struct ChunkRecord {
  std::string utterance_id;
  int chunk_index = 0;
  std::string tile_ref;  // file name relative to the store directory
  bool operator==(const ChunkRecord&) const = default;
};

struct ChunkStoreIndex {
  int bins = dsp::kBins;
  int frames = dsp::kFrames;
  dsp::NormalizationStats stats;
  int sample_rate = dsp::kTargetRate;
  std::vector<ChunkRecord> records;

  std::size_t tile_size() const { return static_cast<std::size_t>(bins) * frames; }
};

/// Persists tiles as <dir>/tiles/NNNNNN.f32 plus <dir>/index.json. Records
/// keep the order of the input.
ChunkStoreIndex write_chunk_store(std::span<const dsp::SpectrogramTile> tiles,
                                  const dsp::NormalizationStats& stats,
                                  const std::filesystem::path& dir);

/// Read-only view of a chunk store. Safe for concurrent readers.
class ChunkStore {
 public:
  explicit ChunkStore(std::filesystem::path dir);

  const ChunkStoreIndex& index() const { return index_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::size_t size() const { return index_.records.size(); }

  std::vector<float> load_tile(std::size_t record) const;
  /// Record positions of one utterance in chunk order; empty if absent.
  std::vector<std::size_t> records_for(const std::string& utterance_id) const;

 private:
  std::filesystem::path dir_;
  ChunkStoreIndex index_;
};

/// Labels of the synthetic corpus.
double arousal_for_rms(double rms, double max_rms);
double valence_for_carrier(double carrier_hz);

/// Writes n amplitude-modulated tones (16 kHz mono PCM16, 2-4 s) under
/// <dir>/clips and a labeled manifest at <dir>/manifest.csv, which is returned.
std::filesystem::path generate_synthetic_corpus(int n, std::uint64_t seed,
                                                const std::filesystem::path& dir);

}  // namespace audioaffect::dataset

#endif  // AUDIOAFFECT_DATASET_HPP_
