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

// Command implementations behind the audioaffect executable. Each command
// takes resolved paths and a RunConfig, writes its outputs, and echoes the
// configuration into every metadata file it produces.

#ifndef AUDIOAFFECT_PIPELINE_HPP_
#define AUDIOAFFECT_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "audioaffect/affect.hpp"
#include "audioaffect/began.hpp"
#include "audioaffect/dsp.hpp"
#include "audioaffect/eval.hpp"

namespace audioaffect::pipeline {

struct RunConfig {
  int sample_rate = 16000;
  int chunk_seconds = 1;
  int fft_size = 1024;
  int hop = 512;
  began::TrainConfig began;
  affect::HeadConfig head;
  std::uint64_t seed = 0;

  /// Throws ConfigError on the first invalid field.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Sets one dotted key ("seed", "began.gamma", "head.epochs", ...) from text.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads an INI document ([began] / [head] sections, top-level keys for the
/// rest) on top of the defaults.
RunConfig load_config(const std::filesystem::path& path);

/// Worker count from AUDIOAFFECT_THREADS (default: hardware concurrency).
int backend_threads();

struct FileReport {
  std::string utterance_id;
  int chunks = 0;
  std::string error;  // empty when the file was processed
};

struct PreprocessReport {
  std::vector<FileReport> files;
  std::size_t total_chunks = 0;
  dsp::NormalizationStats stats;
  bool any_failed() const;
};

/// Decode, resample, chunk and tile every manifest entry into a chunk store at
/// out_dir. Unreadable files are skipped and reported. When stats is empty the
/// normalization range is measured on the corpus itself.
PreprocessReport preprocess(const std::filesystem::path& manifest,
                            const std::filesystem::path& out_dir, const RunConfig& config,
                            std::optional<dsp::NormalizationStats> stats = std::nullopt);

/// Trains the BEGAN on the store (optionally only the utterances listed in
/// manifest) and writes the checkpoint plus train_log.csv to out_dir.
began::TrainResult train_began(const std::filesystem::path& store_dir,
                               const std::filesystem::path& out_dir, const RunConfig& config,
                               const std::optional<std::filesystem::path>& manifest = std::nullopt);

/// Trains the regression head and writes it plus train_log.csv to out_dir.
affect::HeadTrainResult train_head(const std::filesystem::path& store_dir,
                                   const std::filesystem::path& manifest,
                                   const std::filesystem::path& began_dir,
                                   const std::filesystem::path& out_dir, const RunConfig& config);

/// Per-chunk and aggregated predictions for one WAV file, as JSON.
nlohmann::json predict(const std::filesystem::path& wav, const std::filesystem::path& began_dir,
                       const std::filesystem::path& head_dir, std::string utterance_id = {},
                       eval::Aggregator how = eval::Aggregator::kMedian);

struct EvaluateOptions {
  int runs = 10;
  eval::Aggregator aggregator = eval::Aggregator::kMedian;
};

/// Multi-run evaluation: head retrained per run on train_manifest, scored on
/// test_manifest. Writes report.csv, summary.json, boxplot.svg to out_dir.
eval::EvalReport evaluate(const std::filesystem::path& store_dir,
                          const std::filesystem::path& train_manifest,
                          const std::filesystem::path& test_manifest,
                          const std::filesystem::path& began_dir,
                          const std::filesystem::path& out_dir, const RunConfig& config,
                          const EvaluateOptions& options);

/// Writes train.csv / test.csv next to each other in out_dir.
void split(const std::filesystem::path& manifest, double train_fraction, std::uint64_t seed,
           const std::filesystem::path& out_dir);

}  // namespace audioaffect::pipeline

#endif  // AUDIOAFFECT_PIPELINE_HPP_
