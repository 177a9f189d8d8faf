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

#ifndef AUDIOAFFECT_EVAL_HPP_
#define AUDIOAFFECT_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "audioaffect/affect.hpp"
#include "audioaffect/began.hpp"
#include "audioaffect/dataset.hpp"

namespace audioaffect::eval {

enum class Aggregator { kMedian, kMean, kMax };

Aggregator aggregator_from_string(const std::string& name);
std::string to_string(Aggregator a);

/// Median of a non-empty sample; even sizes average the two central values.
double median(std::vector<double> values);

/// Per-dimension median of one utterance's chunk predictions.
affect::EmotionPrediction aggregate_median(std::span<const affect::EmotionPrediction> chunks);
/// Same contract with a selectable statistic (mean/max are ablations).
affect::EmotionPrediction aggregate(std::span<const affect::EmotionPrediction> chunks,
                                    Aggregator how);

/// Concordance correlation coefficient with population moments:
///   2 cov(x, y) / (var x + var y + (mean x - mean y)^2).
/// Two identical constant sequences score 1.
double ccc(std::span<const double> pred, std::span<const double> truth);

struct FiveNumber {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  bool operator==(const FiveNumber&) const = default;
};

/// min / max whiskers, quartiles by linear interpolation between order statistics.
FiveNumber boxplot_stats(std::span<const double> values);

struct RunResult {
  int run = 0;
  std::uint64_t seed = 0;
  double ccc_arousal = 0.0;
  double ccc_valence = 0.0;
  bool operator==(const RunResult&) const = default;
};

struct EvalReport {
  std::vector<RunResult> per_run;
  FiveNumber arousal;
  FiveNumber valence;
};

/// Trains a head for the given seed. Runs call it with base_seed + run index.
using HeadTrainFn = std::function<affect::HeadCheckpoint(std::uint64_t seed)>;

/// For each run: retrain the head, predict every chunk of the labeled test
/// utterances, aggregate per utterance and score both dimensions by CCC.
EvalReport evaluate_runs(std::span<const dataset::ManifestEntry> test,
                         const dataset::ChunkStore& store, const began::Checkpoint& began,
                         const HeadTrainFn& train_head, int runs, std::uint64_t base_seed,
                         Aggregator how = Aggregator::kMedian);

/// report.csv (run,ccc_arousal,ccc_valence), summary.json and boxplot.svg.
void write_report(const EvalReport& report, const std::filesystem::path& dir,
                  const nlohmann::json& run_config = nlohmann::json::object());

std::string render_boxplot_svg(const EvalReport& report);

}  // namespace audioaffect::eval

#endif  // AUDIOAFFECT_EVAL_HPP_
