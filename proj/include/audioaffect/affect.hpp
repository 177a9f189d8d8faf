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

// Arousal/valence regression head. It reads the frozen BEGAN encoder's
// convolutional feature map, applies two stride-1 convolutions and two dense
// layers, and emits two tanh outputs per chunk.

#ifndef AUDIOAFFECT_AFFECT_HPP_
#define AUDIOAFFECT_AFFECT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "audioaffect/began.hpp"
#include "audioaffect/dataset.hpp"
#include "audioaffect/nn.hpp"

namespace audioaffect::affect {

struct HeadArchitecture {
  int in_channels = 256;
  int height = 32;
  int width = 2;
  std::vector<int> conv_channels{128, 64};
  int hidden = 64;

  std::size_t input_size() const { return static_cast<std::size_t>(in_channels) * height * width; }
  bool operator==(const HeadArchitecture&) const = default;
};

/// Head sized for the feature map of the given encoder.
HeadArchitecture head_for(const began::Architecture& encoder);
HeadArchitecture miniature_head();

template <typename T>
nn::Sequential<T> build_head(const HeadArchitecture& a) {
  nn::Sequential<T> net;
  int in = a.in_channels;
  for (int c : a.conv_channels) {
    net.template add<nn::Conv2d<T>>(in, c, 3, 1, 1);
    net.template add<nn::Elu<T>>();
    in = c;
  }
  net.template add<nn::Flatten<T>>();
  net.template add<nn::Dense<T>>(in * a.height * a.width, a.hidden);
  net.template add<nn::Elu<T>>();
  net.template add<nn::Dense<T>>(a.hidden, 2);
  net.template add<nn::Tanh<T>>();
  return net;
}

struct EmotionPrediction {
  double arousal = 0.0;
  double valence = 0.0;
  std::string utterance_id;
  std::optional<int> chunk_index;  // empty for an utterance-level aggregate
};

struct HeadConfig {
  int epochs = 50;
  int batch = 16;
  double lr = 1e-4;
  std::uint64_t seed = 0;
};

struct HeadCheckpoint {
  HeadArchitecture arch;
  nn::Sequential<float> net;
  std::string encoder_id;
  HeadConfig config;
  nlohmann::json run_config = nlohmann::json::object();
};

HeadCheckpoint make_head(const HeadArchitecture& arch, std::string encoder_id,
                         const HeadConfig& config);

void save_head(const HeadCheckpoint& head, const std::filesystem::path& dir);
HeadCheckpoint load_head(const std::filesystem::path& dir);

/// Throws if the head was trained against a different encoder.
void check_compatible(const began::Checkpoint& began, const HeadCheckpoint& head);

EmotionPrediction predict_chunk(std::span<const float> tile, const began::Checkpoint& began,
                                const HeadCheckpoint& head, const std::string& utterance_id = {},
                                int chunk_index = 0);

/// (arousal, valence) per sample for sample-major feature maps.
std::vector<std::pair<double, double>> predict_features(std::span<const float> features,
                                                        const HeadCheckpoint& head,
                                                        int batch = 64);

/// One supervised example: a stored chunk and its utterance's label.
struct TrainingPair {
  std::size_t record = 0;
  std::string utterance_id;
  int chunk_index = 0;
  dataset::Label target;
};

/// Every chunk of every labeled entry, each carrying its utterance label.
/// Unlabeled entries are ignored.
std::vector<TrainingPair> build_training_pairs(const dataset::ChunkStore& store,
                                               std::span<const dataset::ManifestEntry> entries);

/// CSV \`utterance_id,chunk_index,arousal,valence\`, one row per training chunk.
void write_training_pairs(const std::filesystem::path& path, std::span<const TrainingPair> pairs);

struct HeadTrainResult {
  HeadCheckpoint head;
  std::vector<double> epoch_mse;
};

/// MSE training of a fresh head on precomputed, sample-major feature maps.
HeadTrainResult train_head_on_features(std::span<const float> features,
                                       std::span<const dataset::Label> targets,
                                       const HeadArchitecture& arch, std::string encoder_id,
                                       const HeadConfig& config);

/// Extracts feature maps with the (frozen) encoder, then trains the head.
HeadTrainResult train_head(const dataset::ChunkStore& store,
                           std::span<const dataset::ManifestEntry> entries,
                           const began::Checkpoint& began, const HeadConfig& config);

void write_mse_log(const std::filesystem::path& path, std::span<const double> epoch_mse);

}  // namespace audioaffect::affect

#endif  // AUDIOAFFECT_AFFECT_HPP_
