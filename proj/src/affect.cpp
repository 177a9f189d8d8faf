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

#include "audioaffect/affect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "audioaffect/error.hpp"
#include "audioaffect/io.hpp"
#include "audioaffect/seed.hpp"

namespace audioaffect::affect {

namespace fs = std::filesystem;

namespace {

nn::Tensor<float> gather(std::span<const float> features, std::span<const std::size_t> pick,
                         const HeadArchitecture& a) {
  const std::size_t plane = static_cast<std::size_t>(a.height) * a.width;
  const std::size_t fsize = a.input_size();
  const auto nb = pick.size();
  nn::Tensor<float> x({a.in_channels, static_cast<int>(nb), a.height, a.width});
  for (int c = 0; c < a.in_channels; ++c)
    for (std::size_t n = 0; n < nb; ++n)
      std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(pick[n] * fsize + c * plane), plane,
                  x.data.begin() + static_cast<std::ptrdiff_t>((c * nb + n) * plane));
  return x;
}

nlohmann::json to_json(const HeadArchitecture& a) {
  return {{"in_channels", a.in_channels}, {"height", a.height},
          {"width", a.width},             {"conv_channels", a.conv_channels},
          {"hidden", a.hidden}};
}

}  // namespace

HeadArchitecture head_for(const began::Architecture& encoder) {
  HeadArchitecture a;
  a.in_channels = encoder.feature_channels();
  a.height = encoder.feature_height();
  a.width = encoder.feature_width();
  return a;
}

HeadArchitecture miniature_head() {
  HeadArchitecture a;
  a.in_channels = 3;
  a.height = 2;
  a.width = 2;
  a.conv_channels = {4, 3};
  a.hidden = 5;
  return a;
}

HeadCheckpoint make_head(const HeadArchitecture& arch, std::string encoder_id,
                         const HeadConfig& config) {
  HeadCheckpoint head{arch, build_head<float>(arch), std::move(encoder_id), config,
                      nlohmann::json::object()};
  std::mt19937_64 rng(derive_seed(config.seed, 10));
  head.net.initialize(rng);
  return head;
}

void save_head(const HeadCheckpoint& head, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  io::write_f32(dir / "head.f32", nn::gather_values(head.net.params()));
  const nlohmann::json meta = {
      {"kind", "affect-head"},
      {"architecture", to_json(head.arch)},
      {"encoder_id", head.encoder_id},
      {"config",
       {{"epochs", head.config.epochs},
        {"batch", head.config.batch},
        {"lr", head.config.lr},
        {"seed", head.config.seed}}},
      {"run_config", head.run_config},
  };
  io::write_json(dir / "meta.json", meta);
}

HeadCheckpoint load_head(const fs::path& dir) {
  if (!fs::exists(dir / "meta.json")) throw IoError("no head checkpoint at " + dir.string());
  const auto meta = io::read_json(dir / "meta.json");
  try {
    if (meta.at("kind") != "affect-head")
      throw FormatError(dir.string() + " is not a head checkpoint");
    const auto& a = meta.at("architecture");
    HeadArchitecture arch{a.at("in_channels").get<int>(), a.at("height").get<int>(),
                          a.at("width").get<int>(), a.at("conv_channels").get<std::vector<int>>(),
                          a.at("hidden").get<int>()};
    const auto& c = meta.at("config");
    HeadCheckpoint head{arch, build_head<float>(arch), meta.at("encoder_id").get<std::string>(),
                        HeadConfig{c.at("epochs").get<int>(), c.at("batch").get<int>(),
                                   c.at("lr").get<double>(), c.at("seed").get<std::uint64_t>()},
                        meta.value("run_config", nlohmann::json::object())};
    nn::scatter_values<float>(head.net.params(), io::read_f32(dir / "head.f32"));
    return head;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError((dir / "meta.json").string() + ": " + ex.what());
  }
}

void check_compatible(const began::Checkpoint& began, const HeadCheckpoint& head) {
  const auto id = began.encoder_id();
  if (id != head.encoder_id)
    throw Error("checkpoint mismatch: head was trained on encoder " + head.encoder_id +
                ", got encoder " + id);
  if (head_for(began.nets.arch) != head.arch)
    throw Error("checkpoint mismatch: head input does not match the encoder feature map");
}

EmotionPrediction predict_chunk(std::span<const float> tile, const began::Checkpoint& began,
                                const HeadCheckpoint& head, const std::string& utterance_id,
                                int chunk_index) {
  check_compatible(began, head);
  const auto enc = began::encode(tile, began.nets);
  const auto out = predict_features(enc.feature_map, head, 1);
  return {out[0].first, out[0].second, utterance_id, chunk_index};
}

std::vector<std::pair<double, double>> predict_features(std::span<const float> features,
                                                        const HeadCheckpoint& head, int batch) {
  const std::size_t fsize = head.arch.input_size();
  if (features.size() % fsize != 0)
    throw ShapeError("feature payload is not a whole number of feature maps");
  const std::size_t count = features.size() / fsize;
  std::vector<std::pair<double, double>> out;
  out.reserve(count);
  std::vector<std::size_t> pick;
  for (std::size_t start = 0; start < count; start += batch) {
    const std::size_t nb = std::min<std::size_t>(batch, count - start);
    pick.resize(nb);
    std::iota(pick.begin(), pick.end(), start);
    const auto y = head.net.forward(gather(features, pick, head.arch));
    for (std::size_t n = 0; n < nb; ++n) out.emplace_back(y.data[n], y.data[nb + n]);
  }
  return out;
}

std::vector<TrainingPair> build_training_pairs(const dataset::ChunkStore& store,
                                               std::span<const dataset::ManifestEntry> entries) {
  std::vector<TrainingPair> pairs;
  bool any_labeled = false;
  for (const auto& e : entries) {
    if (!e.labeled()) continue;
    any_labeled = true;
    const auto& l = *e.label;
    if (!(l.arousal >= -1.0 && l.arousal <= 1.0 && l.valence >= -1.0 && l.valence <= 1.0))
      throw Error("label of " + e.utterance_id + " lies outside [-1, 1]");
    const auto records = store.records_for(e.utterance_id);
    if (records.empty()) throw Error("labeled utterance " + e.utterance_id + " has no chunks in the store");
    for (std::size_t r : records)
      pairs.push_back({r, e.utterance_id, store.index().records[r].chunk_index, l});
  }
  if (!any_labeled) throw Error("no labeled utterances to train on");
  return pairs;
}

HeadTrainResult train_head_on_features(std::span<const float> features,
                                       std::span<const dataset::Label> targets,
                                       const HeadArchitecture& arch, std::string encoder_id,
                                       const HeadConfig& config) {
  if (targets.empty()) throw Error("no labeled data");
  if (features.size() != targets.size() * arch.input_size())
    throw ShapeError("feature payload does not match the number of targets");
  if (config.epochs < 1 || config.batch < 1 || !(config.lr > 0.0))
    throw ConfigError("head epochs, batch and lr must be positive");

  HeadTrainResult result{make_head(arch, std::move(encoder_id), config), {}};
  auto& net = result.head.net;
  nn::Adam<float> adam(net.params(), {config.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 11));

  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Trace<float> trace;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t nb = std::min<std::size_t>(config.batch, order.size() - start);
      const auto pick = std::span(order).subspan(start, nb);
      nn::Tensor<float> target({2, static_cast<int>(nb), 1, 1});
      for (std::size_t n = 0; n < nb; ++n) {
        target.data[n] = static_cast<float>(targets[pick[n]].arousal);
        target.data[nb + n] = static_cast<float>(targets[pick[n]].valence);
      }
      net.zero_grad();
      const auto& y = net.forward(gather(features, pick, arch), trace);
      nn::Tensor<float> grad(y.shape);
      const double loss = nn::mse_loss<float>(y.data, target.data, grad.data);
      if (!std::isfinite(loss)) throw NumericError("non-finite head loss in epoch " + std::to_string(epoch + 1));
      net.backward(trace, grad, false);
      adam.step();
      total += loss * static_cast<double>(nb);
    }
    result.epoch_mse.push_back(total / static_cast<double>(order.size()));
  }
  return result;
}

HeadTrainResult train_head(const dataset::ChunkStore& store,
                           std::span<const dataset::ManifestEntry> entries,
                           const began::Checkpoint& began, const HeadConfig& config) {
  const auto pairs = build_training_pairs(store, entries);
  std::vector<std::vector<float>> tiles;
  std::vector<dataset::Label> targets;
  tiles.reserve(pairs.size());
  for (const auto& p : pairs) {
    tiles.push_back(store.load_tile(p.record));
    targets.push_back(p.target);
  }
  const auto features = began::encode_feature_maps(tiles, began.nets);
  return train_head_on_features(features, targets, head_for(began.nets.arch), began.encoder_id(),
                                config);
}

void write_training_pairs(const fs::path& path, std::span<const TrainingPair> pairs) {
  std::ostringstream out;
  out << "utterance_id,chunk_index,arousal,valence\n";
  out.precision(17);
  for (const auto& p : pairs)
    out << p.utterance_id << "," << p.chunk_index << "," << p.target.arousal << ","
        << p.target.valence << "\n";
  io::write_text(path, out.str());
}

void write_mse_log(const fs::path& path, std::span<const double> epoch_mse) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,mse\n";
  for (std::size_t i = 0; i < epoch_mse.size(); ++i) out << i + 1 << "," << epoch_mse[i] << "\n";
  io::write_text(path, out.str());
}

}  // namespace audioaffect::affect
