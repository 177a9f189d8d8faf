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

#include "audioaffect/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "audioaffect/dataset.hpp"
#include "audioaffect/error.hpp"
#include "audioaffect/io.hpp"

namespace audioaffect::pipeline {

namespace fs = std::filesystem;

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(backend_threads()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

std::vector<dataset::ManifestEntry> load_nonempty(const fs::path& manifest) {
  auto entries = dataset::parse_manifest(manifest);
  if (entries.empty()) throw Error("manifest has no entries: " + manifest.string());
  return entries;
}

}  // namespace

void RunConfig::validate() const {
  if (sample_rate != dsp::kTargetRate) throw ConfigError("sample_rate is fixed at 16000");
  if (chunk_seconds != 1) throw ConfigError("chunk_seconds is fixed at 1");
  if (fft_size != dsp::kFftSize) throw ConfigError("fft_size is fixed at 1024");
  if (hop != dsp::kHop) throw ConfigError("hop is fixed at 512");
  if (!(began.gamma > 0.0 && began.gamma <= 1.0)) throw ConfigError("began.gamma must lie in (0, 1]");
  if (!(began.lambda_k > 0.0)) throw ConfigError("began.lambda_k must be positive");
  if (began.epochs < 1 || began.batch < 1) throw ConfigError("began.epochs and began.batch must be positive");
  if (!(began.lr > 0.0)) throw ConfigError("began.lr must be positive");
  if (head.epochs < 1 || head.batch < 1) throw ConfigError("head.epochs and head.batch must be positive");
  if (!(head.lr > 0.0)) throw ConfigError("head.lr must be positive");
}

nlohmann::json RunConfig::to_json() const {
  return {{"sample_rate", sample_rate},
          {"chunk_seconds", chunk_seconds},
          {"fft_size", fft_size},
          {"hop", hop},
          {"seed", seed},
          {"began",
           {{"epochs", began.epochs},
            {"batch", began.batch},
            {"gamma", began.gamma},
            {"lambda_k", began.lambda_k},
            {"lr", began.lr}}},
          {"head", {{"epochs", head.epochs}, {"batch", head.batch}, {"lr", head.lr}}}};
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "sample_rate") c.sample_rate = parse_number<int>(key, value);
  else if (key == "chunk_seconds") c.chunk_seconds = parse_number<int>(key, value);
  else if (key == "fft_size") c.fft_size = parse_number<int>(key, value);
  else if (key == "hop") c.hop = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "began.epochs") c.began.epochs = parse_number<int>(key, value);
  else if (key == "began.batch") c.began.batch = parse_number<int>(key, value);
  else if (key == "began.gamma") c.began.gamma = parse_number<double>(key, value);
  else if (key == "began.lambda_k") c.began.lambda_k = parse_number<double>(key, value);
  else if (key == "began.lr") c.began.lr = parse_number<double>(key, value);
  else if (key == "head.epochs") c.head.epochs = parse_number<int>(key, value);
  else if (key == "head.batch") c.head.batch = parse_number<int>(key, value);
  else if (key == "head.lr") c.head.lr = parse_number<double>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
  c.began.seed = c.seed;
  c.head.seed = c.seed;
}

RunConfig load_config(const fs::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  RunConfig config;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      apply_setting(config, key, node.data());
      continue;
    }
    for (const auto& [sub, leaf] : node) apply_setting(config, key + "." + sub, leaf.data());
  }
  return config;
}

int backend_threads() {
  if (const char* env = std::getenv("AUDIOAFFECT_THREADS")) {
    int n = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), n);
    if (res.ec == std::errc() && n > 0) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

bool PreprocessReport::any_failed() const {
  return std::any_of(files.begin(), files.end(), [](const FileReport& f) { return !f.error.empty(); });
}

PreprocessReport preprocess(const fs::path& manifest, const fs::path& out_dir,
                            const RunConfig& config, std::optional<dsp::NormalizationStats> stats) {
  config.validate();
  const auto entries = load_nonempty(manifest);

  std::vector<std::vector<std::vector<float>>> chunks(entries.size());
  PreprocessReport report;
  report.files.resize(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    auto& f = report.files[i];
    f.utterance_id = entries[i].utterance_id;
    try {
      const auto clip = dsp::resample_to_16k(
          dsp::read_wav(dataset::resolve_audio_path(manifest, entries[i]), entries[i].utterance_id));
      chunks[i] = dsp::chunk_1s(clip);
      f.chunks = static_cast<int>(chunks[i].size());
    } catch (const std::exception& e) {
      f.error = e.what();
    }
  });

  std::vector<std::vector<float>> all;
  for (const auto& c : chunks) all.insert(all.end(), c.begin(), c.end());
  report.total_chunks = all.size();
  if (all.empty()) throw Error("preprocessing produced no full one-second chunks");
  report.stats = stats ? *stats : dsp::compute_norm_stats(all);

  std::vector<std::size_t> offset(entries.size() + 1, 0);
  for (std::size_t i = 0; i < entries.size(); ++i) offset[i + 1] = offset[i] + chunks[i].size();
  std::vector<dsp::SpectrogramTile> tiles(all.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    for (std::size_t c = 0; c < chunks[i].size(); ++c) {
      auto tile = dsp::stft_tile(chunks[i][c], report.stats);
      tile.utterance_id = entries[i].utterance_id;
      tile.chunk_index = static_cast<int>(c);
      tiles[offset[i] + c] = std::move(tile);
    }
  });
  dataset::write_chunk_store(tiles, report.stats, out_dir);

  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : report.files) {
    nlohmann::json j = {{"utterance_id", f.utterance_id}, {"chunks", f.chunks}};
    if (!f.error.empty()) j["error"] = f.error;
    files.push_back(j);
  }
  io::write_json(out_dir / "preprocess.json",
                 {{"manifest", manifest.generic_string()},
                  {"total_chunks", report.total_chunks},
                  {"files", files},
                  {"run_config", config.to_json()}});
  return report;
}

began::TrainResult train_began(const fs::path& store_dir, const fs::path& out_dir,
                               const RunConfig& config, const std::optional<fs::path>& manifest) {
  config.validate();
  const dataset::ChunkStore store(store_dir);
  std::vector<std::size_t> records;
  if (manifest) {
    for (const auto& e : load_nonempty(*manifest))
      for (std::size_t r : store.records_for(e.utterance_id)) records.push_back(r);
    std::sort(records.begin(), records.end());
  } else {
    for (std::size_t r = 0; r < store.size(); ++r) records.push_back(r);
  }
  if (records.empty()) throw Error("no tiles to train the BEGAN on");
  std::vector<std::vector<float>> tiles;
  tiles.reserve(records.size());
  for (std::size_t r : records) tiles.push_back(store.load_tile(r));

  auto result = began::train(tiles, config.began, store.index().stats, {},
                             [](const began::EpochLog& e) {
                               std::clog << "began epoch " << e.epoch << " l_real=" << e.l_real
                                         << " l_gen=" << e.l_gen << " k=" << e.k
                                         << " m_global=" << e.m_global << "\n";
                             });
  result.checkpoint.run_config = config.to_json();
  began::save_checkpoint(result.checkpoint, out_dir);
  began::write_epoch_log(out_dir / "train_log.csv", result.epochs);
  return result;
}

affect::HeadTrainResult train_head(const fs::path& store_dir, const fs::path& manifest,
                                   const fs::path& began_dir, const fs::path& out_dir,
                                   const RunConfig& config) {
  config.validate();
  const auto began = began::load_checkpoint(began_dir);
  const dataset::ChunkStore store(store_dir);
  const auto entries = load_nonempty(manifest);
  auto result = affect::train_head(store, entries, began, config.head);
  result.head.run_config = config.to_json();
  affect::save_head(result.head, out_dir);
  affect::write_mse_log(out_dir / "train_log.csv", result.epoch_mse);
  affect::write_training_pairs(out_dir / "training_pairs.csv",
                               affect::build_training_pairs(store, entries));
  return result;
}

nlohmann::json predict(const fs::path& wav, const fs::path& began_dir, const fs::path& head_dir,
                       std::string utterance_id, eval::Aggregator how) {
  const auto began = began::load_checkpoint(began_dir);
  const auto head = affect::load_head(head_dir);
  affect::check_compatible(began, head);
  if (utterance_id.empty()) utterance_id = wav.stem().string();

  const auto clip = dsp::resample_to_16k(dsp::read_wav(wav, utterance_id));
  const auto chunks = dsp::chunk_1s(clip);
  if (chunks.empty()) throw Error("no full chunks: " + wav.string() + " is shorter than one second");

  std::vector<affect::EmotionPrediction> preds;
  nlohmann::json chunk_json = nlohmann::json::array();
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto tile = dsp::stft_tile(chunks[i], began.stats);
    preds.push_back(affect::predict_chunk(tile.values, began, head, utterance_id, static_cast<int>(i)));
    chunk_json.push_back({{"chunk_index", i}, {"arousal", preds.back().arousal}, {"valence", preds.back().valence}});
  }
  const auto agg = eval::aggregate(preds, how);
  return {{"utterance_id", utterance_id},
          {"arousal", agg.arousal},
          {"valence", agg.valence},
          {"aggregator", eval::to_string(how)},
          {"chunks", chunk_json}};
}

eval::EvalReport evaluate(const fs::path& store_dir, const fs::path& train_manifest,
                          const fs::path& test_manifest, const fs::path& began_dir,
                          const fs::path& out_dir, const RunConfig& config,
                          const EvaluateOptions& options) {
  config.validate();
  if (options.runs < 1) throw ConfigError("runs must be at least 1");
  const auto began = began::load_checkpoint(began_dir);
  const dataset::ChunkStore store(store_dir);
  const auto train_entries = load_nonempty(train_manifest);
  const auto test_entries = load_nonempty(test_manifest);

  // Encoder features of the training chunks are shared by all runs.
  const auto pairs = affect::build_training_pairs(store, train_entries);
  std::vector<std::vector<float>> tiles;
  std::vector<dataset::Label> targets;
  for (const auto& p : pairs) {
    tiles.push_back(store.load_tile(p.record));
    targets.push_back(p.target);
  }
  const auto features = began::encode_feature_maps(tiles, began.nets);
  tiles.clear();
  const auto arch = affect::head_for(began.nets.arch);
  const auto encoder_id = began.encoder_id();

  auto train_fn = [&](std::uint64_t seed) {
    auto head_config = config.head;
    head_config.seed = seed;
    auto result = affect::train_head_on_features(features, targets, arch, encoder_id, head_config);
    std::clog << "evaluate: head seed " << seed << " final mse " << result.epoch_mse.back() << "\n";
    return std::move(result.head);
  };
  auto report = eval::evaluate_runs(test_entries, store, began, train_fn, options.runs, config.seed,
                                    options.aggregator);
  auto echo = config.to_json();
  echo["runs"] = options.runs;
  echo["aggregator"] = eval::to_string(options.aggregator);
  eval::write_report(report, out_dir, echo);
  return report;
}

void split(const fs::path& manifest, double train_fraction, std::uint64_t seed,
           const fs::path& out_dir) {
  auto entries = load_nonempty(manifest);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (auto& e : entries)
    e.audio_path = fs::proximate(fs::absolute(dataset::resolve_audio_path(manifest, e)),
                                 fs::absolute(out_dir));
  const auto [train, test] = dataset::split_manifest(entries, train_fraction, seed);
  dataset::write_manifest(out_dir / "train.csv", train);
  dataset::write_manifest(out_dir / "test.csv", test);
}

}  // namespace audioaffect::pipeline
