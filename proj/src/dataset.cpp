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

#include "audioaffect/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "audioaffect/error.hpp"
#include "audioaffect/io.hpp"

namespace audioaffect::dataset {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_label(const std::string& text, const fs::path& path, int line_no) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad label '" + text +
                      "'");
  if (v < -1.0 || v > 1.0)
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": label " + text +
                      " outside [-1, 1]");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

constexpr double kMinCarrier = 200.0;
constexpr double kMaxCarrier = 800.0;

}  // namespace

std::vector<ManifestEntry> parse_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty manifest: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kManifestHeader)
    throw FormatError(path.string() + ": header must be '" + kManifestHeader + "'");

  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 4) throw FormatError(where + ": expected 4 fields");
    if (f[0].empty()) throw FormatError(where + ": empty utterance_id");
    if (f[1].empty()) throw FormatError(where + ": empty audio_path");
    if (!seen.insert(f[0]).second) throw FormatError(where + ": duplicate utterance_id " + f[0]);
    ManifestEntry e{f[0], fs::path(f[1]), std::nullopt};
    if (f[2].empty() != f[3].empty())
      throw FormatError(where + ": arousal and valence must both be present or both empty");
    if (!f[2].empty()) e.label = Label{parse_label(f[2], path, line_no), parse_label(f[3], path, line_no)};
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  std::ostringstream out;
  out << kManifestHeader << "\n";
  for (const auto& e : entries) {
    out << e.utterance_id << "," << e.audio_path.generic_string() << ",";
    if (e.label) out << format_double(e.label->arousal) << "," << format_double(e.label->valence);
    else out << ",";
    out << "\n";
  }
  io::write_text(path, out.str());
}

fs::path resolve_audio_path(const fs::path& manifest_path, const ManifestEntry& entry) {
  if (entry.audio_path.is_absolute()) return entry.audio_path;
  return manifest_path.parent_path() / entry.audio_path;
}

std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split_manifest(
    std::span<const ManifestEntry> entries, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * entries.size()));
  std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> out;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? out.first : out.second).push_back(entries[order[i]]);
  return out;
}

ChunkStoreIndex write_chunk_store(std::span<const dsp::SpectrogramTile> tiles,
                                  const dsp::NormalizationStats& stats, const fs::path& dir) {
  ChunkStoreIndex index;
  index.stats = stats;
  for (const auto& t : tiles)
    if (t.values.size() != index.tile_size())
      throw ShapeError("tile " + t.utterance_id + "/" + std::to_string(t.chunk_index) + " has " +
                       std::to_string(t.values.size()) + " values, store shape is 512x32");

  std::error_code ec;
  fs::create_directories(dir / "tiles", ec);
  if (ec) throw IoError("cannot create " + (dir / "tiles").string() + ": " + ec.message());

  nlohmann::json records = nlohmann::json::array();
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "tiles/%06zu.f32", i);
    io::write_f32(dir / name, tiles[i].values);
    index.records.push_back({tiles[i].utterance_id, tiles[i].chunk_index, name});
    records.push_back(
        {{"utterance_id", tiles[i].utterance_id}, {"chunk_index", tiles[i].chunk_index}, {"tile_ref", name}});
  }
  const nlohmann::json doc = {
      {"shape", {index.bins, index.frames}},
      {"dtype", "float32-le"},
      {"sample_rate", index.sample_rate},
      {"stats", {{"log_floor", stats.log_floor}, {"log_ceil", stats.log_ceil}}},
      {"records", records},
  };
  io::write_json(dir / "index.json", doc);
  return index;
}

ChunkStore::ChunkStore(fs::path dir) : dir_(std::move(dir)) {
  const auto doc = io::read_json(dir_ / "index.json");
  try {
    const auto shape = doc.at("shape").get<std::vector<int>>();
    if (shape != std::vector<int>{dsp::kBins, dsp::kFrames})
      throw FormatError("chunk store shape must be [512, 32]");
    index_.sample_rate = doc.at("sample_rate").get<int>();
    index_.stats.log_floor = doc.at("stats").at("log_floor").get<double>();
    index_.stats.log_ceil = doc.at("stats").at("log_ceil").get<double>();
    for (const auto& r : doc.at("records"))
      index_.records.push_back({r.at("utterance_id").get<std::string>(),
                                r.at("chunk_index").get<int>(), r.at("tile_ref").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir_ / "index.json").string() + ": " + e.what());
  }

  std::map<std::string, std::vector<int>> by_utt;
  for (const auto& r : index_.records) by_utt[r.utterance_id].push_back(r.chunk_index);
  for (auto& [utt, idx] : by_utt) {
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (idx[i] != static_cast<int>(i))
        throw FormatError("chunk indices of " + utt + " are not contiguous from 0");
  }
}

std::vector<float> ChunkStore::load_tile(std::size_t record) const {
  const auto& r = index_.records.at(record);
  auto values = io::read_f32(dir_ / r.tile_ref);
  if (values.size() != index_.tile_size())
    throw ShapeError(r.tile_ref + " does not hold a 512x32 tile");
  return values;
}

std::vector<std::size_t> ChunkStore::records_for(const std::string& utterance_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < index_.records.size(); ++i)
    if (index_.records[i].utterance_id == utterance_id) out.push_back(i);
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return index_.records[a].chunk_index < index_.records[b].chunk_index;
  });
  return out;
}

double arousal_for_rms(double rms, double max_rms) {
  return std::clamp(2.0 * (rms / max_rms) - 1.0, -1.0, 1.0);
}

double valence_for_carrier(double carrier_hz) {
  return std::clamp(2.0 * ((carrier_hz - kMinCarrier) / (kMaxCarrier - kMinCarrier)) - 1.0, -1.0,
                    1.0);
}

fs::path generate_synthetic_corpus(int n, std::uint64_t seed, const fs::path& dir) {
  if (n < 1) throw ConfigError("synthetic corpus needs n >= 1");
  std::error_code ec;
  fs::create_directories(dir / "clips", ec);
  if (ec) throw IoError("cannot create " + (dir / "clips").string() + ": " + ec.message());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<ManifestEntry> entries;
  std::vector<double> rms(n);
  std::vector<double> carrier(n);
  for (int i = 0; i < n; ++i) {
    const double seconds = uniform(2.0, 4.0);
    carrier[i] = uniform(kMinCarrier, kMaxCarrier);
    const double amplitude = uniform(0.05, 0.95);
    const double mod_rate = uniform(1.0, 6.0);
    const double depth = uniform(0.0, 0.6);
    const double phase = uniform(0.0, 2.0 * std::numbers::pi);

    const auto len = static_cast<std::size_t>(std::llround(seconds * dsp::kTargetRate));
    std::vector<float> samples(len);
    double energy = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double time = static_cast<double>(t) / dsp::kTargetRate;
      const double env = amplitude * (1.0 + depth * std::sin(2.0 * std::numbers::pi * mod_rate * time + phase)) /
                         (1.0 + depth);
      const double x = env * std::sin(2.0 * std::numbers::pi * carrier[i] * time);
      // Labels follow the signal as stored on disk.
      const double q = std::lround(std::min(x * 32768.0, 32767.0)) / 32768.0;
      samples[t] = static_cast<float>(q);
      energy += q * q;
    }
    rms[i] = std::sqrt(energy / static_cast<double>(len));

    char name[32];
    std::snprintf(name, sizeof name, "synth_%05d", i);
    const fs::path rel = fs::path("clips") / (std::string(name) + ".wav");
    dsp::write_wav_pcm16(dir / rel, samples, dsp::kTargetRate);
    entries.push_back({name, rel, std::nullopt});
  }
  const double max_rms = *std::max_element(rms.begin(), rms.end());
  for (int i = 0; i < n; ++i)
    entries[i].label = Label{arousal_for_rms(rms[i], max_rms), valence_for_carrier(carrier[i])};

  const fs::path manifest = dir / "manifest.csv";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace audioaffect::dataset
