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

#include "audioaffect/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "audioaffect/error.hpp"
#include "audioaffect/io.hpp"

namespace audioaffect::eval {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

nlohmann::json to_json(const FiveNumber& f) {
  return {{"min", f.min}, {"q1", f.q1}, {"median", f.median}, {"q3", f.q3}, {"max", f.max}};
}

}  // namespace

Aggregator aggregator_from_string(const std::string& name) {
  if (name == "median") return Aggregator::kMedian;
  if (name == "mean") return Aggregator::kMean;
  if (name == "max") return Aggregator::kMax;
  throw ConfigError("unknown aggregator '" + name + "' (median, mean, max)");
}

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::kMedian: return "median";
    case Aggregator::kMean: return "mean";
    case Aggregator::kMax: return "max";
  }
  return "median";
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

affect::EmotionPrediction aggregate(std::span<const affect::EmotionPrediction> chunks,
                                    Aggregator how) {
  if (chunks.empty()) throw Error("cannot aggregate an empty chunk list");
  const std::string& utt = chunks.front().utterance_id;
  std::vector<double> arousal;
  std::vector<double> valence;
  for (const auto& c : chunks) {
    if (c.utterance_id != utt)
      throw Error("aggregation mixes utterances " + utt + " and " + c.utterance_id);
    arousal.push_back(c.arousal);
    valence.push_back(c.valence);
  }
  auto reduce = [how](std::vector<double> v) {
    switch (how) {
      case Aggregator::kMean:
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      case Aggregator::kMax: return *std::max_element(v.begin(), v.end());
      case Aggregator::kMedian: break;
    }
    return median(std::move(v));
  };
  return {reduce(std::move(arousal)), reduce(std::move(valence)), utt, std::nullopt};
}

affect::EmotionPrediction aggregate_median(std::span<const affect::EmotionPrediction> chunks) {
  return aggregate(chunks, Aggregator::kMedian);
}

double ccc(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw Error("ccc needs sequences of equal length");
  if (pred.size() < 2) throw Error("ccc needs at least two values");
  const auto n = static_cast<double>(pred.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!std::isfinite(pred[i]) || !std::isfinite(truth[i])) throw NumericError("ccc input is not finite");
    mx += pred[i];
    my += truth[i];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i] - mx;
    const double dy = truth[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cov += dx * dy;
  }
  vx /= n;
  vy /= n;
  cov /= n;
  const double denom = vx + vy + (mx - my) * (mx - my);
  if (denom == 0.0) return 1.0;
  return std::clamp(2.0 * cov / denom, -1.0, 1.0);
}

FiveNumber boxplot_stats(std::span<const double> values) {
  if (values.empty()) throw Error("box plot of an empty set");
  std::vector<double> s(values.begin(), values.end());
  std::stable_sort(s.begin(), s.end());
  return {s.front(), quantile_sorted(s, 0.25), quantile_sorted(s, 0.5), quantile_sorted(s, 0.75),
          s.back()};
}

EvalReport evaluate_runs(std::span<const dataset::ManifestEntry> test,
                         const dataset::ChunkStore& store, const began::Checkpoint& began,
                         const HeadTrainFn& train_head, int runs, std::uint64_t base_seed,
                         Aggregator how) {
  if (runs < 1) throw ConfigError("runs must be at least 1");
  const auto pairs = affect::build_training_pairs(store, test);
  std::vector<std::vector<float>> tiles;
  tiles.reserve(pairs.size());
  for (const auto& p : pairs) tiles.push_back(store.load_tile(p.record));
  const auto features = began::encode_feature_maps(tiles, began.nets);

  // Utterances in first-seen order with their chunk positions in pairs.
  std::vector<std::string> utts;
  std::map<std::string, std::vector<std::size_t>> members;
  std::map<std::string, dataset::Label> truth;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!members.contains(pairs[i].utterance_id)) utts.push_back(pairs[i].utterance_id);
    members[pairs[i].utterance_id].push_back(i);
    truth[pairs[i].utterance_id] = pairs[i].target;
  }
  if (utts.size() < 2) throw Error("evaluation needs at least two labeled test utterances");

  EvalReport report;
  std::vector<double> ca, cv;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(r);
    try {
      const auto head = train_head(seed);
      affect::check_compatible(began, head);
      const auto chunk_preds = affect::predict_features(features, head);
      std::vector<double> pa, pv, ta, tv;
      for (const auto& u : utts) {
        std::vector<affect::EmotionPrediction> preds;
        for (std::size_t i : members[u])
          preds.push_back({chunk_preds[i].first, chunk_preds[i].second, u, pairs[i].chunk_index});
        const auto agg = aggregate(preds, how);
        pa.push_back(agg.arousal);
        pv.push_back(agg.valence);
        ta.push_back(truth[u].arousal);
        tv.push_back(truth[u].valence);
      }
      report.per_run.push_back({r, seed, ccc(pa, ta), ccc(pv, tv)});
    } catch (const std::exception& e) {
      throw Error("run " + std::to_string(r) + " (seed " + std::to_string(seed) + "): " + e.what());
    }
    ca.push_back(report.per_run.back().ccc_arousal);
    cv.push_back(report.per_run.back().ccc_valence);
  }
  report.arousal = boxplot_stats(ca);
  report.valence = boxplot_stats(cv);
  return report;
}

std::string render_boxplot_svg(const EvalReport& report) {
  // y axis spans CCC in [-1, 1].
  constexpr double kW = 360, kH = 300, kTop = 20, kBottom = 260;
  auto y = [&](double v) { return kBottom - (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * (kBottom - kTop); };
  std::ostringstream s;
  s.precision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<line x1=\"40\" y1=\"" << y(0) << "\" x2=\"" << kW - 10 << "\" y2=\"" << y(0)
    << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
  for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0})
    s << "<text x=\"4\" y=\"" << y(t) + 4 << "\" font-size=\"11\">" << t << "</text>\n";
  const std::pair<const char*, const FiveNumber*> boxes[] = {{"arousal", &report.arousal},
                                                             {"valence", &report.valence}};
  double cx = 120;
  for (const auto& [name, f] : boxes) {
    s << "<line x1=\"" << cx << "\" y1=\"" << y(f->min) << "\" x2=\"" << cx << "\" y2=\"" << y(f->max)
      << "\" stroke=\"black\"/>\n";
    for (double v : {f->min, f->max})
      s << "<line x1=\"" << cx - 15 << "\" y1=\"" << y(v) << "\" x2=\"" << cx + 15 << "\" y2=\"" << y(v)
        << "\" stroke=\"black\"/>\n";
    s << "<rect x=\"" << cx - 30 << "\" y=\"" << y(f->q3) << "\" width=\"60\" height=\""
      << y(f->q1) - y(f->q3) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << cx - 30 << "\" y1=\"" << y(f->median) << "\" x2=\"" << cx + 30 << "\" y2=\""
      << y(f->median) << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << cx - 25 << "\" y=\"" << kH - 15 << "\" font-size=\"13\">" << name
      << "</text>\n";
    cx += 150;
  }
  s << "</svg>\n";
  return s.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& dir,
                  const nlohmann::json& run_config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream csv;
  csv.precision(17);
  csv << "run,ccc_arousal,ccc_valence\n";
  for (const auto& r : report.per_run) csv << r.run << "," << r.ccc_arousal << "," << r.ccc_valence << "\n";
  io::write_text(dir / "report.csv", csv.str());

  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : report.per_run) seeds.push_back(r.seed);
  io::write_json(dir / "summary.json", {{"runs", report.per_run.size()},
                                        {"seeds", seeds},
                                        {"arousal", to_json(report.arousal)},
                                        {"valence", to_json(report.valence)},
                                        {"run_config", run_config}});
  io::write_text(dir / "boxplot.svg", render_boxplot_svg(report));
}

}  // namespace audioaffect::eval
