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

// audioaffect: command-line entry point for the preprocessing, BEGAN
// pretraining, head training, prediction and evaluation stages.

#include <Eigen/Core>

#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "audioaffect/dataset.hpp"
#include "audioaffect/error.hpp"
#include "audioaffect/io.hpp"
#include "audioaffect/pipeline.hpp"

namespace fs = std::filesystem;
using audioaffect::pipeline::RunConfig;

namespace {

struct Common {
  std::string workdir;
  std::string config_file;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;
  std::optional<int> began_epochs, began_batch, head_epochs, head_batch;
  std::optional<double> gamma, lambda_k, began_lr, head_lr;

  fs::path path(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : fs::path(workdir) / q;
  }

  // flags > file > defaults
  RunConfig config() const {
    RunConfig c = config_file.empty() ? RunConfig{} : audioaffect::pipeline::load_config(path(config_file));
    auto set = [&](const char* key, const auto& v) {
      if (!v) return;
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, *v);  // shortest round-trip form
      audioaffect::pipeline::apply_setting(c, key, std::string(buf, res.ptr));
    };
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw audioaffect::ConfigError("--set expects key=value, got " + s);
      audioaffect::pipeline::apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    set("seed", seed);
    set("began.epochs", began_epochs);
    set("began.batch", began_batch);
    set("began.gamma", gamma);
    set("began.lambda_k", lambda_k);
    set("began.lr", began_lr);
    set("head.epochs", head_epochs);
    set("head.batch", head_batch);
    set("head.lr", head_lr);
    c.validate();
    return c;
  }
};

void add_common(CLI::App* cmd, Common& o) {
  cmd->add_option("--config", o.config_file, "INI config file");
  cmd->add_option("--set", o.settings, "Override a config key (key=value), repeatable");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--began-epochs", o.began_epochs);
  cmd->add_option("--began-batch", o.began_batch);
  cmd->add_option("--gamma", o.gamma);
  cmd->add_option("--lambda-k", o.lambda_k);
  cmd->add_option("--began-lr", o.began_lr);
  cmd->add_option("--head-epochs", o.head_epochs);
  cmd->add_option("--head-batch", o.head_batch);
  cmd->add_option("--head-lr", o.head_lr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised arousal/valence regression from audio"};
  app.require_subcommand(1);
  Common o;
  app.add_option("--workdir", o.workdir, "Directory all relative paths resolve against")
      ->required();

  int synth_n = 200;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "corpus";
  auto* synth = app.add_subcommand("synth-corpus", "Generate a labeled synthetic corpus");
  synth->add_option("-n,--count", synth_n)->check(CLI::PositiveNumber);
  synth->add_option("--corpus-seed", synth_seed);
  synth->add_option("-o,--out", synth_out);

  std::string manifest, out, store, began_dir, head_dir, wav, utt, train_manifest, test_manifest;
  std::string aggregator = "median";
  double fraction = 0.8;
  int runs = 10;

  auto* split = app.add_subcommand("split", "Split a manifest into train.csv and test.csv");
  split->add_option("--manifest", manifest)->required();
  split->add_option("--train-fraction", fraction);
  split->add_option("-o,--out", out)->required();
  add_common(split, o);

  auto* pre = app.add_subcommand("preprocess", "Build a chunk store from a manifest");
  pre->add_option("--manifest", manifest)->required();
  pre->add_option("-o,--out", out)->required();
  std::string stats_from;
  pre->add_option("--stats-from", stats_from, "Reuse normalization stats of an existing store");
  add_common(pre, o);

  auto* tb = app.add_subcommand("train-began", "Pretrain the BEGAN representation");
  tb->add_option("--store", store)->required();
  tb->add_option("--manifest", manifest, "Restrict training to these utterances");
  tb->add_option("-o,--out", out)->required();
  add_common(tb, o);

  auto* th = app.add_subcommand("train-head", "Train the arousal/valence head");
  th->add_option("--store", store)->required();
  th->add_option("--manifest", manifest)->required();
  th->add_option("--began", began_dir)->required();
  th->add_option("-o,--out", out)->required();
  add_common(th, o);

  auto* pr = app.add_subcommand("predict", "Predict arousal/valence for one WAV file");
  pr->add_option("--wav", wav)->required();
  pr->add_option("--began", began_dir)->required();
  pr->add_option("--head", head_dir)->required();
  pr->add_option("--utterance-id", utt);
  pr->add_option("--aggregator", aggregator)->check(CLI::IsMember({"median", "mean", "max"}));
  pr->add_option("-o,--out", out, "Write JSON here instead of stdout");

  auto* ev = app.add_subcommand("evaluate", "Multi-run CCC evaluation");
  ev->add_option("--store", store)->required();
  ev->add_option("--train-manifest", train_manifest)->required();
  ev->add_option("--test-manifest", test_manifest)->required();
  ev->add_option("--began", began_dir)->required();
  ev->add_option("--runs", runs)->check(CLI::PositiveNumber);
  ev->add_option("--aggregator", aggregator)->check(CLI::IsMember({"median", "mean", "max"}));
  ev->add_option("-o,--out", out)->required();
  add_common(ev, o);

  CLI11_PARSE(app, argc, argv);
  Eigen::setNbThreads(audioaffect::pipeline::backend_threads());

  namespace pl = audioaffect::pipeline;
  try {
    if (*synth) {
      const auto path = audioaffect::dataset::generate_synthetic_corpus(synth_n, synth_seed, o.path(synth_out));
      std::cout << path.string() << "\n";
    } else if (*split) {
      const auto config = o.config();
      pl::split(o.path(manifest), fraction, config.seed, o.path(out));
    } else if (*pre) {
      const auto config = o.config();
      std::optional<audioaffect::dsp::NormalizationStats> stats;
      if (!stats_from.empty()) stats = audioaffect::dataset::ChunkStore(o.path(stats_from)).index().stats;
      const auto report = pl::preprocess(o.path(manifest), o.path(out), config, stats);
      for (const auto& f : report.files) {
        if (f.error.empty())
          std::cout << f.utterance_id << "\t" << f.chunks << "\n";
        else
          std::cerr << "skipped " << f.utterance_id << ": " << f.error << "\n";
      }
      std::cout << "total chunks: " << report.total_chunks << "\n";
      if (report.any_failed()) {
        std::cerr << "some files could not be processed\n";
        return 1;
      }
    } else if (*tb) {
      const auto config = o.config();
      std::optional<fs::path> m;
      if (!manifest.empty()) m = o.path(manifest);
      pl::train_began(o.path(store), o.path(out), config, m);
    } else if (*th) {
      const auto config = o.config();
      const auto result = pl::train_head(o.path(store), o.path(manifest), o.path(began_dir), o.path(out), config);
      std::cout << "final mse: " << result.epoch_mse.back() << "\n";
    } else if (*pr) {
      const auto doc = pl::predict(o.path(wav), o.path(began_dir), o.path(head_dir), utt,
                                   audioaffect::eval::aggregator_from_string(aggregator));
      if (out.empty())
        std::cout << doc.dump(2) << "\n";
      else
        audioaffect::io::write_json(o.path(out), doc);
    } else if (*ev) {
      const auto config = o.config();
      const auto report = pl::evaluate(o.path(store), o.path(train_manifest), o.path(test_manifest),
                                       o.path(began_dir), o.path(out), config,
                                       {runs, audioaffect::eval::aggregator_from_string(aggregator)});
      const auto& a = report.arousal;
      const auto& v = report.valence;
      std::cout << "arousal ccc median " << a.median << " [" << a.min << ", " << a.max << "]\n"
                << "valence ccc median " << v.median << " [" << v.min << ", " << v.max << "]\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
