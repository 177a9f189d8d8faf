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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "audioaffect/error.hpp"
#include "audioaffect/io.hpp"
#include "test_util.hpp"

namespace audioaffect::pipeline {
namespace {

namespace fs = std::filesystem;
using testing::sine;
using testing::TempDir;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AUDIOAFFECT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(RunConfigTest, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.sample_rate, 16000);
  EXPECT_EQ(c.chunk_seconds, 1);
  EXPECT_EQ(c.fft_size, 1024);
  EXPECT_EQ(c.hop, 512);
  EXPECT_EQ(c.began.epochs, 100);
  EXPECT_EQ(c.began.batch, 16);
  EXPECT_EQ(c.began.gamma, 0.7);
  EXPECT_EQ(c.began.lambda_k, 0.001);
  EXPECT_EQ(c.began.lr, 1e-4);
  EXPECT_EQ(c.head.lr, 1e-4);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.to_json()["began"]["gamma"], 0.7);
}

TEST(RunConfigTest, Validation) {
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"began.gamma", "0"},   {"began.gamma", "1.5"}, {"began.lambda_k", "0"},
      {"fft_size", "2048"},   {"hop", "256"},         {"sample_rate", "8000"},
      {"head.epochs", "0"},   {"began.batch", "-1"},  {"head.lr", "0"}};
  for (const auto& [k, v] : bad) {
    RunConfig c;
    apply_setting(c, k, v);
    EXPECT_THROW(c.validate(), ConfigError) << k << "=" << v;
  }
  RunConfig c;
  EXPECT_THROW(apply_setting(c, "began.depth", "3"), ConfigError);
  EXPECT_THROW(apply_setting(c, "began.epochs", "3x"), ConfigError);
  apply_setting(c, "began.gamma", "1");
  EXPECT_NO_THROW(c.validate());
  apply_setting(c, "seed", "42");
  EXPECT_EQ(c.began.seed, 42u);
  EXPECT_EQ(c.head.seed, 42u);
}

TEST(RunConfigTest, IniFile) {
  TempDir dir("cfg");
  std::ofstream(dir / "run.ini") << "seed = 4\n[began]\nepochs = 3\ngamma = 0.5\n[head]\nlr = 0.001\n";
  const auto c = load_config(dir / "run.ini");
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.began.seed, 4u);
  EXPECT_EQ(c.began.epochs, 3);
  EXPECT_EQ(c.began.gamma, 0.5);
  EXPECT_EQ(c.began.batch, 16);
  EXPECT_EQ(c.head.lr, 0.001);
  std::ofstream(dir / "bad.ini") << "[began]\nwidth = 3\n";
  EXPECT_THROW(load_config(dir / "bad.ini"), ConfigError);
}

// Corpus with files of assorted rates, channel counts and lengths.
struct MixedCorpus {
  TempDir dir{"mixed"};
  fs::path manifest;
  std::size_t expected_chunks = 0;

  explicit MixedCorpus(bool include_broken) {
    manifest = dataset::generate_synthetic_corpus(4, 21, dir / "synth");
    auto entries = dataset::parse_manifest(manifest);
    for (const auto& e : entries)
      expected_chunks +=
          dsp::read_wav(dataset::resolve_audio_path(manifest, e)).samples.size() / 16000;
    dsp::write_wav_pcm16(dir.path() / "synth" / "long44k.wav", sine(300, 44100, 44100 * 5 / 2), 44100);
    entries.push_back({"long44k", "long44k.wav", dataset::Label{0.1, 0.2}});
    expected_chunks += 2;  // floor(2.5 s)
    dsp::write_wav_pcm16(dir.path() / "synth" / "short.wav", sine(300, 16000, 8000), 16000);
    entries.push_back({"short", "short.wav", std::nullopt});
    if (include_broken) {
      std::ofstream(dir.path() / "synth" / "broken.wav") << "garbage";
      entries.push_back({"broken", "broken.wav", std::nullopt});
    }
    dataset::write_manifest(manifest, entries);
  }
};

TEST(PreprocessTest, ChunkCountsFollowDurations) {
  MixedCorpus corpus(true);
  const auto report = preprocess(corpus.manifest, corpus.dir / "store", RunConfig{});
  EXPECT_EQ(report.total_chunks, corpus.expected_chunks);
  EXPECT_TRUE(report.any_failed());
  EXPECT_EQ(report.files.back().utterance_id, "broken");
  EXPECT_FALSE(report.files.back().error.empty());
  const dataset::ChunkStore store(corpus.dir / "store");
  EXPECT_EQ(store.size(), corpus.expected_chunks);
  EXPECT_EQ(store.records_for("long44k").size(), 2u);
  EXPECT_TRUE(store.records_for("short").empty());
  const auto meta = io::read_json(corpus.dir / "store" / "preprocess.json");
  EXPECT_EQ(meta["total_chunks"], corpus.expected_chunks);
  EXPECT_EQ(meta["run_config"], RunConfig{}.to_json());
}

TEST(PreprocessTest, RerunIsIdentical) {
  MixedCorpus corpus(false);
  preprocess(corpus.manifest, corpus.dir / "a", RunConfig{});
  preprocess(corpus.manifest, corpus.dir / "b", RunConfig{});
  EXPECT_EQ(slurp(corpus.dir / "a" / "index.json"), slurp(corpus.dir / "b" / "index.json"));
  const dataset::ChunkStore a(corpus.dir / "a");
  for (const auto& r : a.index().records)
    ASSERT_EQ(slurp(corpus.dir / "a" / r.tile_ref), slurp(corpus.dir / "b" / r.tile_ref));
}

TEST(PreprocessTest, Errors) {
  TempDir dir("pre");
  std::ofstream(dir / "empty.csv") << dataset::kManifestHeader << "\n";
  EXPECT_THROW(preprocess(dir / "empty.csv", dir / "s1", RunConfig{}), Error);
  dsp::write_wav_pcm16(dir / "tiny.wav", sine(300, 16000, 8000), 16000);
  std::ofstream(dir / "tiny.csv") << dataset::kManifestHeader << "\ntiny,tiny.wav,,\n";
  EXPECT_THROW(preprocess(dir / "tiny.csv", dir / "s2", RunConfig{}), Error);
}

// Random (untrained) checkpoints are enough to exercise the plumbing.
struct SavedModels {
  TempDir dir{"models"};
  SavedModels() {
    began::Checkpoint b{began::Networks<float>::create({}, 3), {}, {}, {0.0, 4.0}, {}};
    began::save_checkpoint(b, dir / "began");
    affect::save_head(affect::make_head(affect::head_for(b.nets.arch), b.encoder_id(), {}),
                      dir / "head");
  }
};

TEST(PredictTest, ThreeSecondFile) {
  SavedModels m;
  dsp::write_wav_pcm16(m.dir / "three.wav", sine(440, 22050, 22050 * 3, 0.3), 22050);
  const auto doc = predict(m.dir / "three.wav", m.dir / "began", m.dir / "head");
  EXPECT_EQ(doc["utterance_id"], "three");
  EXPECT_EQ(doc["aggregator"], "median");
  ASSERT_EQ(doc["chunks"].size(), 3u);
  std::vector<double> a;
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(doc["chunks"][i]["chunk_index"], i);
    a.push_back(doc["chunks"][i]["arousal"]);
  }
  std::sort(a.begin(), a.end());
  EXPECT_EQ(doc["arousal"].get<double>(), a[1]);
  EXPECT_LE(std::abs(doc["valence"].get<double>()), 1.0);
  EXPECT_EQ(predict(m.dir / "three.wav", m.dir / "began", m.dir / "head"), doc);
}

TEST(PredictTest, SubSecondFileFails) {
  SavedModels m;
  dsp::write_wav_pcm16(m.dir / "half.wav", sine(440, 16000, 8000), 16000);
  try {
    predict(m.dir / "half.wav", m.dir / "began", m.dir / "head");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no full chunks"), std::string::npos);
  }
  EXPECT_THROW(predict(m.dir / "half.wav", m.dir / "nothing", m.dir / "head"), IoError);
}

TEST(TrainingTest, RepeatedRunsWriteIdenticalLogs) {
  TempDir dir("train");
  const auto manifest = dataset::generate_synthetic_corpus(3, 2, dir / "corpus");
  preprocess(manifest, dir / "store", RunConfig{});
  RunConfig c;
  apply_setting(c, "seed", "5");
  apply_setting(c, "began.epochs", "1");
  apply_setting(c, "began.batch", "4");
  apply_setting(c, "head.epochs", "3");
  for (const char* run : {"a", "b"}) {
    train_began(dir / "store", dir / (std::string("began_") + run), c);
    train_head(dir / "store", manifest, dir / (std::string("began_") + run),
               dir / (std::string("head_") + run), c);
  }
  EXPECT_EQ(slurp(dir / "began_a" / "train_log.csv"), slurp(dir / "began_b" / "train_log.csv"));
  EXPECT_EQ(slurp(dir / "head_a" / "train_log.csv"), slurp(dir / "head_b" / "train_log.csv"));
  EXPECT_EQ(slurp(dir / "head_a" / "head.f32"), slurp(dir / "head_b" / "head.f32"));
  const auto log = slurp(dir / "began_a" / "train_log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "epoch,l_real,l_gen,k,m_global");
  EXPECT_EQ(io::read_json(dir / "began_a" / "meta.json")["run_config"], c.to_json());
  const auto pairs = slurp(dir / "head_a" / "training_pairs.csv");
  EXPECT_EQ(pairs.substr(0, pairs.find('\n')), "utterance_id,chunk_index,arousal,valence");
}

TEST(CliTest, FlagsOverrideFileOverrideDefaults) {
  MixedCorpus corpus(false);
  const auto w = corpus.dir.path().string();
  std::ofstream(corpus.dir / "run.ini") << "[began]\nepochs = 3\ngamma = 0.5\n";
  ASSERT_EQ(run_cli("--workdir " + w +
                    " preprocess --manifest synth/manifest.csv -o store --config run.ini"
                    " --began-epochs 7 --head-lr 2e-7"),
            0);
  const auto echo = io::read_json(corpus.dir / "store" / "preprocess.json")["run_config"];
  EXPECT_EQ(echo["began"]["epochs"], 7);
  EXPECT_EQ(echo["began"]["gamma"], 0.5);
  EXPECT_EQ(echo["began"]["batch"], 16);
  EXPECT_EQ(echo["head"]["lr"], 2e-7);
}

TEST(CliTest, ExitStatus) {
  MixedCorpus corpus(true);
  const auto w = corpus.dir.path().string();
  // Invalid configuration is rejected before anything is written.
  EXPECT_NE(run_cli("--workdir " + w + " preprocess --manifest synth/manifest.csv -o s0 --gamma 2"), 0);
  EXPECT_FALSE(fs::exists(corpus.dir / "s0"));
  // A broken file is skipped, the store is still written, the exit is nonzero.
  EXPECT_EQ(run_cli("--workdir " + w + " preprocess --manifest synth/manifest.csv -o s1"), 1);
  EXPECT_TRUE(fs::exists(corpus.dir / "s1" / "index.json"));
  EXPECT_NE(run_cli("--workdir " + w + " train-head --store s1 --manifest synth/manifest.csv"
                    " --began none -o h"),
            0);
  EXPECT_NE(run_cli("--workdir " + w + " bogus"), 0);
}

TEST(CliTest, SynthSplitAndPredict) {
  SavedModels m;
  const auto w = m.dir.path().string();
  ASSERT_EQ(run_cli("--workdir " + w + " synth-corpus -n 10 --corpus-seed 3 -o corpus"), 0);
  ASSERT_EQ(run_cli("--workdir " + w + " split --manifest corpus/manifest.csv -o split --seed 1"), 0);
  const auto train = dataset::parse_manifest(m.dir / "split" / "train.csv");
  const auto test = dataset::parse_manifest(m.dir / "split" / "test.csv");
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  EXPECT_TRUE(fs::exists(dataset::resolve_audio_path(m.dir / "split" / "test.csv", test[0])));
  ASSERT_EQ(run_cli("--workdir " + w + " predict --wav corpus/clips/synth_00000.wav --began began"
                    " --head head -o pred.json"),
            0);
  const auto doc = io::read_json(m.dir / "pred.json");
  EXPECT_EQ(doc["utterance_id"], "synth_00000");
  EXPECT_GE(doc["chunks"].size(), 2u);
}

}  // namespace
}  // namespace audioaffect::pipeline
