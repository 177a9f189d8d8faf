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

#include "audioaffect/began.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "audioaffect/error.hpp"
#include "test_util.hpp"

namespace audioaffect::began {
namespace {

using testing::TempDir;

std::vector<float> random_tile(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> t(n);
  for (auto& v : t) v = u(rng);
  return t;
}

TEST(EquilibriumTest, WorkedExample) {
  const EquilibriumState eq{0.0, 0.7, 0.001, 0.0};
  const auto next = update_equilibrium(eq, {0.5, 0.2});
  EXPECT_NEAR(next.k, 0.00015, 1e-15);
  EXPECT_NEAR(next.m_global, 0.65, 1e-15);
  EXPECT_EQ(next.gamma, 0.7);
}

TEST(EquilibriumTest, ClampsAtBothEnds) {
  EXPECT_EQ(update_equilibrium({1.0, 0.7, 0.001, 0.0}, {0.5, 0.2}).k, 1.0);
  EXPECT_EQ(update_equilibrium({0.0, 0.7, 0.001, 0.0}, {0.1, 0.9}).k, 0.0);
}

TEST(EquilibriumTest, ConstantLossesGrowLinearlyUntilClamped) {
  EquilibriumState eq{0.0, 0.7, 0.001, 0.0};
  const Losses stub{0.5, 0.2};
  const double c = 0.7 * 0.5 - 0.2;
  bool clamped = false;
  for (int step = 0; step < 8000; ++step) {
    const auto next = update_equilibrium(eq, stub);
    ASSERT_GE(next.k, 0.0);
    ASSERT_LE(next.k, 1.0);
    ASSERT_NEAR(next.m_global, 0.5 + std::abs(c), 1e-12);
    if (eq.k + 0.001 * c <= 1.0) {
      ASSERT_NEAR(next.k - eq.k, 1.5e-4, 1e-12) << step;
    } else {
      ASSERT_EQ(next.k, 1.0);
      clamped = true;
    }
    eq = next;
  }
  EXPECT_TRUE(clamped);
}

TEST(EquilibriumTest, ConvergenceMeasureFallsWithShrinkingLosses) {
  EquilibriumState eq{0.0, 0.7, 0.001, 0.0};
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    const double scale = std::pow(0.9, i);
    const Losses l{0.4 * scale, 0.1 * scale};
    eq = update_equilibrium(eq, l);
    EXPECT_NEAR(eq.m_global, l.l_real + std::abs(0.7 * l.l_real - l.l_gen), 1e-12);
    EXPECT_LT(eq.m_global, prev);
    prev = eq.m_global;
  }
}

TEST(PixelLossTest, MatchesBruteForce) {
  std::mt19937_64 rng(4);
  const auto a = random_tile(512 * 32, rng);
  const auto b = random_tile(512 * 32, rng);
  long double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::fabs(static_cast<long double>(a[i]) - b[i]);
  EXPECT_NEAR(pixel_loss(a, b), static_cast<double>(sum / a.size()), 1e-12);
  EXPECT_EQ(pixel_loss(a, a), 0.0);
  EXPECT_EQ(pixel_loss(std::vector<float>(77, 0.0f), std::vector<float>(77, 1.0f)), 1.0);
  EXPECT_THROW(pixel_loss(a, std::vector<float>(3)), ShapeError);
}

TEST(LatentTest, UniformInUnitBox) {
  std::mt19937_64 rng(8);
  const auto z = sample_latent(rng, 64, 16);
  EXPECT_EQ(z.shape, (nn::Shape{64, 16, 1, 1}));
  double mean = 0;
  for (float v : z.data) {
    ASSERT_GE(v, -1.0f);
    ASSERT_LE(v, 1.0f);
    mean += v;
  }
  EXPECT_NEAR(mean / z.data.size(), 0.0, 0.1);
}

class FullNetworkTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { nets_ = new Networks<float>(Networks<float>::create({}, 17)); }
  static void TearDownTestSuite() { delete nets_; }
  static Networks<float>* nets_;
};
Networks<float>* FullNetworkTest::nets_ = nullptr;

TEST_F(FullNetworkTest, EncodeContract) {
  std::mt19937_64 rng(1);
  const auto tile = random_tile(512 * 32, rng);
  const auto e = encode(tile, *nets_);
  EXPECT_EQ(e.latent.size(), 64u);
  EXPECT_EQ(e.feature_map.size(), 256u * 32 * 2);
  EXPECT_EQ(encode(tile, *nets_).latent, e.latent);
  const auto lo = encode(std::vector<float>(512 * 32, -1.0f), *nets_);
  const auto hi = encode(std::vector<float>(512 * 32, 1.0f), *nets_);
  EXPECT_NE(lo.latent, hi.latent);
  EXPECT_THROW(encode(std::vector<float>(100), *nets_), ShapeError);
}

TEST_F(FullNetworkTest, FeatureMapsAreBatchInvariant) {
  std::mt19937_64 rng(2);
  std::vector<std::vector<float>> tiles;
  for (int i = 0; i < 5; ++i) tiles.push_back(random_tile(512 * 32, rng));
  const auto batched = encode_feature_maps(tiles, *nets_, 2);
  ASSERT_EQ(batched.size(), 5u * 256 * 64);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto single = encode(tiles[i], *nets_).feature_map;
    for (std::size_t j = 0; j < single.size(); ++j)
      ASSERT_NEAR(batched[i * single.size() + j], single[j], 1e-5);
  }
}

TEST_F(FullNetworkTest, AutoencodeAndGenerateStayBounded) {
  std::mt19937_64 rng(3);
  const auto tile = random_tile(512 * 32, rng);
  const auto rec = autoencode(tile, *nets_);
  ASSERT_EQ(rec.size(), tile.size());
  for (float v : rec) ASSERT_LE(std::abs(v), 1.0f);

  const auto zero = generate(std::vector<float>(64, 0.0f), *nets_);
  ASSERT_EQ(zero.size(), 512u * 32);
  for (float v : zero) ASSERT_LE(std::abs(v), 1.0f);

  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> z1(64), z2(64);
  for (auto& v : z1) v = u(rng);
  for (auto& v : z2) v = u(rng);
  const auto g1 = generate(z1, *nets_);
  EXPECT_EQ(generate(z1, *nets_), g1);
  EXPECT_NE(generate(z2, *nets_), g1);
  EXPECT_THROW(generate(std::vector<float>(63), *nets_), ShapeError);
}

TEST(TrainerTest, NonFiniteStepLeavesStateUntouched) {
  const auto arch = miniature_architecture();
  TrainConfig cfg;
  cfg.seed = 3;
  Trainer trainer(arch, cfg);
  std::mt19937_64 rng(1);
  nn::Tensor<float> real({1, 2, 4, 4});
  for (auto& v : real.data) v = 0.5f;
  auto z = sample_latent(rng, arch.latent, 2);
  trainer.step(real, z);
  const auto before = nn::gather_values<float>(std::as_const(trainer.networks()).encoder.params());
  const auto eq = trainer.equilibrium();
  real.data[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(trainer.step(real, z), NumericError);
  EXPECT_EQ(nn::gather_values<float>(std::as_const(trainer.networks()).encoder.params()), before);
  EXPECT_EQ(trainer.equilibrium(), eq);
  EXPECT_EQ(trainer.steps(), 1);
}

TEST(TrainerTest, RejectsBadControlParameters) {
  TrainConfig cfg;
  cfg.gamma = 0.0;
  EXPECT_THROW(Trainer(miniature_architecture(), cfg), ConfigError);
  cfg.gamma = 0.7;
  cfg.lambda_k = -1.0;
  EXPECT_THROW(Trainer(miniature_architecture(), cfg), ConfigError);
}

std::vector<std::vector<float>> mini_tiles(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<float>> tiles;
  for (int i = 0; i < n; ++i) tiles.push_back(random_tile(16, rng));
  return tiles;
}

TEST(TrainTest, StepCountAndLogs) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 5;
  const auto result = train(mini_tiles(64, 1), cfg, {0.0, 1.0}, miniature_architecture());
  EXPECT_EQ(result.steps.size(), 8u);
  ASSERT_EQ(result.epochs.size(), 2u);
  EXPECT_EQ(result.epochs[1].epoch, 2);
  EXPECT_EQ(result.epochs[1].k, result.steps.back().k);
  for (const auto& s : result.steps) {
    EXPECT_GE(s.k, 0.0);
    EXPECT_LE(s.k, 1.0);
    EXPECT_NEAR(s.m_global, s.l_real + std::abs(0.7 * s.l_real - s.l_gen), 1e-12);
  }
  cfg.epochs = 1;
  EXPECT_EQ(train(mini_tiles(65, 1), cfg, {0.0, 1.0}, miniature_architecture()).steps.size(), 5u);
}

TEST(TrainTest, SameSeedSameLog) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 9;
  const auto tiles = mini_tiles(40, 2);
  const auto a = train(tiles, cfg, {0.0, 1.0}, miniature_architecture());
  const auto b = train(tiles, cfg, {0.0, 1.0}, miniature_architecture());
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].l_real, b.steps[i].l_real);
    EXPECT_EQ(a.steps[i].l_gen, b.steps[i].l_gen);
    EXPECT_EQ(a.steps[i].k, b.steps[i].k);
  }
  cfg.seed = 10;
  const auto c = train(tiles, cfg, {0.0, 1.0}, miniature_architecture());
  EXPECT_NE(c.steps.back().l_real, a.steps.back().l_real);
}

TEST(TrainTest, Errors) {
  TrainConfig cfg;
  EXPECT_THROW(train({}, cfg, {0.0, 1.0}, miniature_architecture()), Error);
  cfg.epochs = 6;  // 12 steps, all non-finite
  auto tiles = mini_tiles(32, 3);
  for (auto& t : tiles) t[0] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(train(tiles, cfg, {0.0, 1.0}, miniature_architecture()), NumericError);
}

TEST(CheckpointTest, DefaultsEchoAndRoundTrip) {
  const TrainConfig defaults;
  EXPECT_EQ(defaults.epochs, 100);
  EXPECT_EQ(defaults.batch, 16);
  EXPECT_EQ(defaults.gamma, 0.7);
  EXPECT_EQ(defaults.lambda_k, 0.001);
  EXPECT_EQ(defaults.lr, 1e-4);

  TempDir dir("began");
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 21;
  auto result = train(mini_tiles(16, 4), cfg, {0.5, 2.5}, miniature_architecture());
  result.checkpoint.run_config = {{"note", "echo"}};
  save_checkpoint(result.checkpoint, dir.path());
  const auto loaded = load_checkpoint(dir.path());
  EXPECT_EQ(loaded.config.epochs, 1);
  EXPECT_EQ(loaded.config.batch, 16);
  EXPECT_EQ(loaded.config.gamma, 0.7);
  EXPECT_EQ(loaded.config.seed, 21u);
  EXPECT_EQ(loaded.equilibrium, result.checkpoint.equilibrium);
  EXPECT_EQ(loaded.stats.log_floor, 0.5);
  EXPECT_EQ(loaded.stats.log_ceil, 2.5);
  EXPECT_EQ(loaded.run_config, result.checkpoint.run_config);
  EXPECT_EQ(loaded.encoder_id(), result.checkpoint.encoder_id());
  EXPECT_EQ(loaded.nets.arch, miniature_architecture());
  for (const auto& tile : mini_tiles(5, 99)) {
    const auto a = encode(tile, result.checkpoint.nets);
    const auto b = encode(tile, loaded.nets);
    EXPECT_EQ(a.latent, b.latent);
    EXPECT_EQ(a.feature_map, b.feature_map);
    EXPECT_EQ(autoencode(tile, result.checkpoint.nets), autoencode(tile, loaded.nets));
  }
  EXPECT_THROW(load_checkpoint(dir / "absent"), IoError);
}

}  // namespace
}  // namespace audioaffect::began
