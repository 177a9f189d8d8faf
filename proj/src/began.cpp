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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "audioaffect/error.hpp"
#include "audioaffect/io.hpp"
#include "audioaffect/seed.hpp"

namespace audioaffect::began {

namespace fs = std::filesystem;

namespace {

constexpr int kMaxNonFiniteSteps = 10;

nn::Adam<float>::Options adam_options(double lr) {
  nn::Adam<float>::Options o;
  o.lr = lr;
  o.beta1 = 0.5;
  return o;
}

nn::Tensor<float> single(std::span<const float> tile, const Architecture& arch) {
  if (tile.size() != arch.tile_size())
    throw ShapeError("expected a " + std::to_string(arch.height) + "x" +
                     std::to_string(arch.width) + " tile, got " + std::to_string(tile.size()) +
                     " values");
  nn::Tensor<float> x({1, 1, arch.height, arch.width});
  std::copy(tile.begin(), tile.end(), x.data.begin());
  return x;
}

}  // namespace

void Architecture::validate() const {
  if (channels.empty() || latent < 1 || height < 1 || width < 1)
    throw ConfigError("invalid autoencoder architecture");
  const int stride = 1 << channels.size();
  if (height % stride != 0 || width % stride != 0)
    throw ConfigError("tile dimensions must be divisible by 2^stages");
}

Architecture miniature_architecture() {
  Architecture a;
  a.height = 4;
  a.width = 4;
  a.channels = {2, 3};
  a.latent = 3;
  return a;
}

nlohmann::json to_json(const Architecture& a) {
  return {{"height", a.height}, {"width", a.width}, {"channels", a.channels}, {"latent", a.latent}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture a;
  a.height = j.at("height").get<int>();
  a.width = j.at("width").get<int>();
  a.channels = j.at("channels").get<std::vector<int>>();
  a.latent = j.at("latent").get<int>();
  a.validate();
  return a;
}

EquilibriumState update_equilibrium(const EquilibriumState& eq, const Losses& losses) {
  EquilibriumState next = eq;
  const double balance = eq.gamma * losses.l_real - losses.l_gen;
  next.k = std::clamp(eq.k + eq.lambda_k * balance, 0.0, 1.0);
  next.m_global = losses.l_real + std::abs(balance);
  return next;
}

double pixel_loss(std::span<const float> a, std::span<const float> b) {
  return nn::l1_loss<float>(a, b);
}

nn::Tensor<float> sample_latent(std::mt19937_64& rng, int latent, int batch) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  nn::Tensor<float> z({latent, batch, 1, 1});
  for (auto& v : z.data) v = dist(rng);
  return z;
}

Trainer::Trainer(const Architecture& arch, const TrainConfig& config)
    : nets_(Networks<float>::create(arch, derive_seed(config.seed, 0))),
      adam_d_(nets_.discriminator_params(), adam_options(config.lr)),
      adam_g_(nets_.generator.params(), adam_options(config.lr)) {
  if (!(config.gamma > 0.0 && config.gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(config.lambda_k > 0.0)) throw ConfigError("lambda_k must be positive");
  eq_.gamma = config.gamma;
  eq_.lambda_k = config.lambda_k;
}

StepLog Trainer::step(const nn::Tensor<float>& real, const nn::Tensor<float>& z) {
  const Losses losses = compute_gradients(nets_, real, z, eq_.k);
  if (!std::isfinite(losses.l_real) || !std::isfinite(losses.l_gen)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << steps_ + 1 << " (L_real=" << losses.l_real
        << ", L_gen=" << losses.l_gen << ", k=" << eq_.k << ")";
    throw NumericError(msg.str());
  }
  adam_d_.step();
  adam_g_.step();
  eq_ = update_equilibrium(eq_, losses);
  ++steps_;
  return {steps_, losses.l_real, losses.l_gen, eq_.k, eq_.m_global};
}

double Trainer::reconstruction_step(const nn::Tensor<float>& real) {
  const double loss = compute_reconstruction_gradients(nets_, real);
  if (!std::isfinite(loss)) throw NumericError("non-finite reconstruction loss");
  adam_d_.step();
  ++steps_;
  return loss;
}

std::string Checkpoint::encoder_id() const {
  return io::fingerprint(nn::gather_values(nets.encoder_params()));
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  io::write_f32(dir / "encoder.f32", nn::gather_values(ckpt.nets.encoder_params()));
  io::write_f32(dir / "decoder.f32", nn::gather_values(ckpt.nets.decoder.params()));
  io::write_f32(dir / "generator.f32", nn::gather_values(ckpt.nets.generator.params()));
  const auto& c = ckpt.config;
  const auto& eq = ckpt.equilibrium;
  const nlohmann::json meta = {
      {"kind", "began"},
      {"architecture", to_json(ckpt.nets.arch)},
      {"config",
       {{"epochs", c.epochs},
        {"batch", c.batch},
        {"gamma", c.gamma},
        {"lambda_k", c.lambda_k},
        {"lr", c.lr},
        {"seed", c.seed}}},
      {"equilibrium",
       {{"k", eq.k}, {"gamma", eq.gamma}, {"lambda_k", eq.lambda_k}, {"m_global", eq.m_global}}},
      {"stats", {{"log_floor", ckpt.stats.log_floor}, {"log_ceil", ckpt.stats.log_ceil}}},
      {"encoder_id", ckpt.encoder_id()},
      {"run_config", ckpt.run_config},
  };
  io::write_json(dir / "meta.json", meta);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "meta.json")) throw IoError("no BEGAN checkpoint at " + dir.string());
  const auto meta = io::read_json(dir / "meta.json");
  try {
    if (meta.at("kind") != "began") throw FormatError(dir.string() + " is not a BEGAN checkpoint");
    const auto arch = architecture_from_json(meta.at("architecture"));
    Checkpoint ckpt{Networks<float>{arch, build_encoder<float>(arch), build_projection<float>(arch),
                                    build_decoder<float>(arch), build_decoder<float>(arch)},
                    {},
                    {},
                    {},
                    meta.value("run_config", nlohmann::json::object())};
    const auto& c = meta.at("config");
    ckpt.config = {c.at("epochs").get<int>(),    c.at("batch").get<int>(),
                   c.at("gamma").get<double>(),  c.at("lambda_k").get<double>(),
                   c.at("lr").get<double>(),     c.at("seed").get<std::uint64_t>()};
    const auto& e = meta.at("equilibrium");
    ckpt.equilibrium = {e.at("k").get<double>(), e.at("gamma").get<double>(),
                        e.at("lambda_k").get<double>(), e.at("m_global").get<double>()};
    ckpt.stats = {meta.at("stats").at("log_floor").get<double>(),
                  meta.at("stats").at("log_ceil").get<double>()};

    std::vector<nn::Param<float>*> enc = ckpt.nets.encoder.params();
    for (auto* p : ckpt.nets.projection.params()) enc.push_back(p);
    nn::scatter_values<float>(enc, io::read_f32(dir / "encoder.f32"));
    nn::scatter_values<float>(ckpt.nets.decoder.params(), io::read_f32(dir / "decoder.f32"));
    nn::scatter_values<float>(ckpt.nets.generator.params(), io::read_f32(dir / "generator.f32"));
    if (ckpt.encoder_id() != meta.at("encoder_id").get<std::string>())
      throw FormatError(dir.string() + ": encoder payload does not match its recorded identity");
    return ckpt;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError((dir / "meta.json").string() + ": " + ex.what());
  }
}

Encoding encode(std::span<const float> tile, const Networks<float>& nets) {
  const auto feature = nets.encoder.forward(single(tile, nets.arch));
  const auto latent = nets.projection.forward(feature);
  return {{feature.data.begin(), feature.data.end()}, {latent.data.begin(), latent.data.end()}};
}

std::vector<float> autoencode(std::span<const float> tile, const Networks<float>& nets) {
  const auto y = nets.autoencode(single(tile, nets.arch));
  return {y.data.begin(), y.data.end()};
}

std::vector<float> generate(std::span<const float> z, const Networks<float>& nets) {
  if (z.size() != static_cast<std::size_t>(nets.arch.latent))
    throw ShapeError("latent sample must have " + std::to_string(nets.arch.latent) +
                     " components, got " + std::to_string(z.size()));
  nn::Tensor<float> x(nets.latent_shape(1));
  std::copy(z.begin(), z.end(), x.data.begin());
  const auto y = nets.generator.forward(x);
  return {y.data.begin(), y.data.end()};
}

nn::Tensor<float> make_batch(std::span<const std::vector<float>> tiles,
                             std::span<const std::size_t> pick, const Architecture& arch) {
  nn::Tensor<float> x({1, static_cast<int>(pick.size()), arch.height, arch.width});
  for (std::size_t i = 0; i < pick.size(); ++i) {
    const auto& t = tiles[pick[i]];
    if (t.size() != arch.tile_size()) throw ShapeError("tile size does not match architecture");
    std::copy(t.begin(), t.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * arch.tile_size()));
  }
  return x;
}

std::vector<float> encode_feature_maps(std::span<const std::vector<float>> tiles,
                                       const Networks<float>& nets, int batch) {
  const auto& arch = nets.arch;
  const std::size_t fsize = arch.feature_size();
  const std::size_t plane = static_cast<std::size_t>(arch.feature_height()) * arch.feature_width();
  std::vector<float> out(tiles.size() * fsize);
  std::vector<std::size_t> pick;
  for (std::size_t start = 0; start < tiles.size(); start += batch) {
    const std::size_t nb = std::min<std::size_t>(batch, tiles.size() - start);
    pick.resize(nb);
    std::iota(pick.begin(), pick.end(), start);
    const auto fm = nets.encoder.forward(make_batch(tiles, pick, arch));
    // (C, nb, H, W) -> per-sample (C, H, W)
    for (int c = 0; c < arch.feature_channels(); ++c)
      for (std::size_t n = 0; n < nb; ++n)
        std::copy_n(fm.data.begin() + static_cast<std::ptrdiff_t>((c * nb + n) * plane), plane,
                    out.begin() + static_cast<std::ptrdiff_t>((start + n) * fsize + c * plane));
  }
  return out;
}

TrainResult train(std::span<const std::vector<float>> tiles, const TrainConfig& config,
                  const dsp::NormalizationStats& stats, const Architecture& arch,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (tiles.empty()) throw Error("BEGAN training needs a non-empty chunk store");
  if (config.epochs < 1 || config.batch < 1) throw ConfigError("epochs and batch must be positive");
  Trainer trainer(arch, config);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 1));
  std::mt19937_64 latent_rng(derive_seed(config.seed, 2));

  TrainResult result;
  std::vector<std::size_t> order(tiles.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  int non_finite = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t nb = std::min<std::size_t>(config.batch, order.size() - start);
      const auto real = make_batch(tiles, std::span(order).subspan(start, nb), arch);
      const auto z = sample_latent(latent_rng, arch.latent, static_cast<int>(nb));
      try {
        result.steps.push_back(trainer.step(real, z));
        non_finite = 0;
      } catch (const NumericError&) {
        if (++non_finite >= kMaxNonFiniteSteps) throw;
      }
    }
    EpochLog log{epoch};
    if (!result.steps.empty()) {
      const auto& last = result.steps.back();
      log = {epoch, last.l_real, last.l_gen, last.k, last.m_global};
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.checkpoint = Checkpoint{std::move(trainer.networks()), trainer.equilibrium(), config, stats,
                                 nlohmann::json::object()};
  return result;
}

void write_epoch_log(const fs::path& path, std::span<const EpochLog> log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,l_real,l_gen,k,m_global\n";
  for (const auto& e : log)
    out << e.epoch << "," << e.l_real << "," << e.l_gen << "," << e.k << "," << e.m_global << "\n";
  io::write_text(path, out.str());
}

}  // namespace audioaffect::began
