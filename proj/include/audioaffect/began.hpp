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

// Boundary-equilibrium GAN over spectrogram tiles. The discriminator is an
// autoencoder (encoder convolutions -> dense latent -> decoder); its encoder
// is what the regression head reuses. The generator shares the decoder's
// architecture but not its weights.

#ifndef AUDIOAFFECT_BEGAN_HPP_
#define AUDIOAFFECT_BEGAN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "audioaffect/dataset.hpp"
#include "audioaffect/dsp.hpp"
#include "audioaffect/nn.hpp"

namespace audioaffect::began {

struct Architecture {
  int height = dsp::kBins;
  int width = dsp::kFrames;
  std::vector<int> channels{32, 64, 128, 256};  // one stride-2 convolution each
  int latent = 64;

  int feature_height() const { return height >> channels.size(); }
  int feature_width() const { return width >> channels.size(); }
  int feature_channels() const { return channels.back(); }
  std::size_t feature_size() const {
    return static_cast<std::size_t>(feature_channels()) * feature_height() * feature_width();
  }
  std::size_t tile_size() const { return static_cast<std::size_t>(height) * width; }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// 4x4 tiles, two stages, tiny widths. Used by the gradient checks.
Architecture miniature_architecture();

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

template <typename T>
nn::Sequential<T> build_encoder(const Architecture& a) {
  a.validate();
  nn::Sequential<T> net;
  int in = 1;
  for (int c : a.channels) {
    net.template add<nn::Conv2d<T>>(in, c, 3, 2, 1);
    net.template add<nn::Elu<T>>();
    in = c;
  }
  return net;
}

template <typename T>
nn::Sequential<T> build_projection(const Architecture& a) {
  nn::Sequential<T> net;
  net.template add<nn::Flatten<T>>();
  net.template add<nn::Dense<T>>(static_cast<int>(a.feature_size()), a.latent);
  return net;
}

// latent -> tile. Each stage convolves at the current resolution then
// upsamples 2x; a final convolution with tanh emits one channel.
template <typename T>
nn::Sequential<T> build_decoder(const Architecture& a) {
  a.validate();
  nn::Sequential<T> net;
  net.template add<nn::Dense<T>>(a.latent, static_cast<int>(a.feature_size()));
  net.template add<nn::Elu<T>>();
  net.template add<nn::Unflatten<T>>(a.feature_channels(), a.feature_height(), a.feature_width());
  int in = a.feature_channels();
  for (std::size_t s = a.channels.size(); s-- > 0;) {
    const int out = s > 0 ? a.channels[s - 1] : std::max(1, a.channels.front() / 2);
    net.template add<nn::Conv2d<T>>(in, out, 3, 1, 1);
    net.template add<nn::Elu<T>>();
    net.template add<nn::Upsample2x<T>>();
    in = out;
  }
  net.template add<nn::Conv2d<T>>(in, 1, 3, 1, 1);
  net.template add<nn::Tanh<T>>();
  return net;
}

template <typename T>
struct Networks {
  Architecture arch;
  nn::Sequential<T> encoder;     // tile -> feature map
  nn::Sequential<T> projection;  // feature map -> latent code
  nn::Sequential<T> decoder;     // latent code -> reconstruction
  nn::Sequential<T> generator;   // latent sample -> tile

  static Networks create(const Architecture& arch, std::uint64_t seed) {
    Networks n{arch, build_encoder<T>(arch), build_projection<T>(arch), build_decoder<T>(arch),
               build_decoder<T>(arch)};
    std::mt19937_64 rng(seed);
    n.encoder.initialize(rng);
    n.projection.initialize(rng);
    n.decoder.initialize(rng);
    n.generator.initialize(rng);
    return n;
  }

  std::vector<nn::Param<T>*> discriminator_params() {
    auto out = encoder.params();
    for (auto* p : projection.params()) out.push_back(p);
    for (auto* p : decoder.params()) out.push_back(p);
    return out;
  }
  std::vector<const nn::Param<T>*> encoder_params() const {
    auto out = encoder.params();
    for (const auto* p : projection.params()) out.push_back(p);
    return out;
  }

  nn::Shape tile_shape(int batch) const { return {1, batch, arch.height, arch.width}; }
  nn::Shape latent_shape(int batch) const { return {arch.latent, batch, 1, 1}; }

  nn::Tensor<T> autoencode(const nn::Tensor<T>& x) const {
    return decoder.forward(projection.forward(encoder.forward(x)));
  }
};

/// Autoencoder activations of one forward pass, kept for backprop.
template <typename T>
struct AutoencoderTrace {
  nn::Trace<T> encoder;
  nn::Trace<T> projection;
  nn::Trace<T> decoder;
};

template <typename T>
const nn::Tensor<T>& autoencode(const Networks<T>& n, const nn::Tensor<T>& x,
                                AutoencoderTrace<T>& trace) {
  n.encoder.forward(x, trace.encoder);
  n.projection.forward(trace.encoder.output(), trace.projection);
  return n.decoder.forward(trace.projection.output(), trace.decoder);
}

template <typename T>
nn::Tensor<T> backward_autoencoder(Networks<T>& n, const AutoencoderTrace<T>& trace,
                                   nn::Tensor<T> d_reconstruction, bool need_input_grad) {
  auto d = n.decoder.backward(trace.decoder, std::move(d_reconstruction));
  d = n.projection.backward(trace.projection, std::move(d));
  return n.encoder.backward(trace.encoder, std::move(d), need_input_grad);
}

struct Losses {
  double l_real = 0.0;
  double l_gen = 0.0;
};

/// Fills the parameter gradients of one BEGAN step:
///   discriminator: d/dD (L_real - k L_gen), generator: d/dG L_gen,
/// with L_real = |x - D(x)|, L_gen = |G(z) - D(G(z))| (mean absolute error).
/// The generated batch is held fixed inside the discriminator objective.
template <typename T>
Losses compute_gradients(Networks<T>& n, const nn::Tensor<T>& real, const nn::Tensor<T>& z,
                         double k) {
  n.encoder.zero_grad();
  n.projection.zero_grad();
  n.decoder.zero_grad();
  n.generator.zero_grad();

  nn::Trace<T> gen_trace;
  const nn::Tensor<T>& fake = n.generator.forward(z, gen_trace);

  Losses losses;
  nn::Tensor<T> d_fake;
  {
    AutoencoderTrace<T> trace;
    const auto& rec = autoencode(n, fake, trace);
    nn::Tensor<T> g(rec.shape);
    losses.l_gen = nn::l1_loss<T>(rec.data, fake.data, g.data);
    d_fake = backward_autoencoder(n, trace, g, true);
    // Direct path of |G(z) - D(G(z))| with respect to G(z).
    for (std::size_t i = 0; i < d_fake.data.size(); ++i) d_fake.data[i] -= g.data[i];
    const T scale = static_cast<T>(-k);
    for (auto* p : n.discriminator_params())
      for (auto& v : p->grad) v *= scale;
  }
  {
    AutoencoderTrace<T> trace;
    const auto& rec = autoencode(n, real, trace);
    nn::Tensor<T> g(rec.shape);
    losses.l_real = nn::l1_loss<T>(rec.data, real.data, g.data);
    backward_autoencoder(n, trace, g, false);
  }
  n.generator.backward(gen_trace, d_fake, false);
  return losses;
}

/// Gradient of L_real alone over the discriminator (reconstruction-only training).
template <typename T>
double compute_reconstruction_gradients(Networks<T>& n, const nn::Tensor<T>& real) {
  n.encoder.zero_grad();
  n.projection.zero_grad();
  n.decoder.zero_grad();
  AutoencoderTrace<T> trace;
  const auto& rec = autoencode(n, real, trace);
  nn::Tensor<T> g(rec.shape);
  const double loss = nn::l1_loss<T>(rec.data, real.data, g.data);
  backward_autoencoder(n, trace, g, false);
  return loss;
}

struct EquilibriumState {
  double k = 0.0;
  double gamma = 0.7;
  double lambda_k = 0.001;
  double m_global = 0.0;
  bool operator==(const EquilibriumState&) const = default;
};

/// k <- clamp(k + lambda_k (gamma L_real - L_gen), 0, 1);
/// m_global <- L_real + |gamma L_real - L_gen|.
EquilibriumState update_equilibrium(const EquilibriumState& eq, const Losses& losses);

/// Mean absolute difference of two equally shaped value sets.
double pixel_loss(std::span<const float> a, std::span<const float> b);

/// z ~ U[-1, 1]^latent for each batch column.
nn::Tensor<float> sample_latent(std::mt19937_64& rng, int latent, int batch);

struct TrainConfig {
  int epochs = 100;
  int batch = 16;
  double gamma = 0.7;
  double lambda_k = 0.001;
  double lr = 1e-4;
  std::uint64_t seed = 0;
};

struct StepLog {
  long step = 0;
  double l_real = 0.0;
  double l_gen = 0.0;
  double k = 0.0;
  double m_global = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double l_real = 0.0;  // values of the epoch's last step
  double l_gen = 0.0;
  double k = 0.0;
  double m_global = 0.0;
};

/// Owns the networks, optimizers and control state of one training run.
class Trainer {
 public:
  Trainer(const Architecture& arch, const TrainConfig& config);

  /// One BEGAN update. Throws NumericError (leaving all state untouched) if a
  /// loss is not finite.
  StepLog step(const nn::Tensor<float>& real, const nn::Tensor<float>& z);
  /// Discriminator-only update on L_real; the control state is not touched.
  double reconstruction_step(const nn::Tensor<float>& real);

  const Networks<float>& networks() const { return nets_; }
  Networks<float>& networks() { return nets_; }
  const EquilibriumState& equilibrium() const { return eq_; }
  long steps() const { return steps_; }

 private:
  Networks<float> nets_;
  EquilibriumState eq_;
  nn::Adam<float> adam_d_;
  nn::Adam<float> adam_g_;
  long steps_ = 0;
};

struct Checkpoint {
  Networks<float> nets;
  EquilibriumState equilibrium;
  TrainConfig config;
  dsp::NormalizationStats stats;
  nlohmann::json run_config = nlohmann::json::object();  // echoed verbatim

  /// Fingerprint of the encoder and latent projection parameters.
  std::string encoder_id() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct Encoding {
  std::vector<float> feature_map;  // channels x feature_height x feature_width
  std::vector<float> latent;
};

Encoding encode(std::span<const float> tile, const Networks<float>& nets);
std::vector<float> autoencode(std::span<const float> tile, const Networks<float>& nets);
std::vector<float> generate(std::span<const float> z, const Networks<float>& nets);

/// Feature maps for a list of tiles, sample-major (one feature_size() block each).
std::vector<float> encode_feature_maps(std::span<const std::vector<float>> tiles,
                                       const Networks<float>& nets, int batch = 16);

nn::Tensor<float> make_batch(std::span<const std::vector<float>> tiles,
                             std::span<const std::size_t> pick, const Architecture& arch);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> epochs;
  std::vector<StepLog> steps;
};

/// Full training over a set of tiles: epochs x ceil(n / batch) steps with a
/// seeded shuffle per epoch. on_epoch, when set, sees every epoch log.
TrainResult train(std::span<const std::vector<float>> tiles, const TrainConfig& config,
                  const dsp::NormalizationStats& stats, const Architecture& arch = {},
                  const std::function<void(const EpochLog&)>& on_epoch = {});

void write_epoch_log(const std::filesystem::path& path, std::span<const EpochLog> log);

}  // namespace audioaffect::began

#endif  // AUDIOAFFECT_BEGAN_HPP_
