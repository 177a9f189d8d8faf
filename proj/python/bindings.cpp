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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "audioaffect/affect.hpp"
#include "audioaffect/began.hpp"
#include "audioaffect/dataset.hpp"
#include "audioaffect/dsp.hpp"
#include "audioaffect/error.hpp"
#include "audioaffect/eval.hpp"
#include "audioaffect/pipeline.hpp"

namespace py = pybind11;
namespace aa = audioaffect;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const float> view(const FloatArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }
std::span<const double> view(const DoubleArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

FloatArray to_array(const std::vector<float>& v) {
  FloatArray out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FloatArray tile_array(const std::vector<float>& v) {
  FloatArray out(std::vector<py::ssize_t>{aa::dsp::kBins, aa::dsp::kFrames});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict five_number(const aa::eval::FiveNumber& f) {
  py::dict d;
  d["min"] = f.min;
  d["q1"] = f.q1;
  d["median"] = f.median;
  d["q3"] = f.q3;
  d["max"] = f.max;
  return d;
}

// Loaded checkpoint pair for repeated inference.
class Predictor {
 public:
  Predictor(const std::filesystem::path& began_dir, const std::filesystem::path& head_dir)
      : began_(aa::began::load_checkpoint(began_dir)), head_(aa::affect::load_head(head_dir)) {
    aa::affect::check_compatible(began_, head_);
  }

  std::pair<double, double> predict_tile(const FloatArray& tile) const {
    const auto p = aa::affect::predict_chunk(view(tile), began_, head_);
    return {p.arousal, p.valence};
  }

  FloatArray encode(const FloatArray& tile) const {
    return to_array(aa::began::encode(view(tile), began_.nets).latent);
  }

  std::pair<double, double> stats() const { return {began_.stats.log_floor, began_.stats.log_ceil}; }
  std::string encoder_id() const { return began_.encoder_id(); }

 private:
  aa::began::Checkpoint began_;
  aa::affect::HeadCheckpoint head_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "audioaffect core: spectrogram preprocessing, BEGAN representation, affect regression";

  py::register_exception<aa::Error>(m, "AudioAffectError", PyExc_RuntimeError);

  m.attr("TILE_BINS") = aa::dsp::kBins;
  m.attr("TILE_FRAMES") = aa::dsp::kFrames;

  m.def("read_wav", [](const std::filesystem::path& p) {
    const auto clip = aa::dsp::read_wav(p);
    return py::make_tuple(to_array(clip.samples), clip.sample_rate);
  }, py::arg("path"), "Decode a WAV file to (mono float32 samples, sample rate).");

  m.def("resample_to_16k", [](const FloatArray& samples, int rate) {
    aa::dsp::AudioClip clip{{view(samples).begin(), view(samples).end()}, rate, {}};
    return to_array(aa::dsp::resample_to_16k(clip).samples);
  }, py::arg("samples"), py::arg("sample_rate"));

  m.def("chunk_1s", [](const FloatArray& samples) {
    aa::dsp::AudioClip clip{{view(samples).begin(), view(samples).end()}, aa::dsp::kTargetRate, {}};
    std::vector<FloatArray> out;
    for (const auto& c : aa::dsp::chunk_1s(clip)) out.push_back(to_array(c));
    return out;
  }, py::arg("samples"), "Split 16 kHz samples into full one-second chunks.");

  m.def("compute_norm_stats", [](const std::vector<FloatArray>& chunks) {
    std::vector<std::vector<float>> cs;
    for (const auto& c : chunks) cs.emplace_back(view(c).begin(), view(c).end());
    const auto s = aa::dsp::compute_norm_stats(cs);
    return std::make_pair(s.log_floor, s.log_ceil);
  }, py::arg("chunks"));

  m.def("stft_tile", [](const FloatArray& chunk, double log_floor, double log_ceil) {
    return tile_array(aa::dsp::stft_tile(view(chunk), {log_floor, log_ceil}).values);
  }, py::arg("chunk"), py::arg("log_floor"), py::arg("log_ceil"));

  m.def("pixel_loss", [](const FloatArray& a, const FloatArray& b) {
    return aa::began::pixel_loss(view(a), view(b));
  });

  m.def("update_equilibrium", [](double k, double gamma, double lambda_k, double l_real, double l_gen) {
    const auto eq = aa::began::update_equilibrium({k, gamma, lambda_k, 0.0}, {l_real, l_gen});
    return std::make_pair(eq.k, eq.m_global);
  }, py::arg("k"), py::arg("gamma"), py::arg("lambda_k"), py::arg("l_real"), py::arg("l_gen"),
     "One proportional-control update; returns (k, m_global).");

  m.def("ccc", [](const DoubleArray& pred, const DoubleArray& truth) {
    return aa::eval::ccc(view(pred), view(truth));
  }, py::arg("pred"), py::arg("truth"));

  m.def("aggregate_median", [](const std::vector<std::pair<double, double>>& chunks) {
    std::vector<aa::affect::EmotionPrediction> preds;
    for (const auto& [a, v] : chunks) preds.push_back({a, v, "", std::nullopt});
    const auto agg = aa::eval::aggregate_median(preds);
    return std::make_pair(agg.arousal, agg.valence);
  }, py::arg("chunks"), "Per-dimension median of (arousal, valence) chunk predictions.");

  m.def("boxplot_stats", [](const DoubleArray& values) {
    return five_number(aa::eval::boxplot_stats(view(values)));
  });

  m.def("generate_synthetic_corpus", [](int n, std::uint64_t seed, const std::filesystem::path& dir) {
    return aa::dataset::generate_synthetic_corpus(n, seed, dir);
  }, py::arg("n"), py::arg("seed"), py::arg("dir"));

  m.def("parse_manifest", [](const std::filesystem::path& p) {
    py::list out;
    for (const auto& e : aa::dataset::parse_manifest(p)) {
      py::dict d;
      d["utterance_id"] = e.utterance_id;
      d["audio_path"] = e.audio_path.generic_string();
      d["arousal"] = e.label ? py::object(py::float_(e.label->arousal)) : py::object(py::none());
      d["valence"] = e.label ? py::object(py::float_(e.label->valence)) : py::object(py::none());
      out.append(d);
    }
    return out;
  });

  m.def("predict_wav", [](const std::filesystem::path& wav, const std::filesystem::path& began_dir,
                          const std::filesystem::path& head_dir) {
    return aa::pipeline::predict(wav, began_dir, head_dir).dump();
  }, py::arg("wav"), py::arg("began_dir"), py::arg("head_dir"),
     "Prediction document for one WAV file, as a JSON string.");

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<const std::filesystem::path&, const std::filesystem::path&>(),
           py::arg("began_dir"), py::arg("head_dir"))
      .def("predict_tile", &Predictor::predict_tile, py::arg("tile"))
      .def("encode", &Predictor::encode, py::arg("tile"))
      .def_property_readonly("stats", &Predictor::stats)
      .def_property_readonly("encoder_id", &Predictor::encoder_id);
}
