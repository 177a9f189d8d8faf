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

// Small CPU neural-network toolkit used by the representation and regression
// models. Everything is templated on the scalar so that training runs in
// float while gradient checks run the identical code in double.
//
// Activations use a channel-major batch layout (C, N, H, W): a convolution
// over the whole batch is then a single GEMM whose output rows are channels,
// and a dense layer sees a (features x batch) matrix with H = W = 1.

#ifndef AUDIOAFFECT_NN_HPP_
#define AUDIOAFFECT_NN_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "audioaffect/error.hpp"

namespace audioaffect::nn {

struct Shape {
  int channels = 0;
  int batch = 0;
  int height = 1;
  int width = 1;

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const {
    return static_cast<std::size_t>(channels) * batch * plane();
  }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.channels) + "," + std::to_string(s.batch) + "," +
         std::to_string(s.height) + "," + std::to_string(s.width) + ")";
}

// Storage aligned to the widest vector register. Eigen peels reductions up
// to the first aligned element, so without this the summation order (and
// the rounding) would depend on where the heap placed a buffer.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}

  T& at(int c, int n, int y, int x) {
    return data[((static_cast<std::size_t>(c) * shape.batch + n) * shape.height + y) *
                    shape.width + x];
  }
  T at(int c, int n, int y, int x) const {
    return data[((static_cast<std::size_t>(c) * shape.batch + n) * shape.height + y) *
                    shape.width + x];
  }
};

template <typename T>
struct Param {
  Buffer<T> value;
  Buffer<T> grad;
  // Zero for biases; weights are initialized from their fan-in/fan-out.
  int fan_in = 0;
  int fan_out = 0;

  Param() = default;
  Param(std::size_t n, int in, int out) : value(n, T(0)), grad(n, T(0)), fan_in(in), fan_out(out) {}
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using VectorMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x) const = 0;
  // x and y are the input and output of the matching forward call. Parameter
  // gradients are accumulated, never overwritten.
  virtual Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                             bool need_input_grad) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  virtual std::vector<const Param<T>*> params() const { return {}; }
  virtual std::unique_ptr<Layer<T>> clone() const = 0;
};

// 2-D convolution with square kernel, zero padding and equal strides.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad)
      : in_(in_channels),
        out_(out_channels),
        k_(kernel),
        stride_(stride),
        pad_(pad),
        weight_(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel,
                in_channels * kernel * kernel, out_channels * kernel * kernel),
        bias_(out_channels, 0, 0) {}

  Shape output_shape(const Shape& in) const override {
    if (in.channels != in_)
      throw ShapeError("conv expects " + std::to_string(in_) + " channels, got " +
                       to_string(in));
    if (in.height + 2 * pad_ < k_ || in.width + 2 * pad_ < k_)
      throw ShapeError("conv input too small: " + to_string(in));
    return {out_, in.batch, (in.height + 2 * pad_ - k_) / stride_ + 1,
            (in.width + 2 * pad_ - k_) / stride_ + 1};
  }

  Tensor<T> forward(const Tensor<T>& x) const override {
    const Shape os = output_shape(x.shape);
    Tensor<T> y(os);
    const int plane = static_cast<int>(os.plane());
    const int block = std::max(1, kColumnBudget / plane);
    const int rows = in_ * k_ * k_;
    ConstMatrixMap<T> w(weight_.value.data(), out_, rows);
    MatrixMap<T> out(y.data.data(), out_, static_cast<Eigen::Index>(os.batch) * plane);
    Buffer<T> cols;
    for (int n0 = 0; n0 < os.batch; n0 += block) {
      const int nb = std::min(block, os.batch - n0);
      im2col(x, os, stride_, n0, nb, cols);
      ConstMatrixMap<T> c(cols.data(), rows, static_cast<Eigen::Index>(nb) * plane);
      out.middleCols(static_cast<Eigen::Index>(n0) * plane,
                     static_cast<Eigen::Index>(nb) * plane)
          .noalias() = w * c;
    }
    for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                     bool need_input_grad) override {
    const Shape os = y.shape;
    const int plane = static_cast<int>(os.plane());
    const int block = std::max(1, kColumnBudget / plane);
    const int rows = in_ * k_ * k_;
    ConstMatrixMap<T> w(weight_.value.data(), out_, rows);
    MatrixMap<T> dw(weight_.grad.data(), out_, rows);
    ConstMatrixMap<T> g(dy.data.data(), out_, static_cast<Eigen::Index>(os.batch) * plane);
    VectorMap<T>(bias_.grad.data(), out_) += g.rowwise().sum();

    Buffer<T> cols;
    for (int n0 = 0; n0 < os.batch; n0 += block) {
      const int nb = std::min(block, os.batch - n0);
      const auto span_cols = static_cast<Eigen::Index>(nb) * plane;
      im2col(x, os, stride_, n0, nb, cols);
      dw.noalias() += g.middleCols(static_cast<Eigen::Index>(n0) * plane, span_cols) *
                      ConstMatrixMap<T>(cols.data(), rows, span_cols).transpose();
    }
    if (!need_input_grad) return {};

    Tensor<T> dx(x.shape);
    if (stride_ == 1 && 2 * pad_ == k_ - 1) {
      // Same-size stride-1 convolution: the input gradient is the output
      // gradient convolved with the spatially flipped, channel-transposed kernel.
      const int trows = out_ * k_ * k_;
      RowMatrix<T> flipped(in_, trows);
      for (int o = 0; o < out_; ++o)
        for (int c = 0; c < in_; ++c)
          for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx)
              flipped(c, (o * k_ + ky) * k_ + kx) =
                  w(o, (c * k_ + (k_ - 1 - ky)) * k_ + (k_ - 1 - kx));
      MatrixMap<T> out(dx.data.data(), in_, static_cast<Eigen::Index>(os.batch) * plane);
      for (int n0 = 0; n0 < os.batch; n0 += block) {
        const int nb = std::min(block, os.batch - n0);
        const auto span_cols = static_cast<Eigen::Index>(nb) * plane;
        im2col(dy, x.shape, 1, n0, nb, cols);
        out.middleCols(static_cast<Eigen::Index>(n0) * plane, span_cols).noalias() =
            flipped * ConstMatrixMap<T>(cols.data(), trows, span_cols);
      }
      return dx;
    }
    Buffer<T> dcols;
    for (int n0 = 0; n0 < os.batch; n0 += block) {
      const int nb = std::min(block, os.batch - n0);
      const auto span_cols = static_cast<Eigen::Index>(nb) * plane;
      dcols.resize(static_cast<std::size_t>(rows) * span_cols);
      MatrixMap<T>(dcols.data(), rows, span_cols).noalias() =
          w.transpose() * g.middleCols(static_cast<Eigen::Index>(n0) * plane, span_cols);
      col2im(dcols, os, n0, nb, dx);
    }
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  std::vector<const Param<T>*> params() const override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  // Upper bound on im2col columns per GEMM. Small blocks keep the scratch
  // buffer cache-resident; low-resolution layers still batch several samples.
  static constexpr int kColumnBudget = 1024;

  // Output columns [lo, hi) whose input column ox * stride - pad + kx is in range.
  void valid_range(int kx, int stride, int in_width, int out_width, int& lo, int& hi) const {
    const int shift = kx - pad_;
    lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
    hi = (in_width - 1 - shift) < 0 ? 0 : (in_width - 1 - shift) / stride + 1;
    hi = std::min(hi, out_width);
    lo = std::min(lo, hi);
  }

  // Patch matrix of x for output geometry os: row (c, ky, kx), column
  // (n - n0, oy, ox). Channel count is taken from x.
  void im2col(const Tensor<T>& x, const Shape& os, int stride, int n0, int nb,
              Buffer<T>& cols) const {
    const Shape& is = x.shape;
    const std::size_t plane = os.plane();
    const std::size_t width = nb * plane;
    cols.resize(static_cast<std::size_t>(is.channels) * k_ * k_ * width);
    for (int c = 0; c < is.channels; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          int lo, hi;
          valid_range(kx, stride, is.width, os.width, lo, hi);
          const int shift = kx - pad_;
          T* row = cols.data() + ((static_cast<std::size_t>(c) * k_ + ky) * k_ + kx) * width;
          for (int n = 0; n < nb; ++n) {
            const T* src = x.data.data() +
                           (static_cast<std::size_t>(c) * is.batch + n0 + n) * is.plane();
            for (int oy = 0; oy < os.height; ++oy) {
              T* dst = row + n * plane + static_cast<std::size_t>(oy) * os.width;
              const int iy = oy * stride - pad_ + ky;
              if (iy < 0 || iy >= is.height) {
                std::fill(dst, dst + os.width, T(0));
                continue;
              }
              const T* line = src + static_cast<std::ptrdiff_t>(iy) * is.width + shift;
              std::fill(dst, dst + lo, T(0));
              if (stride == 1) {
                std::copy(line + lo, line + hi, dst + lo);
              } else {
                for (int ox = lo; ox < hi; ++ox) dst[ox] = line[ox * stride];
              }
              std::fill(dst + hi, dst + os.width, T(0));
            }
          }
        }
      }
    }
  }

  void col2im(const Buffer<T>& cols, const Shape& os, int n0, int nb, Tensor<T>& dx) const {
    const Shape& is = dx.shape;
    const std::size_t plane = os.plane();
    const std::size_t width = nb * plane;
    for (int c = 0; c < in_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          int lo, hi;
          valid_range(kx, stride_, is.width, os.width, lo, hi);
          const int shift = kx - pad_;
          const T* row =
              cols.data() + ((static_cast<std::size_t>(c) * k_ + ky) * k_ + kx) * width;
          for (int n = 0; n < nb; ++n) {
            T* dst = dx.data.data() +
                     (static_cast<std::size_t>(c) * is.batch + n0 + n) * is.plane();
            for (int oy = 0; oy < os.height; ++oy) {
              const int iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= is.height) continue;
              const T* src = row + n * plane + static_cast<std::size_t>(oy) * os.width;
              T* line = dst + static_cast<std::ptrdiff_t>(iy) * is.width + shift;
              for (int ox = lo; ox < hi; ++ox) line[ox * stride_] += src[ox];
            }
          }
        }
      }
    }
  }

  int in_;
  int out_;
  int k_;
  int stride_;
  int pad_;
  Param<T> weight_;
  Param<T> bias_;
};

// Fully connected layer over a (features, N, 1, 1) tensor.
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int out_features)
      : in_(in_features),
        out_(out_features),
        weight_(static_cast<std::size_t>(in_features) * out_features, in_features, out_features),
        bias_(out_features, 0, 0) {}

  Shape output_shape(const Shape& in) const override {
    if (in.channels != in_ || in.plane() != 1)
      throw ShapeError("dense expects (" + std::to_string(in_) + ",N,1,1), got " +
                       to_string(in));
    return {out_, in.batch, 1, 1};
  }

  Tensor<T> forward(const Tensor<T>& x) const override {
    Tensor<T> y(output_shape(x.shape));
    const int n = x.shape.batch;
    MatrixMap<T> out(y.data.data(), out_, n);
    out.noalias() = ConstMatrixMap<T>(weight_.value.data(), out_, in_) *
                    ConstMatrixMap<T>(x.data.data(), in_, n);
    for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy,
                     bool need_input_grad) override {
    const int n = x.shape.batch;
    ConstMatrixMap<T> g(dy.data.data(), out_, n);
    ConstMatrixMap<T> w(weight_.value.data(), out_, in_);
    MatrixMap<T>(weight_.grad.data(), out_, in_).noalias() +=
        g * ConstMatrixMap<T>(x.data.data(), in_, n).transpose();
    VectorMap<T>(bias_.grad.data(), out_) += g.rowwise().sum();
    Tensor<T> dx;
    if (need_input_grad) {
      dx = Tensor<T>(x.shape);
      MatrixMap<T>(dx.data.data(), in_, n).noalias() = w.transpose() * g;
    }
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  std::vector<const Param<T>*> params() const override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  int in_;
  int out_;
  Param<T> weight_;
  Param<T> bias_;
};

// (C, N, H, W) -> (C*H*W, N, 1, 1), feature index c*H*W + y*W + x.
template <typename T>
class Flatten final : public Layer<T> {
 public:
  Shape output_shape(const Shape& in) const override {
    return {static_cast<int>(in.channels * in.plane()), in.batch, 1, 1};
  }
  Tensor<T> forward(const Tensor<T>& x) const override {
    Tensor<T> y(output_shape(x.shape));
    permute(x.shape, x.data.data(), y.data.data(), false);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy,
                     bool need_input_grad) override {
    Tensor<T> dx;
    if (!need_input_grad) return dx;
    dx = Tensor<T>(x.shape);
    permute(x.shape, dy.data.data(), dx.data.data(), true);
    return dx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

  // Moves between the channel-major spatial layout and the flat layout.
  static void permute(const Shape& spatial, const T* src, T* dst, bool to_spatial) {
    const std::size_t plane = spatial.plane();
    const std::size_t batch = spatial.batch;
    for (int c = 0; c < spatial.channels; ++c)
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t s = (c * batch + n) * plane + p;
          const std::size_t f = (c * plane + p) * batch + n;
          if (to_spatial)
            dst[s] = src[f];
          else
            dst[f] = src[s];
        }
  }
};

// Inverse of Flatten for a fixed (C, H, W).
template <typename T>
class Unflatten final : public Layer<T> {
 public:
  Unflatten(int channels, int height, int width) : c_(channels), h_(height), w_(width) {}

  Shape output_shape(const Shape& in) const override {
    if (in.channels != c_ * h_ * w_ || in.plane() != 1)
      throw ShapeError("unflatten expects " + std::to_string(c_ * h_ * w_) + " features, got " +
                       to_string(in));
    return {c_, in.batch, h_, w_};
  }
  Tensor<T> forward(const Tensor<T>& x) const override {
    Tensor<T> y(output_shape(x.shape));
    Flatten<T>::permute(y.shape, x.data.data(), y.data.data(), true);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                     bool need_input_grad) override {
    Tensor<T> dx;
    if (!need_input_grad) return dx;
    dx = Tensor<T>(x.shape);
    Flatten<T>::permute(y.shape, dy.data.data(), dx.data.data(), false);
    return dx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Unflatten>(*this); }

 private:
  int c_;
  int h_;
  int w_;
};

template <typename T>
class Elu final : public Layer<T> {
 public:
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x) const override {
    Tensor<T> y(x.shape);
    using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
    const auto n = static_cast<Eigen::Index>(x.data.size());
    Eigen::Map<const Array> in(x.data.data(), n);
    Eigen::Map<Array>(y.data.data(), n) = (in > T(0)).select(in, in.min(T(0)).expm1());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                     bool) override {
    Tensor<T> dx(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      dx.data[i] = x.data[i] > T(0) ? dy.data[i] : dy.data[i] * (y.data[i] + T(1));
    return dx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Elu>(*this); }
};

template <typename T>
class Tanh final : public Layer<T> {
 public:
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const Tensor<T>& x) const override {
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = std::tanh(x.data[i]);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                     bool) override {
    Tensor<T> dx(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      dx.data[i] = dy.data[i] * (T(1) - y.data[i] * y.data[i]);
    return dx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Tanh>(*this); }
};

// Nearest-neighbour 2x upsampling in both spatial dimensions.
template <typename T>
class Upsample2x final : public Layer<T> {
 public:
  Shape output_shape(const Shape& in) const override {
    return {in.channels, in.batch, in.height * 2, in.width * 2};
  }
  Tensor<T> forward(const Tensor<T>& x) const override {
    const Shape is = x.shape;
    Tensor<T> y(output_shape(is));
    const std::size_t planes = static_cast<std::size_t>(is.channels) * is.batch;
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = x.data.data() + p * is.plane();
      T* dst = y.data.data() + p * is.plane() * 4;
      for (int r = 0; r < is.height * 2; ++r)
        for (int c = 0; c < is.width * 2; ++c)
          dst[static_cast<std::size_t>(r) * is.width * 2 + c] =
              src[static_cast<std::size_t>(r / 2) * is.width + c / 2];
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy,
                     bool need_input_grad) override {
    Tensor<T> dx;
    if (!need_input_grad) return dx;
    const Shape is = x.shape;
    dx = Tensor<T>(is);
    const std::size_t planes = static_cast<std::size_t>(is.channels) * is.batch;
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = dy.data.data() + p * is.plane() * 4;
      T* dst = dx.data.data() + p * is.plane();
      for (int r = 0; r < is.height * 2; ++r)
        for (int c = 0; c < is.width * 2; ++c)
          dst[static_cast<std::size_t>(r / 2) * is.width + c / 2] +=
              src[static_cast<std::size_t>(r) * is.width * 2 + c];
    }
    return dx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Upsample2x>(*this); }
};

// Activations recorded by a training forward pass: values[0] is the input,
// values[i + 1] the output of layer i.
template <typename T>
struct Trace {
  std::vector<Tensor<T>> values;
  const Tensor<T>& output() const { return values.back(); }
};

template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& other) {
    if (this != &other) *this = Sequential(other);
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  Sequential& add(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return *this;
  }

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

  Shape output_shape(Shape in) const {
    for (const auto& l : layers_) in = l->output_shape(in);
    return in;
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> cur = x;
    for (const auto& l : layers_) cur = l->forward(cur);
    return cur;
  }

  const Tensor<T>& forward(const Tensor<T>& x, Trace<T>& trace) const {
    trace.values.clear();
    trace.values.reserve(layers_.size() + 1);
    trace.values.push_back(x);
    for (const auto& l : layers_) trace.values.push_back(l->forward(trace.values.back()));
    return trace.values.back();
  }

  // Returns the gradient with respect to the traced input (empty when
  // need_input_grad is false).
  Tensor<T> backward(const Trace<T>& trace, Tensor<T> dy, bool need_input_grad = true) {
    if (trace.values.size() != layers_.size() + 1)
      throw Error("backward called with a trace from a different network");
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const bool need = need_input_grad || i > 0;
      dy = layers_[i]->backward(trace.values[i], trace.values[i + 1], dy, need);
    }
    return dy;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }
  std::vector<const Param<T>*> params() const {
    std::vector<const Param<T>*> out;
    for (const auto& l : layers_)
      for (const auto* p : std::as_const(*l).params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : params()) n += p->value.size();
    return n;
  }

  // Glorot-uniform weights, zero biases.
  void initialize(std::mt19937_64& rng) {
    for (auto* p : params()) {
      if (p->fan_in == 0) {
        std::fill(p->value.begin(), p->value.end(), T(0));
        continue;
      }
      const double limit = std::sqrt(6.0 / (p->fan_in + p->fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& v : p->value) v = static_cast<T>(dist(rng));
    }
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <typename T>
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<Param<T>*> params, Options options)
      : params_(std::move(params)), opt_(options) {
    for (const auto* p : params_) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(opt_.beta1);
    const T b2 = static_cast<T>(opt_.beta2);
    const T step = static_cast<T>(opt_.lr / c1);
    const T eps = static_cast<T>(opt_.eps);
    const T root_c2 = static_cast<T>(std::sqrt(c2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const T g = p.grad[j];
        m[j] = b1 * m[j] + (T(1) - b1) * g;
        v[j] = b2 * v[j] + (T(1) - b2) * g * g;
        p.value[j] -= step * m[j] / (std::sqrt(v[j]) / root_c2 + eps);
      }
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<Param<T>*> params_;
  Options opt_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  long t_ = 0;
};

// Mean absolute difference; optionally writes d/da into grad.
template <typename T>
double l1_loss(std::span<const T> a, std::span<const T> b, std::span<T> grad = {}) {
  if (a.size() != b.size() || a.empty())
    throw ShapeError("l1 loss needs equal, non-empty inputs");
  double sum = 0.0;
  const T scale = static_cast<T>(1.0 / static_cast<double>(a.size()));
  const bool want_grad = !grad.empty();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += std::abs(d);
    if (want_grad) grad[i] = d > 0 ? scale : (d < 0 ? -scale : T(0));
  }
  return sum / static_cast<double>(a.size());
}

// Mean squared difference; optionally writes d/da into grad.
template <typename T>
double mse_loss(std::span<const T> a, std::span<const T> b, std::span<T> grad = {}) {
  if (a.size() != b.size() || a.empty())
    throw ShapeError("mse loss needs equal, non-empty inputs");
  double sum = 0.0;
  const double scale = 2.0 / static_cast<double>(a.size());
  const bool want_grad = !grad.empty();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
    if (want_grad) grad[i] = static_cast<T>(scale * d);
  }
  return sum / static_cast<double>(a.size());
}

// Concatenated parameter values, in network order.
template <typename T>
std::vector<T> gather_values(const std::vector<const Param<T>*>& params) {
  std::vector<T> out;
  for (const auto* p : params) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

template <typename T>
void scatter_values(const std::vector<Param<T>*>& params, std::span<const T> values) {
  std::size_t total = 0;
  for (const auto* p : params) total += p->value.size();
  if (total != values.size())
    throw ShapeError("parameter payload has " + std::to_string(values.size()) +
                     " values, network expects " + std::to_string(total));
  std::size_t off = 0;
  for (auto* p : params) {
    std::copy_n(values.begin() + off, p->value.size(), p->value.begin());
    off += p->value.size();
  }
}

}  // namespace audioaffect::nn

#endif  // AUDIOAFFECT_NN_HPP_
