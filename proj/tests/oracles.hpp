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

// Reference computations written independently of the library code.

#ifndef AUDIOAFFECT_TESTS_ORACLES_HPP_
#define AUDIOAFFECT_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace audioaffect::testing {

// Concordance from pairwise differences: with population moments,
// var(x) = sum_ij (x_i - x_j)^2 / (2 n^2) and likewise for the covariance,
// so no mean is ever subtracted.
inline double brute_force_ccc(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  long double vx = 0, vy = 0, cov = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    for (std::size_t j = 0; j < n; ++j) {
      const long double dx = static_cast<long double>(x[i]) - x[j];
      const long double dy = static_cast<long double>(y[i]) - y[j];
      vx += dx * dx;
      vy += dy * dy;
      cov += dx * dy;
    }
  }
  const long double n2 = 2.0L * n * n;
  vx /= n2;
  vy /= n2;
  cov /= n2;
  const long double shift = sx / n - sy / n;
  const long double denom = vx + vy + shift * shift;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * cov / denom);
}

// Linear-interpolation quantile: position p (n - 1) in the sorted values.
inline double reference_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(pos));
  const auto above = static_cast<std::size_t>(std::ceil(pos));
  const double w = pos - static_cast<double>(below);
  return v[below] * (1.0 - w) + v[above] * w;
}

}  // namespace audioaffect::testing

#endif  // AUDIOAFFECT_TESTS_ORACLES_HPP_
