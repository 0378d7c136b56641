// Copyright 2026 The nsx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NSX_AD_INIT_HPP_
#define NSX_AD_INIT_HPP_

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <vector>

#include "nsx/ad/graph.hpp"
#include "nsx/core/rng.hpp"

namespace nsx {
namespace ad {

// Uniform fan-in scaling: U(-sqrt(1/fan_in), sqrt(1/fan_in)).
template <typename S>
Tensor<S> kaiming_uniform(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  Tensor<S> t(std::move(shape));
  double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

// Orthogonal rows-by-cols matrix via QR of a gaussian, sign-fixed so the
// decomposition is unique.
template <typename S>
Tensor<S> orthogonal(int64_t rows, int64_t cols, Rng& rng) {
  using DMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  int64_t big = std::max(rows, cols), small = std::min(rows, cols);
  DMat gauss(big, small);
  for (int64_t i = 0; i < big; ++i)
    for (int64_t j = 0; j < small; ++j) gauss(i, j) = rng.normal();
  Eigen::HouseholderQR<DMat> qr(gauss);
  DMat q = qr.householderQ() * DMat::Identity(big, small);
  DMat r = qr.matrixQR().topLeftCorner(small, small).template triangularView<Eigen::Upper>();
  for (int64_t j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  if (rows < cols) q.transposeInPlace();

  Tensor<S> t({rows, cols});
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) t[i * cols + j] = static_cast<S>(q(i, j));
  return t;
}

// Recurrent weight [4H, H]: four independently orthogonal H x H blocks.
template <typename S>
Tensor<S> orthogonal_gates(int64_t H, Rng& rng) {
  Tensor<S> t({4 * H, H});
  for (int gate = 0; gate < 4; ++gate) {
    Tensor<S> q = orthogonal<S>(H, H, rng);
    std::copy(q.data(), q.data() + H * H, t.data() + gate * H * H);
  }
  return t;
}

}  // namespace ad
}  // namespace nsx

#endif  // NSX_AD_INIT_HPP_
