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

#ifndef NSX_AD_AUDIO_HPP_
#define NSX_AD_AUDIO_HPP_

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsx/ad/graph.hpp"
#include "nsx/signal/stft.hpp"

namespace nsx {
namespace ad {

// Inverse STFT of stacked RI planes [2, F, T] to a waveform of the given
// length. Linear, so the backward pass is the exact adjoint: window the
// incoming gradient into frames and project onto the inverse DFT basis.
template <typename S>
int istft_op(Graph<S>& g, int spec, int64_t length, const StftConfig& cfg = {}) {
  const Tensor<S>& vx = g.val(spec);
  if (vx.rank() != 3 || vx.dim(0) != 2 || vx.dim(1) != cfg.bins())
    throw std::invalid_argument("istft_op: want [2, F, T] matching config, got " + vx.shape_str());
  int64_t F = vx.dim(1), T = vx.dim(2);
  const auto& tab = stft_detail::tables_for(cfg.win);
  std::vector<double> wd = stft_detail::sqrt_hann(cfg.win);

  // inverse basis and window in working precision
  EMat<S> inv(cfg.win, 2 * F);
  for (int n = 0; n < cfg.win; ++n)
    for (int64_t f = 0; f < 2 * F; ++f) inv(n, f) = static_cast<S>(tab.inv(n, f));
  std::vector<S> w(wd.size());
  for (size_t i = 0; i < wd.size(); ++i) w[i] = static_cast<S>(wd[i]);

  EMat<S> z(T, 2 * F);
  const S* d = vx.data();
  for (int64_t f = 0; f < F; ++f)
    for (int64_t t = 0; t < T; ++t) {
      z(t, f) = d[f * T + t];
      z(t, F + f) = d[F * T + f * T + t];
    }
  EMat<S> frames = z * inv.transpose();

  int64_t pad_left = cfg.win / 2;
  std::vector<S> acc(static_cast<size_t>((T - 1) * cfg.hop + cfg.win), S(0));
  for (int64_t m = 0; m < T; ++m)
    for (int n = 0; n < cfg.win; ++n)
      acc[static_cast<size_t>(m * cfg.hop + n)] += frames(m, n) * w[static_cast<size_t>(n)];

  Tensor<S> y({length});
  for (int64_t i = 0; i < length; ++i) {
    int64_t p = i + pad_left;
    if (p < static_cast<int64_t>(acc.size())) y[i] = acc[static_cast<size_t>(p)];
  }

  return g.make(std::move(y), [spec, F, T, length, cfg, inv, w, pad_left](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    int64_t acc_len = (T - 1) * cfg.hop + cfg.win;
    std::vector<S> gacc(static_cast<size_t>(acc_len), S(0));
    for (int64_t i = 0; i < length; ++i) {
      int64_t p = i + pad_left;
      if (p < acc_len) gacc[static_cast<size_t>(p)] = gy[i];
    }
    EMat<S> gframes(T, cfg.win);
    for (int64_t m = 0; m < T; ++m)
      for (int n = 0; n < cfg.win; ++n)
        gframes(m, n) = gacc[static_cast<size_t>(m * cfg.hop + n)] * w[static_cast<size_t>(n)];
    EMat<S> gz = gframes * inv;  // [T, 2F]
    Tensor<S>& gx = gr.grad(spec);
    S* gd = gx.data();
    for (int64_t f = 0; f < F; ++f)
      for (int64_t t = 0; t < T; ++t) {
        gd[f * T + t] += gz(t, f);
        gd[F * T + f * T + t] += gz(t, F + f);
      }
  });
}

// Negative scale-invariant SDR of an estimate against a fixed reference,
// in dB, clamped to [-60, 60]. At the clamp the gradient is zero.
template <typename S>
int si_sdr_loss(Graph<S>& g, int est, const std::vector<S>& ref) {
  const Tensor<S>& ve = g.val(est);
  if (ve.rank() != 1 || ve.size() != static_cast<int64_t>(ref.size()))
    throw std::invalid_argument("si_sdr_loss: length mismatch");
  int64_t n = ve.size();
  double a = 0, b = 0, ee = 0;
  for (int64_t i = 0; i < n; ++i) {
    a += static_cast<double>(ve[i]) * static_cast<double>(ref[static_cast<size_t>(i)]);
    b += static_cast<double>(ref[static_cast<size_t>(i)]) * static_cast<double>(ref[static_cast<size_t>(i)]);
    ee += static_cast<double>(ve[i]) * static_cast<double>(ve[i]);
  }
  double num = b > 0 ? a * a / b : 0.0;
  double den = ee - num;
  double sisdr;
  bool clamped = false;
  if (num <= 0 || den <= 0 || b <= 0) {
    // degenerate: zero projection or perfect match; clamp decides the sign
    sisdr = den <= 0 ? 60.0 : -60.0;
    clamped = true;
  } else {
    sisdr = 10.0 * std::log10(num / den);
    if (sisdr > 60.0) {
      sisdr = 60.0;
      clamped = true;
    } else if (sisdr < -60.0) {
      sisdr = -60.0;
      clamped = true;
    }
  }

  Tensor<S> y = Tensor<S>::scalar(static_cast<S>(-sisdr));
  std::vector<S> ref_copy = ref;
  return g.make(std::move(y), [est, ref_copy, a, b, num, den, clamped, n](Graph<S>& gr, int self) {
    if (clamped) return;
    S go = gr.grad(self)[0];
    const Tensor<S>& ve2 = gr.val(est);
    Tensor<S>& ge = gr.grad(est);
    double k = 10.0 / std::log(10.0);
    double c1 = 2.0 * a / b / num;   // d num / d est scaled by 1/num
    double c2 = 2.0 / den;           // applied to (est - a s / b)
    double ab = a / b;
    for (int64_t i = 0; i < n; ++i) {
      double ds = c1 * ref_copy[static_cast<size_t>(i)] -
                  c2 * (static_cast<double>(ve2[i]) - ab * ref_copy[static_cast<size_t>(i)]);
      ge[i] += go * static_cast<S>(-k * ds);
    }
  });
}

}  // namespace ad
}  // namespace nsx

#endif  // NSX_AD_AUDIO_HPP_
