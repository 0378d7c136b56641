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

#ifndef NSX_SIGNAL_STFT_HPP_
#define NSX_SIGNAL_STFT_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsx/core/tensor.hpp"

namespace nsx {

// Analysis/synthesis framing. Defaults: 16 ms window, 8 ms hop at 16 kHz,
// 256-point DFT, 129 one-sided bins. Square-root periodic Hann on both
// sides gives exact constant overlap-add at hop = win/2.
struct StftConfig {
  int win = 256;
  int hop = 128;

  int bins() const { return win / 2 + 1; }
  // Frame count under centered padding.
  int64_t frames(int64_t length) const {
    return (length + hop - 1) / hop + 1;
  }
};

// Complex STFT stored as stacked real/imaginary planes: [2, F, T].
struct ComplexSpectrogram {
  Tensor<float> ri;
  StftConfig cfg;

  int64_t bins() const { return ri.dim(1); }
  int64_t frames() const { return ri.dim(2); }
};

namespace stft_detail {

inline std::vector<double> sqrt_hann(int win) {
  std::vector<double> w(static_cast<size_t>(win));
  for (int n = 0; n < win; ++n)
    w[static_cast<size_t>(n)] = std::sqrt(0.5 * (1.0 - std::cos(2.0 * M_PI * n / win)));
  return w;
}

inline int64_t mirror_index(int64_t i, int64_t len) {
  if (len == 1) return 0;
  int64_t period = 2 * (len - 1);
  i = ((i % period) + period) % period;
  return i < len ? i : period - i;
}

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DftTables {
  Mat fwd_re, fwd_im;  // [F x win]
  Mat inv;             // [win x 2F], one-sided inverse with symmetry weights

  explicit DftTables(int win) {
    int bins = win / 2 + 1;
    fwd_re.resize(bins, win);
    fwd_im.resize(bins, win);
    inv.resize(win, 2 * bins);
    for (int f = 0; f < bins; ++f) {
      double weight = (f == 0 || f == win / 2) ? 1.0 : 2.0;
      for (int n = 0; n < win; ++n) {
        double ang = 2.0 * M_PI * f * n / win;
        fwd_re(f, n) = std::cos(ang);
        fwd_im(f, n) = -std::sin(ang);
        inv(n, f) = weight * std::cos(ang) / win;
        inv(n, bins + f) = -weight * std::sin(ang) / win;
      }
    }
  }
};

inline const DftTables& tables_for(int win) {
  static thread_local int cached_win = -1;
  static thread_local DftTables* cached = nullptr;
  if (cached_win != win) {
    delete cached;
    cached = new DftTables(win);
    cached_win = win;
  }
  return *cached;
}

// Centered framing: pad win/2 on the left by reflection, enough on the
// right to cover frames() full windows.
inline Mat frame_signal(const std::vector<float>& x, const StftConfig& cfg) {
  int64_t len = static_cast<int64_t>(x.size());
  int64_t nframes = cfg.frames(len);
  int64_t pad_left = cfg.win / 2;
  Mat frames(nframes, cfg.win);
  for (int64_t m = 0; m < nframes; ++m) {
    for (int n = 0; n < cfg.win; ++n) {
      int64_t src = m * cfg.hop + n - pad_left;
      frames(m, n) = x[static_cast<size_t>(mirror_index(src, len))];
    }
  }
  return frames;
}

}  // namespace stft_detail

inline ComplexSpectrogram stft(const std::vector<float>& wave, const StftConfig& cfg = {}) {
  using namespace stft_detail;
  if (wave.empty()) throw std::invalid_argument("stft: empty input");
  const DftTables& tab = tables_for(cfg.win);
  std::vector<double> w = sqrt_hann(cfg.win);
  Mat frames = frame_signal(wave, cfg);
  for (int64_t m = 0; m < frames.rows(); ++m)
    for (int n = 0; n < cfg.win; ++n) frames(m, n) *= w[static_cast<size_t>(n)];
  Mat re = frames * tab.fwd_re.transpose();  // [T x F]
  Mat im = frames * tab.fwd_im.transpose();
  int64_t F = cfg.bins(), T = frames.rows();
  ComplexSpectrogram out{Tensor<float>({2, F, T}), cfg};
  float* d = out.ri.data();
  for (int64_t f = 0; f < F; ++f)
    for (int64_t t = 0; t < T; ++t) {
      d[f * T + t] = static_cast<float>(re(t, f));
      d[F * T + f * T + t] = static_cast<float>(im(t, f));
    }
  return out;
}

inline std::vector<float> istft(const ComplexSpectrogram& spec, int64_t length) {
  using namespace stft_detail;
  const StftConfig& cfg = spec.cfg;
  int64_t F = spec.bins(), T = spec.frames();
  if (F != cfg.bins()) throw std::invalid_argument("istft: bin count does not match config");
  if (length < 0) throw std::invalid_argument("istft: negative length");
  const DftTables& tab = tables_for(cfg.win);
  std::vector<double> w = sqrt_hann(cfg.win);

  Mat z(T, 2 * F);
  const float* d = spec.ri.data();
  for (int64_t f = 0; f < F; ++f)
    for (int64_t t = 0; t < T; ++t) {
      z(t, f) = d[f * T + t];
      z(t, F + f) = d[F * T + f * T + t];
    }
  Mat frames = z * tab.inv.transpose();  // [T x win]

  int64_t pad_left = cfg.win / 2;
  std::vector<double> acc(static_cast<size_t>((T - 1) * cfg.hop + cfg.win), 0.0);
  for (int64_t m = 0; m < T; ++m)
    for (int n = 0; n < cfg.win; ++n)
      acc[static_cast<size_t>(m * cfg.hop + n)] += frames(m, n) * w[static_cast<size_t>(n)];

  std::vector<float> out(static_cast<size_t>(length), 0.0f);
  for (int64_t i = 0; i < length; ++i) {
    int64_t p = i + pad_left;
    if (p < static_cast<int64_t>(acc.size())) out[static_cast<size_t>(i)] = static_cast<float>(acc[static_cast<size_t>(p)]);
  }
  return out;
}

}  // namespace nsx

#endif  // NSX_SIGNAL_STFT_HPP_
